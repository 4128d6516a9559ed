"""
Precomputed region masks on disk.

Two formats:

- ``.npz``: numpy archive with ``cells``, ``bounds``, ``resolution``, ``samples``
- anything else: text, a short header then one row of 0/1 per
  leading-axis index (row-major, last axis along the line)

    # rta region mask
    resolution 100 100
    bounds -1.2 0.6 -0.07 0.07
    samples corners
    0011...
"""
import logging
from pathlib import Path
from typing import Union

import numpy as np

from .grid import GridSpec, ReachabilityError, RegionMask

logger = logging.getLogger(__name__)

HEADER = "# rta region mask"


def save_mask(path: Union[str, Path], mask: RegionMask) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    grid = mask.grid
    if path.suffix == ".npz":
        np.savez_compressed(
            path,
            cells=mask.cells,
            bounds=grid.bounds,
            resolution=np.asarray(grid.resolution),
            samples=np.asarray(grid.samples),
        )
    else:
        rows = mask.as_array().reshape(-1, grid.resolution[-1]).astype(np.uint8)
        lines = [
            HEADER,
            "resolution " + " ".join(str(n) for n in grid.resolution),
            "bounds " + " ".join(repr(float(b)) for b in grid.bounds.reshape(-1)),
            f"samples {grid.samples}",
        ]
        lines.extend("".join(str(v) for v in row) for row in rows)
        path.write_text("\n".join(lines) + "\n")
    logger.info("saved mask (%d/%d cells) to %s", mask.count(), grid.size, path)
    return path


def load_mask(path: Union[str, Path]) -> RegionMask:
    path = Path(path)
    if not path.exists():
        raise ReachabilityError("mask_not_found", str(path))
    if path.suffix == ".npz":
        with np.load(path) as data:
            grid = GridSpec(data["bounds"], data["resolution"].tolist(), samples=str(data["samples"]))
            return RegionMask(grid, data["cells"])

    lines = [ln.strip() for ln in path.read_text().splitlines() if ln.strip()]
    if not lines or lines[0] != HEADER:
        raise ReachabilityError("malformed_mask", f"{path}: missing header")
    meta = {}
    body = []
    for ln in lines[1:]:
        key, _, rest = ln.partition(" ")
        if key in ("resolution", "bounds", "samples"):
            meta[key] = rest.split()
        else:
            body.append(ln)
    try:
        resolution = [int(n) for n in meta["resolution"]]
        bounds = np.asarray([float(b) for b in meta["bounds"]]).reshape(-1, 2)
        samples = meta.get("samples", ["corners"])[0]
    except (KeyError, ValueError) as exc:
        raise ReachabilityError("malformed_mask", f"{path}: bad header ({exc})") from exc
    grid = GridSpec(bounds, resolution, samples=samples)
    bits = "".join(body)
    if len(bits) != grid.size or set(bits) - {"0", "1"}:
        raise ReachabilityError("malformed_mask", f"{path}: expected {grid.size} cells of 0/1")
    return RegionMask(grid, np.frombuffer(bits.encode(), dtype=np.uint8) == ord("1"))
