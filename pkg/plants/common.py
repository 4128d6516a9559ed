from enum import Enum
from typing import NamedTuple, Tuple

from coremodel.nodes import NodeSpec
from rta.modules import RTAModuleSpec


class Deployment(str, Enum):
    RTA = "rta"
    AC_ONLY = "ac-only"
    SC_ONLY = "sc-only"


class Deployed(NamedTuple):
    modules: Tuple[RTAModuleSpec, ...]
    controllers: Tuple[NodeSpec, ...]
    monitors: Tuple[RTAModuleSpec, ...]


def deploy(module: RTAModuleSpec, deployment=Deployment.RTA) -> Deployed:
    """
    What `module` contributes to a system under a deployment.

    ac-only and sc-only run the chosen controller ungated, with no
    decision module. The node keeps its AC/SC kind so fault targeting
    still finds it, and the module stays as a monitor so its φ_safe is
    still audited.
    """
    deployment = Deployment(deployment)
    if deployment == Deployment.RTA:
        return Deployed((module,), (), ())
    controller = module.ac if deployment == Deployment.AC_ONLY else module.sc
    return Deployed((), (controller,), (module,))
