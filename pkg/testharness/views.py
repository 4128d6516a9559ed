import json
import logging

from django.http import JsonResponse
from django.views.decorators.csrf import csrf_exempt

from coremodel.errors import RTAError
from dsl.pipeline import explore_prepared, prepare, run_summary
from dsl.scenario import ScenarioConfig

from .models import SimulationRun

logger = logging.getLogger(__name__)


def _parse_int(val, default):
    try:
        return int(val)
    except (TypeError, ValueError):
        return default


def _run_to_dict(run: SimulationRun, full: bool = False) -> dict:
    data = {
        "id": str(run.id),
        "scenario": run.scenario,
        "subcommand": run.subcommand,
        "schedule_id": run.schedule_id,
        "seed": run.seed,
        "digest": run.digest,
        "status": run.status,
        "created_at": run.created_at.isoformat() if run.created_at else None,
    }
    if full:
        data["report"] = run.report
    return data


@csrf_exempt
def run_list_view(request):
    """
    GET /runs/?status=violation&scenario=car&page=1&page_size=20
    """
    if request.method != "GET":
        return JsonResponse({"detail": "Method not allowed"}, status=405)

    page = _parse_int(request.GET.get("page"), 1) or 1
    page_size = _parse_int(request.GET.get("page_size"), 20) or 20
    if page_size > 100:
        page_size = 100

    qs = SimulationRun.objects.all()
    status = request.GET.get("status")
    if status:
        qs = qs.filter(status=status)
    scenario = request.GET.get("scenario")
    if scenario:
        qs = qs.filter(scenario__icontains=scenario.strip())

    total = qs.count()
    start = (page - 1) * page_size
    end = start + page_size

    return JsonResponse(
        {
            "pagination": {
                "page": page,
                "page_size": page_size,
                "total": total,
                "has_next": end < total,
            },
            "results": [_run_to_dict(r) for r in qs[start:end]],
        },
        status=200,
    )


@csrf_exempt
def run_detail_view(request, run_id):
    if request.method != "GET":
        return JsonResponse({"detail": "Method not allowed"}, status=405)

    run = SimulationRun.objects.filter(id=run_id).first()
    if run is None:
        return JsonResponse({"detail": "Run not found", "error": "run_not_found"}, status=404)
    return JsonResponse(_run_to_dict(run, full=True), status=200)


@csrf_exempt
def simulate_view(request):
    """
    POST /runs/simulate/
    {"scenario": {"PLANT": "battery", "SEED": "3", "HORIZON": "5000"}}

    Runs one trace of the scenario and stores it as a SimulationRun.
    """
    if request.method != "POST":
        return JsonResponse({"detail": "Method not allowed"}, status=405)

    try:
        data = json.loads(request.body.decode() or "{}")
    except (json.JSONDecodeError, UnicodeDecodeError):
        return JsonResponse({"detail": "Body must be JSON", "error": "invalid_json"}, status=400)

    values = data.get("scenario")
    if not isinstance(values, dict):
        return JsonResponse({"detail": "scenario is required", "error": "missing_scenario"}, status=400)

    try:
        scenario = ScenarioConfig.from_mapping(values)
        prepared = prepare(scenario)
        outcome = explore_prepared(prepared, single=True).outcomes[0]
    except RTAError as exc:
        return JsonResponse({"detail": exc.detail, "error": exc.code}, status=400)

    summary = run_summary(prepared, outcome.trace, outcome.report)
    run = SimulationRun.objects.create(
        scenario=scenario.name,
        subcommand="run",
        schedule_id=outcome.schedule_id,
        seed=scenario.seed,
        digest=outcome.digest,
        status=SimulationRun.Status.OK if outcome.ok else SimulationRun.Status.VIOLATION,
        report=json.loads(json.dumps(summary, default=str)),
    )
    logger.info("simulated %s: %s", scenario.name, run.status)
    return JsonResponse(_run_to_dict(run, full=True), status=201)
