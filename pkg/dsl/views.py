import json

from django.http import JsonResponse
from django.views.decorators.csrf import csrf_exempt

from coremodel.errors import RTAError

from .pipeline import check_source
from .scenario import ScenarioConfig


@csrf_exempt
def check_view(request):
    """
    POST /dsl/check/
    {
        "source": "topic state : coord; ...",
        "scenario": {"PLANT": "mountain-car", "RESOLUTION": "40,40"}
    }

    Returns parse diagnostics, or the well-formedness report of every
    rta module in the program.
    """
    if request.method != "POST":
        return JsonResponse({"detail": "Method not allowed"}, status=405)

    try:
        data = json.loads(request.body.decode() or "{}")
    except (json.JSONDecodeError, UnicodeDecodeError):
        return JsonResponse({"detail": "Body must be JSON", "error": "invalid_json"}, status=400)

    source = data.get("source")
    if not isinstance(source, str):
        return JsonResponse({"detail": "source is required", "error": "missing_source"}, status=400)

    try:
        scenario = ScenarioConfig.from_mapping(data.get("scenario") or {})
        result = check_source(source, scenario)
    except RTAError as exc:
        return JsonResponse({"detail": exc.detail, "error": exc.code}, status=400)

    return JsonResponse(result, status=200)
