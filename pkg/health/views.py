from datetime import datetime, timezone

from django.db import connection
from django.db.utils import DatabaseError
from django.http import JsonResponse

from plants.registry import PLANTS


def health_view(request):
    reachable = True
    try:
        with connection.cursor() as cursor:
            cursor.execute("SELECT 1;")
            reachable = cursor.fetchone() == (1,)
    except DatabaseError:
        reachable = False

    return JsonResponse(
        {
            "ok": reachable,
            "db": {
                "reachable": reachable,
                "vendor": connection.vendor,
            },
            "plants": sorted(PLANTS),
            "timestamp": int(datetime.now(timezone.utc).timestamp() * 1000)
        },
        status=200 if reachable else 503,
    )
