"""
ASGI config for the rtasim project.

Only plain HTTP is served; simulations run in-process per request.
"""
import os

from django.core.asgi import get_asgi_application

os.environ.setdefault("DJANGO_SETTINGS_MODULE", "rtasim.settings")

application = get_asgi_application()
