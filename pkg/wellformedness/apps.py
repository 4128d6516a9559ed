from django.apps import AppConfig


class WellformednessConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'wellformedness'
