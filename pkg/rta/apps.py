from django.apps import AppConfig


class RtaConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'rta'
