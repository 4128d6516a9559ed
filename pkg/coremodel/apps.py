from django.apps import AppConfig


class CoremodelConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'coremodel'
