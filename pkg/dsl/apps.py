from django.apps import AppConfig


class DslConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'dsl'
