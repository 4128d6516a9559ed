from django.apps import AppConfig


class TestharnessConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'testharness'
