from django.urls import path

from .views import run_detail_view, run_list_view, simulate_view

urlpatterns = [
    path("", run_list_view, name="run-list"),
    path("simulate/", simulate_view, name="run-simulate"),
    path("<uuid:run_id>/", run_detail_view, name="run-detail"),
]
