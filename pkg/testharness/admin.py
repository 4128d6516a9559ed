from django.contrib import admin

from .models import SimulationRun


@admin.register(SimulationRun)
class SimulationRunAdmin(admin.ModelAdmin):
    list_display = ("scenario", "subcommand", "status", "schedule_id", "seed", "created_at")
    list_filter = ("status", "subcommand")
    search_fields = ("scenario", "schedule_id", "digest")
    readonly_fields = ("id", "digest", "report", "created_at")
