import uuid

from django.db import models


class SimulationRun(models.Model):
    class Status(models.TextChoices):
        OK = "ok", "Ok"
        VIOLATION = "violation", "Violation"
        ERROR = "error", "Error"

    id = models.UUIDField(primary_key=True, default=uuid.uuid4, editable=False)
    scenario = models.CharField(max_length=255)
    subcommand = models.CharField(max_length=32)
    schedule_id = models.CharField(max_length=255, blank=True, default="")
    seed = models.IntegerField(default=0)
    digest = models.CharField(max_length=64, blank=True, default="")
    status = models.CharField(max_length=16, choices=Status.choices, default=Status.OK)
    report = models.JSONField(default=dict, blank=True)
    created_at = models.DateTimeField(auto_now_add=True)

    class Meta:
        ordering = ["-created_at"]

    def __str__(self):
        return f"{self.scenario} {self.subcommand} ({self.status})"
