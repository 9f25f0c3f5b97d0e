from django.db import models
from django.utils import timezone


class SweepRun(models.Model):
    class Status(models.TextChoices):
        RUNNING = "RUNNING", "Running"
        DONE = "DONE", "Done"
        FAILED = "FAILED", "Failed"

    scenario = models.CharField(max_length=8, db_index=True)
    source = models.CharField(max_length=255, blank=True)
    status = models.CharField(max_length=10, choices=Status.choices, default=Status.RUNNING)
    seed = models.IntegerField(default=0)

    # Snapshots of what was run
    models_run = models.JSONField(default=list, blank=True)
    config = models.JSONField(default=dict, blank=True)
    metrics = models.JSONField(default=list, blank=True)

    created_at = models.DateTimeField(auto_now_add=True)
    finished_at = models.DateTimeField(blank=True, null=True)

    def mark_done(self, metrics):
        self.status = self.Status.DONE
        self.metrics = metrics
        self.finished_at = timezone.now()
        self.save(update_fields=["status", "metrics", "finished_at"])

    def mark_failed(self):
        self.status = self.Status.FAILED
        self.finished_at = timezone.now()
        self.save(update_fields=["status", "finished_at"])

    def __str__(self):
        return f"{self.scenario} sweep #{self.pk} ({self.get_status_display()})"


class RunOutcome(models.Model):
    sweep = models.ForeignKey(SweepRun, related_name="outcomes", on_delete=models.CASCADE)
    model = models.CharField(max_length=10, db_index=True)
    cell = models.PositiveIntegerField()

    speeds = models.JSONField(default=list)
    types = models.JSONField(default=list)
    actions = models.JSONField(default=list, blank=True)

    success = models.BooleanField(default=False)
    crash = models.BooleanField(default=False)
    stuck = models.BooleanField(default=False)
    min_gap = models.FloatField(blank=True, null=True, help_text="Smallest pairwise gap in metres")

    class Meta:
        ordering = ["sweep", "model", "cell"]
        constraints = [
            models.UniqueConstraint(fields=["sweep", "model", "cell"], name="unique_outcome_per_cell"),
        ]

    def __str__(self):
        return f"{self.model} cell {self.cell}: {'success' if self.success else 'crash' if self.crash else 'fail'}"
