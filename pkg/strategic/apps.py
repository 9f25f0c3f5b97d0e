from django.apps import AppConfig

class StrategicConfig(AppConfig):
    name = "strategic"
    verbose_name = "Level-1 and equilibrium solvers"
