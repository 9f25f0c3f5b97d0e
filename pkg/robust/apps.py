from django.apps import AppConfig

class RobustConfig(AppConfig):
    name = "robust"
