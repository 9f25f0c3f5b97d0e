from django.apps import AppConfig

class NonstrategicConfig(AppConfig):
    name = "nonstrategic"
    verbose_name = "Level-0 automata"
