from django.apps import AppConfig

class GamecoreConfig(AppConfig):
    name = "gamecore"
    verbose_name = "Game tree and utilities"
