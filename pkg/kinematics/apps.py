from django.apps import AppConfig

class KinematicsConfig(AppConfig):
    name = "kinematics"
    verbose_name = "Kinematics (trajectory actions)"
