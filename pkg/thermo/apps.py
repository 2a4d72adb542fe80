from django.apps import AppConfig


class ThermoConfig(AppConfig):
    default_auto_field = "django.db.models.BigAutoField"
    name = "thermo"
    verbose_name = "Thermo-visco-elastic solver"
