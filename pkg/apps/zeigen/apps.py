from django.apps import AppConfig


class ZeigenConfig(AppConfig):
    name = 'apps.zeigen'
    verbose_name = 'Tensor Z-eigenpair solver'
