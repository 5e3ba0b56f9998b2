from django.apps import AppConfig


class RadialKsConfig(AppConfig):
    name = 'radial_ks'
    verbose_name = 'Radial flux-limited Keller-Segel simulator'
