"""
Django settings for the chemotaxis_lab project.

The project carries no web surface and no database: Django provides the
settings layer, logging configuration, management-command CLI, form
validation of run configurations and the test runner.

For the full list of settings and their values, see
https://docs.djangoproject.com/en/4.2/ref/settings/
"""

from pathlib import Path
import os

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent

# Only used by Django internals (signing); nothing here is secret.
SECRET_KEY = os.getenv('DJANGO_SECRET_KEY', 'django-insecure-radial-ks-local-only')

DEBUG = os.getenv('DJANGO_DEBUG', 'false').lower() == 'true'

ALLOWED_HOSTS = []

# Application definition

INSTALLED_APPS = [
    'radial_ks',
]

# No persistence beyond flat files: the dummy backend keeps the ORM unused.
DATABASES = {}

# Internationalization

LANGUAGE_CODE = 'en-us'

TIME_ZONE = 'UTC'

USE_I18N = False

USE_TZ = True


# Simulation defaults
# Any key can be overridden with an environment variable, e.g.
#   export RADIAL_KS_CFL=0.3
#   export RADIAL_KS_WORKERS=8

def _env_float(name, default):
    value = os.getenv(name)
    return float(value) if value else default


def _env_int(name, default):
    value = os.getenv(name)
    return int(value) if value else default


RADIAL_KS = {
    # explicit RK2 safety factor; 0.4 keeps the n=3 origin cell stable
    'CFL': _env_float('RADIAL_KS_CFL', 0.4),
    'BLOWUP_FACTOR': _env_float('RADIAL_KS_BLOWUP_FACTOR', 1e3),
    'DT_MIN': _env_float('RADIAL_KS_DT_MIN', 1e-12),
    'SAMPLE_STRIDE': _env_int('RADIAL_KS_SAMPLE_STRIDE', 200),
    'T_END': _env_float('RADIAL_KS_T_END', 20.0),
    'MAX_RETRIES': _env_int('RADIAL_KS_MAX_RETRIES', 20),
    # bounded-run ceiling on peak max u / initial max u
    'BOUNDED_RATIO': _env_float('RADIAL_KS_BOUNDED_RATIO', 10.0),
    'WORKERS': _env_int('RADIAL_KS_WORKERS', os.cpu_count() or 1),
    'VERIFY_LEVELS': _env_int('RADIAL_KS_VERIFY_LEVELS', 3),
    'VERIFY_BASE_CELLS': _env_int('RADIAL_KS_VERIFY_BASE_CELLS', 48),
}

# Logging configuration
LOG_DIR = Path(os.getenv('RADIAL_KS_LOG_DIR', BASE_DIR / 'logs'))
LOG_DIR.mkdir(parents=True, exist_ok=True)
LOG_LEVEL = os.getenv('RADIAL_KS_LOG_LEVEL', 'INFO')

LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'verbose': {
            'format': '{levelname} {asctime} {module} {process:d} {thread:d} {message}',
            'style': '{',
        },
        'simple': {
            'format': '{levelname} {asctime} {message}',
            'style': '{',
        },
    },
    'handlers': {
        'file': {
            'level': 'DEBUG',
            'class': 'logging.FileHandler',
            'filename': LOG_DIR / 'radial_ks.log',
            'formatter': 'verbose',
        },
        'console': {
            'level': LOG_LEVEL,
            'class': 'logging.StreamHandler',
            'formatter': 'simple',
        },
    },
    'root': {
        'handlers': ['file', 'console'],
        'level': 'WARNING',
    },
    'loggers': {
        'django': {
            'handlers': ['file', 'console'],
            'level': 'INFO',
            'propagate': False,
        },
        'radial_ks': {
            'handlers': ['file', 'console'],
            'level': 'DEBUG',
            'propagate': False,
        },
    },
}
