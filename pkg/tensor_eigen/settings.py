"""
Django settings for tensor_eigen project.
"""

from pathlib import Path
from decouple import config

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent

# No HTTP surface is served; the key only satisfies Django's startup checks.
SECRET_KEY = config('SECRET_KEY', default='django-insecure-tensor-eigen-local-key')

DEBUG = config('DEBUG', default=False, cast=bool)

ALLOWED_HOSTS = []

# Application definition
DJANGO_APPS = [
    'django.contrib.contenttypes',
    'django.contrib.auth',
]

THIRD_PARTY_APPS = [
    'rest_framework',
]

LOCAL_APPS = [
    'apps.zeigen',
]

INSTALLED_APPS = DJANGO_APPS + THIRD_PARTY_APPS + LOCAL_APPS

# The solver keeps no persistent state; results go to CSV/JSON files.
DATABASES = {}

USE_TZ = True

# Django REST Framework (serializers and the JSON renderer only)
REST_FRAMEWORK = {
    'DEFAULT_RENDERER_CLASSES': [
        'rest_framework.renderers.JSONRenderer',
    ],
    'STRICT_JSON': True,
    'COMPACT_JSON': False,
}

LOG_LEVEL = config('ZEIGEN_LOG_LEVEL', default='WARNING')

LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'plain': {
            'format': '%(asctime)s %(levelname)s %(name)s: %(message)s',
        },
    },
    'handlers': {
        'console': {
            'class': 'logging.StreamHandler',
            'formatter': 'plain',
        },
    },
    'loggers': {
        'apps.zeigen': {
            'handlers': ['console'],
            'level': LOG_LEVEL,
            'propagate': False,
        },
    },
}

# Tensor eigensolver specific settings
ZEIGEN = {
    'OUTPUT_DIR': config('ZEIGEN_OUTPUT_DIR', default=str(BASE_DIR / 'output')),
    'MAX_TENSOR_BYTES': config('ZEIGEN_MAX_TENSOR_BYTES', default=2 ** 31, cast=int),
    'DEFAULT_TOL': config('ZEIGEN_TOL', default=1e-15, cast=float),
    'DEFAULT_MAX_ITERS': config('ZEIGEN_MAX_ITERS', default=1000, cast=int),
    'DEFAULT_TAU': config('ZEIGEN_TAU', default=1e-6, cast=float),
    'BETA_SAMPLES': config('ZEIGEN_BETA_SAMPLES', default=10_000, cast=int),
    'BETA_SAFETY': config('ZEIGEN_BETA_SAFETY', default=1.1, cast=float),
    'WORKERS': config('ZEIGEN_WORKERS', default=1, cast=int),
    'RESIDUAL_TOL': config('ZEIGEN_RESIDUAL_TOL', default=1e-10, cast=float),
}
