"""Configure Django before test collection, as ``manage.py`` does."""
import os

import django

os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'tensor_eigen.settings')
django.setup()
