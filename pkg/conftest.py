import os

import django

os.environ.setdefault("DJANGO_SETTINGS_MODULE", "thermovisco.settings")
django.setup()
