"""
Django settings for thermovisco project.

The project has no web surface: Django supplies configuration, logging,
form validation and the management-command CLI for the solver app.

For the full list of settings and their values, see
https://docs.djangoproject.com/en/4.2/ref/settings/
"""

from pathlib import Path
import os

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent


# SECURITY WARNING: only used by Django internals, nothing is signed or served
SECRET_KEY = os.environ.get("THERMOVISCO_SECRET_KEY", "thermovisco-local-only")

DEBUG = False

ALLOWED_HOSTS = []


# Application definition

INSTALLED_APPS = [
    "thermo",
]

MIDDLEWARE = []


# No models, no database
DATABASES = {}


# Internationalization
# https://docs.djangoproject.com/en/4.2/topics/i18n/

LANGUAGE_CODE = "en-us"

TIME_ZONE = "UTC"

USE_I18N = False

USE_TZ = True


# Logging
# https://docs.djangoproject.com/en/4.2/topics/logging/

LOGGING = {
    "version": 1,
    "disable_existing_loggers": False,
    "formatters": {
        "verbose": {
            "format": "{asctime} {levelname} {name}: {message}",
            "style": "{",
        },
    },
    "handlers": {
        "console": {
            "class": "logging.StreamHandler",
            "formatter": "verbose",
        },
    },
    "loggers": {
        "thermo": {
            "handlers": ["console"],
            "level": os.environ.get("THERMOVISCO_LOG_LEVEL", "INFO"),
            "propagate": False,
        },
    },
}


# Solver defaults - read through thermo.utils.get_thermo_setting
THERMO = {
    "NEWTON_TOL": 1e-10,
    "NEWTON_MAX_ITER": 50,
    "MAX_HALVINGS": 30,
    "LINEAR_TOL": 1e-10,
    "FIXED_POINT_TOL": 1e-10,
    "FIXED_POINT_MAX_ITER": 50,
    "AUDIT_TOL_DIRECT": 1e-8,
    "AUDIT_TOL_ITERATIVE": 1e-6,
    "DEFAULT_Q": 1.2,
    "VALIDATION_SAMPLES": 400,
    "FLOAT_FORMAT": ".17g",
    "OUTPUT_ROOT": BASE_DIR / "results",
    "MATERIAL_DEFAULTS": {
        "mu": 1.0,
        "lambda": 1.0,
        "r_exp": 2.0,
        "trunc_k": float("inf"),
        "a": 0.0,
        "B": 1.0,
        "B_tilde": 1.0,
        "alpha": 0.7,
        "d": 1.0,
        "d_tilde": 1.0,
        "beta_kind": "smooth_clamp",
        "smoothing_fraction": 0.1,
    },
}
