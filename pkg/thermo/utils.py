"""
Utility functions for thermovisco
"""
import math

from django.conf import settings


def get_thermo_setting(name):
    """
    Get a numerical default from settings.THERMO.
    This is the single source of truth for tolerances and iteration limits.
    """
    return settings.THERMO[name]


def get_material_default(name):
    return settings.THERMO["MATERIAL_DEFAULTS"][name]


def format_float(value):
    """Format a float with the configured number of significant digits."""
    return format(float(value), settings.THERMO["FLOAT_FORMAT"])


def format_level(level):
    """Truncation levels serialise as 'inf' when the system is untruncated."""
    return "inf" if math.isinf(level) else format_float(level)
