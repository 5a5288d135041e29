"""Exact, mean-field and stochastic mean-field dynamics of the Lipkin-Meshkov-Glick model."""

__version__ = "0.1.0"

from .errors import ConfigError, EigensolverError, IntegrationError, NumericalError
from .model import HfPoint, ModelParams, hf_energy, hf_minimize, landscape_scan

__all__ = [
    "ConfigError",
    "EigensolverError",
    "HfPoint",
    "IntegrationError",
    "ModelParams",
    "NumericalError",
    "hf_energy",
    "hf_minimize",
    "landscape_scan",
]
