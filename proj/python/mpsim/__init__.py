"""Python access to the mpsim grid simulator and Max Pressure controllers.

Configs are plain dicts using the same keys as the scenario JSON files.
"""

import json as _json

from . import _mpsim
from ._mpsim import (
    ConfigError,
    DomainError,
    LookupError,
    ValidationError,
    default_period,
    saturation_factor,
    select_phase,
    stability_diagnostic,
    tiny_instance_bound,
    trapezoid_demand,
)

__all__ = [
    "ConfigError",
    "DomainError",
    "LookupError",
    "ValidationError",
    "Simulation",
    "build_network",
    "default_period",
    "degrees_of_saturation",
    "run_and_write",
    "run_seed",
    "saturation_factor",
    "scenario",
    "select_phase",
    "stability_diagnostic",
    "tiny_instance_bound",
    "trapezoid_demand",
    "validate_network",
]


def _text(config):
    if config is None:
        return ""
    return config if isinstance(config, str) else _json.dumps(config)


def scenario(config=None):
    """Validated scenario dict with every default filled in."""
    return _json.loads(_mpsim.scenario_json(_text(config)))


def build_network(config=None):
    """Grid network of a scenario as a dict (links, movements, intersections)."""
    return _json.loads(_mpsim.network_json(_text(config)))


def validate_network(network):
    """List of (entity, rule) pairs; empty for a valid network."""
    return _mpsim.validate_network_json(_text(network))


def degrees_of_saturation(config=None, t=None):
    return _mpsim.degrees_of_saturation(_text(config), t)


def run_seed(config, seed):
    return _mpsim.run_seed(_text(config), seed)


def run_and_write(config):
    return _mpsim.run_and_write(_text(config))


class Simulation(_mpsim.Simulation):
    def __init__(self, config=None, seed=0):
        super().__init__(_text(config), seed)
