"""
trajlet.models

Typed configuration objects. Each is a pydantic model (v1.10 or v2, see
:mod:`trajlet.models.compat`) that rejects unknown keys.

:author: trajlet contributors
:license: GNU General Public License v3
"""


from .compat import parse_model, replace_model
from .encoder import EncoderConfig
from .enums import (
    ManeuverFamily, Metric, Mining, MiningPhase, RotationAnchor, TokenLayout,
)
from .maneuver import DatasetSpec, ManeuverSpec
from .sweep import SweepPoint, SweepSpec
from .training import TrainConfig


__all__ = (
    'DatasetSpec',
    'EncoderConfig',
    'ManeuverFamily',
    'ManeuverSpec',
    'Metric',
    'Mining',
    'MiningPhase',
    'RotationAnchor',
    'SweepPoint',
    'SweepSpec',
    'TokenLayout',
    'TrainConfig',

    'parse_model',
    'replace_model',
)


# The end.
