"""
trajlet.models.enums

String enumerations shared by the configuration models and the numerical
modules. Values are what appears in config files and on the command line.

:author: trajlet contributors
:license: GNU General Public License v3
"""


from enum import Enum


__all__ = (
    'ManeuverFamily',
    'Metric',
    'Mining',
    'MiningPhase',
    'RotationAnchor',
    'TokenLayout',
)


class RotationAnchor(str, Enum):
    """
    Which direction :func:`trajlet.core.normalize` rotates onto +x.
    """

    DISPLACEMENT = "displacement"
    """
    The overall displacement vector, last point minus first point.
    """

    HEADING = "heading"
    """
    The first point-pair segment with nonzero length.
    """


class Metric(str, Enum):
    """
    Input-space similarity used to label positives and negatives.
    """

    COSINE = "cosine"
    """
    Displacement cosine scaled by 1 / (1 + alpha * ADE).
    """

    FFT = "fft"
    """
    Cosine of L2-normalized DFT magnitude spectra.
    """


class Mining(str, Enum):
    RANDOM = "random"
    DYNAMIC = "dynamic"


class MiningPhase(str, Enum):
    HARD = "hard"
    SEMI_HARD = "semi-hard"


class TokenLayout(str, Enum):
    """
    How a trajectory is laid out as encoder tokens.
    """

    POINT = "point-tokens"
    """
    One token of dimension 2 per point.
    """

    SCALAR = "scalar-tokens"
    """
    The flattened coordinate sequence x0, y0, x1, y1, ... one scalar per token.
    """


class ManeuverFamily(str, Enum):
    STRAIGHT = "straight"
    LEFT_TURN = "left-turn"
    RIGHT_TURN = "right-turn"
    U_TURN = "u-turn"
    LANE_CHANGE_LEFT = "lane-change-left"
    LANE_CHANGE_RIGHT = "lane-change-right"


# The end.
