"""
trajlet.models.maneuver

Specifications for synthetic maneuver datasets.

:author: trajlet contributors
:license: GNU General Public License v3
"""


from math import pi
from typing import Any, List, Optional

from .compat import Field, StrictModel, field_validator
from .enums import ManeuverFamily


__all__ = (
    'DatasetSpec',
    'ManeuverSpec',
)


TURN_FAMILIES = (
    ManeuverFamily.LEFT_TURN,
    ManeuverFamily.RIGHT_TURN,
    ManeuverFamily.U_TURN,
    ManeuverFamily.LANE_CHANGE_LEFT,
    ManeuverFamily.LANE_CHANGE_RIGHT,
)


class ManeuverSpec(StrictModel):
    """
    One family of generated trajectories.

    ``speed`` and ``curvature`` are ``[low, high]`` ranges sampled uniformly
    per trajectory; give the same value twice for a fixed one. Curvature is
    a magnitude, the family decides which way the agent turns. Turns begin
    after ``approach`` of the horizon has been driven straight.
    """

    family: ManeuverFamily
    count: int = Field(100, ge=1)
    speed: List[float] = Field(default_factory=lambda: [8.0, 12.0])
    curvature: List[float] = Field(default_factory=lambda: [0.04, 0.06])
    noise_sigma: float = Field(0.05, ge=0.0)
    length: int = Field(60, ge=2, alias='T')
    dt: float = Field(0.1, gt=0.0)
    seed: int = Field(0, ge=0, lt=2 ** 64)
    label: Optional[str] = None

    turn_angle: Optional[float] = Field(None, gt=0.0)
    approach: float = Field(0.25, ge=0.0, lt=1.0)
    lane_width: float = Field(3.5, gt=0.0)

    origin_spread: float = Field(0.0, ge=0.0)
    random_heading: bool = False


    @field_validator('speed', 'curvature', mode='after')
    def validate_range(cls, value: List[float]):
        if len(value) == 1:
            value = [value[0], value[0]]
        if len(value) != 2:
            raise ValueError("expected a [low, high] range")
        low, high = value
        if low > high:
            raise ValueError(f"range low {low} exceeds high {high}")
        if low < 0:
            raise ValueError("range values must not be negative")
        return value


    def model_post_init(self, __context: Any):
        super().model_post_init(__context)

        if self.speed[0] <= 0:
            raise ValueError("speeds must be positive")

        if self.family_enum in TURN_FAMILIES and self.curvature[0] <= 0:
            raise ValueError(
                f"{self.family} needs a positive curvature range")


    @property
    def family_enum(self) -> ManeuverFamily:
        return ManeuverFamily(self.family)


    @property
    def label_or_family(self) -> str:
        return self.label or ManeuverFamily(self.family).value


    @property
    def heading_change(self) -> float:
        """
        The total turn, in radians, for the turning families.
        """

        if self.turn_angle is not None:
            return self.turn_angle
        if self.family_enum == ManeuverFamily.U_TURN:
            return pi
        return pi / 2


class DatasetSpec(StrictModel):
    """
    A list of maneuver families making up one generated dataset.
    """

    maneuvers: List[ManeuverSpec]


    def model_post_init(self, __context: Any):
        super().model_post_init(__context)

        if not self.maneuvers:
            raise ValueError("a dataset needs at least one maneuver spec")


    @property
    def total(self) -> int:
        return sum(spec.count for spec in self.maneuvers)


# The end.
