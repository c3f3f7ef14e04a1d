"""
trajlet.models.sweep

The architecture / embedding size / metric / dropout grid run by
``trajlet sweep``.

:author: trajlet contributors
:license: GNU General Public License v3
"""


from itertools import product
from typing import Any, Iterator, List, Optional, Tuple

from .compat import Field, StrictModel
from .encoder import EncoderConfig
from .enums import Metric
from .training import TrainConfig


__all__ = (
    'SweepPoint',
    'SweepSpec',
)


SweepPoint = Tuple[Metric, int, int, int, float, float]


class SweepSpec(StrictModel):
    """
    Every combination of ``architectures`` (heads, layers), ``d_embs``,
    ``metrics`` and the dropout lists is trained and evaluated once. Empty
    dropout lists mean the values of ``encoder`` are used unchanged.

    When ``queries`` is not given, a seeded ``holdout`` fraction of ``data``
    is set aside as the query set and the rest forms the bank.
    """

    architectures: List[Tuple[int, int]]
    d_embs: List[int]
    metrics: List[Metric]
    input_dropouts: List[float] = Field(default_factory=list)
    attn_dropouts: List[float] = Field(default_factory=list)

    encoder: EncoderConfig = Field(default_factory=EncoderConfig)
    train: TrainConfig = Field(default_factory=TrainConfig)

    data: str
    queries: Optional[str] = None
    holdout: float = Field(0.1, gt=0.0, lt=1.0)
    out: str = "sweep"
    k: int = Field(6, ge=1)


    def model_post_init(self, __context: Any):
        super().model_post_init(__context)

        for name in ('architectures', 'd_embs', 'metrics'):
            if not getattr(self, name):
                raise ValueError(f"{name} must not be empty")

        for p in (*self.input_dropouts, *self.attn_dropouts):
            if not 0.0 <= p < 1.0:
                raise ValueError(f"dropout {p} outside [0, 1)")


    def points(self) -> Iterator[SweepPoint]:
        """
        The grid in a fixed order: metric, then architecture, then d_emb,
        then dropouts.
        """

        input_ps = self.input_dropouts or [self.encoder.input_dropout_p]
        attn_ps = self.attn_dropouts or [self.encoder.attn_dropout_p]

        for metric, (heads, layers), d_emb, ip, ap in product(
                self.metrics, self.architectures, self.d_embs,
                input_ps, attn_ps):
            yield Metric(metric), heads, layers, d_emb, ip, ap


# The end.
