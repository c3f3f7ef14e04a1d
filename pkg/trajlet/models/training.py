"""
trajlet.models.training

Configuration of a contrastive training run.

:author: trajlet contributors
:license: GNU General Public License v3
"""


from typing import Optional

from .compat import Field, StrictModel
from .enums import Metric, Mining, RotationAnchor


__all__ = (
    'TrainConfig',
)


class TrainConfig(StrictModel):
    """
    Hyperparameters for :class:`trajlet.training.Trainer`.

    Positives are batch members whose input-space similarity to the anchor
    is at least ``sim_threshold``; negatives score strictly below it. A
    ``margin`` of zero is accepted so separable toy sets can drive the loss
    to exactly zero.

    ``input_dropout_p`` and ``attn_dropout_p`` override the encoder
    configuration for the run when set.
    """

    batch_size: int = Field(256, ge=3)
    steps: int = Field(1000, ge=1)
    margin: float = Field(0.5, ge=0.0)
    sim_threshold: float = Field(0.7, gt=0.0, lt=1.0)
    metric: Metric = Metric.COSINE.value
    alpha: float = Field(0.5, ge=0.0)
    anchor: RotationAnchor = RotationAnchor.DISPLACEMENT.value

    mining: Mining = Mining.RANDOM.value
    semi_hard_fraction: float = Field(0.5, ge=0.0, le=1.0)
    triplet_cap_factor: int = Field(4, ge=1)

    lr_max: float = Field(1e-3, gt=0.0)
    beta1: float = Field(0.9, ge=0.0, lt=1.0)
    beta2: float = Field(0.999, ge=0.0, lt=1.0)
    eps: float = Field(1e-8, gt=0.0)
    weight_decay: float = Field(0.0, ge=0.0)

    seed: int = Field(0, ge=0, lt=2 ** 64)

    input_dropout_p: Optional[float] = Field(None, ge=0.0, lt=1.0)
    attn_dropout_p: Optional[float] = Field(None, ge=0.0, lt=1.0)

    log_every: int = Field(50, ge=1)
    checkpoint_every: int = Field(0, ge=0)


    @property
    def triplet_cap(self) -> int:
        return self.triplet_cap_factor * self.batch_size


# The end.
