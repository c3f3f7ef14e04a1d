"""
trajlet.models.encoder

Architecture configuration for the Transformer trajectory encoder.

:author: trajlet contributors
:license: GNU General Public License v3
"""


from typing import Any, Optional

from .compat import Field, StrictModel
from .enums import TokenLayout


__all__ = (
    'EncoderConfig',
)


class EncoderConfig(StrictModel):
    """
    Shape and regularization of an encoder. ``d_ffn`` defaults to four times
    ``d_model`` when left unset.

    The point-tokens layout with a 128 token window is the desk-scale
    default; ``scalar-tokens`` with ``max_seq_len: 1024`` flattens each
    coordinate into its own token.
    """

    num_layers: int = Field(1, ge=1)
    num_heads: int = Field(4, ge=1)
    d_model: int = Field(512, ge=1)
    d_emb: int = Field(16, ge=1)
    d_ffn: Optional[int] = Field(None, ge=1)
    max_seq_len: int = Field(128, ge=1)

    input_dropout_p: float = Field(0.3, ge=0.0, lt=1.0)
    attn_dropout_p: float = Field(0.2, ge=0.0, lt=1.0)

    token_layout: TokenLayout = TokenLayout.POINT.value
    input_scale: float = Field(0.1, gt=0.0)
    layernorm_eps: float = Field(1e-5, gt=0.0)


    def model_post_init(self, __context: Any):
        super().model_post_init(__context)

        if self.d_model % self.num_heads:
            raise ValueError(
                f"d_model ({self.d_model}) must be divisible by"
                f" num_heads ({self.num_heads})")


    @property
    def layout(self) -> TokenLayout:
        return TokenLayout(self.token_layout)


    @property
    def token_dim(self) -> int:
        return 2 if self.layout == TokenLayout.POINT else 1


    @property
    def tokens_per_point(self) -> int:
        return 1 if self.layout == TokenLayout.POINT else 2


    @property
    def ffn_dim(self) -> int:
        return self.d_ffn or 4 * self.d_model


    @property
    def head_dim(self) -> int:
        return self.d_model // self.num_heads


    @property
    def arch_tag(self) -> str:
        """
        Short architecture name such as ``4H1L``.
        """

        return f"{self.num_heads}H{self.num_layers}L"


# The end.
