"""
trajlet.encoder

A compact pre-norm Transformer encoder in numpy, with an exact
reverse-mode backward pass.

The forward path is: input projection, fixed sinusoidal positional
encoding, input dropout, ``num_layers`` encoder layers (masked multi-head
self-attention with attention-probability dropout, then a GELU feed-forward
block, each behind a layer norm and a residual), mean pooling over the
valid tokens, and a projection to ``d_emb``.

Masked attention is carried out by gathering the valid positions of each
input before the layers run. Inputs sharing a mask are processed together.
This is exactly what adding -inf to the masked attention scores would
compute, and padded token values can never reach the output.

:author: trajlet contributors
:license: GNU General Public License v3
"""


import logging
from dataclasses import dataclass, field
from functools import lru_cache
from math import sqrt
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from .core import NormalizedTrajectory, PointsLike, as_points
from .exceptions import (
    NonFiniteActivation, SequenceTooLong, TapeMismatch, ZeroEmbedding,
)
from .models import EncoderConfig, TokenLayout
from .rng import generator, philox


__all__ = (
    'EMBEDDING_EPS',
    'ActivationTape',
    'EncoderParams',
    'PaddedInput',
    'ParamGradients',

    'backward',
    'check_gradients',
    'embed',
    'encode_input',
    'forward',
    'forward_batch',
    'normalize_embedding',
    'normalize_embeddings',
    'normalize_embeddings_backward',
    'parameter_count',
    'positional_encoding',
)


logger = logging.getLogger(__name__)


EMBEDDING_EPS = 1e-12
"""
Embeddings with a norm at or below this cannot be normalized.
"""


ParamGradients = Dict[str, np.ndarray]


_GELU_C = sqrt(2.0 / np.pi)
_GELU_K = 0.044715


@lru_cache(maxsize=8)
def positional_encoding(max_len: int, d_model: int) -> np.ndarray:
    """
    The fixed sinusoidal table, (max_len, d_model). Even columns hold sines
    and odd columns cosines of geometrically spaced frequencies.
    """

    pe = np.zeros((max_len, d_model), dtype=np.float64)
    position = np.arange(max_len, dtype=np.float64)[:, None]
    div_term = np.exp(np.arange(0, d_model, 2) * -(np.log(10000.0) / d_model))

    pe[:, 0::2] = np.sin(position * div_term)
    if d_model > 1:
        pe[:, 1::2] = np.cos(position * div_term[:d_model // 2])

    pe.setflags(write=False)
    return pe


def _layer_shapes(cfg: EncoderConfig, layer: int) -> Iterator[Tuple[str, tuple]]:
    d, f = cfg.d_model, cfg.ffn_dim
    prefix = f"layers.{layer}"

    yield f"{prefix}.ln1.gain", (d,)
    yield f"{prefix}.ln1.bias", (d,)
    for name in ('q', 'k', 'v', 'o'):
        yield f"{prefix}.attn.w{name}", (d, d)
        yield f"{prefix}.attn.b{name}", (d,)
    yield f"{prefix}.ln2.gain", (d,)
    yield f"{prefix}.ln2.bias", (d,)
    yield f"{prefix}.ffn.w1", (d, f)
    yield f"{prefix}.ffn.b1", (f,)
    yield f"{prefix}.ffn.w2", (f, d)
    yield f"{prefix}.ffn.b2", (d,)


def parameter_shapes(cfg: EncoderConfig) -> List[Tuple[str, tuple]]:
    """
    Every learnable tensor, in the canonical order used by checkpoints.
    """

    shapes = [
        ("input.weight", (cfg.token_dim, cfg.d_model)),
        ("input.bias", (cfg.d_model,)),
    ]
    for layer in range(cfg.num_layers):
        shapes.extend(_layer_shapes(cfg, layer))
    shapes.append(("output.weight", (cfg.d_model, cfg.d_emb)))
    shapes.append(("output.bias", (cfg.d_emb,)))
    return shapes


def parameter_count(cfg: EncoderConfig) -> int:
    return sum(int(np.prod(shape)) for _, shape in parameter_shapes(cfg))


class EncoderParams:
    """
    An immutable set of encoder tensors together with the configuration
    that shaped them. Updates produce a new instance through
    :meth:`replace`.
    """

    def __init__(self, config: EncoderConfig, tensors: Dict[str, np.ndarray]):
        expected = parameter_shapes(config)
        names = [name for name, _ in expected]

        if sorted(tensors) != sorted(names):
            missing = set(names) - set(tensors)
            extra = set(tensors) - set(names)
            raise ValueError(
                f"parameter names do not match the configuration"
                f" (missing {sorted(missing)}, unexpected {sorted(extra)})")

        frozen: Dict[str, np.ndarray] = {}
        for name, shape in expected:
            arr = np.array(tensors[name])
            if arr.shape != shape:
                raise ValueError(
                    f"parameter {name} has shape {arr.shape}, expected {shape}")
            if not np.isfinite(arr).all():
                raise ValueError(f"parameter {name} is not finite")
            arr.setflags(write=False)
            frozen[name] = arr

        self.config = config
        self._tensors = frozen


    @classmethod
    def initialize(
            cls,
            config: EncoderConfig,
            seed: int = 0,
            dtype=np.float64) -> 'EncoderParams':
        """
        Glorot-uniform weights, zero biases, unit layer-norm gains. Draws
        come from the ``init`` stream of ``seed``.
        """

        rng = generator(seed, 'init')
        tensors = {}
        for name, shape in parameter_shapes(config):
            if name.endswith('.gain'):
                tensors[name] = np.ones(shape, dtype=dtype)
            elif len(shape) == 1:
                tensors[name] = np.zeros(shape, dtype=dtype)
            else:
                limit = sqrt(6.0 / (shape[0] + shape[1]))
                tensors[name] = rng.uniform(-limit, limit, size=shape).astype(dtype)
        return cls(config, tensors)


    def __getitem__(self, name: str) -> np.ndarray:
        return self._tensors[name]


    def __iter__(self) -> Iterator[str]:
        return iter(self._tensors)


    def __len__(self) -> int:
        return len(self._tensors)


    def items(self):
        return self._tensors.items()


    @property
    def dtype(self):
        return self._tensors["input.weight"].dtype


    def count(self) -> int:
        return sum(arr.size for arr in self._tensors.values())


    def replace(self, tensors: Dict[str, np.ndarray]) -> 'EncoderParams':
        merged = dict(self._tensors)
        merged.update(tensors)
        return EncoderParams(self.config, merged)


    def astype(self, dtype) -> 'EncoderParams':
        return EncoderParams(
            self.config,
            {name: arr.astype(dtype) for name, arr in self._tensors.items()})


    def rounded_to_float32(self) -> 'EncoderParams':
        """
        The same parameters after a float32 round trip, held as float64.
        This is exactly what a checkpoint file stores.
        """

        return EncoderParams(
            self.config,
            {name: arr.astype(np.float32).astype(np.float64)
             for name, arr in self._tensors.items()})


    def with_config(self, config: EncoderConfig) -> 'EncoderParams':
        """
        Re-home the tensors under a config that differs only in settings
        that do not change shapes, such as the dropout probabilities.
        """

        return EncoderParams(config, dict(self._tensors))


@dataclass(frozen=True, eq=False)
class PaddedInput:
    """
    ``tokens`` is (max_seq_len, token_dim) with zeros at padded positions;
    ``mask`` is True at the valid ones.
    """

    tokens: np.ndarray
    mask: np.ndarray


    def __post_init__(self):
        tokens = np.array(self.tokens, dtype=np.float64)
        mask = np.array(self.mask, dtype=bool)

        if tokens.ndim != 2 or mask.shape != tokens.shape[:1]:
            raise ValueError(
                f"tokens {tokens.shape} and mask {mask.shape} do not align")
        if not mask.any():
            raise ValueError("a padded input needs at least one valid token")

        tokens.setflags(write=False)
        mask.setflags(write=False)
        object.__setattr__(self, 'tokens', tokens)
        object.__setattr__(self, 'mask', mask)


    @property
    def valid_count(self) -> int:
        return int(self.mask.sum())


def encode_input(nt: PointsLike, cfg: EncoderConfig) -> PaddedInput:
    """
    Lay out a normalized trajectory as encoder tokens. ``point-tokens``
    gives T tokens of two coordinates, ``scalar-tokens`` gives the 2T
    flattened coordinates as one-dimensional tokens.

    :raises SequenceTooLong: if the tokens do not fit in ``max_seq_len``
    """

    points = as_points(nt)
    count = len(points) * cfg.tokens_per_point
    if count > cfg.max_seq_len:
        source = getattr(nt, 'source_id', None)
        raise SequenceTooLong(
            f"trajectory {source or ''!s} needs {count} tokens,"
            f" max_seq_len is {cfg.max_seq_len}")

    tokens = np.zeros((cfg.max_seq_len, cfg.token_dim), dtype=np.float64)
    if cfg.layout == TokenLayout.POINT:
        tokens[:count] = points
    else:
        tokens[:count, 0] = points.reshape(-1)

    mask = np.zeros(cfg.max_seq_len, dtype=bool)
    mask[:count] = True
    return PaddedInput(tokens, mask)


def _gelu(u: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    t = np.tanh(_GELU_C * (u + _GELU_K * u ** 3))
    return 0.5 * u * (1.0 + t), t


def _gelu_grad(u: np.ndarray, t: np.ndarray) -> np.ndarray:
    return (0.5 * (1.0 + t) +
            0.5 * u * (1.0 - t * t) * _GELU_C * (1.0 + 3.0 * _GELU_K * u * u))


def _layernorm(x, gain, bias, eps):
    mean = x.mean(axis=-1, keepdims=True)
    centered = x - mean
    inv_std = 1.0 / np.sqrt((centered * centered).mean(axis=-1, keepdims=True) + eps)
    xhat = centered * inv_std
    return xhat * gain + bias, (xhat, inv_std)


def _layernorm_backward(dy, cache, gain):
    xhat, inv_std = cache
    dgain = (dy * xhat).sum(axis=(0, 1))
    dbias = dy.sum(axis=(0, 1))
    dxhat = dy * gain
    dx = inv_std * (dxhat - dxhat.mean(axis=-1, keepdims=True) -
                    xhat * (dxhat * xhat).mean(axis=-1, keepdims=True))
    return dx, dgain, dbias


def _softmax(scores: np.ndarray) -> np.ndarray:
    shifted = np.exp(scores - scores.max(axis=-1, keepdims=True))
    return shifted / shifted.sum(axis=-1, keepdims=True)


def _matmul_grad(inputs: np.ndarray, dout: np.ndarray) -> np.ndarray:
    """
    Weight gradient of ``inputs @ W`` for batched (B, n, k) inputs.
    """

    return inputs.reshape(-1, inputs.shape[-1]).T @ dout.reshape(-1, dout.shape[-1])


def _keep_mask(rng: np.random.Generator, shape, p: float, dtype) -> np.ndarray:
    keep = rng.random(shape) >= p
    return keep.astype(dtype) / (1.0 - p)


@dataclass
class _GroupTape:
    indices: np.ndarray
    scaled_tokens: np.ndarray
    input_mask: Optional[np.ndarray]
    layers: List[dict] = field(default_factory=list)
    pooled: np.ndarray = None


@dataclass
class ActivationTape:
    """
    Everything :func:`backward` needs from one forward pass over a batch.
    """

    params: EncoderParams
    batch_size: int
    training: bool
    groups: List[_GroupTape] = field(default_factory=list)


def _dropout_masks(
        cfg: EncoderConfig,
        seeds: Sequence[int],
        valid: int,
        dtype) -> Tuple[Optional[np.ndarray], List[Optional[np.ndarray]]]:
    """
    Input and per-layer attention dropout masks for a group. Sample ``i``'s
    masks depend only on ``seeds[i]``, the site, and the token count.
    """

    d, h = cfg.d_model, cfg.num_heads

    input_mask = None
    if cfg.input_dropout_p > 0:
        input_mask = np.stack([
            _keep_mask(philox(seed, 'dropout', 0), (valid, d),
                       cfg.input_dropout_p, dtype)
            for seed in seeds])

    attn_masks: List[Optional[np.ndarray]] = []
    for layer in range(cfg.num_layers):
        if cfg.attn_dropout_p > 0:
            attn_masks.append(np.stack([
                _keep_mask(philox(seed, 'dropout', 1 + layer), (h, valid, valid),
                           cfg.attn_dropout_p, dtype)
                for seed in seeds]))
        else:
            attn_masks.append(None)

    return input_mask, attn_masks


def _forward_group(
        params: EncoderParams,
        tokens: np.ndarray,
        positions: np.ndarray,
        seeds: Optional[Sequence[int]]) -> Tuple[np.ndarray, _GroupTape]:

    cfg = params.config
    dtype = params.dtype
    batch, valid = tokens.shape[:2]
    h, dh = cfg.num_heads, cfg.head_dim
    eps = cfg.layernorm_eps

    if seeds is not None:
        input_mask, attn_masks = _dropout_masks(cfg, seeds, valid, dtype)
    else:
        input_mask, attn_masks = None, [None] * cfg.num_layers

    scaled = (tokens * cfg.input_scale).astype(dtype)
    pe = positional_encoding(cfg.max_seq_len, cfg.d_model)[positions].astype(dtype)
    x = scaled @ params["input.weight"] + params["input.bias"] + pe
    if input_mask is not None:
        x = x * input_mask

    tape = _GroupTape(indices=None, scaled_tokens=scaled, input_mask=input_mask)

    def heads(m):
        return m.reshape(batch, valid, h, dh).transpose(0, 2, 1, 3)

    for layer in range(cfg.num_layers):
        p = f"layers.{layer}"

        h1, ln1 = _layernorm(x, params[f"{p}.ln1.gain"], params[f"{p}.ln1.bias"], eps)
        q = heads(h1 @ params[f"{p}.attn.wq"] + params[f"{p}.attn.bq"])
        k = heads(h1 @ params[f"{p}.attn.wk"] + params[f"{p}.attn.bk"])
        v = heads(h1 @ params[f"{p}.attn.wv"] + params[f"{p}.attn.bv"])

        probs = _softmax(q @ k.transpose(0, 1, 3, 2) / sqrt(dh))
        dropped = probs if attn_masks[layer] is None else probs * attn_masks[layer]
        attended = (dropped @ v).transpose(0, 2, 1, 3).reshape(batch, valid, -1)

        x = x + attended @ params[f"{p}.attn.wo"] + params[f"{p}.attn.bo"]

        h2, ln2 = _layernorm(x, params[f"{p}.ln2.gain"], params[f"{p}.ln2.bias"], eps)
        pre = h2 @ params[f"{p}.ffn.w1"] + params[f"{p}.ffn.b1"]
        act, tanh = _gelu(pre)
        x = x + act @ params[f"{p}.ffn.w2"] + params[f"{p}.ffn.b2"]

        tape.layers.append({
            'h1': h1, 'ln1': ln1, 'q': q, 'k': k, 'v': v,
            'probs': probs, 'dropped': dropped, 'attn_mask': attn_masks[layer],
            'attended': attended, 'h2': h2, 'ln2': ln2,
            'pre': pre, 'act': act, 'tanh': tanh,
        })

    pooled = x.mean(axis=1)
    tape.pooled = pooled
    out = pooled @ params["output.weight"] + params["output.bias"]
    return out, tape


def _group_by_mask(inputs: Sequence[PaddedInput]) -> List[Tuple[np.ndarray, np.ndarray]]:
    groups: Dict[bytes, List[int]] = {}
    for index, item in enumerate(inputs):
        groups.setdefault(np.packbits(item.mask).tobytes() +
                          len(item.mask).to_bytes(4, 'little'), []).append(index)

    result = []
    for members in groups.values():
        positions = np.flatnonzero(inputs[members[0]].mask)
        result.append((np.array(members), positions))
    return result


def forward_batch(
        params: EncoderParams,
        inputs: Sequence[PaddedInput],
        train_seeds: Optional[Sequence[int]] = None) -> Tuple[np.ndarray, ActivationTape]:
    """
    Embed a batch of padded inputs. Returns the (B, d_emb) embeddings and
    the tape for :func:`backward`.

    With ``train_seeds`` (one per input) dropout is active, and each
    input's dropout masks are drawn from its own seed, so an input embeds
    identically whatever batch it is part of. Without them the forward is
    the deterministic eval-mode pass.

    :raises NonFiniteActivation: if any embedding component is NaN or
      infinite
    """

    cfg = params.config
    if train_seeds is not None and len(train_seeds) != len(inputs):
        raise ValueError(
            f"{len(train_seeds)} dropout seeds for {len(inputs)} inputs")

    for index, item in enumerate(inputs):
        if item.tokens.shape != (cfg.max_seq_len, cfg.token_dim):
            raise ValueError(
                f"input {index} has token shape {item.tokens.shape},"
                f" expected {(cfg.max_seq_len, cfg.token_dim)}")

    out = np.zeros((len(inputs), cfg.d_emb), dtype=params.dtype)
    tape = ActivationTape(params=params, batch_size=len(inputs),
                          training=train_seeds is not None)

    for members, positions in _group_by_mask(inputs):
        tokens = np.stack([inputs[i].tokens[positions] for i in members])
        seeds = None if train_seeds is None else [train_seeds[i] for i in members]

        group_out, group_tape = _forward_group(params, tokens, positions, seeds)
        group_tape.indices = members
        out[members] = group_out
        tape.groups.append(group_tape)

    if not np.isfinite(out).all():
        bad = int(np.flatnonzero(~np.isfinite(out).all(axis=1))[0])
        raise NonFiniteActivation(
            "encoder produced a non-finite embedding", index=bad)

    return out, tape


def forward(
        params: EncoderParams,
        padded: PaddedInput,
        train_seed: Optional[int] = None) -> Tuple[np.ndarray, ActivationTape]:
    """
    Embed a single padded input. ``train_seed`` selects train mode.
    """

    seeds = None if train_seed is None else [train_seed]
    out, tape = forward_batch(params, [padded], seeds)
    return out[0], tape


def _backward_group(
        params: EncoderParams,
        gt: _GroupTape,
        demb: np.ndarray,
        grads: ParamGradients) -> None:

    cfg = params.config
    batch, valid = gt.scaled_tokens.shape[:2]
    h, dh = cfg.num_heads, cfg.head_dim

    grads["output.weight"] += gt.pooled.T @ demb
    grads["output.bias"] += demb.sum(axis=0)

    dpooled = demb @ params["output.weight"].T
    dx = np.broadcast_to(dpooled[:, None, :] / valid,
                         (batch, valid, cfg.d_model)).copy()

    def merge(m):
        return m.transpose(0, 2, 1, 3).reshape(batch, valid, -1)

    for layer in reversed(range(cfg.num_layers)):
        p = f"layers.{layer}"
        c = gt.layers[layer]

        # feed-forward block
        grads[f"{p}.ffn.w2"] += _matmul_grad(c['act'], dx)
        grads[f"{p}.ffn.b2"] += dx.sum(axis=(0, 1))
        dpre = (dx @ params[f"{p}.ffn.w2"].T) * _gelu_grad(c['pre'], c['tanh'])
        grads[f"{p}.ffn.w1"] += _matmul_grad(c['h2'], dpre)
        grads[f"{p}.ffn.b1"] += dpre.sum(axis=(0, 1))
        dh2 = dpre @ params[f"{p}.ffn.w1"].T
        dln, dgain, dbias = _layernorm_backward(dh2, c['ln2'], params[f"{p}.ln2.gain"])
        grads[f"{p}.ln2.gain"] += dgain
        grads[f"{p}.ln2.bias"] += dbias
        dx = dx + dln

        # attention block
        grads[f"{p}.attn.wo"] += _matmul_grad(c['attended'], dx)
        grads[f"{p}.attn.bo"] += dx.sum(axis=(0, 1))
        dattended = (dx @ params[f"{p}.attn.wo"].T)
        dattended = dattended.reshape(batch, valid, h, dh).transpose(0, 2, 1, 3)

        dv = c['dropped'].transpose(0, 1, 3, 2) @ dattended
        dprobs = dattended @ c['v'].transpose(0, 1, 3, 2)
        if c['attn_mask'] is not None:
            dprobs = dprobs * c['attn_mask']

        probs = c['probs']
        dscores = probs * (dprobs - (dprobs * probs).sum(axis=-1, keepdims=True))
        dscores = dscores / sqrt(dh)

        dq = merge(dscores @ c['k'])
        dk = merge(dscores.transpose(0, 1, 3, 2) @ c['q'])
        dv = merge(dv)

        dh1 = np.zeros_like(dx)
        for name, dproj in (('q', dq), ('k', dk), ('v', dv)):
            grads[f"{p}.attn.w{name}"] += _matmul_grad(c['h1'], dproj)
            grads[f"{p}.attn.b{name}"] += dproj.sum(axis=(0, 1))
            dh1 += dproj @ params[f"{p}.attn.w{name}"].T

        dln, dgain, dbias = _layernorm_backward(dh1, c['ln1'], params[f"{p}.ln1.gain"])
        grads[f"{p}.ln1.gain"] += dgain
        grads[f"{p}.ln1.bias"] += dbias
        dx = dx + dln

    if gt.input_mask is not None:
        dx = dx * gt.input_mask

    grads["input.weight"] += _matmul_grad(gt.scaled_tokens, dx)
    grads["input.bias"] += dx.sum(axis=(0, 1))


def backward(
        tape: ActivationTape,
        d_embedding: np.ndarray,
        params: Optional[EncoderParams] = None) -> ParamGradients:
    """
    Gradients of ``sum(embeddings * d_embedding)`` with respect to every
    parameter of the forward pass recorded on ``tape``.

    :param d_embedding: (B, d_emb) upstream gradient, or (d_emb,) for a
      single-input tape
    :param params: optionally the parameters the caller believes were
      used; they must be the very ones on the tape
    :raises TapeMismatch: for a wrongly shaped gradient or foreign params
    """

    if params is not None and params is not tape.params:
        raise TapeMismatch("parameters differ from the ones the tape recorded")

    params = tape.params
    cfg = params.config

    demb = np.asarray(d_embedding, dtype=params.dtype)
    if demb.ndim == 1 and tape.batch_size == 1:
        demb = demb[None, :]
    if demb.shape != (tape.batch_size, cfg.d_emb):
        raise TapeMismatch(
            f"upstream gradient has shape {demb.shape},"
            f" tape expects {(tape.batch_size, cfg.d_emb)}")

    grads: ParamGradients = {
        name: np.zeros_like(arr) for name, arr in params.items()}

    for gt in tape.groups:
        _backward_group(params, gt, demb[gt.indices], grads)

    return grads


def normalize_embedding(e: np.ndarray) -> np.ndarray:
    """
    Project ``e`` onto the unit sphere.

    :raises ZeroEmbedding: if ``||e|| <= 1e-12``
    """

    e = np.asarray(e)
    norm = float(np.linalg.norm(e))
    if norm <= EMBEDDING_EPS:
        raise ZeroEmbedding(f"cannot normalize an embedding of norm {norm}")
    return e / norm


def normalize_embeddings(embeddings: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Row-wise :func:`normalize_embedding`. Returns the unit rows and the
    original norms.

    :raises ZeroEmbedding: with the index of the first zero row
    """

    norms = np.linalg.norm(embeddings, axis=1)
    small = np.flatnonzero(norms <= EMBEDDING_EPS)
    if len(small):
        raise ZeroEmbedding("cannot normalize a zero embedding",
                            index=int(small[0]))
    return embeddings / norms[:, None], norms


def normalize_embeddings_backward(
        units: np.ndarray,
        norms: np.ndarray,
        dunits: np.ndarray) -> np.ndarray:
    """
    Gradient with respect to the raw embeddings, given the gradient with
    respect to their normalized rows.
    """

    radial = (units * dunits).sum(axis=1, keepdims=True)
    return (dunits - units * radial) / norms[:, None]


def embed(
        params: EncoderParams,
        trajectories: Sequence[NormalizedTrajectory]) -> np.ndarray:
    """
    Eval-mode, unit-normalized embeddings of ``trajectories``, one forward
    per trajectory so every row is bitwise independent of its neighbours.
    """

    cfg = params.config
    rows = np.zeros((len(trajectories), cfg.d_emb), dtype=np.float64)
    for index, nt in enumerate(trajectories):
        out, _ = forward(params, encode_input(nt, cfg))
        rows[index] = normalize_embedding(out)
    return rows


def check_gradients(
        params: EncoderParams,
        inputs: Sequence[PaddedInput],
        upstream: np.ndarray,
        train_seeds: Optional[Sequence[int]] = None,
        epsilon: float = 1e-4) -> Dict[str, float]:
    """
    Compare :func:`backward` against central finite differences of
    ``sum(forward_batch(...) * upstream)`` for every parameter element.
    Returns the relative error per tensor,
    ``max|analytic - numeric| / max(max|analytic|, max|numeric|, 1e-6)``.

    Meant for tiny float64 models; the cost is two forwards per element.
    """

    out, tape = forward_batch(params, inputs, train_seeds)
    analytic = backward(tape, upstream)

    def objective(candidate: EncoderParams) -> float:
        emb, _ = forward_batch(candidate, inputs, train_seeds)
        return float((emb * upstream).sum())

    errors: Dict[str, float] = {}
    for name, arr in params.items():
        numeric = np.zeros_like(arr)
        flat = arr.reshape(-1)
        for i in range(flat.size):
            plus = flat.copy()
            minus = flat.copy()
            plus[i] += epsilon
            minus[i] -= epsilon
            up = objective(params.replace({name: plus.reshape(arr.shape)}))
            down = objective(params.replace({name: minus.reshape(arr.shape)}))
            numeric.reshape(-1)[i] = (up - down) / (2.0 * epsilon)

        scale = max(np.abs(analytic[name]).max(), np.abs(numeric).max(), 1e-6)
        errors[name] = float(np.abs(analytic[name] - numeric).max() / scale)
        logger.debug(f"gradient check {name}: {errors[name]:.3e}")

    return errors


# The end.
