"""
trajlet.similarity

The two input-space similarities that decide which batch members count as
positives and negatives during training:

* ``cosine``: the cosine of the angle between the overall displacement
  vectors, divided by ``1 + alpha * ADE``.
* ``fft``: the cosine of the L2-normalized DFT magnitude spectra of the x
  and y coordinate sequences.

:author: trajlet contributors
:license: GNU General Public License v3
"""


import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Optional, Sequence, Tuple

import numpy as np

from .core import DIRECTION_EPS, PointsLike, ade, ade_to_many, as_points, stack_points
from .exceptions import LengthMismatch, ZeroDisplacement, ZeroSpectrum
from .models.enums import Metric
from .parallel import pmap


__all__ = (
    'DistanceFn',
    'SimilarityMatrix',
    'SpectralFeature',
    'SPECTRUM_EPS',

    'cosine_combined',
    'dft_basis',
    'is_usable',
    'similarity_matrix',
    'spectral_feature',
    'spectral_similarity',
)


logger = logging.getLogger(__name__)


DistanceFn = Callable[[PointsLike, PointsLike], float]


SPECTRUM_EPS = 1e-12
"""
Spectra with an L2 norm below this are flagged as zero.
"""


@dataclass(frozen=True, eq=False)
class SpectralFeature:
    """
    DFT magnitudes of coefficients ``0 .. T // 2``, x block then y block,
    L2-normalized unless ``zero_spectrum`` is set.
    """

    magnitudes: np.ndarray
    zero_spectrum: bool = False


@dataclass(frozen=True, eq=False)
class SimilarityMatrix:
    """
    A symmetric B x B matrix of pairwise similarity scores.
    """

    values: np.ndarray
    metric: Metric


    def __len__(self) -> int:
        return len(self.values)


def _displacement_unit(points: np.ndarray) -> Tuple[np.ndarray, float]:
    delta = points[-1] - points[0]
    norm = float(np.hypot(delta[0], delta[1]))
    return delta, norm


def cosine_combined(
        a: PointsLike,
        b: PointsLike,
        alpha: float = 0.5,
        distance: DistanceFn = ade) -> float:
    """
    ``cos(dp_a, dp_b) / (1 + alpha * distance(a, b))``.

    :raises ZeroDisplacement: if either displacement is shorter than
      :data:`trajlet.core.DIRECTION_EPS`
    :raises LengthMismatch: for trajectories of different lengths
    """

    pa, pb = as_points(a), as_points(b)
    da, na = _displacement_unit(pa)
    db, nb = _displacement_unit(pb)

    if na < DIRECTION_EPS or nb < DIRECTION_EPS:
        raise ZeroDisplacement(
            "cosine similarity needs a nonzero displacement")

    cos = float(np.clip(np.dot(da, db) / (na * nb), -1.0, 1.0))
    return cos / (1.0 + alpha * distance(pa, pb))


@lru_cache(maxsize=16)
def dft_basis(length: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    Real and imaginary DFT kernels for coefficients ``0 .. length // 2``,
    each of shape (length // 2 + 1, length).
    """

    k = np.arange(length // 2 + 1, dtype=np.float64)[:, None]
    t = np.arange(length, dtype=np.float64)[None, :]
    angle = 2.0 * np.pi * ((k * t) % length) / length

    real, imag = np.cos(angle), -np.sin(angle)
    real.setflags(write=False)
    imag.setflags(write=False)
    return real, imag


def spectral_feature(nt: PointsLike) -> SpectralFeature:
    """
    Per-axis DFT of the coordinate sequence by direct summation, keeping the
    magnitudes of the non-redundant coefficients. An all-zero input sets
    ``zero_spectrum`` rather than dividing by zero.
    """

    points = as_points(nt)
    real, imag = dft_basis(len(points))

    re = real @ points
    im = imag @ points
    mags = np.hypot(re, im)

    feature = np.concatenate((mags[:, 0], mags[:, 1]))
    norm = float(np.linalg.norm(feature))
    if norm < SPECTRUM_EPS:
        return SpectralFeature(feature, zero_spectrum=True)

    return SpectralFeature(feature / norm)


def spectral_similarity(fa: SpectralFeature, fb: SpectralFeature) -> float:
    """
    The dot product of two normalized spectra, in [0, 1].

    :raises ZeroSpectrum: if either feature is flagged
    :raises LengthMismatch: for features of different lengths
    """

    if fa.zero_spectrum or fb.zero_spectrum:
        raise ZeroSpectrum("spectral similarity of an all-zero trajectory")

    if fa.magnitudes.shape != fb.magnitudes.shape:
        raise LengthMismatch(
            f"spectral features differ in length:"
            f" {len(fa.magnitudes)} and {len(fb.magnitudes)}")

    return float(np.clip(np.dot(fa.magnitudes, fb.magnitudes), 0.0, 1.0))


def is_usable(nt: PointsLike, metric: Metric) -> bool:
    """
    Whether ``nt`` can take part in a similarity matrix under ``metric``.
    """

    points = as_points(nt)
    if Metric(metric) == Metric.COSINE:
        return _displacement_unit(points)[1] >= DIRECTION_EPS
    return not spectral_feature(points).zero_spectrum


def _mirror_upper(values: np.ndarray, diagonal: float) -> np.ndarray:
    upper = np.triu(values, 1)
    result = upper + upper.T
    np.fill_diagonal(result, diagonal)
    return result


def _ade_matrix(stacked: np.ndarray) -> np.ndarray:
    rows = pmap(lambda i: ade_to_many(stacked[i], stacked), range(len(stacked)))
    return _mirror_upper(np.array(rows), 0.0)


def _distance_matrix(stacked: np.ndarray, distance: DistanceFn) -> np.ndarray:
    size = len(stacked)
    values = np.zeros((size, size), dtype=np.float64)
    for i in range(size):
        for j in range(i + 1, size):
            values[i, j] = distance(stacked[i], stacked[j])
    return _mirror_upper(values, 0.0)


def similarity_matrix(
        batch: Sequence[PointsLike],
        metric: Metric = Metric.COSINE,
        alpha: float = 0.5,
        distance: Optional[DistanceFn] = None) -> SimilarityMatrix:
    """
    All pairwise similarities of ``batch``. The result is exactly symmetric
    and its diagonal is exactly 1.

    The spectral path computes each feature once and takes one matrix
    product. The cosine path combines a matrix of displacement cosines with
    the ADE matrix, or with a matrix of ``distance`` when one is given.

    :raises ZeroDisplacement: (cosine) with the index of the first member
      whose displacement is too short
    :raises ZeroSpectrum: (fft) with the index of the first all-zero member
    :raises LengthMismatch: with the index of the first member whose length
      differs from the first
    """

    metric = Metric(metric)
    if not len(batch):
        raise ValueError("similarity matrix of an empty batch")

    stacked = stack_points(batch)

    if metric == Metric.FFT:
        features = []
        for index, points in enumerate(stacked):
            feature = spectral_feature(points)
            if feature.zero_spectrum:
                raise ZeroSpectrum(
                    "spectral similarity of an all-zero trajectory",
                    index=index)
            features.append(feature.magnitudes)

        spectra = np.stack(features)
        values = np.clip(spectra @ spectra.T, 0.0, 1.0)
        return SimilarityMatrix(_mirror_upper(values, 1.0), metric)

    deltas = stacked[:, -1] - stacked[:, 0]
    norms = np.hypot(deltas[:, 0], deltas[:, 1])
    short = np.flatnonzero(norms < DIRECTION_EPS)
    if len(short):
        raise ZeroDisplacement(
            "cosine similarity needs a nonzero displacement",
            index=int(short[0]))

    units = deltas / norms[:, None]
    cosines = np.clip(units @ units.T, -1.0, 1.0)

    if distance is None or distance is ade:
        distances = _ade_matrix(stacked)
    else:
        distances = _distance_matrix(stacked, distance)

    values = cosines / (1.0 + alpha * distances)
    return SimilarityMatrix(_mirror_upper(values, 1.0), metric)


# The end.
