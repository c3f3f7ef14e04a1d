"""
trajlet.mining

Online triplet mining over a batch similarity matrix, and the triplet
margin loss with its gradients.

Positives of an anchor are the other batch members scoring at least the
threshold against it; negatives are the members scoring strictly below.
Every ordered (anchor, positive) pair gets one negative.

:author: trajlet contributors
:license: GNU General Public License v3
"""


import logging
from typing import List, NamedTuple, Sequence, Tuple

import numpy as np

from .models.enums import MiningPhase
from .similarity import SimilarityMatrix


__all__ = (
    'Triplet',

    'batch_triplet_loss',
    'cap_triplets',
    'embedding_distances',
    'mine_dynamic',
    'mine_random',
    'triplet_loss',
    'verify_triplets',
)


logger = logging.getLogger(__name__)


class Triplet(NamedTuple):
    anchor: int
    positive: int
    negative: int


def _values(sim) -> np.ndarray:
    return sim.values if isinstance(sim, SimilarityMatrix) else np.asarray(sim)


def _pairs(values: np.ndarray, threshold: float):
    """
    Yield (anchor, positives, negatives) for anchors having both.
    """

    size = len(values)
    indices = np.arange(size)
    for anchor in range(size):
        row = values[anchor]
        positives = np.flatnonzero((row >= threshold) & (indices != anchor))
        negatives = np.flatnonzero(row < threshold)
        if len(positives) and len(negatives):
            yield anchor, positives, negatives


def mine_random(
        sim: SimilarityMatrix,
        threshold: float,
        rng: np.random.Generator) -> List[Triplet]:
    """
    One uniformly drawn negative for each ordered (anchor, positive) pair.
    Anchors without a positive or without a negative contribute nothing.
    """

    triplets: List[Triplet] = []
    for anchor, positives, negatives in _pairs(_values(sim), threshold):
        picks = negatives[rng.integers(len(negatives), size=len(positives))]
        triplets.extend(Triplet(anchor, int(p), int(n))
                        for p, n in zip(positives, picks))
    return triplets


def embedding_distances(embeddings: np.ndarray) -> np.ndarray:
    """
    Exact pairwise Euclidean distances between rows.
    """

    diff = embeddings[:, None, :] - embeddings[None, :, :]
    return np.sqrt((diff * diff).sum(axis=-1))


def mine_dynamic(
        sim: SimilarityMatrix,
        embeddings: np.ndarray,
        threshold: float,
        phase: MiningPhase,
        margin: float,
        rng: np.random.Generator) -> Tuple[List[Triplet], int]:
    """
    Same positive pairing as :func:`mine_random`, with the negative drawn
    from an embedding-distance band:

    * ``hard``: ``d(a, n) < d(a, p)``
    * ``semi-hard``: ``d(a, p) < d(a, n) < d(a, p) + margin``

    When the band is empty a random negative is used instead. Returns the
    triplets and the number of such fallbacks.
    """

    phase = MiningPhase(phase)
    dist = embedding_distances(np.asarray(embeddings, dtype=np.float64))

    triplets: List[Triplet] = []
    fallbacks = 0

    for anchor, positives, negatives in _pairs(_values(sim), threshold):
        d_neg = dist[anchor, negatives]
        for p in positives:
            d_ap = dist[anchor, p]
            if phase == MiningPhase.HARD:
                band = negatives[d_neg < d_ap]
            else:
                band = negatives[(d_neg > d_ap) & (d_neg < d_ap + margin)]

            if len(band):
                negative = band[rng.integers(len(band))]
            else:
                negative = negatives[rng.integers(len(negatives))]
                fallbacks += 1

            triplets.append(Triplet(anchor, int(p), int(negative)))

    logger.debug(f"{phase.value} mining: {len(triplets)} triplets,"
                 f" {fallbacks} random fallbacks")
    return triplets, fallbacks


def cap_triplets(
        triplets: Sequence[Triplet],
        cap: int,
        rng: np.random.Generator) -> List[Triplet]:
    """
    A uniform subsample of at most ``cap`` triplets, in their original
    order.
    """

    if len(triplets) <= cap:
        return list(triplets)
    keep = np.sort(rng.choice(len(triplets), size=cap, replace=False))
    return [triplets[i] for i in keep]


def verify_triplets(
        sim: SimilarityMatrix,
        threshold: float,
        triplets: Sequence[Triplet]) -> bool:
    """
    True when every triplet has distinct members, a positive at or above
    the threshold and a negative below it.
    """

    values = _values(sim)
    for a, p, n in triplets:
        if len({a, p, n}) != 3:
            return False
        if not (values[a, p] >= threshold and values[a, n] < threshold):
            return False
    return True


def _unit(diff: np.ndarray, dist: np.ndarray) -> np.ndarray:
    safe = np.where(dist > 0, dist, 1.0)
    return np.where((dist > 0)[..., None], diff / safe[..., None], 0.0)


def triplet_loss(
        e_a: np.ndarray,
        e_p: np.ndarray,
        e_n: np.ndarray,
        margin: float) -> Tuple[float, np.ndarray, np.ndarray, np.ndarray]:
    """
    ``max(0, d(a, p) - d(a, n) + margin)`` with Euclidean ``d``, and its
    gradients with respect to the three embeddings. The gradients are zero
    wherever the hinge is not strictly active, and the gradient of a zero
    distance is taken as zero.
    """

    e_a, e_p, e_n = (np.asarray(e, dtype=np.float64) for e in (e_a, e_p, e_n))
    ap, an = e_a - e_p, e_a - e_n
    d_ap, d_an = float(np.linalg.norm(ap)), float(np.linalg.norm(an))

    loss = d_ap - d_an + margin
    if loss <= 0:
        zero = np.zeros_like(e_a)
        return 0.0, zero, zero.copy(), zero.copy()

    u_ap = ap / d_ap if d_ap > 0 else np.zeros_like(ap)
    u_an = an / d_an if d_an > 0 else np.zeros_like(an)
    return loss, u_ap - u_an, -u_ap, u_an


def batch_triplet_loss(
        units: np.ndarray,
        triplets: Sequence[Triplet],
        margin: float) -> Tuple[float, np.ndarray, int]:
    """
    Mean triplet loss over ``triplets`` of a batch of unit embeddings, the
    gradient of that mean with respect to each row, and the count of
    triplets with an active hinge.
    """

    grads = np.zeros_like(units)
    if not triplets:
        return 0.0, grads, 0

    idx = np.asarray(triplets, dtype=np.intp)
    a, p, n = idx[:, 0], idx[:, 1], idx[:, 2]

    ap = units[a] - units[p]
    an = units[a] - units[n]
    d_ap = np.sqrt((ap * ap).sum(axis=1))
    d_an = np.sqrt((an * an).sum(axis=1))

    hinge = d_ap - d_an + margin
    active = hinge > 0
    count = len(idx)

    loss = float(np.where(active, hinge, 0.0).sum() / count)

    u_ap = _unit(ap, d_ap) * active[:, None] / count
    u_an = _unit(an, d_an) * active[:, None] / count

    np.add.at(grads, a, u_ap - u_an)
    np.add.at(grads, p, -u_ap)
    np.add.at(grads, n, u_an)

    return loss, grads, int(active.sum())


# The end.
