"""Seeded generation of static single-positive label realizations.

Each image draws its observed category from the image's bias distribution
using one uniform variate derived from (seed, image_id) by two rounds of
the SplitMix64 finalizer. Keying the stream per image makes the output
independent of iteration order, and a realization can be regenerated
bit-for-bit from its seed. Labels are sampled once; they are never
re-sampled during training.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bias import BiasModelSpec, distribution_for
from .data import Dataset
from .errors import ConfigError, NoPositiveError

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_MULT1 = 0xBF58476D1CE4E5B9
_MULT2 = 0x94D049BB133111EB


def _mix64(z: int) -> int:
    """SplitMix64 finalizer on one 64-bit lane."""
    z = (z + _GOLDEN) & _MASK
    z = ((z ^ (z >> 30)) * _MULT1) & _MASK
    z = ((z ^ (z >> 27)) * _MULT2) & _MASK
    return z ^ (z >> 31)


def unit_draw(seed: int, image_id: int) -> float:
    """Deterministic uniform variate in [0, 1) keyed by (seed, image_id)."""
    h = _mix64(_mix64(seed & _MASK) ^ (image_id & _MASK))
    return (h >> 11) * 2.0**-53


def unit_draws(seeds, image_id: int) -> np.ndarray:
    """Vectorized `unit_draw` over an array of seeds."""
    with np.errstate(over="ignore"):
        z = np.asarray(seeds, dtype=np.uint64)
        z = _mix64_np(z)
        z = _mix64_np(z ^ np.uint64(image_id & _MASK))
    return (z >> np.uint64(11)) * 2.0**-53


def _mix64_np(z: np.ndarray) -> np.ndarray:
    z = z + np.uint64(_GOLDEN)
    z = (z ^ (z >> np.uint64(30))) * np.uint64(_MULT1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(_MULT2)
    return z ^ (z >> np.uint64(31))


def pick_category(probs: np.ndarray, u: float) -> int:
    """Inverse-CDF draw over dense category order with one uniform variate."""
    cum = np.cumsum(probs)
    idx = int(np.searchsorted(cum, u, side="right"))
    if idx >= len(probs):
        # u fell past the last cumulative sum by rounding; take the last
        # category that carries mass.
        idx = int(np.flatnonzero(probs > 0)[-1])
    return idx


@dataclass(frozen=True)
class SpmlRealization:
    """A static SPML label set: one observed positive per training image.

    `observations` maps external image id to the external id of the
    observed category; every other label is implicitly unknown.
    """

    bias: str
    seed: int
    observations: dict[int, int]
    epsilon: float | None = None


def sample_realization(
    dataset: Dataset, spec: BiasModelSpec, seed: int
) -> SpmlRealization:
    """Draw one observed positive per image.

    Deterministic in (dataset content, spec, seed) and independent of the
    dataset's image order. Images without a positive label are rejected up
    front, listing their ids.
    """
    no_pos = sorted(img.image_id for img in dataset.images if 1 not in img.labels)
    if no_pos:
        raise NoPositiveError(
            "images without positive labels cannot be realized: "
            + ", ".join(str(i) for i in no_pos)
        )
    cats = dataset.categories
    observations: dict[int, int] = {}
    for img in dataset.images:
        dist = distribution_for(img, spec)
        u = unit_draw(seed, img.image_id)
        observations[img.image_id] = cats.external(pick_category(dist.probs, u))
    return SpmlRealization(
        bias=spec.kind, seed=int(seed), observations=observations, epsilon=spec.epsilon
    )


def generate_suite(dataset: Dataset, specs, seeds) -> list[SpmlRealization]:
    """One realization per (spec, seed) pair, each independently sampled."""
    seeds = [int(s) for s in seeds]
    if len(set(seeds)) != len(seeds):
        raise ConfigError("seeds must be distinct")
    return [sample_realization(dataset, spec, seed) for spec in specs for seed in seeds]
