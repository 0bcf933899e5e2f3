"""Per-image label-selection distributions for four annotator-bias models.

Each model assigns a probability to every category of being the one
positive an annotator reports for an image. Absent categories always get
probability zero. Unnormalized masses are accumulated in double precision
and normalized once at the end.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .data import Dataset, ImageRecord, positives_of
from .errors import (
    ConfigError,
    DegenerateGeometryError,
    NoPositiveError,
    SemanticDegenerateError,
)

BIAS_KINDS = ("uniform", "size", "location", "semantic")
DEFAULT_EPSILON = 1.0


@dataclass(frozen=True)
class BiasDistribution:
    """Probability of each dense category being the reported positive."""

    probs: np.ndarray


@dataclass(frozen=True)
class SpottingFrequencies:
    """Per-category counts of filtered annotator spotting clicks."""

    counts: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "counts", tuple(int(c) for c in self.counts))
        if any(c < 0 for c in self.counts):
            raise ConfigError("spotting frequencies must be non-negative")

    def __len__(self) -> int:
        return len(self.counts)


@dataclass(frozen=True)
class BiasModelSpec:
    """Which bias model to apply, plus its parameters.

    epsilon applies to the location model only (defaults to 1 pixel);
    frequencies are required for, and only for, the semantic model.
    """

    kind: str
    epsilon: float | None = None
    frequencies: SpottingFrequencies | None = None
    semantic_fallback: str = "uniform"

    def __post_init__(self):
        if self.kind not in BIAS_KINDS:
            raise ConfigError(f"unknown bias model {self.kind!r}")
        if self.kind == "location":
            if self.epsilon is None:
                object.__setattr__(self, "epsilon", DEFAULT_EPSILON)
            elif self.epsilon <= 0:
                raise ConfigError(f"epsilon must be positive, got {self.epsilon}")
        elif self.epsilon is not None:
            raise ConfigError("epsilon only applies to the location model")
        if (self.frequencies is not None) != (self.kind == "semantic"):
            raise ConfigError(
                "spotting frequencies are required for the semantic model and only for it"
            )
        if self.semantic_fallback not in ("uniform", "error"):
            raise ConfigError(f"unknown semantic fallback {self.semantic_fallback!r}")


def _positives_or_raise(image: ImageRecord) -> list[int]:
    pos = positives_of(image)
    if not pos:
        raise NoPositiveError(f"image {image.image_id} has no positive labels")
    return pos


def uniform_distribution(image: ImageRecord) -> BiasDistribution:
    """Equal mass on every present category."""
    pos = _positives_or_raise(image)
    probs = np.zeros(len(image.labels))
    probs[pos] = 1.0 / len(pos)
    return BiasDistribution(probs)


def size_distribution(image: ImageRecord) -> BiasDistribution:
    """Mass proportional to the summed box area of each present category.

    Overlapping boxes are double counted on purpose, so the per-image total
    can exceed the image area.
    """
    pos = _positives_or_raise(image)
    masses = np.zeros(len(image.labels))
    for cat, box in image.instances:
        masses[cat] += box.area
    for i in pos:
        if masses[i] <= 0.0:
            raise DegenerateGeometryError(
                f"image {image.image_id}: positive category {i} has zero total box area"
            )
    return BiasDistribution(masses / masses.sum())


def location_distribution(
    image: ImageRecord, epsilon: float = DEFAULT_EPSILON
) -> BiasDistribution:
    """Mass inversely proportional to mean distance from the image center.

    A category's distance is epsilon plus the arithmetic mean of the
    Euclidean distances from the image center to each of its box centers;
    epsilon keeps perfectly centered objects finite.
    """
    if epsilon <= 0:
        raise ConfigError(f"epsilon must be positive, got {epsilon}")
    pos = _positives_or_raise(image)
    cx, cy = image.width / 2.0, image.height / 2.0
    dist_sum = np.zeros(len(image.labels))
    count = np.zeros(len(image.labels), dtype=np.int64)
    for cat, box in image.instances:
        bx, by = box.center
        dist_sum[cat] += math.hypot(bx - cx, by - cy)
        count[cat] += 1
    inv = np.zeros(len(image.labels))
    for i in pos:
        if count[i] == 0:
            raise DegenerateGeometryError(
                f"image {image.image_id}: positive category {i} has no instances"
            )
        inv[i] = 1.0 / (epsilon + dist_sum[i] / count[i])
    return BiasDistribution(inv / inv.sum())


def semantic_distribution(
    image: ImageRecord,
    freqs: SpottingFrequencies,
    fallback: str = "uniform",
) -> BiasDistribution:
    """Mass proportional to each present category's spotting frequency.

    When every present category has frequency zero the distribution is
    undefined; fall back to uniform over the positives, or raise, per
    `fallback`.
    """
    pos = _positives_or_raise(image)
    if len(freqs) != len(image.labels):
        raise ConfigError(
            f"frequency table has {len(freqs)} entries for {len(image.labels)} categories"
        )
    masses = np.zeros(len(image.labels))
    for i in pos:
        masses[i] = float(freqs.counts[i])
    total = masses.sum()
    if total <= 0.0:
        if fallback == "uniform":
            return uniform_distribution(image)
        raise SemanticDegenerateError(
            f"image {image.image_id}: every present category has zero spotting frequency"
        )
    return BiasDistribution(masses / total)


def distribution_for(image: ImageRecord, spec: BiasModelSpec) -> BiasDistribution:
    """Dispatch to the model selected by `spec`."""
    if spec.kind == "uniform":
        return uniform_distribution(image)
    if spec.kind == "size":
        return size_distribution(image)
    if spec.kind == "location":
        return location_distribution(image, spec.epsilon)
    return semantic_distribution(image, spec.frequencies, spec.semantic_fallback)


def spotting_frequencies(dataset: Dataset, points: Iterable) -> SpottingFrequencies:
    """Count spotting points that land inside a same-category box.

    A point counts for its category when at least one box of that category
    in the same image contains it; containment is inclusive on all edges.
    Points whose image or category is unknown to the dataset are discarded.
    """
    counts = [0] * len(dataset.categories)
    for pt in points:
        if not dataset.has_image(pt.image_id):
            continue
        if pt.category not in dataset.categories:
            continue
        cat = dataset.categories.dense(pt.category)
        image = dataset.image(pt.image_id)
        if any(c == cat and box.contains(pt.px, pt.py) for c, box in image.instances):
            counts[cat] += 1
    return SpottingFrequencies(tuple(counts))
