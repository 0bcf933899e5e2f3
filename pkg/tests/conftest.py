"""Shared fuzz helpers for building random but valid dataset objects."""

import numpy as np

from spmlbias.data import BoundingBox, CategorySet, Dataset, ImageRecord


def random_image(rng, n_categories=None, image_id=0, max_instances=3):
    """A valid ImageRecord with at least one positive and geometry for every positive."""
    if n_categories is None:
        n_categories = int(rng.integers(1, 9))
    width, height = int(rng.integers(64, 1280)), int(rng.integers(64, 1024))
    n_pos = int(rng.integers(1, n_categories + 1))
    positives = sorted(rng.choice(n_categories, size=n_pos, replace=False).tolist())
    labels = [0] * n_categories
    instances = []
    for cat in positives:
        labels[cat] = 1
        for _ in range(int(rng.integers(1, max_instances + 1))):
            w = float(rng.uniform(1.0, width))
            h = float(rng.uniform(1.0, height))
            x = float(rng.uniform(0.0, max(width - w, 0.0)))
            y = float(rng.uniform(0.0, max(height - h, 0.0)))
            instances.append((cat, BoundingBox(x, y, w, h)))
    return ImageRecord(
        image_id=image_id,
        width=width,
        height=height,
        labels=tuple(labels),
        instances=tuple(instances),
    )


def random_dataset(rng, n_images, n_categories, split_tag="train"):
    images = tuple(
        random_image(rng, n_categories=n_categories, image_id=100 + i) for i in range(n_images)
    )
    categories = CategorySet.from_ids(range(1, n_categories + 1))
    return Dataset(categories=categories, images=images, split_tag=split_tag)


def random_frequencies(rng, n_categories, allow_zero=False):
    low = 0 if allow_zero else 1
    return tuple(int(v) for v in rng.integers(low, 200, size=n_categories))
