"""Deterministic synthetic corpora for desk-scale end-to-end runs.

Features are a fixed random projection of the label vector plus Gaussian
noise, so the linear training protocol is learnable by construction. The
generator emits the same file formats as the ingestion layer (annotation
JSON, spotting JSON, SPMLF feature files), and the in-memory datasets are
obtained by parsing those very documents, so files and memory always agree.
"""

from __future__ import annotations

import io
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .bias import SpottingFrequencies
from .data import Dataset
from .errors import ConfigError
from .ingest import FeatureMatrix, atomic_write_bytes, parse_annotations, write_features

_IMG_W, _IMG_H = 640, 480
_TRAIN_ID0, _TEST_ID0 = 1000, 500000


@dataclass(frozen=True)
class SynthConfig:
    n_train: int = 200
    n_test: int = 100
    n_categories: int = 5
    feature_dim: int = 32
    objects_min: int = 1
    objects_max: int = 4
    size_skew: tuple[float, ...] | None = None
    spotting_freqs: tuple[int, ...] | None = None
    noise_sigma: float = 0.1
    seed: int = 0
    centered_object: bool = False
    degenerate_class: int | None = None

    def __post_init__(self):
        if self.n_train <= 0 or self.n_test <= 0:
            raise ConfigError("split sizes must be positive")
        if self.n_categories <= 0:
            raise ConfigError("need at least one category")
        if self.feature_dim < self.n_categories:
            raise ConfigError(
                f"feature dim {self.feature_dim} must be >= {self.n_categories} categories"
            )
        if not 1 <= self.objects_min <= self.objects_max:
            raise ConfigError("objects_per_image range must satisfy 1 <= min <= max")
        if self.size_skew is not None:
            if len(self.size_skew) != self.n_categories or any(s <= 0 for s in self.size_skew):
                raise ConfigError("size_skew needs one positive scale per category")
        if self.spotting_freqs is not None:
            if len(self.spotting_freqs) != self.n_categories or any(
                f < 0 for f in self.spotting_freqs
            ):
                raise ConfigError("spotting_freqs needs one non-negative count per category")
        if self.noise_sigma < 0:
            raise ConfigError("noise_sigma must be non-negative")
        if self.degenerate_class is not None and not (
            0 <= self.degenerate_class < self.n_categories
        ):
            raise ConfigError(f"degenerate_class {self.degenerate_class} out of range")


@dataclass
class SynthCorpus:
    train: Dataset
    test: Dataset
    train_features: FeatureMatrix
    test_features: FeatureMatrix
    frequencies: SpottingFrequencies
    train_doc: dict
    test_doc: dict
    spotting: list[dict]


def _gen_split(rng, cfg: SynthConfig, first_id: int, count: int, skew, centered: bool):
    images, annotations, label_vectors = [], [], []
    for i in range(count):
        img_id = first_id + i
        images.append({"id": img_id, "width": _IMG_W, "height": _IMG_H})
        k = int(rng.integers(cfg.objects_min, cfg.objects_max + 1))
        cats = rng.integers(0, cfg.n_categories, size=k)
        labels = [0] * cfg.n_categories
        for j, c in enumerate(cats):
            c = int(c)
            labels[c] = 1
            base = 0.12 * min(_IMG_W, _IMG_H) * skew[c]
            side = base * float(rng.uniform(0.6, 1.4))
            w = min(max(side, 2.0), _IMG_W - 2.0)
            h = min(max(side * float(rng.uniform(0.7, 1.3)), 2.0), _IMG_H - 2.0)
            if centered and i == 0 and j == 0:
                x, y = (_IMG_W - w) / 2.0, (_IMG_H - h) / 2.0
            else:
                x = float(rng.uniform(0.0, _IMG_W - w))
                y = float(rng.uniform(0.0, _IMG_H - h))
            annotations.append(
                {"image_id": img_id, "category_id": c + 1, "bbox": [x, y, w, h]}
            )
        label_vectors.append(labels)
    return images, annotations, label_vectors


def _features(rng, cfg: SynthConfig, projection, label_vectors) -> np.ndarray:
    out = np.empty((len(label_vectors), cfg.feature_dim))
    for r, labels in enumerate(label_vectors):
        noise = rng.normal(size=cfg.feature_dim)
        out[r] = np.asarray(labels, dtype=np.float64) @ projection + cfg.noise_sigma * noise
    return out


def generate(cfg: SynthConfig) -> SynthCorpus:
    """Build a corpus deterministically from the config seed."""
    rng = np.random.default_rng(cfg.seed)
    skew = cfg.size_skew if cfg.size_skew is not None else (1.0,) * cfg.n_categories
    projection = rng.normal(size=(cfg.n_categories, cfg.feature_dim))
    categories = [{"id": j + 1, "name": f"class_{j + 1}"} for j in range(cfg.n_categories)]

    tr_imgs, tr_anns, tr_labels = _gen_split(
        rng, cfg, _TRAIN_ID0, cfg.n_train, skew, cfg.centered_object
    )
    te_imgs, te_anns, te_labels = _gen_split(rng, cfg, _TEST_ID0, cfg.n_test, skew, False)

    if cfg.degenerate_class is not None:
        # One extra train image whose only annotation has zero width: the
        # label stays positive but ingestion drops the box, which makes the
        # geometry-based bias models fail on purpose.
        img_id = _TRAIN_ID0 + cfg.n_train
        tr_imgs.append({"id": img_id, "width": _IMG_W, "height": _IMG_H})
        tr_anns.append(
            {
                "image_id": img_id,
                "category_id": cfg.degenerate_class + 1,
                "bbox": [10.0, 10.0, 0.0, 20.0],
            }
        )
        labels = [0] * cfg.n_categories
        labels[cfg.degenerate_class] = 1
        tr_labels.append(labels)

    train_doc = {"images": tr_imgs, "annotations": tr_anns, "categories": categories}
    test_doc = {"images": te_imgs, "annotations": te_anns, "categories": categories}
    train_ds = parse_annotations(_doc_bytes(train_doc), split_tag="train")
    test_ds = parse_annotations(_doc_bytes(test_doc), split_tag="test")

    train_features = FeatureMatrix(
        tuple(img["id"] for img in tr_imgs), _features(rng, cfg, projection, tr_labels)
    )
    test_features = FeatureMatrix(
        tuple(img["id"] for img in te_imgs), _features(rng, cfg, projection, te_labels)
    )

    spotting, frequencies = _spotting(cfg, train_ds)
    return SynthCorpus(
        train=train_ds,
        test=test_ds,
        train_features=train_features,
        test_features=test_features,
        frequencies=frequencies,
        train_doc=train_doc,
        test_doc=test_doc,
        spotting=spotting,
    )


def _spotting(cfg: SynthConfig, train_ds: Dataset):
    """Place target counts of points at same-category box centers, plus decoys."""
    targets = (
        cfg.spotting_freqs
        if cfg.spotting_freqs is not None
        else tuple(20 + 5 * j for j in range(cfg.n_categories))
    )
    centers: list[list[tuple[int, float, float]]] = [[] for _ in range(cfg.n_categories)]
    for img in train_ds.images:
        for cat, box in img.instances:
            cx, cy = box.center
            centers[cat].append((img.image_id, cx, cy))
    records = []
    realized = [0] * cfg.n_categories
    for cat in range(cfg.n_categories):
        spots = centers[cat]
        if not spots:
            continue
        for t in range(targets[cat]):
            img_id, cx, cy = spots[t % len(spots)]
            records.append(
                {
                    "image_id": img_id,
                    "pixel_x": cx,
                    "pixel_y": cy,
                    "category_id": cat + 1,
                }
            )
            realized[cat] += 1
    # Decoys that the same-category filter must discard: one unknown image,
    # one point beyond the image extent (outside every box).
    records.append({"image_id": 999999999, "pixel_x": 1.0, "pixel_y": 1.0, "category_id": 1})
    records.append(
        {
            "image_id": _TRAIN_ID0,
            "pixel_x": float(_IMG_W + 50),
            "pixel_y": float(_IMG_H + 50),
            "category_id": 1,
        }
    )
    return records, SpottingFrequencies(tuple(realized))


def _doc_bytes(doc) -> bytes:
    return (json.dumps(doc, sort_keys=True, separators=(",", ":")) + "\n").encode()


def write_corpus(corpus: SynthCorpus, outdir) -> dict[str, Path]:
    """Write the corpus's files into `outdir` and return their paths."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    paths = {
        "train_annotations": outdir / "train_annotations.json",
        "test_annotations": outdir / "test_annotations.json",
        "spotting": outdir / "spotting.json",
        "train_features": outdir / "train_features.spmlf",
        "test_features": outdir / "test_features.spmlf",
    }
    atomic_write_bytes(paths["train_annotations"], _doc_bytes(corpus.train_doc))
    atomic_write_bytes(paths["test_annotations"], _doc_bytes(corpus.test_doc))
    atomic_write_bytes(paths["spotting"], _doc_bytes(corpus.spotting))
    for key, matrix in (
        ("train_features", corpus.train_features),
        ("test_features", corpus.test_features),
    ):
        buf = io.BytesIO()
        write_features(matrix, buf)
        atomic_write_bytes(paths[key], buf.getvalue())
    return paths
