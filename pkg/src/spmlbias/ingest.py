"""Readers and writers for the package's on-disk formats.

Covers COCO-style instance annotations, raw object-spotting points, the
SPMLF binary feature container, per-category frequency tables, and sampled
realization files. Parsers are pure functions of their input bytes, and
every writer emits canonical bytes so identical content hashes identically.
"""

from __future__ import annotations

import json
import logging
import os
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .bias import SpottingFrequencies
from .data import BoundingBox, CategorySet, Dataset, ImageRecord
from .errors import FormatError, IntegrityError, ParseError
from .sampling import SpmlRealization

log = logging.getLogger(__name__)

SPMLF_MAGIC = b"SPMLF1\x00\x00"
_BIAS_NAMES = ("uniform", "size", "location", "semantic")


@dataclass(frozen=True)
class SpottingPoint:
    """One annotator click: a pixel location tagged with an external category id."""

    image_id: int
    px: float
    py: float
    category: int
    known_image: bool = True


@dataclass
class FeatureMatrix:
    """Per-image feature rows (float32), row r belonging to image_ids[r]."""

    image_ids: tuple[int, ...]
    values: np.ndarray

    def __post_init__(self):
        self.image_ids = tuple(int(i) for i in self.image_ids)
        self.values = np.ascontiguousarray(self.values, dtype=np.float32)
        if self.values.ndim != 2:
            raise FormatError("feature values must be a 2-D matrix")
        if len(self.image_ids) != self.values.shape[0]:
            raise FormatError(
                f"{len(self.image_ids)} image ids for {self.values.shape[0]} feature rows"
            )
        if len(set(self.image_ids)) != len(self.image_ids):
            raise FormatError("feature image ids must be unique")
        if any(i < 0 for i in self.image_ids):
            raise FormatError("feature image ids must be non-negative")
        if self.values.size and not np.isfinite(self.values).all():
            raise FormatError("feature values must be finite")

    @property
    def dim(self) -> int:
        return int(self.values.shape[1])

    def __len__(self) -> int:
        return len(self.image_ids)


def _load_json(data: bytes, what: str):
    try:
        return json.loads(data)
    except (ValueError, UnicodeDecodeError) as exc:
        raise ParseError(f"{what}: invalid JSON ({exc})") from None


def _field(obj, key: str, path: str, kinds, *, required: bool = True):
    if not isinstance(obj, dict):
        raise ParseError(f"{path}: expected an object")
    if key not in obj:
        if required:
            raise ParseError(f"{path}.{key}: missing")
        return None
    val = obj[key]
    if isinstance(val, bool) or not isinstance(val, kinds):
        raise ParseError(f"{path}.{key}: unexpected type {type(val).__name__}")
    return val


def parse_annotations(data: bytes, split_tag: str = "train") -> Dataset:
    """Parse a COCO-style instances document into a Dataset.

    A category is positive for an image iff at least one annotation of that
    category exists for it. Boxes with non-positive width or height are
    dropped (counted and logged) but still mark their category positive.
    """
    doc = _load_json(data, "annotations document")
    if not isinstance(doc, dict):
        raise ParseError("$: expected an object")
    for key in ("images", "annotations", "categories"):
        if not isinstance(doc.get(key), list):
            raise ParseError(f"$.{key}: missing or not an array")

    names_by_id: dict[int, str] = {}
    for i, cat in enumerate(doc["categories"]):
        path = f"categories[{i}]"
        ext = _field(cat, "id", path, int)
        if ext in names_by_id:
            raise ParseError(f"{path}.id: duplicate category id {ext}")
        name = _field(cat, "name", path, str, required=False)
        names_by_id[ext] = name if name is not None else ""
    if not names_by_id:
        raise ParseError("$.categories: at least one category required")
    categories = CategorySet.from_ids(names_by_id.keys(), names_by_id)

    image_meta: dict[int, tuple[int, int]] = {}
    image_order: list[int] = []
    for i, img in enumerate(doc["images"]):
        path = f"images[{i}]"
        img_id = _field(img, "id", path, int)
        width = _field(img, "width", path, int)
        height = _field(img, "height", path, int)
        if img_id in image_meta:
            raise ParseError(f"{path}.id: duplicate image id {img_id}")
        if width <= 0 or height <= 0:
            raise ParseError(f"{path}: non-positive dimensions {width}x{height}")
        image_meta[img_id] = (width, height)
        image_order.append(img_id)

    labels = {img_id: [0] * len(categories) for img_id in image_order}
    instances = {img_id: [] for img_id in image_order}
    dropped = 0
    for i, ann in enumerate(doc["annotations"]):
        path = f"annotations[{i}]"
        img_id = _field(ann, "image_id", path, int)
        ext = _field(ann, "category_id", path, int)
        bbox = _field(ann, "bbox", path, list)
        if img_id not in image_meta:
            raise IntegrityError(f"{path}: unknown image id {img_id}")
        if ext not in categories:
            raise IntegrityError(f"{path}: unknown category id {ext}")
        if len(bbox) != 4 or any(
            isinstance(v, bool) or not isinstance(v, (int, float)) for v in bbox
        ):
            raise ParseError(f"{path}.bbox: expected four numbers")
        x, y, w, h = (float(v) for v in bbox)
        if x < 0 or y < 0:
            raise ParseError(f"{path}.bbox: negative corner ({x}, {y})")
        cat = categories.dense(ext)
        labels[img_id][cat] = 1
        if w <= 0 or h <= 0:
            dropped += 1
            continue
        instances[img_id].append((cat, BoundingBox(x, y, w, h)))
    if dropped:
        log.warning("dropped %d degenerate bounding boxes (w<=0 or h<=0)", dropped)

    images = []
    for img_id in image_order:
        width, height = image_meta[img_id]
        inst = tuple(
            sorted(instances[img_id], key=lambda p: (p[0], p[1].x, p[1].y, p[1].w, p[1].h))
        )
        images.append(
            ImageRecord(
                image_id=img_id,
                width=width,
                height=height,
                labels=tuple(labels[img_id]),
                instances=inst,
            )
        )
    return Dataset(categories=categories, images=tuple(images), split_tag=split_tag)


def parse_spotting(data: bytes, dataset: Dataset) -> list[SpottingPoint]:
    """Parse raw spotting records, keeping every point verbatim.

    Points referencing images absent from the dataset are retained with
    known_image=False; filtering against geometry happens later.
    """
    doc = _load_json(data, "spotting document")
    if not isinstance(doc, list):
        raise ParseError("$: expected an array of spotting records")
    points = []
    unknown = 0
    for i, rec in enumerate(doc):
        path = f"$[{i}]"
        img_id = _field(rec, "image_id", path, int)
        px = float(_field(rec, "pixel_x", path, (int, float)))
        py = float(_field(rec, "pixel_y", path, (int, float)))
        ext = _field(rec, "category_id", path, int)
        if px < 0 or py < 0:
            raise ParseError(f"{path}: negative pixel coordinates ({px}, {py})")
        known = dataset.has_image(img_id)
        if not known:
            unknown += 1
        points.append(SpottingPoint(img_id, px, py, ext, known_image=known))
    if unknown:
        log.warning("%d spotting points reference images absent from the dataset", unknown)
    return points


def write_features(matrix: FeatureMatrix, sink) -> None:
    """Write an SPMLF container.

    Layout: 8-byte magic, u32 N, u32 d, N u64 image ids, then N*d float32
    values row-major, all little-endian with no padding or trailing bytes.
    """
    n, d = matrix.values.shape
    if n >= 2**32 or d >= 2**32:
        raise FormatError(f"matrix {n}x{d} exceeds the u32 header range")
    if any(i >= 2**64 for i in matrix.image_ids):
        raise FormatError("image ids must fit in u64")
    sink.write(SPMLF_MAGIC)
    sink.write(struct.pack("<II", n, d))
    sink.write(np.asarray(matrix.image_ids, dtype="<u8").tobytes())
    sink.write(matrix.values.astype("<f4", copy=False).tobytes())


def read_features(source) -> FeatureMatrix:
    """Read an SPMLF container; inverse of `write_features`."""
    data = source.read()
    if data[:8] != SPMLF_MAGIC:
        raise FormatError("bad magic: not an SPMLF file")
    if len(data) < 16:
        raise FormatError("truncated header")
    n, d = struct.unpack_from("<II", data, 8)
    need = 16 + 8 * n + 4 * n * d
    if len(data) < need:
        raise FormatError(f"truncated payload: need {need} bytes, have {len(data)}")
    if len(data) > need:
        raise FormatError(f"{len(data) - need} trailing bytes after payload")
    ids = np.frombuffer(data, dtype="<u8", count=n, offset=16)
    values = np.frombuffer(data, dtype="<f4", count=n * d, offset=16 + 8 * n)
    return FeatureMatrix(tuple(int(i) for i in ids), values.reshape(n, d).copy())


def _canonical_json(doc) -> bytes:
    return (json.dumps(doc, sort_keys=True, separators=(",", ":")) + "\n").encode()


def write_realization(realization: SpmlRealization, sink) -> None:
    """Serialize a realization as canonical JSON (sorted keys, sorted image ids)."""
    if realization.bias not in _BIAS_NAMES:
        raise FormatError(f"unknown bias model name {realization.bias!r}")
    obs = [
        {"image_id": int(i), "category_id": int(c)}
        for i, c in sorted(realization.observations.items())
    ]
    doc = {
        "bias": realization.bias,
        "seed": int(realization.seed),
        "epsilon": realization.epsilon,
        "observations": obs,
    }
    sink.write(_canonical_json(doc))


def read_realization(source) -> SpmlRealization:
    """Parse a realization file; inverse of `write_realization`."""
    doc = _load_json(source.read(), "realization")
    if not isinstance(doc, dict):
        raise FormatError("realization: expected an object")
    bias = doc.get("bias")
    if bias not in _BIAS_NAMES:
        raise FormatError(f"unknown bias model name {bias!r}")
    seed = doc.get("seed")
    if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
        raise FormatError("realization seed must be a non-negative integer")
    epsilon = doc.get("epsilon")
    if epsilon is not None:
        if isinstance(epsilon, bool) or not isinstance(epsilon, (int, float)) or epsilon <= 0:
            raise FormatError("realization epsilon must be positive or null")
        epsilon = float(epsilon)
    obs_list = doc.get("observations")
    if not isinstance(obs_list, list):
        raise FormatError("realization observations must be an array")
    observations: dict[int, int] = {}
    for i, rec in enumerate(obs_list):
        if not isinstance(rec, dict):
            raise FormatError(f"observations[{i}]: expected an object")
        img_id = rec.get("image_id")
        cat_id = rec.get("category_id")
        for label, val in (("image_id", img_id), ("category_id", cat_id)):
            if isinstance(val, bool) or not isinstance(val, int):
                raise FormatError(f"observations[{i}].{label}: expected an integer")
        if img_id in observations:
            raise FormatError(f"observations[{i}]: duplicate image id {img_id}")
        observations[img_id] = cat_id
    return SpmlRealization(bias=bias, seed=seed, observations=observations, epsilon=epsilon)


def write_frequencies(freqs: SpottingFrequencies, categories: CategorySet, sink) -> None:
    """Serialize per-category counts keyed by external category id."""
    if len(freqs) != len(categories):
        raise FormatError(
            f"frequency table has {len(freqs)} entries for {len(categories)} categories"
        )
    doc = {str(categories.external(i)): c for i, c in enumerate(freqs.counts)}
    sink.write(_canonical_json(doc))


def read_frequencies(data: bytes, categories: CategorySet) -> SpottingFrequencies:
    """Parse a frequency file back into dense order; missing categories count 0."""
    doc = _load_json(data, "frequencies")
    if not isinstance(doc, dict):
        raise ParseError("frequencies: expected an object keyed by category id")
    counts = [0] * len(categories)
    for key, val in doc.items():
        try:
            ext = int(key)
        except ValueError:
            raise ParseError(f"frequencies: non-integer category key {key!r}") from None
        if ext not in categories:
            raise IntegrityError(f"frequencies: unknown category id {ext}")
        if isinstance(val, bool) or not isinstance(val, int) or val < 0:
            raise ParseError(f"frequencies[{key}]: expected a non-negative integer")
        counts[categories.dense(ext)] = val
    return SpottingFrequencies(tuple(counts))


def atomic_write_bytes(path, data: bytes) -> None:
    """Write via a temp file in the same directory, then rename into place."""
    path = Path(path)
    tmp = path.with_name(f"{path.name}.{os.getpid()}.tmp")
    tmp.write_bytes(data)
    os.replace(tmp, path)
