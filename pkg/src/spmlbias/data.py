"""In-memory data model for multi-label datasets with box-level geometry.

Everything here is immutable after construction and safe to share across
threads. Categories are addressed by dense indices 0..L-1 internally;
external ids appear only at the serialization boundary.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import IntegrityError

SPLIT_TAGS = ("train", "val", "test")


@dataclass(frozen=True)
class CategorySet:
    """Bijection between external category ids and dense indices 0..L-1.

    Dense order is ascending external id, so any two datasets built from
    the same category universe agree on indexing.
    """

    ids: tuple[int, ...]
    names: tuple[str, ...] | None = None

    def __post_init__(self):
        if len(self.ids) == 0:
            raise IntegrityError("category set must contain at least one category")
        if len(set(self.ids)) != len(self.ids):
            raise IntegrityError("external category ids must be unique")
        if self.names is not None and len(self.names) != len(self.ids):
            raise IntegrityError("category names must align with ids")
        object.__setattr__(self, "_dense", {ext: i for i, ext in enumerate(self.ids)})

    @classmethod
    def from_ids(cls, ids, names_by_id=None) -> "CategorySet":
        ordered = tuple(sorted(ids))
        names = None
        if names_by_id is not None:
            names = tuple(str(names_by_id.get(ext, "")) for ext in ordered)
        return cls(ordered, names)

    def __len__(self) -> int:
        return len(self.ids)

    def __contains__(self, external_id: int) -> bool:
        return external_id in self._dense

    def dense(self, external_id: int) -> int:
        try:
            return self._dense[external_id]
        except KeyError:
            raise IntegrityError(f"unknown category id {external_id}") from None

    def external(self, dense_index: int) -> int:
        if not 0 <= dense_index < len(self.ids):
            raise IntegrityError(f"dense category index {dense_index} out of range")
        return self.ids[dense_index]


@dataclass(frozen=True)
class BoundingBox:
    """Axis-aligned box in pixel coordinates; (x, y) is the top-left corner."""

    x: float
    y: float
    w: float
    h: float

    def __post_init__(self):
        if not (self.w > 0 and self.h > 0):
            raise IntegrityError(
                f"bounding box extent must be positive, got w={self.w}, h={self.h}"
            )
        if self.x < 0 or self.y < 0:
            raise IntegrityError(
                f"bounding box corner must be non-negative, got x={self.x}, y={self.y}"
            )

    @property
    def area(self) -> float:
        return self.w * self.h

    @property
    def center(self) -> tuple[float, float]:
        return (self.x + self.w / 2.0, self.y + self.h / 2.0)

    def contains(self, px: float, py: float) -> bool:
        """Inclusive on all four edges."""
        return self.x <= px <= self.x + self.w and self.y <= py <= self.y + self.h


@dataclass(frozen=True)
class ImageRecord:
    """One image's binary label vector plus its instance geometry.

    Instances pair a dense category index with a box and may only reference
    categories whose label is 1. The converse is not required: a positive
    label with no instances is legal (its geometry may have been dropped at
    ingest) and is rejected only by operations that need geometry.
    """

    image_id: int
    width: int
    height: int
    labels: tuple[int, ...]
    instances: tuple[tuple[int, BoundingBox], ...] = ()

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise IntegrityError(f"image {self.image_id}: non-positive dimensions")
        if any(v not in (0, 1) for v in self.labels):
            raise IntegrityError(f"image {self.image_id}: labels must be 0 or 1")
        for cat, _ in self.instances:
            if not 0 <= cat < len(self.labels):
                raise IntegrityError(
                    f"image {self.image_id}: instance category {cat} out of range"
                )
            if self.labels[cat] != 1:
                raise IntegrityError(
                    f"image {self.image_id}: instance references non-positive category {cat}"
                )

    def instances_of(self, cat: int) -> list[BoundingBox]:
        return [box for c, box in self.instances if c == cat]


def positives_of(image: ImageRecord) -> list[int]:
    """Dense indices of the image's positive labels, strictly increasing."""
    return [i for i, v in enumerate(image.labels) if v == 1]


@dataclass(frozen=True)
class Dataset:
    """An ordered collection of images sharing one category universe."""

    categories: CategorySet
    images: tuple[ImageRecord, ...]
    split_tag: str = "train"

    def __post_init__(self):
        if self.split_tag not in SPLIT_TAGS:
            raise IntegrityError(f"unknown split tag {self.split_tag!r}")
        n_cats = len(self.categories)
        seen = set()
        for img in self.images:
            if img.image_id in seen:
                raise IntegrityError(f"duplicate image id {img.image_id}")
            seen.add(img.image_id)
            if len(img.labels) != n_cats:
                raise IntegrityError(
                    f"image {img.image_id}: label vector length {len(img.labels)} != {n_cats}"
                )
        object.__setattr__(self, "_by_id", {img.image_id: img for img in self.images})

    def __len__(self) -> int:
        return len(self.images)

    def has_image(self, image_id: int) -> bool:
        return image_id in self._by_id

    def image(self, image_id: int) -> ImageRecord:
        try:
            return self._by_id[image_id]
        except KeyError:
            raise IntegrityError(f"unknown image id {image_id}") from None
