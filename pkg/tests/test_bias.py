import numpy as np
import pytest

from conftest import random_frequencies, random_image
from spmlbias.bias import (
    BiasModelSpec,
    SpottingFrequencies,
    location_distribution,
    semantic_distribution,
    size_distribution,
    spotting_frequencies,
    uniform_distribution,
)
from spmlbias.data import BoundingBox, CategorySet, Dataset, ImageRecord
from spmlbias.errors import (
    ConfigError,
    DegenerateGeometryError,
    NoPositiveError,
    SemanticDegenerateError,
)
from spmlbias.ingest import SpottingPoint


def image_with(labels, instances=(), width=100, height=100, image_id=1):
    return ImageRecord(
        image_id=image_id,
        width=width,
        height=height,
        labels=tuple(labels),
        instances=tuple(instances),
    )


class TestUniform:
    def test_three_positives(self):
        dist = uniform_distribution(image_with([1, 0, 1, 1, 0]))
        assert np.allclose(dist.probs, [1 / 3, 0, 1 / 3, 1 / 3, 0])

    def test_single_positive(self):
        dist = uniform_distribution(image_with([0, 1]))
        assert dist.probs.tolist() == [0.0, 1.0]

    def test_no_positive(self):
        with pytest.raises(NoPositiveError, match="image 1"):
            uniform_distribution(image_with([0, 0]))


class TestSize:
    def test_direct_proportion(self):
        img = image_with(
            [1, 1],
            [(0, BoundingBox(0, 0, 30, 10)), (1, BoundingBox(0, 0, 10, 10))],
        )
        assert np.allclose(size_distribution(img).probs, [0.75, 0.25])

    def test_per_class_summation(self):
        img = image_with(
            [1, 1],
            [
                (0, BoundingBox(0, 0, 10, 10)),
                (0, BoundingBox(20, 20, 10, 10)),
                (1, BoundingBox(0, 0, 20, 10)),
            ],
        )
        assert np.allclose(size_distribution(img).probs, [0.5, 0.5])

    def test_no_overlap_deduplication(self):
        img = image_with(
            [1, 1],
            [
                (0, BoundingBox(0, 0, 10, 5)),
                (0, BoundingBox(0, 0, 10, 5)),
                (1, BoundingBox(30, 30, 10, 10)),
            ],
        )
        assert np.allclose(size_distribution(img).probs, [0.5, 0.5])

    def test_no_positive(self):
        with pytest.raises(NoPositiveError):
            size_distribution(image_with([0, 0]))

    def test_positive_without_geometry(self):
        img = image_with([1, 1], [(0, BoundingBox(0, 0, 10, 10))])
        with pytest.raises(DegenerateGeometryError, match="category 1"):
            size_distribution(img)

    def test_scale_invariance(self):
        rng = np.random.default_rng(1)
        for _ in range(50):
            img = random_image(rng)
            scaled = ImageRecord(
                image_id=img.image_id,
                width=img.width,
                height=img.height,
                labels=img.labels,
                instances=tuple(
                    (c, BoundingBox(b.x, b.y, b.w * 3.5, b.h)) for c, b in img.instances
                ),
            )
            assert np.allclose(
                size_distribution(img).probs, size_distribution(scaled).probs, atol=1e-9
            )

    def test_equal_areas_match_uniform(self):
        rng = np.random.default_rng(2)
        for _ in range(50):
            img = random_image(rng, max_instances=1)
            equalized = ImageRecord(
                image_id=img.image_id,
                width=img.width,
                height=img.height,
                labels=img.labels,
                instances=tuple((c, BoundingBox(b.x, b.y, 7, 3)) for c, b in img.instances),
            )
            assert np.allclose(
                size_distribution(equalized).probs,
                uniform_distribution(equalized).probs,
                atol=1e-9,
            )

    def test_monotone_in_area(self):
        img = image_with(
            [1, 1],
            [(0, BoundingBox(0, 0, 9, 9)), (1, BoundingBox(0, 0, 10, 10))],
        )
        probs = size_distribution(img).probs
        assert probs[1] > probs[0]


class TestLocation:
    def test_inverse_distance_limit(self):
        # centers at distance 10 and 30 from the image center (100, 100)
        img = image_with(
            [1, 1],
            [(0, BoundingBox(105, 95, 10, 10)), (1, BoundingBox(125, 95, 10, 10))],
            width=200,
            height=200,
        )
        dist = location_distribution(img, epsilon=1e-12)
        assert np.allclose(dist.probs, [0.75, 0.25], atol=1e-9)

    def test_single_positive_forces_one(self):
        img = image_with([0, 1], [(1, BoundingBox(3, 7, 10, 10))])
        assert np.allclose(location_distribution(img).probs, [0.0, 1.0])

    def test_centered_object_with_unit_epsilon(self):
        # class 0 exactly at the center, class 1 at distance 100, epsilon=1
        img = image_with(
            [1, 1],
            [(0, BoundingBox(90, 90, 20, 20)), (1, BoundingBox(195, 95, 10, 10))],
            width=200,
            height=200,
        )
        dist = location_distribution(img, epsilon=1.0)
        assert np.allclose(dist.probs, [101 / 102, 1 / 102], atol=1e-9)

    def test_mean_over_instances(self):
        # distances 10 and 30 average to 20 for class 0; class 1 sits at 20
        img = image_with(
            [1, 1],
            [
                (0, BoundingBox(105, 95, 10, 10)),
                (0, BoundingBox(125, 95, 10, 10)),
                (1, BoundingBox(75, 95, 10, 10)),
            ],
            width=200,
            height=200,
        )
        dist = location_distribution(img, epsilon=1e-12)
        assert np.allclose(dist.probs, [0.5, 0.5], atol=1e-9)

    def test_no_positive(self):
        with pytest.raises(NoPositiveError):
            location_distribution(image_with([0, 0]))

    def test_positive_without_geometry(self):
        img = image_with([1, 1], [(0, BoundingBox(0, 0, 10, 10))])
        with pytest.raises(DegenerateGeometryError):
            location_distribution(img)

    def test_bad_epsilon(self):
        img = image_with([1], [(0, BoundingBox(0, 0, 10, 10))])
        with pytest.raises(ConfigError):
            location_distribution(img, epsilon=0.0)

    def test_scale_invariance(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            img = random_image(rng)
            c = 4.0
            scaled = ImageRecord(
                image_id=img.image_id,
                width=int(img.width * c),
                height=int(img.height * c),
                labels=img.labels,
                instances=tuple(
                    (cat, BoundingBox(b.x * c, b.y * c, b.w * c, b.h * c))
                    for cat, b in img.instances
                ),
            )
            base = location_distribution(img, epsilon=2.0).probs
            assert np.allclose(
                location_distribution(scaled, epsilon=2.0 * c).probs, base, atol=1e-9
            )

    def test_monotone_in_distance(self):
        img = image_with(
            [1, 1],
            [(0, BoundingBox(105, 95, 10, 10)), (1, BoundingBox(125, 95, 10, 10))],
            width=200,
            height=200,
        )
        probs = location_distribution(img).probs
        assert probs[0] > probs[1]


class TestSemantic:
    def test_direct_proportion(self):
        dist = semantic_distribution(image_with([1, 1]), SpottingFrequencies((50, 150)))
        assert np.allclose(dist.probs, [0.25, 0.75])

    def test_zero_frequency_fallback_uniform(self):
        dist = semantic_distribution(image_with([1]), SpottingFrequencies((0,)))
        assert dist.probs.tolist() == [1.0]

    def test_absent_class_zeroed_in_both_sides(self):
        dist = semantic_distribution(
            image_with([1, 1, 1, 0]), SpottingFrequencies((10, 0, 30, 999))
        )
        assert np.allclose(dist.probs, [0.25, 0.0, 0.75, 0.0])

    def test_fallback_error(self):
        with pytest.raises(SemanticDegenerateError, match="image 1"):
            semantic_distribution(
                image_with([1, 1]), SpottingFrequencies((0, 0)), fallback="error"
            )

    def test_no_positive(self):
        with pytest.raises(NoPositiveError):
            semantic_distribution(image_with([0]), SpottingFrequencies((5,)))

    def test_monotone_in_frequency(self):
        dist = semantic_distribution(image_with([1, 1]), SpottingFrequencies((3, 8)))
        assert dist.probs[1] > dist.probs[0]


class TestSpecValidation:
    def test_kind_checked(self):
        with pytest.raises(ConfigError):
            BiasModelSpec(kind="sideways")

    def test_location_epsilon_defaulted(self):
        assert BiasModelSpec(kind="location").epsilon == 1.0

    def test_epsilon_rejected_elsewhere(self):
        with pytest.raises(ConfigError):
            BiasModelSpec(kind="uniform", epsilon=1.0)

    def test_frequencies_iff_semantic(self):
        with pytest.raises(ConfigError):
            BiasModelSpec(kind="semantic")
        with pytest.raises(ConfigError):
            BiasModelSpec(kind="size", frequencies=SpottingFrequencies((1,)))


class TestSupportAndNormalization:
    def test_fuzz(self):
        rng = np.random.default_rng(4)
        for i in range(300):
            img = random_image(rng, image_id=i)
            freqs = SpottingFrequencies(random_frequencies(rng, len(img.labels)))
            dists = [
                uniform_distribution(img),
                size_distribution(img),
                location_distribution(img, epsilon=float(rng.uniform(0.1, 5.0))),
                semantic_distribution(img, freqs),
            ]
            for dist in dists:
                assert abs(dist.probs.sum() - 1.0) <= 1e-9
                assert (dist.probs >= 0).all()
                for j, y in enumerate(img.labels):
                    if y == 0:
                        assert dist.probs[j] == 0.0
                    else:
                        assert dist.probs[j] > 0.0


def spotting_fixture():
    """Hand-tallied dataset and points: expected frequencies (3, 2)."""
    cats = CategorySet.from_ids([1, 2])
    images = (
        ImageRecord(
            10, 100, 100, (1, 1),
            instances=((0, BoundingBox(0, 0, 10, 10)), (1, BoundingBox(50, 50, 20, 20))),
        ),
        ImageRecord(
            20, 200, 200, (1, 1),
            instances=(
                (0, BoundingBox(0, 0, 10, 10)),
                (0, BoundingBox(100, 100, 50, 50)),
                (1, BoundingBox(0, 0, 100, 100)),
            ),
        ),
        ImageRecord(30, 50, 50, (0, 1), instances=((1, BoundingBox(10, 10, 10, 10)),)),
    )
    ds = Dataset(categories=cats, images=images)
    points = [
        SpottingPoint(10, 5, 5, 1),          # inside its own class-1 box -> counted
        SpottingPoint(10, 55, 55, 1),        # inside a class-2 box only -> discarded
        SpottingPoint(10, 90, 90, 1),        # outside every box -> discarded
        SpottingPoint(10, 10, 10, 1),        # edge-exact corner -> counted
        SpottingPoint(20, 125, 125, 1),      # inside the second class-1 box -> counted
        SpottingPoint(20, 5, 5, 2),          # inside the class-2 box -> counted
        SpottingPoint(20, 150, 150, 2),      # inside a class-1 box only -> discarded
        SpottingPoint(30, 20, 20, 2),        # edge-exact corner -> counted
        SpottingPoint(30, 9.999, 10, 2),     # just outside -> discarded
        SpottingPoint(99, 5, 5, 1, known_image=False),  # unknown image -> discarded
    ]
    return ds, points, (3, 2)


class TestSpottingFrequencies:
    def test_interior_point_counted(self):
        ds, _, _ = spotting_fixture()
        freqs = spotting_frequencies(ds, [SpottingPoint(10, 5, 5, 1)])
        assert freqs.counts == (1, 0)

    def test_outside_point_discarded(self):
        ds, _, _ = spotting_fixture()
        freqs = spotting_frequencies(ds, [SpottingPoint(10, 90, 90, 1)])
        assert freqs.counts == (0, 0)

    def test_wrong_category_box_discarded(self):
        ds, _, _ = spotting_fixture()
        freqs = spotting_frequencies(ds, [SpottingPoint(10, 55, 55, 1)])
        assert freqs.counts == (0, 0)

    def test_hand_tally(self):
        ds, points, expected = spotting_fixture()
        assert spotting_frequencies(ds, points).counts == expected

    def test_unknown_category_ignored(self):
        ds, _, _ = spotting_fixture()
        freqs = spotting_frequencies(ds, [SpottingPoint(10, 5, 5, 42)])
        assert freqs.counts == (0, 0)
