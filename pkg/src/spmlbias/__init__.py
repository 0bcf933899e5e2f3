"""Single-positive multi-label tooling under annotator-bias models."""

from .bias import (
    BiasDistribution,
    BiasModelSpec,
    SpottingFrequencies,
    location_distribution,
    semantic_distribution,
    size_distribution,
    spotting_frequencies,
    uniform_distribution,
)
from .data import BoundingBox, CategorySet, Dataset, ImageRecord, positives_of
from .ingest import (
    FeatureMatrix,
    SpottingPoint,
    parse_annotations,
    parse_spotting,
    read_features,
    read_realization,
    write_features,
    write_realization,
)
from .losses import LossSpec, loss_an, loss_an_ls, loss_em, loss_role, sigmoid
from .metrics import (
    DropReport,
    MapTable,
    aggregate_runs,
    average_precision,
    drop_report,
    mean_average_precision,
)
from .sampling import SpmlRealization, generate_suite, sample_realization
from .trainer import LinearModel, TrainConfig, TrainLog, predict, train

__version__ = "0.1.0"
