"""Minibatch training of a linear multi-label classifier over fixed features.

Features are consumed, never computed: the trainer sees only feature rows
and a single observed positive per image. Weights start at zero, updates
are applied serially per batch, and all shuffling derives from the config
seed, so identical inputs reproduce identical models bit for bit.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field

import numpy as np

from .data import CategorySet, Dataset
from .errors import ConfigError, FormatError, IntegrityError, TrainingError
from .ingest import FeatureMatrix
from .losses import LossSpec, loss_an, loss_an_ls, loss_em, loss_role, sigmoid
from .metrics import mean_average_precision
from .sampling import SpmlRealization

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-3
    epochs: int = 25
    batch_size: int = 16
    optimizer: str = "adam"
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    shuffle_seed: int = 0

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ConfigError(f"learning rate must be positive, got {self.learning_rate}")
        if self.epochs < 0:
            raise ConfigError(f"epochs must be non-negative, got {self.epochs}")
        if self.batch_size <= 0:
            raise ConfigError(f"batch size must be positive, got {self.batch_size}")
        if self.optimizer not in ("sgd", "adam"):
            raise ConfigError(f"unknown optimizer {self.optimizer!r}")


@dataclass
class LinearModel:
    """Weights (L x d) and per-category bias of a linear scorer."""

    w: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        self.w = np.asarray(self.w, dtype=np.float64)
        self.b = np.asarray(self.b, dtype=np.float64)
        if self.w.ndim != 2 or self.b.ndim != 1 or self.w.shape[0] != self.b.shape[0]:
            raise FormatError(f"inconsistent model shapes {self.w.shape} / {self.b.shape}")
        if not (np.isfinite(self.w).all() and np.isfinite(self.b).all()):
            raise FormatError("model parameters must be finite")

    @property
    def n_categories(self) -> int:
        return int(self.w.shape[0])

    @property
    def dim(self) -> int:
        return int(self.w.shape[1])


@dataclass
class TrainLog:
    """Per-epoch mean training loss and, when validation is given, MAP."""

    train_loss: list[float] = field(default_factory=list)
    val_map: list[float] = field(default_factory=list)
    best_epoch: int | None = None


class _Adam:
    def __init__(self, shape, cfg: TrainConfig):
        self.cfg = cfg
        self.m = np.zeros(shape)
        self.v = np.zeros(shape)
        self.t = 0

    def delta(self, grad: np.ndarray) -> np.ndarray:
        c = self.cfg
        self.t += 1
        self.m = c.adam_beta1 * self.m + (1.0 - c.adam_beta1) * grad
        self.v = c.adam_beta2 * self.v + (1.0 - c.adam_beta2) * grad * grad
        m_hat = self.m / (1.0 - c.adam_beta1**self.t)
        v_hat = self.v / (1.0 - c.adam_beta2**self.t)
        return -c.learning_rate * m_hat / (np.sqrt(v_hat) + c.adam_eps)


class _RowAdam:
    """Adam moments per row, stepped independently as rows are touched."""

    def __init__(self, shape, cfg: TrainConfig):
        self.cfg = cfg
        self.m = np.zeros(shape)
        self.v = np.zeros(shape)
        self.t = np.zeros(shape[0], dtype=np.int64)

    def delta(self, row: int, grad: np.ndarray) -> np.ndarray:
        c = self.cfg
        self.t[row] += 1
        t = int(self.t[row])
        self.m[row] = c.adam_beta1 * self.m[row] + (1.0 - c.adam_beta1) * grad
        self.v[row] = c.adam_beta2 * self.v[row] + (1.0 - c.adam_beta2) * grad * grad
        m_hat = self.m[row] / (1.0 - c.adam_beta1**t)
        v_hat = self.v[row] / (1.0 - c.adam_beta2**t)
        return -c.learning_rate * m_hat / (np.sqrt(v_hat) + c.adam_eps)


def _per_example(loss_spec: LossSpec, f: np.ndarray, observed: int):
    if loss_spec.kind == "AN":
        return loss_an(f, observed)
    if loss_spec.kind == "AN-LS":
        return loss_an_ls(f, observed, loss_spec.ls_epsilon)
    return loss_em(f, observed, loss_spec.em_alpha)


def _validation_map(w, b, val, categories: CategorySet) -> float:
    vfeats, vds = val
    if vds.categories.ids != categories.ids:
        raise IntegrityError("validation dataset categories differ from training categories")
    scores = sigmoid(vfeats.values.astype(np.float64) @ w.T + b)
    labels = np.array([vds.image(i).labels for i in vfeats.image_ids])
    return mean_average_precision(scores, labels)


def train(
    features: FeatureMatrix,
    realization: SpmlRealization,
    categories: CategorySet,
    loss_spec: LossSpec,
    cfg: TrainConfig,
    val: tuple[FeatureMatrix, Dataset] | None = None,
) -> tuple[LinearModel, TrainLog]:
    """Fit by minibatch gradient descent on the selected loss.

    Training rows are the realization's image ids in ascending order; they
    must all be present in `features`. When `val` (a FeatureMatrix/Dataset
    pair) is given, the returned model is the epoch snapshot with the
    highest validation MAP (earliest on ties); otherwise the final-epoch
    weights. The label-estimate loss additionally maintains one estimator
    row per training image, stepped by the same optimizer as the weights.
    """
    ids = sorted(realization.observations)
    feat_row = {img_id: r for r, img_id in enumerate(features.image_ids)}
    missing = [i for i in ids if i not in feat_row]
    if missing:
        raise IntegrityError(
            f"realization references {len(missing)} image ids absent from features, "
            f"first: {missing[:5]}"
        )
    if not ids:
        raise IntegrityError("realization contains no observations")
    x_all = features.values[[feat_row[i] for i in ids]].astype(np.float64)
    observed = np.array([categories.dense(realization.observations[i]) for i in ids])
    n, d = x_all.shape
    n_cats = len(categories)
    if cfg.batch_size > n:
        raise ConfigError(f"batch size {cfg.batch_size} exceeds {n} training images")

    w = np.zeros((n_cats, d))
    b = np.zeros(n_cats)
    if cfg.optimizer == "adam":
        opt_w, opt_b = _Adam(w.shape, cfg), _Adam(b.shape, cfg)
    else:
        opt_w = opt_b = None
    role = loss_spec.kind == "ROLE"
    if role:
        est_logits = np.zeros((n, n_cats))
        est_opt = _RowAdam(est_logits.shape, cfg) if cfg.optimizer == "adam" else None

    rng = np.random.default_rng(cfg.shuffle_seed)
    run_log = TrainLog()
    best: tuple[float, int, np.ndarray, np.ndarray] | None = None
    for epoch in range(cfg.epochs):
        perm = rng.permutation(n)
        epoch_loss = 0.0
        for bi, start in enumerate(range(0, n, cfg.batch_size)):
            rows = perm[start : start + cfg.batch_size]
            g_w = np.zeros_like(w)
            g_b = np.zeros_like(b)
            est_grads = []
            batch_loss = 0.0
            for r in rows:
                x = x_all[r]
                f = sigmoid(w @ x + b)
                if role:
                    est = sigmoid(est_logits[r])
                    lv, gz, ge = loss_role(
                        f, est, int(observed[r]), loss_spec.role_k, loss_spec.role_lambda
                    )
                    est_grads.append((int(r), ge))
                else:
                    lv, gz = _per_example(loss_spec, f, int(observed[r]))
                g_w += np.outer(gz, x)
                g_b += gz
                batch_loss += lv
            if not np.isfinite(batch_loss):
                raise TrainingError(f"non-finite loss at epoch {epoch}, batch {bi}")
            g_w /= len(rows)
            g_b /= len(rows)
            if cfg.optimizer == "adam":
                w += opt_w.delta(g_w)
                b += opt_b.delta(g_b)
            else:
                w -= cfg.learning_rate * g_w
                b -= cfg.learning_rate * g_b
            if role:
                for r, ge in est_grads:
                    if est_opt is not None:
                        est_logits[r] += est_opt.delta(r, ge)
                    else:
                        est_logits[r] -= cfg.learning_rate * ge
            if not (np.isfinite(w).all() and np.isfinite(b).all()):
                raise TrainingError(f"non-finite parameters after epoch {epoch}, batch {bi}")
            epoch_loss += batch_loss
        run_log.train_loss.append(epoch_loss / n)
        if val is not None:
            vmap = _validation_map(w, b, val, categories)
            run_log.val_map.append(vmap)
            if best is None or vmap > best[0]:
                best = (vmap, epoch, w.copy(), b.copy())
    if val is not None and best is not None:
        run_log.best_epoch = best[1]
        return LinearModel(best[2], best[3]), run_log
    return LinearModel(w, b), run_log


def predict(model: LinearModel, features: FeatureMatrix) -> np.ndarray:
    """Sigmoid scores in (0,1), one row per feature row."""
    if features.dim != model.dim:
        raise IntegrityError(f"feature dim {features.dim} != model dim {model.dim}")
    return sigmoid(features.values.astype(np.float64) @ model.w.T + model.b)


def model_to_json(model: LinearModel) -> bytes:
    """Canonical JSON rendering of a model."""
    doc = {
        "L": model.n_categories,
        "d": model.dim,
        "W": [[float(v) for v in row] for row in model.w],
        "b": [float(v) for v in model.b],
    }
    return (json.dumps(doc, sort_keys=True, separators=(",", ":")) + "\n").encode()


def model_from_json(data: bytes) -> LinearModel:
    """Parse a model file; inverse of `model_to_json`."""
    try:
        doc = json.loads(data)
    except (ValueError, UnicodeDecodeError) as exc:
        raise FormatError(f"model: invalid JSON ({exc})") from None
    if not isinstance(doc, dict):
        raise FormatError("model: expected an object")
    try:
        n_cats, dim = int(doc["L"]), int(doc["d"])
        w = np.array(doc["W"], dtype=np.float64)
        b = np.array(doc["b"], dtype=np.float64)
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"model: malformed fields ({exc})") from None
    if w.shape != (n_cats, dim) or b.shape != (n_cats,):
        raise FormatError(f"model: shape mismatch, header says {n_cats}x{dim}")
    return LinearModel(w, b)
