"""Ranking metrics, run aggregation, and bias-sensitivity summaries."""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, UndefinedApError

log = logging.getLogger(__name__)

BIAS_ORDER = ("uniform", "size", "location", "semantic")
LOSS_ORDER = ("AN", "AN-LS", "ROLE", "EM")


def average_precision(scores, labels) -> float:
    """Average precision of one ranking, ties broken by ascending index.

    Items are ranked by descending score; AP is the mean of precision@k over
    the ranks k that hold positives. The per-rank terms are accumulated with
    exact rounding (fsum), so the result does not depend on summation order.
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if scores.ndim != 1 or scores.shape != labels.shape:
        raise ValueError("scores and labels must be 1-D vectors of equal length")
    n_pos = int(np.count_nonzero(labels == 1))
    if n_pos == 0:
        raise UndefinedApError("ranking has no positive labels")
    order = np.lexsort((np.arange(scores.shape[0]), -scores))
    hits = 0
    terms = []
    for k, idx in enumerate(order, start=1):
        if labels[idx] == 1:
            hits += 1
            terms.append(hits / k)
    return math.fsum(terms) / n_pos


def per_category_average_precision(scores, labels) -> list[float | None]:
    """AP per column of an N x L score/label pair; None where undefined."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if scores.ndim != 2 or scores.shape != labels.shape:
        raise ValueError("scores and labels must be matrices of equal shape")
    out: list[float | None] = []
    for col in range(scores.shape[1]):
        try:
            out.append(average_precision(scores[:, col], labels[:, col]))
        except UndefinedApError:
            out.append(None)
    return out


def mean_average_precision(scores, labels) -> float:
    """MAP in percentage points: 100 x mean AP over non-empty categories.

    Categories with no positive test labels are excluded from the mean and
    logged.
    """
    aps = per_category_average_precision(scores, labels)
    kept = [a for a in aps if a is not None]
    skipped = len(aps) - len(kept)
    if skipped:
        log.warning("skipping %d categories with no positive labels", skipped)
    if not kept:
        raise UndefinedApError("every category column is empty")
    return 100.0 * (sum(kept) / len(kept))


def aggregate_runs(values) -> tuple[float, float]:
    """Mean and population standard deviation (n divisor) over run MAPs."""
    vals = [float(v) for v in values]
    if not vals:
        raise ValueError("no runs to aggregate")
    mean = sum(vals) / len(vals)
    var = sum((v - mean) ** 2 for v in vals) / len(vals)
    return mean, math.sqrt(var)


def _canonical_order(seen, preferred) -> tuple[str, ...]:
    known = [name for name in preferred if name in seen]
    extra = sorted(set(seen) - set(preferred))
    return tuple(known + extra)


@dataclass
class MapTable:
    """Per-(loss, bias) MAP cells as (mean, std); missing cells are None."""

    losses: tuple[str, ...]
    biases: tuple[str, ...]
    cells: dict[tuple[str, str], tuple[float, float] | None]

    @classmethod
    def from_runs(cls, runs) -> "MapTable":
        """Build from (loss, bias, map_value) triples, aggregating repeats."""
        grouped: dict[tuple[str, str], list[float]] = {}
        for loss, bias_name, value in runs:
            value = float(value)
            if not 0.0 <= value <= 100.0:
                raise ConfigError(f"MAP value {value} outside [0, 100] for ({loss}, {bias_name})")
            grouped.setdefault((loss, bias_name), []).append(value)
        losses = _canonical_order({k[0] for k in grouped}, LOSS_ORDER)
        biases = _canonical_order({k[1] for k in grouped}, BIAS_ORDER)
        cells = {}
        for loss in losses:
            for bias_name in biases:
                vals = grouped.get((loss, bias_name))
                cells[(loss, bias_name)] = aggregate_runs(vals) if vals else None
        return cls(losses=losses, biases=biases, cells=cells)

    def cell(self, loss: str, bias_name: str):
        return self.cells.get((loss, bias_name))


@dataclass
class DropReport:
    """Average MAP drop vs the uniform column, per bias and per loss."""

    per_bias: dict[str, float]
    per_loss: dict[str, float]


def drop_report(table: MapTable) -> DropReport:
    """Summarize bias sensitivity from a MAP table.

    The drop of a (loss, bias) cell is the loss's uniform mean minus the
    cell mean. Per-bias drops average over losses; per-loss drops average
    over the non-uniform biases. Cells missing either side are skipped.
    """
    if "uniform" not in table.biases:
        raise ConfigError("drop report requires a uniform bias column")
    others = [b for b in table.biases if b != "uniform"]
    if not others:
        raise ConfigError("drop report requires at least one non-uniform bias column")

    def cell_drop(loss: str, bias_name: str) -> float | None:
        base = table.cell(loss, "uniform")
        cell = table.cell(loss, bias_name)
        if base is None or cell is None:
            return None
        return base[0] - cell[0]

    per_bias: dict[str, float] = {}
    for bias_name in others:
        drops = [d for loss in table.losses if (d := cell_drop(loss, bias_name)) is not None]
        if drops:
            per_bias[bias_name] = sum(drops) / len(drops)
        else:
            log.warning("no computable drops for bias %s", bias_name)
    per_loss: dict[str, float] = {}
    for loss in table.losses:
        drops = [d for bias_name in others if (d := cell_drop(loss, bias_name)) is not None]
        if drops:
            per_loss[loss] = sum(drops) / len(drops)
        else:
            log.warning("no computable drops for loss %s", loss)
    return DropReport(per_bias=per_bias, per_loss=per_loss)


def render_markdown(table: MapTable, drops: DropReport | None = None) -> str:
    """Markdown table (losses as rows, biases as columns, mean ± std cells)."""
    lines = [
        "| loss | " + " | ".join(table.biases) + " |",
        "|" + "---|" * (len(table.biases) + 1),
    ]
    for loss in table.losses:
        cells = []
        for bias_name in table.biases:
            cell = table.cell(loss, bias_name)
            cells.append("—" if cell is None else f"{cell[0]:.1f} ± {cell[1]:.1f}")
        lines.append(f"| {loss} | " + " | ".join(cells) + " |")
    if drops is not None:
        lines.append("")
        lines.append("Average MAP drop vs uniform, per bias:")
        for bias_name, d in drops.per_bias.items():
            lines.append(f"- {bias_name}: {d:.1f}")
        lines.append("")
        lines.append("Average MAP drop vs uniform, per loss:")
        for loss, d in drops.per_loss.items():
            lines.append(f"- {loss}: {d:.1f}")
    return "\n".join(lines) + "\n"


def report_json(table: MapTable, drops: DropReport | None = None) -> bytes:
    """Canonical JSON rendering of the table and optional drop summary."""
    cells = {}
    for loss in table.losses:
        row = {}
        for bias_name in table.biases:
            cell = table.cell(loss, bias_name)
            row[bias_name] = None if cell is None else {"mean": cell[0], "std": cell[1]}
        cells[loss] = row
    doc = {"map": cells}
    if drops is not None:
        doc["drops"] = {"per_bias": drops.per_bias, "per_loss": drops.per_loss}
    return (json.dumps(doc, sort_keys=True, separators=(",", ":")) + "\n").encode()
