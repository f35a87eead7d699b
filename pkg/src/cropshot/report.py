"""Figure-ready CSV reports.

All writers share the same conventions so outputs are byte-identical for
identical inputs: a leading comment block of '#'-prefixed lines carrying
the effective configuration as canonical JSON (sorted keys), a fixed
header row, '\n' line endings, and floats rendered with repr (shortest
round-trip form). Two reports are comparable iff their metadata lines
match.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

from cropshot.errors import ValidationError

RUN_HEADER = ("dataset", "setting", "method", "n_labeled", "seed", "accuracy")
AUDIT_HEADER = ("image_id", "full_confidence", "provenance", "label", "correct")
CURVE_HEADER = ("lambda", "variance", "centroid_distance")
SCATTER_HEADER = ("x", "y", "class", "cropped_flag")

# One-sided 97.5% normal quantile, for 95% two-sided intervals.
Z_95 = 1.959963984540054

AGGREGATE_SEEDS = ("mean", "ci95")


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


@dataclass(frozen=True)
class RunRow:
    dataset: str
    setting: str
    method: str
    n_labeled: int
    seed: str        # run seed as text, or "mean" / "ci95" for aggregates
    accuracy: float

    def astuple(self) -> tuple:
        return (
            self.dataset,
            self.setting,
            self.method,
            self.n_labeled,
            self.seed,
            self.accuracy,
        )


@dataclass
class RunReport:
    metadata: dict
    rows: list[RunRow] = field(default_factory=list)

    def per_run_rows(self) -> list[RunRow]:
        return [r for r in self.rows if r.seed not in AGGREGATE_SEEDS]

    def aggregate_rows(self) -> list[RunRow]:
        return [r for r in self.rows if r.seed in AGGREGATE_SEEDS]

    def accuracies(self, method: str, n_labeled: int | None = None) -> list[float]:
        """Per-run accuracies for one method, in row order."""
        return [
            r.accuracy
            for r in self.per_run_rows()
            if r.method == method and (n_labeled is None or r.n_labeled == n_labeled)
        ]

    def mean_accuracy(self, method: str, n_labeled: int | None = None) -> float:
        values = self.accuracies(method, n_labeled)
        if not values:
            raise ValidationError(f"no rows for method {method!r}")
        return sum(values) / len(values)


def mean_ci95(values) -> tuple[float, float]:
    """Mean and 95% half-width under the normal approximation over runs."""
    values = [float(v) for v in values]
    if not values:
        raise ValidationError("cannot aggregate an empty list")
    n = len(values)
    mean = sum(values) / n
    if n == 1:
        return mean, 0.0
    var = sum((v - mean) ** 2 for v in values) / (n - 1)
    return mean, Z_95 * math.sqrt(var / n)


def append_aggregates(report: RunReport) -> None:
    """Add one mean and one ci95 row per (dataset, setting, method, n_labeled).

    Group order follows first appearance so output is deterministic.
    """
    groups: dict[tuple, list[float]] = {}
    for row in report.per_run_rows():
        key = (row.dataset, row.setting, row.method, row.n_labeled)
        groups.setdefault(key, []).append(row.accuracy)
    for (dataset, setting, method, n_labeled), values in groups.items():
        mean, half = mean_ci95(values)
        report.rows.append(RunRow(dataset, setting, method, n_labeled, "mean", mean))
        report.rows.append(RunRow(dataset, setting, method, n_labeled, "ci95", half))


def _metadata_lines(metadata: dict) -> list[str]:
    return ["# " + json.dumps(metadata, sort_keys=True, separators=(", ", ": "))]


def _write_csv(path, metadata: dict, header, rows) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        for line in _metadata_lines(metadata):
            fh.write(line + "\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def write_run_report(report: RunReport, path) -> None:
    _write_csv(path, report.metadata, RUN_HEADER, (r.astuple() for r in report.rows))


def write_fusion_audit(entries, metadata: dict, path) -> None:
    """entries: iterables of (image_id, full_confidence, provenance, label, correct)."""
    rows = (
        (image_id, float(conf), provenance, label, int(bool(correct)))
        for image_id, conf, provenance, label, correct in entries
    )
    _write_csv(path, metadata, AUDIT_HEADER, rows)


def write_variance_curve(fractions, variances, distances, metadata: dict, path) -> None:
    if not (len(fractions) == len(variances) == len(distances)):
        raise ValidationError("variance-curve columns differ in length")
    rows = (
        (float(f), float(v), float(d))
        for f, v, d in zip(fractions, variances, distances)
    )
    _write_csv(path, metadata, CURVE_HEADER, rows)


def write_scatter(points, metadata: dict, path) -> None:
    """points: iterables of (x, y, class_label, cropped_flag)."""
    rows = ((float(x), float(y), label, int(flag)) for x, y, label, flag in points)
    _write_csv(path, metadata, SCATTER_HEADER, rows)


def read_csv_report(path) -> tuple[dict, list[dict]]:
    """Parse any report written here: (metadata, rows as string dicts)."""
    metadata: dict = {}
    lines: list[str] = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.startswith("#"):
                metadata.update(json.loads(line[1:]))
            else:
                lines.append(line)
    reader = csv.DictReader(lines)
    return metadata, list(reader)
