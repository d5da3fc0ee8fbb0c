"""Leaderboard ingestion, score harmonization and column standardization."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import (
    AlignmentError,
    DegenerateError,
    MissingDataError,
    ParseError,
    RangeError,
    ValidationError,
)

SCORE_MIN = 0.0
SCORE_MAX = 10.0

METRIC_RANGES = {
    "unit_fraction": (0.0, 1.0),
    "percent": (0.0, 100.0),
    "scale_0_10": (0.0, 10.0),
}


def _check_unique(ids, what):
    seen = set()
    for i in ids:
        if i in seen:
            raise ValidationError(f"duplicate {what} id {i!r}")
        seen.add(i)


@dataclass(frozen=True)
class PerformanceMatrix:
    """Models x tasks scores on the 0-10 scale; ``nan`` marks a missing cell."""

    model_ids: tuple[str, ...]
    task_ids: tuple[str, ...]
    scores: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "model_ids", tuple(self.model_ids))
        object.__setattr__(self, "task_ids", tuple(self.task_ids))
        scores = np.array(self.scores, dtype=float)
        scores.setflags(write=False)
        object.__setattr__(self, "scores", scores)
        if scores.shape != (len(self.model_ids), len(self.task_ids)):
            raise ValidationError(
                f"score matrix shape {scores.shape} does not match "
                f"{len(self.model_ids)} models x {len(self.task_ids)} tasks"
            )
        _check_unique(self.model_ids, "model")
        _check_unique(self.task_ids, "task")
        present = scores[~np.isnan(scores)]
        if present.size and (present.min() < SCORE_MIN or present.max() > SCORE_MAX):
            i, j = np.argwhere((scores < SCORE_MIN) | (scores > SCORE_MAX))[0]
            raise RangeError(
                f"score {scores[i, j]} for model {self.model_ids[i]!r}, "
                f"task {self.task_ids[j]!r} is outside [0, 10]"
            )

    @property
    def shape(self):
        return self.scores.shape

    @property
    def missing(self) -> np.ndarray:
        return np.isnan(self.scores)

    def column(self, task_id: str) -> np.ndarray:
        return self.scores[:, self.task_ids.index(task_id)]


@dataclass(frozen=True)
class StandardizedMatrix:
    """Column z-scores together with the statistics used to produce them."""

    model_ids: tuple[str, ...]
    task_ids: tuple[str, ...]
    z_scores: np.ndarray
    task_means: np.ndarray
    task_stds: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "model_ids", tuple(self.model_ids))
        object.__setattr__(self, "task_ids", tuple(self.task_ids))
        for name in ("z_scores", "task_means", "task_stds"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        m, b = self.z_scores.shape
        if m != len(self.model_ids) or b != len(self.task_ids):
            raise ValidationError("z-score matrix does not match id lists")
        if np.any(self.task_stds <= 0):
            raise ValidationError("task standard deviations must be positive")

    @property
    def n_models(self) -> int:
        return self.z_scores.shape[0]

    @property
    def n_tasks(self) -> int:
        return self.z_scores.shape[1]

    def destandardize(self, z=None) -> np.ndarray:
        """Map z-scores (default: the stored ones) back onto the score scale."""
        z = self.z_scores if z is None else np.asarray(z, dtype=float)
        return z * self.task_stds + self.task_means

    def transform(self, raw, task_ids: Sequence[str] | None = None) -> np.ndarray:
        """z-score new raw rows with the stored training statistics."""
        raw = np.asarray(raw, dtype=float)
        if task_ids is None:
            return (raw - self.task_means) / self.task_stds
        idx = self.task_index(task_ids)
        return (raw - self.task_means[idx]) / self.task_stds[idx]

    def task_index(self, task_ids: Sequence[str]) -> np.ndarray:
        lookup = {t: i for i, t in enumerate(self.task_ids)}
        missing = [t for t in task_ids if t not in lookup]
        if missing:
            raise AlignmentError(f"unknown task id(s): {', '.join(map(str, missing))}")
        return np.array([lookup[t] for t in task_ids], dtype=int)

    def subset(self, rows=None, cols=None) -> "StandardizedMatrix":
        """Re-standardize a row/column subset of the de-standardized scores."""
        rows = np.arange(self.n_models) if rows is None else np.asarray(rows)
        cols = np.arange(self.n_tasks) if cols is None else np.asarray(cols)
        raw = self.destandardize()[np.ix_(rows, cols)]
        return standardize_array(
            raw,
            [self.model_ids[i] for i in rows],
            [self.task_ids[j] for j in cols],
        )

    def with_column(self, task_id: str, values) -> "StandardizedMatrix":
        """Append a task column (given on the z scale of its own sample)."""
        values = np.asarray(values, dtype=float).reshape(-1)
        if values.shape[0] != self.n_models:
            raise ValidationError(
                f"candidate column has {values.shape[0]} rows, expected {self.n_models}"
            )
        raw = np.column_stack([self.destandardize(), values])
        return standardize_array(raw, self.model_ids, self.task_ids + (task_id,))


@dataclass(frozen=True)
class CorrelationMatrix:
    r: np.ndarray
    task_ids: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "task_ids", tuple(self.task_ids))
        r = np.array(self.r, dtype=float)
        r.setflags(write=False)
        object.__setattr__(self, "r", r)
        if r.ndim != 2 or r.shape[0] != r.shape[1] or r.shape[0] != len(self.task_ids):
            raise ValidationError("correlation matrix must be square and match task ids")

    @property
    def n_tasks(self) -> int:
        return self.r.shape[0]

    def submatrix(self, cols) -> "CorrelationMatrix":
        cols = np.asarray(cols)
        return CorrelationMatrix(self.r[np.ix_(cols, cols)], [self.task_ids[j] for j in cols])


def normalize_scores(raw, metric_kind: str):
    """Linearly map a raw metric value (or array) onto the 0-10 scale."""
    try:
        lo, hi = METRIC_RANGES[metric_kind]
    except KeyError:
        raise ValidationError(
            f"unknown metric kind {metric_kind!r}; expected one of {sorted(METRIC_RANGES)}"
        ) from None
    arr = np.asarray(raw, dtype=float)
    present = arr[~np.isnan(arr)]
    if present.size and (present.min() < lo or present.max() > hi):
        raise RangeError(f"value outside the {metric_kind} range [{lo:g}, {hi:g}]")
    out = (arr - lo) * (SCORE_MAX - SCORE_MIN) / (hi - lo) + SCORE_MIN
    return float(out) if out.ndim == 0 else out


def _parse_cell(text, row, col, path):
    text = text.strip()
    if text == "":
        return math.nan
    try:
        value = float(text)
    except ValueError:
        raise ParseError(f"cannot parse {text!r} as a number", row=row, column=col, path=path)
    if not math.isfinite(value):
        raise ParseError(f"non-finite value {text!r}", row=row, column=col, path=path)
    return value


def _read_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    rows = [r for r in rows if any(c.strip() for c in r)]
    if not rows:
        raise ParseError("empty file", path=path)
    header = [c.strip() for c in rows[0]]
    if len(header) < 2:
        raise ParseError("header must name at least one task", row=1, path=path)
    task_ids = header[1:]
    if any(t == "" for t in task_ids):
        raise ParseError("empty task id in header", row=1, path=path)
    model_ids, scores = [], []
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise ParseError(
                f"expected {len(header)} fields, found {len(row)}", row=lineno, path=path
            )
        model = row[0].strip()
        if not model:
            raise ParseError("empty model id", row=lineno, column=1, path=path)
        model_ids.append(model)
        scores.append([_parse_cell(c, lineno, j + 2, path) for j, c in enumerate(row[1:])])
    if not model_ids:
        raise ParseError("no model rows", path=path)
    return model_ids, task_ids, np.array(scores, dtype=float)


def _read_json(path):
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, row=exc.lineno, column=exc.colno, path=path) from None
    try:
        task_ids = [str(t) for t in doc["task_ids"]]
        model_ids = [str(m) for m in doc["model_ids"]]
        raw = doc["scores"]
    except (KeyError, TypeError):
        raise ParseError("expected keys 'model_ids', 'task_ids', 'scores'", path=path) from None
    if len(raw) != len(model_ids):
        raise ParseError(f"{len(raw)} score rows for {len(model_ids)} models", path=path)
    scores = np.full((len(model_ids), len(task_ids)), np.nan)
    for i, row in enumerate(raw):
        if len(row) != len(task_ids):
            raise ParseError(
                f"expected {len(task_ids)} scores, found {len(row)}", row=i + 1, path=path
            )
        for j, v in enumerate(row):
            if v is None:
                continue
            if not isinstance(v, (int, float)) or isinstance(v, bool) or not math.isfinite(v):
                raise ParseError(f"invalid score {v!r}", row=i + 1, column=j + 1, path=path)
            scores[i, j] = float(v)
    return model_ids, task_ids, scores


def load_leaderboard(path, format: str | None = None, metric_kinds=None) -> PerformanceMatrix:
    """Read a models x tasks score table.

    Parameters
    ----------
    path : path-like
        CSV (first row task ids, first column model ids, empty cell = missing)
        or the JSON mirror ``{"model_ids": [...], "task_ids": [...],
        "scores": [[...]]}`` with ``null`` for missing cells.
    format : {"csv", "json"}, optional
        Inferred from the file suffix when omitted.
    metric_kinds : dict, optional
        Per-task metric kind; listed columns are mapped onto 0-10 with
        :func:`normalize_scores` before validation.
    """
    path = Path(path)
    if format is None:
        format = "json" if path.suffix.lower() == ".json" else "csv"
    if format == "csv":
        model_ids, task_ids, scores = _read_csv(path)
    elif format == "json":
        model_ids, task_ids, scores = _read_json(path)
    else:
        raise ValidationError(f"unsupported format {format!r}")
    _check_unique(task_ids, "task")
    _check_unique(model_ids, "model")
    if metric_kinds:
        for task, kind in metric_kinds.items():
            if task not in task_ids:
                raise ValidationError(f"metric kind given for unknown task {task!r}")
            j = task_ids.index(task)
            scores[:, j] = normalize_scores(scores[:, j], kind)
    return PerformanceMatrix(model_ids, task_ids, scores)


def write_leaderboard(pm: PerformanceMatrix, path, format: str | None = None):
    path = Path(path)
    if format is None:
        format = "json" if path.suffix.lower() == ".json" else "csv"
    if format == "json":
        doc = {
            "model_ids": list(pm.model_ids),
            "task_ids": list(pm.task_ids),
            "scores": [[None if np.isnan(v) else float(v) for v in row] for row in pm.scores],
        }
        path.write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
        return
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["model", *pm.task_ids])
        for model, row in zip(pm.model_ids, pm.scores):
            w.writerow([model, *("" if np.isnan(v) else repr(float(v)) for v in row)])


def standardize_array(raw, model_ids, task_ids) -> StandardizedMatrix:
    raw = np.asarray(raw, dtype=float)
    means = raw.mean(axis=0)
    stds = raw.std(axis=0, ddof=1) if raw.shape[0] > 1 else np.zeros(raw.shape[1])
    for j, s in enumerate(stds):
        # relative test so that tiny float jitter around a constant still counts
        if not s > 1e-12 * max(1.0, abs(means[j])):
            raise DegenerateError(f"task {task_ids[j]!r} has a constant column")
    return StandardizedMatrix(model_ids, task_ids, (raw - means) / stds, means, stds)


def standardize(pm: PerformanceMatrix, missing_policy: str = "error") -> StandardizedMatrix:
    """Column z-scores with sample standard deviations (divisor M - 1)."""
    raw = np.array(pm.scores, dtype=float)
    miss = np.isnan(raw)
    if miss.any():
        if missing_policy == "error":
            i, j = np.argwhere(miss)[0]
            raise MissingDataError(
                f"{int(miss.sum())} missing cell(s); first at model "
                f"{pm.model_ids[i]!r}, task {pm.task_ids[j]!r}"
            )
        if missing_policy != "mean_impute":
            raise ValidationError(f"unknown missing policy {missing_policy!r}")
        for j in range(raw.shape[1]):
            col = raw[:, j]
            if miss[:, j].all():
                raise MissingDataError(f"task {pm.task_ids[j]!r} has no observed scores")
            col[miss[:, j]] = col[~miss[:, j]].mean()
    return standardize_array(raw, pm.model_ids, pm.task_ids)


def correlation_matrix(sm: StandardizedMatrix) -> CorrelationMatrix:
    """Pearson correlations between task columns, ``Z'Z / (M - 1)``."""
    m = sm.n_models
    if m < 3:
        raise ValidationError(f"need at least 3 models, got {m}")
    z = sm.z_scores
    r = z.T @ z / (m - 1)
    r = 0.5 * (r + r.T)
    np.clip(r, -1.0, 1.0, out=r)
    np.fill_diagonal(r, 1.0)
    return CorrelationMatrix(r, sm.task_ids)
