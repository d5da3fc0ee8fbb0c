"""Reliability, uniqueness, outlier and ranking diagnostics."""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import stats

from ._linalg import RCOND_LIMIT
from .data import CorrelationMatrix, StandardizedMatrix
from .errors import ConditioningError, DegenerateError, ReliabilityError, ValidationError
from .paf import FactorModel, fit_paf, loading_zscores
from .scores import SkillScores

log = logging.getLogger(__name__)

UNIQUENESS_THRESHOLD = 0.40


@dataclass
class UniquenessReport:
    task_ids: list[str]
    uniqueness: list[float]
    flagged: list[bool]
    threshold: float = UNIQUENESS_THRESHOLD

    @property
    def max_task(self) -> tuple[str, float]:
        j = int(np.argmax(self.uniqueness))
        return self.task_ids[j], self.uniqueness[j]

    def table(self) -> str:
        width = max(len(t) for t in self.task_ids)
        lines = [f"{'task':<{width}}  u^2    flag"]
        for t, u, f in zip(self.task_ids, self.uniqueness, self.flagged):
            lines.append(f"{t:<{width}}  {u:.3f}  {'*' if f else ''}")
        return "\n".join(lines)


def uniqueness_report(fm: FactorModel, threshold: float = UNIQUENESS_THRESHOLD) -> UniquenessReport:
    u = 1.0 - fm.communalities
    return UniquenessReport(
        list(fm.task_ids), [float(v) for v in u], [bool(v > threshold) for v in u], threshold
    )


def _as_items(items):
    x = np.asarray(items, dtype=float)
    if x.ndim != 2:
        raise ValidationError("items must be a models x items matrix")
    return x


def cronbach_alpha(items) -> float:
    """``k/(k-1) * (1 - sum(item variances) / variance(total))``."""
    x = _as_items(items)
    k = x.shape[1]
    if k < 2:
        raise ValidationError("alpha needs at least 2 items")
    var = x.var(axis=0, ddof=1)
    if np.any(var <= 0):
        raise DegenerateError(f"item {int(np.argmin(var))} is constant")
    total = x.sum(axis=1).var(ddof=1)
    return float(k / (k - 1) * (1.0 - var.sum() / total))


def omega_from_loadings(loadings, uniqueness) -> float:
    s = float(np.sum(loadings)) ** 2
    denom = s + float(np.sum(uniqueness))
    return s / denom if denom > 0 else 0.0


def mcdonald_omega(items) -> float:
    """Total omega from a one-factor principal axis fit on the items'
    correlation matrix."""
    x = _as_items(items)
    k = x.shape[1]
    if k < 3:
        raise ValidationError("omega needs at least 3 items")
    sd = x.std(axis=0, ddof=1)
    if np.any(sd <= 0):
        raise DegenerateError(f"item {int(np.argmin(sd))} is constant")
    r = np.corrcoef(x, rowvar=False)
    fm = fit_paf(CorrelationMatrix(r, [str(j) for j in range(k)]), 1, tol=1e-8, max_iter=2000)
    if not fm.converged:
        raise ReliabilityError("one-factor fit for omega did not converge")
    lam = fm.loadings[:, 0]
    return omega_from_loadings(lam, 1.0 - lam**2)


@dataclass
class ReliabilityReport:
    items: list[list[str]]
    alpha: float
    omega: float
    per_factor: list[dict]
    z_threshold: float
    min_items: int
    warnings: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self, **kwargs) -> str:
        kwargs.setdefault("indent", 2)
        return json.dumps(self.to_dict(), **kwargs)

    def table(self) -> str:
        lines = [f"{'factor':<8} {'items':>5} {'alpha':>7} {'omega':>7}  tasks"]
        for row in self.per_factor:
            lines.append(
                f"{row['factor']:<8} {len(row['items']):>5} {row['alpha']:>7.3f} "
                f"{row['omega']:>7.3f}  {', '.join(row['items'])}"
            )
        n = len({t for s in self.items for t in s})
        lines.append(f"{'pooled':<8} {n:>5} {self.alpha:>7.3f} {self.omega:>7.3f}")
        lines.extend(f"warning: {w}" for w in self.warnings)
        return "\n".join(lines)


def select_items(loadings_col, z_col, z_threshold, min_items):
    """Indices of tasks whose loading z-score exceeds the threshold, topped
    up to ``min_items`` by absolute loading."""
    chosen = [int(j) for j in np.flatnonzero(z_col > z_threshold)]
    if len(chosen) < min_items:
        for j in np.argsort(-np.abs(loadings_col), kind="stable"):
            if int(j) not in chosen:
                chosen.append(int(j))
            if len(chosen) == min_items:
                break
    return sorted(chosen)


def reliability_report(
    fm: FactorModel,
    z: StandardizedMatrix,
    z_threshold: float = 0.8,
    min_items: int = 4,
) -> ReliabilityReport:
    """Cronbach's alpha and McDonald's omega over high-loading task sets.

    Items loading negatively on their factor are reverse-keyed. Each
    factor's set is scored on its own and the union of all sets is scored
    as one pooled scale.
    """
    if tuple(z.task_ids) != fm.task_ids:
        raise ValidationError("task ids of the model and the z-score matrix differ")
    lz = loading_zscores(fm.loadings)
    per_factor, sets, notes = [], [], []
    orient = {}
    for c in range(fm.n_factors):
        if fm.n_tasks < min_items:
            notes.append(f"factor {c + 1} skipped: only {fm.n_tasks} tasks available")
            log.warning(notes[-1])
            continue
        idx = select_items(fm.loadings[:, c], lz[:, c], z_threshold, min_items)
        signs = np.sign(fm.loadings[idx, c])
        signs[signs == 0] = 1.0
        for j, s in zip(idx, signs):
            orient.setdefault(j, s)
        x = z.z_scores[:, idx] * signs
        names = [fm.task_ids[j] for j in idx]
        sets.append(names)
        per_factor.append(
            {"factor": c + 1, "items": names, "alpha": cronbach_alpha(x), "omega": mcdonald_omega(x)}
        )
    if not per_factor:
        raise ReliabilityError("no factor has enough tasks for a reliability estimate")
    pooled = sorted(orient)
    x = z.z_scores[:, pooled] * np.array([orient[j] for j in pooled])
    return ReliabilityReport(
        items=sets,
        alpha=cronbach_alpha(x),
        omega=mcdonald_omega(x),
        per_factor=per_factor,
        z_threshold=z_threshold,
        min_items=min_items,
        warnings=notes,
    )


def shrinkage_intensity(points) -> float:
    """Analytic shrinkage weight toward the diagonal of the covariance
    (unequal-variance diagonal target, computed on standardized data)."""
    x = np.asarray(points, dtype=float)
    n, d = x.shape
    if n < 3:
        raise ValidationError("shrinkage needs at least 3 points")
    sd = x.std(axis=0, ddof=1)
    if np.any(sd <= 0):
        raise DegenerateError("a coordinate is constant")
    xs = (x - x.mean(axis=0)) / sd
    w = xs[:, :, None] * xs[:, None, :]
    wbar = w.mean(axis=0)
    var_r = n / (n - 1) ** 3 * ((w - wbar) ** 2).sum(axis=0)
    r = wbar * n / (n - 1)
    off = ~np.eye(d, dtype=bool)
    denom = (r[off] ** 2).sum()
    if denom == 0:
        return 1.0
    return float(np.clip(var_r[off].sum() / denom, 0.0, 1.0))


def shrunk_covariance(points, shrinkage):
    x = np.asarray(points, dtype=float)
    cov = np.atleast_2d(np.cov(x, rowvar=False, ddof=1))
    if shrinkage is None or shrinkage == 0:
        return cov, 0.0
    s = shrinkage_intensity(x) if shrinkage == "auto" else float(shrinkage)
    if not 0 <= s <= 1:
        raise ValidationError("shrinkage must lie in [0, 1]")
    out = (1 - s) * cov
    out[np.diag_indices_from(out)] = np.diag(cov)
    return out, s


def mahalanobis_distances(points, mean, cov) -> np.ndarray:
    points = np.atleast_2d(np.asarray(points, dtype=float))
    cov = np.atleast_2d(np.asarray(cov, dtype=float))
    diff = points - np.asarray(mean, dtype=float)
    w, v = np.linalg.eigh(0.5 * (cov + cov.T))
    if w.min() <= RCOND_LIMIT * max(w.max(), 1e-300):
        raise ConditioningError("covariance matrix is singular; enable shrinkage")
    proj = diff @ v / np.sqrt(w)
    return np.sqrt((proj**2).sum(axis=1))


@dataclass
class OutlierReport:
    ids: list[str]
    distances: list[float]
    flagged: list[bool]
    threshold: float
    quantile: float
    dof: int
    shrinkage: float
    space: str = "task"

    def to_dict(self) -> dict:
        return asdict(self)


def mahalanobis_outliers(
    points,
    quantile: float = 0.995,
    shrinkage=None,
    leave_one_out: bool = False,
    reference=None,
    ids=None,
    space: str = "task",
) -> OutlierReport:
    """Flag points whose squared distance exceeds the chi-square quantile.

    Distances are measured against the mean and covariance of
    ``reference`` when given; otherwise against the points themselves,
    or against all *other* points with ``leave_one_out``. ``shrinkage`` is
    ``None``, ``"auto"`` or a weight in [0, 1] toward the diagonal.
    """
    x = np.atleast_2d(np.asarray(points, dtype=float))
    n, d = x.shape
    if not 0 < quantile < 1:
        raise ValidationError("quantile must lie in (0, 1)")
    ids = [str(i) for i in range(n)] if ids is None else list(ids)
    if reference is not None:
        ref = np.atleast_2d(np.asarray(reference, dtype=float))
        cov, s = shrunk_covariance(ref, shrinkage)
        dist = mahalanobis_distances(x, ref.mean(axis=0), cov)
    elif leave_one_out:
        dist = np.empty(n)
        s_vals = []
        for i in range(n):
            rest = np.delete(x, i, axis=0)
            cov, s = shrunk_covariance(rest, shrinkage)
            s_vals.append(s)
            dist[i] = mahalanobis_distances(x[i], rest.mean(axis=0), cov)[0]
        s = float(np.mean(s_vals))
    else:
        cov, s = shrunk_covariance(x, shrinkage)
        dist = mahalanobis_distances(x, x.mean(axis=0), cov)
    thr = float(stats.chi2.ppf(quantile, d))
    return OutlierReport(
        ids, [float(v) for v in dist], [bool(v**2 > thr) for v in dist], thr, quantile, d, s, space
    )


def spearman_rho(x, y) -> float:
    """Pearson correlation of average ranks."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValidationError("inputs must be vectors of equal length")
    if x.size < 3:
        raise ValidationError("need at least 3 observations")
    rx, ry = stats.rankdata(x), stats.rankdata(y)
    if np.ptp(rx) == 0 or np.ptp(ry) == 0:
        raise DegenerateError("ranks are undefined for a constant vector")
    rx -= rx.mean()
    ry -= ry.mean()
    return float(np.clip(rx @ ry / math.sqrt((rx @ rx) * (ry @ ry)), -1.0, 1.0))


def spearman_pvalue_normal(rho: float, n: int) -> float:
    """Two-sided p-value from the normal approximation ``rho * sqrt(n - 1)``;
    informational only."""
    return float(2.0 * stats.norm.sf(abs(rho) * math.sqrt(n - 1)))


def rank_agreement(theta: SkillScores, external: dict) -> dict:
    """Spearman correlation of mean skill score (and of each skill) against
    an external scalar rating for the models present in both."""
    shared = [m for m in theta.model_ids if m in external]
    if len(shared) < 3:
        raise ValidationError(f"only {len(shared)} models shared with the external ranking")
    t = theta.theta[theta.rows(shared)]
    ext = np.array([float(external[m]) for m in shared])
    rho = spearman_rho(t.mean(axis=1), ext)
    return {
        "n": len(shared),
        "models": shared,
        "rho": rho,
        "p_normal_approx": spearman_pvalue_normal(rho, len(shared)),
        "per_factor": [spearman_rho(t[:, c], ext) for c in range(t.shape[1])],
    }


@dataclass
class Projection2D:
    model_ids: list[str]
    coords: np.ndarray
    explained_ratio: np.ndarray

    def write_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["model", "pc1", "pc2"])
            for m, (a, b) in zip(self.model_ids, self.coords):
                w.writerow([m, f"{a:.10g}", f"{b:.10g}"])


def pca_project_2d(theta: SkillScores) -> Projection2D:
    """Coordinates on the top two principal axes of the centered skills.

    Each axis is signed so that its largest-magnitude loading is positive.
    """
    t = theta.theta
    if t.shape[1] < 2:
        raise ValidationError("need at least 2 skills for a 2-D projection")
    centered = t - t.mean(axis=0)
    cov = np.atleast_2d(np.cov(centered, rowvar=False, ddof=1))
    w, v = np.linalg.eigh(cov)
    order = np.argsort(-w, kind="stable")
    w, v = w[order], v[:, order]
    axes = v[:, :2]
    idx = np.argmax(np.abs(axes), axis=0)
    axes = axes * np.where(axes[idx, [0, 1]] < 0, -1.0, 1.0)
    total = w.sum()
    ratio = w[:2] / total if total > 0 else np.zeros(2)
    return Projection2D(list(theta.model_ids), centered @ axes, ratio)


def skill_variability(theta: SkillScores) -> np.ndarray:
    """Sample std of each model's skill scores across factors."""
    if theta.theta.shape[1] < 2:
        raise ValidationError("need at least 2 skills")
    return theta.theta.std(axis=1, ddof=1)
