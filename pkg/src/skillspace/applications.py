"""Profiling a new model from a few tasks, and choosing models for a new
task from a few sampled models."""

from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import kernels
from .data import StandardizedMatrix, correlation_matrix
from .diagnostics import mahalanobis_outliers
from .errors import AlignmentError, DegenerateError, UnderdeterminedError, ValidationError
from .paf import DEFAULT_MAX_ITER, DEFAULT_TOL, FactorModel, fit_paf, rotate_orthomax
from .scores import SkillScores, project_model, project_task, regression_weights, score_models

log = logging.getLogger(__name__)


def default_k(n_factors: int) -> int:
    return math.ceil(1.5 * n_factors)


def select_diverse_tasks(fm: FactorModel, k: int | None = None) -> list[str]:
    """The ``k`` tasks with the highest communality; ties keep task order."""
    k = default_k(fm.n_factors) if k is None else k
    if not 1 <= k <= fm.n_tasks:
        raise ValidationError(f"k must lie in [1, {fm.n_tasks}], got {k}")
    order = np.argsort(-fm.communalities, kind="stable")[:k]
    return [fm.task_ids[j] for j in order]


def _fit_skills(fm: FactorModel, task_ids, zk):
    idx = [fm.task_ids.index(t) for t in task_ids]
    lam_k = fm.loadings[idx]
    if len(idx) < fm.n_factors:
        raise UnderdeterminedError(f"{len(idx)} tasks cannot determine {fm.n_factors} skills")
    theta_hat = project_model(lam_k, zk) if zk.ndim == 1 else np.linalg.lstsq(lam_k, zk.T, rcond=None)[0].T
    return lam_k, theta_hat


def training_mse_band(fm: FactorModel, z: StandardizedMatrix, task_ids) -> tuple[float, float, np.ndarray]:
    """Reconstruction MSE of every training model profiled from ``task_ids``
    and the mean and sample std of those errors."""
    cols = z.task_index(task_ids)
    zk = z.z_scores[:, cols]
    lam_k, theta_hat = _fit_skills(fm, task_ids, zk)
    mse = ((zk - theta_hat @ lam_k.T) ** 2).mean(axis=1)
    return float(mse.mean()), float(mse.std(ddof=1)), mse


@dataclass
class SkillProfile:
    model_id: str
    task_ids: list[str]
    theta_hat: list[float]
    reconstructed_z: dict
    reconstructed_scores: dict
    mse: float
    band: tuple[float, float]
    mahalanobis: float
    mahalanobis_threshold: float
    flagged_mse: bool
    flagged_mahalanobis: bool

    @property
    def flagged(self) -> bool:
        return self.flagged_mse or self.flagged_mahalanobis

    def to_dict(self) -> dict:
        out = asdict(self)
        out["band"] = {"mean": self.band[0], "std": self.band[1]}
        out["flagged"] = self.flagged
        return out

    def to_json(self, **kwargs) -> str:
        kwargs.setdefault("indent", 2)
        return json.dumps(self.to_dict(), **kwargs)

    def table(self) -> str:
        width = max(len(t) for t in self.reconstructed_scores)
        lines = [f"model {self.model_id}: mse={self.mse:.4f} band={self.band[0]:.4f}+{self.band[1]:.4f}"
                 f" flagged={'yes' if self.flagged else 'no'}"]
        lines.append("skills: " + " ".join(f"{v:+.3f}" for v in self.theta_hat))
        for t, v in self.reconstructed_scores.items():
            mark = "*" if t in self.task_ids else ""
            lines.append(f"{t:<{width}}  {v:6.3f} {mark}")
        return "\n".join(lines)


def profile_new_model(
    fm: FactorModel,
    task_ids,
    p_k,
    z: StandardizedMatrix,
    model_id: str = "new-model",
    quantile: float = 0.995,
    shrinkage=None,
    band: tuple[float, float] | None = None,
) -> SkillProfile:
    """Estimate a model's skills from raw scores on ``k`` training tasks.

    ``p_k`` is on the 0-10 scale and is z-scored with the training means
    and stds held by ``z``. The profile is flagged when its reconstruction
    MSE exceeds mean + std of the training models' errors on the same
    tasks, or when its observed scores are a Mahalanobis outlier against
    the training models on those tasks.
    """
    task_ids = list(task_ids)
    if tuple(z.task_ids) != fm.task_ids:
        raise AlignmentError("task ids of the model and the training matrix differ")
    unknown = [t for t in task_ids if t not in fm.task_ids]
    if unknown:
        raise AlignmentError(f"unknown task id(s): {', '.join(unknown)}")
    p_k = np.asarray(p_k, dtype=float)
    if p_k.shape != (len(task_ids),):
        raise ValidationError(f"got {p_k.size} scores for {len(task_ids)} tasks")
    zk = z.transform(p_k, task_ids)
    lam_k, theta_hat = _fit_skills(fm, task_ids, zk)
    mse = float(np.mean((zk - lam_k @ theta_hat) ** 2))
    if band is None:
        mu, sd, _ = training_mse_band(fm, z, task_ids)
    else:
        mu, sd = band
    full_z = fm.loadings @ theta_hat
    ref = z.z_scores[:, z.task_index(task_ids)]
    out = mahalanobis_outliers(zk[None, :], quantile=quantile, shrinkage=shrinkage, reference=ref, ids=[model_id])
    return SkillProfile(
        model_id=model_id,
        task_ids=task_ids,
        theta_hat=[float(v) for v in theta_hat],
        reconstructed_z={t: float(v) for t, v in zip(fm.task_ids, full_z)},
        reconstructed_scores={t: float(v) for t, v in zip(fm.task_ids, z.destandardize(full_z))},
        mse=mse,
        band=(mu, sd),
        mahalanobis=out.distances[0],
        mahalanobis_threshold=out.threshold,
        flagged_mse=bool(mse > mu + sd),
        flagged_mahalanobis=out.flagged[0],
    )


def maxmin_sample_models(theta: SkillScores, k: int | None = None, backend=None) -> list[str]:
    """Greedy max-min diverse subset of models in skill space.

    Starts from the model farthest from the centroid, then repeatedly adds
    the model whose nearest chosen model is farthest away. Ties go to the
    model listed first.
    """
    m = len(theta.model_ids)
    k = default_k(theta.factor_count) if k is None else k
    if not 1 <= k <= m:
        raise ValidationError(f"k must lie in [1, {m}], got {k}")
    pts = np.ascontiguousarray(theta.theta, dtype=float)
    d0 = ((pts - pts.mean(axis=0)) ** 2).sum(axis=1)
    start = int(np.flatnonzero(d0 == d0.max())[0])
    order = kernels.maxmin_order(pts, start, k, backend=backend)
    return [theta.model_ids[i] for i in order]


@dataclass
class SelectionResult:
    lambda_hat: list[float]
    sampled_ids: list[str]
    predictions: dict
    ranking: list[str]
    standardization: dict
    warnings: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self, **kwargs) -> str:
        kwargs.setdefault("indent", 2)
        return json.dumps(self.to_dict(), **kwargs)

    def table(self) -> str:
        width = max([len(m) for m in self.ranking] + [5])
        lines = [f"{'rank':>4}  {'model':<{width}}  predicted"]
        for i, m in enumerate(self.ranking, 1):
            lines.append(f"{i:>4}  {m:<{width}}  {self.predictions[m]:+.4f}")
        lines.extend(f"warning: {w}" for w in self.warnings)
        return "\n".join(lines)


def standardize_sample(phi_k) -> tuple[np.ndarray, float, float]:
    phi_k = np.asarray(phi_k, dtype=float)
    if phi_k.ndim != 1 or phi_k.size < 2:
        raise ValidationError("need a vector of at least 2 scores")
    mu, sd = float(phi_k.mean()), float(phi_k.std(ddof=1))
    if not sd > 1e-12 * max(1.0, float(np.abs(phi_k).max())):
        raise DegenerateError("new-task scores are constant over the sampled models")
    return (phi_k - mu) / sd, mu, sd


def predict_for_new_task(theta: SkillScores, sampled_ids, phi_k) -> SelectionResult:
    """Fit the new task's loadings on the sampled models and rank the rest.

    ``phi_k`` holds raw scores for ``sampled_ids``; they are z-scored with
    their own mean and sample std. Predictions are on that scale.
    """
    sampled_ids = list(sampled_ids)
    if len(set(sampled_ids)) != len(sampled_ids):
        raise ValidationError("sampled model ids must be unique")
    phi_k = np.asarray(phi_k, dtype=float)
    if phi_k.shape != (len(sampled_ids),):
        raise ValidationError(f"got {phi_k.size} scores for {len(sampled_ids)} sampled models")
    if len(sampled_ids) < theta.factor_count:
        raise UnderdeterminedError(f"{len(sampled_ids)} models cannot determine {theta.factor_count} loadings")
    zk, mu, sd = standardize_sample(phi_k)
    rows = theta.rows(sampled_ids)
    lam = project_task(theta.theta[rows], zk)
    chosen = set(sampled_ids)
    rest = [m for m in theta.model_ids if m not in chosen]
    pred = theta.theta[theta.rows(rest)] @ lam if rest else np.zeros(0)
    notes = []
    if np.linalg.norm(lam) < 1e-12:
        notes.append("estimated loadings are zero; ranking falls back to model order")
        log.warning(notes[-1])
        pred = np.zeros(len(rest))
        ranking = list(rest)
    else:
        ranking = [rest[i] for i in np.argsort(-pred, kind="stable")]
    return SelectionResult(
        lambda_hat=[float(v) for v in lam],
        sampled_ids=sampled_ids,
        predictions={m: float(v) for m, v in zip(rest, pred)},
        ranking=ranking,
        standardization={"mean": mu, "std": sd, "source": "sampled models"},
        warnings=notes,
    )


def evaluate_selection(
    z: StandardizedMatrix,
    n_factors: int,
    k: int | None = None,
    gamma: float = 1.0,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> dict:
    """Leave-one-task-out check of new-task prediction.

    Each task in turn is treated as unseen: the model is refit on the other
    tasks, ``k`` models are drawn by max-min sampling, and the remaining
    models' predicted scores are compared with their actual scores
    (both expressed on the sampled models' scale).
    """
    k = default_k(n_factors) if k is None else k
    per_task = []
    for j, task in enumerate(z.task_ids):
        keep = [i for i in range(z.n_tasks) if i != j]
        zt = z.subset(cols=keep)
        r = correlation_matrix(zt)
        fm = rotate_orthomax(fit_paf(r, n_factors, tol=tol, max_iter=max_iter), gamma)
        theta = score_models(regression_weights(fm, r), zt)
        sampled = maxmin_sample_models(theta, k)
        actual = z.z_scores[:, j]
        rows = theta.rows(sampled)
        res = predict_for_new_task(theta, sampled, actual[rows])
        rest = list(res.predictions)
        pred = np.array([res.predictions[m] for m in rest])
        obs = (actual[theta.rows(rest)] - res.standardization["mean"]) / res.standardization["std"]
        rho = float(np.corrcoef(pred, obs)[0, 1]) if np.ptp(pred) > 0 else float("nan")
        per_task.append({"task": task, "r": rho, "mse": float(np.mean((pred - obs) ** 2))})
    rs = np.array([t["r"] for t in per_task])
    return {
        "k": k,
        "n_factors": n_factors,
        "mean_r": float(np.nanmean(rs)),
        "mean_mse": float(np.mean([t["mse"] for t in per_task])),
        "per_task": per_task,
    }
