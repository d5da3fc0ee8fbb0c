"""Regression (Thomson) skill scores and the least-squares maps between
score space and skill space. Everything here works on z-scores."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from ._linalg import lstsq, regularized_solve
from .data import CorrelationMatrix, StandardizedMatrix
from .errors import AlignmentError, UnderdeterminedError, ValidationError
from .paf import FactorModel


@dataclass(frozen=True)
class RegressionWeights:
    b_reg: np.ndarray
    task_ids: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "task_ids", tuple(self.task_ids))
        arr = np.array(self.b_reg, dtype=float)
        arr.setflags(write=False)
        object.__setattr__(self, "b_reg", arr)


@dataclass(frozen=True)
class SkillScores:
    theta: np.ndarray
    model_ids: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "model_ids", tuple(self.model_ids))
        arr = np.array(self.theta, dtype=float)
        if arr.ndim != 2 or arr.shape[0] != len(self.model_ids):
            raise ValidationError("theta must be a models x factors matrix")
        arr.setflags(write=False)
        object.__setattr__(self, "theta", arr)

    @property
    def factor_count(self) -> int:
        return self.theta.shape[1]

    def rows(self, model_ids) -> np.ndarray:
        lookup = {m: i for i, m in enumerate(self.model_ids)}
        unknown = [m for m in model_ids if m not in lookup]
        if unknown:
            raise AlignmentError(f"unknown model id(s): {', '.join(unknown)}")
        return np.array([lookup[m] for m in model_ids], dtype=int)

    def write_csv(self, path, labels=None):
        labels = labels or [f"factor-{c + 1}" for c in range(self.factor_count)]
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["model", *labels])
            for m, row in zip(self.model_ids, self.theta):
                w.writerow([m, *(f"{v:.10g}" for v in row)])


def regression_weights(fm: FactorModel, r: CorrelationMatrix) -> RegressionWeights:
    """``B_reg = R^-1 Lambda`` (so that ``B_reg' = Lambda' R^-1``)."""
    if tuple(r.task_ids) != fm.task_ids:
        raise AlignmentError("correlation matrix and factor model have different tasks")
    return RegressionWeights(regularized_solve(r.r, fm.loadings), fm.task_ids)


def score_models(w: RegressionWeights, z: StandardizedMatrix) -> SkillScores:
    """``Theta = Z B_reg``; a single new model is the one-row case."""
    if tuple(z.task_ids) != w.task_ids:
        raise AlignmentError("task ids of the weights and the z-score matrix differ")
    return SkillScores(z.z_scores @ w.b_reg, z.model_ids)


def project_task(theta: SkillScores | np.ndarray, phi) -> np.ndarray:
    """Loadings of a task score vector on the skill columns by least squares,
    ``(Theta' Theta)^-1 Theta' phi``."""
    t = theta.theta if isinstance(theta, SkillScores) else np.asarray(theta, dtype=float)
    phi = np.asarray(phi, dtype=float)
    if phi.shape[0] != t.shape[0]:
        raise ValidationError(f"task vector has {phi.shape[0]} entries, expected {t.shape[0]}")
    if t.shape[0] < t.shape[1]:
        raise UnderdeterminedError(f"{t.shape[0]} models cannot determine {t.shape[1]} loadings")
    return lstsq(t, phi)


def reconstruct_task(theta: SkillScores | np.ndarray, lambda_hat) -> np.ndarray:
    t = theta.theta if isinstance(theta, SkillScores) else np.asarray(theta, dtype=float)
    lambda_hat = np.asarray(lambda_hat, dtype=float)
    if lambda_hat.shape[0] != t.shape[1]:
        raise ValidationError("loading vector length does not match the factor count")
    return t @ lambda_hat


def project_model(lambda_k, p_k) -> np.ndarray:
    """Skill vector of a model seen on ``k`` tasks,
    ``(Lambda_k' Lambda_k)^-1 Lambda_k' p_k``."""
    lambda_k = np.atleast_2d(np.asarray(lambda_k, dtype=float))
    p_k = np.asarray(p_k, dtype=float)
    k, c = lambda_k.shape
    if p_k.shape[0] != k:
        raise ValidationError(f"score vector has {p_k.shape[0]} entries, expected {k}")
    if k < c:
        raise UnderdeterminedError(f"{k} tasks cannot determine {c} skills")
    return lstsq(lambda_k, p_k)


def reconstruct_model(fm: FactorModel, theta_hat, z: StandardizedMatrix | None = None) -> np.ndarray:
    """``Lambda theta_hat`` on the z scale, or on the score scale when the
    training matrix ``z`` is given."""
    theta_hat = np.asarray(theta_hat, dtype=float)
    if theta_hat.shape[-1] != fm.n_factors:
        raise ValidationError("skill vector length does not match the factor count")
    out = fm.loadings @ theta_hat
    if z is not None:
        if tuple(z.task_ids) != fm.task_ids:
            raise AlignmentError("task ids of the model and the training matrix differ")
        out = z.destandardize(out)
    return out
