"""Principal axis factoring, orthomax rotation and factor-count selection."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.linalg

from . import kernels
from ._linalg import regularized_inverse
from .data import CorrelationMatrix
from .errors import RotationError, ValidationError

log = logging.getLogger(__name__)

DEFAULT_TOL = 1e-4
DEFAULT_MAX_ITER = 200
HEYWOOD_CAP = 0.995


@dataclass(frozen=True)
class FactorModel:
    """A fitted factor solution.

    ``loadings`` is tasks x factors with columns ordered by descending sum of
    squared loadings. ``eigenvalues`` are the retained eigenvalues of the
    final reduced correlation matrix and are not changed by rotation.
    """

    task_ids: tuple[str, ...]
    loadings: np.ndarray
    eigenvalues: np.ndarray
    n_iter: int
    converged: bool
    tol: float
    rotation: dict | None = None
    rotation_matrix: np.ndarray | None = None
    warnings: tuple[str, ...] = ()
    residual_history: tuple[float, ...] = field(default=(), repr=False)

    def __post_init__(self):
        object.__setattr__(self, "task_ids", tuple(self.task_ids))
        object.__setattr__(self, "warnings", tuple(self.warnings))
        object.__setattr__(self, "residual_history", tuple(float(v) for v in self.residual_history))
        for name in ("loadings", "eigenvalues", "rotation_matrix"):
            value = getattr(self, name)
            if value is not None:
                arr = np.array(value, dtype=float)
                arr.setflags(write=False)
                object.__setattr__(self, name, arr)
        if self.loadings.ndim != 2 or self.loadings.shape[0] != len(self.task_ids):
            raise ValidationError("loadings must be a tasks x factors matrix")

    @property
    def n_tasks(self) -> int:
        return self.loadings.shape[0]

    @property
    def n_factors(self) -> int:
        return self.loadings.shape[1]

    @property
    def communalities(self) -> np.ndarray:
        return (self.loadings**2).sum(axis=1)

    @property
    def uniqueness(self) -> np.ndarray:
        return 1.0 - self.communalities

    def reproduced(self) -> np.ndarray:
        return self.loadings @ self.loadings.T

    def to_dict(self) -> dict:
        return {
            "task_ids": list(self.task_ids),
            "n_factors": self.n_factors,
            "loadings": {t: [float(v) for v in row] for t, row in zip(self.task_ids, self.loadings)},
            "communalities": [float(v) for v in self.communalities],
            "uniqueness": [float(v) for v in self.uniqueness],
            "eigenvalues": [float(v) for v in self.eigenvalues],
            "rotation": self.rotation,
            "rotation_matrix": None
            if self.rotation_matrix is None
            else [[float(v) for v in row] for row in self.rotation_matrix],
            "convergence": {
                "n_iter": self.n_iter,
                "converged": self.converged,
                "tol": self.tol,
                "residual_history": list(self.residual_history),
            },
            "warnings": list(self.warnings),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "FactorModel":
        task_ids = doc["task_ids"]
        conv = doc["convergence"]
        return cls(
            task_ids=task_ids,
            loadings=np.array([doc["loadings"][t] for t in task_ids], dtype=float).reshape(
                len(task_ids), doc["n_factors"]
            ),
            eigenvalues=np.array(doc["eigenvalues"], dtype=float),
            n_iter=conv["n_iter"],
            converged=conv["converged"],
            tol=conv["tol"],
            rotation=doc.get("rotation"),
            rotation_matrix=None if doc.get("rotation_matrix") is None else np.array(doc["rotation_matrix"]),
            warnings=doc.get("warnings", ()),
            residual_history=conv.get("residual_history", ()),
        )

    def to_json(self, **kwargs) -> str:
        kwargs.setdefault("indent", 2)
        return json.dumps(self.to_dict(), **kwargs)

    @classmethod
    def from_json(cls, text: str) -> "FactorModel":
        return cls.from_dict(json.loads(text))


def initial_communalities(r: CorrelationMatrix) -> np.ndarray:
    """Squared multiple correlation of each task with all the others."""
    inv = regularized_inverse(r.r)
    smc = 1.0 - 1.0 / np.diag(inv)
    return np.clip(smc, 0.0, np.nextafter(1.0, 0.0))


def _column_signs(loadings):
    idx = np.argmax(np.abs(loadings), axis=0)
    signs = np.sign(loadings[idx, np.arange(loadings.shape[1])])
    signs[signs == 0] = 1.0
    return signs


def _offdiag_residual(r, loadings):
    res = r - loadings @ loadings.T
    np.fill_diagonal(res, 0.0)
    return float(np.sqrt((res**2).sum()))


def fit_paf(
    r: CorrelationMatrix,
    n_factors: int,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> FactorModel:
    """Iterated principal axis factoring of a correlation matrix.

    Starting from squared multiple correlations, the diagonal of ``r`` is
    replaced by the current communalities, the top ``n_factors``
    eigenpairs give loadings ``Q * sqrt(delta)``, and the communalities are
    updated from the loadings until the largest change falls below ``tol``.

    Negative retained eigenvalues are clamped to zero. Communalities above
    one (Heywood cases) are capped at 0.995 by shrinking the loading row;
    each occurrence is recorded in ``FactorModel.warnings``. Hitting
    ``max_iter`` returns the last iterate with ``converged=False``.
    """
    b = r.n_tasks
    if not 1 <= n_factors < b:
        raise ValidationError(f"need 1 <= n_factors < {b} tasks, got {n_factors}")
    if not tol > 0:
        raise ValidationError("tol must be positive")
    if max_iter < 1:
        raise ValidationError("max_iter must be at least 1")

    R = np.array(r.r, dtype=float)
    h2 = initial_communalities(r)
    heywood = set()
    history = []
    converged = False
    loadings = np.zeros((b, n_factors))
    delta = np.zeros(n_factors)
    n_iter = 0
    for n_iter in range(1, max_iter + 1):
        reduced = R.copy()
        np.fill_diagonal(reduced, h2)
        w, q = scipy.linalg.eigh(reduced, subset_by_index=[b - n_factors, b - 1])
        w, q = w[::-1], q[:, ::-1]
        delta = np.clip(w, 0.0, None)
        loadings = q * np.sqrt(delta)
        h2_new = (loadings**2).sum(axis=1)
        over = h2_new > 1.0
        if over.any():
            loadings[over] *= np.sqrt(HEYWOOD_CAP / h2_new[over])[:, None]
            h2_new[over] = (loadings[over] ** 2).sum(axis=1)
            heywood.update(int(j) for j in np.flatnonzero(over))
        history.append(_offdiag_residual(R, loadings))
        change = np.max(np.abs(h2_new - h2))
        h2 = h2_new
        if change < tol:
            converged = True
            break

    loadings = loadings * _column_signs(loadings)
    notes = [f"Heywood case on task {r.task_ids[j]!r}: communality capped at {HEYWOOD_CAP}" for j in sorted(heywood)]
    if not converged:
        notes.append(f"PAF did not converge in {max_iter} iterations")
        log.warning("PAF did not converge in %d iterations", max_iter)
    return FactorModel(
        task_ids=r.task_ids,
        loadings=loadings,
        eigenvalues=delta,
        n_iter=n_iter,
        converged=converged,
        tol=tol,
        warnings=notes,
        residual_history=history,
    )


def orthomax_criterion(loadings, gamma: float) -> float:
    """sum_c [ sum_j l_jc^4 - gamma/B (sum_j l_jc^2)^2 ]"""
    loadings = np.asarray(loadings, dtype=float)
    b = loadings.shape[0]
    sq = loadings**2
    return float((sq**2).sum() - gamma / b * (sq.sum(axis=0) ** 2).sum())


def rotate_orthomax(
    fm: FactorModel,
    gamma: float = 1.0,
    kaiser_normalize: bool = True,
    tol: float = 1e-9,
    max_sweeps: int = 1000,
) -> FactorModel:
    """Orthogonal orthomax rotation (``gamma=1`` varimax, ``0`` quartimax).

    Uses sweeps of planar rotations, each of which maximizes the criterion
    for one pair of columns exactly. With ``kaiser_normalize`` the criterion
    is optimized on row-normalized loadings.
    """
    if gamma < 0:
        raise ValidationError("gamma must be nonnegative")
    loadings = np.array(fm.loadings)
    c = fm.n_factors
    meta = {"method": "orthomax", "gamma": float(gamma), "kaiser_normalize": bool(kaiser_normalize)}
    if c == 1:
        rot = np.ones((1, 1))
        meta["n_sweeps"] = 0
    else:
        norms = np.sqrt((loadings**2).sum(axis=1)) if kaiser_normalize else np.ones(fm.n_tasks)
        norms = np.where(norms > 0, norms, 1.0)
        _, rot, n_sweeps, converged = kernels.orthomax_sweeps(loadings / norms[:, None], gamma, tol, max_sweeps)
        if not converged:
            raise RotationError(f"orthomax rotation did not converge in {n_sweeps} sweeps", n_iter=n_sweeps)
        meta["n_sweeps"] = n_sweeps
    rotated = loadings @ rot
    ss = (rotated**2).sum(axis=0)
    order = np.argsort(-ss, kind="stable")
    rot = rot[:, order]
    rot = rot * _column_signs(loadings @ rot)
    rotated = loadings @ rot
    total = rot if fm.rotation_matrix is None else fm.rotation_matrix @ rot
    return replace(fm, loadings=rotated, rotation=meta, rotation_matrix=total)


def correlation_eigenvalues(r: CorrelationMatrix) -> np.ndarray:
    """Eigenvalues of the correlation matrix, descending."""
    return np.sort(np.linalg.eigvalsh(r.r))[::-1]


def reduced_eigenvalues(r: CorrelationMatrix) -> np.ndarray:
    """Eigenvalues of the SMC-reduced correlation matrix, descending."""
    reduced = np.array(r.r)
    np.fill_diagonal(reduced, initial_communalities(r))
    return np.sort(np.linalg.eigvalsh(reduced))[::-1]


def select_factor_count(eigenvalues, cum_var_threshold: float = 0.85, n_tasks: int | None = None) -> int:
    """Larger of the Kaiser count (eigenvalue > 1) and the smallest count
    whose cumulative eigenvalue share of ``n_tasks`` reaches the threshold;
    at least 1."""
    ev = np.asarray(eigenvalues, dtype=float)
    if ev.size == 0:
        raise ValidationError("empty eigenvalue vector")
    if not 0 < cum_var_threshold <= 1:
        raise ValidationError("cum_var_threshold must lie in (0, 1]")
    b = ev.size if n_tasks is None else n_tasks
    kaiser = int((ev > 1.0).sum())
    share = np.cumsum(ev) / b
    hits = np.flatnonzero(share >= cum_var_threshold - 1e-12)
    cumulative = int(hits[0]) + 1 if hits.size else ev.size
    return max(kaiser, cumulative, 1)


def explained_variance(fm: FactorModel) -> tuple[np.ndarray, np.ndarray]:
    """Per-factor and cumulative shares of total variance (denominator B)."""
    per = (fm.loadings**2).sum(axis=0) / fm.n_tasks
    return per, np.cumsum(per)


def loading_zscores(loadings) -> np.ndarray:
    """Within-column z-scores of absolute loadings (sample std).

    Columns whose absolute loadings are all equal get z = 0.
    """
    a = np.abs(np.asarray(loadings, dtype=float))
    mu = a.mean(axis=0)
    sd = a.std(axis=0, ddof=1)
    sd_safe = np.where(sd > 1e-12 * np.maximum(mu, 1.0), sd, np.inf)
    return (a - mu) / sd_safe
