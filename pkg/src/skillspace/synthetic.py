"""Forward simulation of the linear latent-skill model.

Scores are generated as ``theta @ loadings.T + noise`` with standard normal
skills and independent task noise of variance ``1 - h_j^2`` so that every
task has unit population variance.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import PerformanceMatrix, StandardizedMatrix, standardize_array


@dataclass(frozen=True)
class SyntheticSuite:
    z: StandardizedMatrix
    loadings: np.ndarray
    theta: np.ndarray
    noise: np.ndarray


def simple_structure_loadings(n_tasks=40, n_factors=8, low=0.7, high=0.9, rng=None):
    """One nonzero loading per task, tasks split into equal contiguous blocks."""
    rng = np.random.default_rng(rng)
    lam = np.zeros((n_tasks, n_factors))
    blocks = np.array_split(np.arange(n_tasks), n_factors)
    for c, rows in enumerate(blocks):
        lam[rows, c] = rng.uniform(low, high, size=rows.size)
    return lam


def simulate(loadings, n_models, rng=None, uniqueness=None):
    """Return ``(theta, scores, noise)`` for the given loadings."""
    rng = np.random.default_rng(rng)
    loadings = np.asarray(loadings, dtype=float)
    b, c = loadings.shape
    if uniqueness is None:
        uniqueness = 1.0 - (loadings**2).sum(axis=1)
    uniqueness = np.broadcast_to(np.asarray(uniqueness, dtype=float), (b,))
    if np.any(uniqueness < 0):
        raise ValueError("loadings imply negative uniqueness")
    theta = rng.standard_normal((n_models, c))
    noise = rng.standard_normal((n_models, b)) * np.sqrt(uniqueness)
    return theta, theta @ loadings.T + noise, noise


def make_suite(
    n_models=200,
    n_tasks=40,
    n_factors=8,
    low=0.7,
    high=0.9,
    seed=0,
) -> SyntheticSuite:
    rng = np.random.default_rng(seed)
    lam = simple_structure_loadings(n_tasks, n_factors, low, high, rng)
    theta, scores, noise = simulate(lam, n_models, rng)
    model_ids = [f"model-{i:03d}" for i in range(n_models)]
    task_ids = [f"task-{j:02d}" for j in range(n_tasks)]
    return SyntheticSuite(standardize_array(scores, model_ids, task_ids), lam, theta, noise)


def to_leaderboard(z: StandardizedMatrix, center=5.0, spread=1.0) -> PerformanceMatrix:
    """Map z-scores onto the 0-10 scale (clipped) for file round trips."""
    scores = np.clip(center + spread * z.z_scores, 0.0, 10.0)
    return PerformanceMatrix(z.model_ids, z.task_ids, scores)
