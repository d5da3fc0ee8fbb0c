"""Subspace comparison and perturbation harnesses for a factor solution."""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .data import StandardizedMatrix, correlation_matrix
from .errors import ConditioningError, SkillSpaceError, ValidationError
from .paf import DEFAULT_MAX_ITER, DEFAULT_TOL, fit_paf, rotate_orthomax


def procrustes_align(a, b):
    """Orthogonal ``Q`` minimizing ``||a - b Q||_F``.

    ``b`` may have a different number of columns from ``a``; the narrower
    matrix is padded with zero columns so that ``Q`` is square. Returns
    ``(Q, b_aligned, residual)``.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape[0] != b.shape[0]:
        raise ValidationError("matrices must have the same number of rows")
    k = max(a.shape[1], b.shape[1])
    a_p = _pad(a, k)
    b_p = _pad(b, k)
    u, _, vt = np.linalg.svd(b_p.T @ a_p)
    q = u @ vt
    aligned = b_p @ q
    return q, aligned, float(np.linalg.norm(a_p - aligned))


def _pad(x, k):
    if x.shape[1] == k:
        return x
    return np.hstack([x, np.zeros((x.shape[0], k - x.shape[1]))])


def _orthonormal_basis(x):
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    q, r = np.linalg.qr(x)
    d = np.abs(np.diag(r))
    if d.size == 0 or d.min() <= 1e-10 * max(d.max(), 1e-300):
        raise ConditioningError("input does not have full column rank")
    return q


def principal_angles(a, b) -> np.ndarray:
    """Principal angles in degrees between ``span(a)`` and ``span(b)``,
    ascending, ``min(rank a, rank b)`` of them."""
    qa = _orthonormal_basis(a)
    qb = _orthonormal_basis(b)
    if qb.shape[1] > qa.shape[1]:
        qa, qb = qb, qa
    cos = np.clip(np.linalg.svd(qa.T @ qb, compute_uv=False), 0.0, 1.0)
    # sines of the same angles, ascending; accurate where cos is near 1
    sin = np.clip(np.linalg.svd(qb - qa @ (qa.T @ qb), compute_uv=False)[::-1], 0.0, 1.0)
    ang = np.where(cos**2 > 0.5, np.arcsin(sin), np.arccos(cos))
    return np.degrees(np.sort(ang))


def tucker_congruence(l_a, l_b) -> float:
    l_a = np.asarray(l_a, dtype=float)
    l_b = np.asarray(l_b, dtype=float)
    na, nb = np.linalg.norm(l_a), np.linalg.norm(l_b)
    if na == 0 or nb == 0:
        raise ValidationError("congruence is undefined for a zero vector")
    return float(np.clip(l_a @ l_b / (na * nb), -1.0, 1.0))


def match_factors(reference, other):
    """Greedy pairing of columns by largest absolute congruence.

    Returns a list of ``(ref_col, other_col, congruence)`` with the sign of
    ``other_col`` absorbed (congruence is nonnegative), ordered by
    reference column.
    """
    reference = np.asarray(reference, dtype=float)
    other = np.asarray(other, dtype=float)
    nr = np.linalg.norm(reference, axis=0)
    no = np.linalg.norm(other, axis=0)
    with np.errstate(invalid="ignore", divide="ignore"):
        cong = (reference.T @ other) / np.outer(nr, no)
    cong = np.nan_to_num(cong)
    absc = np.abs(cong)
    pairs = []
    used_r, used_o = set(), set()
    for flat in np.argsort(-absc, axis=None, kind="stable"):
        i, j = np.unravel_index(flat, absc.shape)
        if i in used_r or j in used_o:
            continue
        pairs.append((int(i), int(j), float(absc[i, j])))
        used_r.add(i)
        used_o.add(j)
        if len(used_r) == min(absc.shape):
            break
    return sorted(pairs)


@dataclass
class StabilityRun:
    label: str
    n_factors: int
    matched_angles: list[float] = field(default_factory=list)
    congruences: list[float] = field(default_factory=list)
    extra_angles: list[float] = field(default_factory=list)
    subspace_angles: list[float] = field(default_factory=list)
    held_out: list[str] = field(default_factory=list)
    error: str | None = None


@dataclass
class StabilityReport:
    kind: str
    reference_factors: int
    runs: list[StabilityRun]
    seed: int | None = None

    def _all(self, attr):
        return [v for run in self.runs if run.error is None for v in getattr(run, attr)]

    def summary(self) -> dict:
        ang = np.array(self._all("matched_angles"))
        cong = np.array(self._all("congruences"))
        out = {
            "runs": len(self.runs),
            "failed_runs": sum(r.error is not None for r in self.runs),
        }
        if ang.size:
            out.update(
                max_angle=float(ang.max()),
                mean_angle=float(ang.mean()),
                std_angle=float(ang.std(ddof=1)) if ang.size > 1 else 0.0,
                min_congruence=float(cong.min()),
                mean_congruence=float(cong.mean()),
            )
        return out

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "reference_factors": self.reference_factors,
            "seed": self.seed,
            "summary": self.summary(),
            "runs": [asdict(r) for r in self.runs],
        }

    def to_json(self, **kwargs) -> str:
        kwargs.setdefault("indent", 2)
        return json.dumps(self.to_dict(), **kwargs)

    def table(self) -> str:
        lines = [f"{'run':<16} {'k':>3} {'max angle':>10} {'mean angle':>11} {'min phi':>8}"]
        for r in self.runs:
            if r.error is not None:
                lines.append(f"{r.label:<16} {r.n_factors:>3}  failed: {r.error}")
                continue
            lines.append(
                f"{r.label:<16} {r.n_factors:>3} {max(r.matched_angles):>10.2f} "
                f"{np.mean(r.matched_angles):>11.2f} {min(r.congruences):>8.3f}"
            )
        s = self.summary()
        if "max_angle" in s:
            lines.append(
                f"overall: max {s['max_angle']:.2f} deg, mean {s['mean_angle']:.2f} deg, "
                f"sd {s['std_angle']:.2f} deg, mean phi {s['mean_congruence']:.3f}"
            )
        return "\n".join(lines)


def compare_solutions(reference, other, label="", n_factors=None) -> StabilityRun:
    """Align ``other`` to ``reference`` and report per-factor deviations.

    Matched angles are the angles between paired columns after alignment.
    When ``other`` has more columns than the reference, the rotated columns
    left unpaired by direct congruence matching are reported as their angle
    to the whole reference subspace (after Procrustes alignment such
    leftovers would be orthogonal to the reference by construction).
    """
    reference = np.asarray(reference, dtype=float)
    other = np.asarray(other, dtype=float)
    c_ref = reference.shape[1]
    _, aligned, _ = procrustes_align(reference, other)
    pairs = match_factors(reference, aligned)
    run = StabilityRun(label=label, n_factors=n_factors or other.shape[1])
    for _, _, phi in pairs:
        run.congruences.append(phi)
        run.matched_angles.append(math.degrees(math.acos(min(1.0, phi))))
    if other.shape[1] > c_ref:
        direct = {j for _, j, _ in match_factors(reference, other)}
        for j in range(other.shape[1]):
            if j not in direct and np.linalg.norm(other[:, j]) > 0:
                run.extra_angles.append(float(principal_angles(reference, other[:, j])[0]))
    try:
        run.subspace_angles = [float(v) for v in principal_angles(reference, other)]
    except ConditioningError:
        pass
    return run


def _reference(z, n_factors, gamma, tol, max_iter):
    fm = fit_paf(correlation_matrix(z), n_factors, tol=tol, max_iter=max_iter)
    return rotate_orthomax(fm, gamma).loadings


def _map(fn, items, jobs):
    if jobs is None or jobs <= 1:
        return [fn(i) for i in items]
    with ThreadPoolExecutor(max_workers=jobs) as ex:
        return list(ex.map(fn, items))


def sweep_factor_count(
    z: StandardizedMatrix,
    reference_C: int,
    ks,
    gamma=1.0,
    tol=DEFAULT_TOL,
    max_iter=DEFAULT_MAX_ITER,
    jobs=None,
) -> StabilityReport:
    """Refit at each factor count in ``ks`` and compare to the reference."""
    r = correlation_matrix(z)
    b = r.n_tasks
    for k in ks:
        if not 1 <= k < b:
            raise ValidationError(f"factor count {k} outside [1, {b})")
    ref = rotate_orthomax(fit_paf(r, reference_C, tol=tol, max_iter=max_iter), gamma).loadings

    def one(k):
        try:
            fm = rotate_orthomax(fit_paf(r, k, tol=tol, max_iter=max_iter), gamma)
            return compare_solutions(ref, fm.loadings, label=f"k={k}", n_factors=k)
        except SkillSpaceError as exc:
            return StabilityRun(label=f"k={k}", n_factors=k, error=str(exc))

    return StabilityReport("factor_count", reference_C, _map(one, list(ks), jobs))


def holdout_schedule(n_models, holdout_frac, runs, seed):
    """Held-out row indices per run.

    Rows are permuted once with a Philox generator and each run takes the
    next block of the permutation cyclically, so all rows are held out at
    least once whenever ``runs * n_holdout >= n_models``.
    """
    n_hold = max(1, int(round(holdout_frac * n_models)))
    perm = np.random.Generator(np.random.Philox(seed)).permutation(n_models)
    return [np.sort(perm[(r * n_hold + np.arange(n_hold)) % n_models]) for r in range(runs)]


def subsample_models(
    z: StandardizedMatrix,
    holdout_frac: float,
    runs: int,
    seed: int,
    n_factors: int,
    gamma=1.0,
    tol=DEFAULT_TOL,
    max_iter=DEFAULT_MAX_ITER,
    jobs=None,
) -> StabilityReport:
    """Refit on random model subsets and compare to the full-data solution."""
    if not 0 < holdout_frac <= 0.5:
        raise ValidationError("holdout_frac must lie in (0, 0.5]")
    if runs < 1:
        raise ValidationError("runs must be at least 1")
    m = z.n_models
    schedule = holdout_schedule(m, holdout_frac, runs, seed)
    kept = m - schedule[0].size
    if kept < 3 * n_factors:
        raise ValidationError(
            f"only {kept} models remain after holdout; need at least {3 * n_factors}"
        )
    ref = _reference(z, n_factors, gamma, tol, max_iter)

    def one(idx):
        r_i, held = idx
        label = f"run-{r_i + 1}"
        try:
            keep = np.setdiff1d(np.arange(m), held)
            loadings = _reference(z.subset(rows=keep), n_factors, gamma, tol, max_iter)
            run = compare_solutions(ref, loadings, label=label, n_factors=n_factors)
        except SkillSpaceError as exc:
            run = StabilityRun(label=label, n_factors=n_factors, error=str(exc))
        run.held_out = [z.model_ids[i] for i in held]
        return run

    return StabilityReport("model_subsample", n_factors, _map(one, list(enumerate(schedule)), jobs), seed=seed)


def leave_one_task_out(
    z: StandardizedMatrix,
    n_factors: int,
    gamma=1.0,
    tol=DEFAULT_TOL,
    max_iter=DEFAULT_MAX_ITER,
    jobs=None,
) -> StabilityReport:
    """Refit without each task in turn; compare on the remaining tasks."""
    b = z.n_tasks
    if b < n_factors + 2:
        raise ValidationError(f"need at least {n_factors + 2} tasks, got {b}")
    r = correlation_matrix(z)
    ref = rotate_orthomax(fit_paf(r, n_factors, tol=tol, max_iter=max_iter), gamma).loadings

    def one(j):
        keep = np.delete(np.arange(b), j)
        label = f"-{z.task_ids[j]}"
        try:
            fm = rotate_orthomax(fit_paf(r.submatrix(keep), n_factors, tol=tol, max_iter=max_iter), gamma)
            run = compare_solutions(ref[keep], fm.loadings, label=label, n_factors=n_factors)
        except SkillSpaceError as exc:
            run = StabilityRun(label=label, n_factors=n_factors, error=str(exc))
        run.held_out = [z.task_ids[j]]
        return run

    return StabilityReport("leave_one_task_out", n_factors, _map(one, range(b), jobs))
