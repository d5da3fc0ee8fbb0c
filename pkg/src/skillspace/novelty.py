"""Place a candidate task on the novel-redundant continuum.

Each diagnostic casts one vote: +1 (novel), -1 (redundant) or 0 (abstain).
The aggregate score is the mean of the non-abstaining votes.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .data import StandardizedMatrix, correlation_matrix
from .errors import DegenerateError, InconclusiveError, ValidationError
from .paf import DEFAULT_MAX_ITER, DEFAULT_TOL, FactorModel, explained_variance, fit_paf, rotate_orthomax
from .scores import SkillScores, project_task
from .stability import compare_solutions

log = logging.getLogger(__name__)

NOVEL, REDUNDANT, ABSTAIN = 1, -1, 0


@dataclass(frozen=True)
class NoveltyThresholds:
    max_r: float = 0.90
    r2: float = 0.80
    variance_delta: float = 0.01
    mse: float = 0.10
    low_loading: float = 0.3
    angle_deg: float = 15.0
    cosine: float = 0.9
    residual_corr: float = 0.2


@dataclass
class Diagnostic:
    name: str
    vote: int
    stats: dict = field(default_factory=dict)


@dataclass
class NoveltyReport:
    diagnostics: list[Diagnostic]
    score: float
    band: str
    thresholds: dict
    communality: float | None = None
    uniqueness: float | None = None
    warnings: list[str] = field(default_factory=list)

    @property
    def votes(self) -> dict:
        return {d.name: d.vote for d in self.diagnostics}

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self, **kwargs) -> str:
        kwargs.setdefault("indent", 2)
        return json.dumps(self.to_dict(), **kwargs)

    def table(self) -> str:
        width = max(len(d.name) for d in self.diagnostics)
        lines = []
        for d in self.diagnostics:
            shown = ", ".join(f"{k}={_fmt(v)}" for k, v in d.stats.items() if not isinstance(v, list))
            lines.append(f"{d.name:<{width}}  {d.vote:+d}  {shown}")
        lines.append(f"{'score':<{width}}  {self.score:+.3f}  ({self.band})")
        lines.extend(f"warning: {w}" for w in self.warnings)
        return "\n".join(lines)


def _fmt(v):
    return f"{v:.4g}" if isinstance(v, float) else str(v)


def band(score: float) -> str:
    if score <= -0.33:
        return "redundant-leaning"
    if score >= 0.33:
        return "novel-leaning"
    return "mixed"


def standardize_candidate(phi) -> np.ndarray:
    """z-score a candidate vector against its own mean and sample std."""
    phi = np.asarray(phi, dtype=float)
    if phi.ndim != 1:
        raise ValidationError("candidate must be a vector")
    if np.isnan(phi).any():
        raise ValidationError("candidate contains missing values")
    sd = phi.std(ddof=1) if phi.size > 1 else 0.0
    if not sd > 1e-12 * max(1.0, float(np.abs(phi).max())):
        raise DegenerateError("candidate task is constant across models")
    return (phi - phi.mean()) / sd


def _check_length(z: StandardizedMatrix, phi):
    if phi.shape[0] != z.n_models:
        raise ValidationError(f"candidate has {phi.shape[0]} rows, expected {z.n_models} (one per model)")


def collinearity_check(z: StandardizedMatrix, phi, thresholds=NoveltyThresholds()) -> Diagnostic:
    """Largest |Pearson r| with an existing task and R^2 of an OLS fit on all tasks."""
    phi = standardize_candidate(phi)
    _check_length(z, phi)
    m = z.n_models
    r = z.z_scores.T @ phi / (m - 1)
    j = int(np.argmax(np.abs(r)))
    coef, *_ = np.linalg.lstsq(z.z_scores, phi, rcond=None)
    resid = phi - z.z_scores @ coef
    r2 = float(1.0 - resid @ resid / (phi @ phi))
    max_r = float(min(1.0, abs(r[j])))
    vote = REDUNDANT if max_r > thresholds.max_r or r2 > thresholds.r2 else NOVEL
    return Diagnostic("collinearity", vote, {"max_abs_r": max_r, "max_r_task": z.task_ids[j], "r2": r2})


def _fit(z, n_factors, tol, max_iter):
    return fit_paf(correlation_matrix(z), n_factors, tol=tol, max_iter=max_iter)


def variance_delta_check(
    z: StandardizedMatrix,
    phi,
    n_factors: int,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    thresholds=NoveltyThresholds(),
    baseline: FactorModel | None = None,
) -> Diagnostic:
    """Change in the cumulative explained-variance share when the candidate
    is appended and the same number of factors is refit."""
    phi = standardize_candidate(phi)
    _check_length(z, phi)
    base = baseline if baseline is not None else _fit(z, n_factors, tol, max_iter)
    grown = _fit(z.with_column(_candidate_id(z), phi), n_factors, tol, max_iter)
    before = float(explained_variance(base)[1][-1])
    after = float(explained_variance(grown)[1][-1])
    delta = after - before
    vote = REDUNDANT if abs(delta) < thresholds.variance_delta else NOVEL
    return Diagnostic("variance_delta", vote, {"before": before, "after": after, "delta": delta})


def _candidate_id(z):
    name = "__candidate__"
    while name in z.task_ids:
        name += "_"
    return name


def latent_alignment_check(theta: SkillScores, phi, thresholds=NoveltyThresholds()):
    """Project the candidate onto the skill scores.

    Returns ``(lambda_hat, mse_diagnostic, low_loading_diagnostic)``.
    """
    phi = standardize_candidate(phi)
    if phi.shape[0] != theta.theta.shape[0]:
        raise ValidationError(f"candidate has {phi.shape[0]} rows, expected {theta.theta.shape[0]}")
    lam = project_task(theta, phi)
    resid = phi - theta.theta @ lam
    mse = float(np.mean(resid**2))
    top = float(np.max(np.abs(lam)))
    mse_d = Diagnostic("reconstruction_mse", NOVEL if mse > thresholds.mse else REDUNDANT, {"mse": mse})
    low_d = Diagnostic(
        "low_loadings",
        NOVEL if top < thresholds.low_loading else REDUNDANT,
        {"max_abs_loading": top, "loadings": [float(v) for v in lam]},
    )
    return lam, mse_d, low_d


def structural_shift_check(
    z: StandardizedMatrix,
    phi,
    n_factors: int,
    gamma: float = 1.0,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    thresholds=NoveltyThresholds(),
    baseline: FactorModel | None = None,
) -> Diagnostic:
    """Largest matched angle between rotated solutions fitted with and
    without the candidate, compared on the original tasks."""
    phi = standardize_candidate(phi)
    _check_length(z, phi)
    if baseline is None or baseline.rotation is None:
        baseline = rotate_orthomax(baseline or _fit(z, n_factors, tol, max_iter), gamma)
    grown = rotate_orthomax(_fit(z.with_column(_candidate_id(z), phi), n_factors, tol, max_iter), gamma)
    run = compare_solutions(baseline.loadings, grown.loadings[: z.n_tasks], label="with-candidate")
    angle = max(run.matched_angles)
    vote = REDUNDANT if angle < thresholds.angle_deg else NOVEL
    return Diagnostic("structural_shift", vote, {"max_angle_deg": angle, "angles_deg": run.matched_angles})


def profile_cosine_check(lambda_hat, fm: FactorModel, thresholds=NoveltyThresholds()) -> Diagnostic:
    """Largest cosine between the candidate's loading profile and any task's."""
    lam = np.asarray(lambda_hat, dtype=float)
    norm = np.linalg.norm(lam)
    if norm < 1e-8:
        log.warning("candidate loading vector is zero; profile cosine abstains")
        return Diagnostic("profile_cosine", ABSTAIN, {"max_cosine": None, "reason": "zero loading vector"})
    rows = fm.loadings
    rn = np.linalg.norm(rows, axis=1)
    cos = np.where(rn > 0, rows @ lam / (np.where(rn > 0, rn, 1.0) * norm), 0.0)
    j = int(np.argmax(cos))
    vote = REDUNDANT if cos[j] > thresholds.cosine else NOVEL
    return Diagnostic("profile_cosine", vote, {"max_cosine": float(cos[j]), "max_cosine_task": fm.task_ids[j]})


def residual_correlation_check(
    z: StandardizedMatrix,
    fm: FactorModel,
    theta: SkillScores,
    phi,
    lambda_hat,
    exclude=(),
    thresholds=NoveltyThresholds(),
) -> Diagnostic:
    """Correlation of the candidate's residual with each task's residual
    ``z_j - Theta lambda_j``; tasks listed in ``exclude`` are skipped."""
    phi = standardize_candidate(phi)
    r = phi - theta.theta @ np.asarray(lambda_hat, dtype=float)
    eps = z.z_scores - theta.theta @ fm.loadings.T
    keep = [j for j, t in enumerate(z.task_ids) if t not in set(exclude)]
    corr = np.zeros(len(keep))
    rs = np.linalg.norm(r - r.mean())
    for i, j in enumerate(keep):
        e = eps[:, j] - eps[:, j].mean()
        den = rs * np.linalg.norm(e)
        corr[i] = (r - r.mean()) @ e / den if den > 0 else 0.0
    if not keep:
        return Diagnostic("residual_correlation", ABSTAIN, {"max_abs_corr": None, "excluded": list(exclude)})
    i = int(np.argmax(np.abs(corr)))
    top = float(abs(corr[i]))
    vote = NOVEL if top > thresholds.residual_corr else REDUNDANT
    return Diagnostic(
        "residual_correlation",
        vote,
        {"max_abs_corr": top, "max_corr_task": z.task_ids[keep[i]], "excluded": list(exclude)},
    )


def profile_similarity_check(
    lambda_hat, fm: FactorModel, z: StandardizedMatrix, theta: SkillScores, phi, exclude=(), thresholds=NoveltyThresholds()
):
    """Profile cosine and residual correlation diagnostics as a pair."""
    return (
        profile_cosine_check(lambda_hat, fm, thresholds),
        residual_correlation_check(z, fm, theta, phi, lambda_hat, exclude, thresholds),
    )


def novelty_score(diagnostics, thresholds=NoveltyThresholds(), warnings=()) -> NoveltyReport:
    """Average the non-abstaining votes into a score in [-1, 1]."""
    diagnostics = list(diagnostics)
    cast = [d.vote for d in diagnostics if d.vote != ABSTAIN]
    if not cast:
        raise InconclusiveError("every diagnostic abstained")
    score = math.fsum(cast) / len(cast)
    return NoveltyReport(diagnostics, score, band(score), asdict(thresholds), warnings=list(warnings))


def assess_candidate(
    z: StandardizedMatrix,
    fm: FactorModel,
    theta: SkillScores,
    phi,
    gamma: float = 1.0,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    thresholds=NoveltyThresholds(),
) -> NoveltyReport:
    """Run every diagnostic for one candidate column.

    ``fm`` is the rotated model fitted on ``z`` and ``theta`` its skill
    scores for the same models. Tasks the collinearity diagnostic finds
    to be near copies of the candidate are left out of the residual test,
    since a copy shares the candidate's unique variance by definition.
    """
    if tuple(theta.model_ids) != tuple(z.model_ids):
        raise ValidationError("skill scores and z-score matrix list different models")
    phi = standardize_candidate(phi)
    _check_length(z, phi)
    c = fm.n_factors
    coll = collinearity_check(z, phi, thresholds)
    lam, mse_d, low_d = latent_alignment_check(theta, phi, thresholds)
    r = z.z_scores.T @ phi / (z.n_models - 1)
    copies = [t for t, v in zip(z.task_ids, r) if abs(v) > thresholds.max_r]
    cos_d, res_d = profile_similarity_check(lam, fm, z, theta, phi, copies, thresholds)
    diags = [
        coll,
        variance_delta_check(z, phi, c, tol, max_iter, thresholds, baseline=fm),
        mse_d,
        low_d,
        structural_shift_check(z, phi, c, gamma, tol, max_iter, thresholds, baseline=fm),
        cos_d,
        res_d,
    ]
    notes = ["candidate loading vector is zero; profile cosine abstained"] if cos_d.vote == ABSTAIN else []
    report = novelty_score(diags, thresholds, notes)
    h2 = float(lam @ lam)
    report.communality, report.uniqueness = h2, 1.0 - h2
    return report
