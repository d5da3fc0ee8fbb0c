import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from skillspace.diagnostics import (
    cronbach_alpha,
    mahalanobis_distances,
    mahalanobis_outliers,
    mcdonald_omega,
    omega_from_loadings,
    pca_project_2d,
    rank_agreement,
    reliability_report,
    select_items,
    shrinkage_intensity,
    skill_variability,
    spearman_pvalue_normal,
    spearman_rho,
    uniqueness_report,
)
from skillspace.errors import ConditioningError, DegenerateError, ValidationError
from skillspace.paf import FactorModel, loading_zscores
from skillspace.scores import SkillScores


def _fm(lam):
    lam = np.asarray(lam, dtype=float)
    return FactorModel([f"t{j}" for j in range(lam.shape[0])], lam, np.ones(lam.shape[1]), 1, True, 1e-4)


def _equicorrelated_items(k, rho):
    # exact sample correlation rho: shared factor plus orthonormalized noise
    m = 40
    rng = np.random.default_rng(0)
    base = rng.standard_normal((m, k + 1))
    base -= base.mean(axis=0)
    q, _ = np.linalg.qr(base)
    f, e = q[:, :1], q[:, 1:]
    return np.sqrt(rho) * f + np.sqrt(1 - rho) * e


def test_uniqueness_report():
    rep = uniqueness_report(_fm(np.sqrt([[1.0], [0.62], [0.5]])))
    np.testing.assert_allclose(rep.uniqueness, [0.0, 0.38, 0.5], atol=1e-12)
    assert rep.flagged == [False, False, True]
    assert rep.max_task == ("t2", pytest.approx(0.5))


def test_alpha_identical_columns():
    x = np.random.default_rng(1).standard_normal(20)
    assert cronbach_alpha(np.column_stack([x] * 4)) == pytest.approx(1.0, abs=1e-12)


def test_alpha_equicorrelated_closed_form():
    items = _equicorrelated_items(4, 0.5)
    np.testing.assert_allclose(np.corrcoef(items, rowvar=False)[0, 1], 0.5, atol=1e-12)
    assert cronbach_alpha(items) == pytest.approx(0.8, abs=1e-10)


def test_alpha_two_items_identity():
    items = _equicorrelated_items(2, 0.3)
    assert cronbach_alpha(items) == pytest.approx(2 * 0.3 / 1.3, abs=1e-10)


def test_alpha_uncorrelated_near_zero():
    x = np.random.default_rng(2).standard_normal((5000, 4))
    assert abs(cronbach_alpha(x)) < 0.1


def test_alpha_errors():
    with pytest.raises(DegenerateError):
        cronbach_alpha(np.column_stack([np.arange(5.0), np.ones(5)]))
    with pytest.raises(ValidationError):
        cronbach_alpha(np.ones((5, 1)))


def test_omega_formula_cases():
    assert omega_from_loadings([0.8] * 4, [0.36] * 4) == pytest.approx(10.24 / 11.68, abs=1e-12)
    assert omega_from_loadings([1.0] * 4, [0.0] * 4) == 1.0
    assert omega_from_loadings([0.0] * 4, [1.0] * 4) == 0.0


def test_omega_refit_on_equicorrelated_items():
    assert mcdonald_omega(_equicorrelated_items(4, 0.64)) == pytest.approx(0.8767, abs=1e-3)


def test_omega_scale_invariant():
    items = _equicorrelated_items(5, 0.4) + np.random.default_rng(3).normal(0, 0.05, (40, 5))
    scaled = items * np.array([1.0, 3.0, 0.2, 7.0, 2.5])
    assert mcdonald_omega(scaled) == pytest.approx(mcdonald_omega(items), abs=1e-10)


def test_omega_needs_three_items():
    with pytest.raises(ValidationError):
        mcdonald_omega(np.random.default_rng(0).standard_normal((10, 2)))


def test_item_selection_padding_when_loadings_equal():
    col = np.full(10, 0.5)
    z = loading_zscores(col[:, None])[:, 0]
    np.testing.assert_array_equal(z, 0.0)
    assert select_items(col, z, 0.8, 4) == [0, 1, 2, 3]


def test_reliability_on_congeneric_factors(suite, fitted):
    _, fm, _ = fitted
    rep = reliability_report(fm, suite.z)
    assert len(rep.per_factor) == 8
    for row in rep.per_factor:
        assert len(row["items"]) >= 4
        assert row["alpha"] >= 0.8 and row["omega"] >= 0.8
        assert row["alpha"] <= 1 and 0 <= row["omega"] <= 1
    assert rep.alpha <= 1 and 0 <= rep.omega <= 1
    assert "pooled" in rep.table()


def test_reliability_skips_small_models(suite):
    fm = _fm(np.array([[0.8], [0.7], [0.6]]))
    sub = suite.z.subset(cols=[0, 1, 2])
    fm = FactorModel(sub.task_ids, fm.loadings, fm.eigenvalues, 1, True, 1e-4)
    with pytest.raises(Exception, match="no factor"):
        reliability_report(fm, sub)


def test_mahalanobis_basic_cases():
    pts = np.array([[0.0, 0.0], [1.0, 0.0]])
    np.testing.assert_allclose(mahalanobis_distances(pts, [0, 0], np.eye(2)), [0.0, 1.0])


def test_mahalanobis_singular_needs_shrinkage():
    x = np.random.default_rng(4).standard_normal((5, 8))
    with pytest.raises(ConditioningError):
        mahalanobis_outliers(x)
    rep = mahalanobis_outliers(x, shrinkage="auto")
    assert all(np.isfinite(rep.distances))


def test_chi2_threshold_matches_independent_quantile():
    # invert the regularized lower gamma function with mpmath
    d, q = 8, 0.995
    oracle = float(mpmath.findroot(lambda t: mpmath.gammainc(d / 2, 0, t / 2, regularized=True) - q, 22.0))
    rep = mahalanobis_outliers(np.random.default_rng(5).standard_normal((100, d)), quantile=q)
    assert rep.threshold == pytest.approx(oracle, abs=1e-8)
    assert rep.threshold == pytest.approx(21.95, abs=5e-3)
    for dist, flag in zip(rep.distances, rep.flagged):
        assert flag == (dist**2 > rep.threshold)


def test_mahalanobis_affine_invariance(rng):
    x = rng.standard_normal((60, 3))
    a = rng.standard_normal((3, 3)) + 3 * np.eye(3)
    y = x @ a.T + np.array([1.0, -2.0, 5.0])
    d1 = mahalanobis_outliers(x).distances
    d2 = mahalanobis_outliers(y).distances
    np.testing.assert_allclose(d1, d2, atol=1e-8)


def test_mahalanobis_reference_and_leave_one_out(rng):
    x = rng.standard_normal((50, 2))
    far = np.vstack([x, [[8.0, 8.0]]])
    loo = mahalanobis_outliers(far, leave_one_out=True)
    assert loo.flagged[-1]
    ref = mahalanobis_outliers([[8.0, 8.0], [0.0, 0.0]], reference=x)
    assert ref.flagged == [True, False]


def test_shrinkage_intensity_range(rng):
    s = shrinkage_intensity(rng.standard_normal((30, 5)))
    assert 0 <= s <= 1
    strong = rng.standard_normal((200, 1)) @ np.ones((1, 5)) + 0.1 * rng.standard_normal((200, 5))
    assert shrinkage_intensity(strong) < s


def test_spearman_cases():
    x = [1, 2, 3, 4, 5]
    assert spearman_rho(x, x) == pytest.approx(1.0)
    assert spearman_rho(x, x[::-1]) == pytest.approx(-1.0)
    with pytest.raises(DegenerateError):
        spearman_rho(x, [2, 2, 2, 2, 2])
    with pytest.raises(ValidationError):
        spearman_rho([1, 2], [1, 2])


def test_spearman_ties_match_scipy(rng):
    from scipy import stats

    x = rng.integers(0, 5, 30).astype(float)
    y = rng.integers(0, 5, 30).astype(float)
    assert spearman_rho(x, y) == pytest.approx(stats.spearmanr(x, y).statistic, abs=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.integers(-100, 100), min_size=5, max_size=30, unique=True))
def test_spearman_monotone_invariance(xs):
    x = np.array(xs, dtype=float)
    y = np.sin(np.arange(len(xs)))
    assert spearman_rho(np.exp(x / 50), y) == pytest.approx(spearman_rho(x, y), abs=1e-12)


def test_spearman_pvalue():
    assert spearman_pvalue_normal(0.0, 13) == pytest.approx(1.0)
    assert spearman_pvalue_normal(0.73, 13) == pytest.approx(math.erfc(0.73 * math.sqrt(12) / math.sqrt(2)))


def test_rank_agreement(fitted):
    _, _, theta = fitted
    ext = {m: float(v) for m, v in zip(theta.model_ids[:20], theta.theta[:20].mean(axis=1))}
    out = rank_agreement(theta, ext)
    assert out["n"] == 20 and out["rho"] == pytest.approx(1.0)
    with pytest.raises(ValidationError):
        rank_agreement(theta, {"model-000": 1.0})


def test_pca_projection(rng):
    pts = rng.standard_normal((30, 2)) * [3.0, 1.0]
    pts -= pts.mean(axis=0)
    proj = pca_project_2d(SkillScores(pts, [str(i) for i in range(30)]))
    # recovered up to rotation/reflection: pairwise distances preserved
    d0 = np.linalg.norm(pts[:, None] - pts[None], axis=-1)
    d1 = np.linalg.norm(proj.coords[:, None] - proj.coords[None], axis=-1)
    np.testing.assert_allclose(d0, d1, atol=1e-10)
    np.testing.assert_allclose(proj.explained_ratio.sum(), 1.0)


def test_pca_duplicates_and_variance_share(fitted):
    _, _, theta = fitted
    th = np.vstack([theta.theta, theta.theta[:1]])
    proj = pca_project_2d(SkillScores(th, list(theta.model_ids) + ["copy"]))
    np.testing.assert_allclose(proj.coords[0], proj.coords[-1])
    w = np.sort(np.linalg.eigvalsh(np.cov(th, rowvar=False)))[::-1]
    np.testing.assert_allclose(proj.explained_ratio, w[:2] / w.sum(), atol=1e-12)


def test_skill_variability():
    th = SkillScores([[1.0, 1.0, 1.0], [-1.0, 0.0, 1.0]], ["a", "b"])
    np.testing.assert_allclose(skill_variability(th), [0.0, 1.0])
    np.testing.assert_allclose(skill_variability(SkillScores([[-1.0, 1.0]], ["x"])), [math.sqrt(2)])
    general = SkillScores([[0.5] * 8, [3.0, -2, 0, 0, 0, 0, 0, 0]], ["generalist", "specialist"])
    v = skill_variability(general)
    assert v[0] < v[1]
