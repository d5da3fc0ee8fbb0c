import math

import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings
from hypothesis import strategies as st

from skillspace.errors import ConditioningError, ValidationError
from skillspace.stability import (
    holdout_schedule,
    leave_one_task_out,
    match_factors,
    principal_angles,
    procrustes_align,
    subsample_models,
    sweep_factor_count,
    tucker_congruence,
)


def _random_orthogonal(rng, n):
    q, r = np.linalg.qr(rng.standard_normal((n, n)))
    return q * np.sign(np.diag(r))


def test_procrustes_identity(rng):
    a = rng.standard_normal((10, 3))
    q, aligned, res = procrustes_align(a, a)
    np.testing.assert_allclose(q, np.eye(3), atol=1e-10)
    assert res < 1e-10


def test_procrustes_recovers_rotation(rng):
    a = rng.standard_normal((12, 4))
    qs = _random_orthogonal(rng, 4)
    q, aligned, res = procrustes_align(a, a @ qs.T)
    np.testing.assert_allclose(q, qs, atol=1e-8)
    assert res < 1e-8


def test_procrustes_sign_absorption(rng):
    a = rng.standard_normal((12, 3))
    b = a.copy()
    b[:, 1] *= -1
    assert procrustes_align(a, b)[2] < 1e-10


def test_procrustes_residual_bound(rng):
    a, b = rng.standard_normal((15, 3)), rng.standard_normal((15, 3))
    assert procrustes_align(a, b)[2] <= np.linalg.norm(a - b) + 1e-12


def test_principal_angle_examples():
    e = np.eye(3)
    np.testing.assert_allclose(principal_angles(e[:, :2], e[:, :2]), [0.0, 0.0], atol=1e-6)
    np.testing.assert_allclose(principal_angles(e[:, :1], e[:, 1:2]), [90.0])
    v = math.cos(math.radians(30)) * e[:, 0] + math.sin(math.radians(30)) * e[:, 2]
    np.testing.assert_allclose(principal_angles(e[:, :2], v[:, None]), [30.0], atol=1e-10)


def test_principal_angles_rank_deficient(rng):
    a = rng.standard_normal((6, 1))
    with pytest.raises(ConditioningError):
        principal_angles(np.hstack([a, a]), rng.standard_normal((6, 2)))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 4), st.integers(1, 4))
def test_principal_angles_properties(seed, c1, c2):
    rng = np.random.default_rng(seed)
    a, b = rng.standard_normal((9, c1)), rng.standard_normal((9, c2))
    ang = principal_angles(a, b)
    np.testing.assert_allclose(ang, principal_angles(b, a), atol=1e-8)
    oracle = np.sort(np.degrees(scipy.linalg.subspace_angles(a, b)))
    np.testing.assert_allclose(ang, oracle, atol=1e-7)
    mix = rng.standard_normal((c1, c1)) + 3 * np.eye(c1)
    np.testing.assert_allclose(principal_angles(a @ mix, b), ang, atol=1e-7)
    assert np.all((ang >= 0) & (ang <= 90)) and np.all(np.diff(ang) >= -1e-12)


def test_tucker_cases(rng):
    v = rng.standard_normal(8)
    assert tucker_congruence(v, v) == pytest.approx(1.0)
    assert tucker_congruence(v, -v) == pytest.approx(-1.0)
    assert tucker_congruence([1, 0], [0, 1]) == 0.0
    assert tucker_congruence(v, 7.5 * v) == pytest.approx(1.0)
    with pytest.raises(ValidationError):
        tucker_congruence(v, np.zeros(8))


def test_match_factors_permutation_and_sign(rng):
    a = rng.standard_normal((10, 3))
    b = a[:, [2, 0, 1]] * [1, -1, 1]
    pairs = match_factors(a, b)
    assert [(i, j) for i, j, _ in pairs] == [(0, 1), (1, 2), (2, 0)]
    assert all(p == pytest.approx(1.0) for _, _, p in pairs)


def test_sweep_self_and_under_extraction(suite):
    rep = sweep_factor_count(suite.z, 8, [8, 6, 10])
    runs = {r.n_factors: r for r in rep.runs}
    assert max(runs[8].matched_angles) < 1.0
    assert max(runs[6].matched_angles) > 40.0
    assert len(runs[10].matched_angles) == 8
    assert max(runs[10].matched_angles) < 27.0
    assert min(runs[10].extra_angles) > 60.0


def test_subsample_determinism_and_threshold(suite):
    a = subsample_models(suite.z, 0.3, 5, seed=11, n_factors=8)
    b = subsample_models(suite.z, 0.3, 5, seed=11, n_factors=8, jobs=3)
    assert a.to_json() == b.to_json()
    assert a.summary()["max_angle"] < 15.0


def test_subsample_preconditions(suite):
    with pytest.raises(ValidationError):
        subsample_models(suite.z, 0.0, 5, seed=0, n_factors=8)
    with pytest.raises(ValidationError):
        subsample_models(suite.z, 0.6, 5, seed=0, n_factors=8)
    small = suite.z.subset(rows=range(30))
    with pytest.raises(ValidationError):
        subsample_models(small, 0.5, 2, seed=0, n_factors=8)


def test_holdout_schedule_coverage():
    sched = holdout_schedule(20, 0.3, 4, seed=3)
    assert len(sched) == 4 and all(len(s) == 6 for s in sched)
    assert set(np.concatenate(sched)) == set(range(20))
    again = holdout_schedule(20, 0.3, 4, seed=3)
    assert all(np.array_equal(x, y) for x, y in zip(sched, again))


def test_leave_one_task_out(suite):
    rep = leave_one_task_out(suite.z, 8, jobs=2)
    assert len(rep.runs) == suite.z.n_tasks
    assert rep.summary()["max_angle"] <= 5.0


def _duplicate_run(suite):
    z = suite.z
    dup = z.with_column("copy", z.z_scores[:, 0])
    return leave_one_task_out(dup, 8).runs[-1]


@pytest.mark.xfail(
    strict=True,
    reason="an exact copy pins its source task at the Heywood cap; that factor tilts about 4.7 degrees",
)
def test_leave_one_task_out_duplicate_column(suite):
    assert max(_duplicate_run(suite).matched_angles) < 1.0


def test_leave_one_task_out_duplicate_leaves_other_factors(suite):
    angles = sorted(_duplicate_run(suite).matched_angles)
    assert angles[-2] < 1.0


def test_report_serialization(suite):
    rep = sweep_factor_count(suite.z.subset(cols=range(12)), 3, [2, 4])
    doc = rep.to_dict()
    assert doc["kind"] and len(doc["runs"]) == 2
    assert "max" in rep.table()
