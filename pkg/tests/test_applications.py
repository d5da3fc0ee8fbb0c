import numpy as np
import pytest

from skillspace.applications import (
    default_k,
    evaluate_selection,
    maxmin_sample_models,
    predict_for_new_task,
    profile_new_model,
    select_diverse_tasks,
    training_mse_band,
)
from skillspace.errors import AlignmentError, UnderdeterminedError, ValidationError
from skillspace.paf import FactorModel
from skillspace.scores import SkillScores, project_model


def _fm(lam, ids=None):
    lam = np.asarray(lam, dtype=float)
    ids = ids or [f"t{j}" for j in range(lam.shape[0])]
    return FactorModel(ids, lam, np.ones(lam.shape[1]), 1, True, 1e-4)


def test_select_diverse_tasks_sort_and_ties():
    fm = _fm(np.sqrt([[0.9], [0.8], [0.7]]))
    assert select_diverse_tasks(fm, 2) == ["t0", "t1"]
    assert select_diverse_tasks(fm, 3) == ["t0", "t1", "t2"]
    tied = _fm(np.sqrt([[0.5], [0.9], [0.5], [0.5]]))
    assert select_diverse_tasks(tied, 3) == ["t1", "t0", "t2"]
    with pytest.raises(ValidationError):
        select_diverse_tasks(fm, 4)


def test_default_k(fitted):
    _, fm, _ = fitted
    assert default_k(8) == 12
    assert len(select_diverse_tasks(fm)) == 12


def test_profile_at_training_means_is_zero(suite, fitted):
    _, fm, _ = fitted
    tasks = select_diverse_tasks(fm)
    p = profile_new_model(fm, tasks, suite.z.task_means[suite.z.task_index(tasks)], suite.z)
    np.testing.assert_allclose(p.theta_hat, 0.0, atol=1e-12)
    assert p.mse == pytest.approx(0.0, abs=1e-20)


def test_profile_matches_least_squares_oracle(suite, fitted):
    _, fm, _ = fitted
    tasks = select_diverse_tasks(fm)
    idx = suite.z.task_index(tasks)
    raw = suite.z.destandardize()[17, idx]
    p = profile_new_model(fm, tasks, raw, suite.z)
    zk = suite.z.z_scores[17, idx]
    np.testing.assert_allclose(p.theta_hat, np.linalg.pinv(fm.loadings[idx]) @ zk, atol=1e-8)
    full = fm.loadings @ np.array(p.theta_hat)
    np.testing.assert_allclose(list(p.reconstructed_z.values()), full, atol=1e-12)
    np.testing.assert_allclose(list(p.reconstructed_scores.values()), suite.z.destandardize(full), atol=1e-12)


@pytest.mark.xfail(strict=True, reason="least-squares skills from 12 tasks differ from regression scores over 40 tasks by far more than 0.1")
def test_clone_profile_matches_training_skills(suite, fitted):
    _, fm, theta = fitted
    tasks = select_diverse_tasks(fm)
    p = profile_new_model(fm, tasks, suite.z.destandardize()[5, suite.z.task_index(tasks)], suite.z)
    assert np.abs(np.array(p.theta_hat) - theta.theta[5]).max() < 0.1


def test_profile_errors(suite, fitted):
    _, fm, _ = fitted
    with pytest.raises(AlignmentError):
        profile_new_model(fm, ["nope"] * 8, np.ones(8), suite.z)
    with pytest.raises(UnderdeterminedError):
        profile_new_model(fm, list(fm.task_ids[:5]), np.full(5, 5.0), suite.z)


def test_training_band_flags_about_one_in_six(suite, fitted):
    _, fm, _ = fitted
    tasks = select_diverse_tasks(fm)
    mu, sd, mses = training_mse_band(fm, suite.z, tasks)
    frac = float(np.mean(mses > mu + sd))
    # one-sided normal tail 0.159 plus two binomial standard errors
    assert frac <= 0.159 + 2 * np.sqrt(0.159 * 0.841 / len(mses))
    assert np.all(mses >= 0)


def test_constructed_anomaly_is_flagged(suite, fitted):
    _, fm, _ = fitted
    tasks = select_diverse_tasks(fm)
    idx = suite.z.task_index(tasks)
    rng = np.random.default_rng(99)
    raw = suite.z.destandardize(rng.standard_normal(suite.z.n_tasks))[idx]
    p = profile_new_model(fm, tasks, raw, suite.z)
    assert p.mse > p.band[0] + p.band[1]
    assert p.flagged and p.flagged_mse
    assert '"flagged": true' in p.to_json()


def test_maxmin_line():
    pts = SkillScores(np.arange(11, dtype=float)[:, None], [f"m{i:02d}" for i in range(11)])
    assert maxmin_sample_models(pts, 2) == ["m00", "m10"]
    assert maxmin_sample_models(pts, 3) == ["m00", "m10", "m05"]
    assert sorted(maxmin_sample_models(pts, 11)) == list(pts.model_ids)
    with pytest.raises(ValidationError):
        maxmin_sample_models(pts, 12)


def test_maxmin_deterministic(fitted):
    _, _, theta = fitted
    assert maxmin_sample_models(theta) == maxmin_sample_models(theta)
    assert len(set(maxmin_sample_models(theta))) == 12


def test_predict_in_span_task(fitted):
    _, _, theta = fitted
    sampled = maxmin_sample_models(theta)
    lam = np.array([0.6, 0.0, 0.3, 0.0, 0.0, 0.2, 0.0, 0.0])
    phi = 3.0 + theta.theta @ lam
    res = predict_for_new_task(theta, sampled, phi[theta.rows(sampled)])
    rest = list(res.predictions)
    pred = np.array([res.predictions[m] for m in rest])
    assert np.corrcoef(pred, phi[theta.rows(rest)])[0, 1] > 0.99
    assert sorted(res.ranking) == sorted(rest)
    assert all(res.predictions[a] >= res.predictions[b] for a, b in zip(res.ranking, res.ranking[1:]))


@pytest.mark.xfail(strict=True, reason="a training task with uniqueness near 0.3 is not in the span of the skill scores")
def test_predict_training_task_near_perfect(suite, fitted):
    _, _, theta = fitted
    sampled = maxmin_sample_models(theta)
    phi = suite.z.z_scores[:, 3]
    res = predict_for_new_task(theta, sampled, phi[theta.rows(sampled)])
    rest = list(res.predictions)
    pred = np.array([res.predictions[m] for m in rest])
    assert np.corrcoef(pred, phi[theta.rows(rest)])[0, 1] > 0.99


def test_predict_zero_loadings_falls_back_to_order():
    rng = np.random.default_rng(0)
    t = rng.standard_normal((20, 2))
    t -= t.mean(axis=0)
    theta = SkillScores(t, [f"m{i:02d}" for i in range(20)])
    sampled = [f"m{i:02d}" for i in range(5)]
    q, _ = np.linalg.qr(np.column_stack([np.ones(5), t[:5]]))
    phi = rng.standard_normal(5)
    phi -= q @ (q.T @ phi)
    res = predict_for_new_task(theta, sampled, phi)
    assert res.warnings and all(v == 0 for v in res.predictions.values())
    assert res.ranking == [f"m{i:02d}" for i in range(5, 20)]


def test_predict_underdetermined(fitted):
    _, _, theta = fitted
    with pytest.raises(UnderdeterminedError):
        predict_for_new_task(theta, list(theta.model_ids[:4]), np.arange(4.0))


def test_predict_permutation_equivariant(fitted):
    _, _, theta = fitted
    sampled = maxmin_sample_models(theta)
    phi = np.random.default_rng(2).standard_normal(12)
    perm = np.random.default_rng(3).permutation(len(theta.model_ids))
    shuffled = SkillScores(theta.theta[perm], [theta.model_ids[i] for i in perm])
    a = predict_for_new_task(theta, sampled, phi)
    b = predict_for_new_task(shuffled, sampled, phi)
    for m, v in a.predictions.items():
        assert b.predictions[m] == pytest.approx(v, abs=1e-12)


def test_evaluate_selection_high_communality():
    from skillspace.synthetic import make_suite

    s = make_suite(low=0.93, high=0.97, seed=0)
    out = evaluate_selection(s.z, 8)
    assert out["k"] == 12 and len(out["per_task"]) == 40
    assert out["mean_r"] > 0.85
