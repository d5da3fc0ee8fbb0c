import json

import numpy as np
import pytest

from skillspace.data import (
    PerformanceMatrix,
    correlation_matrix,
    load_leaderboard,
    normalize_scores,
    standardize,
    standardize_array,
    write_leaderboard,
)
from skillspace.errors import (
    AlignmentError,
    DegenerateError,
    InputError,
    MissingDataError,
    ParseError,
    RangeError,
    ValidationError,
)


def _write(tmp_path, text, name="lb.csv"):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return p


def test_load_full_csv(tmp_path):
    pm = load_leaderboard(_write(tmp_path, "model,a,b\nm1,1,2\nm2,3,4\nm3,5,6\n"))
    assert pm.shape == (3, 2)
    assert pm.model_ids == ("m1", "m2", "m3")
    assert pm.task_ids == ("a", "b")
    assert not pm.missing.any()


def test_load_csv_with_empty_cell(tmp_path):
    pm = load_leaderboard(_write(tmp_path, "model,a,b\nm1,1,\nm2,3,4\nm3,5,6\n"))
    assert pm.shape == (3, 2)
    assert pm.missing.sum() == 1 and pm.missing[0, 1]


def test_duplicate_task_header_rejected(tmp_path):
    with pytest.raises(ValidationError):
        load_leaderboard(_write(tmp_path, "model,a,a\nm1,1,2\nm2,3,4\nm3,5,6\n"))


def test_parse_error_carries_location(tmp_path):
    with pytest.raises(ParseError) as exc:
        load_leaderboard(_write(tmp_path, "model,a,b\nm1,1,2\nm2,x,4\n"))
    assert exc.value.row == 3 and exc.value.column == 2
    assert "lb.csv" in str(exc.value)


def test_ragged_row_is_parse_error(tmp_path):
    with pytest.raises(ParseError, match="row 2"):
        load_leaderboard(_write(tmp_path, "model,a,b\nm1,1\n"))


def test_out_of_range_rejected(tmp_path):
    with pytest.raises(RangeError):
        load_leaderboard(_write(tmp_path, "model,a\nm1,11\nm2,3\nm3,4\n"))


def test_json_round_trip(tmp_path):
    pm = PerformanceMatrix(["m1", "m2", "m3"], ["a", "b"], [[1, np.nan], [2, 3], [4, 5]])
    path = tmp_path / "lb.json"
    write_leaderboard(pm, path)
    assert json.loads(path.read_text())["scores"][0][1] is None
    back = load_leaderboard(path)
    assert back.model_ids == pm.model_ids
    np.testing.assert_array_equal(back.missing, pm.missing)
    np.testing.assert_allclose(back.scores[~back.missing], pm.scores[~pm.missing])


def test_csv_round_trip(tmp_path):
    pm = PerformanceMatrix(["m1", "m2", "m3"], ["a", "b"], [[1.25, np.nan], [2, 3], [4, 5]])
    write_leaderboard(pm, tmp_path / "x.csv")
    back = load_leaderboard(tmp_path / "x.csv")
    np.testing.assert_array_equal(back.missing, pm.missing)
    np.testing.assert_allclose(back.scores[~back.missing], pm.scores[~pm.missing])


@pytest.mark.parametrize(
    "raw, kind, expected", [(0.85, "unit_fraction", 8.5), (85, "percent", 8.5), (7, "scale_0_10", 7.0)]
)
def test_normalize_scores(raw, kind, expected):
    assert normalize_scores(raw, kind) == pytest.approx(expected, abs=1e-12)


def test_normalize_out_of_range():
    with pytest.raises(RangeError):
        normalize_scores(1.2, "unit_fraction")


def test_normalize_monotone():
    x = np.linspace(0, 100, 101)
    assert np.all(np.diff(normalize_scores(x, "percent")) >= 0)


def test_standardize_three_points():
    pm = PerformanceMatrix(["a", "b", "c"], ["t"], [[4], [6], [8]])
    sm = standardize(pm)
    np.testing.assert_allclose(sm.z_scores[:, 0], [-1, 0, 1], atol=1e-15)
    assert sm.task_means[0] == 6 and sm.task_stds[0] == pytest.approx(2.0)


def test_constant_column_is_degenerate_and_named():
    pm = PerformanceMatrix(["a", "b", "c"], ["t", "flat"], [[1, 5], [2, 5], [3, 5]])
    with pytest.raises(DegenerateError, match="flat"):
        standardize(pm)
    assert issubclass(DegenerateError, InputError)


def test_standardize_idempotent(rng):
    raw = rng.uniform(0, 10, size=(30, 4))
    sm = standardize_array(raw, [f"m{i}" for i in range(30)], list("abcd"))
    again = standardize_array(sm.z_scores, sm.model_ids, sm.task_ids)
    np.testing.assert_allclose(again.z_scores, sm.z_scores, atol=1e-12)


def test_standardized_invariants_and_round_trip(rng):
    raw = rng.uniform(0, 10, size=(50, 6))
    pm = PerformanceMatrix([f"m{i}" for i in range(50)], [f"t{j}" for j in range(6)], raw)
    sm = standardize(pm)
    assert np.abs(sm.z_scores.mean(axis=0)).max() < 1e-10
    assert np.abs(sm.z_scores.std(axis=0, ddof=1) - 1).max() < 1e-10
    np.testing.assert_allclose(sm.destandardize(), raw, atol=1e-12)


def test_missing_policy():
    pm = PerformanceMatrix(["a", "b", "c"], ["t", "u"], [[1, np.nan], [2, 4], [3, 6]])
    with pytest.raises(MissingDataError, match="'a'"):
        standardize(pm)
    sm = standardize(pm, "mean_impute")
    assert sm.destandardize()[0, 1] == pytest.approx(5.0)


def test_correlation_identical_columns_and_diagonal(rng):
    x = rng.standard_normal(20)
    sm = standardize_array(np.column_stack([x, x, rng.standard_normal(20)]), [str(i) for i in range(20)], "abc")
    r = correlation_matrix(sm).r
    assert r[0, 1] == pytest.approx(1.0, abs=1e-12)
    np.testing.assert_array_equal(np.diag(r), 1.0)
    assert np.all(np.abs(r) <= 1) and np.allclose(r, r.T)


def test_correlation_matches_gram_and_numpy(rng):
    raw = rng.standard_normal((40, 5))
    sm = standardize_array(raw, [str(i) for i in range(40)], "abcde")
    r = correlation_matrix(sm).r
    gram = sm.z_scores.T @ sm.z_scores / 39
    np.fill_diagonal(gram, 1.0)
    np.testing.assert_allclose(r, gram, atol=1e-10)
    np.testing.assert_allclose(r, np.corrcoef(raw, rowvar=False), atol=1e-10)


def test_independent_columns_weakly_correlated():
    m = 10000
    raw = np.random.default_rng(7).standard_normal((m, 2))
    sm = standardize_array(raw, [str(i) for i in range(m)], "ab")
    assert abs(correlation_matrix(sm).r[0, 1]) < 3 / np.sqrt(m)


def test_correlation_needs_three_models():
    sm = standardize_array(np.array([[1.0, 2.0], [2.0, 1.0]]), ["a", "b"], ["x", "y"])
    with pytest.raises(ValidationError):
        correlation_matrix(sm)


def test_subset_and_with_column(rng):
    raw = rng.uniform(0, 10, size=(12, 3))
    sm = standardize_array(raw, [f"m{i}" for i in range(12)], "abc")
    sub = sm.subset(rows=range(6), cols=[0, 2])
    assert sub.task_ids == ("a", "c")
    np.testing.assert_allclose(sub.destandardize(), raw[:6][:, [0, 2]], atol=1e-12)
    grown = sm.with_column("d", rng.standard_normal(12))
    assert grown.task_ids[-1] == "d"
    with pytest.raises(ValidationError, match="has 5 rows, expected 12"):
        sm.with_column("d", np.ones(5))
    with pytest.raises(AlignmentError):
        sm.task_index(["zz"])


def test_arrays_are_read_only():
    pm = PerformanceMatrix(["a", "b"], ["t"], [[1], [2]])
    with pytest.raises(ValueError):
        pm.scores[0, 0] = 3
