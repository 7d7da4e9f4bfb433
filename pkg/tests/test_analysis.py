import math

import numpy as np
import pytest
from hypothesis import assume, given, strategies as st

from oracles import brute_ranks, brute_spearman
from sentprobe.analysis import (
    CorrelationMatrix,
    ScoreTable,
    average_rank,
    average_ranks,
    correlation_matrix,
    cross_variant_spearman,
    id_perm_consistency,
    load_fixture,
    mean_task_ranks,
    rank_encoders,
    rounded_ranks,
    spearman,
    summarize,
)
from sentprobe.errors import DomainError, FormatError

values = st.lists(st.integers(-5, 5), min_size=2, max_size=12)


def test_spearman_examples():
    assert spearman([1, 2, 3], [10, 20, 30]) == pytest.approx(1.0)
    assert spearman([1, 2, 3], [3, 2, 1]) == pytest.approx(-1.0)
    # frozen from tests/oracles.py: ranks [1, 2.5, 2.5, 4] vs [1, 3, 2, 4] -> 3 / sqrt(10)
    assert spearman([1, 2, 2, 4], [1, 3, 2, 4]) == pytest.approx(0.9486832980505138, abs=1e-12)


def test_spearman_undefined_cases():
    assert spearman([1], [2]) is None
    assert spearman([1, 1, 1], [1, 2, 3]) is None
    with pytest.raises(DomainError):
        spearman([1, 2], [1])


@given(values, st.data())
def test_spearman_symmetric_and_matches_oracle(xs, data):
    ys = data.draw(st.lists(st.integers(-5, 5), min_size=len(xs), max_size=len(xs)))
    r, expected = spearman(xs, ys), brute_spearman(xs, ys)
    assert spearman(ys, xs) == r
    if expected is None:
        assert r is None
    else:
        assert r == pytest.approx(expected, abs=1e-9)
        assert -1 <= r <= 1


@given(st.lists(st.floats(-1e3, 1e3), min_size=2, max_size=10, unique=True))
def test_spearman_self_and_monotone_invariance(xs):
    assert spearman(xs, xs) == pytest.approx(1.0)
    transformed = [math.exp(x / 1e3) * 3 + 1 for x in xs]
    assume(len(set(transformed)) == len(xs))
    assert spearman(xs, transformed) == pytest.approx(1.0)


@given(values)
def test_average_ranks_matches_counting(xs):
    assert list(average_ranks(xs)) == pytest.approx(brute_ranks(xs))


def table(rows, cols, vals, hib=None):
    return ScoreTable(rows, cols, np.array(vals, float), hib or [])


def test_rank_encoders_examples():
    t = table(["r"], ["a"], [[3.0]])
    assert rank_encoders(t, "r") == {"a": 1.0}
    t = table(["r"], ["a", "b", "c"], [[2.0, 2.0, 1.0]])
    assert rank_encoders(t, "r") == {"a": 1.5, "b": 1.5, "c": 3.0}
    t = table(["err"], ["a", "b"], [[0.1, 0.3]], [False])
    assert rank_encoders(t, "err") == {"a": 1.0, "b": 2.0}
    with pytest.raises(KeyError):
        rank_encoders(t, "nope")


@given(st.lists(st.integers(0, 100), min_size=2, max_size=8))
def test_rank_encoders_invariant_under_increasing_rescale(row):
    cols = [f"e{i}" for i in range(len(row))]
    a = rank_encoders(table(["r"], cols, [row]), "r")
    b = rank_encoders(table(["r"], cols, [[2 * v + 7 for v in row]]), "r")
    assert a == b


def test_ranking_by_id_on_reference_table():
    ranks = rank_encoders(load_fixture("reference_metrics"), "Id")
    assert list(ranks) == ["InferSent", "QuickThought", "LASER", "Avg+Max+Hier", "Avg", "Hier", "SBERT", "Sent2Vec", "GEM"]
    assert list(ranks.values()) == [float(i) for i in range(1, 10)]


def test_average_rank_single_task_and_ties():
    t = table(["r"], ["a", "b", "c"], [[1.0, 3.0, 2.0]])
    assert average_rank(t) == rank_encoders(t, "r")
    t = table(["r", "s"], ["a", "b"], [[1.0, 1.0], [5.0, 5.0]])
    assert average_rank(t) == {"a": 1.5, "b": 1.5}


def test_average_rank_skips_missing_cells_and_empty_encoders():
    t = table(["r", "s"], ["a", "b", "c"], [[1.0, 2.0, math.nan], [3.0, 1.0, math.nan]])
    assert mean_task_ranks(t) == {"a": 1.5, "b": 1.5}
    assert "c" not in average_rank(t)


def test_rounded_ranks():
    assert rounded_ranks({"x": 2.5, "y": 1.0, "z": 2.5}) == {"y": 1, "x": 2, "z": 3}


def test_correlation_matrix_identity_row():
    diag = table(["d"], ["a", "b", "c", "e"], [[1, 4, 2, 3]])
    down = table(["t", "u"], ["a", "b", "c", "e"], [[1, 4, 2, 3], [4, 3, 2, 1]])
    m = correlation_matrix(diag, down)
    assert m.rho[0, 0] == pytest.approx(1.0)
    assert m.rho.shape == (1, 2)


def test_correlation_matrix_needs_three_common_encoders():
    with pytest.raises(DomainError):
        correlation_matrix(table(["d"], ["a", "b"], [[1, 2]]), table(["t"], ["a", "b"], [[1, 2]]))


def test_correlation_matrix_pairwise_deletion():
    diag = table(["d"], ["a", "b", "c", "e"], [[1, 2, 3, math.nan]])
    down = table(["t"], ["a", "b", "c", "e"], [[1, 2, 3, 4]])
    assert correlation_matrix(diag, down).rho[0, 0] == pytest.approx(1.0)


def test_fixture_correlations_match_oracle():
    diag, down = load_fixture("reference_metrics"), load_fixture("reference_downstream")
    m = correlation_matrix(diag, down)
    assert m.encoders == ["Avg", "GEM", "Hier", "Avg+Max+Hier", "Sent2Vec", "InferSent", "QuickThought", "SBERT"]
    for i, d in enumerate(m.diagnostics):
        xs = [diag.row(d)[diag.cols.index(e)] for e in m.encoders]
        for j, t in enumerate(m.tasks):
            ys = [down.row(t)[down.cols.index(e)] for e in m.encoders]
            assert m.rho[i, j] == pytest.approx(brute_spearman(xs, ys), abs=1e-12)
    assert np.all((m.rho >= -1) & (m.rho <= 1))


def test_summarize():
    m = CorrelationMatrix(["d", "e"], ["t1", "t2"], np.array([[0.5, 0.7], [np.nan, np.nan]]))
    s = summarize(m, "d")
    assert s["mean_rho"] == pytest.approx(0.6) and s["min_rho"] == 0.5
    one = CorrelationMatrix(["d"], ["t"], np.array([[0.3]]))
    assert summarize(one, "d") == {"mean_rho": 0.3, "min_rho": 0.3}
    with pytest.raises(DomainError):
        summarize(m, "e")
    assert m.summary()["e"] == {"mean_rho": None, "min_rho": None}


def test_id_perm_consistency_flags_three_rows():
    rows = {r["encoder"]: r for r in id_perm_consistency(load_fixture("reference_metrics"))}
    assert {e for e, r in rows.items() if not r["consistent"]} == {"Sent2Vec", "LASER", "Avg+Max+Hier"}


def test_csv_round_trip_with_missing_and_direction(tmp_path):
    t = table(["acc", "err"], ["a", "b"], [[1.5, math.nan], [0.2, 0.1]], [True, False])
    t.to_csv(tmp_path / "t.csv")
    text = (tmp_path / "t.csv").read_text()
    assert text.startswith("#direction:+,-\n")
    back = ScoreTable.from_csv(tmp_path / "t.csv")
    assert back.rows == t.rows and back.cols == t.cols and back.higher_is_better == [True, False]
    np.testing.assert_array_equal(back.values, t.values)


def test_direction_row_accepts_unicode_minus():
    t = ScoreTable.from_text("#direction: +, −\ntask,a,b\nx,1,2\ny,3,4\n")
    assert t.higher_is_better == [True, False]


def test_malformed_tables():
    with pytest.raises(FormatError):
        ScoreTable.from_text("task,a,b\nx,1\n")
    with pytest.raises(FormatError):
        ScoreTable.from_text("task,a\nx,abc\n")
    with pytest.raises(FormatError):
        ScoreTable.from_text("#direction:+\ntask,a\nx,1\ny,2\n")


def test_cross_variant_spearman():
    a = {"e1": {"Id": 1.0, "BLEU": 3.0}, "e2": {"Id": 2.0, "BLEU": 2.0}, "e3": {"Id": 3.0, "BLEU": 1.0}}
    b = {"e1": {"Id": 10.0, "BLEU": 1.0}, "e2": {"Id": 20.0, "BLEU": 2.0}, "e3": {"Id": 30.0, "BLEU": 3.0}}
    assert cross_variant_spearman(a, b) == {"BLEU": pytest.approx(-1.0), "Id": pytest.approx(1.0)}


def test_reference_summary_fixture_and_recomputation():
    from sentprobe.analysis import load_reference_summary

    ref = load_reference_summary()
    assert ref["Id"] == {"mean_rho": 0.59, "min_rho": 0.38}
    assert ref["Id/PERM"] == {"mean_rho": 0.69, "min_rho": 0.58}
    assert ref["WC"] == {"mean_rho": 0.23, "min_rho": -0.09}
    # eight common encoders only; the nine-encoder values above are not reachable from the bundled tables
    ours = correlation_matrix(load_fixture("reference_metrics"), load_fixture("reference_downstream")).summary()
    assert ours["Id"]["mean_rho"] == pytest.approx(0.54, abs=0.005)
    assert ours["Id/PERM"]["mean_rho"] == pytest.approx(0.70, abs=0.005)
