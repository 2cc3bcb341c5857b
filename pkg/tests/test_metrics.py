import pytest
from hypothesis import given
from hypothesis import strategies as st

from promptspread.errors import EvaluationError, UndefinedStatistic
from promptspread.metrics import (
    EvalRecord, accuracy, centered_mass, matches_any_option, normalize_text, prefix_match,
    ranking_score, read_records, write_records,
)


@pytest.mark.parametrize("raw, norm", [(" Yes\n", "yes"), ("ENTAILMENT", "entailment"),
                                       ("a  \t b", "a b")])
def test_normalize(raw, norm):
    assert normalize_text(raw) == norm


@given(st.text())
def test_normalize_idempotent(s):
    assert normalize_text(normalize_text(s)) == normalize_text(s)


@pytest.mark.parametrize("gen, gold, out", [("Yes, because...", "yes", 1), ("maybe", "yes", 0),
                                            ("", "yes", 0), ("  Answer\nB", "answer b", 1)])
def test_prefix_match(gen, gold, out):
    assert prefix_match(gen, gold) == out


@given(st.text(), st.lists(st.text(min_size=1), min_size=1, max_size=4))
def test_prefix_outcome_implies_valid(gen, options):
    for gold in options:
        if prefix_match(gen, gold):
            assert matches_any_option(gen, options)


def test_ranking():
    assert ranking_score({"A": -1.2, "B": -0.5}, "B") == 1
    assert ranking_score({"A": -0.5, "B": -0.5}, "B", ["A", "B"]) == 0
    assert ranking_score({"A": -0.5, "B": -0.9, "C": -2.0}, "C") == 0
    with pytest.raises(EvaluationError):
        ranking_score({"A": -0.5}, "B", ["A", "B"])
    with pytest.raises(EvaluationError):
        ranking_score({"A": -0.5, "B": -1.0}, "Z")
    with pytest.raises(EvaluationError):
        ranking_score({"A": -0.5}, "A")


def _rec(valid, outcome=0):
    return EvalRecord("f", "i", "prefix", outcome, valid)


def test_centered_mass():
    assert centered_mass([_rec(1)] * 4) == 1.0
    assert centered_mass([_rec(0)] * 4) == 0.0
    assert centered_mass([_rec(1), _rec(1), _rec(1), _rec(0)]) == 0.75
    with pytest.raises(UndefinedStatistic):
        centered_mass([])
    with pytest.raises(UndefinedStatistic):
        accuracy([])


def test_records_roundtrip(tmp_path):
    recs = [EvalRecord("f", str(i), "ranking", i % 2, 1, option_scores={"a": -1.0}, model="m", n_shots=1)
            for i in range(3)]
    path = tmp_path / "r.jsonl"
    write_records(path, recs)
    assert read_records(path) == recs
    assert accuracy(recs) == pytest.approx(1 / 3)
