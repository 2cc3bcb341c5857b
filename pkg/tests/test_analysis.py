import itertools
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from promptspread.analysis import (
    AccuracyTable, NoDiscordantPairs, UndersizedGroupWarning, atomic_change_histogram, box_stats,
    constant_dissimilarity, flip_probability, group_by_constant, is_monotonic, mcnemar_counts,
    mcnemar_exact, mcnemar_one_sided, ordered_format_pairs, spread, spread_gain,
    triple_monotonicity, write_tidy_csv,
)
from promptspread.errors import ConfigurationError, UndefinedStatistic
from promptspread.grammar import ConstantSets, field, join, make_format, sample_equivalent
from promptspread.metrics import EvalRecord


def type7_quantile(values, p):
    """Linear interpolation between order statistics, written out by hand."""
    x = sorted(values)
    h = (len(x) - 1) * p
    lo = math.floor(h)
    hi = min(lo + 1, len(x) - 1)
    return x[lo] + (h - lo) * (x[hi] - x[lo])


def reference_box(values):
    q1, q3 = type7_quantile(values, 0.25), type7_quantile(values, 0.75)
    iqr = q3 - q1
    lo = min(v for v in values if v >= q1 - 1.5 * iqr)
    hi = max(v for v in values if v <= q3 + 1.5 * iqr)
    return q1, q3, min(lo, q1), max(hi, q3)


# --- spread -----------------------------------------------------------------

def test_spread_examples():
    assert spread([0.3, 0.5, 0.9]) == pytest.approx(0.6)
    assert spread([0.4]) == 0
    # task280: two formats one constant apart
    assert spread([0.043, 0.826]) == pytest.approx(0.783)
    with pytest.raises(UndefinedStatistic):
        spread([])


@given(st.lists(st.floats(0, 1), min_size=1, max_size=30), st.floats(-5, 5), st.floats(0.1, 10))
def test_spread_translation_and_scale(accs, shift, scale):
    base = spread(accs)
    assert spread([a + shift for a in accs]) == pytest.approx(base, abs=1e-9)
    assert spread([a * scale for a in accs]) == pytest.approx(base * scale, abs=1e-9)


# --- box statistics and dissimilarity ---------------------------------------

@settings(max_examples=200)
@given(st.lists(st.floats(0, 1), min_size=1, max_size=40))
def test_box_stats_match_reference(values):
    box = box_stats(values)
    q1, q3, lo, hi = reference_box(values)
    assert box.q1 == pytest.approx(q1, abs=1e-12) and box.q3 == pytest.approx(q3, abs=1e-12)
    assert box.lo_whisker == pytest.approx(lo) and box.hi_whisker == pytest.approx(hi)
    assert box.lo_whisker <= box.q1 + 1e-12 and box.hi_whisker >= box.q3 - 1e-12


def test_whisker_stops_at_box_edge():
    # Q3 interpolates to 0.25 but the only point above it is an outlier
    box = box_stats([0.0, 0.0, 0.0, 1.0])
    assert box.q3 == 0.25 and box.hi_whisker == 0.25


def test_whisker_adjusted_to_data_point():
    values = [0.10, 0.50, 0.52, 0.54, 0.56, 0.58, 0.95]
    box = box_stats(values)
    assert box.lo_whisker == 0.50 and box.hi_whisker == 0.58


def test_separated_groups_weak_and_strong():
    out = constant_dissimilarity({"A": [0.1, 0.2, 0.3], "B": [0.6, 0.7, 0.8]}, min_size=3)
    assert out.weak == [("A", "B")] and out.strong == [("A", "B")]


def test_identical_groups_neither():
    g = [0.1, 0.3, 0.4, 0.6, 0.7]
    out = constant_dissimilarity({"A": g, "B": list(g)})
    assert out.weak == [] and out.strong == []


def test_partly_overlapping_fixture():
    a = [0.1, 0.2, 0.3, 0.4, 0.5]
    b = [0.4, 0.5, 0.6, 0.7, 0.8, 0.9]
    # boxes [0.2, 0.4] and [0.525, 0.775]: disjoint, so weakly different;
    # whiskers [0.1, 0.5] and [0.4, 0.9] overlap, so not strongly different
    assert reference_box(a)[:2] == pytest.approx((0.2, 0.4))
    assert reference_box(b)[:2] == pytest.approx((0.525, 0.775))
    out = constant_dissimilarity({"A": a, "B": b})
    assert out.weak == [("A", "B")] and out.strong == []


def test_overlapping_boxes_not_weak():
    a = [0.1, 0.2, 0.3, 0.4, 0.5]
    b = [0.3, 0.35, 0.4, 0.45, 0.5]
    out = constant_dissimilarity({"A": a, "B": b})
    assert out.weak == [] and out.strong == []


def test_undersized_excluded_with_warning():
    with pytest.warns(UndersizedGroupWarning):
        out = constant_dissimilarity({"A": [0.1, 0.2], "B": [0.5] * 5, "C": [0.9] * 6})
    assert out.excluded == ["A"]
    assert out.weak == [("B", "C")]


@settings(max_examples=300)
@given(st.lists(st.floats(0, 1), min_size=5, max_size=15), st.lists(st.floats(0, 1), min_size=5, max_size=15))
def test_strong_implies_weak(a, b):
    out = constant_dissimilarity({"a": a, "b": b})
    assert set(out.strong) <= set(out.weak)


def test_group_by_constant():
    base = make_format(join([field("Passage", ": "), field("Answer", ": ")], "\n"))
    formats = sample_equivalent(base, ConstantSets(), np.random.default_rng(0), 30)
    accs = list(np.linspace(0, 1, 30))
    groups = group_by_constant(formats, accs, "casings.0")
    assert sum(len(v) for v in groups.values()) == 30
    assert set(groups) <= set(ConstantSets().casings)


# --- monotonicity -----------------------------------------------------------

def test_triples():
    assert is_monotonic((0.2, 0.3, 0.5)) and is_monotonic((0.5, 0.3, 0.2))
    assert not is_monotonic((0.2, 0.5, 0.3)) and not is_monotonic((0.2, 0.2, 0.3))
    assert triple_monotonicity([(0.2, 0.3, 0.5), (0.2, 0.5, 0.3)]) == 0.5
    with pytest.raises(UndefinedStatistic):
        triple_monotonicity([])


def test_permutations_of_distinct_values_exactly_one_third():
    perms = list(itertools.permutations((0.1, 0.4, 0.7)))
    assert triple_monotonicity(perms) == pytest.approx(1 / 3)


# --- flip probability -------------------------------------------------------

def test_flip_probability_examples():
    same = ordered_format_pairs([0.3, 0.6, 0.5], [0.3, 0.6, 0.5])
    assert flip_probability(same, 0.1) is None
    assert flip_probability(same, 0.0) == 1.0
    # M beats M' by 0.1 on p and loses by 0.1 on p'
    paired = ordered_format_pairs([0.6, 0.4], [0.5, 0.5])
    assert flip_probability(paired, 0.05) == 1.0
    dominated = ordered_format_pairs([0.8, 0.9, 0.7], [0.5, 0.6, 0.4])
    assert flip_probability(dominated, 0.1) == 0.0
    with pytest.raises(ConfigurationError):
        flip_probability(paired, -0.1)


def test_ordered_pairs_and_strata():
    assert len(ordered_format_pairs([0.1] * 4, [0.2] * 4)) == 12
    assert len(ordered_format_pairs([0.1] * 4, [0.2] * 4, strata=["a", "a", "b", "b"])) == 4


# --- McNemar ----------------------------------------------------------------

def enumerated_tail(b, c):
    """P(X >= b) by listing every sequence of b + c fair coin flips."""
    n = b + c
    hits = sum(1 for flips in itertools.product((0, 1), repeat=n) if sum(flips) >= b)
    return Fraction(hits, 2 ** n)


def test_mcnemar_examples():
    paired = [(1, 0)] * 8 + [(0, 1)] * 2 + [(1, 1)] * 30 + [(0, 0)] * 5
    assert mcnemar_counts(paired) == (8, 2)
    assert mcnemar_exact(8, 2) == Fraction(56, 1024)
    assert mcnemar_one_sided(paired) == pytest.approx(0.0546875)
    assert mcnemar_exact(10, 0) == Fraction(1, 1024)
    for b in range(1, 7):
        assert mcnemar_exact(b, b) >= Fraction(1, 2)
    with pytest.raises(NoDiscordantPairs):
        mcnemar_one_sided([(1, 1), (0, 0)])


def test_mcnemar_small_exhaustive():
    for b in range(0, 7):
        for c in range(0, 7 - b):
            if b + c:
                assert mcnemar_exact(b, c) == enumerated_tail(b, c)


# --- spread gain ------------------------------------------------------------

def test_spread_gain_examples():
    rng = np.random.default_rng(0)
    assert spread_gain([0.4] * 10, 2, 5, 0.01, 100, rng) == 0.0
    assert spread_gain([0.0, 1.0], 1, 2, 1.0, 50, rng) == 1.0
    assert spread_gain(list(np.linspace(0, 1, 20)), 3, 10, 0.0, 100, rng) == 1.0
    with pytest.raises(ConfigurationError):
        spread_gain([0.1, 0.2], 1, 3, 0.1, 10, rng)
    with pytest.raises(ConfigurationError):
        spread_gain([0.1, 0.2], 2, 2, 0.1, 10, rng)


def test_spread_gain_monotone_on_fixture():
    accs = list(np.random.default_rng(5).beta(2, 2, 40))
    est = lambda k2, d: spread_gain(accs, 5, k2, d, 4000, np.random.default_rng(1))  # noqa: E731
    by_d = [est(20, d) for d in (0.0, 0.05, 0.1, 0.2, 0.4)]
    assert all(x >= y for x, y in zip(by_d, by_d[1:]))
    by_k2 = [est(k2, 0.1) for k2 in (6, 10, 20, 40)]
    assert all(x <= y + 0.01 for x, y in zip(by_k2, by_k2[1:]))


# --- atomic changes ---------------------------------------------------------

def test_atomic_histogram():
    zero = dict(atomic_change_histogram([(0.3, 0.3)] * 4))
    assert zero[0.0] == 1.0 and all(p == 0.0 for t, p in zero.items() if t > 0)
    half = dict(atomic_change_histogram([(0.5, 0.6), (0.2, 0.1), (0.4, 0.4), (0.7, 0.7)], [0.05]))
    assert half[0.05] == 0.5
    # task317: a single atomic change
    one = dict(atomic_change_histogram([(0.076, 0.638)], [0.562, 0.563]))
    assert one == {0.562: 1.0, 0.563: 0.0}
    with pytest.raises(UndefinedStatistic):
        atomic_change_histogram([])


# --- tables -----------------------------------------------------------------

def test_accuracy_table(tmp_path):
    recs = [EvalRecord("f1", str(i), "prefix", int(i < 3), 1, model="m", n_shots=1) for i in range(4)]
    recs += [EvalRecord("f2", str(i), "prefix", 1, 1, model="m", n_shots=1) for i in range(2)]
    table = AccuracyTable.from_records(recs)
    assert table.rows[("f1", "m", 1, "prefix")] == (0.75, 4)
    assert table.accuracies(model="m") == {"f1": 0.75, "f2": 1.0}
    assert table.to_csv().splitlines()[0] == "format_id,model,n_shots,metric,accuracy,count"
    with pytest.raises(ConfigurationError):
        AccuracyTable({("f", "m", 0, "prefix"): (1.5, 3)})
    write_tidy_csv(tmp_path / "x.csv", [{"analysis": "spread", "key": "k", "value": 0.25, "extra": 1}])
    assert (tmp_path / "x.csv").read_text().splitlines() == ["analysis,key,value,extra", "spread,k,0.25,1"]
