import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from promptspread.bandit import (
    NAIVE, THOMPSON, UCB, Arms, SearchConfig, make_prior, naive_allocations, naive_run, run_search,
    thompson_round, ucb_index, ucb_round,
)
from promptspread.errors import ConfigurationError
from promptspread.evaluator import OracleEvaluator


class Tracking(OracleEvaluator):
    """Oracle that records every (arm, position) pair it is asked for."""

    def __init__(self, *a, **kw):
        super().__init__(*a, **kw)
        self.pairs = []

    def evaluate(self, arm, positions):
        self.pairs.extend((arm, p) for p in positions)
        return super().evaluate(arm, positions)


@pytest.mark.parametrize("x0, prior", [(0.5, (5, 5)), (0.9, (45, 5)), (0.1, (1.1, 5))])
def test_make_prior(x0, prior):
    alpha, beta = make_prior(x0)
    assert (alpha, beta) == prior


def test_make_prior_degenerate():
    with pytest.raises(ConfigurationError):
        make_prior(1.0)


def test_thompson_single_arm():
    arms = Arms(1, 1000)
    rng = np.random.default_rng(0)
    assert all(thompson_round(arms, "max", rng) == 0 for _ in range(50))


def test_thompson_separated_arms():
    arms = Arms.from_counts([0, 0], [0, 0])
    arms.alpha[:] = [100, 1]
    arms.beta[:] = [1, 100]
    rng = np.random.default_rng(0)
    picks_max = [thompson_round(arms, "max", rng) for _ in range(10_000)]
    picks_min = [thompson_round(arms, "min", rng) for _ in range(10_000)]
    assert picks_max.count(0) >= 9_900
    assert picks_min.count(1) >= 9_900


def test_thompson_direction_mirror():
    # swapping S <-> N - S and the direction mirrors the choice distribution
    s, n = np.array([30, 12]), np.array([50, 20])
    arms = Arms.from_counts(s, n, alpha=2.0, beta=2.0)
    mirror = Arms.from_counts(n - s, n, alpha=2.0, beta=2.0)
    rng1, rng2 = np.random.default_rng(1), np.random.default_rng(2)
    a = np.mean([thompson_round(arms, "max", rng1) for _ in range(20_000)])
    b = np.mean([thompson_round(mirror, "min", rng2) for _ in range(20_000)])
    assert abs(a - b) < 0.02


def test_ucb_index_value():
    expected = 0.5 + 2 * math.sqrt(math.log(4) / 20)
    assert ucb_index(10, 20, 4, 2) == pytest.approx(expected)
    assert ucb_index(10, 20, 4, 2) == pytest.approx(1.0266, abs=1e-4)


def test_ucb_rounds():
    arms = Arms.from_counts([3, 9, 5], [20, 20, 20], n_instances=1000)
    assert ucb_round(arms, 10, 2.0, "max") == 1
    assert ucb_round(arms, 10, 2.0, "min") == 0
    greedy = Arms.from_counts([3, 9, 5], [10, 40, 20], n_instances=1000)
    assert ucb_round(greedy, 10, 0.0, "max") == 0  # means 0.3, 0.225, 0.25
    means = greedy.s / greedy.n
    assert ucb_round(greedy, 10, 0.0, "max") == int(np.argmax(means))
    with pytest.raises(ConfigurationError):
        ucb_round(Arms.from_counts([0, 1], [0, 2]), 3, 2.0, "max")


def test_search_config_validation():
    with pytest.raises(ConfigurationError):
        SearchConfig(E=30, B=20)
    with pytest.raises(ConfigurationError):
        SearchConfig(E=100, B=0)
    with pytest.raises(ConfigurationError):
        SearchConfig(E=100, algorithm="greedy")
    assert SearchConfig(E=100, B=20).phase1_budget == 40


def test_phase_accounting_e100_b20():
    ev = OracleEvaluator([0.2, 0.5, 0.8], 1000, seed=0)
    rep = run_search(ev, SearchConfig(E=100, B=20, x0=0.5))
    assert rep.budget["phase1_spent"] == 40 and rep.budget["phase2_spent"] == 60
    assert rep.budget["rounds"] == 5 and rep.budget["spent"] == 100 == ev.evaluations


def test_pilot_batch_counts_toward_phase_one():
    ev = OracleEvaluator([0.5, 0.6], 1000, seed=0)
    rep = run_search(ev, SearchConfig(E=100, B=20))
    assert rep.budget["spent"] == 100 and rep.budget["phase1_spent"] == 40
    assert rep.arms[0]["N"] >= 20
    assert 0 < rep.config["x0_used"] < 1


def test_two_forced_arms():
    for algorithm in (THOMPSON, UCB):
        ev = OracleEvaluator([0.0, 1.0], 1000, seed=0)
        rep = run_search(ev, SearchConfig(E=80, B=20, algorithm=algorithm, verify=True))
        assert rep.best_arm == 1 and rep.worst_arm == 0
        assert rep.spread == 1.0
        assert ev.verification_evaluations == 2000


def test_exhaustion_stops_early():
    ev = OracleEvaluator([0.3, 0.7], 10, seed=0)
    rep = run_search(ev, SearchConfig(E=200, B=4, x0=0.5))
    assert rep.budget["early_stop"] and rep.budget["spent"] == 20 == ev.evaluations
    assert all(a["exhausted"] for a in rep.arms)
    assert rep.best_estimate == ev.full_accuracy(rep.best_arm)


def test_no_pair_repeats():
    ev = Tracking(np.linspace(0.1, 0.9, 12), 100, seed=4)
    rep = run_search(ev, SearchConfig(E=1500, B=20, algorithm=UCB))
    assert len(ev.pairs) == len(set(ev.pairs)) == rep.budget["spent"]


def test_naive():
    assert naive_allocations(100, 3) == [34, 33, 33]
    with pytest.raises(ConfigurationError):
        naive_allocations(2, 3)
    one = naive_run(OracleEvaluator([0.4], 1000), SearchConfig(E=100, algorithm=NAIVE))
    assert one.estimated_spread == 0
    two = naive_run(OracleEvaluator([0.2, 0.8], 1000, seed=1), SearchConfig(E=2000, algorithm=NAIVE))
    true = OracleEvaluator([0.2, 0.8], 1000, seed=1).true_sample_accuracies()
    assert two.estimated_spread == pytest.approx(true[1] - true[0])
    assert abs(two.estimated_spread - 0.6) < 0.06


def test_run_search_dispatches_naive():
    ev = OracleEvaluator([0.2, 0.8, 0.5], 1000, seed=0)
    rep = run_search(ev, SearchConfig(E=100, algorithm=NAIVE))
    assert [a["N"] for a in rep.arms] == [34, 33, 33]


def test_deterministic_report():
    def once():
        ev = OracleEvaluator(np.linspace(0.2, 0.8, 20), 1000, seed=2)
        return run_search(ev, SearchConfig(E=1000, B=20, seed=9)).to_dict()

    assert once() == once()


@settings(max_examples=200, deadline=None)
@given(st.floats(0.5, 50), st.floats(0.5, 50), st.integers(1, 40), st.data())
def test_posterior_moves_toward_batch_mean(alpha, beta, b, data):
    r = data.draw(st.integers(0, b))
    before = alpha / (alpha + beta)
    after = (alpha + r) / (alpha + beta + b)
    target = r / b
    assert abs(after - target) <= abs(before - target) + 1e-12
    arms = Arms.from_counts([0], [0], alpha, beta)
    arms.s[0] += r
    arms.n[0] += b
    assert arms.posterior_mean()[0] == pytest.approx(after)


def test_fresh_oracle_shares_outcomes():
    ev = OracleEvaluator([0.3, 0.7], 50, seed=2)
    first = run_search(ev, SearchConfig(E=60, B=10, x0=0.5)).to_dict()
    twin = ev.fresh()
    assert twin.evaluations == 0 and twin.true_sample_accuracies() == ev.true_sample_accuracies()
    assert run_search(twin, SearchConfig(E=60, B=10, x0=0.5)).to_dict() == first
