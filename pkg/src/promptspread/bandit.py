"""Budgeted search for the best and worst formats among K sampled arms.

The budget E is split in two phases.  Phase one searches for the best
format with B * floor(E / 2B) evaluations; phase two searches for the worst
with everything left, keeping every count gathered so far (for Thompson
sampling this is exactly the phase-one posterior used as the new prior).
Each round pulls one arm and evaluates it on the next unseen instances of
the task's fixed order, so no (arm, instance) pair is ever repeated.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .errors import ConfigurationError

THOMPSON = "thompson"
UCB = "ucb"
NAIVE = "naive"
ALGORITHMS = (THOMPSON, UCB, NAIVE)

PRIOR_BETA = 5.0
PRIOR_ALPHA_FLOOR = 1.1
X0_CLAMP = 0.999


class ArmsExhausted(Exception):
    """Every arm has seen every instance; nothing is left to pull."""


def make_prior(x0: float, beta: float = PRIOR_BETA, floor: float = PRIOR_ALPHA_FLOOR) -> tuple[float, float]:
    """Beta prior whose mean is the original format's accuracy ``x0``.

    alpha = max(beta * x0 / (1 - x0), floor) with beta fixed at 5.
    """
    if not 0.0 <= x0 < 1.0:
        raise ConfigurationError(f"prior needs 0 <= x0 < 1 (got {x0}); clamp x0 to {X0_CLAMP}")
    # exact arithmetic on the decimal value, so 0.9 gives 45 rather than 45.00000000000001
    x = Fraction(repr(float(x0)))
    return max(float(Fraction(repr(float(beta))) * x / (1 - x)), floor), beta


@dataclass(frozen=True)
class ArmState:
    arm_id: int
    format_id: str
    S: int
    N: int
    alpha: float
    beta: float
    exhausted: bool

    @property
    def drawn(self) -> range:
        """Positions in the task's instance order this arm has been evaluated on."""
        return range(self.N)

    @property
    def posterior_mean(self) -> float:
        return (self.alpha + self.S) / (self.alpha + self.beta + self.N)


class Arms:
    """Counters for K arms kept as arrays so a round costs O(K) numpy work."""

    def __init__(self, k: int, n_instances: int, alpha: float = 1.0, beta: float = 1.0):
        self.k = k
        self.n_instances = n_instances
        self.s = np.zeros(k, dtype=np.int64)
        self.n = np.zeros(k, dtype=np.int64)
        self.alpha = np.full(k, float(alpha))
        self.beta = np.full(k, float(beta))

    @classmethod
    def from_counts(cls, successes, pulls, alpha=1.0, beta=1.0, n_instances=10**9) -> "Arms":
        arms = cls(len(successes), n_instances, alpha, beta)
        arms.s[:] = successes
        arms.n[:] = pulls
        return arms

    @property
    def exhausted(self) -> np.ndarray:
        return self.n >= self.n_instances

    @property
    def active(self) -> np.ndarray:
        return ~self.exhausted

    def posterior_mean(self) -> np.ndarray:
        return (self.alpha + self.s) / (self.alpha + self.beta + self.n)

    def empirical_mean(self) -> np.ndarray:
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(self.n > 0, self.s / np.maximum(self.n, 1), np.nan)

    def set_prior(self, alpha: float, beta: float) -> None:
        self.alpha[:] = alpha
        self.beta[:] = beta

    def states(self, format_ids: Sequence[str]) -> list[ArmState]:
        ex = self.exhausted
        return [ArmState(i, format_ids[i], int(self.s[i]), int(self.n[i]),
                         float(self.alpha[i]), float(self.beta[i]), bool(ex[i]))
                for i in range(self.k)]


def _pick(values: np.ndarray, mask: np.ndarray, direction: str) -> int:
    if direction == "max":
        return int(np.argmax(np.where(mask, values, -np.inf)))
    if direction == "min":
        return int(np.argmin(np.where(mask, values, np.inf)))
    raise ConfigurationError(f"direction must be 'max' or 'min', got {direction!r}")


def thompson_round(arms: Arms, direction: str, rng: np.random.Generator) -> int:
    """Draw one posterior sample per arm; return the extreme non-exhausted arm."""
    active = arms.active
    if not active.any():
        raise ArmsExhausted()
    theta = rng.beta(arms.alpha + arms.s, arms.beta + (arms.n - arms.s))
    return _pick(theta, active, direction)


def ucb_index(s, n, t: int, c: float, direction: str = "max"):
    """S/N plus (max) or minus (min) c * sqrt(ln t / N)."""
    bonus = c * np.sqrt(math.log(max(t, 1)) / n)
    return s / n + bonus if direction == "max" else s / n - bonus


def ucb_round(arms: Arms, t: int, c: float, direction: str) -> int:
    """Optimistic (max) or pessimistic (min) confidence-bound choice at round ``t``."""
    active = arms.active
    if not active.any():
        raise ArmsExhausted()
    if (arms.n[active] == 0).any():
        raise ConfigurationError("every arm must be pulled once before a UCB round")
    index = ucb_index(arms.s, np.maximum(arms.n, 1), t, c, direction)
    return _pick(index, active, direction)


@dataclass
class SearchConfig:
    E: int
    B: int = 20
    algorithm: str = THOMPSON
    ucb_c: float = 2.0
    x0: float | None = None
    seed: int = 0
    verify: bool = False
    K: int | None = None

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ConfigurationError(f"algorithm must be one of {ALGORITHMS}")
        if self.B < 1:
            raise ConfigurationError("mini-batch size B must be at least 1")
        if self.algorithm != NAIVE and self.E < 2 * self.B:
            raise ConfigurationError(f"budget E={self.E} is below 2B={2 * self.B}")
        if self.K is not None and self.K < 2 and self.algorithm != NAIVE:
            raise ConfigurationError("need at least K=2 formats")
        if self.x0 is not None and not 0.0 <= self.x0 <= 1.0:
            raise ConfigurationError("x0 must lie in [0, 1]")

    @property
    def phase1_budget(self) -> int:
        return self.B * (self.E // (2 * self.B))


@dataclass
class SpreadReport:
    algorithm: str
    budget: dict
    best_arm: int | None
    worst_arm: int | None
    best_estimate: float | None
    worst_estimate: float | None
    estimated_spread: float | None
    arms: list[dict]
    config: dict
    prior: list[float] | None = None
    best_accuracy: float | None = None
    worst_accuracy: float | None = None
    spread: float | None = None
    provenance: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


def _arm_rows(arms: Arms, format_ids, estimates, formats=None) -> list[dict]:
    rows = []
    for st, est in zip(arms.states(format_ids), estimates):
        row = {"arm": st.arm_id, "format_id": st.format_id, "S": st.S, "N": st.N,
               "estimate": None if np.isnan(est) else float(est),
               "posterior_mean": st.posterior_mean, "exhausted": st.exhausted}
        if formats is not None:
            from .grammar import format_to_dict

            row["format"] = format_to_dict(formats[st.arm_id])
        rows.append(row)
    return rows


def _pull(evaluator, arms: Arms, arm: int, size: int) -> int:
    start = int(arms.n[arm])
    stop = min(start + size, arms.n_instances)
    positions = list(range(start, stop))
    outcomes = evaluator.evaluate(arm, positions)
    arms.s[arm] += int(sum(outcomes))
    arms.n[arm] += len(positions)
    return len(positions)


def _estimates(arms: Arms, algorithm: str) -> np.ndarray:
    """Value used to name the best/worst arm; exhausted arms use their exact accuracy."""
    base = arms.posterior_mean() if algorithm == THOMPSON else arms.empirical_mean()
    exact = arms.empirical_mean()
    est = np.where(arms.exhausted, exact, base)
    return np.where(arms.n > 0, est, np.nan)


def _extremes(est: np.ndarray):
    if np.all(np.isnan(est)):
        return None, None
    return int(np.nanargmax(est)), int(np.nanargmin(est))


def _finish(evaluator, arms, est, cfg, algorithm, budget, format_ids, formats, prior):
    best, worst = _extremes(est)
    report = SpreadReport(
        algorithm=algorithm, budget=budget, best_arm=best, worst_arm=worst,
        best_estimate=None if best is None else float(est[best]),
        worst_estimate=None if worst is None else float(est[worst]),
        estimated_spread=None if best is None else float(est[best] - est[worst]),
        arms=_arm_rows(arms, format_ids, est, formats),
        config={k: v for k, v in asdict(cfg).items()}, prior=prior,
    )
    if cfg.verify and best is not None:
        report.best_accuracy = evaluator.full_accuracy(best)
        report.worst_accuracy = evaluator.full_accuracy(worst)
        report.spread = report.best_accuracy - report.worst_accuracy
    budget["verification_evaluations"] = getattr(evaluator, "verification_evaluations", 0)
    return report


def run_search(evaluator, cfg: SearchConfig, *, format_ids: Sequence[str] | None = None,
               formats=None) -> SpreadReport:
    """Find the best and worst arms within ``cfg.E`` data-point evaluations.

    Arm 0 is taken to be the original format.  Without ``cfg.x0`` the first
    phase-one round pulls it and the prior mean is its smoothed accuracy
    (r + 1) / (B + 2) on that batch.
    """
    if cfg.algorithm == NAIVE:
        return naive_run(evaluator, cfg, format_ids=format_ids, formats=formats)
    k, d, b = evaluator.n_arms, evaluator.n_instances, cfg.B
    if k < 2:
        raise ConfigurationError("need at least K=2 formats")
    if cfg.K is not None and cfg.K != k:
        raise ConfigurationError(f"config says K={cfg.K} but {k} formats were given")
    format_ids = list(format_ids) if format_ids is not None else [str(i) for i in range(k)]
    rng = np.random.default_rng(cfg.seed)
    arms = Arms(k, d)
    rounds = 0
    spent = {"max": 0, "min": 0}
    early_stop = False

    x0 = cfg.x0
    if x0 is None:
        got = _pull(evaluator, arms, 0, b)
        spent["max"] += got
        rounds += 1
        # Laplace-smoothed so a perfect first batch does not pin the prior at x0 -> 1
        x0 = (arms.s[0] + 1) / (got + 2)
    alpha, beta = make_prior(min(float(x0), X0_CLAMP))
    arms.set_prior(alpha, beta)

    def choose(direction: str) -> int:
        if cfg.algorithm == THOMPSON:
            return thompson_round(arms, direction, rng)
        cold = np.flatnonzero(arms.active & (arms.n == 0))
        if cold.size:
            return int(cold[0])
        return ucb_round(arms, rounds + 1, cfg.ucb_c, direction)

    budgets = {"max": cfg.phase1_budget}
    for direction in ("max", "min"):
        if direction == "min":
            budgets["min"] = cfg.E - spent["max"]
        while spent[direction] < budgets[direction]:
            if not arms.active.any():
                early_stop = True
                break
            size = min(b, budgets[direction] - spent[direction])
            spent[direction] += _pull(evaluator, arms, choose(direction), size)
            rounds += 1

    total = spent["max"] + spent["min"]
    budget = {"E": cfg.E, "B": b, "spent": total, "phase1_spent": spent["max"],
              "phase2_spent": spent["min"], "rounds": rounds, "unspent": cfg.E - total,
              "early_stop": early_stop}
    est = _estimates(arms, cfg.algorithm)
    report = _finish(evaluator, arms, est, cfg, cfg.algorithm, budget, format_ids, formats,
                     [float(alpha), float(beta)] if cfg.algorithm == THOMPSON else None)
    report.config["x0_used"] = float(x0)
    return report


def naive_allocations(E: int, K: int) -> list[int]:
    """floor(E/K) each, one extra to the first E mod K arms."""
    if K < 1 or E < K:
        raise ConfigurationError(f"naive sampling needs E >= K (E={E}, K={K})")
    q, r = divmod(E, K)
    return [q + (1 if i < r else 0) for i in range(K)]


def naive_run(evaluator, cfg: SearchConfig, *, format_ids=None, formats=None) -> SpreadReport:
    """Evaluate every arm on an equal share of the budget."""
    k, d = evaluator.n_arms, evaluator.n_instances
    format_ids = list(format_ids) if format_ids is not None else [str(i) for i in range(k)]
    arms = Arms(k, d)
    spent = 0
    for arm, size in enumerate(naive_allocations(cfg.E, k)):
        spent += _pull(evaluator, arms, arm, size)
    budget = {"E": cfg.E, "B": cfg.B, "spent": spent, "phase1_spent": spent, "phase2_spent": 0,
              "rounds": k, "unspent": cfg.E - spent, "early_stop": spent < cfg.E}
    est = _estimates(arms, NAIVE)
    return _finish(evaluator, arms, est, cfg, NAIVE, budget, format_ids, formats, None)
