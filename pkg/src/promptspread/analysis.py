"""Statistics describing how much accuracy moves across equivalent formats.

Quartiles use linear interpolation between order statistics (numpy's
default ``"linear"`` method, Hyndman-Fan type 7).  Whiskers are the Tukey
fences Q1 - 1.5 IQR and Q3 + 1.5 IQR pulled in to the most extreme data point
inside them, but never past the box itself.
"""
from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import ConfigurationError, UndefinedStatistic
from .metrics import EvalRecord

MIN_GROUP_SIZE = 5
WHISKER_K = 1.5
# slack for threshold comparisons on differences of decimal fractions
_EPS = 1e-12
DEFAULT_THRESHOLDS = tuple(round(0.05 * i, 2) for i in range(21))


class UndersizedGroupWarning(UserWarning):
    pass


class NoDiscordantPairs(UndefinedStatistic):
    """McNemar's test needs at least one pair on which the two models disagree."""


def spread(accs: Sequence[float]) -> float:
    if len(accs) == 0:
        raise UndefinedStatistic("spread of an empty list")
    return float(max(accs) - min(accs))


@dataclass(frozen=True)
class BoxStats:
    q1: float
    median: float
    q3: float
    lo_whisker: float
    hi_whisker: float

    @property
    def iqr(self) -> float:
        return self.q3 - self.q1


def box_stats(values: Sequence[float], k: float = WHISKER_K) -> BoxStats:
    x = np.sort(np.asarray(values, dtype=float))
    if x.size == 0:
        raise UndefinedStatistic("box statistics of an empty list")
    q1, med, q3 = np.quantile(x, [0.25, 0.5, 0.75], method="linear")
    iqr = q3 - q1
    lo_fence, hi_fence = q1 - k * iqr, q3 + k * iqr
    # fences always contain the median, so at least one point is inside each;
    # an interpolated quartile can sit past every in-fence point, in which
    # case the whisker stops at the box edge instead of retracting into it
    lo = min(x[x >= lo_fence - _EPS].min(), q1)
    hi = max(x[x <= hi_fence + _EPS].max(), q3)
    return BoxStats(float(q1), float(med), float(q3), float(lo), float(hi))


def _disjoint(a: tuple[float, float], b: tuple[float, float]) -> bool:
    return a[1] < b[0] or b[1] < a[0]


@dataclass
class Dissimilarity:
    weak: list[tuple] = field(default_factory=list)
    strong: list[tuple] = field(default_factory=list)
    excluded: list = field(default_factory=list)
    boxes: dict = field(default_factory=dict)


def constant_dissimilarity(groups: Mapping[object, Sequence[float]],
                           min_size: int = MIN_GROUP_SIZE) -> Dissimilarity:
    """Pairs of constant values whose accuracy distributions clearly differ.

    Weakly different: the [Q1, Q3] boxes are disjoint.  Strongly different:
    the whisker ranges are disjoint.  Groups with fewer than ``min_size``
    accuracies are left out with a warning.
    """
    out = Dissimilarity()
    for value, accs in groups.items():
        if len(accs) < min_size:
            warnings.warn(UndersizedGroupWarning(
                f"group {value!r} has {len(accs)} samples (< {min_size}); excluded"), stacklevel=2)
            out.excluded.append(value)
        else:
            out.boxes[value] = box_stats(accs)
    for a, b in combinations(list(out.boxes), 2):
        sa, sb = out.boxes[a], out.boxes[b]
        if _disjoint((sa.q1, sa.q3), (sb.q1, sb.q3)):
            out.weak.append((a, b))
        if _disjoint((sa.lo_whisker, sa.hi_whisker), (sb.lo_whisker, sb.hi_whisker)):
            out.strong.append((a, b))
    return out


def is_monotonic(triple: Sequence[float]) -> bool:
    a, b, c = triple
    return (a < b < c) or (a > b > c)


def triple_monotonicity(triples: Iterable[Sequence[float]]) -> float:
    """Fraction of triples that are strictly increasing or strictly decreasing."""
    flags = [is_monotonic(t) for t in triples]
    if not flags:
        raise UndefinedStatistic("monotonicity of an empty triple list")
    return sum(flags) / len(flags)


def ordered_format_pairs(acc_m: Sequence[float], acc_m2: Sequence[float],
                         strata: Sequence | None = None) -> list[tuple[float, float, float, float]]:
    """(accM_p, accM'_p, accM_p', accM'_p') for every ordered pair p != p'.

    With ``strata`` (one label per format, e.g. ``(task, n_shots)``) only
    formats sharing a label are paired.
    """
    if len(acc_m) != len(acc_m2):
        raise ConfigurationError("both models need an accuracy for every format")
    if strata is not None and len(strata) != len(acc_m):
        raise ConfigurationError("one stratum label per format required")
    n = len(acc_m)
    return [(acc_m[p], acc_m2[p], acc_m[q], acc_m2[q])
            for p in range(n) for q in range(n)
            if p != q and (strata is None or strata[p] == strata[q])]


def flip_probability(paired: Iterable[Sequence[float]], d: float) -> float | None:
    """P(M' beats M by >= d on p' | M beats M' by >= d on p).

    Returns None when no pair meets the condition.
    """
    if d < 0:
        raise ConfigurationError("d must be non-negative")
    cond = hits = 0
    for m_p, m2_p, m_q, m2_q in paired:
        if m_p >= m2_p + d - _EPS:
            cond += 1
            hits += m_q <= m2_q - d + _EPS
    return hits / cond if cond else None


def mcnemar_counts(paired_outcomes: Iterable[Sequence[int]]) -> tuple[int, int]:
    b = c = 0
    for x, y in paired_outcomes:
        b += bool(x) and not y
        c += (not x) and bool(y)
    return b, c


def mcnemar_exact(b: int, c: int) -> Fraction:
    """P(X >= b) for X ~ Binomial(b + c, 1/2), as an exact fraction."""
    n = b + c
    if n == 0:
        raise NoDiscordantPairs("no discordant pairs; McNemar's test does not apply")
    return Fraction(sum(math.comb(n, k) for k in range(b, n + 1)), 2 ** n)


def mcnemar_one_sided(paired_outcomes: Iterable[Sequence[int]]) -> float:
    """One-sided exact McNemar p-value for "M is better than M'"."""
    return float(mcnemar_exact(*mcnemar_counts(paired_outcomes)))


def spread_gain(accs: Sequence[float], k1: int, k2: int, d: float, trials: int,
                rng: np.random.Generator) -> float:
    """Chance that growing a random k1-sample of formats to k2 widens the spread by >= d."""
    x = np.asarray(accs, dtype=float)
    if not 1 <= k1 < k2:
        raise ConfigurationError(f"need 1 <= k1 < k2 (got k1={k1}, k2={k2})")
    if k2 > x.size:
        raise ConfigurationError(f"k2={k2} exceeds the {x.size} available formats")
    if trials < 1:
        raise ConfigurationError("trials must be at least 1")
    wins = 0
    for _ in range(trials):
        pick = x[rng.permutation(x.size)[:k2]]
        small = pick[:k1]
        gain = (pick.max() - pick.min()) - (small.max() - small.min())
        wins += gain >= d - _EPS
    return wins / trials


def atomic_change_histogram(pairs: Sequence[Sequence[float]],
                            thresholds: Sequence[float] = DEFAULT_THRESHOLDS) -> list[tuple[float, float]]:
    """(t, P(|acc_after - acc_before| >= t)) for each threshold."""
    if len(pairs) == 0:
        raise UndefinedStatistic("no atomic-change pairs")
    deltas = np.abs(np.array([after - before for before, after in pairs], dtype=float))
    return [(float(t), float(np.mean(deltas >= t - _EPS))) for t in thresholds]


@dataclass
class AccuracyTable:
    """Accuracy and evaluation count per (format id, model, n_shots, metric)."""

    rows: dict[tuple, tuple[float, int]] = field(default_factory=dict)

    def __post_init__(self):
        for key, (acc, count) in self.rows.items():
            if not 0.0 <= acc <= 1.0 or count < 1:
                raise ConfigurationError(f"bad accuracy row {key}: {acc}, {count}")

    @classmethod
    def from_records(cls, records: Iterable[EvalRecord]) -> "AccuracyTable":
        sums: dict[tuple, list[int]] = {}
        for r in records:
            cell = sums.setdefault((r.format_id, r.model, r.n_shots, r.metric), [0, 0])
            cell[0] += r.outcome
            cell[1] += 1
        return cls({k: (s / n, n) for k, (s, n) in sums.items()})

    def accuracies(self, model=None, n_shots=None, metric=None) -> dict[str, float]:
        """format id -> accuracy for rows matching every filter given."""
        out = {}
        for (fid, m, k, met), (acc, _) in sorted(self.rows.items(), key=lambda kv: str(kv[0])):
            if (model is None or m == model) and (n_shots is None or k == n_shots) \
                    and (metric is None or met == metric):
                out[fid] = acc
        return out

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["format_id", "model", "n_shots", "metric", "accuracy", "count"])
        for (fid, m, k, met), (acc, n) in sorted(self.rows.items(), key=lambda kv: str(kv[0])):
            w.writerow([fid, m, k, met, repr(acc), n])
        return buf.getvalue()


def group_by_constant(formats, accs: Sequence[float], group_id: str) -> dict[str, list[float]]:
    """Accuracies split by the value each format gives constant group ``group_id``."""
    out: dict[str, list[float]] = {}
    for fmt, acc in zip(formats, accs):
        out.setdefault(fmt.groups()[group_id].value, []).append(acc)
    return out


def write_tidy_csv(path: str | Path, rows: Iterable[Mapping[str, object]]) -> None:
    """One row per statistic: analysis, key, value columns (plus any extras)."""
    rows = list(rows)
    cols = ["analysis", "key", "value"]
    for r in rows:
        cols += [c for c in r if c not in cols]
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=cols, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow(r)
