"""The space of formats equivalent to a given one: sampling and neighbors."""
from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass

import numpy as np

from ..errors import FormatSpaceExhausted, GrammarError
from .constants import ConstantSets
from .nodes import Const, Format
from .restrictions import is_valid, validate_restrictions

log = logging.getLogger(__name__)

MAX_ATTEMPTS = 10_000
# assignment products up to this size are enumerated exactly to size the space
ENUMERATION_LIMIT = 200_000


def candidates(const: Const, sets: ConstantSets) -> tuple[str, ...]:
    """Values a group may take: its pool plus the original value if absent."""
    pool = sets.pool(const.pool)
    if const.origin is not None and const.origin not in pool:
        return pool + (const.origin,)
    return pool


def _group_choices(fmt: Format, sets: ConstantSets):
    groups = fmt.groups()
    return list(groups), [candidates(c, sets) for c in groups.values()]


def assignment_count(fmt: Format, sets: ConstantSets) -> int:
    """Number of constant assignments before restriction filtering."""
    _, choices = _group_choices(fmt, sets)
    return math.prod(len(c) for c in choices)


def enumerate_space(fmt: Format, sets: ConstantSets):
    """Yield every restriction-valid format equivalent to ``fmt``, in product order."""
    gids, choices = _group_choices(fmt, sets)
    for combo in itertools.product(*choices):
        cand = fmt.assign(dict(zip(gids, combo)))
        if is_valid(cand):
            yield cand


def space_size(fmt: Format, sets: ConstantSets, limit: int = ENUMERATION_LIMIT) -> int | None:
    """Exact count of valid equivalent formats, or None when too large to enumerate."""
    if assignment_count(fmt, sets) > limit:
        return None
    return sum(1 for _ in enumerate_space(fmt, sets))


@dataclass
class SampleResult:
    formats: list[Format]
    attempts: int
    rejected_invalid: int
    rejected_duplicate: int

    @property
    def rejection_rate(self) -> float:
        return (self.rejected_invalid + self.rejected_duplicate) / self.attempts if self.attempts else 0.0


def draw_formats(fmt: Format, sets: ConstantSets, rng: np.random.Generator, count: int, *,
                 include_original: bool = False, max_attempts: int = MAX_ATTEMPTS) -> SampleResult:
    """Rejection-sample ``count`` distinct valid formats equivalent to ``fmt``.

    Each group's value is drawn uniformly from its candidates; draws that
    violate a restriction or repeat an earlier format are rejected.  With
    ``include_original`` the first returned format is ``fmt`` itself.
    """
    if count < 0:
        raise GrammarError("count must be non-negative")
    problems = validate_restrictions(fmt)
    if problems:
        raise GrammarError(f"source format violates restrictions: {problems[0].message}")
    gids, choices = _group_choices(fmt, sets)
    if count > math.prod(len(c) for c in choices):
        size = space_size(fmt, sets)
        raise FormatSpaceExhausted(
            f"requested {count} formats but only {size} valid equivalent formats exist", size)

    seen: set[tuple[str, ...]] = set()
    out: list[Format] = []
    if include_original and count:
        out.append(fmt)
        seen.add(tuple(fmt.values().values()))
    attempts = invalid = duplicate = 0
    while len(out) < count:
        for _ in range(max_attempts):
            attempts += 1
            combo = tuple(c[int(rng.integers(len(c)))] for c in choices)
            if combo in seen:
                duplicate += 1
                continue
            cand = fmt.assign(dict(zip(gids, combo)))
            if not is_valid(cand):
                invalid += 1
                continue
            seen.add(combo)
            out.append(cand)
            break
        else:
            # stalled: size the space only now, since enumeration is costly
            size = space_size(fmt, sets)
            if size is not None and count <= size:
                rest = [f for f in enumerate_space(fmt, sets)
                        if tuple(f.values().values()) not in seen]
                order = rng.permutation(len(rest))
                out.extend(rest[int(i)] for i in order[: count - len(out)])
                break
            if size is not None:
                raise FormatSpaceExhausted(
                    f"requested {count} formats but only {size} valid equivalent formats exist", size)
            raise FormatSpaceExhausted(
                f"no new valid format after {max_attempts} attempts ({len(out)} of {count} found); "
                f"space size unknown (>{ENUMERATION_LIMIT} assignments)", None)
    result = SampleResult(out, attempts, invalid, duplicate)
    log.info("sampled %d formats in %d draws (rejection rate %.3f)",
             len(out), attempts, result.rejection_rate)
    return result


def sample_equivalent(fmt: Format, sets: ConstantSets, rng: np.random.Generator, count: int, *,
                      include_original: bool = False) -> list[Format]:
    return draw_formats(fmt, sets, rng, count, include_original=include_original).formats


def atomic_neighbors(fmt: Format, sets: ConstantSets) -> list[Format]:
    """Every valid format reachable by changing exactly one equality group."""
    out = []
    for gid, const in fmt.groups().items():
        for value in candidates(const, sets):
            if value == const.value:
                continue
            cand = fmt.assign({gid: value})
            if is_valid(cand):
                out.append(cand)
    return out


def changed_groups(a: Format, b: Format) -> list[str]:
    """Groups whose values differ between two formats over the same tree."""
    va, vb = a.values(), b.values()
    if va.keys() != vb.keys():
        raise GrammarError("formats do not share equality groups")
    return [g for g in va if va[g] != vb[g]]
