"""Accuracy criteria: exact prefix matching, probability ranking, centered mass."""
from __future__ import annotations

import json
import re
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .errors import EvaluationError, UndefinedStatistic

PREFIX = "prefix"
RANKING = "ranking"
METRICS = (PREFIX, RANKING)

_WS = re.compile(r"\s+")


def normalize_text(s: str) -> str:
    """Lowercase, collapse whitespace runs to one space, strip."""
    return _WS.sub(" ", s.lower()).strip()


def prefix_match(generation: str, gold: str) -> int:
    return int(normalize_text(generation).startswith(normalize_text(gold)))


def matches_any_option(generation: str, options: Iterable[str]) -> int:
    return int(any(prefix_match(generation, o) for o in options))


def ranked_choice(option_scores: Mapping[str, float], order: Sequence[str] | None = None) -> str:
    """Highest-scoring option; ties go to the earliest option in ``order``."""
    order = list(option_scores) if order is None else list(order)
    missing = [o for o in order if o not in option_scores]
    if missing:
        raise EvaluationError(f"no score for options {missing}")
    best = order[0]
    for option in order[1:]:
        if option_scores[option] > option_scores[best]:
            best = option
    return best


def ranking_score(option_scores: Mapping[str, float], gold: str,
                  order: Sequence[str] | None = None) -> int:
    """1 iff ``gold`` wins the ranking after the deterministic tie-break."""
    order = list(option_scores) if order is None else list(order)
    if gold not in order:
        raise EvaluationError(f"gold {gold!r} is not among the options")
    if len(order) < 2:
        raise EvaluationError("ranking needs at least two options")
    return int(ranked_choice(option_scores, order) == gold)


@dataclass(frozen=True)
class EvalRecord:
    """One scored data point.

    ``valid`` says whether the response matched any option at all (always 1
    for ranking, where the model can only pick an option).
    """

    format_id: str
    instance_id: str
    metric: str
    outcome: int
    valid: int
    response: str | None = None
    option_scores: dict | None = None
    model: str | None = None
    n_shots: int | None = None

    def to_json(self) -> str:
        data = {k: v for k, v in asdict(self).items() if v is not None}
        return json.dumps(data, sort_keys=True, ensure_ascii=False)

    @classmethod
    def from_dict(cls, data: dict) -> "EvalRecord":
        return cls(**data)


def centered_mass(records: Sequence[EvalRecord]) -> float:
    """Fraction of records whose response matched a valid option."""
    if not records:
        raise UndefinedStatistic("centered mass of an empty record list")
    return sum(r.valid for r in records) / len(records)


def accuracy(records: Sequence[EvalRecord]) -> float:
    if not records:
        raise UndefinedStatistic("accuracy of an empty record list")
    return sum(r.outcome for r in records) / len(records)


def write_records(path: str | Path, records: Iterable[EvalRecord], append: bool = False) -> None:
    with open(path, "a" if append else "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(record.to_json() + "\n")


def read_records(path: str | Path) -> list[EvalRecord]:
    """Records from a JSONL file; header lines carrying ``provenance`` are skipped."""
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                row = json.loads(line)
                if "provenance" not in row:
                    out.append(EvalRecord.from_dict(row))
    return out
