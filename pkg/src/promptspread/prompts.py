"""Task data and full n-shot prompt assembly."""
from __future__ import annotations

import re
import warnings
from dataclasses import dataclass, field
from typing import Sequence

from .errors import ConfigurationError, GrammarError, LoadError
from .grammar import Format, render_format

__all__ = [
    "DEFAULT_JOINER", "MAX_INSTANCES", "DataInstance", "LabelCollisionWarning", "TaskSpec",
    "answer_options", "answer_text", "build_prompt", "find_label_collisions",
    "find_label_occurrences", "rewrite_instruction",
]

MAX_INSTANCES = 1000
DEFAULT_JOINER = "\n\n"


class LabelCollisionWarning(UserWarning):
    """An option label also occurs inside a longer word of the instruction."""

    def __init__(self, label: str, positions: list[int]):
        super().__init__(f"label {label!r} also occurs inside other words at offsets {positions}")
        self.label = label
        self.positions = positions


@dataclass(frozen=True)
class DataInstance:
    id: str
    field_values: tuple[str, ...]
    gold: str
    options: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "field_values", tuple(self.field_values))
        object.__setattr__(self, "options", tuple(self.options))
        if self.options:
            if len(set(self.options)) != len(self.options):
                raise LoadError(f"instance {self.id!r} has duplicate options")
            if self.gold not in self.options:
                raise LoadError(f"instance {self.id!r}: gold {self.gold!r} is not an option")

    def slot_values(self) -> tuple[str, ...]:
        """Positional values placeholders bind to: field values, then options."""
        return self.field_values + self.options

    def to_dict(self) -> dict:
        out = {"id": self.id, "field_values": list(self.field_values), "gold": self.gold}
        if self.options:
            out["options"] = list(self.options)
        return out


@dataclass(frozen=True)
class TaskSpec:
    """A task: instruction, evaluation instances, frozen few-shot exemplars, format.

    ``answer_mode`` is ``"text"`` when the answer slot carries the gold string
    and ``"label"`` when it carries the enumeration label of the gold option
    (multiple choice).  ``option_labels`` are the labels the instruction
    mentions for the original format; ``label_offsets`` optionally pins the
    exact instruction offsets to rewrite.
    """

    task_id: str
    instruction: str
    instances: tuple[DataInstance, ...]
    original_format: Format
    fewshot: tuple[DataInstance, ...] = ()
    option_labels: tuple[str, ...] | None = None
    label_offsets: tuple[int, ...] | None = None
    answer_mode: str = "text"
    metadata: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "instances", tuple(self.instances))
        object.__setattr__(self, "fewshot", tuple(self.fewshot))
        if self.option_labels is not None:
            object.__setattr__(self, "option_labels", tuple(self.option_labels))
        if self.label_offsets is not None:
            object.__setattr__(self, "label_offsets", tuple(self.label_offsets))
        if self.answer_mode not in ("text", "label"):
            raise LoadError(f"answer_mode must be 'text' or 'label', got {self.answer_mode!r}")
        if len(self.instances) > MAX_INSTANCES:
            raise LoadError(f"task has {len(self.instances)} instances; at most {MAX_INSTANCES}")
        ids = [i.id for i in self.instances]
        if len(set(ids)) != len(ids):
            raise LoadError("instance ids are not unique")
        overlap = set(ids) & set(self.fewshot_ids)
        if overlap:
            raise LoadError(f"few-shot exemplars are also evaluation instances: {sorted(overlap)}")
        if self.answer_mode == "label" and self.original_format.option_labels() is None:
            raise LoadError("answer_mode 'label' needs a format with an enumeration")

    @property
    def fewshot_ids(self) -> tuple[str, ...]:
        return tuple(i.id for i in self.fewshot)


def answer_text(task: TaskSpec, fmt: Format, instance: DataInstance) -> str:
    """What the answer slot holds for ``instance`` under ``fmt``."""
    if task.answer_mode == "text":
        return instance.gold
    return answer_options(task, fmt, instance)[instance.options.index(instance.gold)]


def answer_options(task: TaskSpec, fmt: Format, instance: DataInstance) -> list[str]:
    """Valid answers under ``fmt``: option labels in label mode, option strings otherwise."""
    if task.answer_mode == "text":
        return list(instance.options)
    labels = fmt.option_labels()
    if labels is None or len(labels) < len(instance.options):
        raise GrammarError(f"format labels {labels} cannot cover {len(instance.options)} options")
    return labels[: len(instance.options)]


def find_label_occurrences(instruction: str, labels: Sequence[str]) -> list[tuple[int, str]]:
    """Whole-word occurrences of any label, longest labels taking precedence."""
    alternation = "|".join(re.escape(l) for l in sorted(set(labels), key=len, reverse=True))
    return [(m.start(), m.group(0))
            for m in re.finditer(rf"(?<!\w)(?:{alternation})(?!\w)", instruction)]


def find_label_collisions(instruction: str, labels: Sequence[str]) -> dict[str, list[int]]:
    """Offsets where a label appears as part of a longer word."""
    whole = {pos for pos, _ in find_label_occurrences(instruction, labels)}
    out: dict[str, list[int]] = {}
    for label in labels:
        hits = [m.start() for m in re.finditer(re.escape(label), instruction)
                if m.start() not in whole]
        if hits:
            out[label] = hits
    return out


def rewrite_instruction(task: TaskSpec, fmt: Format) -> str:
    """Point the instruction's option labels at the labels ``fmt`` renders."""
    new_labels = fmt.option_labels()
    if not task.option_labels or new_labels is None:
        return task.instruction
    original = task.option_labels
    mapping = dict(zip(original, new_labels))
    inst = task.instruction

    if task.label_offsets is not None:
        spans = []
        for offset in task.label_offsets:
            match = [l for l in sorted(original, key=len, reverse=True) if inst.startswith(l, offset)]
            if not match:
                raise ConfigurationError(f"no option label at instruction offset {offset}")
            spans.append((offset, match[0]))
    else:
        for label, positions in find_label_collisions(inst, original).items():
            warnings.warn(LabelCollisionWarning(label, positions), stacklevel=2)
        spans = find_label_occurrences(inst, original)

    pieces, cursor = [], 0
    for offset, label in sorted(spans):
        pieces.append(inst[cursor:offset])
        pieces.append(mapping.get(label, label))
        cursor = offset + len(label)
    pieces.append(inst[cursor:])
    return "".join(pieces)


def build_prompt(task: TaskSpec, fmt: Format, n_shots: int, query: DataInstance,
                 joiner: str = DEFAULT_JOINER) -> str:
    """Instruction, ``n_shots`` formatted exemplars and the query, separated by ``joiner``.

    Exemplars carry their answer; the query's answer slot is left empty.
    """
    if n_shots < 0 or n_shots > len(task.fewshot):
        raise ConfigurationError(
            f"{n_shots}-shot prompt requested but task has {len(task.fewshot)} exemplars")
    if query.id in task.fewshot_ids:
        raise ConfigurationError(f"query {query.id!r} is a few-shot exemplar")
    parts = [rewrite_instruction(task, fmt)]
    for ex in task.fewshot[:n_shots]:
        parts.append(render_format(fmt, ex, answer=answer_text(task, fmt, ex)))
    parts.append(render_format(fmt, query, answer=""))
    return joiner.join(parts)
