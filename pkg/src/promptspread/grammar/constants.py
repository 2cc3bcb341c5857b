"""Constant pools and the functions they name.

Casings, item wrappers and item numberings are stored as string identifiers
so formats stay JSON-serializable; ``apply_casing`` and ``item_label`` turn
them into text.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields
from pathlib import Path

from ..errors import ConfigurationError, GrammarError

# descriptor -> text separators, also used between an enumeration label and its text
DEFAULT_SEPARATORS1 = (
    "", "::: ", ":: ", ": ", " \n\t", "\n   ", " : ", " - ", " ", "\n ",
    "\n\t", ":", "::", "- ", "\t",
)
# between an enumeration descriptor and its item label
DEFAULT_SEPARATORS2 = ("", " ", "  ", "\t")
# between joined fields
DEFAULT_SPACES = (
    "", " ", "\n", " \n", " -- ", "  ", "; \n", " || ", " <sep> ", ", ",
    " \n ", " , ", "\n ", ". ", " ,  ",
)
DEFAULT_CASINGS = ("identity", "title", "upper", "lower")
DEFAULT_ITEM_WRAPPERS = ("(x)", "x.", "x)", "x )", "[x]", "<x>")
DEFAULT_ITEM_NUMBERINGS = (
    "arabic", "upper_letter", "lower_letter", "unicode_roman", "roman_lower", "roman_upper",
)

POOL_NAMES = (
    "separators1", "separators2", "spaces", "casings", "item_wrappers", "item_numberings",
)

_ROMAN = (
    "I", "II", "III", "IV", "V", "VI", "VII", "VIII", "IX", "X",
    "XI", "XII", "XIII", "XIV", "XV", "XVI", "XVII", "XVIII", "XIX", "XX",
)


def apply_casing(casing: str, text: str) -> str:
    if casing == "identity":
        return text
    if casing == "title":
        return text.title()
    if casing == "upper":
        return text.upper()
    if casing == "lower":
        return text.lower()
    raise GrammarError(f"unknown casing {casing!r}")


def numbering_capacity(numbering: str) -> int:
    """Number of distinct items a numbering can label (indices 0..capacity-1)."""
    if numbering == "arabic":
        return 10**9
    if numbering in ("upper_letter", "lower_letter"):
        return 26
    if numbering == "unicode_roman":
        return 12  # U+2160..U+216B
    if numbering in ("roman_lower", "roman_upper"):
        return len(_ROMAN)
    raise GrammarError(f"unknown item numbering {numbering!r}")


def number_item(numbering: str, index: int) -> str:
    """Bare label for a 0-based item index; labels count from one."""
    if index < 0 or index >= numbering_capacity(numbering):
        raise GrammarError(f"item index {index} out of range for numbering {numbering!r}")
    if numbering == "arabic":
        return str(index + 1)
    if numbering == "upper_letter":
        return chr(ord("A") + index)
    if numbering == "lower_letter":
        return chr(ord("a") + index)
    if numbering == "unicode_roman":
        return chr(0x2160 + index)
    if numbering == "roman_lower":
        return _ROMAN[index].lower()
    return _ROMAN[index]


def wrap_item(wrapper: str, label: str) -> str:
    if wrapper not in DEFAULT_ITEM_WRAPPERS:
        raise GrammarError(f"unknown item wrapper {wrapper!r}")
    return wrapper.replace("x", label, 1)


def item_label(wrapper: str, numbering: str, index: int) -> str:
    return wrap_item(wrapper, number_item(numbering, index))


@dataclass(frozen=True)
class ConstantSets:
    """User-configurable pools every constant slot draws from."""

    separators1: tuple[str, ...] = DEFAULT_SEPARATORS1
    separators2: tuple[str, ...] = DEFAULT_SEPARATORS2
    spaces: tuple[str, ...] = DEFAULT_SPACES
    casings: tuple[str, ...] = DEFAULT_CASINGS
    item_wrappers: tuple[str, ...] = DEFAULT_ITEM_WRAPPERS
    item_numberings: tuple[str, ...] = DEFAULT_ITEM_NUMBERINGS

    def __post_init__(self):
        for f in fields(self):
            values = tuple(getattr(self, f.name))
            object.__setattr__(self, f.name, values)
            if not values:
                raise ConfigurationError(f"constant pool {f.name!r} is empty")
            if len(set(values)) != len(values):
                raise ConfigurationError(f"constant pool {f.name!r} has duplicates")
        for casing in self.casings:
            apply_casing(casing, "")
        for wrapper in self.item_wrappers:
            wrap_item(wrapper, "")
        for numbering in self.item_numberings:
            numbering_capacity(numbering)

    def pool(self, name: str) -> tuple[str, ...]:
        if name not in POOL_NAMES:
            raise GrammarError(f"unknown constant pool {name!r}")
        return getattr(self, name)

    def to_dict(self) -> dict:
        return {k: list(v) for k, v in asdict(self).items()}

    @classmethod
    def from_dict(cls, data: dict) -> "ConstantSets":
        unknown = set(data) - set(POOL_NAMES)
        if unknown:
            raise ConfigurationError(f"unknown constant pools: {sorted(unknown)}")
        return cls(**{k: tuple(v) for k, v in data.items()})

    @classmethod
    def load(cls, path: str | Path) -> "ConstantSets":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))
