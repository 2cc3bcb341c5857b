"""Shared builders for tests: random format trees and an independent rule checker."""
from __future__ import annotations

import numpy as np

from promptspread.grammar import (
    ConstantSets, descriptor, enumeration, field, format_to_dict, join, make_format, text,
)
from promptspread.prompts import DataInstance, TaskSpec

WORDS = ("Passage", "Question", "Answer", "Premise", "Hypothesis", "Options", "Context", "Label")

INSTRUCTION = ("Given a sentence and two words that appear in it, answer which one of the two "
               "(A or B) appeared first in the sentence.")

# one-shot reference prompts: letter labels, then the same task with roman labels
BOX_1 = (
    "Given a sentence and two words that appear in it, answer which one of the two (A or B) "
    "appeared first in the sentence.\n\n"
    "The quick brown fox jumps\nOPTIONS:\nCHOICE (A): fox ; CHOICE (B): brown\nANSWER: B\n\n"
    "Over the lazy dog\nOPTIONS:\nCHOICE (A): lazy ; CHOICE (B): dog\nANSWER: "
)
BOX_2 = (
    "Given a sentence and two words that appear in it, answer which one of the two (I or II) "
    "appeared first in the sentence.\n\n"
    "The quick brown fox jumps\nOPTIONS:\nCHOICE (I): fox ; CHOICE (II): brown\nANSWER: II\n\n"
    "Over the lazy dog\nOPTIONS:\nCHOICE (I): lazy ; CHOICE (II): dog\nANSWER: "
)


def boxed_format():
    return make_format(join([
        text(), descriptor("OPTIONS", ":"),
        enumeration("CHOICE", [0, 1], ": ", " ", " ; "), field("ANSWER", ": "),
    ], "\n"))


def boxed_task(fmt=None):
    fmt = fmt or boxed_format()
    shot = DataInstance("s", ["The quick brown fox jumps"], "brown", ["fox", "brown"])
    query = DataInstance("q", ["Over the lazy dog"], "lazy", ["lazy", "dog"])
    task = TaskSpec("boxed", INSTRUCTION, (query,), fmt, (shot,), option_labels=["A", "B"],
                    answer_mode="label")
    return task, query


def _leaf(rng: np.random.Generator, depth_words):
    kind = rng.integers(4)
    word = WORDS[int(rng.integers(len(WORDS)))]
    if kind == 0:
        return text()
    if kind == 1:
        return field(word, ": ")
    if kind == 2:
        n = int(rng.integers(2, 5))
        items = [int(i) for i in rng.permutation(6)[:n]]
        return enumeration(word, items, ": ", " ", "\n")
    return field(word, " - ")


def random_tree(rng: np.random.Generator, depth: int = 2):
    """A restriction-valid tree: every join is newline-spaced."""
    if depth == 0 or rng.random() < 0.3:
        return _leaf(rng, depth)
    n = int(rng.integers(2, 4))
    return join([random_tree(rng, depth - 1) for _ in range(n)], "\n")


def random_format(rng: np.random.Generator, depth: int = 2):
    tree = random_tree(rng, depth)
    if not hasattr(tree, "children"):
        tree = join([tree, field("Answer", ": ")], "\n")
    return make_format(tree)


def random_assignment(fmt, sets: ConstantSets, rng: np.random.Generator):
    """Any assignment of group values, valid or not."""
    from promptspread.grammar import candidates

    changes = {g: c[int(rng.integers(len(c)))]
               for g, c in ((g, candidates(const, sets)) for g, const in fmt.groups().items())}
    return fmt.assign(changes)


# --- independent restriction checker over the JSON form ---------------------


def _text_seps(node, groups):
    """Separators with text after them, collected from the serialized tree."""
    kind = node["kind"]
    if kind == "field":
        return [groups[node["separator"]]["value"]]
    if kind == "enumeration":
        return [groups[node["separator1"]]["value"], groups[node["separator2"]]["value"]]
    if kind == "join":
        return [s for c in node["children"] for s in _text_seps(c, groups)]
    return []


def reference_rules(fmt) -> set[int]:
    """Rule numbers (1-4) that the format breaks, computed from its JSON form."""
    d = format_to_dict(fmt)
    groups = d["groups"]
    broken: set[int] = set()
    stack = [d["root"]]
    while stack:
        node = stack.pop()
        kind = node["kind"]
        if kind == "field" and groups[node["separator"]]["value"] == "":
            broken.add(3)
        if kind == "enumeration":
            s1 = groups[node["separator1"]]["value"]
            s2 = groups[node["separator2"]]["value"]
            c = groups[node["space"]]["value"]
            if s1 == "":
                broken.add(3)
            if ("\n" in s1 + s2) and "\n" not in c:
                broken.add(2)
        if kind == "join":
            c = groups[node["space"]]["value"]
            if "\n" not in c and any("\n" in s for s in _text_seps(node, groups)):
                broken.add(1)
            if c == "" and any(ch["kind"] != "descriptor" for ch in node["children"][:-1]):
                broken.add(4)
            stack.extend(node["children"])
    return broken
