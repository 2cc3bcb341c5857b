"""Contextual restrictions that keep formats natural.

Rules checked, by number:

1. a join whose space has no newline may not contain, anywhere below it, a
   field or enumeration separator with a newline;
2. an enumeration with a newline in either separator needs one in its space;
3. a field separator (including an enumeration's label separator) is never
   empty;
4. an empty join space is only allowed when every child but the last is a
   descriptor without text.  Enumeration spaces are not covered: items
   glued together (``Sentence[I]- {}Sentence[II]- {}``) occur in practice.

Descriptor-only nodes have no text, so their separators are exempt from the
newline rules.  Rule 0 flags enumerations whose numbering cannot label all
of their items (e.g. unicode numerals past twelve).
"""
from __future__ import annotations

from dataclasses import dataclass

from .constants import numbering_capacity
from .nodes import DescriptorOnly, Enumeration, Field, Format, Join, Node, walk


@dataclass(frozen=True)
class Violation:
    rule: int
    path: str
    message: str


def _newline_separators(node: Node):
    """Yield (description, value) for every newline-bearing text separator below node."""
    for n in walk(node):
        if isinstance(n, Field) and "\n" in n.separator.value:
            yield f"field {n.descriptor!r} separator", n.separator.value
        elif isinstance(n, Enumeration):
            for name in ("separator1", "separator2"):
                value = getattr(n, name).value
                if "\n" in value:
                    yield f"enumeration {n.descriptor!r} {name}", value


def validate_restrictions(fmt: Format | Node) -> list[Violation]:
    root = fmt.root if isinstance(fmt, Format) else fmt
    violations: list[Violation] = []

    def visit(node: Node, path: str):
        if isinstance(node, Field) and node.separator.value == "":
            violations.append(Violation(3, path, f"field {node.descriptor!r} has an empty separator"))
        elif isinstance(node, Enumeration):
            s1, s2, c = node.separator1.value, node.separator2.value, node.space.value
            if s1 == "":
                violations.append(Violation(3, path, "enumeration items have an empty separator"))
            if ("\n" in s1 or "\n" in s2) and "\n" not in c:
                violations.append(Violation(2, path, "enumeration separator has a newline but its space does not"))
            if max(node.items) >= numbering_capacity(node.numbering.value):
                violations.append(Violation(0, path, f"numbering {node.numbering.value!r} cannot label item {max(node.items)}"))
        elif isinstance(node, Join):
            space = node.space.value
            if space == "" and not all(isinstance(c, DescriptorOnly) for c in node.children[:-1]):
                violations.append(Violation(4, path, "empty space between fields that carry text"))
            if "\n" not in space:
                for i, child in enumerate(node.children):
                    for what, value in _newline_separators(child):
                        violations.append(Violation(
                            1, f"{path}.children[{i}]",
                            f"{what} {value!r} has a newline inside a join spaced by {space!r}",
                        ))
            for i, child in enumerate(node.children):
                visit(child, f"{path}.children[{i}]")

    visit(root, "$")
    return violations


def is_valid(fmt: Format | Node) -> bool:
    return not validate_restrictions(fmt)
