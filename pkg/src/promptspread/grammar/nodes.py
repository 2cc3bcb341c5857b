"""Prompt-format syntax trees, rendering and equivalence.

A format is a tree of five node kinds.  Every constant (separator, space,
casing, item wrapper, item numbering) is a :class:`Const` slot carrying its
pool name, current value and equality group; all slots of one group always
hold the same value and change together.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, replace
from typing import Iterator, Mapping, Sequence, Union

from ..errors import BindingError, GrammarError
from .constants import POOL_NAMES, apply_casing, item_label, number_item

# placeholder binding that has not been assigned yet; make_format resolves it
UNBOUND = -1
# binding of the answer slot (gold for exemplars, empty for the query)
ANSWER = None


@dataclass(frozen=True)
class Const:
    pool: str
    value: str
    group: str | None = None
    origin: str | None = None  # value in the original format; always a valid choice

    def __post_init__(self):
        if self.pool not in POOL_NAMES:
            raise GrammarError(f"unknown constant pool {self.pool!r}")


@dataclass(frozen=True)
class TextOnly:
    """Bare placeholder."""

    binding: int | None = UNBOUND


@dataclass(frozen=True)
class DescriptorOnly:
    """Descriptor and separator with no text, e.g. ``Options:``."""

    descriptor: str
    separator: Const
    casing: Const


@dataclass(frozen=True)
class Field:
    descriptor: str
    separator: Const
    casing: Const
    binding: int | None = UNBOUND


@dataclass(frozen=True)
class Join:
    children: tuple
    space: Const

    def __post_init__(self):
        object.__setattr__(self, "children", tuple(self.children))
        if len(self.children) < 2:
            raise GrammarError("a join needs at least two children")


@dataclass(frozen=True)
class Enumeration:
    descriptor: str
    items: tuple[int, ...]
    separator1: Const
    separator2: Const
    space: Const
    wrapper: Const
    numbering: Const
    casing: Const
    bindings: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "items", tuple(int(i) for i in self.items))
        bindings = tuple(self.bindings) or (UNBOUND,) * len(self.items)
        object.__setattr__(self, "bindings", bindings)
        if len(self.items) < 2:
            raise GrammarError("an enumeration needs at least two items")
        if len(set(self.items)) != len(self.items):
            raise GrammarError(f"enumeration item indices are not distinct: {self.items}")
        if any(i < 0 for i in self.items):
            raise GrammarError("enumeration item indices must be natural numbers")
        if len(bindings) != len(self.items):
            raise GrammarError("enumeration needs one binding per item")


Node = Union[TextOnly, DescriptorOnly, Field, Join, Enumeration]

CONST_FIELDS = {
    TextOnly: (),
    DescriptorOnly: ("separator", "casing"),
    Field: ("separator", "casing"),
    Join: ("space",),
    Enumeration: ("separator1", "separator2", "space", "wrapper", "numbering", "casing"),
}
CONST_POOLS = {
    "separator": "separators1",
    "separator1": "separators1",
    "separator2": "separators2",
    "space": "spaces",
    "casing": "casings",
    "wrapper": "item_wrappers",
    "numbering": "item_numberings",
}


def walk(node: Node) -> Iterator[Node]:
    """Depth-first pre-order traversal."""
    yield node
    if isinstance(node, Join):
        for child in node.children:
            yield from walk(child)


def iter_consts(node: Node) -> Iterator[Const]:
    for n in walk(node):
        for name in CONST_FIELDS[type(n)]:
            yield getattr(n, name)


def map_consts(node: Node, fn) -> Node:
    """Rebuild the tree with every Const replaced by ``fn(const)``."""
    changes = {name: fn(getattr(node, name)) for name in CONST_FIELDS[type(node)]}
    if isinstance(node, Join):
        changes["children"] = tuple(map_consts(c, fn) for c in node.children)
    return replace(node, **changes) if changes else node


@dataclass(frozen=True)
class Format:
    """An immutable prompt format: a tree plus its equality groups."""

    root: Node

    def __post_init__(self):
        values: dict[str, Const] = {}
        for const in iter_consts(self.root):
            if const.group is None:
                raise GrammarError("format has ungrouped constants; build it with make_format")
            seen = values.setdefault(const.group, const)
            if seen.pool != const.pool:
                raise GrammarError(f"group {const.group!r} mixes pools {seen.pool!r} and {const.pool!r}")
            if seen.value != const.value or seen.origin != const.origin:
                raise GrammarError(f"group {const.group!r} holds inconsistent values")

    def groups(self) -> dict[str, Const]:
        """First slot of every group, in depth-first order."""
        out: dict[str, Const] = {}
        for const in iter_consts(self.root):
            out.setdefault(const.group, const)
        return out

    def values(self) -> dict[str, str]:
        return {g: c.value for g, c in self.groups().items()}

    def assign(self, changes: Mapping[str, str]) -> "Format":
        unknown = set(changes) - set(self.groups())
        if unknown:
            raise GrammarError(f"unknown equality groups: {sorted(unknown)}")

        def swap(const: Const) -> Const:
            if const.group in changes:
                return replace(const, value=changes[const.group])
            return const

        return Format(map_consts(self.root, swap))

    def key(self) -> str:
        """Canonical serialization, used for deduplication and cache keys."""
        from .serialize import format_to_dict

        return json.dumps(format_to_dict(self), sort_keys=True, ensure_ascii=False,
                          separators=(",", ":"))

    @property
    def format_id(self) -> str:
        return hashlib.sha1(self.key().encode("utf-8")).hexdigest()[:12]

    def enumerations(self) -> list[Enumeration]:
        return [n for n in walk(self.root) if isinstance(n, Enumeration)]

    def option_labels(self) -> list[str] | None:
        """Bare labels of the first enumeration's items, or None without one."""
        enums = self.enumerations()
        if not enums:
            return None
        enum = enums[0]
        return [number_item(enum.numbering.value, j) for j in enum.items]


def make_format(root: Node, *, answer_last: bool = True) -> Format:
    """Finalize a drafted tree into a :class:`Format`.

    Constants without a group are grouped with every other ungrouped
    constant of the same pool and value.  Unbound placeholders are bound
    positionally in depth-first order; with ``answer_last`` the final
    placeholder becomes the answer slot when it is unbound.
    """
    group_ids: dict[tuple[str, str], str] = {}
    counters: dict[str, int] = {}

    def group(const: Const) -> Const:
        origin = const.value if const.origin is None else const.origin
        if const.group is not None:
            return replace(const, origin=origin)
        k = (const.pool, const.value)
        if k not in group_ids:
            n = counters.get(const.pool, 0)
            counters[const.pool] = n + 1
            group_ids[k] = f"{const.pool}.{n}"
        return replace(const, group=group_ids[k], origin=origin)

    root = map_consts(root, group)

    slots = []
    for n in walk(root):
        if isinstance(n, (TextOnly, Field)):
            slots.append(n.binding)
        elif isinstance(n, Enumeration):
            slots.extend(n.bindings)
    answer_at = len(slots) - 1 if answer_last and slots and slots[-1] == UNBOUND else None
    position = iter(range(len(slots)))

    def bind(b):
        i = next(position)
        if b != UNBOUND:
            return b
        return ANSWER if i == answer_at else i

    def rebind(node: Node) -> Node:
        if isinstance(node, (TextOnly, Field)):
            return replace(node, binding=bind(node.binding))
        if isinstance(node, Enumeration):
            return replace(node, bindings=tuple(bind(b) for b in node.bindings))
        if isinstance(node, Join):
            return replace(node, children=tuple(rebind(c) for c in node.children))
        return node

    return Format(rebind(root))


# -- drafting helpers -------------------------------------------------------


def text(binding: int | None = UNBOUND) -> TextOnly:
    return TextOnly(binding)


def descriptor(d: str, separator: str, casing: str = "identity") -> DescriptorOnly:
    return DescriptorOnly(d, Const("separators1", separator), Const("casings", casing))


def field(d: str, separator: str, casing: str = "identity", binding: int | None = UNBOUND) -> Field:
    return Field(d, Const("separators1", separator), Const("casings", casing), binding)


def join(children: Sequence[Node], space: str) -> Join:
    return Join(tuple(children), Const("spaces", space))


def enumeration(d: str, items: Sequence[int], separator1: str, separator2: str, space: str,
                wrapper: str = "(x)", numbering: str = "upper_letter", casing: str = "identity",
                bindings: Sequence = ()) -> Enumeration:
    return Enumeration(
        d, tuple(items),
        Const("separators1", separator1), Const("separators2", separator2),
        Const("spaces", space), Const("item_wrappers", wrapper),
        Const("item_numberings", numbering), Const("casings", casing),
        tuple(bindings),
    )


# -- rendering --------------------------------------------------------------


def _slot_values(instance) -> Sequence[str]:
    values = getattr(instance, "slot_values", None)
    if values is not None:
        return values()
    return instance


def render_format(fmt: Format | Node, instance, answer: str = "") -> str:
    """Render a format over a data instance.

    ``instance`` is either a DataInstance (its field values followed by its
    options form the positional value list) or a plain sequence of strings.
    The answer slot receives ``answer``.
    """
    values = _slot_values(instance)
    root = fmt.root if isinstance(fmt, Format) else fmt

    def value(binding) -> str:
        if binding is ANSWER:
            return answer
        if binding == UNBOUND or not 0 <= binding < len(values):
            raise BindingError(f"binding {binding} does not resolve ({len(values)} values)")
        return values[binding]

    def render(node: Node) -> str:
        if isinstance(node, TextOnly):
            return value(node.binding)
        if isinstance(node, DescriptorOnly):
            return apply_casing(node.casing.value, node.descriptor) + node.separator.value
        if isinstance(node, Field):
            return (apply_casing(node.casing.value, node.descriptor) + node.separator.value
                    + value(node.binding))
        if isinstance(node, Join):
            return node.space.value.join(render(c) for c in node.children)
        head = apply_casing(node.casing.value, node.descriptor) + node.separator2.value
        parts = [
            head + item_label(node.wrapper.value, node.numbering.value, j)
            + node.separator1.value + value(b)
            for j, b in zip(node.items, node.bindings)
        ]
        return node.space.value.join(parts)

    return render(root)


# -- equivalence ------------------------------------------------------------


def nodes_equivalent(a: Node, b: Node) -> bool:
    if type(a) is not type(b):
        return False
    if isinstance(a, TextOnly):
        return True
    if isinstance(a, (DescriptorOnly, Field)):
        return a.descriptor == b.descriptor
    if isinstance(a, Enumeration):
        return a.descriptor == b.descriptor and a.items == b.items
    return len(a.children) == len(b.children) and all(
        nodes_equivalent(x, y) for x, y in zip(a.children, b.children)
    )


def formats_equivalent(p1: Format | Node, p2: Format | Node) -> bool:
    """Same rule applications and descriptors; constant choices are ignored."""
    a = p1.root if isinstance(p1, Format) else p1
    b = p2.root if isinstance(p2, Format) else p2
    return nodes_equivalent(a, b)
