"""JSON round-tripping for formats.

Two input shapes are accepted.  The full shape (what :func:`format_to_dict`
writes) has a ``groups`` table and node constants are group ids::

    {"root": {"kind": "field", "descriptor": "Answer",
              "separator": "separators1.0", "casing": "casings.0",
              "binding": null},
     "groups": {"separators1.0": {"pool": "separators1", "value": ": "},
                "casings.0": {"pool": "casings", "value": "identity"}}}

The literal shape omits ``groups``; node constants are then the constant
strings themselves (or ``{"value": ..., "group": ...}`` objects to force a
grouping) and equality groups are computed by :func:`make_format`.
"""
from __future__ import annotations

import json
from pathlib import Path

from ..errors import GrammarError
from .nodes import (
    ANSWER, CONST_FIELDS, CONST_POOLS, UNBOUND, Const, DescriptorOnly, Enumeration, Field,
    Format, Join, Node, TextOnly, make_format,
)

_KINDS = {
    "text": TextOnly,
    "descriptor": DescriptorOnly,
    "field": Field,
    "join": Join,
    "enumeration": Enumeration,
}
_KIND_OF = {cls: kind for kind, cls in _KINDS.items()}


def _binding_out(b):
    return None if b is ANSWER else b


def _binding_in(b, where):
    if b is None:
        return ANSWER
    if b == "auto":
        return UNBOUND
    if not isinstance(b, int) or isinstance(b, bool) or b < 0:
        raise GrammarError(f"{where}: binding must be a non-negative integer, null or 'auto'")
    return b


def node_to_dict(node: Node) -> dict:
    out: dict = {"kind": _KIND_OF[type(node)]}
    if isinstance(node, (DescriptorOnly, Field, Enumeration)):
        out["descriptor"] = node.descriptor
    for name in CONST_FIELDS[type(node)]:
        out[name] = getattr(node, name).group
    if isinstance(node, (TextOnly, Field)):
        out["binding"] = _binding_out(node.binding)
    if isinstance(node, Enumeration):
        out["items"] = list(node.items)
        out["bindings"] = [_binding_out(b) for b in node.bindings]
    if isinstance(node, Join):
        out["children"] = [node_to_dict(c) for c in node.children]
    return out


def format_to_dict(fmt: Format) -> dict:
    groups = {}
    for gid, const in fmt.groups().items():
        entry = {"pool": const.pool, "value": const.value}
        if const.origin != const.value:
            entry["origin"] = const.origin
        groups[gid] = entry
    return {"root": node_to_dict(fmt.root), "groups": groups}


def _node_from_dict(data: dict, groups: dict | None, where: str) -> Node:
    if not isinstance(data, dict) or data.get("kind") not in _KINDS:
        raise GrammarError(f"{where}: expected a node with kind in {sorted(_KINDS)}")
    cls = _KINDS[data["kind"]]
    kwargs: dict = {}
    for name in CONST_FIELDS[cls]:
        if name not in data:
            raise GrammarError(f"{where}: missing {name!r}")
        kwargs[name] = _const_from(data[name], CONST_POOLS[name], groups, f"{where}.{name}")
    if cls in (DescriptorOnly, Field, Enumeration):
        if not isinstance(data.get("descriptor"), str):
            raise GrammarError(f"{where}: missing descriptor string")
        kwargs["descriptor"] = data["descriptor"]
    if cls in (TextOnly, Field):
        kwargs["binding"] = _binding_in(data.get("binding", "auto"), where)
    if cls is Enumeration:
        kwargs["items"] = tuple(data.get("items", ()))
        kwargs["bindings"] = tuple(_binding_in(b, where) for b in data.get("bindings", ()))
    if cls is Join:
        children = data.get("children")
        if not isinstance(children, list):
            raise GrammarError(f"{where}: join needs a children list")
        kwargs["children"] = tuple(
            _node_from_dict(c, groups, f"{where}.children[{i}]") for i, c in enumerate(children)
        )
    return cls(**kwargs)


def _const_from(raw, pool: str, groups: dict | None, where: str) -> Const:
    if groups is not None:
        if raw not in groups:
            raise GrammarError(f"{where}: unknown group {raw!r}")
        entry = groups[raw]
        if entry.get("pool") != pool:
            raise GrammarError(f"{where}: group {raw!r} is from pool {entry.get('pool')!r}, need {pool!r}")
        return Const(pool, entry["value"], raw, entry.get("origin", entry["value"]))
    if isinstance(raw, str):
        return Const(pool, raw)
    if isinstance(raw, dict) and isinstance(raw.get("value"), str):
        return Const(pool, raw["value"], raw.get("group"))
    raise GrammarError(f"{where}: expected a constant string")


def format_from_dict(data: dict) -> Format:
    if not isinstance(data, dict) or "root" not in data:
        raise GrammarError("format must be an object with a 'root' node")
    groups = data.get("groups")
    root = _node_from_dict(data["root"], groups, "$.root")
    return make_format(root)


def dumps_format(fmt: Format, **kwargs) -> str:
    kwargs.setdefault("ensure_ascii", False)
    return json.dumps(format_to_dict(fmt), **kwargs)


def load_format(path: str | Path) -> Format:
    with open(path, encoding="utf-8") as fh:
        return format_from_dict(json.load(fh))
