"""Base-set elements of extended states and their JSON form."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

from .syntax import Label, parse_label


@dataclass(frozen=True)
class Bool:
    value: bool

    def __str__(self) -> str:
        return "true" if self.value else "false"


@dataclass(frozen=True)
class Int:
    value: int

    def __str__(self) -> str:
        return str(self.value)


@dataclass(frozen=True)
class _Undef:
    def __str__(self) -> str:
        return "undef"


@dataclass(frozen=True)
class Atom:
    id: int

    def __str__(self) -> str:
        return f"atom#{self.id}"


@dataclass(frozen=True)
class TreeNode:
    id: int

    def __str__(self) -> str:
        return f"node#{self.id}"


@dataclass(frozen=True)
class LabelValue:
    label: Label

    def __str__(self) -> str:
        return str(self.label)


UNDEF = _Undef()
TRUE = Bool(True)
FALSE = Bool(False)

Element = Union[Bool, Int, _Undef, Atom, TreeNode, LabelValue]

_RANK = {Bool: 0, Int: 1, _Undef: 2, Atom: 3, TreeNode: 4, LabelValue: 5}


def sort_key(e: Element) -> tuple:
    """Total order over elements: by tag, then payload."""
    if isinstance(e, LabelValue):
        return (5, e.label.kind, e.label.name)
    if isinstance(e, (Bool, Int)):
        return (_RANK[type(e)], int(e.value))
    if isinstance(e, (Atom, TreeNode)):
        return (_RANK[type(e)], e.id)
    return (2, 0)


def is_node_like(e: Element) -> bool:
    """Only atoms and tree nodes may take part in the tree relations."""
    return isinstance(e, (Atom, TreeNode))


def to_json(e: Element):
    if isinstance(e, Bool):
        return {"bool": e.value}
    if isinstance(e, Int):
        return {"int": e.value}
    if isinstance(e, Atom):
        return {"atom": e.id}
    if isinstance(e, TreeNode):
        return {"node": e.id}
    if isinstance(e, LabelValue):
        return {"lbl": e.label.spell()}
    return "undef"


def from_json(obj) -> Element:
    if obj == "undef":
        return UNDEF
    if isinstance(obj, dict) and len(obj) == 1:
        (tag, v), = obj.items()
        if tag == "bool" and isinstance(v, bool):
            return Bool(v)
        if tag == "int" and isinstance(v, int) and not isinstance(v, bool):
            return Int(v)
        if tag == "atom" and isinstance(v, int) and v >= 0:
            return Atom(v)
        if tag == "node" and isinstance(v, int) and v >= 0:
            return TreeNode(v)
        if tag == "lbl" and isinstance(v, str):
            return LabelValue(parse_label(v))
    raise ValueError(f"not an element: {obj!r}")
