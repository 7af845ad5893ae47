"""Rules as finite syntax-tree structures.

A rule is stored in the state as nodes with a root, a ``child`` relation, a
next-``sibling`` relation and a total ``label`` function.  Decoding reads the
rule back from whatever those relations currently say; node-path constants
``node<w>`` are bound by position and are recomputed after every change.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Mapping, Optional

from . import syntax
from .elements import UNDEF, TreeNode, from_json, sort_key, to_json
from .syntax import (
    Apply, ArityError, Eval, If, Import, Label, Par, Rule, Term, UpdateRule, Variable,
    parse_label,
)

NodePath = tuple[int, ...]


class DecodeError(Exception):
    pass


class CycleDetected(DecodeError):
    pass


class MultipleParents(DecodeError):
    pass


class AmbiguousSiblingOrder(DecodeError):
    pass


class ArityMismatch(DecodeError):
    def __init__(self, label, found: int, message: str = ""):
        self.label = label
        self.found = found
        super().__init__(message or f"{label} with {found} children")


class UnknownLabel(DecodeError):
    pass


class MalformedRule(DecodeError):
    pass


class EvalInsideEval(DecodeError):
    pass


class NodeNotInTree(Exception):
    pass


@dataclass(frozen=True)
class RuleTree:
    root: object
    child: frozenset = frozenset()
    sibling: frozenset = frozenset()
    labels: Mapping = field(default_factory=dict)
    paths: Mapping = field(default_factory=dict)

    def nodes(self) -> set:
        """Every element taking part in the tree relations (reachable or not)."""
        out = {self.root, *self.labels}
        for a, b in self.child | self.sibling:
            out.add(a)
            out.add(b)
        return out

    def reachable(self) -> list:
        return [self.root, *self.paths.values()]


def path_str(path: NodePath) -> str:
    return ".".join(map(str, path))


def _children_index(tree: RuleTree) -> dict:
    kids: dict = {}
    for p, c in tree.child:
        kids.setdefault(p, set()).add(c)
    return kids


def _succ_index(tree: RuleTree) -> dict:
    succ: dict = {}
    for a, b in tree.sibling:
        succ.setdefault(a, set()).add(b)
    return succ


def _order(node, kids: set, succ: dict) -> list:
    """Arrange ``kids`` along the sibling relation restricted to them."""
    if not kids:
        return []
    nxt = {}
    has_pred = set()
    for k in kids:
        targets = succ.get(k, set()) & kids
        if len(targets) > 1:
            raise AmbiguousSiblingOrder(f"children of {node}: {k} has {len(targets)} next siblings")
        if targets:
            (t,) = targets
            nxt[k] = t
            if t in has_pred:
                raise AmbiguousSiblingOrder(f"children of {node}: {t} has two previous siblings")
            has_pred.add(t)
    heads = [k for k in kids if k not in has_pred]
    if len(heads) != 1:
        raise AmbiguousSiblingOrder(
            f"children of {node} have {len(heads)} chain heads, expected exactly one")
    order = [heads[0]]
    while order[-1] in nxt:
        order.append(nxt[order[-1]])
    if len(order) != len(kids):
        raise AmbiguousSiblingOrder(f"children of {node} do not form a single sibling chain")
    return order


def layout(tree: RuleTree, start=None) -> tuple[dict, dict]:
    """Ordered children and paths of the part reachable from ``start``.

    Raises CycleDetected, MultipleParents or AmbiguousSiblingOrder when that
    part is not a tree with linearly ordered children.
    """
    start = tree.root if start is None else start
    kids = _children_index(tree)
    succ = _succ_index(tree)
    ordered: dict = {}
    paths: dict = {start: ()}
    parent: dict = {start: None}
    queue = [start]
    while queue:
        n = queue.pop()
        cs = _order(n, kids.get(n, set()), succ)
        ordered[n] = cs
        for i, c in enumerate(cs, 1):
            if c in paths:
                a = n
                while a is not None and a != c:
                    a = parent[a]
                if a == c:
                    raise CycleDetected(f"{c} is its own ancestor")
                raise MultipleParents(f"{c} has parents {parent[c]} and {n}")
            paths[c] = paths[n] + (i,)
            parent[c] = n
            queue.append(c)
    return ordered, paths


def recompute_paths(tree: RuleTree) -> dict:
    _, paths = layout(tree)
    return {p: n for n, p in sorted(paths.items(), key=lambda kv: kv[1]) if p}


def with_paths(tree: RuleTree) -> RuleTree:
    return replace(tree, paths=recompute_paths(tree))


# ---------------------------------------------------------------------------
# encode

def _parts(x) -> tuple[Label, list]:
    """Label and ordered children of a rule, term, or import binder."""
    if isinstance(x, str):
        return Label("var", x), []
    if isinstance(x, Variable):
        return Label("var", x.name), []
    if isinstance(x, Apply):
        return Label("sym", x.symbol.name), list(x.args)
    if isinstance(x, UpdateRule):
        return Label("rule", "update"), [x.lhs, x.rhs]
    if isinstance(x, Par):
        return Label("rule", "par"), list(x.body)
    if isinstance(x, If):
        return Label("rule", "if"), [x.guard, x.then] + ([x.else_] if x.else_ is not None else [])
    if isinstance(x, Import):
        return Label("rule", "import"), [*x.vars, x.body]
    if isinstance(x, Eval):
        return Label("rule", "eval"), [x.arg]
    raise TypeError(x)


def encode_rule(rule: Rule, first_id: int = 0) -> RuleTree:
    """Encode ``rule`` with fresh TreeNode ids handed out in preorder."""
    child, sibling, labels = set(), set(), {}
    next_id = first_id

    def enc(x) -> TreeNode:
        nonlocal next_id
        n = TreeNode(next_id)
        next_id += 1
        labels[n], parts = _parts(x)
        kids = [enc(p) for p in parts]
        child.update((n, k) for k in kids)
        sibling.update(zip(kids, kids[1:]))
        return n

    root = enc(rule)
    return with_paths(RuleTree(root, frozenset(child), frozenset(sibling), labels))


# ---------------------------------------------------------------------------
# decode

class _Decoder:
    def __init__(self, tree: RuleTree, start, arities: Optional[Mapping[str, int]],
                 allow_eval: bool, bound: frozenset):
        self.tree = tree
        self.kids, _ = layout(tree, start)
        self.arities = arities or {}
        self.allow_eval = allow_eval
        self.bound = bound

    def label(self, n) -> Label:
        lab = self.tree.labels.get(n)
        if lab is None:
            raise UnknownLabel(f"node {n} has no label")
        return lab

    def term(self, n, scope: frozenset) -> Term:
        lab = self.label(n)
        kids = self.kids[n]
        if lab.kind == "var":
            if kids:
                raise ArityMismatch(lab, len(kids))
            if lab.name not in scope:
                raise MalformedRule(f"variable {lab.name} is not bound")
            return Variable(lab.name)
        if lab.kind == "rule":
            raise UnknownLabel(f"rule label {lab} where a term is expected (node {n})")
        if not syntax.valid_symbol_name(lab.name):
            raise UnknownLabel(f"{lab.name!r} is not a symbol")
        known = self.arities.get(lab.name)
        if known is not None and known != len(kids):
            raise ArityMismatch(lab, len(kids), f"{lab.name} has arity {known}, node has {len(kids)} children")
        try:
            sym = syntax.symbol(lab.name, len(kids))
        except ArityError as e:
            raise ArityMismatch(lab, len(kids), str(e)) from None
        return Apply(sym, tuple(self.term(k, scope) for k in kids))

    def rule(self, n, scope: frozenset) -> Rule:
        lab = self.label(n)
        kids = self.kids[n]
        if lab.kind != "rule":
            raise UnknownLabel(f"{lab} where a rule is expected (node {n})")
        if lab.name == "par":
            return Par(tuple(self.rule(k, scope) for k in kids))
        if lab.name == "update":
            if len(kids) != 2:
                raise ArityMismatch(lab, len(kids))
            lhs = self.term(kids[0], scope)
            if not isinstance(lhs, Apply) or lhs.symbol.kind != syntax.DYNAMIC:
                raise MalformedRule(f"update target {syntax.print_term(lhs)} is not a dynamic function")
            return UpdateRule(lhs, self.term(kids[1], scope))
        if lab.name == "if":
            if len(kids) not in (2, 3):
                raise ArityMismatch(lab, len(kids))
            else_ = self.rule(kids[2], scope) if len(kids) == 3 else None
            return If(self.term(kids[0], scope), self.rule(kids[1], scope), else_)
        if lab.name == "import":
            if len(kids) < 2:
                raise ArityMismatch(lab, len(kids))
            names = []
            for k in kids[:-1]:
                vl = self.label(k)
                if vl.kind != "var" or self.kids[k]:
                    raise ArityMismatch(lab, len(kids), f"import binder {k} is not a variable leaf")
                if vl.name in names or vl.name in scope:
                    raise MalformedRule(f"import variable {vl.name} is already bound")
                names.append(vl.name)
            return Import(tuple(names), self.rule(kids[-1], scope | set(names)))
        if lab.name == "eval":
            if not self.allow_eval:
                raise EvalInsideEval(f"eval at node {n} inside an evaluated tree")
            if len(kids) != 1:
                raise ArityMismatch(lab, len(kids))
            return Eval(self.term(kids[0], scope))
        raise UnknownLabel(str(lab))


def decode_rule(tree: RuleTree, start=None, *, arities: Optional[Mapping[str, int]] = None,
                allow_eval: bool = True, bound: frozenset = frozenset()) -> Rule:
    """Read the rule rooted at ``start`` (default: the root) back from ``tree``.

    ``arities`` pins the arity of user symbols; ``bound`` names variables that
    may occur free (used when a stored subtree is evaluated inside an import).
    """
    start = tree.root if start is None else start
    d = _Decoder(tree, start, arities, allow_eval, frozenset(bound))
    return d.rule(start, frozenset(bound))


def read_term(tree: RuleTree, start, *, arities=None) -> Term:
    d = _Decoder(tree, start, arities, True, frozenset())
    return d.term(start, frozenset())


def raise_term(state, node):
    """The ground term spelled by the subtree at ``node``, or UNDEF."""
    tree = state.tree
    if node not in state.tree_nodes():
        raise NodeNotInTree(f"{node} is not a node of the tree")
    try:
        t = read_term(tree, node, arities=state.arities())
    except DecodeError:
        return UNDEF
    for s in syntax.subterms(t):
        if not state.knows(s.symbol.name):
            return UNDEF
    return t


# ---------------------------------------------------------------------------
# tree dumps

def tree_to_json(tree: RuleTree) -> dict:
    nodes = sorted(tree.nodes(), key=sort_key)
    return {
        "root": to_json(tree.root),
        "nodes": [{"id": to_json(n), "label": tree.labels[n].spell() if n in tree.labels else None}
                  for n in nodes],
        "child": [[to_json(a), to_json(b)] for a, b in sorted(tree.child, key=_pair_key)],
        "sibling": [[to_json(a), to_json(b)] for a, b in sorted(tree.sibling, key=_pair_key)],
        "paths": {path_str(p): to_json(n) for p, n in tree.paths.items()},
    }


def _pair_key(pair):
    return (sort_key(pair[0]), sort_key(pair[1]))


def _node_from_json(obj):
    # bare integers are accepted as TreeNode ids
    if isinstance(obj, int) and not isinstance(obj, bool):
        return TreeNode(obj)
    return from_json(obj)


def tree_from_json(obj: dict) -> RuleTree:
    """Inverse of tree_to_json; ``paths`` in the input is ignored and recomputed."""
    labels = {}
    for entry in obj.get("nodes", []):
        n = _node_from_json(entry["id"])
        if entry.get("label") is not None:
            labels[n] = parse_label(entry["label"])
    child = frozenset((_node_from_json(a), _node_from_json(b)) for a, b in obj.get("child", []))
    sibling = frozenset((_node_from_json(a), _node_from_json(b)) for a, b in obj.get("sibling", []))
    tree = RuleTree(_node_from_json(obj["root"]), child, sibling, labels)
    try:
        return with_paths(tree)
    except DecodeError:
        return tree
