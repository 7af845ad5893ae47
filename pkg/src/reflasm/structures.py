"""Extended states: a first-order store joined with the rule's syntax tree.

The tree part answers the dynamic symbols ``child``, ``sibling`` and
``label``; every other dynamic symbol lives in the store.  States are value
snapshots: ``apply_update_set`` and ``rename_state`` return new states.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, NamedTuple, Optional

from . import codec, syntax
from .codec import DecodeError, RuleTree
from .elements import (
    FALSE, TRUE, UNDEF, Atom, Bool, Element, LabelValue, TreeNode, is_node_like, sort_key,
)
from .syntax import FunctionSymbol, Label, Rule

TREE_SYMBOLS = tuple(syntax.TREE_SYMBOLS)


class UnknownSymbol(Exception):
    pass


class ApplyError(Exception):
    pass


class InconsistentUpdateSet(ApplyError):
    def __init__(self, clashes):
        self.clashes = clashes
        super().__init__("inconsistent update set at " + ", ".join(map(str, clashes)))


class IllFormedTree(ApplyError):
    def __init__(self, cause: Exception):
        self.cause = cause
        super().__init__(f"{type(cause).__name__}: {cause}")


class PartialRenaming(Exception):
    pass


class Location(NamedTuple):
    symbol: str
    args: tuple = ()

    def __str__(self) -> str:
        if not self.args:
            return f"({self.symbol}, ())"
        return f"({self.symbol}, ({', '.join(map(str, self.args))}))"

    def key(self) -> tuple:
        return (self.symbol, tuple(sort_key(a) for a in self.args))


class Update(NamedTuple):
    location: Location
    value: Element


def update_key(u: Update) -> tuple:
    return (u.location.key(), sort_key(u.value))


def sorted_updates(updates: Iterable[Update]) -> list[Update]:
    return sorted(updates, key=update_key)


def consistent(updates: Iterable[Update]) -> tuple[bool, list[Location]]:
    """Whether no location gets two values; the clashing locations otherwise."""
    seen: dict = defaultdict(set)
    for loc, val in updates:
        seen[loc].add(val)
    clashes = sorted((loc for loc, vals in seen.items() if len(vals) > 1), key=Location.key)
    return not clashes, clashes


@dataclass(frozen=True, eq=True)
class ExtendedState:
    """The pair (S, R): store, rule tree, reserve, and the fixed label set L."""

    vocab: Mapping[str, FunctionSymbol]
    store: Mapping[Location, Element]
    tree: RuleTree
    reserve: tuple = ()
    cursor: int = 0
    labels: frozenset = frozenset()
    node_pool: frozenset = frozenset()
    partial_reflection: bool = False

    __hash__ = None  # type: ignore[assignment]

    # -- vocabulary -------------------------------------------------------
    def knows(self, name: str) -> bool:
        if syntax.builtin_arity(name) is not None and not syntax.is_label_constant(name):
            return not syntax.is_node_constant(name) or syntax.path_of_constant(name) in self.tree.paths
        if syntax.is_label_constant(name):
            try:
                return syntax.label_of_constant(name) in self.labels
            except syntax.ASMSyntaxError:
                return False
        return name in self.vocab or Label("sym", name) in self.labels

    def arities(self) -> dict[str, int]:
        return {name: s.arity for name, s in self.vocab.items()}

    def vocab_a(self) -> set[str]:
        """Symbols of the tree structure: relations, root, path and label constants."""
        out = {"self", *TREE_SYMBOLS}
        out.update(syntax.path_constant(p) for p in self.tree.paths)
        out.update(str(lab) for lab in self.labels)
        return out

    def vocab_s(self) -> set[str]:
        return set(self.vocab) - set(TREE_SYMBOLS)

    # -- base set ---------------------------------------------------------
    def tree_nodes(self) -> set:
        return self.tree.nodes() | set(self.node_pool)

    def universe(self) -> frozenset:
        """The finite part of the base set; backgrounds (booleans, integers, undef) are implicit."""
        return frozenset(self.reserve) | self.node_pool | {LabelValue(l) for l in self.labels}

    def occurring(self) -> set:
        """Atoms, nodes and labels that actually occur in the store or the tree."""
        out = {LabelValue(l) for l in self.tree.labels.values()} | self.tree.nodes()
        for loc, v in self.store.items():
            out.update(loc.args)
            out.add(v)
        return {e for e in out if isinstance(e, (Atom, TreeNode, LabelValue))}

    def rule(self) -> Rule:
        return codec.decode_rule(self.tree, arities=self.arities())

    def defined_locations(self) -> dict[Location, Element]:
        """Every location whose value is not undef (store and tree)."""
        out = dict(self.store)
        for a, b in self.tree.child:
            out[Location("child", (a, b))] = TRUE
        for a, b in self.tree.sibling:
            out[Location("sibling", (a, b))] = TRUE
        for n, lab in self.tree.labels.items():
            out[Location("label", (n,))] = LabelValue(lab)
        return out


def lookup(state: ExtendedState, loc: Location) -> Element:
    name, args = loc
    if name in ("child", "sibling"):
        rel = state.tree.child if name == "child" else state.tree.sibling
        return TRUE if tuple(args) in rel else FALSE
    if name == "label":
        lab = state.tree.labels.get(args[0])
        return UNDEF if lab is None else LabelValue(lab)
    if not state.knows(name):
        raise UnknownSymbol(name)
    return state.store.get(Location(name, tuple(args)), UNDEF)


def apply_update_set(state: ExtendedState, updates: Iterable[Update]) -> ExtendedState:
    updates = list(updates)
    ok, clashes = consistent(updates)
    if not ok:
        raise InconsistentUpdateSet(clashes)
    store = dict(state.store)
    child, sibling = set(state.tree.child), set(state.tree.sibling)
    labels = dict(state.tree.labels)
    tree_changed = False
    for loc, val in updates:
        name, args = loc
        if name in TREE_SYMBOLS:
            tree_changed = True
            if not all(is_node_like(a) for a in args):
                raise IllFormedTree(TypeError(f"{name} applied to a non-node in {loc}"))
            if name == "label":
                if val == UNDEF:
                    labels.pop(args[0], None)
                elif isinstance(val, LabelValue):
                    labels[args[0]] = val.label
                else:
                    raise IllFormedTree(TypeError(f"label value {val} is not a label"))
                continue
            if not isinstance(val, Bool):
                raise IllFormedTree(TypeError(f"{name} value {val} is not a boolean"))
            rel = child if name == "child" else sibling
            (rel.add if val.value else rel.discard)(tuple(args))
        elif val == UNDEF:
            store.pop(loc, None)
        else:
            store[loc] = val
    tree = state.tree
    if tree_changed:
        tree = RuleTree(tree.root, frozenset(child), frozenset(sibling), labels)
        try:
            tree = codec.with_paths(tree)
            codec.decode_rule(tree, arities=state.arities())
        except DecodeError as e:
            raise IllFormedTree(e) from e
    return replace(state, store=store, tree=tree)


# ---------------------------------------------------------------------------
# isomorphisms

@dataclass(frozen=True)
class Renaming:
    """A bijection on atoms and tree nodes, identity on everything else."""

    mapping: Mapping[Element, Element] = field(default_factory=dict)

    def __call__(self, e):
        return self.mapping.get(e, e)

    def inverse(self) -> "Renaming":
        return Renaming({v: k for k, v in self.mapping.items()})


def rename_state(state: ExtendedState, rho: Renaming) -> ExtendedState:
    domain = set(state.reserve) | state.tree_nodes() | set(state.node_pool)
    for e in rho.mapping:
        if not is_node_like(e):
            raise PartialRenaming(f"{e} is a background or label element")
    image = {rho(e) for e in domain}
    if len(image) != len(domain) or any(type(rho(e)) is not type(e) for e in domain):
        raise PartialRenaming("renaming is not a tag-preserving bijection on the state's atoms and nodes")

    def loc(l: Location) -> Location:
        return Location(l.symbol, tuple(rho(a) for a in l.args))

    t = state.tree
    tree = RuleTree(
        rho(t.root),
        frozenset((rho(a), rho(b)) for a, b in t.child),
        frozenset((rho(a), rho(b)) for a, b in t.sibling),
        {rho(n): lab for n, lab in t.labels.items()},
        {p: rho(n) for p, n in t.paths.items()},
    )
    return replace(
        state,
        store={loc(l): rho(v) for l, v in state.store.items()},
        tree=tree,
        reserve=tuple(rho(a) for a in state.reserve),
        node_pool=frozenset(rho(n) for n in state.node_pool),
    )


def rename_updates(updates: Iterable[Update], rho: Renaming) -> frozenset:
    return frozenset(Update(Location(l.symbol, tuple(rho(a) for a in l.args)), rho(v))
                     for l, v in updates)


# ---------------------------------------------------------------------------
# construction

def make_state(program: Optional[Rule] = None, *, store: Optional[Mapping] = None,
               declared: Iterable[FunctionSymbol] = (), reserve: int = 0,
               tree: Optional[RuleTree] = None, extra_labels: Iterable[Label] = (),
               extra_nodes: Iterable[TreeNode] = (),
               cursor: int = 0, partial_reflection: bool = False) -> ExtendedState:
    """Build an extended state, encoding ``program`` unless a tree is given.

    The label set holds one label per rule kind, per symbol in the vocabulary,
    per bound variable of the program, plus every label already in the tree.
    """
    store = {Location(l[0], tuple(l[1])): v for l, v in (store or {}).items() if v != UNDEF}
    vocab: dict[str, FunctionSymbol] = {}
    for s in declared:
        vocab[s.name] = s
    labels = {Label("rule", r) for r in syntax.RULE_LABELS}
    labels.update(extra_labels)
    if tree is None:
        if program is None:
            raise ValueError("need a program or a tree")
        used = [e.id for e in _elements(store) if isinstance(e, TreeNode)]
        tree = codec.encode_rule(program, first_id=max(used, default=-1) + 1)
    if program is None:
        program = codec.decode_rule(tree, arities={n: s.arity for n, s in vocab.items()})
    for s in syntax.vocabulary_of(program):
        if syntax.builtin_arity(s.name) is None:
            vocab.setdefault(s.name, s)
    for l in store:
        if l.symbol not in vocab:
            vocab[l.symbol] = syntax.symbol(l.symbol, len(l.args))
        elif vocab[l.symbol].arity != len(l.args):
            raise ValueError(f"store location {l} disagrees with arity of {l.symbol}")
    for name in syntax.TREE_SYMBOLS:
        vocab[name] = syntax.symbol(name, syntax.TREE_SYMBOLS[name])
    for s in vocab.values():
        labels.add(Label("sym", s.name))
    for s in syntax.vocabulary_of(program):
        labels.add(Label("sym", s.name))
        if syntax.is_label_constant(s.name):
            labels.add(syntax.label_of_constant(s.name))
    for r in syntax.sub_rules(program):
        if isinstance(r, syntax.Import):
            labels.update(Label("var", v) for v in r.vars)
    labels.update(tree.labels.values())
    for e in _elements(store):
        if isinstance(e, LabelValue):
            labels.add(e.label)
    atoms = tuple(Atom(i) for i in range(reserve))
    for e in _elements(store) | tree.nodes():
        if isinstance(e, Atom) and e not in atoms:
            raise ValueError(f"{e} is outside the reserve of size {reserve}")
    pool = frozenset(e for e in _elements(store) | tree.nodes() | set(extra_nodes)
                     if isinstance(e, TreeNode))
    if not tree.paths and tree.child:
        tree = codec.with_paths(tree)
    return ExtendedState(vocab, store, tree, atoms, cursor, frozenset(labels), pool,
                         partial_reflection)


def _elements(store: Mapping) -> set:
    out = set()
    for loc, v in store.items():
        out.update(loc.args)
        out.add(v)
    return out
