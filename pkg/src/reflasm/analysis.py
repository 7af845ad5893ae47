"""Strong coincidence, bounded-exploration witnesses, and run equivalence.

These are desk-scale checks: a witness is confirmed (or refuted) over a
finite set of state pairs, and behavioural equivalence of rules is
approximated by comparing update sets on a finite set of probe states.
"""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Optional, Sequence

from . import codec, syntax
from .codec import DecodeError, NodeNotInTree
from .elements import UNDEF, Atom, Int, TreeNode
from .engine import (
    EvaluationError, ReserveExhausted, delta, eval_term, run_from, update_set,
)
from .structures import ExtendedState, Location, UnknownSymbol
from .syntax import Term, is_ground, print_term


class IllTypedWitnessTerm(Exception):
    pass


class EmptyProbeSet(Exception):
    pass


@dataclass(frozen=True)
class Witness:
    ws: tuple = ()
    wa: tuple = ()

    def __post_init__(self):
        for t in (*self.ws, *self.wa):
            if not is_ground(t):
                raise IllTypedWitnessTerm(f"{print_term(t)} is not ground")

    def to_json(self) -> dict:
        return {"W_S": [print_term(t) for t in self.ws], "W_A": [print_term(t) for t in self.wa]}

    def terms(self) -> list:
        return [("W_S", t) for t in self.ws] + [("W_A", t) for t in self.wa]

    def without(self, part: str, term: Term) -> "Witness":
        if part == "W_S":
            return Witness(tuple(t for t in self.ws if t != term), self.wa)
        return Witness(self.ws, tuple(t for t in self.wa if t != term))


_TREE_ONLY = {"self", *syntax.TREE_SYMBOLS, "true", "false", "undef"}


def _tree_term(t: Term) -> bool:
    return all(s.symbol.name in _TREE_ONLY or syntax.is_node_constant(s.symbol.name)
               or syntax.is_label_constant(s.symbol.name) for s in syntax.subterms(t))


def _value(state, t):
    try:
        return eval_term(state, {}, t)
    except (EvaluationError, UnknownSymbol) as e:
        raise IllTypedWitnessTerm(f"{print_term(t)}: {type(e).__name__}: {e}") from None


def tree_reading(state: ExtendedState, t: Term):
    """For a W_A term: the raised term at the node it denotes, and that term's value."""
    if not _tree_term(t):
        raise IllTypedWitnessTerm(f"{print_term(t)} is not a term over the tree vocabulary")
    node = _value(state, t)
    if not isinstance(node, (TreeNode, Atom)):
        raise IllTypedWitnessTerm(f"{print_term(t)} denotes {node}, not a tree node")
    try:
        raised = codec.raise_term(state, node)
    except NodeNotInTree as e:
        raise IllTypedWitnessTerm(str(e)) from None
    value = UNDEF if raised == UNDEF else _value(state, raised)
    return raised, value


def profile(state: ExtendedState, w: Witness) -> tuple:
    """Everything strong coincidence compares, read off one state."""
    return (tuple(_value(state, t) for t in w.ws),
            tuple(tree_reading(state, t) for t in w.wa))


def strongly_coincide(s1: ExtendedState, s2: ExtendedState, w: Witness) -> tuple[bool, list[str]]:
    reasons = []
    for t in w.ws:
        v1, v2 = _value(s1, t), _value(s2, t)
        if v1 != v2:
            reasons.append(f"W_S {print_term(t)}: {v1} vs {v2}")
    for t in w.wa:
        (r1, v1), (r2, v2) = tree_reading(s1, t), tree_reading(s2, t)
        if r1 != r2:
            reasons.append(f"W_A {print_term(t)}: raises to {_show(r1)} vs {_show(r2)}")
        elif v1 != v2:
            reasons.append(f"W_A {print_term(t)}: {_show(r1)} evaluates to {v1} vs {v2}")
    return not reasons, reasons


def _show(t) -> str:
    return "undef" if t == UNDEF else print_term(t)


def delta_outcome(state: ExtendedState):
    """The update set the state's rule produces, or the reason it has none."""
    try:
        return delta(state)[0]
    except (DecodeError, ReserveExhausted, EvaluationError, UnknownSymbol) as e:
        return ("halt", type(e).__name__)


@dataclass(frozen=True)
class Counterexample:
    first: ExtendedState
    second: ExtendedState
    first_updates: object
    second_updates: object
    locations: tuple


@dataclass(frozen=True)
class WitnessReport:
    verdict: bool
    counterexample: Optional[Counterexample] = None
    pairs: int = 0
    coinciding: int = 0


def _differing_locations(d1, d2) -> tuple:
    if not isinstance(d1, frozenset) or not isinstance(d2, frozenset):
        return ()
    locs = {u.location for u in d1 ^ d2}
    return tuple(sorted(locs, key=Location.key))


def check_witness(step_fn: Callable, w: Witness, pairs: Sequence[tuple]) -> WitnessReport:
    """Refute or confirm a witness over explicit state pairs.

    ``step_fn`` maps a state to its update set (or a halt marker).  Pairs are
    examined in order, so the reported counterexample is the first failing one.
    """
    profiles: dict = {}
    deltas: dict = {}

    def cached(cache, fn, s):
        k = id(s)
        if k not in cache:
            cache[k] = (s, fn(s))
        return cache[k][1]

    coinciding = 0
    for s1, s2 in pairs:
        if cached(profiles, lambda s: profile(s, w), s1) != cached(profiles, lambda s: profile(s, w), s2):
            continue
        coinciding += 1
        d1, d2 = cached(deltas, step_fn, s1), cached(deltas, step_fn, s2)
        if d1 != d2:
            cx = Counterexample(s1, s2, d1, d2, _differing_locations(d1, d2))
            return WitnessReport(False, cx, len(pairs), coinciding)
    return WitnessReport(True, None, len(pairs), coinciding)


def shrink_witness(step_fn: Callable, w: Witness, pairs: Sequence[tuple]) -> Witness:
    """Greedily drop terms while the witness stays counterexample-free on ``pairs``."""
    for part, t in w.terms():
        smaller = w.without(part, t)
        if check_witness(step_fn, smaller, pairs).verdict:
            w = smaller
    return w


# ---------------------------------------------------------------------------
# pair sampling

def parse_grid(text: str) -> dict[str, list[int]]:
    """``"g=0..4;a=1,3"`` -> {"g": [0..4], "a": [1, 3]}."""
    grid = {}
    for part in filter(None, (p.strip() for p in text.split(";"))):
        name, _, values = part.partition("=")
        name = name.strip()
        if not name or not values:
            raise ValueError(f"bad grid entry {part!r}")
        out = []
        for v in values.split(","):
            lo, dots, hi = v.partition("..")
            out.extend(range(int(lo), int(hi) + 1) if dots else [int(lo)])
        grid[name] = out
    return grid


def grid_states(base: ExtendedState, grid: dict[str, list[int]]) -> list[ExtendedState]:
    """One initial state per grid point, overriding nullary store entries."""
    names = sorted(grid)
    out = []
    for values in itertools.product(*(grid[n] for n in names)):
        store = dict(base.store)
        for n, v in zip(names, values):
            if not base.knows(n):
                raise UnknownSymbol(n)
            store[Location(n, ())] = Int(v)
        out.append(replace(base, store=store))
    return out


def run_states(initial: Iterable[ExtendedState], steps: int) -> list[ExtendedState]:
    states = []
    for s in initial:
        states.extend(run_from(s, steps).states)
    return states


def sample_pairs(states: Sequence[ExtendedState], budget: int, seed: int = 0) -> list[tuple]:
    """Unordered pairs of distinct positions, all of them if within budget."""
    n = len(states)
    total = n * (n - 1) // 2
    if total <= budget:
        idx = list(itertools.combinations(range(n), 2))
    else:
        chosen = sorted(random.Random(seed).sample(range(total), budget))
        idx = [_unrank_pair(k, n) for k in chosen]
    return [(states[i], states[j]) for i, j in idx]


def _unrank_pair(k: int, n: int) -> tuple[int, int]:
    i = 0
    while k >= n - 1 - i:
        k -= n - 1 - i
        i += 1
    return i, i + 1 + k


# ---------------------------------------------------------------------------
# equivalence

def _outcome(state: ExtendedState, rule):
    try:
        return update_set(state, {}, rule)
    except (DecodeError, ReserveExhausted, EvaluationError, UnknownSymbol) as e:
        return ("error", type(e).__name__)


def rules_delta_equivalent(r1, r2, probes: Sequence[ExtendedState]) -> bool:
    if not probes:
        raise EmptyProbeSet("need at least one probe state")
    return all(_outcome(p, r1) == _outcome(p, r2) for p in probes)


def essentially_equivalent(t1, t2, probes: Sequence[ExtendedState]) -> bool:
    """Same length and status, equal stores step by step, Δ-equivalent rules."""
    if not probes:
        raise EmptyProbeSet("need at least one probe state")
    if len(t1) != len(t2) or t1.status != t2.status:
        return False
    if t1.stores() != t2.stores():
        return False
    seen = {}
    for a, b in zip(t1.rules(), t2.rules()):
        if a == b:
            continue
        if (a, b) not in seen:
            seen[(a, b)] = rules_delta_equivalent(a, b, probes)
        if not seen[(a, b)]:
            return False
    return True
