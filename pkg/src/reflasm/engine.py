"""Term evaluation, update sets, and runs of reflective sequential ASMs.

One step decodes the rule currently stored in the state, computes its update
set under an empty environment, and applies it.  Because the rule lives in
the state, the updates may rewrite the rule that the next step decodes.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Optional, Sequence, Union

from . import codec, syntax
from .codec import DecodeError
from .elements import (
    FALSE, TRUE, UNDEF, Atom, Bool, Element, Int, LabelValue, TreeNode,
)
from .structures import (
    ExtendedState, InconsistentUpdateSet, IllFormedTree, Location, Update, UnknownSymbol,
    apply_update_set, consistent, lookup,
)
from .syntax import Apply, Eval, If, Import, Par, Rule, Term, UpdateRule, Variable

RUNNING = "running"
MAX_STEPS = "maxStepsReached"
INCONSISTENT = "inconsistent"
ILL_FORMED = "illFormedTree"
RESERVE_EXHAUSTED = "reserveExhausted"
EVALUATION_ERROR = "evaluationError"

HALT_STATUSES = (INCONSISTENT, ILL_FORMED, RESERVE_EXHAUSTED, EVALUATION_ERROR)


class EvaluationError(Exception):
    pass


class UnboundVariable(EvaluationError):
    pass


class DanglingPathConstant(EvaluationError):
    pass


class GuardNotBoolean(EvaluationError):
    pass


class StaticUpdate(EvaluationError):
    pass


class EvalTargetNotNode(EvaluationError):
    pass


class EvalDisabled(EvaluationError):
    pass


class ReflectionModeError(EvaluationError):
    """A tree-mutating update under partial reflection."""


class ReserveExhausted(Exception):
    pass


Env = Mapping[str, Element]


# ---------------------------------------------------------------------------
# terms

def eval_term(state: ExtendedState, env: Env, t: Term) -> Element:
    if isinstance(t, Variable):
        try:
            return env[t.name]
        except KeyError:
            raise UnboundVariable(t.name) from None
    name = t.symbol.name
    if not t.args:
        if name == "true":
            return TRUE
        if name == "false":
            return FALSE
        if name == "undef":
            return UNDEF
        if name == "self":
            return state.tree.root
        if name.isdigit():
            return Int(int(name))
        if syntax.is_node_constant(name):
            node = state.tree.paths.get(syntax.path_of_constant(name))
            if node is None:
                raise DanglingPathConstant(f"no node at path {name[5:-1]}")
            return node
        if syntax.is_label_constant(name):
            label = syntax.label_of_constant(name)
            if label not in state.labels:
                raise UnknownSymbol(name)
            return LabelValue(label)
    args = tuple(eval_term(state, env, a) for a in t.args)
    if name == "=":
        return Bool(args[0] == args[1])
    if name == "+":
        if all(isinstance(a, Int) for a in args):
            return Int(args[0].value + args[1].value)
        return UNDEF
    if any(a == UNDEF for a in args):
        if not state.knows(name):
            raise UnknownSymbol(name)
        return UNDEF
    return lookup(state, Location(name, args))


# ---------------------------------------------------------------------------
# allocation

def _used_atoms(state: ExtendedState) -> set:
    used = set()
    for loc, v in state.store.items():
        used.update(a for a in (*loc.args, v) if isinstance(a, Atom))
    used.update(n for n in state.tree.nodes() if isinstance(n, Atom))
    return used


class _Allocator:
    """Hands out reserve atoms in order, skipping atoms already in use."""

    def __init__(self, state: ExtendedState):
        self.reserve = state.reserve
        self.cursor = state.cursor
        self._used = None
        self._state = state

    def take(self, k: int) -> list:
        if self._used is None:
            self._used = _used_atoms(self._state)
        out = []
        i = self.cursor
        while len(out) < k:
            if i >= len(self.reserve):
                raise ReserveExhausted(
                    f"needed {k} fresh elements, reserve of {len(self.reserve)} exhausted")
            a = self.reserve[i]
            if a not in self._used:
                out.append(a)
            i += 1
        self.cursor = i
        return out


def fresh_elements(state: ExtendedState, k: int) -> list:
    return _Allocator(state).take(k)


# ---------------------------------------------------------------------------
# update sets

def _updates(state: ExtendedState, env: Env, rule: Rule, alloc: _Allocator) -> set:
    if isinstance(rule, UpdateRule):
        sym = rule.lhs.symbol
        if sym.kind != syntax.DYNAMIC or state.vocab.get(sym.name, sym).kind != syntax.DYNAMIC:
            raise StaticUpdate(f"{sym.name} is static")
        if state.partial_reflection and sym.name in syntax.TREE_SYMBOLS:
            raise ReflectionModeError(f"update of {sym.name} under partial reflection")
        if not state.knows(sym.name):
            raise UnknownSymbol(sym.name)
        args = tuple(eval_term(state, env, a) for a in rule.lhs.args)
        return {Update(Location(sym.name, args), eval_term(state, env, rule.rhs))}
    if isinstance(rule, Par):
        out = set()
        for r in rule.body:
            out |= _updates(state, env, r, alloc)
        return out
    if isinstance(rule, If):
        g = eval_term(state, env, rule.guard)
        if not isinstance(g, Bool):
            raise GuardNotBoolean(f"guard {syntax.print_term(rule.guard)} evaluated to {g}")
        if g.value:
            return _updates(state, env, rule.then, alloc)
        return set() if rule.else_ is None else _updates(state, env, rule.else_, alloc)
    if isinstance(rule, Import):
        fresh = alloc.take(len(rule.vars))
        return _updates(state, {**env, **dict(zip(rule.vars, fresh))}, rule.body, alloc)
    if isinstance(rule, Eval):
        return _eval_dispatch(state, env, rule.arg, alloc)
    raise TypeError(rule)


def _eval_dispatch(state, env, t, alloc) -> set:
    if not state.partial_reflection:
        raise EvalDisabled("eval needs a machine in partial-reflection mode")
    target = eval_term(state, env, t)
    if not isinstance(target, (TreeNode, Atom)) or target not in state.tree_nodes():
        raise EvalTargetNotNode(f"eval target {syntax.print_term(t)} evaluated to {target}")
    rule = codec.decode_rule(state.tree, target, arities=state.arities(), allow_eval=False,
                             bound=frozenset(env))
    return _updates(state, env, rule, alloc)


def update_set(state: ExtendedState, env: Env, rule: Rule) -> frozenset:
    return frozenset(_updates(state, env, rule, _Allocator(state)))


def eval_rule_dispatch(state: ExtendedState, env: Env, t: Term) -> frozenset:
    return frozenset(_eval_dispatch(state, env, t, _Allocator(state)))


# ---------------------------------------------------------------------------
# steps and runs

@dataclass(frozen=True)
class Next:
    state: ExtendedState
    updates: frozenset


@dataclass(frozen=True)
class Halt:
    reason: str
    detail: str = ""
    updates: Optional[frozenset] = None  # the offending update set, when one was computed
    error: Optional[Exception] = field(default=None, compare=False)


StepOutcome = Union[Next, Halt]


def current_rule(state: ExtendedState) -> Rule:
    return codec.decode_rule(state.tree, arities=state.arities())


def delta(state: ExtendedState) -> tuple[frozenset, int]:
    """Update set of the stored rule and the allocation cursor after it."""
    rule = current_rule(state)
    free = syntax.free_variables(rule)
    if free:
        raise codec.MalformedRule(f"free variables {sorted(free)} in the program")
    alloc = _Allocator(state)
    return frozenset(_updates(state, {}, rule, alloc)), alloc.cursor


def _halt(e: Exception, updates=None) -> Halt:
    if isinstance(e, InconsistentUpdateSet):
        reason = INCONSISTENT
    elif isinstance(e, (IllFormedTree, DecodeError)):
        reason = ILL_FORMED
    elif isinstance(e, ReserveExhausted):
        reason = RESERVE_EXHAUSTED
    else:
        reason = EVALUATION_ERROR
    cause = e.cause if isinstance(e, IllFormedTree) else e
    return Halt(reason, f"{type(cause).__name__}: {cause}", updates, cause)


def step(state: ExtendedState) -> StepOutcome:
    try:
        updates, cursor = delta(state)
    except (DecodeError, ReserveExhausted, EvaluationError, UnknownSymbol) as e:
        return _halt(e)
    try:
        nxt = apply_update_set(state, updates)
    except (InconsistentUpdateSet, IllFormedTree) as e:
        return _halt(e, updates)
    return Next(replace(nxt, cursor=cursor), updates)


@dataclass(frozen=True)
class Trace:
    """States S_0..S_n, the update sets between them, and how the run ended."""

    states: tuple
    updates: tuple
    status: str
    halt: Optional[Halt] = None

    def rules(self) -> list:
        return [current_rule(s) for s in self.states]

    def stores(self) -> list:
        return [dict(s.store) for s in self.states]

    def __len__(self) -> int:
        return len(self.states)


@dataclass(frozen=True)
class Machine:
    """A program together with the initial stores it may start from."""

    program: Rule
    initial_states: tuple
    max_steps: int = 100

    def __post_init__(self):
        if not self.initial_states:
            raise ValueError("a machine needs at least one initial state")
        free = syntax.free_variables(self.program)
        if free:
            raise ValueError(f"program has free variables {sorted(free)}")
        for s in self.initial_states:
            if current_rule(s) != self.program:
                raise ValueError("initial state does not embed the machine's program")
            if s.partial_reflection:
                check_partial_reflection(self.program)

    @classmethod
    def from_states(cls, states: Iterable[ExtendedState], max_steps: int = 100) -> "Machine":
        states = tuple(states)
        return cls(current_rule(states[0]), states, max_steps)


def check_partial_reflection(rule: Rule) -> None:
    for r in syntax.sub_rules(rule):
        if isinstance(r, UpdateRule) and r.lhs.symbol.name in syntax.TREE_SYMBOLS:
            raise ReflectionModeError(
                f"{syntax.print_term(r.lhs)}: tree updates are not allowed under partial reflection")


def run_from(state: ExtendedState, max_steps: int) -> Trace:
    if max_steps < 0:
        raise ValueError("max_steps must be non-negative")
    states, deltas = [state], []
    while len(deltas) < max_steps:
        out = step(states[-1])
        if isinstance(out, Halt):
            return Trace(tuple(states), tuple(deltas), out.reason, out)
        states.append(out.state)
        deltas.append(out.updates)
    return Trace(tuple(states), tuple(deltas), MAX_STEPS)


def run(machine: Machine, store_index: int = 0, max_steps: Optional[int] = None) -> Trace:
    steps = machine.max_steps if max_steps is None else max_steps
    return run_from(machine.initial_states[store_index], steps)
