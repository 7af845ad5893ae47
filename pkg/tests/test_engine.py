import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from reflasm import engine, files
from reflasm.codec import EvalInsideEval, encode_rule
from reflasm.elements import FALSE, TRUE, UNDEF, Atom, Int, LabelValue, TreeNode
from reflasm.engine import (
    DanglingPathConstant, EvalDisabled, EvalTargetNotNode, GuardNotBoolean, Halt, Machine, Next,
    ReflectionModeError, ReserveExhausted, StaticUpdate, UnboundVariable, eval_rule_dispatch,
    eval_term, fresh_elements, run, run_from, step, update_set,
)
from reflasm.structures import (
    Location, Update, UnknownSymbol, lookup, make_state, rename_state, rename_updates,
)
from reflasm.syntax import FunctionSymbol, Label, parse_rule, parse_term, print_rule

import gen

randoms = st.randoms(use_true_random=False)
N = TreeNode


def state(text, **kw):
    return make_state(parse_rule(text), **kw)


def fig1(corpus, g=5, a=2, reserve=16):
    return make_state(parse_rule((corpus / "fig1.rasm").read_text()),
                      store={("g", ()): Int(g), ("a", ()): Int(a)}, reserve=reserve)


def U(name, args, value):
    return Update(Location(name, tuple(args)), value)


# --- terms -------------------------------------------------------------------

def test_eval_constants():
    s = state("f := g")
    assert eval_term(s, {}, parse_term("true")) == TRUE
    assert eval_term(s, {}, parse_term("undef")) == UNDEF
    assert eval_term(s, {}, parse_term("12")) == Int(12)
    assert eval_term(s, {}, parse_term("self")) == s.tree.root


def test_eval_addition():
    s = state("f := g + a", store={("g", ()): Int(5), ("a", ()): Int(2)})
    assert eval_term(s, {}, parse_term("g + a")) == Int(5 + 2)
    assert eval_term(s, {}, parse_term("g + f")) == UNDEF
    assert eval_term(s, {}, parse_term("g + a = 7")) == TRUE


def test_eval_node_constant(fig1_state):
    n = eval_term(fig1_state, {}, parse_term("node<1.2>"))
    assert fig1_state.tree.labels[n] == Label("sym", "g")
    with pytest.raises(DanglingPathConstant):
        eval_term(fig1_state, {}, parse_term("node<9.9>"))


def test_eval_label_constant(fig1_state):
    assert eval_term(fig1_state, {}, parse_term("lbl<+>")) == LabelValue(Label("sym", "+"))
    with pytest.raises(UnknownSymbol):
        eval_term(fig1_state, {}, parse_term("lbl<zzz>"))


def test_eval_variable():
    s = state("f := g")
    assert eval_term(s, {"v": Atom(0)}, parse_term("v", ("v",))) == Atom(0)
    with pytest.raises(UnboundVariable):
        eval_term(s, {}, parse_term("v", ("v",)))


def test_undef_argument_propagates():
    s = state("h(g, 1) := 2", store={("h", (UNDEF, Int(1))): Int(9)})
    assert eval_term(s, {}, parse_term("h(g, 1)")) == UNDEF


# --- update sets -----------------------------------------------------------

def test_update_set_simple():
    s = state("f := g", store={("g", ()): Int(5)})
    assert update_set(s, {}, s.rule()) == {U("f", (), Int(5))}


def test_update_set_par_union():
    s = state("par f := 1 f := 2 endpar")
    assert update_set(s, {}, s.rule()) == {U("f", (), Int(1)), U("f", (), Int(2))}


def test_update_set_if():
    s = state("if g = 1 then f := 1 else f := 2 endif", store={("g", ()): Int(1)})
    assert update_set(s, {}, s.rule()) == {U("f", (), Int(1))}
    s = state("if g = 1 then f := 1 endif", store={("g", ()): Int(3)})
    assert update_set(s, {}, s.rule()) == frozenset()


def test_guard_must_be_boolean():
    s = state("if g then f := 1 endif")
    with pytest.raises(GuardNotBoolean):
        update_set(s, {}, s.rule())


def test_static_symbols_cannot_be_updated():
    s = make_state(parse_rule("g := 1"), declared=[FunctionSymbol("g", 0, "static")])
    with pytest.raises(StaticUpdate):
        update_set(s, {}, s.rule())


def test_fig1_update_set(fig1_state):
    # preorder ids: 1 = first update, 2 = its lhs f, 3 = its rhs g; atoms 0, 1 fresh
    a0, a1 = Atom(0), Atom(1)
    plus, a = LabelValue(Label("sym", "+")), LabelValue(Label("sym", "a"))
    expected = {
        U("f", (), Int(5)),
        U("child", (N(1), N(3)), FALSE),
        U("sibling", (N(2), N(3)), FALSE),
        U("label", (a0,), plus),
        U("label", (a1,), a),
        U("child", (N(1), a0), TRUE),
        U("child", (a0, N(3)), TRUE),
        U("child", (a0, a1), TRUE),
        U("sibling", (N(2), a0), TRUE),
        U("sibling", (N(3), a1), TRUE),
    }
    assert fig1_state.tree.paths[(1,)] == N(1) and fig1_state.tree.paths[(1, 2)] == N(3)
    assert update_set(fig1_state, {}, fig1_state.rule()) == expected


def test_ground_rule_ignores_env():
    s = state("f := g + 1", store={("g", ()): Int(1)})
    assert update_set(s, {"x": Int(4)}, s.rule()) == update_set(s, {}, s.rule())


# --- allocation ------------------------------------------------------------

def test_fresh_elements_from_cursor():
    s = state("f := 1", reserve=16)
    assert fresh_elements(s, 2) == [Atom(0), Atom(1)]


def test_fresh_elements_second_step(fig1_state):
    s1 = step(fig1_state).state
    assert s1.cursor == 2
    assert fresh_elements(s1, 2) == [Atom(2), Atom(3)]


def test_fresh_elements_exhausted():
    with pytest.raises(ReserveExhausted):
        fresh_elements(state("f := 1", reserve=1), 2)


def test_fresh_elements_skip_used_atoms():
    s = state("f := 1", store={("g", ()): Atom(0)}, reserve=3)
    assert fresh_elements(s, 2) == [Atom(1), Atom(2)]


def test_multiple_imports_get_distinct_atoms():
    s = state("par import x do f := x import y do k := y endpar", reserve=2)
    assert update_set(s, {}, s.rule()) == {U("f", (), Atom(0)), U("k", (), Atom(1))}


# --- steps -----------------------------------------------------------------

def test_step_skip():
    s = state("par endpar")
    out = step(s)
    assert isinstance(out, Next) and out.updates == frozenset() and out.state == s


def test_step_fig1(corpus):
    out = step(fig1(corpus))
    assert lookup(out.state, Location("f")) == Int(5)
    assert print_rule(out.state.rule().body[0]) == "f := g + a"


def test_step_inconsistent():
    out = step(state("par f := 1 f := 2 endpar"))
    assert isinstance(out, Halt) and out.reason == engine.INCONSISTENT
    assert len(out.updates) == 2


def test_step_ill_formed():
    out = step(state("par child(node<1.2>, self) := true endpar"))
    assert out.reason == engine.ILL_FORMED and "CycleDetected" in out.detail


def test_step_reserve_exhausted(corpus):
    out = step(fig1(corpus, reserve=1))
    assert out.reason == engine.RESERVE_EXHAUSTED


def test_step_evaluation_error():
    out = step(state("if g then f := 1 endif"))
    assert out.reason == engine.EVALUATION_ERROR and "GuardNotBoolean" in out.detail


def test_step_is_deterministic(corpus):
    s = fig1(corpus)
    assert step(s) == step(s)


# --- runs ------------------------------------------------------------------

def test_run_zero_steps(corpus):
    t = run_from(fig1(corpus), 0)
    assert len(t.states) == 1 and t.status == engine.MAX_STEPS


@pytest.mark.parametrize("g,a", [(5, 2), (0, 0), (3, 7), (-4, 1)])
def test_run_fig1_values(corpus, g, a):
    t = run_from(fig1(corpus, g, a), 4)
    # f in S_{i+1} is g + i*a; S_0 has f undefined
    oracle = [UNDEF] + [Int(g + i * a) for i in range(4)]
    assert [lookup(s, Location("f")) for s in t.states] == oracle
    firsts = [print_rule(r.body[0]) for r in t.rules()]
    assert firsts == ["f := g" + " + a" * i for i in range(5)]


def test_run_fig1_exhausts_reserve(corpus):
    t = run_from(fig1(corpus), 1000)
    assert t.status == engine.RESERVE_EXHAUSTED
    assert len(t.updates) == 16 // 2


def test_trace_links_states(corpus):
    from reflasm.structures import apply_update_set
    t = run_from(fig1(corpus), 5)
    for i, d in enumerate(t.updates):
        nxt = apply_update_set(t.states[i], d)
        assert nxt.store == t.states[i + 1].store and nxt.tree == t.states[i + 1].tree


def test_machine_run(corpus):
    states = [fig1(corpus, g, 1) for g in range(3)]
    m = Machine.from_states(states, max_steps=3)
    # three steps: f = g + 2a
    assert lookup(run(m, 2).states[-1], Location("f")) == Int(2 + 2 * 1)
    with pytest.raises(ValueError):
        Machine(parse_rule("f := 1"), tuple(states))
    with pytest.raises(ValueError):
        Machine(parse_rule("f := 1"), ())


# --- partial reflection ------------------------------------------------------

def test_eval_demo_corpus(corpus):
    s = files.load_state(corpus / "eval_demo.state.json")
    assert s.partial_reflection
    out = step(s)
    assert lookup(out.state, Location("f")) == lookup(s, Location("g")) == Int(5)
    assert out.updates == {U("f", (), Int(5))}


def test_eval_dispatch_direct(corpus):
    s = files.load_state(corpus / "eval_demo.state.json")
    assert eval_rule_dispatch(s, {}, parse_term("p")) == {U("f", (), Int(5))}


def test_eval_target_not_node(corpus):
    s = files.load_state(corpus / "eval_demo.state.json")
    with pytest.raises(EvalTargetNotNode):
        eval_rule_dispatch(s, {}, parse_term("undef"))


def test_eval_inside_eval(corpus):
    s = files.load_state(corpus / "eval_nested.state.json")
    with pytest.raises(EvalInsideEval):
        eval_rule_dispatch(s, {}, parse_term("p"))
    out = step(s)
    assert out.reason == engine.ILL_FORMED and "EvalInsideEval" in out.detail


def test_eval_disabled_without_partial_reflection(corpus):
    s = files.load_state(corpus / "eval_demo.state.json", partial_reflection=False)
    out = step(s)
    assert isinstance(out.error, EvalDisabled)


def test_partial_reflection_rejects_tree_updates():
    with pytest.raises(ReflectionModeError):
        engine.check_partial_reflection(parse_rule("child(self, self) := true"))
    s = make_state(parse_rule("label(self) := lbl<par>"), partial_reflection=True)
    with pytest.raises(ReflectionModeError):
        Machine.from_states([s])
    with pytest.raises(ReflectionModeError):
        update_set(s, {}, s.rule())


def test_eval_of_stored_import_subtree():
    # eval under partial reflection may still allocate fresh elements
    stored = encode_rule(parse_rule("import x do f := x"), first_id=100)
    s = make_state(parse_rule("eval p"), store={("p", ()): stored.root}, reserve=2,
                   partial_reflection=True,
                   tree=_merge(encode_rule(parse_rule("eval p")), stored))
    assert step(s).updates == {U("f", (), Atom(0))}


def _merge(main, extra):
    from reflasm.codec import RuleTree, with_paths
    return with_paths(RuleTree(main.root, main.child | extra.child, main.sibling | extra.sibling,
                               {**main.labels, **extra.labels}))


# --- postulate properties ----------------------------------------------------

def _random_run_state(rng, corpus):
    if rng.random() < 0.5:
        t = run_from(fig1(corpus, rng.randrange(-3, 5), rng.randrange(-3, 5)), rng.randrange(0, 9))
        return t.states[-1]
    return gen.random_state(rng)


@pytest.fixture(scope="module")
def corpus_dir():
    from conftest import CORPUS
    return CORPUS


@settings(max_examples=100, deadline=None)
@given(randoms)
def test_step_agrees_with_update_set(corpus_dir, rng):
    s = _random_run_state(rng, corpus_dir)
    out = step(s)
    if isinstance(out, Next):
        assert out.updates == update_set(s, {}, s.rule())


@settings(max_examples=100, deadline=None)
@given(randoms)
def test_isomorphism_commutes_with_step(corpus_dir, rng):
    s = _random_run_state(rng, corpus_dir)
    rho = gen.random_renaming(rng, s)
    left, right = step(rename_state(s, rho)), step(s)
    if isinstance(right, Halt):
        assert isinstance(left, Halt) and left.reason == right.reason
    else:
        assert left.state == rename_state(right.state, rho)
        assert left.updates == rename_updates(right.updates, rho)


@settings(max_examples=100, deadline=None)
@given(randoms)
def test_step_preserves_base_set(corpus_dir, rng):
    s = _random_run_state(rng, corpus_dir)
    out = step(s)
    if isinstance(out, Next):
        assert out.state.universe() == s.universe()
        assert out.state.occurring() <= out.state.universe()
