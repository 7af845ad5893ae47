import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from reflasm.syntax import (
    ASMSyntaxError, ArityError, Apply, Eval, If, Import, Label, Par, UpdateRule, Variable,
    app, const, ground_terms_of, parse_label, parse_rule, parse_term, print_rule, print_term,
    vocabulary_of,
)

import gen

rules = st.builds(lambda r: gen.rule(r, 6), st.randoms(use_true_random=False))


def names(symbols):
    return {s.name for s in symbols}


def test_empty_par_is_skip():
    assert parse_rule("par endpar") == Par(())
    assert print_rule(Par(())) == "par endpar"


def test_simple_update():
    r = parse_rule("f := g")
    assert r == UpdateRule(const("f"), const("g"))
    assert print_rule(r) == "f := g"


def test_fig1_shape(corpus):
    r = parse_rule((corpus / "fig1.rasm").read_text())
    assert isinstance(r, Par) and len(r.body) == 4
    assert isinstance(r.body[3], Import) and r.body[3].vars == ("v1", "v2")
    assert len(r.body[3].body.body) == 7


def test_fig1_roundtrip(corpus):
    r = parse_rule((corpus / "fig1.rasm").read_text())
    assert parse_rule(print_rule(r)) == r


@pytest.mark.parametrize("text", [
    "f := ",
    "par",
    "par f := 1",
    "if f then g := 1",
    "import do f := 1",
    "f(1, 2) := f",
    "true := 1",
    "node<1> := 2",
    "import x, x do f := x",
    "import x do import x do f := x",
    "x(1) := 2 + ",
    "f := lbl<>",
    "f := node<0>",
    "f := g @ h",
])
def test_syntax_errors(text):
    with pytest.raises(ASMSyntaxError):
        parse_rule(text)


def test_error_carries_position():
    with pytest.raises(ASMSyntaxError) as info:
        parse_rule("par\n  f := \nendpar")
    assert (info.value.line, info.value.column) == (3, 1)
    assert "term" in info.value.expected


def test_arity_errors():
    with pytest.raises(ArityError):
        parse_rule("par f(1) := 2 f := 3 endpar")
    with pytest.raises(ArityError):
        parse_rule("label(x, y) := 1")
    with pytest.raises(ArityError):
        app("child", const("f"))


def test_import_variables_are_variables():
    r = parse_rule("import v do label(v) := lbl<a>")
    assert r.body.lhs.args == (Variable("v"),)
    with pytest.raises(ASMSyntaxError):
        parse_rule("import v do f := v(1)")


def test_operator_precedence_and_associativity():
    t = parse_term("a + b + c = d")
    assert t.symbol.name == "="
    assert t.args[0] == app("+", app("+", const("a"), const("b")), const("c"))
    assert print_term(parse_term("a + (b + c)")) == "a + (b + c)"
    assert print_term(parse_term("(a + b) + c")) == "a + b + c"
    assert print_term(parse_term("(a = b) + c")) == "(a = b) + c"


def test_comments_and_whitespace():
    r = parse_rule("// header\npar // open\n  f := 1 // set\nendpar\n")
    assert r == Par((UpdateRule(const("f"), const("1")),))


@pytest.mark.parametrize("body,label", [
    ("par", Label("rule", "par")),
    ("update", Label("rule", "update")),
    ("var:x", Label("var", "x")),
    ("f", Label("sym", "f")),
    ("+", Label("sym", "+")),
    ("node<1.2>", Label("sym", "node<1.2>")),
    ("lbl<+>", Label("sym", "lbl<+>")),
])
def test_label_spelling(body, label):
    assert parse_label(body) == label
    assert label.spell() == body
    t = parse_term(f"lbl<{body}>")
    assert print_term(t) == f"lbl<{body}>"


def test_vocabulary_of():
    assert vocabulary_of(Par(())) == set()
    assert names(vocabulary_of(parse_rule("f := g"))) == {"f", "g"}


def test_vocabulary_of_fig1(corpus):
    # walk of the program text by hand
    expected = {"f", "g", "child", "sibling", "label", "true", "false",
                "node<1>", "node<1.1>", "node<1.2>", "lbl<+>", "lbl<a>"}
    assert names(vocabulary_of(parse_rule((corpus / "fig1.rasm").read_text()))) == expected


def test_ground_terms_of():
    assert ground_terms_of(Par(())) == set()
    assert ground_terms_of(parse_rule("f := g")) == {const("f"), const("g")}
    r = Import(("v",), UpdateRule(app("label", Variable("v")), const("lbl<a>")))
    assert ground_terms_of(r) == {const("lbl<a>")}


def test_ground_terms_closed_under_subterms():
    r = parse_rule("if g(1) + 2 = k then h(f, g(f)) := 3 endif")
    gts = ground_terms_of(r)
    for t in gts:
        for a in getattr(t, "args", ()):
            assert a in gts


@settings(max_examples=200, deadline=None)
@given(rules)
def test_parse_print_roundtrip(r):
    assert parse_rule(print_rule(r)) == r


@settings(max_examples=100, deadline=None)
@given(rules)
def test_print_is_canonical(r):
    once = print_rule(r)
    assert print_rule(parse_rule(once)) == once


@settings(max_examples=100, deadline=None)
@given(rules)
def test_vocabulary_and_ground_terms_survive_roundtrip(r):
    back = parse_rule(print_rule(r))
    assert vocabulary_of(back) == vocabulary_of(r)
    assert ground_terms_of(back) == ground_terms_of(r)


def test_generator_respects_depth():
    rng = random.Random(3)
    assert max(gen.rule_depth(gen.rule(rng, 6)) for _ in range(300)) <= 6
