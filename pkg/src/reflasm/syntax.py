"""Abstract syntax, parser and pretty-printer for sequential ASM rules.

Concrete grammar::

    Rule := "par" Rule* "endpar"
          | "if" Term "then" Rule ["else" Rule] "endif"
          | Term ":=" Term
          | "import" Ident ("," Ident)* "do" Rule
          | "eval" Term
    Term := Atom | Atom "(" Term ("," Term)* ")" | Term "+" Term | Term "=" Term
          | "(" Term ")"
    Atom := Ident | IntegerLiteral | "true" | "false" | "undef" | "self"
          | "node<" Path ">" | "lbl<" LabelBody ">"

``+`` binds tighter than ``=``; both associate to the left.  ``//`` starts a
line comment.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterator, Optional, Union

STATIC = "static"
DYNAMIC = "dynamic"

RULE_LABELS = ("par", "if", "update", "import", "eval")
TREE_SYMBOLS = {"child": 2, "sibling": 2, "label": 1}
KEYWORDS = frozenset(
    {"par", "endpar", "if", "then", "else", "endif", "import", "do", "eval",
     "true", "false", "undef", "self", "update"}
)
CONSTANTS = ("true", "false", "undef", "self")


class ASMSyntaxError(Exception):
    """Raised for malformed program text; carries a 1-based line/column."""

    def __init__(self, message: str, line: int = 0, column: int = 0,
                 expected: tuple[str, ...] = ()):
        self.line = line
        self.column = column
        self.expected = expected
        where = f"{line}:{column}: " if line else ""
        hint = f" (expected {', '.join(expected)})" if expected else ""
        super().__init__(f"{where}{message}{hint}")


class ArityError(ASMSyntaxError):
    pass


@dataclass(frozen=True)
class FunctionSymbol:
    name: str
    arity: int
    kind: str = DYNAMIC

    def __str__(self) -> str:
        return f"{self.name}/{self.arity}"


def is_node_constant(name: str) -> bool:
    return name.startswith("node<")


def is_label_constant(name: str) -> bool:
    return name.startswith("lbl<")


def builtin_arity(name: str) -> Optional[int]:
    """Fixed arity of a background or tree symbol, None for user symbols."""
    if name in ("+", "="):
        return 2
    if name in TREE_SYMBOLS:
        return TREE_SYMBOLS[name]
    if name in CONSTANTS or name.isdigit() or is_node_constant(name) or is_label_constant(name):
        return 0
    return None


_IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")
_PATH = re.compile(r"[1-9][0-9]*(?:\.[1-9][0-9]*)*")


def valid_symbol_name(name: str) -> bool:
    """True if ``name`` can be spelled as a symbol in program text."""
    if name in ("+", "=") or name in CONSTANTS or re.fullmatch(r"[0-9]+", name):
        return True
    if is_node_constant(name):
        return name.endswith(">") and bool(_PATH.fullmatch(name[5:-1]))
    if is_label_constant(name):
        if not name.endswith(">"):
            return False
        try:
            parse_label(name[4:-1])
        except ASMSyntaxError:
            return False
        return name[4:-1] in RULE_LABELS or name[4:-1].startswith("var:") or valid_symbol_name(name[4:-1])
    return bool(_IDENT.fullmatch(name)) and name not in KEYWORDS


def symbol(name: str, arity: int) -> FunctionSymbol:
    """Canonical symbol for ``name``: the kind follows from the name alone."""
    fixed = builtin_arity(name)
    if fixed is not None and fixed != arity:
        raise ArityError(f"symbol {name} has arity {fixed}, applied to {arity} arguments")
    kind = DYNAMIC if (fixed is None or name in TREE_SYMBOLS) else STATIC
    return FunctionSymbol(name, arity, kind)


# ---------------------------------------------------------------------------
# Terms and rules

@dataclass(frozen=True)
class Variable:
    name: str

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class Apply:
    symbol: FunctionSymbol
    args: tuple["Term", ...] = ()

    def __post_init__(self):
        if len(self.args) != self.symbol.arity:
            raise ArityError(
                f"{self.symbol.name} expects {self.symbol.arity} arguments, got {len(self.args)}")

    def __str__(self) -> str:
        return print_term(self)


Term = Union[Variable, Apply]


def const(name: str) -> Apply:
    return Apply(symbol(name, 0))


def app(name: str, *args: Term) -> Apply:
    return Apply(symbol(name, len(args)), tuple(args))


@dataclass(frozen=True)
class UpdateRule:
    lhs: Apply
    rhs: Term


@dataclass(frozen=True)
class Par:
    body: tuple["Rule", ...] = ()


@dataclass(frozen=True)
class If:
    guard: Term
    then: "Rule"
    else_: Optional["Rule"] = None


@dataclass(frozen=True)
class Import:
    vars: tuple[str, ...]
    body: "Rule"


@dataclass(frozen=True)
class Eval:
    arg: Term


Rule = Union[UpdateRule, Par, If, Import, Eval]

SKIP = Par(())


# ---------------------------------------------------------------------------
# Traversals

def subterms(t: Term) -> Iterator[Term]:
    yield t
    if isinstance(t, Apply):
        for a in t.args:
            yield from subterms(a)


def terms_of(rule: Rule) -> Iterator[Term]:
    """Top-level terms occurring directly in ``rule`` and its sub-rules."""
    if isinstance(rule, UpdateRule):
        yield rule.lhs
        yield rule.rhs
    elif isinstance(rule, Par):
        for r in rule.body:
            yield from terms_of(r)
    elif isinstance(rule, If):
        yield rule.guard
        yield from terms_of(rule.then)
        if rule.else_ is not None:
            yield from terms_of(rule.else_)
    elif isinstance(rule, Import):
        yield from terms_of(rule.body)
    elif isinstance(rule, Eval):
        yield rule.arg
    else:
        raise TypeError(rule)


def sub_rules(rule: Rule) -> Iterator[Rule]:
    yield rule
    if isinstance(rule, Par):
        for r in rule.body:
            yield from sub_rules(r)
    elif isinstance(rule, If):
        yield from sub_rules(rule.then)
        if rule.else_ is not None:
            yield from sub_rules(rule.else_)
    elif isinstance(rule, Import):
        yield from sub_rules(rule.body)


def is_ground(t: Term) -> bool:
    return not any(isinstance(s, Variable) for s in subterms(t))


def vocabulary_of(rule: Rule) -> set[FunctionSymbol]:
    return {s.symbol for t in terms_of(rule) for s in subterms(t) if isinstance(s, Apply)}


def ground_terms_of(rule: Rule) -> set[Term]:
    return {s for t in terms_of(rule) for s in subterms(t) if is_ground(s)}


def free_variables(rule: Rule, bound: frozenset[str] = frozenset()) -> set[str]:
    if isinstance(rule, Import):
        return free_variables(rule.body, bound | set(rule.vars))
    if isinstance(rule, Par):
        return set().union(*(free_variables(r, bound) for r in rule.body))
    if isinstance(rule, If):
        out = _term_vars(rule.guard) | free_variables(rule.then, bound)
        if rule.else_ is not None:
            out |= free_variables(rule.else_, bound)
        return out - bound
    if isinstance(rule, UpdateRule):
        return (_term_vars(rule.lhs) | _term_vars(rule.rhs)) - bound
    if isinstance(rule, Eval):
        return _term_vars(rule.arg) - bound
    raise TypeError(rule)


def _term_vars(t: Term) -> set[str]:
    return {s.name for s in subterms(t) if isinstance(s, Variable)}


def contains_eval(rule: Rule) -> bool:
    return any(isinstance(r, Eval) for r in sub_rules(rule))


# ---------------------------------------------------------------------------
# Lexer

_TOKEN_RE = re.compile(r"""
    (?P<ws>[ \t\r]+)
  | (?P<nl>\n)
  | (?P<comment>//[^\n]*)
  | (?P<assign>:=)
  | (?P<punct>[(),+=])
  | (?P<node>node<(?P<path>[1-9][0-9]*(?:\.[1-9][0-9]*)*)>)
  | (?P<lbl>lbl<)
  | (?P<int>[0-9]+)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
""", re.VERBOSE)


@dataclass(frozen=True)
class Token:
    kind: str  # ident, int, node, lbl, kw, punct, assign, eof
    text: str
    line: int
    column: int


def _read_label_body(text: str, pos: int, line: int, col: int) -> int:
    """Return the index just past the ``>`` closing a ``lbl<`` opened before ``pos``."""
    depth = 1
    i = pos
    while i < len(text):
        c = text[i]
        if c == "<":
            depth += 1
        elif c == ">":
            depth -= 1
            if depth == 0:
                if i == pos:
                    raise ASMSyntaxError("empty label", line, col)
                return i + 1
        elif c.isspace():
            break
        i += 1
    raise ASMSyntaxError("unterminated label constant", line, col, ("'>'",))


def tokenize(text: str) -> list[Token]:
    tokens = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        col = pos - line_start + 1
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ASMSyntaxError(f"unexpected character {text[pos]!r}", line, col)
        kind = m.lastgroup
        if kind == "path":
            kind = "node"
        if kind == "nl":
            line += 1
            line_start = m.end()
        elif kind == "lbl":
            end = _read_label_body(text, m.end(), line, col)
            tokens.append(Token("lbl", text[pos:end], line, col))
            pos = end
            continue
        elif kind == "ident" and m.group() in KEYWORDS:
            tokens.append(Token("kw", m.group(), line, col))
        elif kind not in ("ws", "comment"):
            tokens.append(Token(kind, m.group(), line, col))
        pos = m.end()
    tokens.append(Token("eof", "", line, pos - line_start + 1))
    return tokens


# ---------------------------------------------------------------------------
# Parser

class _Parser:
    def __init__(self, text: str):
        self.tokens = tokenize(text)
        self.i = 0
        self.scope: list[str] = []
        self.arities: dict[str, int] = {}

    @property
    def tok(self) -> Token:
        return self.tokens[self.i]

    def error(self, message: str, *expected: str) -> ASMSyntaxError:
        t = self.tok
        found = t.text or "end of input"
        return ASMSyntaxError(f"{message}, found {found!r}", t.line, t.column, expected)

    def accept(self, text: str) -> bool:
        if self.tok.text == text and self.tok.kind in ("kw", "punct", "assign"):
            self.i += 1
            return True
        return False

    def expect(self, text: str) -> None:
        if not self.accept(text):
            raise self.error("syntax error", repr(text))

    def rule(self) -> Rule:
        t = self.tok
        if t.kind == "kw" and t.text == "par":
            self.i += 1
            body = []
            while not self.accept("endpar"):
                if self.tok.kind == "eof":
                    raise self.error("unterminated par", "'endpar'", "rule")
                body.append(self.rule())
            return Par(tuple(body))
        if t.kind == "kw" and t.text == "if":
            self.i += 1
            guard = self.term()
            self.expect("then")
            then = self.rule()
            else_ = self.rule() if self.accept("else") else None
            self.expect("endif")
            return If(guard, then, else_)
        if t.kind == "kw" and t.text == "import":
            self.i += 1
            names = [self.ident()]
            while self.accept(","):
                names.append(self.ident())
            for k, n in enumerate(names):
                if n in names[:k] or n in self.scope:
                    raise ASMSyntaxError(f"import variable {n} is already bound", t.line, t.column)
            self.expect("do")
            self.scope.extend(names)
            try:
                body = self.rule()
            finally:
                del self.scope[len(self.scope) - len(names):]
            return Import(tuple(names), body)
        if t.kind == "kw" and t.text == "eval":
            self.i += 1
            return Eval(self.term())
        if t.kind in ("eof",) or (t.kind == "kw" and t.text in ("endpar", "endif", "else", "then", "do")):
            raise self.error("syntax error", "rule")
        lhs = self.term()
        if not isinstance(lhs, Apply) or lhs.symbol.kind != DYNAMIC:
            raise ASMSyntaxError(f"cannot update {print_term(lhs)}: not a dynamic function",
                                 t.line, t.column)
        self.expect(":=")
        return UpdateRule(lhs, self.term())

    def ident(self) -> str:
        t = self.tok
        if t.kind != "ident":
            raise self.error("syntax error", "identifier")
        self.i += 1
        return t.text

    def term(self) -> Term:
        left = self.sum()
        while self.tok.kind == "punct" and self.tok.text == "=":
            self.i += 1
            left = self.make("=", [left, self.sum()])
        return left

    def sum(self) -> Term:
        left = self.primary()
        while self.tok.kind == "punct" and self.tok.text == "+":
            self.i += 1
            left = self.make("+", [left, self.primary()])
        return left

    def primary(self) -> Term:
        t = self.tok
        if self.accept("("):
            inner = self.term()
            self.expect(")")
            return inner
        if t.kind == "kw" and t.text in CONSTANTS:
            self.i += 1
            return self.make(t.text, [])
        if t.kind in ("int", "node", "lbl"):
            self.i += 1
            if t.kind == "lbl":
                parse_label(t.text[4:-1])
            return self.make(t.text, [])
        if t.kind == "ident":
            self.i += 1
            if t.text in self.scope:
                if self.tok.kind == "punct" and self.tok.text == "(":
                    raise self.error(f"variable {t.text} cannot be applied")
                return Variable(t.text)
            args = []
            if self.accept("("):
                args.append(self.term())
                while self.accept(","):
                    args.append(self.term())
                self.expect(")")
            return self.make(t.text, args, t)
        raise self.error("syntax error", "term")

    def make(self, name: str, args: list, tok: Optional[Token] = None) -> Apply:
        tok = tok or self.tok
        known = self.arities.setdefault(name, len(args))
        if known != len(args):
            raise ArityError(f"{name} used with {len(args)} arguments, earlier with {known}",
                             tok.line, tok.column)
        try:
            return Apply(symbol(name, len(args)), tuple(args))
        except ArityError as e:
            raise ArityError(str(e), tok.line, tok.column) from None


def parse_rule(text: str) -> Rule:
    p = _Parser(text)
    r = p.rule()
    if p.tok.kind != "eof":
        raise p.error("trailing input", "end of input")
    return r


def parse_term(text: str, bound: tuple[str, ...] = ()) -> Term:
    p = _Parser(text)
    p.scope.extend(bound)
    t = p.term()
    if p.tok.kind != "eof":
        raise p.error("trailing input", "end of input")
    return t


# ---------------------------------------------------------------------------
# Labels

@dataclass(frozen=True, order=True)
class Label:
    """A node label: a rule kind, a function symbol, or a bound variable."""
    kind: str  # "rule" | "sym" | "var"
    name: str

    def spell(self) -> str:
        return "var:" + self.name if self.kind == "var" else self.name

    def __str__(self) -> str:
        return f"lbl<{self.spell()}>"


def parse_label(body: str) -> Label:
    if body in RULE_LABELS:
        return Label("rule", body)
    if body.startswith("var:"):
        name = body[4:]
        if not re.fullmatch(r"[A-Za-z_][A-Za-z0-9_]*", name):
            raise ASMSyntaxError(f"bad variable label {body!r}")
        return Label("var", name)
    if not body:
        raise ASMSyntaxError("empty label")
    return Label("sym", body)


def label_of_constant(name: str) -> Label:
    """The label value denoted by the constant ``lbl<...>``."""
    return parse_label(name[4:-1])


def path_of_constant(name: str) -> tuple[int, ...]:
    return tuple(int(p) for p in name[5:-1].split("."))


def path_constant(path: tuple[int, ...]) -> str:
    return "node<" + ".".join(map(str, path)) + ">"


# ---------------------------------------------------------------------------
# Printer

_PREC = {"=": 1, "+": 2}


def print_term(t: Term, prec: int = 0) -> str:
    if isinstance(t, Variable):
        return t.name
    name = t.symbol.name
    if name in _PREC:
        p = _PREC[name]
        s = f"{print_term(t.args[0], p)} {name} {print_term(t.args[1], p + 1)}"
        return f"({s})" if p < prec else s
    if not t.args:
        return name
    return f"{name}({', '.join(print_term(a) for a in t.args)})"


def _rule_lines(rule: Rule, indent: str) -> list[str]:
    inner = indent + "  "
    if isinstance(rule, UpdateRule):
        return [f"{indent}{print_term(rule.lhs)} := {print_term(rule.rhs)}"]
    if isinstance(rule, Par):
        if not rule.body:
            return [f"{indent}par endpar"]
        lines = [f"{indent}par"]
        for r in rule.body:
            lines += _rule_lines(r, inner)
        return lines + [f"{indent}endpar"]
    if isinstance(rule, If):
        lines = [f"{indent}if {print_term(rule.guard)} then"] + _rule_lines(rule.then, inner)
        if rule.else_ is not None:
            lines += [f"{indent}else"] + _rule_lines(rule.else_, inner)
        return lines + [f"{indent}endif"]
    if isinstance(rule, Import):
        body = _rule_lines(rule.body, indent)
        head = f"{indent}import {', '.join(rule.vars)} do "
        return [head + body[0][len(indent):]] + body[1:]
    if isinstance(rule, Eval):
        return [f"{indent}eval {print_term(rule.arg)}"]
    raise TypeError(rule)


def print_rule(rule: Rule) -> str:
    return "\n".join(_rule_lines(rule, ""))
