"""JSON state files, witness files, and JSON-Lines traces."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional

from . import codec, syntax
from .codec import RuleTree
from .elements import TRUE, TreeNode, from_json, sort_key, to_json
from .engine import Trace, current_rule
from .structures import ExtendedState, Location, make_state, sorted_updates
from .syntax import FunctionSymbol, parse_label, parse_rule, print_rule


class FormatError(ValueError):
    pass


def _tree_node(obj):
    if isinstance(obj, int) and not isinstance(obj, bool):
        return TreeNode(obj)
    return from_json(obj)


def _program_text(value: str, base: Optional[Path]) -> str:
    if "\n" not in value and base is not None:
        candidate = base / value
        if candidate.suffix == ".rasm" or candidate.is_file():
            try:
                return candidate.read_text(encoding="utf-8")
            except OSError as e:
                raise FormatError(f"cannot read program {candidate}: {e}") from e
    return value


def state_from_json(obj: dict, base: Optional[Path] = None, *,
                    partial_reflection: Optional[bool] = None) -> ExtendedState:
    """Build a state from the JSON state-file object.

    ``functions`` entries named child/sibling/label populate the tree; the
    program (path or inline text) is encoded after any explicitly given
    nodes.  Without a program, ``root`` and the tree entries define the rule.
    """
    if not isinstance(obj, dict):
        raise FormatError("state file must be a JSON object")
    declared, store = [], {}
    child, sibling, labels = set(), set(), {}
    try:
        for f in obj.get("functions", []):
            name, arity = f["name"], int(f.get("arity", 0))
            kind = f.get("kind", syntax.DYNAMIC)
            if kind not in (syntax.STATIC, syntax.DYNAMIC):
                raise FormatError(f"function {name}: kind must be static or dynamic")
            for args, value in f.get("map", []):
                args = tuple(from_json(a) for a in args)
                if len(args) != arity:
                    raise FormatError(f"function {name}: argument tuple {args} has wrong length")
                val = from_json(value)
                if name in ("child", "sibling"):
                    if val == TRUE:
                        (child if name == "child" else sibling).add(args)
                elif name == "label":
                    labels[args[0]] = val.label
                else:
                    store[Location(name, args)] = val
            if name not in syntax.TREE_SYMBOLS:
                if not syntax.valid_symbol_name(name) or syntax.builtin_arity(name) is not None:
                    raise FormatError(f"bad function name {name!r}")
                declared.append(FunctionSymbol(name, arity, kind))
        reserve = int(obj.get("reserve", 0))
        cursor = int(obj.get("cursor", 0))
        extra = [parse_label(l) for l in obj.get("labels", [])]
        pool = [_tree_node(n) for n in obj.get("nodes", [])]
        partial = bool(obj.get("partial_reflection", False)) if partial_reflection is None else partial_reflection
        program = obj.get("program")
        rule = parse_rule(_program_text(program, base)) if program is not None else None
    except (KeyError, TypeError, AttributeError, ValueError) as e:
        if isinstance(e, FormatError):
            raise
        raise FormatError(f"malformed state file: {e}") from e
    tree_nodes = {n for pair in child | sibling for n in pair} | set(labels) | set(pool)
    if rule is not None:
        first = max((n.id for n in tree_nodes | set(store.values()) if isinstance(n, TreeNode)),
                    default=-1) + 1
        enc = codec.encode_rule(rule, first_id=first)
        tree = RuleTree(enc.root, enc.child | child, enc.sibling | sibling, {**labels, **enc.labels})
    else:
        if "root" not in obj:
            raise FormatError("state file needs a program or a root")
        tree = RuleTree(_tree_node(obj["root"]), frozenset(child), frozenset(sibling), labels)
    tree = codec.with_paths(tree)
    return make_state(rule, store=store, declared=declared, reserve=reserve, tree=tree,
                      extra_labels=extra, extra_nodes=pool, cursor=cursor,
                      partial_reflection=partial)


def load_state(path, *, partial_reflection: Optional[bool] = None) -> ExtendedState:
    path = Path(path)
    try:
        obj = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as e:
        raise FormatError(f"{path}: {e}") from e
    return state_from_json(obj, path.parent, partial_reflection=partial_reflection)


def state_to_json(state: ExtendedState) -> dict:
    """Full state-file form: the tree goes out as child/sibling/label maps."""
    by_name: dict = {}
    for loc, val in state.store.items():
        by_name.setdefault(loc.symbol, []).append((loc, val))
    functions = []
    for name in sorted(set(state.vocab) | set(by_name)):
        if name in syntax.TREE_SYMBOLS:
            continue
        sym = state.vocab.get(name)
        entries = sorted(by_name.get(name, []), key=lambda lv: lv[0].key())
        functions.append({
            "name": name,
            "arity": sym.arity if sym else len(entries[0][0].args),
            "kind": sym.kind if sym else syntax.DYNAMIC,
            "map": [[[to_json(a) for a in loc.args], to_json(v)] for loc, v in entries],
        })
    t = state.tree
    pair = lambda p: (sort_key(p[0]), sort_key(p[1]))  # noqa: E731
    functions.append({"name": "child", "arity": 2, "kind": "dynamic",
                      "map": [[[to_json(a), to_json(b)], {"bool": True}] for a, b in sorted(t.child, key=pair)]})
    functions.append({"name": "sibling", "arity": 2, "kind": "dynamic",
                      "map": [[[to_json(a), to_json(b)], {"bool": True}] for a, b in sorted(t.sibling, key=pair)]})
    functions.append({"name": "label", "arity": 1, "kind": "dynamic",
                      "map": [[[to_json(n)], {"lbl": lab.spell()}]
                              for n, lab in sorted(t.labels.items(), key=lambda kv: sort_key(kv[0]))]})
    out = {
        "functions": functions,
        "reserve": len(state.reserve),
        "cursor": state.cursor,
        "root": to_json(t.root),
        "nodes": [to_json(n) for n in sorted(state.node_pool, key=sort_key)],
        "labels": sorted(l.spell() for l in state.labels),
    }
    if state.partial_reflection:
        out["partial_reflection"] = True
    return out


# ---------------------------------------------------------------------------
# witnesses

def load_witness(path):
    from .analysis import Witness

    try:
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
        return Witness(tuple(syntax.parse_term(t) for t in obj["W_S"]),
                       tuple(syntax.parse_term(t) for t in obj["W_A"]))
    except (OSError, json.JSONDecodeError, KeyError, TypeError, syntax.ASMSyntaxError) as e:
        raise FormatError(f"{path}: malformed witness file: {e}") from e


# ---------------------------------------------------------------------------
# traces

def updates_to_json(updates: Iterable) -> list:
    return [{"loc": [u.location.symbol, [to_json(a) for a in u.location.args]], "val": to_json(u.value)}
            for u in sorted_updates(updates)]


def store_to_json(store) -> list:
    return [{"loc": [loc.symbol, [to_json(a) for a in loc.args]], "val": to_json(v)}
            for loc, v in sorted(store.items(), key=lambda lv: lv[0].key())]


def store_from_json(entries: list) -> dict:
    return {Location(e["loc"][0], tuple(from_json(a) for a in e["loc"][1])): from_json(e["val"])
            for e in entries}


def trace_records(trace: Trace, *, dump_trees: bool = False) -> list[dict]:
    """One record per state; the last carries the terminal status."""
    records = []
    last = len(trace.states) - 1
    for i, state in enumerate(trace.states):
        if i < last:
            updates, status = trace.updates[i], "running"
        else:
            halted = trace.halt
            updates = (halted.updates or frozenset()) if halted else frozenset()
            status = trace.status
        rec = {
            "step": i,
            "rule": print_rule(current_rule(state)),
            "updates": updates_to_json(updates),
            "status": status,
            "store": store_to_json(state.store),
        }
        if i == last and trace.halt is not None:
            rec["error"] = trace.halt.detail
        if dump_trees:
            rec["tree"] = codec.tree_to_json(state.tree)
        records.append(rec)
    return records


def write_trace(trace: Trace, fh, *, dump_trees: bool = False) -> None:
    for rec in trace_records(trace, dump_trees=dump_trees):
        fh.write(json.dumps(rec, sort_keys=True) + "\n")


@dataclass(frozen=True)
class RecordedRun:
    """A run read back from a JSON-Lines trace: rules, stores, and status."""

    rule_list: tuple
    store_list: tuple
    status: str

    def rules(self) -> list:
        return list(self.rule_list)

    def stores(self) -> list:
        return [dict(s) for s in self.store_list]

    def __len__(self) -> int:
        return len(self.rule_list)


def read_trace(path) -> RecordedRun:
    rules, stores, status = [], [], None
    try:
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                if not line.strip():
                    continue
                rec = json.loads(line)
                rules.append(parse_rule(rec["rule"]))
                stores.append(store_from_json(rec.get("store", [])))
                status = rec["status"]
    except (OSError, json.JSONDecodeError, KeyError, TypeError, ValueError, syntax.ASMSyntaxError) as e:
        raise FormatError(f"{path}: malformed trace: {e}") from e
    if not rules:
        raise FormatError(f"{path}: empty trace")
    return RecordedRun(tuple(rules), tuple(stores), status)
