"""Command-line entry point: ``reflasm <command> ...``.

Exit codes: 0 success / true verdict, 1 bad input, 2 inconsistent update
set, 3 ill-formed tree, 4 reserve exhausted, 5 false verdict, 6 evaluation
error in the running rule.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import analysis, codec, engine, files, syntax
from .elements import to_json
from .engine import Halt
from .structures import UnknownSymbol

EXIT_FOR_STATUS = {
    engine.MAX_STEPS: 0,
    engine.RUNNING: 0,
    engine.INCONSISTENT: 2,
    engine.ILL_FORMED: 3,
    engine.RESERVE_EXHAUSTED: 4,
    engine.EVALUATION_ERROR: 6,
}
EXIT_FALSE = 5


def _emit(obj, out) -> None:
    out.write(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _load(path, args):
    partial = True if getattr(args, "partial_reflection", False) else None
    state = files.load_state(path, partial_reflection=partial)
    if state.partial_reflection:
        engine.check_partial_reflection(engine.current_rule(state))
    return state


def cmd_run(args, out) -> int:
    state = _load(args.state, args)
    trace = engine.run_from(state, args.steps)
    if args.trace:
        with open(args.trace, "w", encoding="utf-8") as fh:
            files.write_trace(trace, fh, dump_trees=args.dump_trees)
    else:
        files.write_trace(trace, out, dump_trees=args.dump_trees)
    if trace.halt is not None:
        print(f"halted at step {len(trace.states) - 1}: {trace.status}: {trace.halt.detail}",
              file=sys.stderr)
    return EXIT_FOR_STATUS[trace.status]


def cmd_step(args, out) -> int:
    state = _load(args.state, args)
    outcome = engine.step(state)
    if isinstance(outcome, Halt):
        print(f"{outcome.reason}: {outcome.detail}", file=sys.stderr)
        return EXIT_FOR_STATUS[outcome.reason]
    result = files.state_to_json(outcome.state)
    result["updates"] = files.updates_to_json(outcome.updates)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            _emit(result, fh)
    else:
        _emit(result, out)
    return 0


def cmd_encode(args, out) -> int:
    rule = syntax.parse_rule(Path(args.program).read_text(encoding="utf-8"))
    _emit(codec.tree_to_json(codec.encode_rule(rule)), out)
    return 0


def cmd_decode(args, out) -> int:
    obj = json.loads(Path(args.tree).read_text(encoding="utf-8"))
    rule = codec.decode_rule(codec.tree_from_json(obj))
    out.write(syntax.print_rule(rule) + "\n")
    return 0


def cmd_raise(args, out) -> int:
    state = _load(args.state, args)
    node = engine.eval_term(state, {}, syntax.parse_term(args.node))
    raised = codec.raise_term(state, node)
    _emit({"node": to_json(node), "term": "undef" if raised == codec.UNDEF else syntax.print_term(raised)}, out)
    return 0


def cmd_coincide(args, out) -> int:
    s1, s2 = _load(args.state1, args), _load(args.state2, args)
    w = files.load_witness(args.witness)
    verdict, reasons = analysis.strongly_coincide(s1, s2, w)
    _emit({"verdict": verdict, "reasons": reasons, "witness": w.to_json()}, out)
    return 0 if verdict else EXIT_FALSE


def _updates_json(d):
    if isinstance(d, frozenset):
        return files.updates_to_json(d)
    return {"halt": d[1]}


def cmd_check_witness(args, out) -> int:
    base = _load(args.state, args)
    w = files.load_witness(args.witness)
    grid = analysis.parse_grid(args.pairs) if args.pairs else {}
    initial = analysis.grid_states(base, grid) if grid else [base]
    states = analysis.run_states(initial, args.steps)
    pairs = analysis.sample_pairs(states, args.budget, args.seed)
    report = analysis.check_witness(analysis.delta_outcome, w, pairs)
    obj = {
        "verdict": report.verdict,
        "witness": w.to_json(),
        "states": len(states),
        "pairs": report.pairs,
        "coinciding_pairs": report.coinciding,
        "seed": args.seed,
    }
    cx = report.counterexample
    if cx is not None:
        obj["counterexample"] = {
            "state1": files.state_to_json(cx.first),
            "state2": files.state_to_json(cx.second),
            "updates1": _updates_json(cx.first_updates),
            "updates2": _updates_json(cx.second_updates),
            "locations": [[l.symbol, [to_json(a) for a in l.args]] for l in cx.locations],
        }
    if args.shrink and report.verdict:
        obj["shrunk_witness"] = analysis.shrink_witness(analysis.delta_outcome, w, pairs).to_json()
    _emit(obj, out)
    return 0 if report.verdict else EXIT_FALSE


def cmd_equiv(args, out) -> int:
    t1, t2 = files.read_trace(args.trace1), files.read_trace(args.trace2)
    probes = []
    grid = analysis.parse_grid(args.grid) if args.grid else {}
    for p in args.probes or []:
        base = files.load_state(p)
        probes.extend(analysis.grid_states(base, grid) if grid else [base])
    verdict = analysis.essentially_equivalent(t1, t2, probes)
    _emit({"verdict": verdict, "probes": len(probes), "length": [len(t1), len(t2)],
           "status": [t1.status, t2.status]}, out)
    return 0 if verdict else EXIT_FALSE


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="reflasm", description="Reflective sequential ASM engine.")
    sub = parser.add_subparsers(dest="command", required=True)

    def state_cmd(name, help_):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--partial-reflection", action="store_true",
                       help="enable eval; tree updates become illegal")
        return p

    p = state_cmd("run", "run a machine and write a JSON-Lines trace")
    p.add_argument("state")
    p.add_argument("--steps", type=int, default=10)
    p.add_argument("--trace", help="trace output file (default: standard output)")
    p.add_argument("--dump-trees", action="store_true", help="include tree snapshots in the trace")
    p.set_defaults(func=cmd_run)

    p = state_cmd("step", "perform one step and print the successor state")
    p.add_argument("state")
    p.add_argument("--out")
    p.set_defaults(func=cmd_step)

    p = sub.add_parser("encode", help="encode a .rasm program as a tree dump")
    p.add_argument("program")
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("decode", help="decode a tree dump to program text")
    p.add_argument("tree")
    p.set_defaults(func=cmd_decode)

    p = state_cmd("raise", "raise the subtree at a node to a ground term")
    p.add_argument("state")
    p.add_argument("node", help="term denoting the node, e.g. 'node<1.2>'")
    p.set_defaults(func=cmd_raise)

    p = state_cmd("coincide", "check strong coincidence of two states on a witness")
    p.add_argument("state1")
    p.add_argument("state2")
    p.add_argument("witness")
    p.set_defaults(func=cmd_coincide)

    p = state_cmd("check-witness", "check a bounded-exploration witness over sampled state pairs")
    p.add_argument("state")
    p.add_argument("witness")
    p.add_argument("--pairs", default="", help="grid of initial values, e.g. 'g=0..4;a=0..4'")
    p.add_argument("--steps", type=int, default=64, help="run length per grid point")
    p.add_argument("--budget", type=int, default=100000, help="maximum number of pairs")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--shrink", action="store_true", help="also report a greedily shrunk witness")
    p.set_defaults(func=cmd_check_witness)

    p = sub.add_parser("equiv", help="check two traces for essential equivalence")
    p.add_argument("trace1")
    p.add_argument("trace2")
    p.add_argument("--probes", action="append", help="probe state file (repeatable)")
    p.add_argument("--grid", default="", help="grid applied to every probe state")
    p.set_defaults(func=cmd_equiv)
    return parser


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    args = build_parser().parse_args(argv)
    try:
        return args.func(args, out)
    except (OSError, ValueError, syntax.ASMSyntaxError, codec.DecodeError, codec.NodeNotInTree,
            analysis.IllTypedWitnessTerm, analysis.EmptyProbeSet, engine.EvaluationError,
            engine.ReserveExhausted, UnknownSymbol, KeyError) as e:
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
