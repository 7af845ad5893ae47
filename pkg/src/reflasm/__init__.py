"""Executable reflective sequential abstract state machines."""

from .syntax import parse_rule, parse_term, print_rule, print_term
from .codec import decode_rule, encode_rule, raise_term
from .structures import ExtendedState, Location, Update, apply_update_set, lookup, make_state
from .engine import Machine, run, run_from, step, update_set
from .analysis import Witness, check_witness, essentially_equivalent, strongly_coincide

__all__ = [
    "parse_rule", "parse_term", "print_rule", "print_term",
    "decode_rule", "encode_rule", "raise_term",
    "ExtendedState", "Location", "Update", "apply_update_set", "lookup", "make_state",
    "Machine", "run", "run_from", "step", "update_set",
    "Witness", "check_witness", "essentially_equivalent", "strongly_coincide",
]
