"""JSON documents for chains and specs; CSV rows with round-trip precision."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .chain_core import ReversibleChain
from .first_crested import CrestedSpec
from .insect import TreeShape
from .second_crested import PartialFunction, SecondCrestedSpec


class SpecError(ValueError):
    """Malformed or unrecognized spec document."""


def fmt(x) -> str:
    """Floats with 17 significant digits; integers as is."""
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    return f"{float(x):.17g}"


def _label(state):
    if isinstance(state, PartialFunction):
        return {"domain": list(state.domain), "images": list(state.images)}
    if isinstance(state, tuple):
        return [_label(s) for s in state]
    if isinstance(state, np.integer):
        return int(state)
    return state


def _unlabel(obj):
    if isinstance(obj, dict) and set(obj) == {"domain", "images"}:
        return PartialFunction(tuple(obj["domain"]), tuple(obj["images"]))
    if isinstance(obj, list):
        return tuple(_unlabel(o) for o in obj)
    return obj


def state_text(state) -> str:
    """Compact command-line form: ``0,1`` for tuples, ``0,2:1,0`` for partial functions."""
    if isinstance(state, PartialFunction):
        return ",".join(map(str, state.domain)) + ":" + ",".join(map(str, state.images))
    if isinstance(state, tuple):
        return ",".join(state_text(s) for s in state)
    return str(state)


def parse_state(text: str, states) -> object:
    table = {state_text(s): s for s in states}
    key = text.replace(" ", "")
    if key not in table:
        raise SpecError(f"unknown state {text!r}")
    return table[key]


def chain_to_dict(c: ReversibleChain) -> dict:
    return {"states": [_label(s) for s in c.states], "P": c.P.tolist(), "pi": c.pi.tolist()}


def chain_from_dict(d: dict) -> ReversibleChain:
    try:
        P = np.array(d["P"], dtype=float)
        states = [_unlabel(s) for s in d.get("states", range(len(P)))]
        pi = d.get("pi")
    except (KeyError, TypeError, ValueError) as e:
        raise SpecError(f"bad chain document: {e}") from None
    if pi is None:
        return ReversibleChain.from_matrix(P, tuple(states))
    return ReversibleChain(tuple(states), P, np.array(pi, dtype=float))


def crested_to_dict(s: CrestedSpec) -> dict:
    return {"factors": [chain_to_dict(f) for f in s.factors],
            "partition": list(s.partition), "weights": s.weights.tolist()}


def crested_from_dict(d: dict) -> CrestedSpec:
    try:
        return CrestedSpec(tuple(chain_from_dict(f) for f in d["factors"]),
                           tuple(d["partition"]), np.array(d["weights"], dtype=float))
    except (KeyError, TypeError) as e:
        raise SpecError(f"bad crested spec: {e}") from None


def second_to_dict(s: SecondCrestedSpec) -> dict:
    return {"n": s.n, "h": s.h, "Q": chain_to_dict(s.Q), "p0": s.p0}


def second_from_dict(d: dict) -> SecondCrestedSpec:
    try:
        return SecondCrestedSpec(int(d["n"]), int(d["h"]), chain_from_dict(d["Q"]), float(d["p0"]))
    except (KeyError, TypeError) as e:
        raise SpecError(f"bad second-product spec: {e}") from None


def shape_to_dict(s: TreeShape) -> dict:
    return {"branching": list(s.branching)}


def shape_from_dict(d: dict) -> TreeShape:
    try:
        return TreeShape(tuple(int(m) for m in d["branching"]))
    except (KeyError, TypeError) as e:
        raise SpecError(f"bad tree shape: {e}") from None


def to_dict(obj) -> dict:
    for cls, fn in ((ReversibleChain, chain_to_dict), (CrestedSpec, crested_to_dict),
                    (SecondCrestedSpec, second_to_dict), (TreeShape, shape_to_dict)):
        if isinstance(obj, cls):
            return fn(obj)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def from_dict(d: dict):
    """Dispatch on the keys present in the document."""
    if not isinstance(d, dict):
        raise SpecError("spec document must be a JSON object")
    if "factors" in d:
        return crested_from_dict(d)
    if "Q" in d:
        return second_from_dict(d)
    if "branching" in d:
        return shape_from_dict(d)
    if "P" in d:
        return chain_from_dict(d)
    raise SpecError(f"unrecognized spec keys: {sorted(d)}")


def dumps(obj) -> str:
    return json.dumps(to_dict(obj), indent=2)


def load(path) -> object:
    try:
        d = json.loads(Path(path).read_text())
    except json.JSONDecodeError as e:
        raise SpecError(f"{path}: invalid JSON ({e})") from None
    return from_dict(d)


def save(obj, path) -> None:
    Path(path).write_text(dumps(obj) + "\n")


def csv_lines(header, rows) -> str:
    out = [",".join(header)]
    out += [",".join(c if isinstance(c, str) else fmt(c) for c in row) for row in rows]
    return "\n".join(out) + "\n"
