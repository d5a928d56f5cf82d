"""Command-line interface: ``crested {spectrum,verify,kstep,simulate,build}``.

Exit codes: 0 success, 1 verification failure, 2 input error,
3 model-property violation (a non-reversible crested spec).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import serialization as ser
from .chain_core import (
    EPS_CLUSTER,
    EPS_EIG,
    ChainError,
    Ergodicity,
    ReversibleChain,
    UnknownStateError,
    classify_ergodicity,
    eigenvalue_clusters,
    kstep_probability,
    spectral_decomposition,
    uniform_chain,
)
from .corpus import random_corpus
from .first_crested import (
    CrestedSpec,
    NotReversible,
    analytic_spectrum_first,
    assemble_first_crested,
    group_descriptors,
    kstep_first,
)
from .insect import (
    TreeShape,
    ehrenfest_preset,
    insect_as_nested,
    insect_kernel,
    insect_spectrum,
    nested_uniform_preset,
)
from .second_crested import (
    SecondCrestedSpec,
    assemble_second_crested,
    bi_insect_spec,
    crested_bernoulli_laplace,
    second_crested_census,
)
from .spectral_oracle import (
    compare_spectra,
    exact_distributions,
    numeric_spectrum,
    simulate_chain,
    tv_distance,
    tv_envelope,
)

DEFAULT_SEED = 20240601
PRESETS = ("insect", "ehrenfest", "nested-uniform", "bi-insect", "bernoulli-laplace")

EXIT_OK, EXIT_FAIL, EXIT_INPUT, EXIT_MODEL = 0, 1, 2, 3


@dataclass
class Row:
    eigenvalue: float
    dimension: int
    label: str
    basis: np.ndarray | None = None
    a: tuple | None = None
    k: int | None = None


@dataclass
class Model:
    """Uniform view of everything the CLI can load."""

    name: str
    chain: Callable[[], ReversibleChain]
    spectrum: Callable[[bool], list[Row]] | None
    kstep: Callable[[int, object, object], float]
    second: bool = False
    grouped: Callable[[], list[tuple[float, int, str]]] | None = None


def _rows_first(spec: CrestedSpec, with_basis: bool) -> list[Row]:
    return [Row(d.eigenvalue, d.dimension, d.label, d.basis)
            for d in analytic_spectrum_first(spec, with_basis=with_basis)]


def _rows_second(spec: SecondCrestedSpec, with_basis: bool) -> list[Row]:
    return [Row(t.eigenvalue, t.dimension, t.label, t.basis, t.a, t.k)
            for t in second_crested_census(spec, with_basis=with_basis)]


def _kstep_rows(rows_fn, chain_fn):
    def kstep(k, x, y):
        c = chain_fn()
        rows = rows_fn(True)
        i, j = c.index(x), c.index(y)
        total = sum(r.eigenvalue**k * float(r.basis[i] @ r.basis[j]) for r in rows)
        return float(c.pi[j] * total)
    return kstep


def first_model(spec: CrestedSpec, name: str = "first-crested") -> Model:
    return Model(name, lambda: assemble_first_crested(spec),
                 lambda wb: _rows_first(spec, wb),
                 lambda k, x, y: kstep_first(spec, None, k, x, y),
                 grouped=lambda: group_descriptors(analytic_spectrum_first(spec), spec.pivot))


def second_model(spec: SecondCrestedSpec, name: str = "second-crested") -> Model:
    chain = lambda: assemble_second_crested(spec)  # noqa: E731
    rows = lambda wb: _rows_second(spec, wb)  # noqa: E731
    return Model(name, chain, rows, _kstep_rows(rows, chain), second=True)


def chain_model(c: ReversibleChain, name: str = "chain") -> Model:
    def rows(with_basis):
        s = spectral_decomposition(c)
        return [Row(v, len(ix), f"cluster{n}", s.U[:, ix] if with_basis else None)
                for n, (v, ix) in enumerate(eigenvalue_clusters(s.lambdas))]
    return Model(name, lambda: c, rows,
                 lambda k, x, y: kstep_probability(spectral_decomposition(c), k, x, y))


def insect_model(shape: TreeShape) -> Model:
    spec = insect_as_nested(shape)

    def rows(with_basis):
        if with_basis:
            # same eigenspaces, with bases, from the nested representation
            return _rows_first(spec, True)
        return [Row(d.eigenvalue, d.dimension, d.label) for d in insect_spectrum(shape)]
    return Model("insect", lambda: insect_kernel(shape), rows,
                 lambda k, x, y: kstep_first(spec, None, k, x, y))


def _shape(text: str | None) -> TreeShape:
    if not text:
        raise ser.SpecError("--shape is required for this preset")
    try:
        return TreeShape(tuple(int(t) for t in text.split(",")))
    except ValueError as e:
        raise ser.SpecError(f"bad --shape {text!r}: {e}") from None


def _need(args, *names):
    for n in names:
        if getattr(args, n) is None:
            raise ser.SpecError(f"--{n.replace('_', '-')} is required for preset {args.preset}")


def resolve_model(args) -> Model:
    if args.spec and args.preset:
        raise ser.SpecError("give either --spec or --preset, not both")
    if args.spec:
        obj = ser.load(args.spec)
        if isinstance(obj, CrestedSpec):
            return first_model(obj)
        if isinstance(obj, SecondCrestedSpec):
            return second_model(obj)
        if isinstance(obj, TreeShape):
            return insect_model(obj)
        return chain_model(obj)
    p = args.preset
    if p == "insect":
        return insect_model(_shape(args.shape))
    if p == "ehrenfest":
        _need(args, "balls", "urns")
        return first_model(ehrenfest_preset(args.balls, args.urns), "ehrenfest")
    if p == "nested-uniform":
        return first_model(nested_uniform_preset(_shape(args.shape)), "nested-uniform")
    if p == "bi-insect":
        # --shape q,...,q is the tree under each of the n root edges
        _need(args, "n", "p0")
        shape = _shape(args.shape)
        if len(set(shape.branching)) != 1:
            raise ser.SpecError("bi-insect needs a homogeneous shape q,...,q")
        return second_model(bi_insect_spec(args.n, shape.branching[0], shape.depth + 1, args.p0), "bi-insect")
    if p == "bernoulli-laplace":
        # --urns is |Y|; labels move by J_Y
        _need(args, "n", "h", "urns", "p0")
        return second_model(crested_bernoulli_laplace(args.n, args.h, uniform_chain(args.urns), args.p0),
                            "bernoulli-laplace")
    raise ser.SpecError("one of --spec, --preset or --random-corpus is required")


# -- output ------------------------------------------------------------------

def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([c if isinstance(c, str) else ser.fmt(c) for c in row])
    return buf.getvalue()


def _emit(args, text: str) -> None:
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _sorted(rows: list[Row]) -> list[Row]:
    return sorted(rows, key=lambda r: -r.eigenvalue)


def _merged(rows: list[Row], tol: float) -> list[tuple[float, int, str]]:
    values = [r.eigenvalue for r in rows]
    out = []
    for v, ix in eigenvalue_clusters(values, tol):
        out.append((v, sum(rows[i].dimension for i in ix), "+".join(rows[i].label for i in ix)))
    return out


# -- commands ----------------------------------------------------------------

def cmd_spectrum(args) -> int:
    model = resolve_model(args)
    if not model.second:
        model.chain()  # NotReversible surfaces here
    rows = _sorted(model.spectrum(False))
    if args.merge:
        merged = _merged(rows, args.tol)
        if args.format == "json":
            text = json.dumps([{"eigenvalue": v, "dimension": d, "label": l} for v, d, l in merged], indent=2)
            _emit(args, text + "\n")
        else:
            _emit(args, _csv(["eigenvalue", "dimension", "label"], merged))
        return EXIT_OK
    if model.grouped is not None:
        grouped = model.grouped()
        if args.format == "json":
            text = json.dumps([{"eigenvalue": v, "dimension": d, "label": l} for v, d, l in grouped], indent=2)
            _emit(args, text + "\n")
        else:
            _emit(args, _csv(["eigenvalue", "dimension", "label"], grouped))
        return EXIT_OK
    if args.format == "json":
        recs = []
        for r in rows:
            rec = {"eigenvalue": r.eigenvalue, "dimension": r.dimension, "label": r.label}
            if r.a is not None:
                rec.update(a=list(r.a), k=r.k)
            recs.append(rec)
        _emit(args, json.dumps(recs, indent=2) + "\n")
    elif model.second:
        _emit(args, _csv(["a", "k", "eigenvalue", "dimension"],
                         [("".join(map(str, r.a)), r.k, r.eigenvalue, r.dimension) for r in rows]))
    else:
        _emit(args, _csv(["eigenvalue", "dimension", "label"],
                         [(r.eigenvalue, r.dimension, r.label) for r in rows]))
    return EXIT_OK


def _verify_one(model: Model, args):
    chain = model.chain()
    return compare_spectra(model.spectrum(True), numeric_spectrum(chain), tol=args.tol,
                           eps=args.eps, name=model.name)


def cmd_verify(args) -> int:
    if args.random_corpus is not None:
        if args.random_corpus < 1:
            raise ser.SpecError("--random-corpus needs a positive count")
        models = [first_model(s, f"corpus[{i}]")
                  for i, s in enumerate(random_corpus(args.seed, args.random_corpus))]
    else:
        models = [resolve_model(args)]
    reports = [_verify_one(m, args) for m in models]
    if args.format == "json":
        text = "[" + ",\n".join(r.to_json() for r in reports) + "]\n"
    else:
        text = "".join(r.summary() + "\n" for r in reports)
        passed = sum(r.passed for r in reports)
        text += f"{passed}/{len(reports)} passed\n"
    _emit(args, text)
    return EXIT_OK if all(r.passed for r in reports) else EXIT_FAIL


def cmd_kstep(args) -> int:
    model = resolve_model(args)
    chain = model.chain()
    if args.k is None or args.k < 0:
        raise ser.SpecError("--k must be a nonnegative integer")
    xs = [ser.parse_state(args.x, chain.states)] if args.x else list(chain.states)
    ys = [ser.parse_state(args.y, chain.states)] if args.y else list(chain.states)
    Pk = np.linalg.matrix_power(chain.P, args.k)
    rows = []
    for x in xs:
        for y in ys:
            spectral = model.kstep(args.k, x, y)
            power = float(Pk[chain.index(x), chain.index(y)])
            rows.append((ser.state_text(x), ser.state_text(y), args.k, spectral, power, abs(spectral - power)))
    header = ["x", "y", "k", "spectral", "matrix_power", "difference"]
    if args.format == "json":
        _emit(args, json.dumps([dict(zip(header, r)) for r in rows], indent=2) + "\n")
    else:
        _emit(args, _csv(header, rows))
    return EXIT_OK


def cmd_simulate(args) -> int:
    model = resolve_model(args)
    chain = model.chain()
    if classify_ergodicity(spectral_decomposition(chain)) is not Ergodicity.ERGODIC:
        print("warning: chain is not ergodic; TV need not converge", file=sys.stderr)
    start = ser.parse_state(args.start, chain.states) if args.start else chain.states[0]
    emp = simulate_chain(chain, start, args.steps, args.replicas, args.seed)
    exact = exact_distributions(chain, start, args.steps)
    tv_emp = tv_distance(emp, chain.pi[None, :])
    tv_ex = tv_distance(exact, chain.pi[None, :])
    env = tv_envelope(exact, args.replicas)
    rows = [(t, float(tv_emp[t]), float(tv_ex[t]), float(env[t])) for t in range(args.steps + 1)]
    header = ["step", "tv_empirical", "tv_exact", "envelope_3sigma"]
    if args.format == "json":
        _emit(args, json.dumps([dict(zip(header, r)) for r in rows], indent=2) + "\n")
    else:
        _emit(args, _csv(header, rows))
    return EXIT_OK


def cmd_build(args) -> int:
    model = resolve_model(args)
    chain = model.chain()
    if args.format == "json":
        _emit(args, json.dumps(ser.chain_to_dict(chain), indent=2) + "\n")
    else:
        rows = [(ser.state_text(chain.states[i]), ser.state_text(chain.states[j]), float(chain.P[i, j]))
                for i, j in zip(*np.nonzero(chain.P))]
        _emit(args, _csv(["from", "to", "probability"], rows))
    return EXIT_OK


COMMANDS = {"spectrum": cmd_spectrum, "verify": cmd_verify, "kstep": cmd_kstep,
            "simulate": cmd_simulate, "build": cmd_build}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--spec", metavar="PATH", help="JSON spec (chain, crested, second-product or tree shape)")
    common.add_argument("--preset", choices=PRESETS)
    common.add_argument("--shape", metavar="a,b,c", help="tree branching for insect-type presets")
    common.add_argument("--balls", type=int)
    common.add_argument("--urns", type=int)
    common.add_argument("--n", type=int)
    common.add_argument("--h", type=int)
    common.add_argument("--p0", type=float)
    common.add_argument("--seed", type=int, default=DEFAULT_SEED)
    common.add_argument("--format", choices=("csv", "json"), default="csv")
    common.add_argument("--out", metavar="PATH")
    common.add_argument("--tol", type=float, default=EPS_CLUSTER, help="eigenvalue clustering tolerance")
    common.add_argument("--eps", type=float, default=EPS_EIG, help="projector tolerance per state")

    parser = argparse.ArgumentParser(prog="crested", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("spectrum", parents=[common], help="analytic eigenvalues and dimensions")
    p.add_argument("--merge", action="store_true", help="merge coincident eigenvalues across labels")
    p = sub.add_parser("verify", parents=[common], help="analytic spectrum vs numeric oracle")
    p.add_argument("--random-corpus", type=int, metavar="N")
    p = sub.add_parser("kstep", parents=[common], help="k-step probabilities, spectral vs matrix power")
    p.add_argument("--x")
    p.add_argument("--y")
    p.add_argument("--k", type=int, default=1)
    p = sub.add_parser("simulate", parents=[common], help="Monte-Carlo TV-distance trace")
    p.add_argument("--steps", type=int, default=20)
    p.add_argument("--replicas", type=int, default=10000)
    p.add_argument("--start")
    sub.add_parser("build", parents=[common], help="write the assembled transition matrix")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except NotReversible as e:
        print(f"error: {e} (witness {e.witness})", file=sys.stderr)
        return EXIT_MODEL
    except (ChainError, ValueError, UnknownStateError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
