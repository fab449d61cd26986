"""``memberscope`` command line.

Exit codes: 0 conclusive (or success), 2 inconclusive, 1 error.
"""
from __future__ import annotations

import argparse
import math
import os
import sys
from pathlib import Path

from . import __version__
from .io import (builtin_experiment, dumps, experiment_document, load_experiment, load_povm,
                 parse_state, write_atomic)
from .membership import (FIT_TOL, REJECT_TOL, MalformedRecordError, MembershipDecision,
                         Partition, UnsolvablePovmError, decide, overlap_estimates,
                         pure_violation, quadrant, sweep)
from .povm import simulate_counts
from .states import NAMED_VECTORS

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_INCONCLUSIVE = 2
CHECK_REFERENCES = ("00", "01", "10", "11", "Phi-", "Phi+", "Psi-", "Psi+")
BUILTIN_DATA = ("prep1", "prep2")


def _default_fit_tol() -> float:
    raw = os.environ.get("MEMBERSCOPE_FIT_TOL")
    if raw is None:
        return FIT_TOL
    try:
        value = float(raw)
    except ValueError:
        raise SystemExit(f"error: MEMBERSCOPE_FIT_TOL must be a number, got {raw!r}") from None
    return value


def _num(x: float):
    """JSON-safe float; infinities become the string ``"inf"``."""
    if math.isinf(x):
        return "inf"
    return float(x)


def _load_data(spec: str):
    if spec in BUILTIN_DATA and not Path(spec).exists():
        return builtin_experiment(spec)
    return load_experiment(spec)


def _emit(doc, out: str | None) -> None:
    text = dumps(doc)
    if out:
        write_atomic(out, text)
    else:
        sys.stdout.write(text)


def _decision_doc(d: MembershipDecision) -> dict:
    segments = []
    for f in d.fits:
        segments.append({
            "segment": f.label,
            "residual": _num(f.residual),
            "status": f.fit.status.value,
            "min_eigenvalue": _num(f.fit.min_eigenvalue),
            "max_violation": _num(f.fit.max_violation),
            "iterations": f.fit.iterations,
            "witness_bloch": [round(float(v), 12) for v in f.fit.b_star],
        })
    doc = {
        "references": [{"name": r.name, "epsilon": r.epsilon} for r in d.partition.refs],
        "verdict": d.verdict_label,
        "conclusive": d.conclusive,
        "fit_tol": d.fit_tol,
        "reject_tol": d.reject_tol,
        "segments": segments,
    }
    if d.verdict is not None and len(d.verdict) == 2:
        doc["quadrant"] = quadrant(d.verdict)
    if d.notes:
        doc["notes"] = list(d.notes)
    return doc


# ---------------------------------------------------------------------------
# commands

def cmd_povm_check(args) -> int:
    povm = load_povm(args.spec)
    refs = {}
    for label in CHECK_REFERENCES:
        value, _ = pure_violation(povm, NAMED_VECTORS[label])
        refs[label] = {"solvable": bool(value <= args.tol), "violation": value}
    doc = {
        "tool": "memberscope", "version": __version__, "povm": povm.name or args.spec,
        "elements": len(povm), "dimension": povm.dim,
        "span_dimension": povm.span_dimension(),
        "informationally_complete": povm.is_informationally_complete(),
        "perturbation_dimension": len(povm.perturbations()),
        "references": refs,
    }
    _emit(doc, args.output)
    return EXIT_OK


def _partition(args) -> Partition:
    if not args.ref:
        raise ValueError("at least one --ref is required")
    if len(args.ref) != len(args.eps):
        raise ValueError(f"{len(args.ref)} --ref values but {len(args.eps)} --eps values")
    return Partition.of(*zip(args.ref, args.eps))


def cmd_solve(args) -> int:
    record = _load_data(args.data)
    povm = load_povm(args.povm)
    decision = decide(record, povm, _partition(args), fit_tol=args.fit_tol,
                      reject_tol=args.reject_tol)
    doc = {"tool": "memberscope", "version": __version__, "data": args.data,
           "povm": args.povm, **_decision_doc(decision)}
    _emit(doc, args.output)
    return EXIT_OK if decision.conclusive else EXIT_INCONCLUSIVE


def _parse_pair(text: str) -> tuple[float, float]:
    parts = text.replace(";", ",").split(",")
    if len(parts) != 2:
        raise argparse.ArgumentTypeError(f"expected 'a,b', got {text!r}")
    return float(parts[0]), float(parts[1])


def cmd_sweep(args) -> int:
    record = _load_data(args.data)
    povm = load_povm(args.povm)
    refs = tuple(args.ref or ("Psi-", "Psi+"))
    if len(refs) != 2:
        raise ValueError("sweep needs exactly two --ref values")
    if args.grid:
        first, second = zip(*args.grid)
        paired = True
    elif args.eps1 and args.eps2:
        first, second, paired = args.eps1, args.eps2, False
    else:
        raise ValueError("give --grid pairs or both --eps1 and --eps2 lists")
    decisions = sweep(record, povm, list(first), list(second), references=refs, paired=paired,
                      fit_tol=args.fit_tol, reject_tol=args.reject_tol)
    rows = [_decision_doc(d) for d in decisions]
    doc = {"tool": "memberscope", "version": __version__, "data": args.data,
           "povm": args.povm, "rows": rows}
    figure = args.svg or args.plot
    if figure:
        from .plotting import render_sweep
        point = None
        try:
            est = overlap_estimates(record)
            point = (est[decisions[0].partition.refs[0].name], est[decisions[0].partition.refs[1].name])
        except (MalformedRecordError, KeyError):
            pass
        render_sweep(decisions, figure, point=point)
        doc["figure"] = str(figure)
    _emit(doc, args.output)
    return EXIT_OK if all(d.conclusive for d in decisions) else EXIT_INCONCLUSIVE


def cmd_simulate(args) -> int:
    rho = parse_state(args.state)
    povm = load_povm(args.povm)
    if povm.settings is None:
        raise ValueError(f"POVM {args.povm!r} has no wave-plate settings to simulate")
    record = simulate_counts(rho, povm.settings, args.shots, seed=args.seed, label=args.state)
    record.metadata.update({"state": args.state, "seed": args.seed})
    text = dumps(experiment_document(record, angle_unit="radians"))
    if args.output and args.output != "-":
        write_atomic(args.output, text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="memberscope",
                                     description="Fidelity membership decisions from incomplete measurements.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    povm = sub.add_parser("povm", help="POVM analysis")
    povm_sub = povm.add_subparsers(dest="povm_command", required=True)
    check = povm_sub.add_parser("check", help="span, perturbations and solvability of a POVM")
    check.add_argument("spec", help="table1, table2, minimal-<state> or an angle file")
    check.add_argument("--tol", type=float, default=1e-10)
    check.add_argument("-o", "--output")
    check.set_defaults(func=cmd_povm_check)

    def decision_flags(p):
        p.add_argument("--data", required=True, help="experiment file, CSV counts, prep1 or prep2")
        p.add_argument("--povm", default="table1")
        p.add_argument("--ref", action="append", help="reference state (repeatable)")
        p.add_argument("--fit-tol", type=float, default=_default_fit_tol())
        p.add_argument("--reject-tol", type=float, default=REJECT_TOL)
        p.add_argument("-o", "--output", help="write the JSON report here instead of stdout")

    solve = sub.add_parser("solve", help="decide the segment containing the measured state")
    decision_flags(solve)
    solve.add_argument("--eps", action="append", type=float, default=[],
                       help="fidelity threshold for the matching --ref")
    solve.set_defaults(func=cmd_solve)

    sw = sub.add_parser("sweep", help="decisions over a grid of two thresholds")
    decision_flags(sw)
    sw.add_argument("--grid", nargs="+", type=_parse_pair, help="threshold pairs 'a,b'")
    sw.add_argument("--eps1", nargs="+", type=float, help="first-reference thresholds (product grid)")
    sw.add_argument("--eps2", nargs="+", type=float, help="second-reference thresholds (product grid)")
    sw.add_argument("--svg", help="write the partition diagram (SVG) here")
    sw.add_argument("--plot", help="write the partition diagram, format from the suffix")
    sw.set_defaults(func=cmd_sweep)

    sim = sub.add_parser("simulate", help="synthetic counts for a known state")
    sim.add_argument("--state", required=True,
                     help="werner:p, mixed, a named state, bloch:b1,..,b15 or a density file")
    sim.add_argument("--povm", default="table1")
    sim.add_argument("--shots", type=int, default=24000, help="counts per basis, 0 for exact")
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("-o", "--output", help="output file (stdout when omitted)")
    sim.set_defaults(func=cmd_simulate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UnsolvablePovmError as exc:
        print(f"error: unsolvable POVM: {exc}", file=sys.stderr)
    except (ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
    return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
