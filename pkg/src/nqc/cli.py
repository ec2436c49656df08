"""Command-line interface.

Usage:
    nqc run CIRCUIT [--shots N] [--seed S] [--dilated]
    nqc sat FORMULA [--g G] [--r R|auto] [--shots N] [--verify]
    nqc count FORMULA [--exact | --shots N] [--verify]
    nqc dilate CIRCUIT [--emit OUT] [--shots N]
    nqc plan --initial RE IM RE IM --final RE IM RE IM [--g G]
    nqc boson --n0 N --n1 M [--g G] [--steps R]
    nqc approx (--gate NAME | --matrix 8 floats) [--depth D]

Every subcommand takes ``--format json|csv|text`` and ``--capacity N``.
Exit codes: 0 success, 2 parse or input error, 3 numeric or constraint
error, 4 verification mismatch.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import time
from importlib.metadata import PackageNotFoundError, version
from pathlib import Path

import numpy as np

from .boson import BosonError, BosonQubit, resource_report
from .circuit import (
    Circuit,
    CircuitError,
    CircuitParseError,
    capacity_from_env,
    load_circuit,
    run_exact,
    run_shots,
    simulate,
)
from .cnf import DimacsError, brute_force_count, parse_dimacs
from .dilation import (
    DilationError,
    DilationStep,
    compile_circuit,
    product_form_success,
    run_postselected_exact,
    run_postselected_shots,
    serialize_program,
)
from .gates import GateError, H_MATRIX, T_MATRIX, X_MATRIX
from .sat import count_models, solve_sat
from .state import StateError, measure_probabilities
from .synthesis import SynthesisError, approximate_unitary_HT, execute_plan, plan_single_qubit

SCHEMA_VERSION = 1
EXIT_OK, EXIT_INPUT, EXIT_NUMERIC, EXIT_MISMATCH = 0, 2, 3, 4
NAMED_GATES = {"H": H_MATRIX, "T": T_MATRIX, "X": X_MATRIX, "S": T_MATRIX @ T_MATRIX}


def _version() -> str:
    try:
        return version("artifact")
    except PackageNotFoundError:
        return "unknown"


class InputError(Exception):
    """Unreadable or malformed input; maps to exit code 2."""


# -- report output ---------------------------------------------------------------------


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isfinite(x):
            return x
        return "inf" if x > 0 else "-inf" if x < 0 else "nan"
    if isinstance(x, (np.bool_,)):
        return bool(x)
    return x


def _flatten(x, prefix=""):
    if isinstance(x, dict):
        for k, v in x.items():
            yield from _flatten(v, f"{prefix}.{k}" if prefix else str(k))
    elif isinstance(x, list) and any(isinstance(v, (dict, list)) for v in x) or isinstance(x, list) and len(x) > 4:
        for i, v in enumerate(x):
            yield from _flatten(v, f"{prefix}.{i}")
    elif isinstance(x, list):
        yield prefix, " ".join(str(v) for v in x)
    else:
        yield prefix, x


def render(report: dict, fmt: str) -> str:
    data = _jsonable({"schema_version": SCHEMA_VERSION, **report})
    if fmt == "json":
        return json.dumps(data, indent=2, sort_keys=True) + "\n"
    rows = list(_flatten(data))
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["key", "value"])
        writer.writerows(rows)
        return buf.getvalue()
    width = max(len(k) for k, _ in rows)
    return "".join(f"{k.ljust(width)}  {v}\n" for k, v in rows)


# -- helpers ---------------------------------------------------------------------------


def _read(path: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror or exc}") from None


def _formula(path: str):
    return parse_dimacs(_read(path))


def _circuit(path: str):
    _read(path)
    return load_circuit(path)


def _r_value(text: str):
    if text == "auto":
        return None
    try:
        r = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"r must be 'auto' or a nonnegative integer, got {text!r}") from None
    if r < 0:
        raise argparse.ArgumentTypeError(f"r must be nonnegative, got {r}")
    return r


def _nonneg(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if v < 0:
        raise argparse.ArgumentTypeError(f"expected a nonnegative integer, got {v}")
    return v


def _success_block(log_p: float) -> dict:
    linear = math.exp(log_p) if log_p > -745 else 0.0
    return {"log": log_p, "log10": log_p / math.log(10), "linear": linear}


def _capacity(args) -> int:
    return capacity_from_env() if args.capacity is None else args.capacity


# -- subcommands -------------------------------------------------------------------------


def cmd_run(args) -> tuple[dict, int]:
    c = _circuit(args.circuit)
    cap = _capacity(args)
    start = time.perf_counter()
    rep = run_shots(c, args.shots, args.seed, capacity=cap) if args.shots else run_exact(c, capacity=cap)
    out = {"command": "run", "circuit": c.name, **rep.to_dict()}
    if args.dilated:
        out["dilation"] = _dilation_report(c, args, cap)
    if args.timing:
        out["wall_time"] = time.perf_counter() - start
    return out, EXIT_OK


def _product_form(program, cap: int) -> float | None:
    """The product form, for programs with a single (possibly repeated) dilation step."""
    steps = [i for i, op in enumerate(program.items) if isinstance(op, DilationStep)]
    if len(steps) != 1:
        return None
    pos = steps[0]
    step = program.items[pos]
    full = program.equivalent_circuit()
    s = simulate(Circuit(full.n_qubits, full.ops[:pos]), capacity=cap)
    a2, b2 = measure_probabilities(s, step.target)
    return product_form_success(a2, b2, step.eta, step.repeat)


def _dilation_report(c, args, cap: int) -> dict:
    program = compile_circuit(c)
    run = run_postselected_exact(program, capacity=cap + 1)
    out = {
        **program.to_dict(),
        "eta": program.etas,
        "cumulative_success": _success_block(run.log_success),
        "predicted_success": _success_block(program.predicted_log_success(capacity=cap)),
        "product_form": _product_form(program, cap),
        "final_state_probabilities": [float(abs(a) ** 2) for a in run.state.true_amplitudes()]
        if program.base_qubits <= 6
        else None,
    }
    if args.shots:
        shots = run_postselected_shots(program, args.shots, args.seed, capacity=cap + 1)
        out["shots"] = shots.to_dict()
        out["discarded_shots"] = shots.discarded
    return out


def cmd_dilate(args) -> tuple[dict, int]:
    c = _circuit(args.circuit)
    cap = _capacity(args)
    out = {"command": "dilate", "circuit": c.name, **_dilation_report(c, args, cap)}
    if args.emit:
        program = compile_circuit(c)
        header = f"# dilated form of {c.name or 'circuit'}: one shared ancilla on qubit {program.ancilla}\n"
        Path(args.emit).write_text(header + serialize_program(program), encoding="utf-8")
        out["emitted"] = args.emit
    return out, EXIT_OK


def cmd_sat(args) -> tuple[dict, int]:
    f = _formula(args.formula)
    mode = "shots" if args.shots else "exact"
    rep = solve_sat(f, g=args.g, r=args.r, mode=mode, shots=args.shots, seed=args.seed, capacity=_capacity(args), verify=args.verify)
    out = {"command": "sat", "formula": Path(args.formula).name, **rep.to_dict()}
    code = EXIT_OK
    if args.verify:
        consistent = (rep.K_bruteforce > 0) == (rep.decision == "SAT")
        out["verified"] = consistent
        code = EXIT_OK if consistent else EXIT_MISMATCH
    return out, code


def cmd_count(args) -> tuple[dict, int]:
    f = _formula(args.formula)
    if args.exact and args.shots:
        raise InputError("--exact and --shots are mutually exclusive")
    mode = "shots" if args.shots else "exact"
    est = count_models(f, g=args.g, r=args.r, mode=mode, shots=args.shots, seed=args.seed, capacity=_capacity(args))
    out = {"command": "count", "formula": Path(args.formula).name, "n": f.num_vars, **est.to_dict()}
    code = EXIT_OK
    if args.verify:
        k = brute_force_count(f, limit=_capacity(args))
        out["K_bruteforce"] = k
        ok = est.estimate == k if mode == "exact" else est.low <= k <= est.high
        out["verified"] = ok
        code = EXIT_OK if ok else EXIT_MISMATCH
    return out, code


def _complex_pair(values, name):
    if len(values) != 4:
        raise InputError(f"{name} needs four numbers: re0 im0 re1 im1")
    return np.array([complex(values[0], values[1]), complex(values[2], values[3])])


def cmd_plan(args) -> tuple[dict, int]:
    initial = _complex_pair(args.initial, "--initial")
    final = _complex_pair(args.final, "--final")
    plan = plan_single_qubit(initial, final, args.g)
    out_state = execute_plan(plan, initial)
    out = {
        "command": "plan",
        **plan.to_dict(),
        "A": float(np.linalg.norm(initial)),
        "B": float(np.linalg.norm(final)),
        "result": [[z.real, z.imag] for z in out_state],
        "distance": float(np.linalg.norm(out_state - final)),
    }
    return out, EXIT_OK


def cmd_boson(args) -> tuple[dict, int]:
    c0 = complex(*args.c0)
    c1 = complex(*args.c1)
    norm = math.sqrt(abs(c0) ** 2 + abs(c1) ** 2)
    if norm == 0:
        raise BosonError("c0 and c1 cannot both vanish")
    b = BosonQubit(args.n0, args.n1, c0 / norm, c1 / norm)
    rep = resource_report(b, args.g, args.steps)
    out = {"command": "boson", **rep.to_dict(b)}
    return out, EXIT_OK


def cmd_approx(args) -> tuple[dict, int]:
    if args.gate is not None:
        target = NAMED_GATES[args.gate.upper()]
    elif args.matrix is not None:
        m = args.matrix
        target = np.array([complex(m[2 * i], m[2 * i + 1]) for i in range(4)]).reshape(2, 2)
    else:
        raise InputError("approx needs --gate or --matrix")
    res = approximate_unitary_HT(target, args.depth)
    out = {
        "command": "approx",
        "word": res.word,
        "length": len(res.word),
        "error": res.error,
        "max_depth": args.depth,
        "depth_searched": res.depth_searched,
        "explored": res.explored,
    }
    return out, EXIT_OK


# -- parser ----------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--format", choices=("json", "csv", "text"), default="text", help="report format (default text)")
    common.add_argument("--capacity", type=_nonneg, default=None, help="qubit limit (default $NQC_CAPACITY or 24)")
    common.add_argument("--timing", action="store_true", help="include wall-clock time in the report")
    common.add_argument("--output", "-o", help="write the report to this file instead of stdout")

    sampling = argparse.ArgumentParser(add_help=False)
    sampling.add_argument("--shots", type=_nonneg, default=0, help="samples to draw; 0 means exact (default)")
    sampling.add_argument("--seed", type=_nonneg, default=0, help="RNG seed (default 0)")

    amplifier = argparse.ArgumentParser(add_help=False)
    amplifier.add_argument("--g", type=float, default=2.0, help="G gate parameter (default 2)")
    amplifier.add_argument("--r", type=_r_value, default=None, help="G repeat count or 'auto' (default auto)")

    p = argparse.ArgumentParser(prog="nqc", description="Non-unitary quantum circuit toolkit.")
    p.add_argument("--version", action="version", version=f"%(prog)s {_version()}")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("run", parents=[common, sampling], help="simulate a circuit file")
    s.add_argument("circuit")
    s.add_argument("--dilated", action="store_true", help="also run the postselected dilation")
    s.set_defaults(func=cmd_run)

    s = sub.add_parser("sat", parents=[common, sampling, amplifier], help="decide satisfiability of a DIMACS formula")
    s.add_argument("formula")
    s.add_argument("--verify", action="store_true", help="cross-check against brute force; exit 4 on mismatch")
    s.set_defaults(func=cmd_sat)

    s = sub.add_parser("count", parents=[common, sampling, amplifier], help="count models of a DIMACS formula")
    s.add_argument("formula")
    s.add_argument("--exact", action="store_true", help="exact inversion (the default when --shots is 0)")
    s.add_argument("--verify", action="store_true", help="cross-check against brute force; exit 4 on mismatch")
    s.set_defaults(func=cmd_count)

    s = sub.add_parser("dilate", parents=[common, sampling], help="compile G gates into postselected unitaries")
    s.add_argument("circuit")
    s.add_argument("--emit", help="write the compiled program to this file")
    s.set_defaults(func=cmd_dilate)

    s = sub.add_parser("plan", parents=[common], help="plan a single-qubit non-unitary map")
    s.add_argument("--initial", type=float, nargs=4, required=True, metavar="X", help="re0 im0 re1 im1")
    s.add_argument("--final", type=float, nargs=4, required=True, metavar="X", help="re0 im0 re1 im1")
    s.add_argument("--g", type=float, default=2.0)
    s.set_defaults(func=cmd_plan)

    s = sub.add_parser("boson", parents=[common], help="boson-number accounting for repeated G")
    s.add_argument("--n0", type=_nonneg, required=True, help="bosons in mode 0")
    s.add_argument("--n1", type=_nonneg, required=True, help="bosons in mode 1")
    s.add_argument("--g", type=_nonneg, default=2, help="integer gain, at least 2")
    s.add_argument("--steps", type=_nonneg, default=1)
    s.add_argument("--c0", type=float, nargs=2, default=(1.0, 0.0), metavar=("RE", "IM"))
    s.add_argument("--c1", type=float, nargs=2, default=(1.0, 0.0), metavar=("RE", "IM"))
    s.set_defaults(func=cmd_boson)

    s = sub.add_parser("approx", parents=[common], help="best {H,T} word for a 2x2 unitary")
    s.add_argument("--gate", choices=sorted(NAMED_GATES) + [k.lower() for k in sorted(NAMED_GATES)])
    s.add_argument("--matrix", type=float, nargs=8, metavar="X", help="row-major entries as re im pairs")
    s.add_argument("--depth", type=_nonneg, default=12)
    s.set_defaults(func=cmd_approx)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        report, code = args.func(args)
    except (InputError, CircuitParseError, DimacsError, OSError) as exc:
        print(f"nqc: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (CircuitError, GateError, StateError, SynthesisError, DilationError, BosonError, ValueError, OverflowError) as exc:
        print(f"nqc: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    if not args.timing:
        report.pop("wall_time", None)
    text = render(report, args.format)
    if args.output:
        Path(args.output).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return code
