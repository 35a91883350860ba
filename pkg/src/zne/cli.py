"""Command-line interface.

Exit codes: 0 success, 2 input error, 3 numerical or fit error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from typing import Sequence

import numpy as np

from zne import benchmarks
from zne.circuit import CircuitError, load_circuit
from zne.inference import AdaExpFactory, ExpFactory, Factory, FactoryError, parse_factory
from zne.pipeline import SCALERS, ExecutorError, ZneConfig, execute_with_zne
from zne.sim import Exact, NoiseModel, Observable, Sampled, make_executor

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_FIT = 3


class InputError(Exception):
    pass


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, float):
        return repr(x)
    return str(x)


def _scale_factors(text: str) -> list[float]:
    try:
        scales = [float(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad scale factor list {text!r}") from None
    if not scales:
        raise argparse.ArgumentTypeError("empty scale factor list")
    if any(s < 1 for s in scales):
        raise argparse.ArgumentTypeError(f"scale factors must be >= 1: {text}")
    if any(b <= a for a, b in zip(scales, scales[1:])):
        raise argparse.ArgumentTypeError(f"scale factors must be ascending: {text}")
    return scales


def _noise(text: str) -> NoiseModel:
    try:
        return NoiseModel.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _shots(text: str) -> int | None:
    if text == "exact":
        return None
    try:
        shots = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"--shots takes 'exact' or a count, got {text!r}") from None
    if shots < 1:
        raise argparse.ArgumentTypeError("--shots must be >= 1")
    return shots


def _seed(text: str) -> int:
    try:
        seed = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad seed {text!r}") from None
    if not 0 <= seed < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return seed


def _positive(text: str) -> int:
    try:
        n = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text!r}") from None
    if n < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {n}")
    return n


def _factory(spec: str, scales: Sequence[float]) -> Factory:
    try:
        return parse_factory(spec, scales)
    except ValueError as exc:
        raise InputError(str(exc)) from None


def _write(text: str, output: str) -> None:
    if output == "-":
        sys.stdout.write(text)
        sys.stdout.flush()
    else:
        with open(output, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)


def _csv(header: Sequence[str], rows: Sequence[Sequence]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(x) for x in row])
    return buf.getvalue()


def _json(data) -> str:
    return json.dumps(data, indent=2) + "\n"


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_run(args) -> int:
    try:
        circuit = load_circuit(args.circuit)
        with open(args.observable, encoding="utf-8") as fh:
            obs = Observable.from_json(fh.read())
    except OSError as exc:
        raise InputError(f"cannot read {exc.filename}: {exc.strerror}") from None
    if obs.num_qubits != circuit.num_qubits:
        raise InputError(
            f"observable acts on {obs.num_qubits} qubit(s), circuit has {circuit.num_qubits}"
        )
    mode = Exact() if args.shots is None else Sampled(args.shots, args.seed)
    executor = make_executor(args.noise, obs, mode)
    factory = _factory(args.factory, args.scale_factors)
    config = ZneConfig(factory, args.folding, args.num_to_average, args.seed)
    result = execute_with_zne(circuit, executor, config)
    _write(_json(result.to_dict()), args.output)
    return EXIT_OK


RB_HEADER = ("kind", "trial", "factory", "unmitigated", "mitigated", "stderr", "identity_ok")


def cmd_bench_rb(args) -> int:
    if args.depth < 2 or args.depth % 2:
        raise InputError(f"--depth must be a positive even number, got {args.depth}")
    specs = args.factory or ["exp:0.25", "richardson:ends", "linear"]
    factories = [(spec, _factory(spec, args.scale_factors)) for spec in specs]
    trials = benchmarks.run_rb(
        args.qubits,
        args.depth,
        args.trials,
        args.noise,
        factories,
        args.seed,
        scale_noise=args.folding,
        num_to_average=args.num_to_average,
        shots=args.shots,
    )
    rows = [
        ("trial", t.trial, t.factory, t.unmitigated, t.mitigated, t.stderr, t.identity_ok)
        for t in trials
    ]
    ddof = 1 if args.trials > 1 else 0
    for spec in specs:
        sel = [t for t in trials if t.factory == spec]
        un = np.array([t.unmitigated for t in sel])
        mit = np.array([t.mitigated for t in sel])
        errs = [t.stderr for t in sel if t.stderr is not None]
        ok = all(t.identity_ok for t in sel)
        mean_err = float(np.mean(errs)) if errs else None
        rows.append(("mean", "", spec, float(un.mean()), float(mit.mean()), mean_err, ok))
        rows.append(("std", "", spec, float(un.std(ddof=ddof)), float(mit.std(ddof=ddof)), None, ok))
        rows.append(
            (
                "mean_abs_error",
                "",
                spec,
                float(np.mean(np.abs(un - 1))),
                float(np.mean(np.abs(mit - 1))),
                None,
                ok,
            )
        )
    _write(_csv(RB_HEADER, rows), args.output)
    return EXIT_OK


H2_HEADER = ("r", "noise", "exact", "unmitigated", "mitigated")


def cmd_bench_h2(args) -> int:
    try:
        with open(args.coeffs, encoding="utf-8") as fh:
            coefficients = benchmarks.read_h2_coefficients(fh.read())
    except OSError as exc:
        raise InputError(f"cannot read {exc.filename}: {exc.strerror}") from None
    except benchmarks.CoefficientFileError as exc:
        raise InputError(f"{args.coeffs}: {exc}") from None
    noises = args.noise or [NoiseModel.parse("depolarizing:0.005"), NoiseModel.parse("depolarizing:0.02")]
    factory = _factory(args.factory, args.scale_factors)
    h2 = benchmarks.run_h2(
        coefficients,
        noises,
        benchmarks.theta_grid(args.theta_points),
        factory,
        args.seed,
        scale_noise=args.folding,
        num_to_average=args.num_to_average,
        shots=args.shots,
    )
    rows = [(row.r, row.noise, row.exact, row.unmitigated, row.mitigated) for row in h2]
    for noise in noises:
        sel = [row for row in h2 if row.noise == str(noise)]
        exact = [row.exact for row in sel]
        rows.append(
            (
                "rel_l2",
                str(noise),
                None,
                benchmarks.relative_l2([row.unmitigated for row in sel], exact),
                benchmarks.relative_l2([row.mitigated for row in sel], exact),
            )
        )
    _write(_csv(H2_HEADER, rows), args.output)
    return EXIT_OK


def read_fit_data(text: str) -> tuple[list[float], list[float]]:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or [h.strip() for h in lines[0].split(",")] != ["scale", "value"]:
        raise InputError("fit data must start with the header 'scale,value'")
    xs, ys = [], []
    for lineno, line in enumerate(lines[1:], start=2):
        fields = line.split(",")
        if len(fields) != 2:
            raise InputError(f"line {lineno}: expected 2 fields, got {len(fields)}")
        try:
            x, y = float(fields[0]), float(fields[1])
        except ValueError:
            raise InputError(f"line {lineno}: non-numeric field") from None
        if not (np.isfinite(x) and np.isfinite(y)) or x < 1:
            raise InputError(f"line {lineno}: scale must be >= 1 and values finite")
        xs.append(x)
        ys.append(y)
    if not xs:
        raise InputError("fit data has no rows")
    return xs, ys


def cmd_fit(args) -> int:
    try:
        with open(args.data, encoding="utf-8") as fh:
            xs, ys = read_fit_data(fh.read())
    except OSError as exc:
        raise InputError(f"cannot read {exc.filename}: {exc.strerror}") from None
    factory = _factory(args.factory, xs)
    if isinstance(factory, AdaExpFactory):
        # the points are already chosen; fit the same exponential model
        factory = ExpFactory(xs, factory.asymptote)
    for x, y in zip(xs, ys):
        factory.push(factory.next_scale(), y)
    value, diagnostics = factory.reduce()
    _write(_json({"zne_value": value, "diagnostics": diagnostics.to_dict()}), args.output)
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def _shared(p: argparse.ArgumentParser, factory_default: str | None, scales_default: str) -> None:
    p.add_argument("--seed", type=_seed, default=0, help="unsigned 64-bit seed (default 0)")
    p.add_argument(
        "--factory",
        default=factory_default,
        action="append" if factory_default is None else "store",
        help="linear | richardson[:ends] | poly:<d> | exp[:<asymptote>] | "
        "polyexp:<d>[:<asymptote>] | adaexp:<scale>,<steps>[:<asymptote>]",
    )
    p.add_argument(
        "--scale-factors",
        type=_scale_factors,
        default=_scale_factors(scales_default),
        help=f"comma-separated ascending scale factors (default {scales_default})",
    )
    p.add_argument("--folding", choices=sorted(SCALERS), default="random")
    p.add_argument("--num-to-average", type=_positive, default=1)
    p.add_argument("--shots", type=_shots, default=None, help="'exact' (default) or a shot count")
    p.add_argument("--output", default="-", help="output path, '-' for stdout")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="zne", description="Zero-noise extrapolation toolkit.")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="mitigate one circuit/observable pair")
    run.add_argument("--circuit", required=True)
    run.add_argument("--observable", required=True)
    run.add_argument("--noise", type=_noise, default=NoiseModel())
    _shared(run, "richardson", "1,2,3")
    run.set_defaults(func=cmd_run)

    rb = sub.add_parser("bench-rb", help="mirror-circuit randomized benchmarking")
    rb.add_argument("--qubits", type=_positive, default=2)
    rb.add_argument("--depth", type=int, default=20)
    rb.add_argument("--trials", type=_positive, default=50)
    rb.add_argument("--noise", type=_noise, default=NoiseModel.parse("depolarizing:0.01"))
    _shared(rb, None, "1,1.5,2,2.5,3")
    rb.set_defaults(func=cmd_bench_rb)

    h2 = sub.add_parser("bench-h2", help="H2 potential energy surface")
    h2.add_argument("--coeffs", required=True, help="CSV with header r,g0,g1,g2,g3,g4,g5")
    h2.add_argument("--noise", type=_noise, action="append", help="repeat for several levels")
    h2.add_argument("--theta-points", type=_positive, default=41)
    _shared(h2, "poly:2", "1,2,3")
    h2.set_defaults(func=cmd_bench_h2)

    fit = sub.add_parser("fit", help="extrapolate stored (scale, value) data")
    fit.add_argument("--data", required=True, help="CSV with header scale,value")
    fit.add_argument("--factory", default="richardson")
    fit.add_argument("--output", default="-")
    fit.set_defaults(func=cmd_fit)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except FactoryError as exc:
        print(f"zne: fit error: {exc}", file=sys.stderr)
        return EXIT_FIT
    except (InputError, CircuitError, ExecutorError, ValueError, OSError) as exc:
        print(f"zne: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
