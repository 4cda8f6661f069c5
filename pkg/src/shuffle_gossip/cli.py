"""Command-line front end.

Exit status: 0 success or PASS, 1 usage error, 2 domain error,
3 comparison FAIL, 4 I/O or input-format error.
"""

from __future__ import annotations

import argparse
import csv
import io
import math
import sys
from pathlib import Path
from typing import Sequence

from shuffle_gossip.analytic import (DropVariant, UndefinedPointError, correction_gamma,
                                     difference_sequence, forward_difference, optimal_s, p_drop,
                                     p_select)
from shuffle_gossip.experiment import (ExperimentConfig, Layer, SchemaError, compare_layers,
                                       fastest, fmt, read_summary_csv, run_experiment, sweep_csv,
                                       sweep_s, write_atomic)
from shuffle_gossip.ode_model import OdeSolution
from shuffle_gossip.pair_chain import STATES, build_matrix
from shuffle_gossip.params import ParameterError, ProtocolParams
from shuffle_gossip.protocol_sim import WarmUpError
from shuffle_gossip.topology import Topology, TopologyError

EXIT_OK, EXIT_USAGE, EXIT_DOMAIN, EXIT_FAIL, EXIT_IO = range(5)
DEFAULT_SEED = 20240101


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def __init__(self, *args, **kwargs):
        kwargs.setdefault("allow_abbrev", False)
        super().__init__(*args, **kwargs)

    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _int_list(text: str) -> list[int]:
    try:
        values = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")
    if not values:
        raise argparse.ArgumentTypeError("empty list")
    return values


def _add_params(p: argparse.ArgumentParser, with_s: bool = True, with_nodes: bool = True) -> None:
    p.add_argument("--n", type=int, default=500, help="distinct items (default: 500)")
    p.add_argument("--c", type=int, default=100, help="cache size (default: 100)")
    if with_s:
        p.add_argument("--s", type=int, default=50, help="exchange-buffer size (default: 50)")
    if with_nodes:
        p.add_argument("--N", type=int, default=2500, help="number of nodes (default: 2500)")


def _add_run(p: argparse.ArgumentParser) -> None:
    p.add_argument("--topology", choices=["grid", "complete"], default="grid",
                   help="neighbour structure (default: grid)")
    p.add_argument("--width", type=int, default=None,
                   help="grid width (default: sqrt(N) when N is a square)")
    p.add_argument("--height", type=int, default=None, help="grid height (default: N / width)")
    p.add_argument("--torus", action="store_true", help="wrap the grid at its borders")
    p.add_argument("--layer", choices=[l.value for l in Layer], default="model",
                   help="simulator layer (default: model)")
    p.add_argument("--variant", choices=[v.value for v in DropVariant], default="simplified",
                   help="drop probability used by the model layer (default: simplified)")
    p.add_argument("--rounds", type=int, default=2000,
                   help="measurement rounds after insertion (default: 2000)")
    p.add_argument("--warmup", type=int, default=1000,
                   help="protocol warm-up rounds before insertion (default: 1000)")
    p.add_argument("--replicates", type=int, default=1, help="independent runs (default: 1)")
    p.add_argument("--seed", type=int, default=DEFAULT_SEED,
                   help=f"base seed; replicate i uses seed + i (default: {DEFAULT_SEED})")
    p.add_argument("--placement", choices=["single", "uniform"], default="single",
                   help="initial item placement for the protocol layer (default: single)")
    p.add_argument("--parallel", type=int, default=1, metavar="R",
                   help="replicates run concurrently; output is unchanged (default: 1)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="shuffle-gossip", description=__doc__,
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--config", metavar="FILE",
                        help="key = value file of defaults; explicit flags override it")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("probabilities", help="selection/drop probabilities and the pair matrix")
    _add_params(p, with_nodes=False)
    p.add_argument("--variant", choices=[v.value for v in DropVariant], default="exact")
    p.add_argument("--matrix-csv", metavar="PATH", help="also write the matrix as CSV")

    p = sub.add_parser("difference", help="inverse-difference sequence e_{c,s}(n)")
    p.add_argument("--c", type=int, required=True)
    p.add_argument("--s", type=int, required=True)
    p.add_argument("--n-from", type=int, default=None, help="first n (default: c + 1)")
    p.add_argument("--n-to", type=int, default=None, help="last n (default: n-from + 8)")

    p = sub.add_parser("optimal-s", help="buffer size n - sqrt(n(n - c))")
    _add_params(p, with_s=False, with_nodes=False)

    p = sub.add_parser("simulate", help="run an experiment and write its summary CSV")
    _add_params(p)
    _add_run(p)
    p.add_argument("-o", "--output", metavar="PATH", help="summary CSV (default: stdout)")
    p.add_argument("--transcript", metavar="PATH",
                   help="protocol layer, first replicate: one line per shuffle")

    p = sub.add_parser("ode", help="closed-form x(t), y(t) for full connectivity")
    _add_params(p)
    p.add_argument("--rounds", type=int, default=1000, help="last t (default: 1000)")
    p.add_argument("--step", type=float, default=1.0, help="t-grid spacing (default: 1)")
    p.add_argument("-o", "--output", metavar="PATH", help="CSV path (default: stdout)")

    p = sub.add_parser("sweep-s", help="time to 90%% of c/n and x(t*) per buffer size")
    _add_params(p, with_s=False)
    _add_run(p)
    p.add_argument("--values", type=_int_list, required=True, help="comma-separated s values")
    p.add_argument("--at", type=int, default=None, help="t* (default: last round)")
    p.add_argument("-o", "--output", metavar="PATH", help="CSV path (default: stdout)")

    p = sub.add_parser("compare", help="band comparison of two summary CSVs")
    p.add_argument("a", help="reference summary (its std defines the band)")
    p.add_argument("b", help="summary checked against the band")
    p.add_argument("--metrics", choices=["replication", "coverage", "both"], default="both")
    p.add_argument("--burn-in", type=int, default=10)
    p.add_argument("--required", type=float, default=0.95)
    p.add_argument("-o", "--output", metavar="PATH", help="per-round comparison CSV")
    return parser


def load_config(path: str) -> dict[str, str]:
    values = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise UsageError(f"{path}:{lineno}: expected 'key = value'")
            values[key.strip().replace("-", "_")] = value.strip()
    return values


def _apply_config(parser: argparse.ArgumentParser, argv: Sequence[str]) -> None:
    pre = argparse.ArgumentParser(add_help=False, allow_abbrev=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if not known.config:
        return
    values = load_config(known.config)
    subparsers = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
    unused = set(values)
    for sp in subparsers.choices.values():
        defaults = {}
        for action in sp._actions:
            if action.dest in values:
                defaults[action.dest] = _convert(action, values[action.dest], known.config)
                unused.discard(action.dest)
        sp.set_defaults(**defaults)
    if unused:
        raise UsageError(f"{known.config}: unknown keys {', '.join(sorted(unused))}")


def _convert(action: argparse.Action, text: str, path: str):
    if isinstance(action, argparse._StoreTrueAction):
        return text.lower() in ("1", "true", "yes", "on")
    try:
        value = action.type(text) if action.type else text
    except (ValueError, argparse.ArgumentTypeError) as exc:
        raise UsageError(f"{path}: bad value for {action.dest}: {exc}")
    if action.choices is not None and value not in action.choices:
        raise UsageError(f"{path}: {action.dest} must be one of {', '.join(action.choices)}")
    return value


def _topology(args) -> Topology:
    if args.topology == "complete":
        return Topology.complete(args.N)
    width, height = args.width, args.height
    if width is None and height is None:
        side = math.isqrt(args.N)
        if side * side != args.N:
            raise ParameterError(f"N={args.N} is not a square; give --width/--height")
        width = height = side
    elif width is None:
        width = args.N // height
    elif height is None:
        height = args.N // width
    if width * height != args.N:
        raise ParameterError(f"grid {width}x{height} does not have N={args.N} nodes")
    return Topology.grid(width, height, torus=args.torus)


def _config(args, s: int | None = None) -> ExperimentConfig:
    for name in ("rounds", "replicates", "parallel"):
        if getattr(args, name) < 1:
            raise ParameterError(f"--{name} must be at least 1")
    params = ProtocolParams(n=args.n, c=args.c, s=args.s if s is None else s, N=args.N)
    return ExperimentConfig(params=params, topology=_topology(args), layer=Layer(args.layer),
                            variant=DropVariant(args.variant), warmup_rounds=args.warmup,
                            rounds=args.rounds, replicates=args.replicates,
                            base_seed=args.seed, placement=args.placement)


def _emit(text: str, path: str | None) -> None:
    if path:
        write_atomic(path, text)
    else:
        sys.stdout.write(text)


def _frac(q) -> str:
    return f"{q.numerator}/{q.denominator}" if q.denominator != 1 else str(q.numerator)


def cmd_probabilities(args) -> int:
    params = ProtocolParams(n=args.n, c=args.c, s=args.s)
    variant = DropVariant(args.variant)
    sel = p_select(params)
    drop = p_drop(params, variant)
    cf = correction_gamma(params.n, params.s)
    out = sys.stdout
    out.write(f"n = {params.n}, c = {params.c}, s = {params.s}, variant = {variant.value}\n")
    out.write(f"P_select = {_frac(sel)} = {fmt(float(sel))}\n")
    out.write(f"P_drop = {_frac(drop)} = {fmt(float(drop))}\n")
    for other in DropVariant:
        if other is variant:
            continue
        try:
            value = p_drop(params, other)
        except ParameterError as exc:
            out.write(f"P_drop[{other.value}] undefined ({exc})\n")
        else:
            out.write(f"P_drop[{other.value}] = {_frac(value)} = {fmt(float(value))}\n")
    out.write(f"gamma = {_frac(cf.gamma)} = {fmt(float(cf.gamma))}\n")
    out.write(f"theta = {_frac(cf.theta)} = {fmt(float(cf.theta))}\n")
    matrix = build_matrix(params, variant)
    out.write("P(target|source)  " + "  ".join(f"{t.label:>12}" for t in STATES) + "\n")
    for src in STATES:
        cells = "  ".join(f"{fmt(matrix.probability(src, t)):>12}" for t in STATES)
        out.write(f"{src.label:>16}  {cells}\n")
    if args.matrix_csv:
        write_atomic(args.matrix_csv, matrix.to_csv())
    return EXIT_OK


def cmd_difference(args) -> int:
    start = args.c + 1 if args.n_from is None else args.n_from
    stop = start + 8 if args.n_to is None else args.n_to
    if stop < start:
        raise ParameterError("--n-to must not be below --n-from")
    ns = list(range(start, stop + 1))
    seq = difference_sequence(args.c, args.s, ns)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["n", "e", "delta"])
    deltas = forward_difference(seq)
    for i, (n, e) in enumerate(zip(ns, seq)):
        writer.writerow([n, _frac(e), _frac(deltas[i]) if i < len(deltas) else ""])
    sys.stdout.write(buf.getvalue())
    return EXIT_OK


def cmd_optimal_s(args) -> int:
    real, integer = optimal_s(args.n, args.c)
    sys.stdout.write(f"s* = {fmt(real)} (integer {integer})\n")
    return EXIT_OK


def cmd_simulate(args) -> int:
    config = _config(args)
    summary = run_experiment(config, workers=args.parallel)
    _emit(summary.to_csv(), args.output)
    if args.transcript:
        _write_transcript(config, args.transcript)
    sys.stderr.write(f"{config.layer.value} {config.topology.describe()} {config.params}: "
                     f"final replication {fmt(summary.repl_mean[-1])}, "
                     f"coverage {fmt(summary.cov_mean[-1])}\n")
    return EXIT_OK


def _write_transcript(config: ExperimentConfig, path: str) -> None:
    from shuffle_gossip.protocol_sim import ShuffleNetwork
    if config.layer is not Layer.PROTOCOL:
        raise ParameterError("--transcript needs --layer protocol")
    rng = config.replicate_rng(0)
    net = ShuffleNetwork(config.params, config.topology).place_items(rng, config.placement)
    lines = ["round,initiator,contacted,dup_at_contacted,dropped_by_initiator,dropped_by_contacted"]
    for r in range(config.warmup_rounds):
        net.run_round(rng, on_shuffle=lambda tr, r=r: lines.append(tr.line(r)))
    run = net.insert_and_track(rng)
    for r in range(config.rounds):
        run.step(rng, on_shuffle=lambda tr, r=r: lines.append(tr.line(config.warmup_rounds + r)))
    write_atomic(path, "\n".join(lines) + "\n")


def cmd_ode(args) -> int:
    import numpy as np
    if args.rounds < 0 or args.step <= 0:
        raise ParameterError("--rounds must be ≥ 0 and --step > 0")
    sol = OdeSolution(ProtocolParams(n=args.n, c=args.c, s=args.s, N=args.N))
    n_points = int(math.floor(args.rounds / args.step + 1e-9)) + 1
    t = np.arange(n_points) * args.step
    x, y = np.atleast_1d(sol.x(t)), np.atleast_1d(sol.y(t))
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["t", "x", "y"])
    for ti, xi, yi in zip(t, x, y):
        writer.writerow([fmt(ti), fmt(xi), fmt(yi)])
    _emit(buf.getvalue(), args.output)
    sys.stderr.write(f"x({fmt(t[-1])}) = {fmt(x[-1])}, y({fmt(t[-1])}) = {fmt(y[-1])}\n")
    return EXIT_OK


def cmd_sweep_s(args) -> int:
    args.s = min(args.values)
    # validate every s before running anything
    for s in args.values:
        ProtocolParams(n=args.n, c=args.c, s=s, N=args.N)
    config = _config(args)
    rows = sweep_s(config, args.values, at_round=args.at, workers=args.parallel)
    _emit(sweep_csv(rows), args.output)
    best = fastest(rows)
    sys.stderr.write(f"fastest to 90% of c/n: s = {best.s} ({best.rounds_to_90} rounds)\n"
                     if best else "no s reached 90% of c/n\n")
    return EXIT_OK


def cmd_compare(args) -> int:
    a, b = read_summary_csv(args.a), read_summary_csv(args.b)
    metrics = ("replication", "coverage") if args.metrics == "both" else (args.metrics,)
    report = compare_layers(a, b, burn_in=args.burn_in, required=args.required, metrics=metrics)
    if args.output:
        write_atomic(args.output, report.to_csv())
    sys.stdout.write(report.summary_line() + "\n")
    return EXIT_OK if report.passed else EXIT_FAIL


COMMANDS = {
    "probabilities": cmd_probabilities,
    "difference": cmd_difference,
    "optimal-s": cmd_optimal_s,
    "simulate": cmd_simulate,
    "ode": cmd_ode,
    "sweep-s": cmd_sweep_s,
    "compare": cmd_compare,
}


def main(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        _apply_config(parser, argv)
    except UsageError as exc:
        sys.stderr.write(f"shuffle-gossip: error: {exc}\n")
        return EXIT_USAGE
    except OSError as exc:
        sys.stderr.write(f"shuffle-gossip: error: {exc}\n")
        return EXIT_IO
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if isinstance(exc.code, int) else EXIT_USAGE
    try:
        return COMMANDS[args.command](args)
    except (ParameterError, TopologyError, UndefinedPointError, WarmUpError) as exc:
        sys.stderr.write(f"shuffle-gossip: domain error: {exc}\n")
        return EXIT_DOMAIN
    except (OSError, SchemaError) as exc:
        sys.stderr.write(f"shuffle-gossip: I/O error: {exc}\n")
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
