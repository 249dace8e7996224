"""Command-line entry point: gen, solve, search, oracle, and bench subcommands.

All subcommands accept --seed / --out / --format plus --config FILE, a JSON
file whose keys mirror the long flag names (command-line values win).  When
--out is given it is treated as a report directory: the structured record
lands there together with rendered figures.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import plots
from .annealers import (SaSchedule, SqaSchedule, simulated_annealing,
                        simulated_quantum_annealing)
from .bench import METHODS, BenchConfig, run_benchmark
from .heatmap import (HeatmapConfig, load_heatmap, optimize_heatmap,
                      save_heatmap)
from .instances import generate_instances, load_instance, save_instance
from .oracle import (HELD_KARP_MAX_N, brute_force_tsp, exhaustive_qubo_min,
                     gap_percent, held_karp)
from .qubo import (InvalidEncoding, build_tsp_qubo, constraint_value,
                   decode_assignment, index_to_bits, qubo_energy)
from .schrodinger import AnnealSchedule, evolve
from .search import SearchParams, guided_search


def _instance_from_args(args: argparse.Namespace):
    if getattr(args, "infile", None):
        return load_instance(args.infile)
    if getattr(args, "n", None):
        return generate_instances(args.n, 1, seed=args.seed)[0]
    raise ValueError("need an instance: pass --infile FILE or --n N")


def _emit(record: dict, fmt: str) -> str:
    if fmt == "json-like":
        return json.dumps(record, indent=2, default=str)
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow(record.keys())
        writer.writerow(record.values())
        return buf.getvalue().rstrip()
    width = max(len(k) for k in record)
    return "\n".join(f"{k.ljust(width)}  {v}" for k, v in record.items())


def _report_dir(args: argparse.Namespace) -> Path | None:
    if not getattr(args, "out", None):
        return None
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_record(record: dict, fmt: str, out: Path, stem: str) -> None:
    suffix = {"table": ".txt", "csv": ".csv", "json-like": ".json"}[fmt]
    (out / f"{stem}{suffix}").write_text(_emit(record, fmt) + "\n")


def _cmd_gen(args: argparse.Namespace) -> int:
    if not args.out:
        raise ValueError("gen needs --out (a .json file for --count 1, else a directory)")
    batch = generate_instances(args.n, args.count, seed=args.seed)
    out = Path(args.out)
    if args.count == 1 and out.suffix == ".json":
        out.parent.mkdir(parents=True, exist_ok=True)
        save_instance(batch[0], str(out))
        print(out)
        return 0
    out.mkdir(parents=True, exist_ok=True)
    for idx, instance in enumerate(batch):
        save_instance(instance, str(out / f"instance_{idx:03d}.json"))
    print(f"wrote {args.count} instances to {out}")
    return 0


def _solve_heatmap(args: argparse.Namespace, instance) -> int:
    mode = {"direct": "direct_logits"}.get(args.mode, args.mode)
    steps = args.steps if args.steps is not None else 500
    config = HeatmapConfig(tau=args.tau, steps=steps, learning_rate=args.lr,
                           mode=mode, hidden_dim=args.hidden_dim,
                           penalty_a=args.penalty, seed=args.seed)
    start = time.perf_counter()
    _, heatmap, trace = optimize_heatmap(instance, config)
    elapsed = time.perf_counter() - start
    record = {
        "method": "heatmap",
        "n": instance.n,
        "seed": args.seed,
        "mode": mode,
        "steps": steps,
        "initial_loss": f"{trace[0]:.9f}",
        "final_loss": f"{trace[-1]:.9f}",
        "time_seconds": f"{elapsed:.3f}",
    }
    print(_emit(record, args.fmt))
    out = _report_dir(args)
    if out is not None:
        _write_record(record, args.fmt, out, "solve_heatmap")
        save_heatmap(heatmap, out / "heatmap.csv")
        with open(out / "loss_trace.csv", "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["step", "loss"])
            writer.writerows(enumerate(trace))
        plots.plot_loss_trace(trace, out / "loss_trace.png")
        plots.plot_heatmap(heatmap, out / "heatmap.png")
    return 0


def _cmd_solve(args: argparse.Namespace) -> int:
    instance = _instance_from_args(args)
    if args.method == "heatmap":
        return _solve_heatmap(args, instance)
    model = build_tsp_qubo(instance, penalty_a=args.penalty)
    start = time.perf_counter()
    trace = None
    evolution = None
    if args.method == "sa":
        schedule = SaSchedule(
            t_initial=args.t0 if args.t0 is not None else model.penalty_a,
            t_final=args.t1, sweeps=args.sweeps, cooling=args.cooling)
        result = simulated_annealing(model, schedule, seed=args.seed)
        assignment, energy, trace = (result.best_assignment,
                                     result.best_energy, result.energy_trace)
    elif args.method == "sqa":
        schedule = SqaSchedule(replicas=args.replicas, gamma_initial=args.gamma0,
                               gamma_final=args.gamma1, temperature=args.temp,
                               sweeps=args.sweeps)
        result = simulated_quantum_annealing(model, schedule, seed=args.seed)
        assignment, energy, trace = (result.best_assignment,
                                     result.best_energy, result.energy_trace)
    else:
        steps = args.steps if args.steps is not None else 200
        schedule = AnnealSchedule(t_final=args.tf, steps=steps)
        state, evolution = evolve(model, schedule)
        assignment = np.asarray(
            index_to_bits(int(np.argmax(state.probabilities())), model.m),
            dtype=np.float64)
        energy = qubo_energy(model, assignment)
    elapsed = time.perf_counter() - start
    decoded = decode_assignment(instance, assignment)
    valid = not isinstance(decoded, InvalidEncoding)
    record = {
        "method": args.method,
        "n": instance.n,
        "seed": args.seed,
        "energy": f"{energy:.9f}",
        "constraint": f"{constraint_value(instance, assignment):.1f}",
        "valid_tour": valid,
        "length": f"{decoded.length:.9f}" if valid else "",
        "order": " ".join(map(str, decoded.order)) if valid else "",
        "time_seconds": f"{elapsed:.3f}",
    }
    print(_emit(record, args.fmt))
    out = _report_dir(args)
    if out is not None:
        _write_record(record, args.fmt, out, f"solve_{args.method}")
        if trace is not None:
            plots.plot_energy_trace(trace, out / "energy_trace.png")
        if evolution is not None:
            plots.plot_evolution_trace(evolution, out / "evolution.png")
            with open(out / "evolution.csv", "w", newline="") as fh:
                writer = csv.writer(fh)
                writer.writerow(["t", "a", "b", "ground_probability",
                                 "energy_expectation"])
                writer.writerows(zip(evolution.times, evolution.a_values,
                                     evolution.b_values,
                                     evolution.ground_probability,
                                     evolution.energy_expectation))
        if valid and instance.coords is not None:
            plots.plot_tour(instance, decoded, out / "tour.png")
    return 0


def _cmd_search(args: argparse.Namespace) -> int:
    instance = _instance_from_args(args)
    start = time.perf_counter()
    trace = None
    if args.heatmap:
        heatmap = load_heatmap(args.heatmap)
    else:
        mode = {"direct": "direct_logits"}.get(args.mode, args.mode)
        config = HeatmapConfig(tau=args.tau, steps=args.steps,
                               learning_rate=args.lr, mode=mode,
                               hidden_dim=args.hidden_dim, seed=args.seed)
        _, heatmap, trace = optimize_heatmap(instance, config)
    mid = time.perf_counter()
    params = SearchParams(k_max=args.k_max, m_top=args.m_top,
                          t_attempts=args.t_attempts, max_restarts=args.restarts,
                          time_budget=args.time_budget, lam=args.lam,
                          seed=args.seed)
    result = guided_search(instance, heatmap, params)
    end = time.perf_counter()
    record = {
        "method": "heatmap+search",
        "n": instance.n,
        "seed": args.seed,
        "length": f"{result.best_tour.length:.9f}",
        "order": " ".join(map(str, result.best_tour.order)),
        "restarts_used": result.restarts_used,
        "attempts_used": result.attempts_used,
        "time_seconds": f"{mid - start:.2f} +{end - mid:.2f}",
    }
    if instance.n <= HELD_KARP_MAX_N and not instance.non_edges:
        oracle = held_karp(instance)
        record["gap_percent"] = (
            f"{max(0.0, gap_percent(result.best_tour.length, oracle.optimal_length)):.4f}")
    print(_emit(record, args.fmt))
    out = _report_dir(args)
    if out is not None:
        _write_record(record, args.fmt, out, "search")
        if trace is not None:
            plots.plot_loss_trace(trace, out / "loss_trace.png")
        plots.plot_heatmap(heatmap, out / "heatmap.png")
        if instance.coords is not None:
            plots.plot_tour(instance, result.best_tour, out / "tour.png",
                            heatmap=heatmap)
    return 0


def _cmd_oracle(args: argparse.Namespace) -> int:
    instance = _instance_from_args(args)
    method = args.method
    if method == "auto":
        if instance.n > HELD_KARP_MAX_N:
            raise ValueError(f"no exact oracle beyond n = {HELD_KARP_MAX_N}")
        method = "heldkarp"
    start = time.perf_counter()
    if method == "qubo":
        model = build_tsp_qubo(instance)
        bits, energy = exhaustive_qubo_min(model)
        decoded = decode_assignment(instance, bits)
        if isinstance(decoded, InvalidEncoding):
            raise ValueError(
                f"QUBO argmin is not a valid tour (penalty too small?): {decoded}")
        record = {"method": "qubo", "n": instance.n, "energy": f"{energy:.9f}",
                  "length": f"{decoded.length:.9f}",
                  "order": " ".join(map(str, decoded.order)),
                  "time_seconds": f"{time.perf_counter() - start:.3f}"}
    else:
        oracle = brute_force_tsp(instance) if method == "brute" else held_karp(instance)
        record = {"method": method, "n": instance.n,
                  "length": f"{oracle.optimal_length:.9f}",
                  "order": " ".join(map(str, oracle.optimal_tour.order)),
                  "nodes_explored": oracle.nodes_explored,
                  "time_seconds": f"{oracle.wall_time:.3f}"}
    print(_emit(record, args.fmt))
    out = _report_dir(args)
    if out is not None:
        _write_record(record, args.fmt, out, "oracle")
    return 0


def _cmd_bench(args: argparse.Namespace) -> int:
    sizes = tuple(int(s) for s in str(args.sizes).split(",") if s)
    methods = tuple(m for m in str(args.methods).split(",") if m)
    config = BenchConfig(sizes=sizes, instances_per_size=args.count,
                         methods=methods, seed=args.seed, sweeps=args.sweeps,
                         replicas=args.replicas, out_dir=args.out)
    rows, table = run_benchmark(config)
    if args.fmt == "json-like":
        print(json.dumps([row.__dict__ for row in rows], indent=2, default=str))
    elif args.fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow(["method", "n", "mean_length", "gap_percent",
                         "mean_time_seconds", "time_breakdown", "failures"])
        for row in rows:
            writer.writerow([row.method, row.n, f"{row.mean_length:.6f}",
                             "" if row.gap_percent is None else f"{row.gap_percent:.4f}",
                             f"{row.mean_time_seconds:.4f}",
                             row.time_breakdown, row.failures])
        print(buf.getvalue().rstrip())
    else:
        print(table)
    out = _report_dir(args)
    if out is not None and not args.no_plot:
        plots.plot_bench(rows, out / "bench_lengths.png")
    return 0


def build_parser(overrides: dict | None = None) -> argparse.ArgumentParser:
    """Build the CLI parser; config-file overrides become per-subcommand defaults."""
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="FILE",
                        help="JSON file whose keys mirror the long flags")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out", metavar="PATH",
                        help="report directory (records plus figures)")
    common.add_argument("--format", dest="fmt", default="table",
                        choices=("table", "csv", "json-like"))

    instance_src = argparse.ArgumentParser(add_help=False)
    instance_src.add_argument("--instance", "--infile", dest="infile",
                              metavar="FILE",
                              help="instance file (native JSON or TSPLIB EUC_2D)")
    instance_src.add_argument("--n", type=int,
                              help="generate a random instance of this size")

    parser = argparse.ArgumentParser(
        prog="qubotsp",
        description="TSP via QUBO: annealers, state-vector evolution, "
                    "heatmap-guided search, exact oracles, benchmarks.")
    sub = parser.add_subparsers(dest="command", required=True)
    subparsers: list[argparse.ArgumentParser] = []

    p = sub.add_parser("gen", parents=[common],
                       help="generate random instances (uniform unit square)")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--count", type=int, default=1)
    p.set_defaults(func=_cmd_gen)
    subparsers.append(p)

    p = sub.add_parser("solve", parents=[common, instance_src],
                       help="run one solver on one instance")
    p.add_argument("--method", required=True,
                   choices=("sa", "sqa", "schrodinger", "heatmap"))
    p.add_argument("--penalty", type=float, default=None,
                   help="constraint weight A (default n*max(D)+1)")
    p.add_argument("--sweeps", type=int, default=2000)
    p.add_argument("--t0", type=float, default=None,
                   help="initial temperature (default: the penalty weight)")
    p.add_argument("--t1", type=float, default=0.02)
    p.add_argument("--cooling", default="geometric",
                   choices=("geometric", "linear"))
    p.add_argument("--replicas", type=int, default=20)
    p.add_argument("--gamma0", type=float, default=3.0)
    p.add_argument("--gamma1", type=float, default=0.1)
    p.add_argument("--temp", type=float, default=0.15)
    p.add_argument("--tf", type=float, default=20.0,
                   help="anneal time for the state-vector method")
    p.add_argument("--steps", type=int, default=None,
                   help="integrator steps (schrodinger, default 200) or "
                        "descent steps (heatmap, default 500)")
    p.add_argument("--tau", type=float, default=1.0)
    p.add_argument("--lr", type=float, default=0.2)
    p.add_argument("--mode", default="direct_logits",
                   choices=("direct", "direct_logits", "encoder"))
    p.add_argument("--hidden-dim", type=int, default=32)
    p.set_defaults(func=_cmd_solve)
    subparsers.append(p)

    p = sub.add_parser("search", parents=[common, instance_src],
                       help="heatmap gradient descent plus guided local search")
    p.add_argument("--heatmap", metavar="FILE",
                   help="use this exported heatmap matrix instead of optimizing")
    p.add_argument("--steps", type=int, default=500)
    p.add_argument("--lr", type=float, default=0.2)
    p.add_argument("--tau", type=float, default=1.0)
    p.add_argument("--mode", default="direct_logits",
                   choices=("direct", "direct_logits", "encoder"))
    p.add_argument("--hidden-dim", type=int, default=32)
    p.add_argument("--K", "--k-max", dest="k_max", type=int, default=10,
                   help="edge removals per improvement attempt")
    p.add_argument("--M", "--m-top", dest="m_top", type=int, default=5,
                   help="candidate pool size")
    p.add_argument("--T", "--t-attempts", dest="t_attempts", type=int,
                   default=50, help="improvement attempts per pass")
    p.add_argument("--restarts", type=int, default=20)
    p.add_argument("--time-budget", type=float, default=None)
    p.add_argument("--lam", type=float, default=0.1,
                   help="distance-prior weight in candidate scores")
    p.set_defaults(func=_cmd_search)
    subparsers.append(p)

    p = sub.add_parser("oracle", parents=[common, instance_src],
                       help="exact optimum (brute force, Held-Karp, or QUBO scan)")
    p.add_argument("--method", default="auto",
                   choices=("auto", "brute", "heldkarp", "qubo"))
    p.set_defaults(func=_cmd_oracle)
    subparsers.append(p)

    p = sub.add_parser("bench", parents=[common],
                       help="method x size benchmark table with published reference rows")
    p.add_argument("--sizes", default="20",
                   help="comma-separated instance sizes, e.g. 20,50,100")
    p.add_argument("--count", type=int, default=5,
                   help="instances per size")
    p.add_argument("--methods", default="heatmap+search",
                   help=f"comma-separated subset of {','.join(METHODS)}")
    p.add_argument("--sweeps", type=int, default=4000)
    p.add_argument("--replicas", type=int, default=20)
    p.add_argument("--no-plot", action="store_true",
                   help="skip figure rendering in the report directory")
    p.set_defaults(func=_cmd_bench)
    subparsers.append(p)

    if overrides:
        clean = {key.replace("-", "_"): value
                 for key, value in overrides.items()}
        clean.pop("func", None)
        clean.pop("command", None)
        # Subparsers parse into a fresh namespace, so defaults must
        # be planted on each one, not just on the root parser.
        for target in subparsers:
            dests = {action.dest for action in target._actions}
            target.set_defaults(**{key: value for key, value in clean.items()
                                   if key in dests})
    return parser


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    overrides = None
    if known.config:
        try:
            with open(known.config) as fh:
                overrides = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            print(f"error: cannot read config {known.config}: {exc}", file=sys.stderr)
            return 2
    parser = build_parser(overrides)
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
