"""Batch experiment runner: Length / Gap (%) / Time rows across solver methods.

Runs any subset of the four solvers over batches of random instances and
aggregates per-(method, n) rows, with the heatmap pipeline's two timing
components reported separately.  Published large-solver results ship in a
static CSV for side-by-side display only; they are not computed here and
never used as targets.
"""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .annealers import (SaSchedule, SqaSchedule, simulated_annealing,
                        simulated_quantum_annealing)
from .heatmap import HeatmapConfig, optimize_heatmap
from .instances import TspInstance, generate_instances
from .oracle import HELD_KARP_MAX_N, gap_percent, held_karp
from .qubo import (InvalidEncoding, build_tsp_qubo, decode_assignment,
                   index_to_bits)
from .schrodinger import AnnealSchedule, evolve
from .search import SearchParams, guided_search

METHODS = ("sa", "sqa", "schrodinger", "heatmap+search")
SCHRODINGER_MAX_N = 4

REFERENCE_PATH = Path(__file__).parent / "data" / "reference_results.csv"


@dataclass(frozen=True)
class BenchConfig:
    """What to run: sizes x instances x methods, all seeded."""

    sizes: tuple[int, ...] = (20,)
    instances_per_size: int = 5
    methods: tuple[str, ...] = ("heatmap+search",)
    seed: int = 0
    sweeps: int = 4000
    replicas: int = 20
    out_dir: str | None = None

    def __post_init__(self) -> None:
        if not self.sizes or any(n < 2 for n in self.sizes):
            raise ValueError(f"sizes must all be >= 2, got {self.sizes}")
        if self.instances_per_size < 1:
            raise ValueError(
                f"instances_per_size must be >= 1, got {self.instances_per_size}")
        if not self.methods:
            raise ValueError("need at least one method")
        for method in self.methods:
            if method not in METHODS:
                raise ValueError(f"unknown method {method!r}, expected one of {METHODS}")
        if "schrodinger" in self.methods and max(self.sizes) > SCHRODINGER_MAX_N:
            raise ValueError(
                f"schrodinger is limited to n <= {SCHRODINGER_MAX_N} "
                f"(m = n^2 spins), got sizes {self.sizes}")
        if self.sweeps < 1:
            raise ValueError(f"sweeps must be >= 1, got {self.sweeps}")
        if self.replicas < 2:
            raise ValueError(f"replicas must be >= 2, got {self.replicas}")


@dataclass(frozen=True)
class BenchRow:
    """Aggregated result of one method on one batch of same-size instances."""

    method: str
    n: int
    mean_length: float
    gap_percent: float | None
    gap_basis: str
    mean_time_seconds: float
    time_breakdown: str
    lengths: tuple[float, ...]
    failures: int = 0

    def comparable(self) -> tuple:
        """Everything except wall-time fields, for determinism checks."""
        return (self.method, self.n, self.mean_length, self.gap_percent,
                self.gap_basis, self.lengths, self.failures)


@dataclass(frozen=True)
class ReferenceRow:
    """A published result, kept verbatim (times stay as printed strings)."""

    method: str
    kind: str
    n: int
    length: float
    gap_percent: float
    time_text: str


def load_reference_rows(sizes: tuple[int, ...] | None = None) -> list[ReferenceRow]:
    """Published comparison rows from the bundled static file."""
    rows = []
    with open(REFERENCE_PATH, newline="") as fh:
        for rec in csv.DictReader(fh):
            row = ReferenceRow(
                method=rec["method"],
                kind=rec["type"],
                n=int(rec["n"]),
                length=float(rec["length"]),
                gap_percent=float(rec["gap_percent"]),
                time_text=rec["time"],
            )
            if sizes is None or row.n in sizes:
                rows.append(row)
    return rows


def _batch_seed(seed: int, n: int, index: int) -> int:
    # index 0 seeds instance generation; solver runs use index >= 1.
    entropy = np.random.SeedSequence((seed, n, index)).generate_state(1, np.uint32)
    return int(entropy[0])


def _run_sa(instance: TspInstance, config: BenchConfig, seed: int):
    start = time.perf_counter()
    model = build_tsp_qubo(instance)
    schedule = SaSchedule(t_initial=model.penalty_a, t_final=0.02,
                          sweeps=config.sweeps)
    result = simulated_annealing(model, schedule, seed=seed)
    decoded = decode_assignment(instance, result.best_assignment)
    elapsed = time.perf_counter() - start
    return decoded, elapsed, ""


def _run_sqa(instance: TspInstance, config: BenchConfig, seed: int):
    start = time.perf_counter()
    model = build_tsp_qubo(instance)
    schedule = SqaSchedule(replicas=config.replicas, gamma_initial=3.0,
                           gamma_final=0.1, temperature=0.15,
                           sweeps=config.sweeps)
    result = simulated_quantum_annealing(model, schedule, seed=seed)
    decoded = decode_assignment(instance, result.best_assignment)
    elapsed = time.perf_counter() - start
    return decoded, elapsed, ""


def _run_schrodinger(instance: TspInstance, config: BenchConfig, seed: int):
    start = time.perf_counter()
    model = build_tsp_qubo(instance)
    schedule = AnnealSchedule(t_final=20.0, steps=200)
    state, _ = evolve(model, schedule)
    # The most probable basis state is the deterministic readout.
    best = int(np.argmax(state.probabilities()))
    bits = np.array(index_to_bits(best, model.m), dtype=np.float64)
    decoded = decode_assignment(instance, bits)
    elapsed = time.perf_counter() - start
    return decoded, elapsed, ""


def _run_heatmap_search(instance: TspInstance, config: BenchConfig, seed: int):
    start = time.perf_counter()
    _, heatmap, _ = optimize_heatmap(instance, HeatmapConfig(seed=seed))
    mid = time.perf_counter()
    params = SearchParams(seed=seed, m_top=min(5, instance.n - 1))
    result = guided_search(instance, heatmap, params)
    end = time.perf_counter()
    breakdown = f"{mid - start:.2f}s +{end - mid:.2f}s"
    return result.best_tour, end - start, breakdown


_RUNNERS = {
    "sa": _run_sa,
    "sqa": _run_sqa,
    "schrodinger": _run_schrodinger,
    "heatmap+search": _run_heatmap_search,
}


def _mean_breakdown(parts: list[str]) -> str:
    if not parts or not parts[0]:
        return ""
    first = np.mean([float(p.split("s +")[0]) for p in parts])
    second = np.mean([float(p.split("s +")[1].rstrip("s")) for p in parts])
    return f"{first:.2f}s +{second:.2f}s"


def run_benchmark(config: BenchConfig) -> tuple[list[BenchRow], str]:
    """Run every configured method over every batch; return rows and a table.

    Gap is measured per instance against held_karp when n allows the exact
    oracle, otherwise each row's mean length is compared against the best
    method in the same run.  Per-instance solver failures (an infeasible
    decoded assignment) are counted on the row, not raised.
    """
    rows: list[BenchRow] = []
    for n in config.sizes:
        batch = generate_instances(n, config.instances_per_size,
                                   seed=_batch_seed(config.seed, n, 0))
        exact_ok = n <= HELD_KARP_MAX_N
        optima = [held_karp(inst).optimal_length for inst in batch] if exact_ok else None
        for method in config.methods:
            runner = _RUNNERS[method]
            lengths: list[float] = []
            gaps: list[float] = []
            times: list[float] = []
            parts: list[str] = []
            failures = 0
            for idx, instance in enumerate(batch):
                seed = _batch_seed(config.seed, n, idx + 1)
                outcome, elapsed, breakdown = runner(instance, config, seed)
                times.append(elapsed)
                parts.append(breakdown)
                if isinstance(outcome, InvalidEncoding):
                    failures += 1
                    continue
                lengths.append(outcome.length)
                if exact_ok:
                    gaps.append(max(0.0, gap_percent(outcome.length, optima[idx])))
            mean_length = float(np.mean(lengths)) if lengths else float("nan")
            gap = float(np.mean(gaps)) if gaps else None
            rows.append(BenchRow(
                method=method,
                n=n,
                mean_length=mean_length,
                gap_percent=gap,
                gap_basis="held_karp" if exact_ok else "best_method",
                mean_time_seconds=float(np.mean(times)),
                time_breakdown=_mean_breakdown(parts),
                lengths=tuple(lengths),
                failures=failures,
            ))
    rows = _fill_relative_gaps(rows)
    table = format_table(rows, load_reference_rows(tuple(config.sizes)))
    if config.out_dir is not None:
        out = Path(config.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_rows_csv(rows, out / "bench_results.csv")
        (out / "bench_table.txt").write_text(table + "\n")
    return rows, table


def _fill_relative_gaps(rows: list[BenchRow]) -> list[BenchRow]:
    """For sizes with no exact oracle, gap is relative to the run's best mean."""
    filled = []
    for row in rows:
        if row.gap_basis != "best_method" or not np.isfinite(row.mean_length):
            filled.append(row)
            continue
        peers = [r.mean_length for r in rows
                 if r.n == row.n and np.isfinite(r.mean_length)]
        best = min(peers)
        filled.append(BenchRow(
            method=row.method, n=row.n, mean_length=row.mean_length,
            gap_percent=max(0.0, gap_percent(row.mean_length, best)),
            gap_basis=row.gap_basis,
            mean_time_seconds=row.mean_time_seconds,
            time_breakdown=row.time_breakdown,
            lengths=row.lengths, failures=row.failures,
        ))
    return filled


def _time_text(row: BenchRow) -> str:
    if row.time_breakdown:
        return row.time_breakdown
    return f"{row.mean_time_seconds:.2f}s"


def format_table(rows: list[BenchRow],
                 reference: list[ReferenceRow] | None = None) -> str:
    """Aligned Length / Gap (%) / Time text table, one row per (method, n)."""
    header = ("Method", "n", "Length", "Gap (%)", "Time", "Fail")
    body: list[tuple[str, ...]] = []
    for row in rows:
        gap = "n/a" if row.gap_percent is None else f"{row.gap_percent:.4f}"
        if row.gap_basis == "best_method" and row.gap_percent is not None:
            gap += "*"
        body.append((row.method, str(row.n), f"{row.mean_length:.4f}",
                     gap, _time_text(row), str(row.failures)))
    ref_body: list[tuple[str, ...]] = []
    for ref in reference or []:
        ref_body.append((f"{ref.method} (published)", str(ref.n),
                         f"{ref.length:.4f}", f"{ref.gap_percent:.4f}",
                         ref.time_text, "-"))
    widths = [max(len(col) for col in cols)
              for cols in zip(header, *body, *ref_body)]
    def fmt(cells: tuple[str, ...]) -> str:
        return "  ".join(c.ljust(w) for c, w in zip(cells, widths)).rstrip()
    lines = [fmt(header), fmt(tuple("-" * w for w in widths))]
    lines += [fmt(cells) for cells in body]
    if ref_body:
        lines.append(fmt(tuple("-" * w for w in widths)))
        lines += [fmt(cells) for cells in ref_body]
    if any(row.gap_basis == "best_method" for row in rows):
        lines.append("* relative to the best method in this run (no exact oracle)")
    return "\n".join(lines)


def write_rows_csv(rows: list[BenchRow], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["method", "n", "mean_length", "gap_percent",
                         "gap_basis", "mean_time_seconds", "time_breakdown",
                         "failures", "lengths"])
        for row in rows:
            writer.writerow([
                row.method, row.n, f"{row.mean_length:.9f}",
                "" if row.gap_percent is None else f"{row.gap_percent:.6f}",
                row.gap_basis, f"{row.mean_time_seconds:.4f}",
                row.time_breakdown, row.failures,
                ";".join(f"{l:.9f}" for l in row.lengths),
            ])
