"""Heatmap-guided tour construction and improvement.

Construction walks city to city, sampling each successor from the top
candidates under the blended score L[u, v] = H[u, v] + lam * exp(-D/tau_d).
Improvement runs chains of first-improvement 2-opt exchanges whose
reconnection targets come from the same candidate ranking, so hot edges in
the heatmap are tried first.  Restarts with independent random streams make
the whole search deterministic for a fixed seed.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .heatmap import Heatmap
from .instances import TspInstance
from .qubo import Tour

WEIGHT_FLOOR = 1e-9
GAIN_EPS = 1e-12


@dataclass(frozen=True)
class SearchParams:
    """Hyperparameters: k_max edge removals per attempt, m_top candidates,
    t_attempts tries per improvement pass, restart and time budgets."""

    k_max: int = 10
    m_top: int = 5
    t_attempts: int = 50
    max_restarts: int = 20
    time_budget: float | None = None
    seed: int = 0
    lam: float = 0.1

    def __post_init__(self) -> None:
        for name in ("k_max", "m_top", "t_attempts", "max_restarts"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.time_budget is not None and self.time_budget <= 0:
            raise ValueError(f"time_budget must be positive, got {self.time_budget}")
        if self.lam < 0:
            raise ValueError(f"lam must be nonnegative, got {self.lam}")


@dataclass(frozen=True)
class NoImprovement:
    """Returned when an improvement pass exhausts its attempts."""

    attempts: int


@dataclass(frozen=True)
class SearchResult:
    best_tour: Tour
    restarts_used: int
    attempts_used: int
    improvement_trace: tuple[tuple[float, float], ...]


def _score_matrix(instance: TspInstance, heatmap: Heatmap, lam: float) -> np.ndarray:
    """L[u, v] = heat + lam * proximity, with the diagonal suppressed."""
    tau_d = instance.mean_distance()
    L = heatmap.H + lam * np.exp(-instance.dist / tau_d)
    np.fill_diagonal(L, -np.inf)
    return L


def candidate_scores(instance: TspInstance, heatmap: Heatmap, params: SearchParams,
                     current: int, visited: set[int]
                     ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Rank unvisited successors of `current` by blended heat/proximity score.

    Returns (cities, scores, weights): cities sorted by descending score
    (ties by city index), truncated to m_top; weights are the sampling
    distribution, scores floored at 1e-9 and normalized.
    """
    n = instance.n
    pool = np.array([v for v in range(n) if v != current and v not in visited],
                    dtype=np.int64)
    if pool.size == 0:
        raise ValueError("all cities are already visited")
    L = _score_matrix(instance, heatmap, params.lam)
    scores = L[current, pool]
    order = np.lexsort((pool, -scores))[: params.m_top]
    cities = pool[order]
    scores = scores[order]
    weights = np.maximum(scores, WEIGHT_FLOOR)
    weights = weights / weights.sum()
    return cities, scores, weights


def _construct(instance: TspInstance, cand_sorted: np.ndarray, L: np.ndarray,
               params: SearchParams, rng: np.random.Generator) -> np.ndarray:
    """Heat-guided closed-tour construction from a random start city."""
    n = instance.n
    start = int(rng.integers(0, n))
    order = np.empty(n, dtype=np.int64)
    order[0] = start
    visited = np.zeros(n, dtype=np.bool_)
    visited[start] = True
    current = start
    for step in range(1, n):
        row = cand_sorted[current]
        picked = row[~visited[row]][: params.m_top]
        scores = L[current, picked]
        weights = np.maximum(scores, WEIGHT_FLOOR)
        weights = weights / weights.sum()
        if picked.size == 1:
            nxt = int(picked[0])
        else:
            nxt = int(rng.choice(picked, p=weights))
        order[step] = nxt
        visited[nxt] = True
        current = nxt
    return order


def _two_opt_chain(instance: TspInstance, cand_top: np.ndarray, order: np.ndarray,
                   pos: np.ndarray, length: float, params: SearchParams,
                   rng: np.random.Generator) -> float | None:
    """One attempt: a chain of up to k_max first-improvement 2-opt exchanges.

    Mutates order/pos in place; returns the new length, or None if the very
    first exchange could not be found (the tour is unchanged then).
    """
    n = instance.n
    dist = instance.dist
    a = int(rng.integers(0, n))
    total_gain = 0.0
    for _ in range(params.k_max):
        best_move = None
        pa = order[(pos[a] - 1) % n]
        sa = order[(pos[a] + 1) % n]
        for v in cand_top[a]:
            if v == a or v == sa or v == pa:
                continue
            sv = order[(pos[v] + 1) % n]
            gain = dist[a, sa] + dist[v, sv] - dist[a, v] - dist[sa, sv]
            if gain > GAIN_EPS:
                best_move = ("succ", int(v), gain)
                break
            pv = order[(pos[v] - 1) % n]
            gain = dist[pa, a] + dist[pv, v] - dist[pa, pv] - dist[a, v]
            if gain > GAIN_EPS:
                best_move = ("pred", int(v), gain)
                break
        if best_move is None:
            break
        kind, v, gain = best_move
        if kind == "succ":
            i, j = sorted((pos[a], pos[v]))
        else:
            i, j = sorted(((pos[a] - 1) % n, (pos[v] - 1) % n))
        seg = order[i + 1 : j + 1][::-1].copy()
        order[i + 1 : j + 1] = seg
        pos[seg] = np.arange(i + 1, j + 1)
        total_gain += gain
        a = v
    if total_gain <= 0.0:
        return None
    return length - total_gain


def expand_tour(instance: TspInstance, heatmap: Heatmap, params: SearchParams,
                rng: np.random.Generator, incumbent: Tour | None = None
                ) -> Tour | NoImprovement:
    """Construct a fresh tour, or improve the incumbent.

    Without an incumbent, builds a closed tour by heat-guided successive
    selection (always succeeds).  With one, makes up to t_attempts tries,
    each a chain of at most k_max strictly-improving 2-opt exchanges seeded
    at a random city; returns the first strictly shorter tour found, or
    NoImprovement.
    """
    L = _score_matrix(instance, heatmap, params.lam)
    cand_sorted = np.argsort(-L, axis=1, kind="stable")[:, : instance.n - 1]
    if incumbent is None:
        order = _construct(instance, cand_sorted, L, params, rng)
        return Tour.from_order(instance, order)

    cand_top = cand_sorted[:, : params.m_top]
    for attempt in range(params.t_attempts):
        order = np.array(incumbent.order, dtype=np.int64)
        pos = np.empty(instance.n, dtype=np.int64)
        pos[order] = np.arange(instance.n)
        new_len = _two_opt_chain(instance, cand_top, order, pos,
                                 incumbent.length, params, rng)
        if new_len is not None:
            return Tour.from_order(instance, order)
    return NoImprovement(attempts=params.t_attempts)


def guided_search(instance: TspInstance, heatmap: Heatmap,
                  params: SearchParams) -> SearchResult:
    """Restarted construct-then-improve loop; deterministic without a time budget."""
    if params.m_top > instance.n - 1:
        raise ValueError(
            f"m_top must be <= n - 1 = {instance.n - 1}, got {params.m_top}")
    if heatmap.n != instance.n:
        raise ValueError(
            f"heatmap is {heatmap.n}x{heatmap.n} but the instance has n = {instance.n}")
    start = time.perf_counter()
    streams = [np.random.default_rng(s)
               for s in np.random.SeedSequence(params.seed).spawn(params.max_restarts)]
    best: Tour | None = None
    trace: list[tuple[float, float]] = []
    attempts_used = 0
    restarts_used = 0
    for restart in range(params.max_restarts):
        # The budget is only checked between restarts so the result always
        # carries at least one completed tour.
        if restart > 0 and params.time_budget is not None and \
                time.perf_counter() - start > params.time_budget:
            break
        restarts_used += 1
        rng = streams[restart]
        tour = expand_tour(instance, heatmap, params, rng)
        while True:
            result = expand_tour(instance, heatmap, params, rng, incumbent=tour)
            if isinstance(result, NoImprovement):
                attempts_used += result.attempts
                break
            attempts_used += 1
            tour = result
        if best is None or tour.length < best.length - GAIN_EPS:
            best = tour
            trace.append((time.perf_counter() - start, tour.length))
    return SearchResult(
        best_tour=best,
        restarts_used=restarts_used,
        attempts_used=attempts_used,
        improvement_trace=tuple(trace),
    )
