"""Exact references: brute-force tours, Held-Karp DP, exhaustive QUBO scan.

These are the ground truths behind every gap figure and every solver test.
Hot paths (subset DP, Gray-code scan) are JIT-compiled.
"""

from __future__ import annotations

import itertools
import time
from dataclasses import dataclass

import numpy as np
from numba import njit

from .instances import TspInstance
from .qubo import QuboModel, Tour, index_to_bits, qubo_energy

BRUTE_FORCE_MAX_N = 10
HELD_KARP_MAX_N = 20
EXHAUSTIVE_MAX_M = 25


@dataclass(frozen=True)
class OracleResult:
    optimal_length: float
    optimal_tour: Tour
    nodes_explored: int
    wall_time: float


def gap_percent(found: float, optimal: float) -> float:
    """(found - optimal) / optimal in percent."""
    return 100.0 * (found - optimal) / optimal


def brute_force_tsp(instance: TspInstance) -> OracleResult:
    """Enumerate all (n-1)!/2 direction-canonical tours with city 0 fixed.

    Ties go to the lexicographically smallest order among the enumerated
    canonical forms.
    """
    n = instance.n
    if n > BRUTE_FORCE_MAX_N:
        raise ValueError(f"brute force capped at n={BRUTE_FORCE_MAX_N}, got n={n}")
    start = time.perf_counter()
    if n == 2:
        tour = Tour.from_order(instance, (0, 1))
        return OracleResult(tour.length, tour, 1, time.perf_counter() - start)
    perms = np.array(list(itertools.permutations(range(1, n))), dtype=np.int64)
    canonical = perms[perms[:, 0] < perms[:, -1]]
    dist = instance.dist
    lengths = dist[0, canonical[:, 0]] + dist[canonical[:, -1], 0]
    for k in range(n - 2):
        lengths = lengths + dist[canonical[:, k], canonical[:, k + 1]]
    best = int(np.argmin(lengths))  # argmin keeps the first (lex-smallest) tie
    order = (0,) + tuple(int(c) for c in canonical[best])
    tour = Tour.from_order(instance, order)
    return OracleResult(tour.length, tour, len(canonical), time.perf_counter() - start)


@njit(cache=True)
def _held_karp_kernel(dist):
    n = dist.shape[0]
    r = n - 1  # cities 1..n-1 mapped to bits 0..r-1
    full = 1 << r
    inf = 1e300
    dp = np.full((full, r), inf)
    parent = np.full((full, r), -1, dtype=np.int8)
    for k in range(r):
        dp[1 << k, k] = dist[0, k + 1]
    for mask in range(1, full):
        for last in range(r):
            if not (mask >> last) & 1:
                continue
            cur = dp[mask, last]
            if cur >= inf:
                continue
            for nxt in range(r):
                if (mask >> nxt) & 1:
                    continue
                cand = cur + dist[last + 1, nxt + 1]
                nm = mask | (1 << nxt)
                if cand < dp[nm, nxt]:
                    dp[nm, nxt] = cand
                    parent[nm, nxt] = last
    best = inf
    best_last = -1
    fm = full - 1
    for last in range(r):
        cand = dp[fm, last] + dist[last + 1, 0]
        if cand < best:
            best = cand
            best_last = last
    return best, best_last, parent


def held_karp(instance: TspInstance) -> OracleResult:
    """Exact optimum by subset DP over cities 1..n-1 with city 0 as anchor."""
    n = instance.n
    if n > HELD_KARP_MAX_N:
        raise ValueError(f"held_karp capped at n={HELD_KARP_MAX_N}, got n={n}")
    start = time.perf_counter()
    if n == 2:
        tour = Tour.from_order(instance, (0, 1))
        return OracleResult(tour.length, tour, 2, time.perf_counter() - start)
    best, best_last, parent = _held_karp_kernel(instance.dist)
    # walk the parent chain back from the full subset
    order_rev = []
    mask = (1 << (n - 1)) - 1
    last = int(best_last)
    while last >= 0:
        order_rev.append(last + 1)
        prev = int(parent[mask, last])
        mask ^= 1 << last
        last = prev
    order = [0] + order_rev[::-1]
    if n > 2 and order[1] > order[-1]:  # canonical direction
        order = [0] + order[:0:-1]
    tour = Tour.from_order(instance, order)
    nodes = (1 << (n - 1)) * (n - 1)
    return OracleResult(tour.length, tour, nodes, time.perf_counter() - start)


@njit(cache=True)
def _gray_scan_kernel(Q, offset, checkpoint_every, max_checkpoints):
    """Visit all 2^m assignments in Gray-code order with O(m) energy updates.

    Returns the minimizing basis index (big-endian bit convention, ties to
    the lowest index) and optional (index, energy) checkpoints for
    validating the incremental arithmetic.
    """
    m = Q.shape[0]
    total = 1 << m
    x = np.zeros(m)
    g = np.zeros(m)  # g = Q @ x, maintained incrementally
    energy = offset
    best_energy = energy
    best_index = 0
    index = 0
    cp_indices = np.empty(max_checkpoints, dtype=np.int64)
    cp_energies = np.empty(max_checkpoints)
    cp_count = 0
    for step in range(1, total):
        s = step
        i = 0
        while s & 1 == 0:
            s >>= 1
            i += 1
        delta = 1.0 - 2.0 * x[i]
        energy += delta * (2.0 * g[i] - 2.0 * Q[i, i] * x[i] + Q[i, i])
        x[i] += delta
        for j in range(m):
            g[j] += delta * Q[i, j]
        index ^= 1 << (m - 1 - i)
        if energy < best_energy or (energy == best_energy and index < best_index):
            best_energy = energy
            best_index = index
        if checkpoint_every > 0 and step % checkpoint_every == 0 and cp_count < max_checkpoints:
            cp_indices[cp_count] = index
            cp_energies[cp_count] = energy
            cp_count += 1
    return best_index, cp_indices[:cp_count], cp_energies[:cp_count]


def exhaustive_qubo_min(model: QuboModel) -> tuple[np.ndarray, float]:
    """Global QUBO minimizer over all 2^m assignments (ties: lowest basis index)."""
    m = model.m
    if m > EXHAUSTIVE_MAX_M:
        raise ValueError(f"exhaustive scan capped at m={EXHAUSTIVE_MAX_M}, got m={m}")
    best_index, _, _ = _gray_scan_kernel(model.Q, model.offset, 0, 0)
    bits = index_to_bits(int(best_index), m).astype(np.int8)
    return bits, qubo_energy(model, bits)


def gray_code_checkpoints(model: QuboModel, every: int, max_checkpoints: int = 1000
                          ) -> tuple[np.ndarray, np.ndarray]:
    """Sampled (basis index, incremental energy) pairs from the Gray-code scan.

    Self-check utility: each energy should match a fresh qubo_energy
    evaluation of the corresponding assignment.
    """
    if model.m > EXHAUSTIVE_MAX_M:
        raise ValueError(f"exhaustive scan capped at m={EXHAUSTIVE_MAX_M}")
    if every <= 0:
        raise ValueError("checkpoint period must be positive")
    _, indices, energies = _gray_scan_kernel(model.Q, model.offset, every, max_checkpoints)
    return indices, energies
