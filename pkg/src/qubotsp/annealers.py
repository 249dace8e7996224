"""Monte Carlo QUBO minimizers: simulated annealing and its transverse-field
surrogate, simulated quantum annealing over coupled Trotter replicas.

Both use single-bit/spin Metropolis dynamics with incremental local fields,
so a proposal costs O(1) and an accepted flip costs O(row nonzeros).  The
TSP QUBO rows are sparse (~4n of n^2 entries), which the kernels exploit
through a compressed-row layout.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np
from numba import njit

from .qubo import QuboModel, qubo_energy, to_ising

# Replica coupling grows without bound as the transverse field vanishes
# (-log tanh blows up); it is clamped at J_PERP_MAX_FACTOR * P * T, which
# caps the Metropolis exponent near 100 and freezes replicas together
# without producing inf * 0 = nan.
J_PERP_MAX_FACTOR = 25.0


@dataclass(frozen=True)
class SaSchedule:
    """Temperature schedule for classical annealing, in energy units."""

    t_initial: float
    t_final: float
    sweeps: int
    cooling: str = "geometric"

    def __post_init__(self) -> None:
        if not self.t_initial >= self.t_final > 0:
            raise ValueError(
                f"need t_initial >= t_final > 0, got {self.t_initial}, {self.t_final}")
        if self.sweeps < 1:
            raise ValueError(f"sweeps must be >= 1, got {self.sweeps}")
        if self.cooling not in ("geometric", "linear"):
            raise ValueError(f"unknown cooling {self.cooling!r}")

    def temperatures(self) -> np.ndarray:
        if self.sweeps == 1:
            return np.array([self.t_initial])
        if self.cooling == "geometric":
            return np.geomspace(self.t_initial, self.t_final, self.sweeps)
        return np.linspace(self.t_initial, self.t_final, self.sweeps)


@dataclass(frozen=True)
class SqaSchedule:
    """Transverse-field schedule: gamma falls linearly at fixed temperature."""

    replicas: int
    gamma_initial: float
    gamma_final: float
    temperature: float
    sweeps: int

    def __post_init__(self) -> None:
        if self.replicas < 2:
            raise ValueError(f"need at least 2 replicas, got {self.replicas}")
        if not self.gamma_initial > self.gamma_final > 0:
            raise ValueError(
                f"need gamma_initial > gamma_final > 0, got "
                f"{self.gamma_initial}, {self.gamma_final}")
        if self.temperature <= 0:
            raise ValueError(f"temperature must be positive, got {self.temperature}")
        if self.sweeps < 1:
            raise ValueError(f"sweeps must be >= 1, got {self.sweeps}")

    def gammas(self) -> np.ndarray:
        if self.sweeps == 1:
            return np.array([self.gamma_initial])
        return np.linspace(self.gamma_initial, self.gamma_final, self.sweeps)


@dataclass(frozen=True)
class SolveResult:
    """Best assignment found, with the per-sweep best-so-far energy trace."""

    best_assignment: np.ndarray
    best_energy: float
    energy_trace: np.ndarray
    wall_time: float
    seed: int
    accepted: int = 0
    proposed: int = 0


def _dense_to_rows(M: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Compressed-row arrays (indptr, cols, vals) of the nonzero entries."""
    m = M.shape[0]
    indptr = np.zeros(m + 1, dtype=np.int64)
    cols_list = []
    vals_list = []
    for i in range(m):
        nz = np.nonzero(M[i])[0]
        cols_list.append(nz.astype(np.int64))
        vals_list.append(M[i, nz])
        indptr[i + 1] = indptr[i] + nz.shape[0]
    cols = np.concatenate(cols_list) if cols_list else np.zeros(0, dtype=np.int64)
    vals = np.concatenate(vals_list) if vals_list else np.zeros(0)
    return indptr, cols, vals


@njit(cache=True)
def _sa_kernel(indptr, cols, vals, diag, offset, temps, m, seed):
    np.random.seed(seed)
    sweeps = temps.shape[0]
    x = np.zeros(m)
    for i in range(m):
        if np.random.random() < 0.5:
            x[i] = 1.0
    g = np.zeros(m)  # g = Q @ x, updated on every accepted flip
    for i in range(m):
        if x[i] == 1.0:
            for k in range(indptr[i], indptr[i + 1]):
                g[cols[k]] += vals[k]
    energy = offset
    for i in range(m):
        energy += x[i] * g[i]
    best_energy = energy
    best_x = x.copy()
    trace = np.empty(sweeps)
    accepted = 0
    for sw in range(sweeps):
        t = temps[sw]
        for _ in range(m):
            i = np.random.randint(0, m)
            delta = 1.0 - 2.0 * x[i]
            d_e = delta * (2.0 * g[i] - 2.0 * diag[i] * x[i] + diag[i])
            if d_e <= 0.0 or np.random.random() < np.exp(-d_e / t):
                x[i] += delta
                energy += d_e
                for k in range(indptr[i], indptr[i + 1]):
                    g[cols[k]] += delta * vals[k]
                accepted += 1
                if energy < best_energy:
                    best_energy = energy
                    for j in range(m):
                        best_x[j] = x[j]
        trace[sw] = best_energy
    return best_x, trace, accepted


def simulated_annealing(model: QuboModel, schedule: SaSchedule, seed: int) -> SolveResult:
    """Metropolis single-bit-flip annealing; m proposals per sweep.

    Deterministic given the seed; returns the best assignment ever visited.
    """
    start = time.perf_counter()
    m = model.m
    indptr, cols, vals = _dense_to_rows(model.Q)
    diag = np.ascontiguousarray(np.diag(model.Q))
    temps = schedule.temperatures()
    best_x, trace, accepted = _sa_kernel(
        indptr, cols, vals, diag, model.offset, temps, m, seed)
    bits = best_x.astype(np.int8)
    return SolveResult(
        best_assignment=bits,
        best_energy=qubo_energy(model, bits),
        energy_trace=trace,
        wall_time=time.perf_counter() - start,
        seed=seed,
        accepted=int(accepted),
        proposed=schedule.sweeps * m,
    )


@njit(cache=True)
def _sqa_kernel(indptr, cols, vals, h, offset, gammas, replicas, temperature, m, seed,
                jperp_max):
    np.random.seed(seed)
    sweeps = gammas.shape[0]
    p_t = replicas * temperature
    s = np.empty((replicas, m))
    for p in range(replicas):
        for i in range(m):
            s[p, i] = 1.0 if np.random.random() < 0.5 else -1.0
    # local fields f[p, i] = h[i] + sum_j Jsym[i, j] s[p, j]
    f = np.empty((replicas, m))
    for p in range(replicas):
        for i in range(m):
            acc = h[i]
            for k in range(indptr[i], indptr[i + 1]):
                acc += vals[k] * s[p, cols[k]]
            f[p, i] = acc
    # intra-replica energies E_p = offset - 0.5 * sum_i s_i (h_i + f_i)
    energies = np.empty(replicas)
    for p in range(replicas):
        acc = 0.0
        for i in range(m):
            acc += s[p, i] * (h[i] + f[p, i])
        energies[p] = offset - 0.5 * acc
    best_energy = 1e300
    best_s = s[0].copy()
    trace = np.empty(sweeps)
    accepted = 0
    for sw in range(sweeps):
        th = np.tanh(gammas[sw] / p_t)
        if th <= 0.0 or not np.isfinite(th):
            jperp = jperp_max
        else:
            jperp = -0.5 * p_t * np.log(th)
            if jperp > jperp_max:
                jperp = jperp_max
        for p in range(replicas):
            up = p + 1 if p + 1 < replicas else 0
            dn = p - 1 if p >= 1 else replicas - 1
            for i in range(m):
                si = s[p, i]
                d_prob = 2.0 * si * f[p, i]
                d_coup = 2.0 * jperp * si * (s[up, i] + s[dn, i])
                d_exp = (d_prob + d_coup) / p_t
                if d_exp <= 0.0 or np.random.random() < np.exp(-d_exp):
                    s[p, i] = -si
                    energies[p] += d_prob
                    delta = -2.0 * si
                    for k in range(indptr[i], indptr[i + 1]):
                        f[p, cols[k]] += delta * vals[k]
                    accepted += 1
        # best single replica this sweep; recompute exactly before recording
        pbest = 0
        ebest = energies[0]
        for p in range(1, replicas):
            if energies[p] < ebest:
                ebest = energies[p]
                pbest = p
        if ebest < best_energy:
            acc = 0.0
            for i in range(m):
                fi = h[i]
                for k in range(indptr[i], indptr[i + 1]):
                    fi += vals[k] * s[pbest, cols[k]]
                acc += s[pbest, i] * (h[i] + fi)
            exact = offset - 0.5 * acc
            energies[pbest] = exact
            if exact < best_energy:
                best_energy = exact
                for i in range(m):
                    best_s[i] = s[pbest, i]
        trace[sw] = best_energy
    return best_s, trace, accepted


def simulated_quantum_annealing(model: QuboModel, schedule: SqaSchedule,
                                seed: int) -> SolveResult:
    """Path-integral Monte Carlo on the Ising form of the model.

    P replicas of the spin system evolve under Metropolis dynamics with a
    ferromagnetic inter-replica coupling J_perp(gamma) =
    -(P*T/2) * ln tanh(gamma / (P*T)), periodic in the replica index.  The
    transverse field gamma falls linearly over the sweeps while the
    temperature stays fixed; the best single-replica assignment seen is
    returned, mapped back to binary.
    """
    start = time.perf_counter()
    ising = to_ising(model)
    j_sym = ising.J + ising.J.T
    indptr, cols, vals = _dense_to_rows(j_sym)
    gammas = schedule.gammas()
    jperp_max = J_PERP_MAX_FACTOR * schedule.replicas * schedule.temperature
    best_s, trace, accepted = _sqa_kernel(
        indptr, cols, vals, ising.h, ising.offset, gammas,
        schedule.replicas, schedule.temperature, model.m, seed, jperp_max)
    bits = ((best_s + 1.0) / 2.0).astype(np.int8)
    return SolveResult(
        best_assignment=bits,
        best_energy=qubo_energy(model, bits),
        energy_trace=trace,
        wall_time=time.perf_counter() - start,
        seed=seed,
        accepted=int(accepted),
        proposed=schedule.sweeps * schedule.replicas * model.m,
    )
