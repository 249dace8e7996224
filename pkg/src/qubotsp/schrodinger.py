"""Exact state-vector annealing for small QUBO models.

Integrates i d|psi>/dt = [A(t) * H_kin + B(t) * H_pot] |psi> with hbar = 1,
where H_kin = -sum_q sigma_x^(q) and H_pot is diagonal in the computational
basis with entries equal to the QUBO energies.  The stepper is a Strang
splitting: half a diagonal phase, one transverse-field rotation per qubit,
half a diagonal phase, all exactly unitary, so the norm is conserved to
rounding error.  Memory is the binding constraint: 2^m complex amplitudes,
hence the hard cap m <= 16.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from numba import njit

from .qubo import QuboModel, index_to_bits

MAX_SPINS = 16
MIN_STEPS = 10


def _linear_a(t: float, t_final: float) -> float:
    return 1.0 - t / t_final


def _linear_b(t: float, t_final: float) -> float:
    return t / t_final


@dataclass(frozen=True)
class AnnealSchedule:
    """Interpolation coefficients A(t), B(t) over [0, t_final].

    Defaults to the linear ramp A = 1 - t/t_f, B = t/t_f.  Custom schedule
    functions must map [0, t_final] into [0, 1] with A nonincreasing and B
    nondecreasing; this is spot-checked on a coarse grid at construction.
    """

    t_final: float
    steps: int
    a_of_t: Callable[[float], float] | None = None
    b_of_t: Callable[[float], float] | None = None

    def __post_init__(self) -> None:
        if self.t_final <= 0:
            raise ValueError(f"t_final must be positive, got {self.t_final}")
        if self.steps < 1:
            raise ValueError(f"steps must be >= 1, got {self.steps}")
        grid = np.linspace(0.0, self.t_final, 33)
        a = np.array([self.a(t) for t in grid])
        b = np.array([self.b(t) for t in grid])
        tol = 1e-9
        if (a < -tol).any() or (a > 1 + tol).any() or (b < -tol).any() or (b > 1 + tol).any():
            raise ValueError("schedule functions must stay within [0, 1]")
        if (np.diff(a) > tol).any():
            raise ValueError("A(t) must be nonincreasing")
        if (np.diff(b) < -tol).any():
            raise ValueError("B(t) must be nondecreasing")

    def a(self, t: float) -> float:
        if self.a_of_t is None:
            return _linear_a(t, self.t_final)
        return self.a_of_t(t)

    def b(self, t: float) -> float:
        if self.b_of_t is None:
            return _linear_b(t, self.t_final)
        return self.b_of_t(t)


@dataclass(frozen=True)
class StateVector:
    """2^m complex amplitudes in the computational basis, big-endian bits."""

    amplitudes: np.ndarray
    m: int

    def norm_squared(self) -> float:
        return float(np.vdot(self.amplitudes, self.amplitudes).real)

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2


@dataclass(frozen=True)
class EvolutionTrace:
    """Per-step observables, sampled at t = 0 and after every step."""

    times: np.ndarray
    a_values: np.ndarray
    b_values: np.ndarray
    ground_probability: np.ndarray
    energy_expectation: np.ndarray
    norms: np.ndarray


def build_potential(model: QuboModel) -> np.ndarray:
    """Diagonal of H_pot: entry b is the QUBO energy of basis state b."""
    m = model.m
    if m > MAX_SPINS:
        raise ValueError(
            f"state-vector simulation capped at m = {MAX_SPINS} "
            f"(2^{MAX_SPINS} amplitudes); got m = {m}")
    idx = np.arange(1 << m, dtype=np.int64)
    shifts = m - 1 - np.arange(m)
    X = ((idx[:, None] >> shifts[None, :]) & 1).astype(np.float64)
    return model.offset + np.einsum("ki,kj,ij->k", X, X, model.Q)


@njit(cache=True)
def _evolve_kernel(psi, V, ground_mask, a_mid, b_mid, a_at, b_at, dt, m):
    steps = a_mid.shape[0]
    size = psi.shape[0]
    gp = np.empty(steps + 1)
    ee = np.empty(steps + 1)
    norms = np.empty(steps + 1)

    for k in range(steps + 1):
        if k > 0:
            a = a_mid[k - 1]
            b = b_mid[k - 1]
            # half potential phase
            for idx in range(size):
                theta = b * V[idx] * dt * 0.5
                psi[idx] = psi[idx] * complex(np.cos(theta), -np.sin(theta))
            # kinetic rotation exp(i * a * dt * sigma_x) per qubit
            c = np.cos(a * dt)
            s = np.sin(a * dt)
            for q in range(m):
                stride = 1 << (m - 1 - q)
                step2 = stride * 2
                for base in range(0, size, step2):
                    for off in range(stride):
                        i = base + off
                        j = i + stride
                        pi = psi[i]
                        pj = psi[j]
                        psi[i] = c * pi + complex(0.0, s) * pj
                        psi[j] = c * pj + complex(0.0, s) * pi
            # second half potential phase
            for idx in range(size):
                theta = b * V[idx] * dt * 0.5
                psi[idx] = psi[idx] * complex(np.cos(theta), -np.sin(theta))
        g = 0.0
        e = 0.0
        nrm = 0.0
        for idx in range(size):
            p = psi[idx].real * psi[idx].real + psi[idx].imag * psi[idx].imag
            nrm += p
            e += p * V[idx]
            if ground_mask[idx]:
                g += p
        gp[k] = g
        ee[k] = e
        norms[k] = nrm
    return gp, ee, norms


def evolve(model: QuboModel, schedule: AnnealSchedule) -> tuple[StateVector, EvolutionTrace]:
    """Anneal from the uniform superposition under the given schedule.

    Returns the final state and a trace of ground-subspace probability,
    energy expectation and norm at every step.  The ground subspace is all
    basis states within 1e-9 of the minimum potential entry.
    """
    m = model.m
    if m > MAX_SPINS:
        raise ValueError(
            f"state-vector simulation capped at m = {MAX_SPINS}, got m = {m}")
    if schedule.steps < MIN_STEPS:
        raise ValueError(
            f"need at least {MIN_STEPS} steps for a meaningful integration, "
            f"got {schedule.steps}")
    V = build_potential(model)
    ground_mask = V <= V.min() + 1e-9
    steps = schedule.steps
    dt = schedule.t_final / steps
    times = np.linspace(0.0, schedule.t_final, steps + 1)
    mids = times[:-1] + dt / 2.0
    a_mid = np.array([schedule.a(t) for t in mids])
    b_mid = np.array([schedule.b(t) for t in mids])
    a_at = np.array([schedule.a(t) for t in times])
    b_at = np.array([schedule.b(t) for t in times])

    size = 1 << m
    psi = np.full(size, 1.0 / np.sqrt(size), dtype=np.complex128)
    gp, ee, norms = _evolve_kernel(psi, V, ground_mask, a_mid, b_mid, a_at, b_at, dt, m)
    trace = EvolutionTrace(
        times=times,
        a_values=a_at,
        b_values=b_at,
        ground_probability=gp,
        energy_expectation=ee,
        norms=norms,
    )
    return StateVector(amplitudes=psi, m=m), trace


def sample_assignment(state: StateVector, seed: int) -> np.ndarray:
    """Draw one basis state with probability |amplitude|^2; return its bits."""
    norm = state.norm_squared()
    if abs(norm - 1.0) > 1e-3:
        raise ValueError(f"state norm deviates from 1 by {abs(norm - 1.0):.2e}")
    p = state.probabilities()
    p = p / p.sum()
    rng = np.random.default_rng(seed)
    idx = int(rng.choice(p.shape[0], p=p))
    return index_to_bits(idx, state.m)
