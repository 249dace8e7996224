"""QUBO and Ising formulations of the TSP.

The encoding uses n^2 binary variables x[u, j] = 1 iff city ``u`` sits at
tour position ``j``, flattened to index ``i = u*n + j``.  Energies follow
the full-symmetric-matrix convention

    energy(x) = offset + sum_{i,j} Q[i, j] * x_i * x_j,

so a cross coupling ``c * x_a * x_b`` is stored as ``Q[a, b] = Q[b, a] = c/2``
and linear terms fold into the diagonal via x^2 = x.

The model energy decomposes as ``A * F(x) + C(x)``: F sums the two
uniqueness penalties (one city per position, one position per city) plus a
count of forbidden consecutive transitions, and C is the cyclic tour cost.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .instances import TspInstance


def index_to_bits(index: int, m: int) -> np.ndarray:
    """Bit vector for a basis index, big-endian: x_0 is the most significant bit."""
    if not 0 <= index < 2 ** m:
        raise ValueError(f"index {index} out of range for m={m}")
    return (index >> (m - 1 - np.arange(m))) & 1


def bits_to_index(bits: np.ndarray) -> int:
    """Inverse of index_to_bits."""
    bits = np.asarray(bits)
    m = bits.shape[0]
    return int((bits.astype(np.int64) << (m - 1 - np.arange(m))).sum())


def _check_assignment(x, m: int) -> np.ndarray:
    x = np.asarray(x)
    if x.shape != (m,):
        raise ValueError(f"assignment must have length {m}, got shape {x.shape}")
    if not np.isin(x, (0, 1)).all():
        raise ValueError("assignment entries must be 0 or 1")
    return x.astype(np.float64)


@dataclass(frozen=True)
class QuboModel:
    """Symmetric QUBO with a constant offset: energy = offset + x^T Q x.

    Models built from a TSP instance carry n and index variables as
    (city, position) pairs with m = n^2; standalone models (arbitrary
    symmetric Q) leave n unset.
    """

    Q: np.ndarray
    offset: float = 0.0
    n: int | None = None
    penalty_a: float = 1.0

    def __post_init__(self) -> None:
        if self.penalty_a <= 0:
            raise ValueError(f"penalty_a must be positive, got {self.penalty_a}")
        Q = np.asarray(self.Q, dtype=np.float64)
        if Q.ndim != 2 or Q.shape[0] != Q.shape[1] or Q.shape[0] < 1:
            raise ValueError(f"Q must be square and nonempty, got shape {Q.shape}")
        if self.n is not None and Q.shape[0] != self.n * self.n:
            raise ValueError(
                f"TSP model needs Q of size {self.n * self.n}, got {Q.shape[0]}")
        if np.max(np.abs(Q - Q.T)) > 1e-12:
            raise ValueError("Q must be symmetric within 1e-12")
        object.__setattr__(self, "Q", Q)

    @property
    def m(self) -> int:
        return self.Q.shape[0]

    def var_index(self, city: int, position: int) -> int:
        if self.n is None:
            raise ValueError("not a TSP-encoded model: no (city, position) indexing")
        return city * self.n + position

    def var_city_pos(self, index: int) -> tuple[int, int]:
        if self.n is None:
            raise ValueError("not a TSP-encoded model: no (city, position) indexing")
        return divmod(index, self.n)


@dataclass(frozen=True)
class IsingModel:
    """Spin model with energy offset - sum h_i s_i - sum_{i<j} J_ij s_i s_j."""

    h: np.ndarray
    J: np.ndarray
    offset: float

    def __post_init__(self) -> None:
        h = np.asarray(self.h, dtype=np.float64)
        J = np.asarray(self.J, dtype=np.float64)
        m = h.shape[0]
        if J.shape != (m, m):
            raise ValueError(f"J must be {m}x{m}, got {J.shape}")
        if np.any(np.tril(J) != 0.0):
            raise ValueError("J must be strictly upper-triangular")
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "J", J)

    @property
    def m(self) -> int:
        return self.h.shape[0]


@dataclass(frozen=True)
class Tour:
    """A closed tour: a permutation of cities plus its cached cyclic length."""

    order: tuple[int, ...]
    length: float

    @classmethod
    def from_order(cls, instance: TspInstance, order) -> "Tour":
        order = tuple(int(c) for c in order)
        if sorted(order) != list(range(instance.n)):
            raise ValueError(f"order {order} is not a permutation of 0..{instance.n - 1}")
        idx = np.asarray(order)
        length = float(instance.dist[idx, np.roll(idx, -1)].sum())
        return cls(order=order, length=length)

    @property
    def n(self) -> int:
        return len(self.order)


@dataclass(frozen=True)
class InvalidEncoding:
    """Report of which uniqueness constraints an assignment violates."""

    bad_cities: tuple[int, ...]
    bad_positions: tuple[int, ...]


def default_penalty(instance: TspInstance) -> float:
    """A = n * max(D) + 1: exceeds any tour cost, so violations never pay off."""
    return float(instance.n * instance.max_distance() + 1.0)


def _transition_weights(instance: TspInstance, non_edge_weight: float = 0.0) -> np.ndarray:
    """n x n ordered-pair weight matrix for cyclic successor products."""
    W = instance.dist.copy()
    for u, v in instance.non_edges:
        W[u, v] = non_edge_weight
        W[v, u] = non_edge_weight
    np.fill_diagonal(W, 0.0)
    return W


def build_tsp_qubo(instance: TspInstance, penalty_a: float | None = None,
                   con_weight: float | None = None) -> QuboModel:
    """Build the TSP QUBO with energy A*F(x) + C(x).

    ``penalty_a`` defaults to default_penalty(instance).  ``con_weight`` is
    the multiplier on the forbidden-transition count; it defaults to
    ``penalty_a`` (the count is part of the constraint function F), but can
    be set independently.
    """
    if penalty_a is None:
        penalty_a = default_penalty(instance)
    if penalty_a <= 0:
        raise ValueError(f"penalty_a must be positive, got {penalty_a}")
    if con_weight is None:
        con_weight = penalty_a
    n = instance.n
    m = n * n
    a = float(penalty_a)

    Q = np.zeros((m, m))
    Qv = Q.reshape(n, n, n, n)  # axes: city u, position j, city v, position k

    # (sum_j x[u,j] - 1)^2 per city and (sum_u x[u,j] - 1)^2 per position:
    # quadratic cross terms couple same-city and same-position pairs, linear
    # terms fold into the diagonal, constants go to the offset.
    pair_block = a * (np.ones((n, n)) - np.eye(n))
    for u in range(n):
        Qv[u, :, u, :] += pair_block
    for j in range(n):
        Qv[:, j, :, j] += pair_block
    Q[np.arange(m), np.arange(m)] -= 2.0 * a
    offset = 2.0 * a * n

    # Cyclic successor products: ordered pair (u, v) at positions (j, j+1)
    # carries D[u, v] on usable edges and con_weight on forbidden pairs.
    trans = _transition_weights(instance, non_edge_weight=con_weight)
    for j in range(n):
        k = (j + 1) % n
        Qv[:, j, :, k] += trans / 2.0
        Qv[:, k, :, j] += trans.T / 2.0

    return QuboModel(n=n, Q=Q, offset=float(offset), penalty_a=a)


def qubo_energy(model: QuboModel, x) -> float:
    """offset + x^T Q x over the full symmetric matrix."""
    x = _check_assignment(x, model.m)
    return float(model.offset + x @ model.Q @ x)


def encode_tour(instance: TspInstance, tour) -> np.ndarray:
    """Binary assignment with bit (order[j], j) set for each position j."""
    order = tour.order if isinstance(tour, Tour) else tuple(int(c) for c in tour)
    if sorted(order) != list(range(instance.n)):
        raise ValueError(f"{order} is not a permutation of 0..{instance.n - 1}")
    n = instance.n
    x = np.zeros(n * n, dtype=np.int8)
    for j, u in enumerate(order):
        x[u * n + j] = 1
    return x


def decode_assignment(instance: TspInstance, x) -> Tour | InvalidEncoding:
    """Inverse of encode_tour; reports violated cities/positions instead of failing."""
    n = instance.n
    x = _check_assignment(x, n * n)
    grid = x.reshape(n, n)
    row_sums = grid.sum(axis=1)
    col_sums = grid.sum(axis=0)
    bad_cities = tuple(int(u) for u in np.nonzero(row_sums != 1)[0])
    bad_positions = tuple(int(j) for j in np.nonzero(col_sums != 1)[0])
    if bad_cities or bad_positions:
        return InvalidEncoding(bad_cities=bad_cities, bad_positions=bad_positions)
    order = grid.argmax(axis=0)
    return Tour.from_order(instance, order)


def _successor_products(x_grid: np.ndarray) -> np.ndarray:
    """M[u, v] = sum_j x[u, j] * x[v, (j+1) mod n] for an (n, n) grid."""
    return x_grid @ np.roll(x_grid, -1, axis=1).T


def constraint_value(instance: TspInstance, x) -> float:
    """F(x): both uniqueness penalties plus the forbidden-transition count."""
    n = instance.n
    x = _check_assignment(x, n * n)
    grid = x.reshape(n, n)
    uniq = ((grid.sum(axis=1) - 1.0) ** 2).sum() + ((grid.sum(axis=0) - 1.0) ** 2).sum()
    con = 0.0
    if instance.non_edges:
        products = _successor_products(grid)
        for u, v in instance.non_edges:
            con += products[u, v] + products[v, u]
    return float(uniq + con)


def tour_cost(instance: TspInstance, x) -> float:
    """C(x): distance-weighted cyclic successor products over usable edges."""
    n = instance.n
    x = _check_assignment(x, n * n)
    grid = x.reshape(n, n)
    weights = _transition_weights(instance)
    return float((weights * _successor_products(grid)).sum())


def to_ising(model: QuboModel) -> IsingModel:
    """Map QUBO to spins via s = 2x - 1; energies agree exactly per assignment.

    With the full-symmetric energy convention, substituting x = (s + 1)/2
    gives h_i = -(row sum of Q)_i / 2, J_ij = -Q_ij / 2 on the strict upper
    triangle, and an offset absorbing tr(Q)/4 + sum(Q)/4.
    """
    Q = model.Q
    h = -Q.sum(axis=1) / 2.0
    J = -np.triu(Q, k=1) / 2.0
    offset = model.offset + np.trace(Q) / 4.0 + Q.sum() / 4.0
    return IsingModel(h=h, J=J, offset=float(offset))


def ising_energy(model: IsingModel, spins) -> float:
    """offset - sum h_i s_i - sum_{i<j} J_ij s_i s_j."""
    spins = np.asarray(spins)
    if spins.shape != (model.m,):
        raise ValueError(f"spins must have length {model.m}, got shape {spins.shape}")
    if not np.isin(spins, (-1, 1)).all():
        raise ValueError("spins must be -1 or +1")
    s = spins.astype(np.float64)
    return float(model.offset - model.h @ s - s @ (model.J @ s))
