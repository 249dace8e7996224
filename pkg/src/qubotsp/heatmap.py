"""Edge heatmaps by gradient descent on a relaxed QUBO loss.

A soft assignment T (columns are per-position probability vectors over
cities, obtained by column-wise softmax of free logits S) is scored by the
same A*F + C objective as the binary encoding, evaluated with T in place of
x.  Descending this loss concentrates T's successor structure on short
edges; decode_heatmap then reads off the marginal probability that two
cities are adjacent, which guides the local search.

Two parameterizations: direct_logits optimizes S itself; encoder produces S
from the city coordinates through one edge-weighted message pass, and the
gradient flows back to the three weight matrices.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .instances import TspInstance

# Symmetry-breaking scale for the logit init.  Small noise (0.01) leaves the
# start too close to the uniform plateau and descent stalls at a shallow
# valley; unit-scale noise seeds deeper basins and the final loss comes out
# lower in absolute terms as well.
LOGIT_NOISE_SIGMA = 1.0
LOGIT_EPS = 1e-9


class DivergenceError(RuntimeError):
    """Raised when the loss grows past the divergence guard."""


@dataclass(frozen=True)
class SoftAssignment:
    """Column-stochastic relaxation of the city-by-position matrix."""

    logits: np.ndarray
    T: np.ndarray

    @classmethod
    def from_logits(cls, S: np.ndarray) -> "SoftAssignment":
        S = np.asarray(S, dtype=np.float64)
        if S.ndim != 2 or S.shape[0] != S.shape[1]:
            raise ValueError(f"logits must be square, got shape {S.shape}")
        if not np.isfinite(S).all():
            raise ValueError("logits must be finite")
        return cls(logits=S, T=softmax_columns(S))


@dataclass(frozen=True)
class Heatmap:
    """Symmetric edge-adjacency probabilities, zero diagonal, entries in [0,1]."""

    H: np.ndarray

    def __post_init__(self) -> None:
        H = np.asarray(self.H, dtype=np.float64)
        if H.ndim != 2 or H.shape[0] != H.shape[1]:
            raise ValueError(f"heatmap must be square, got shape {H.shape}")
        if np.max(np.abs(H - H.T)) > 1e-12:
            raise ValueError("heatmap must be symmetric within 1e-12")
        if np.any(np.diag(H) != 0.0):
            raise ValueError("heatmap diagonal must be zero")
        if H.min() < 0.0 or H.max() > 1.0:
            raise ValueError("heatmap entries must lie in [0, 1]")
        object.__setattr__(self, "H", H)

    @property
    def n(self) -> int:
        return self.H.shape[0]


@dataclass(frozen=True)
class EncoderWeights:
    """One message pass: relu(coords @ theta_in), W-aggregation, projection."""

    theta_in: np.ndarray
    theta_msg: np.ndarray
    theta_out: np.ndarray

    def __post_init__(self) -> None:
        ti = np.asarray(self.theta_in, dtype=np.float64)
        tm = np.asarray(self.theta_msg, dtype=np.float64)
        to = np.asarray(self.theta_out, dtype=np.float64)
        d = ti.shape[1] if ti.ndim == 2 else -1
        if ti.ndim != 2 or ti.shape[0] != 2:
            raise ValueError(f"theta_in must be 2 x d, got {ti.shape}")
        if tm.shape != (d, d):
            raise ValueError(f"theta_msg must be {d} x {d}, got {tm.shape}")
        if to.ndim != 2 or to.shape[0] != d:
            raise ValueError(f"theta_out must be {d} x n, got {to.shape}")
        for name, arr in (("theta_in", ti), ("theta_msg", tm), ("theta_out", to)):
            if not np.isfinite(arr).all():
                raise ValueError(f"{name} must be finite")
        object.__setattr__(self, "theta_in", ti)
        object.__setattr__(self, "theta_msg", tm)
        object.__setattr__(self, "theta_out", to)

    @property
    def hidden_dim(self) -> int:
        return self.theta_in.shape[1]


@dataclass(frozen=True)
class HeatmapConfig:
    """Knobs for the relaxed-QUBO descent."""

    tau: float = 1.0
    penalty_a: float | None = None
    steps: int = 500
    learning_rate: float = 0.2
    mode: str = "direct_logits"
    seed: int = 0
    hidden_dim: int = 32

    def __post_init__(self) -> None:
        if self.tau <= 0:
            raise ValueError(f"tau must be positive, got {self.tau}")
        if self.penalty_a is not None and self.penalty_a <= 0:
            raise ValueError(f"penalty_a must be positive, got {self.penalty_a}")
        if self.steps < 1:
            raise ValueError(f"steps must be >= 1, got {self.steps}")
        if self.learning_rate <= 0:
            raise ValueError(f"learning_rate must be positive, got {self.learning_rate}")
        if self.mode not in ("direct_logits", "encoder"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.hidden_dim < 1:
            raise ValueError(f"hidden_dim must be >= 1, got {self.hidden_dim}")


def softmax_columns(S: np.ndarray) -> np.ndarray:
    """Stable column-wise softmax."""
    Z = S - S.max(axis=0, keepdims=True)
    E = np.exp(Z)
    return E / E.sum(axis=0, keepdims=True)


def build_edge_weights(instance: TspInstance, tau: float) -> np.ndarray:
    """Attention-style weights W = exp(-D / tau); the diagonal comes out 1."""
    if tau <= 0:
        raise ValueError(f"tau must be positive, got {tau}")
    return np.exp(-instance.dist / tau)


def _transition_cost_matrix(instance: TspInstance, penalty_a: float) -> np.ndarray:
    """Weight of a soft transition u -> v: distance on edges, penalty off them."""
    n = instance.n
    G = instance.dist.copy()
    for u, v in instance.non_edges:
        G[u, v] = penalty_a
        G[v, u] = penalty_a
    np.fill_diagonal(G, 0.0)
    return G


def _resolve_penalty(instance: TspInstance, penalty_a: float | None) -> float:
    if penalty_a is not None:
        return penalty_a
    from .qubo import default_penalty

    return default_penalty(instance)


def _as_t_matrix(T: "SoftAssignment | np.ndarray") -> np.ndarray:
    if isinstance(T, SoftAssignment):
        return T.T
    return np.asarray(T, dtype=np.float64)


def soft_qubo_loss(instance: TspInstance, T: "SoftAssignment | np.ndarray",
                   penalty_a: float) -> float:
    """A * (row penalty + column penalty + non-edge transitions) + soft tour cost.

    Every term of the binary objective evaluated with the continuous T; at a
    permutation matrix this reduces exactly to the tour length.
    """
    Tm = _as_t_matrix(T)
    loss, _ = _loss_and_grad_T(instance, Tm, penalty_a)
    return loss


def _loss_and_grad_T(instance: TspInstance, Tm: np.ndarray,
                     penalty_a: float) -> tuple[float, np.ndarray]:
    """Loss and its gradient with respect to the entries of T."""
    G = _transition_cost_matrix(instance, penalty_a)
    Tnext = np.roll(Tm, -1, axis=1)
    M = Tm @ Tnext.T
    row_res = Tm.sum(axis=1) - 1.0
    col_res = Tm.sum(axis=0) - 1.0
    loss = penalty_a * float((row_res ** 2).sum() + (col_res ** 2).sum())
    loss += float((G * M).sum())
    dT = 2.0 * penalty_a * (row_res[:, None] + col_res[None, :])
    dT += G @ Tnext + G.T @ np.roll(Tm, 1, axis=1)
    return loss, dT


def _grad_T_to_S(Tm: np.ndarray, dT: np.ndarray) -> np.ndarray:
    """Back-propagate through the column softmax."""
    inner = (Tm * dT).sum(axis=0, keepdims=True)
    return Tm * (dT - inner)


def loss_gradient(instance: TspInstance, S: np.ndarray,
                  config: HeatmapConfig) -> np.ndarray:
    """Analytic gradient of soft_qubo_loss(softmax_columns(S)) w.r.t. S."""
    a = _resolve_penalty(instance, config.penalty_a)
    Tm = softmax_columns(np.asarray(S, dtype=np.float64))
    _, dT = _loss_and_grad_T(instance, Tm, a)
    return _grad_T_to_S(Tm, dT)


def init_logits(instance: TspInstance, config: HeatmapConfig) -> np.ndarray:
    """W-informed start: each city's mean edge weight, plus symmetry-breaking noise."""
    W = build_edge_weights(instance, config.tau)
    base = np.log(LOGIT_EPS + W.mean(axis=1))
    rng = np.random.default_rng(config.seed)
    n = instance.n
    return base[:, None] + rng.normal(0.0, LOGIT_NOISE_SIGMA, size=(n, n))


def init_encoder(instance: TspInstance, config: HeatmapConfig) -> EncoderWeights:
    """Seeded gaussian weights scaled by fan-in and by the aggregation mass.

    W is unnormalized, so a message pass multiplies activations by roughly
    the mean W row sum; theta_msg absorbs that factor at init and theta_out
    starts small so the softmax begins plain rather than saturated.
    """
    if instance.coords is None:
        raise ValueError("encoder mode needs city coordinates")
    rng = np.random.default_rng(config.seed)
    d = config.hidden_dim
    n = instance.n
    w_mass = float(build_edge_weights(instance, config.tau).sum(axis=1).mean())
    return EncoderWeights(
        theta_in=rng.normal(0.0, 1.0, size=(2, d)) / np.sqrt(2.0),
        theta_msg=rng.normal(0.0, 1.0, size=(d, d)) / (np.sqrt(d) * w_mass),
        theta_out=rng.normal(0.0, 1.0, size=(d, n)) * (0.3 / np.sqrt(d)),
    )


def _encoder_forward(coords: np.ndarray, W: np.ndarray,
                     weights: EncoderWeights):
    Z = coords @ weights.theta_in
    X = np.maximum(Z, 0.0)
    Zp = W @ X @ weights.theta_msg
    Xp = np.maximum(Zp, 0.0)
    S = Xp @ weights.theta_out
    return S, Z, X, Zp, Xp


def encoder_gradients(instance: TspInstance, weights: EncoderWeights,
                      config: HeatmapConfig
                      ) -> tuple[float, np.ndarray, np.ndarray, np.ndarray]:
    """Loss and analytic gradients w.r.t. (theta_in, theta_msg, theta_out)."""
    if instance.coords is None:
        raise ValueError("encoder mode needs city coordinates")
    a = _resolve_penalty(instance, config.penalty_a)
    W = build_edge_weights(instance, config.tau)
    S, Z, X, Zp, Xp = _encoder_forward(instance.coords, W, weights)
    Tm = softmax_columns(S)
    loss, dT = _loss_and_grad_T(instance, Tm, a)
    dS = _grad_T_to_S(Tm, dT)

    d_theta_out = Xp.T @ dS
    dXp = dS @ weights.theta_out.T
    dZp = dXp * (Zp > 0.0)
    WX = W @ X
    d_theta_msg = WX.T @ dZp
    dX = W.T @ (dZp @ weights.theta_msg.T)
    dZ = dX * (Z > 0.0)
    d_theta_in = instance.coords.T @ dZ
    return loss, d_theta_in, d_theta_msg, d_theta_out


def optimize_heatmap(instance: TspInstance, config: HeatmapConfig
                     ) -> tuple[SoftAssignment, Heatmap, np.ndarray]:
    """Gradient descent on the relaxed QUBO loss; returns (T, heatmap, trace).

    The trace has steps + 1 entries: the initial loss, then the loss after
    each update.  Aborts with DivergenceError if the loss ever exceeds ten
    times its initial value.
    """
    a = _resolve_penalty(instance, config.penalty_a)
    lr = config.learning_rate
    trace = np.empty(config.steps + 1)

    if config.mode == "direct_logits":
        S = init_logits(instance, config)
        Tm = softmax_columns(S)
        loss, dT = _loss_and_grad_T(instance, Tm, a)
        trace[0] = loss
        guard = 10.0 * abs(loss)
        for step in range(config.steps):
            S = S - lr * _grad_T_to_S(Tm, dT)
            Tm = softmax_columns(S)
            loss, dT = _loss_and_grad_T(instance, Tm, a)
            trace[step + 1] = loss
            if loss > guard:
                raise DivergenceError(
                    f"loss {loss:.4g} exceeded 10x initial {trace[0]:.4g} "
                    f"at step {step + 1}; lower the learning rate")
        assign = SoftAssignment(logits=S, T=Tm)
    else:
        weights = init_encoder(instance, config)
        W = build_edge_weights(instance, config.tau)
        loss, g_in, g_msg, g_out = encoder_gradients(instance, weights, config)
        trace[0] = loss
        guard = 10.0 * abs(loss)
        for step in range(config.steps):
            weights = EncoderWeights(
                theta_in=weights.theta_in - lr * g_in,
                theta_msg=weights.theta_msg - lr * g_msg,
                theta_out=weights.theta_out - lr * g_out,
            )
            loss, g_in, g_msg, g_out = encoder_gradients(instance, weights, config)
            trace[step + 1] = loss
            if loss > guard:
                raise DivergenceError(
                    f"loss {loss:.4g} exceeded 10x initial {trace[0]:.4g} "
                    f"at step {step + 1}; lower the learning rate")
        S, _, _, _, _ = _encoder_forward(instance.coords, W, weights)
        assign = SoftAssignment.from_logits(S)

    return assign, decode_heatmap(assign), trace


def decode_heatmap(T: "SoftAssignment | np.ndarray") -> Heatmap:
    """Marginal adjacency: H_uv = P(v follows u) + P(u follows v), clipped.

    Treats T's columns as independent position distributions; the successor
    marginal is M = T @ roll(T, -1, columns)^T.
    """
    Tm = _as_t_matrix(T)
    M = Tm @ np.roll(Tm, -1, axis=1).T
    H = np.clip(M + M.T, 0.0, 1.0)
    np.fill_diagonal(H, 0.0)
    return Heatmap(H=H)


def save_heatmap(heatmap: Heatmap, path) -> None:
    """Plain comma-separated matrix, full precision, one row per line."""
    np.savetxt(path, heatmap.H, delimiter=",", fmt="%.17e")


def load_heatmap(path) -> Heatmap:
    H = np.atleast_2d(np.loadtxt(path, delimiter=","))
    return Heatmap(H=H)
