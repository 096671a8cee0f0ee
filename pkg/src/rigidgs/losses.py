"""Motion regularizers, color affinity, exact KNN and the composite objective.

The rigid-coherence loss is the raw double sum over directed neighbor edges
exactly as defined; the smoothness and opacity terms are averaged over
primitives.  Scale differences between the reductions are absorbed by the
loss weights.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .temporal import BezierTwists


@dataclass(frozen=True)
class LossWeights:
    """Objective weights and neighbor count; defaults follow the reference
    training configuration."""

    w_reg: float = 0.01
    w_motion: float = 0.0001
    w_rigid: float = 1.0
    lambda_c: float = 50.0
    k_neighbors: int = 3

    def __post_init__(self):
        if min(self.w_reg, self.w_motion, self.w_rigid, self.lambda_c) < 0:
            raise ValueError("loss weights must be non-negative")
        if self.k_neighbors < 1:
            raise ValueError("k_neighbors must be >= 1")


@dataclass(frozen=True)
class NeighborGraph:
    """Per-primitive neighbor indices ordered by ascending canonical
    distance, ties broken toward the lower index; no self-loops."""

    indices: np.ndarray  # (n, min(k, n-1)) int
    k: int

    @property
    def n(self) -> int:
        return self.indices.shape[0]


def knn_canonical(mu, k: int) -> NeighborGraph:
    """Exact k-nearest neighbors by Euclidean distance on canonical means.

    Brute force on the full distance matrix; deterministic under ties.
    """
    mu = np.asarray(mu, float)
    n = mu.shape[0]
    if n < 2:
        raise ValueError("knn_canonical requires at least two primitives")
    if k < 1:
        raise ValueError("k must be >= 1")
    diff = mu[:, None, :] - mu[None, :, :]
    d2 = np.einsum("ijk,ijk->ij", diff, diff)
    np.fill_diagonal(d2, np.inf)
    cols = np.broadcast_to(np.arange(n), (n, n))
    order = np.lexsort((cols, d2), axis=-1)
    return NeighborGraph(indices=order[:, : min(k, n - 1)].copy(), k=k)


def color_affinity(c_i, c_j, lambda_c: float):
    """Appearance affinity ``exp(-lambda_c ||c_i - c_j||^2)`` in (0, 1]."""
    d = np.asarray(c_i, float) - np.asarray(c_j, float)
    return np.exp(-lambda_c * np.sum(d * d, axis=-1))


def acceleration_twist(ctrl) -> np.ndarray:
    """Bezier acceleration ``ctrl0 - 2 ctrl1 + ctrl2`` over all six components."""
    ctrl = np.asarray(ctrl, float)
    return ctrl[..., 0, :] - 2.0 * ctrl[..., 1, :] + ctrl[..., 2, :]


def motion_smoothness_loss(twists: BezierTwists) -> float:
    """Squared norm of the Bezier acceleration, averaged over primitives."""
    b_omega = twists.ctrl0.omega - 2.0 * twists.ctrl1.omega + twists.ctrl2.omega
    b_nu = twists.ctrl0.nu - 2.0 * twists.ctrl1.nu + twists.ctrl2.nu
    per = np.sum(b_omega * b_omega, axis=-1) + np.sum(b_nu * b_nu, axis=-1)
    return float(np.mean(per))


def motion_smoothness_grad(ctrl) -> np.ndarray:
    """Gradient of :func:`motion_smoothness_loss` with respect to the packed
    control twists ``(..., 3, 6)``, including the mean normalization."""
    ctrl = np.asarray(ctrl, float)
    b = acceleration_twist(ctrl)
    n = max(int(np.prod(b.shape[:-1])), 1)
    grad = np.empty_like(ctrl)
    grad[..., 0, :] = 2.0 * b / n
    grad[..., 1, :] = -4.0 * b / n
    grad[..., 2, :] = 2.0 * b / n
    return grad


def _edge_weights(colors, graph: NeighborGraph, lambda_c: float):
    colors = np.asarray(colors, float)
    src = np.repeat(np.arange(graph.n), graph.indices.shape[1])
    dst = graph.indices.ravel()
    kij = color_affinity(colors[src], colors[dst], lambda_c)
    return src, dst, kij


def rigid_coherence_loss(base, colors, graph: NeighborGraph, lambda_c: float) -> float:
    """Color-weighted disagreement of base twists across neighbor edges:
    ``sum_i sum_{j in N(i)} K_ij ||base_i - base_j||^2``."""
    base = np.asarray(base, float)
    src, dst, kij = _edge_weights(colors, graph, lambda_c)
    diff = base[src] - base[dst]
    return float(np.sum(kij * np.sum(diff * diff, axis=-1)))


def rigid_coherence_grad(base, colors, graph: NeighborGraph, lambda_c: float) -> np.ndarray:
    """Gradient of :func:`rigid_coherence_loss` with respect to the base
    twists; both endpoints of every directed edge receive gradient."""
    base = np.asarray(base, float)
    src, dst, kij = _edge_weights(colors, graph, lambda_c)
    diff = 2.0 * kij[:, None] * (base[src] - base[dst])
    grad = np.zeros_like(base)
    np.add.at(grad, src, diff)
    np.add.at(grad, dst, -diff)
    return grad


def opacity_regularizer(alpha) -> float:
    """Mean activated opacity over the scene; discourages free-riding
    opacity and feeds the relocation cue."""
    alpha = np.asarray(alpha, float)
    if alpha.size == 0:
        raise ValueError("opacity_regularizer requires a non-empty scene")
    return float(np.mean(alpha))


def total_objective(data_loss: float, reg: float, motion: float, rigid: float,
                    w: LossWeights) -> float:
    """Weighted sum of the data term and the three regularizers."""
    return float(data_loss + w.w_reg * reg + w.w_motion * motion + w.w_rigid * rigid)
