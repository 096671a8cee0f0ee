"""Motion-guided relocation under a fixed primitive budget.

Low-opacity primitives are periodically overwritten by clones of alive
primitives sampled from difficulty cues; the clone copies the source's full
state except its scale, which shrinks by a fixed factor.  The total count
never changes, so memory stays constant by construction.

``relocate`` mutates the scene arrays in place and must not run
concurrently with deformation or loss evaluation; between relocations the
scene is read-only for all evaluators.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .deformation import MotionParams, Primitive


@dataclass(frozen=True)
class RelocationConfig:
    """Opacity threshold, relocation period in iterations, clone scale
    factor, and the seed that makes relocation reproducible."""

    opacity_threshold: float = 0.005
    period: int = 100
    scale_factor: float = 0.66
    rng_seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.opacity_threshold < 1.0:
            raise ValueError("opacity_threshold must lie in (0, 1)")
        if self.period < 1:
            raise ValueError("period must be >= 1")
        if not 0.0 < self.scale_factor <= 1.0:
            raise ValueError("scale_factor must lie in (0, 1]")


@dataclass
class RelocationCues:
    """Per-primitive difficulty cues: activated opacity, base translational
    speed, exponentiated temporal scale, and the accumulated spatial and
    temporal gradient magnitudes."""

    sigmoid_opacity: np.ndarray
    nu_norm: np.ndarray
    temporal_scale_exp: np.ndarray
    grad_spatial: np.ndarray
    grad_temporal: np.ndarray

    def __post_init__(self):
        for name in ("sigmoid_opacity", "nu_norm", "temporal_scale_exp",
                     "grad_spatial", "grad_temporal"):
            v = np.asarray(getattr(self, name), float)
            if not np.all(np.isfinite(v)) or np.any(v < 0.0):
                raise ValueError(f"cue {name} must be finite and non-negative")


@dataclass(frozen=True)
class RelocationEvent:
    """Outcome of one relocation: which slots were overwritten, from which
    sources, and whether the event was skipped for lack of alive sources."""

    inactive: np.ndarray
    sources: np.ndarray
    skipped: bool = False

    @property
    def n_relocated(self) -> int:
        return 0 if self.skipped else int(self.inactive.size)


def partition_by_opacity(alpha, tau_alpha: float):
    """Disjoint, exhaustive split into inactive (``opacity < tau``, strict)
    and alive index arrays."""
    alpha = np.asarray(alpha, float)
    if alpha.size == 0:
        raise ValueError("partition_by_opacity requires a non-empty scene")
    inactive = np.flatnonzero(alpha < tau_alpha)
    alive = np.flatnonzero(alpha >= tau_alpha)
    return inactive, alive


def _normalized_channel(values, n):
    total = values.sum()
    if total <= 0.0:
        # Nothing accumulated yet: the channel contributes uniformly rather
        # than 0/0, keeping q well-defined at initialization.
        return np.full(n, 1.0 / n)
    return values / total


def sampling_distribution(cues: RelocationCues) -> np.ndarray:
    """Source-sampling probabilities over the alive set.

    Each cue channel is self-normalized over the alive set and the four
    are summed, so scaling any one channel leaves the result unchanged.
    """
    opacity = np.asarray(cues.sigmoid_opacity, float)
    n = opacity.size
    if n == 0:
        raise ValueError("sampling_distribution requires a non-empty alive set")
    motion = np.asarray(cues.nu_norm, float) * np.asarray(cues.temporal_scale_exp, float)
    s = (_normalized_channel(opacity, n)
         + _normalized_channel(motion, n)
         + _normalized_channel(np.asarray(cues.grad_spatial, float), n)
         + _normalized_channel(np.asarray(cues.grad_temporal, float), n))
    return s / s.sum()


def build_cues(prims: Primitive, params: MotionParams,
               grad_spatial=None, grad_temporal=None) -> RelocationCues:
    """Assemble cues from the current scene state and accumulated gradients."""
    alpha = np.asarray(prims.profile.alpha, float)
    n = alpha.shape[0]
    nu = np.asarray(params.base, float)[..., 3:]
    return RelocationCues(
        sigmoid_opacity=alpha.copy(),
        nu_norm=np.sqrt(np.einsum("...i,...i->...", nu, nu)),
        temporal_scale_exp=np.exp(np.asarray(prims.profile.s_t, float)),
        grad_spatial=np.zeros(n) if grad_spatial is None else np.asarray(grad_spatial, float).copy(),
        grad_temporal=np.zeros(n) if grad_temporal is None else np.asarray(grad_temporal, float).copy(),
    )


def accumulate_gradient_cues(running: np.ndarray, step_grads: np.ndarray) -> np.ndarray:
    """Add the per-primitive magnitude of one optimization step's gradients
    to a running cue, in place.

    ``step_grads`` may carry any trailing axes (e.g. per-time residual
    gradients); the norm is taken over everything but the primitive axis.
    """
    g = np.asarray(step_grads, float)
    flat = g.reshape(g.shape[0], -1)
    running += np.sqrt(np.einsum("ij,ij->i", flat, flat))
    return running


@dataclass
class CueAccumulator:
    """Running spatial/temporal gradient cues; reset after every relocation."""

    spatial: np.ndarray
    temporal: np.ndarray

    @staticmethod
    def zeros(n: int) -> "CueAccumulator":
        return CueAccumulator(spatial=np.zeros(n), temporal=np.zeros(n))

    def reset(self) -> None:
        self.spatial[:] = 0.0
        self.temporal[:] = 0.0


def relocate(prims: Primitive, params: MotionParams, cues: RelocationCues,
             config: RelocationConfig, rng: np.random.Generator) -> RelocationEvent:
    """Overwrite every inactive primitive with a sampled alive clone.

    Sources are drawn with replacement from the cue distribution; the clone
    copies mean, orientation, opacity, temporal profile, color, motion
    params and anchor, and shrinks the scale by ``config.scale_factor``.
    Alive primitives are untouched and the total count never changes.  With
    no alive sources the event is skipped with a warning.
    """
    alpha = np.asarray(prims.profile.alpha, float)
    inactive, alive = partition_by_opacity(alpha, config.opacity_threshold)
    if inactive.size == 0:
        return RelocationEvent(inactive=inactive, sources=inactive.copy())
    if alive.size == 0:
        warnings.warn("relocation skipped: no alive primitives to clone")
        return RelocationEvent(inactive=inactive, sources=np.empty(0, int), skipped=True)

    alive_cues = RelocationCues(
        sigmoid_opacity=cues.sigmoid_opacity[alive],
        nu_norm=cues.nu_norm[alive],
        temporal_scale_exp=cues.temporal_scale_exp[alive],
        grad_spatial=cues.grad_spatial[alive],
        grad_temporal=cues.grad_temporal[alive],
    )
    q = sampling_distribution(alive_cues)
    sources = alive[rng.choice(alive.size, size=inactive.size, replace=True, p=q)]

    prims.mu[inactive] = prims.mu[sources]
    prims.scale[inactive] = prims.scale[sources] * config.scale_factor
    prims.orient[inactive] = prims.orient[sources]
    prims.color[inactive] = prims.color[sources]
    prims.profile.mu_t[inactive] = prims.profile.mu_t[sources]
    prims.profile.s_t[inactive] = prims.profile.s_t[sources]
    prims.profile.alpha[inactive] = prims.profile.alpha[sources]
    params.base[inactive] = params.base[sources]
    params.ctrl[inactive] = params.ctrl[sources]
    params.anchor[inactive] = params.anchor[sources]
    return RelocationEvent(inactive=inactive, sources=sources)
