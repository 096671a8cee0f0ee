"""Time-dependent machinery: temporal opacity, effective windows, normalized
time, quadratic Bezier twist residuals, and the translation-only baseline.

Scene time is a dimensionless continuous scalar; the fitting harness
normalizes sequences to ``t in [0, 1]``.  All operations broadcast, so a
``TemporalProfile`` may hold scalars or per-primitive arrays.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .se3 import Twist


@dataclass(frozen=True)
class TemporalProfile:
    """Central time ``mu_t``, temporal scale ``s_t > 0`` and canonical
    opacity ``alpha`` in (0, 1]."""

    mu_t: float | np.ndarray
    s_t: float | np.ndarray
    alpha: float | np.ndarray = 1.0

    def __post_init__(self):
        if not np.all(np.asarray(self.s_t) > 0.0):
            raise ValueError("temporal scale s_t must be strictly positive")
        alpha = np.asarray(self.alpha)
        if not (np.all(alpha > 0.0) and np.all(alpha <= 1.0)):
            raise ValueError("alpha must lie in (0, 1]")


@dataclass(frozen=True)
class BezierTwists:
    """Base twist plus the three control twists of the quadratic residual."""

    base: Twist
    ctrl0: Twist
    ctrl1: Twist
    ctrl2: Twist

    @staticmethod
    def zero() -> "BezierTwists":
        return BezierTwists(Twist.zero(), Twist.zero(), Twist.zero(), Twist.zero())


def temporal_visibility(profile: TemporalProfile, t) -> np.ndarray:
    """Gaussian-in-time visibility ``exp(-(t - mu_t)^2 / (2 s_t^2))`` in (0, 1]."""
    d = (np.asarray(t, float) - profile.mu_t) / profile.s_t
    return np.exp(-0.5 * d * d)


def temporal_opacity(profile: TemporalProfile, t) -> float | np.ndarray:
    """Time-dependent opacity ``alpha * visibility(t)``."""
    return profile.alpha * temporal_visibility(profile, t)


def effective_window(profile: TemporalProfile):
    """Interval ``mu_t +- 2 s_t`` where the primitive is effectively supervised."""
    return profile.mu_t - 2.0 * profile.s_t, profile.mu_t + 2.0 * profile.s_t


def normalized_time(profile: TemporalProfile, t) -> np.ndarray:
    """Window-relative time progress, clamped to [0, 1].

    ``t_norm = (t - (mu_t - 2 s_t)) / (4 s_t)``; values below the window map
    to 0 and above it to 1, so the residual is frozen outside the window.
    """
    lo = profile.mu_t - 2.0 * profile.s_t
    t_norm = (np.asarray(t, float) - lo) / (4.0 * profile.s_t)
    return np.clip(t_norm, 0.0, 1.0)


def bernstein_quadratic(tau):
    """The three quadratic Bernstein weights ``(1-tau)^2, 2(1-tau)tau, tau^2``."""
    tau = np.asarray(tau, float)
    one_m = 1.0 - tau
    return one_m * one_m, 2.0 * one_m * tau, tau * tau


def bezier_residual(twists: BezierTwists, tau) -> Twist:
    """Quadratic Bezier over all six twist components at parameter ``tau``.

    ``tau`` outside [0, 1] is a contract violation; callers must clamp
    through :func:`normalized_time` so window semantics stay in one place.
    """
    tau = np.asarray(tau, float)
    if np.any(tau < 0.0) or np.any(tau > 1.0):
        raise ValueError("bezier_residual requires tau in [0, 1]")
    w0, w1, w2 = bernstein_quadratic(tau)
    w0, w1, w2 = w0[..., None], w1[..., None], w2[..., None]
    omega = w0 * twists.ctrl0.omega + w1 * twists.ctrl1.omega + w2 * twists.ctrl2.omega
    nu = w0 * twists.ctrl0.nu + w1 * twists.ctrl1.nu + w2 * twists.ctrl2.nu
    return Twist(omega=omega, nu=nu)


def motion_coefficient(twists: BezierTwists, profile: TemporalProfile, t) -> Twist:
    """Time-conditioned twist: base plus the Bezier residual at the
    window-normalized time.  Constant outside the effective window."""
    res = bezier_residual(twists, normalized_time(profile, t))
    return Twist(omega=twists.base.omega + res.omega, nu=twists.base.nu + res.nu)


def linear_position(mu, v, mu_t, t) -> np.ndarray:
    """Translation-only baseline: ``mu + v * (t - mu_t)``."""
    mu = np.asarray(mu, float)
    v = np.asarray(v, float)
    dt = np.asarray(t, float) - np.asarray(mu_t, float)
    return mu + v * dt[..., None]
