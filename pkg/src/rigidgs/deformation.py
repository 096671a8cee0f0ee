"""Gauge-fixed local-anchor SE(3) deformation of Gaussian primitives.

The deformation pipeline at query time ``t``:

1. compose the time-conditioned twist ``zeta(t)`` from the base twist and
   the Bezier residual at the window-normalized time;
2. project the anchor onto the plane orthogonal to the instantaneous
   rotation axis and keep only the axis-parallel translational coefficient
   (the gauge fixing; skipped when ``||omega||^2 <= EPS_SQ``);
3. scale by the elapsed time ``dt = t - mu_t`` and push through the
   closed-form exponential map;
4. ``mu(t) = R (mu - a_perp) + a_perp + J nu_par dt``, covariance
   conjugated by ``R``, opacity from the temporal profile.

At ``t = mu_t`` the log-parameter vanishes, so the result is the canonical
state.  The orthogonal translation is deliberately discarded: in-plane
displacement must be expressed through the anchor, so these deformations
are screws without transverse drift.

Everything broadcasts over leading batch axes; a ``Primitive`` /
``MotionParams`` pair may hold one record or a whole stacked scene.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import se3
from .se3 import DENOM_CLAMP, EPS_SQ, Twist, _matvec, _outer, hat
from .temporal import (
    BezierTwists,
    TemporalProfile,
    bernstein_quadratic,
    normalized_time,
    temporal_opacity,
)


@dataclass(frozen=True)
class Primitive:
    """Canonical Gaussian: mean, per-axis stddev, unit quaternion (wxyz)
    orientation, temporal profile, and DC color in [0, 1]^3."""

    mu: np.ndarray
    scale: np.ndarray
    orient: np.ndarray
    profile: TemporalProfile
    color: np.ndarray

    def __post_init__(self):
        if not np.all(np.asarray(self.scale) > 0.0):
            raise ValueError("scale components must be strictly positive")
        qn = np.linalg.norm(np.asarray(self.orient, float), axis=-1)
        if not np.all(np.abs(qn - 1.0) <= 1e-9):
            raise ValueError("orient must be normalized within 1e-9")

    @property
    def alpha(self):
        return self.profile.alpha


@dataclass
class MotionParams:
    """Per-primitive learnables: base twist, three Bezier control twists
    (packed ``ctrl[..., k, :]``, angular part first) and the local anchor."""

    base: np.ndarray  # (..., 6)
    ctrl: np.ndarray  # (..., 3, 6)
    anchor: np.ndarray  # (..., 3)

    @property
    def twists(self) -> BezierTwists:
        return BezierTwists(
            base=Twist.from_array(self.base),
            ctrl0=Twist.from_array(self.ctrl[..., 0, :]),
            ctrl1=Twist.from_array(self.ctrl[..., 1, :]),
            ctrl2=Twist.from_array(self.ctrl[..., 2, :]),
        )

    @staticmethod
    def zero(n: int | None = None) -> "MotionParams":
        shape = () if n is None else (n,)
        return MotionParams(
            base=np.zeros(shape + (6,)),
            ctrl=np.zeros(shape + (3, 6)),
            anchor=np.zeros(shape + (3,)),
        )

    def copy(self) -> "MotionParams":
        return MotionParams(self.base.copy(), self.ctrl.copy(), self.anchor.copy())


@dataclass(frozen=True)
class DeformedState:
    """Deformed mean, rotated covariance and time-dependent opacity."""

    mu: np.ndarray
    cov: np.ndarray
    opacity: np.ndarray


@dataclass(frozen=True)
class PointGrads:
    """Partials of the deformed mean with respect to the instantaneous twist
    parts and the anchor, plus the Bernstein weights needed to chain into
    the Bezier control twists."""

    d_omega: np.ndarray  # (..., 3, 3)
    d_nu: np.ndarray  # (..., 3, 3)
    d_anchor: np.ndarray  # (..., 3, 3)
    bernstein: np.ndarray  # (..., 3)


@dataclass(frozen=True)
class MotionJacobian:
    """All 27 scalar partials of the deformed mean per primitive: 6 for the
    base twist, 18 for the control twists, 3 for the anchor."""

    d_base: np.ndarray  # (..., 3, 6)
    d_ctrl: np.ndarray  # (..., 3, 3, 6), control index on axis -3
    d_anchor: np.ndarray  # (..., 3, 3)


def quaternion_to_matrix(q) -> np.ndarray:
    """Rotation matrix of a unit quaternion in wxyz order."""
    q = np.asarray(q, float)
    w, x, y, z = q[..., 0], q[..., 1], q[..., 2], q[..., 3]
    out = np.empty(q.shape[:-1] + (3, 3))
    out[..., 0, 0] = 1.0 - 2.0 * (y * y + z * z)
    out[..., 0, 1] = 2.0 * (x * y - w * z)
    out[..., 0, 2] = 2.0 * (x * z + w * y)
    out[..., 1, 0] = 2.0 * (x * y + w * z)
    out[..., 1, 1] = 1.0 - 2.0 * (x * x + z * z)
    out[..., 1, 2] = 2.0 * (y * z - w * x)
    out[..., 2, 0] = 2.0 * (x * z - w * y)
    out[..., 2, 1] = 2.0 * (y * z + w * x)
    out[..., 2, 2] = 1.0 - 2.0 * (x * x + y * y)
    return out


def covariance(scale, orient) -> np.ndarray:
    """Canonical covariance ``R_o diag(scale^2) R_o^T`` from its factors.

    Positive definite by construction for any strictly positive scale.
    """
    scale = np.asarray(scale, float)
    r = quaternion_to_matrix(orient)
    return (r * (scale * scale)[..., None, :]) @ np.swapaxes(r, -1, -2)


def axis_projections(anchor, omega, nu):
    """Anchor projected off the rotation axis and the axis-parallel part of
    the translational coefficient.

    For ``||omega||^2 > EPS_SQ``:
    ``a_perp = a - (a . omega / ||omega||^2) omega`` and
    ``nu_par = (nu . omega / ||omega||^2) omega``; otherwise the axis is
    numerically unreliable and ``(a, nu)`` pass through unchanged.
    """
    anchor = np.asarray(anchor, float)
    omega = np.asarray(omega, float)
    nu = np.asarray(nu, float)
    w2 = np.sum(omega * omega, axis=-1, keepdims=True)
    denom = np.maximum(w2, DENOM_CLAMP)
    s_a = np.sum(anchor * omega, axis=-1, keepdims=True) / denom
    s_n = np.sum(nu * omega, axis=-1, keepdims=True) / denom
    big = w2 > EPS_SQ
    a_perp = np.where(big, anchor - s_a * omega, anchor)
    nu_par = np.where(big, s_n * omega, nu)
    return a_perp, nu_par


def _compose_twist(base, ctrl, mu_t, s_t, t):
    """Instantaneous twist arrays and the Bernstein weights used to build it."""
    tau = normalized_time(TemporalProfile(mu_t=mu_t, s_t=s_t), t)
    w0, w1, w2 = bernstein_quadratic(tau)
    bern = np.stack([w0, w1, w2], axis=-1)
    zeta = base + np.einsum("...k,...kj->...j", bern, ctrl)
    return zeta[..., :3], zeta[..., 3:], bern


def _motion_transform(mu, anchor, base, ctrl, mu_t, s_t, t, gauge_fixed=True):
    """Core of the deformation: returns the deformed mean and the rotation."""
    mu = np.asarray(mu, float)
    anchor = np.asarray(anchor, float)
    t = np.asarray(t, float)
    omega, nu, _ = _compose_twist(base, ctrl, mu_t, s_t, t)
    if gauge_fixed:
        a_perp, nu_par = axis_projections(anchor, omega, nu)
    else:
        a_perp, nu_par = np.broadcast_to(anchor, omega.shape), nu
    dt = (t - mu_t)[..., None]
    rot, jac = se3.so3_exp_and_left_jacobian(omega * dt)
    pos = _matvec(rot, mu - a_perp) + a_perp + _matvec(jac, nu_par * dt)
    return pos, rot


def deform_points(mu, anchor, base, ctrl, mu_t, s_t, t, gauge_fixed=True) -> np.ndarray:
    """Deformed means only; the array-level hot path used by the harness."""
    return _motion_transform(mu, anchor, base, ctrl, mu_t, s_t, t, gauge_fixed)[0]


def deform_points_with_grads(mu, anchor, base, ctrl, mu_t, s_t, t, gauge_fixed=True):
    """Deformed means plus analytic partials.

    Gradients are exact within each branch of the axis projection; across
    the ``||omega||^2 = EPS_SQ`` switch the model itself is discontinuous,
    so finite-difference agreement is only contracted away from it.
    """
    pos, _, grads = _grads_core(mu, anchor, base, ctrl, mu_t, s_t, t, gauge_fixed)
    return pos, grads


def _grads_core(mu, anchor, base, ctrl, mu_t, s_t, t, gauge_fixed=True):
    mu = np.asarray(mu, float)
    anchor = np.asarray(anchor, float)
    t = np.asarray(t, float)
    omega, nu, bern = _compose_twist(base, ctrl, mu_t, s_t, t)

    w2 = np.sum(omega * omega, axis=-1, keepdims=True)
    denom = np.maximum(w2, DENOM_CLAMP)
    s_a = np.sum(anchor * omega, axis=-1, keepdims=True) / denom
    s_n = np.sum(nu * omega, axis=-1, keepdims=True) / denom
    big = w2 > EPS_SQ
    if not gauge_fixed:
        big = np.zeros_like(big)
    a_perp = np.where(big, anchor - s_a * omega, np.broadcast_to(anchor, omega.shape))
    nu_par = np.where(big, s_n * omega, np.broadcast_to(nu, omega.shape))

    dt = (t - mu_t)[..., None]
    phi = omega * dt
    ups = nu_par * dt
    rot, jac = se3.so3_exp_and_left_jacobian(phi)
    body = mu - a_perp
    rotated = _matvec(rot, body)
    pos = rotated + a_perp + _matvec(jac, ups)

    eye = np.broadcast_to(np.eye(3), rot.shape)
    i_minus_r = eye - rot
    d_rm = se3.rotation_action_grad(phi, body, jac=jac, rotated=rotated)
    d_ju = se3.translation_action_grad(phi, ups)
    dt_m = dt[..., None]

    # Branch without projections: a_perp = a, nu_par = nu.
    d_omega_plain = dt_m * (d_rm + d_ju)
    d_nu_plain = dt_m * jac
    d_anchor_plain = i_minus_r

    # Projection extras, selected where the angular norm is reliable.
    axis_outer = _outer(omega, omega) / denom[..., None]
    da_dw = -(_outer(omega, anchor - 2.0 * s_a * omega) / denom[..., None]
              + s_a[..., None] * eye)
    dn_dw = (_outer(omega, nu - 2.0 * s_n * omega) / denom[..., None]
             + s_n[..., None] * eye)
    d_omega_proj = d_omega_plain + i_minus_r @ da_dw + dt_m * (jac @ dn_dw)
    d_nu_proj = dt_m * (jac @ axis_outer)
    d_anchor_proj = i_minus_r @ (eye - axis_outer)

    big_m = big[..., None]
    grads = PointGrads(
        d_omega=np.where(big_m, d_omega_proj, d_omega_plain),
        d_nu=np.where(big_m, d_nu_proj, d_nu_plain),
        d_anchor=np.where(big_m, d_anchor_proj, d_anchor_plain),
        bernstein=bern,
    )
    return pos, rot, grads


def deform(prim: Primitive, params: MotionParams, t, gauge_fixed=True) -> DeformedState:
    """Full deformed state of a primitive (or stacked batch) at time ``t``."""
    pos, rot = _motion_transform(
        prim.mu, params.anchor, params.base, params.ctrl,
        prim.profile.mu_t, prim.profile.s_t, t, gauge_fixed,
    )
    sigma = covariance(prim.scale, prim.orient)
    cov = rot @ sigma @ np.swapaxes(rot, -1, -2)
    return DeformedState(mu=pos, cov=cov, opacity=temporal_opacity(prim.profile, t))


def deform_with_grads(prim: Primitive, params: MotionParams, t, gauge_fixed=True):
    """Deformed state plus the partials of the mean with respect to all 27
    learnable motion scalars."""
    pos, rot, g = _grads_core(
        prim.mu, params.anchor, params.base, params.ctrl,
        prim.profile.mu_t, prim.profile.s_t, t, gauge_fixed,
    )
    sigma = covariance(prim.scale, prim.orient)
    state = DeformedState(
        mu=pos,
        cov=rot @ sigma @ np.swapaxes(rot, -1, -2),
        opacity=temporal_opacity(prim.profile, t),
    )
    d_base = np.concatenate([g.d_omega, g.d_nu], axis=-1)
    d_ctrl = g.bernstein[..., :, None, None] * d_base[..., None, :, :]
    return state, MotionJacobian(d_base=d_base, d_ctrl=d_ctrl, d_anchor=g.d_anchor)
