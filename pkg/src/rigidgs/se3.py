"""Closed-form SO(3)/SE(3) exponential-map kernels with stabilized coefficients.

Conventions, fixed module-wide:

* matrices are numpy arrays in row-major (C) order and act on column
  vectors from the left, ``y = R @ x``;
* a "Vec3" is any float array of shape ``(..., 3)``, a "Mat3" any array of
  shape ``(..., 3, 3)``; every function broadcasts over leading batch axes;
* a twist splits into an angular part ``omega`` (rad per unit time) and a
  translational part ``nu`` (length per unit time); a log-parameter is a
  twist scaled by an elapsed time.

All functions are pure and allocate fresh outputs; inputs are never
mutated, so concurrent evaluation is safe.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Small-angle switch on theta^2 (also used on ||omega||^2 by callers) and
# the denominator guard for branchless evaluation.
EPS_SQ = 1e-8
DENOM_CLAMP = 1e-10

# Below this angle the third exponential coefficient and the coefficient
# ratios used by the analytic derivatives are evaluated by Taylor series;
# above it the closed forms are free of cancellation at double precision.
_TAYLOR_CUTOFF = 0.25


@dataclass(frozen=True)
class Twist:
    """Element of the 6-d Lie algebra: angular ``omega``, translational ``nu``."""

    omega: np.ndarray
    nu: np.ndarray

    def as_array(self) -> np.ndarray:
        """Pack into ``(..., 6)`` with the angular part first."""
        return np.concatenate(
            [np.asarray(self.omega, float), np.asarray(self.nu, float)], axis=-1
        )

    @staticmethod
    def from_array(a) -> "Twist":
        a = np.asarray(a, float)
        return Twist(omega=a[..., :3], nu=a[..., 3:])

    @staticmethod
    def zero() -> "Twist":
        return Twist(omega=np.zeros(3), nu=np.zeros(3))


@dataclass(frozen=True)
class LogParam:
    """Twist scaled by an elapsed time: rotation vector ``phi``, translation
    log-parameter ``upsilon``."""

    phi: np.ndarray
    upsilon: np.ndarray


@dataclass(frozen=True)
class RigidTransform:
    """Rotation matrix plus translation vector, the image of ``se3_exp``."""

    rotation: np.ndarray
    translation: np.ndarray

    def apply(self, x) -> np.ndarray:
        x = np.asarray(x, float)
        return _matvec(self.rotation, x) + self.translation


@dataclass(frozen=True)
class StabilizedCoeffs:
    """Exponential-map coefficients sin(t)/t, (1-cos t)/t^2, (t-sin t)/t^3."""

    a: float | np.ndarray
    b: float | np.ndarray
    c: float | np.ndarray


def _matvec(m, v):
    return np.einsum("...ij,...j->...i", m, v)


def _outer(u, v):
    return np.einsum("...i,...j->...ij", u, v)


def hat(v) -> np.ndarray:
    """Skew-symmetric matrix of ``v``: ``hat(v) @ w == cross(v, w)``."""
    v = np.asarray(v, float)
    out = np.zeros(v.shape[:-1] + (3, 3))
    out[..., 0, 1] = -v[..., 2]
    out[..., 0, 2] = v[..., 1]
    out[..., 1, 0] = v[..., 2]
    out[..., 1, 2] = -v[..., 0]
    out[..., 2, 0] = -v[..., 1]
    out[..., 2, 1] = v[..., 0]
    return out


def _abc(theta):
    """Stabilized coefficient arrays for any theta >= 0.

    The first two use the sinc identities, stable everywhere.  The third is
    a Taylor branch below ``theta^2 < EPS_SQ``, an extended Taylor series up
    to the cutoff, and the plain closed form above it where neither
    cancellation nor a denominator guard matters at double precision.
    """
    theta = np.asarray(theta, float)
    a = np.sinc(theta / np.pi)
    b = 0.5 * np.sinc(theta / (2.0 * np.pi)) ** 2
    t2 = theta * theta
    c_near = 1.0 / 6.0 - t2 / 120.0
    c_mid = 1.0 / 6.0 - t2 / 120.0 + t2 * t2 / 5040.0 - t2 * t2 * t2 / 362880.0
    safe = np.maximum(theta, _TAYLOR_CUTOFF)
    c_far = (safe - np.sin(safe)) / safe**3
    c = np.where(t2 < EPS_SQ, c_near, np.where(theta < _TAYLOR_CUTOFF, c_mid, c_far))
    return a, b, c


def _coeff_ratios(theta):
    """Ratios B'(t)/t = (A-2B)/t^2 and C'(t)/t = (B-3C)/t^2.

    Needed by the analytic derivative of the left-Jacobian action; both
    cancel catastrophically near zero, so small angles use their series.
    """
    theta = np.asarray(theta, float)
    a, b, c = _abc(theta)
    t2 = theta * theta
    br_near = -1.0 / 12.0 + t2 / 180.0 - t2 * t2 / 6720.0 + t2 * t2 * t2 / 453600.0
    cr_near = -1.0 / 60.0 + t2 / 1260.0 - t2 * t2 / 60480.0 + t2 * t2 * t2 / 4989600.0
    safe2 = np.maximum(t2, _TAYLOR_CUTOFF**2)
    br = np.where(theta < _TAYLOR_CUTOFF, br_near, (a - 2.0 * b) / safe2)
    cr = np.where(theta < _TAYLOR_CUTOFF, cr_near, (b - 3.0 * c) / safe2)
    return br, cr


def stabilized_coeffs(theta) -> StabilizedCoeffs:
    """Numerically stabilized exponential coefficients at angle ``theta``.

    Scalar input yields float fields; array input broadcasts elementwise.
    """
    theta = np.asarray(theta, float)
    a, b, c = _abc(theta)
    if theta.ndim == 0:
        return StabilizedCoeffs(float(a), float(b), float(c))
    return StabilizedCoeffs(a, b, c)


def _theta(phi):
    return np.sqrt(np.einsum("...i,...i->...", phi, phi))


def so3_exp(phi) -> np.ndarray:
    """Rodrigues' formula: ``I + A(t) hat(phi) + B(t) hat(phi)^2``."""
    return so3_exp_and_left_jacobian(phi)[0]


def left_jacobian(phi) -> np.ndarray:
    """Left Jacobian of SO(3): ``I + B(t) hat(phi) + C(t) hat(phi)^2``."""
    return so3_exp_and_left_jacobian(phi)[1]


def so3_exp_and_left_jacobian(phi) -> tuple[np.ndarray, np.ndarray]:
    """Rotation and left Jacobian together, sharing the coefficient work."""
    phi = np.asarray(phi, float)
    a, b, c = _abc(_theta(phi))
    k = hat(phi)
    k2 = k @ k
    eye = np.broadcast_to(np.eye(3), k.shape)
    rot = eye + a[..., None, None] * k + b[..., None, None] * k2
    jac = eye + b[..., None, None] * k + c[..., None, None] * k2
    return rot, jac


def se3_exp(u: LogParam) -> RigidTransform:
    """Closed-form SE(3) exponential: rotation by Rodrigues, translation
    induced by the same Lie-algebra element through the left Jacobian."""
    phi = np.asarray(u.phi, float)
    ups = np.asarray(u.upsilon, float)
    rot, jac = so3_exp_and_left_jacobian(phi)
    return RigidTransform(rotation=rot, translation=_matvec(jac, ups))


def rotation_action_grad(phi, x, jac=None, rotated=None) -> np.ndarray:
    """Derivative of ``so3_exp(phi) @ x`` with respect to ``phi`` (x held fixed).

    Uses the right-trivialized differential composed with the left Jacobian:
    ``d(R x)/dphi = -hat(R x) @ J(phi)``.
    """
    phi = np.asarray(phi, float)
    x = np.asarray(x, float)
    if jac is None or rotated is None:
        rot, jac = so3_exp_and_left_jacobian(phi)
        rotated = _matvec(rot, x)
    return -hat(rotated) @ jac


def translation_action_grad(phi, upsilon) -> np.ndarray:
    """Derivative of ``left_jacobian(phi) @ upsilon`` with respect to ``phi``
    (upsilon held fixed)."""
    phi = np.asarray(phi, float)
    ups = np.asarray(upsilon, float)
    theta = _theta(phi)
    _, b, c = _abc(theta)
    br, cr = _coeff_ratios(theta)
    cross = np.cross(phi, ups)
    dot = np.einsum("...i,...i->...", phi, ups)
    eye = np.eye(3)
    out = -b[..., None, None] * hat(ups)
    out = out + _outer(cross, br[..., None] * phi)
    out = out + c[..., None, None] * (
        dot[..., None, None] * eye + _outer(phi, ups) - 2.0 * _outer(ups, phi)
    )
    double_cross = np.cross(phi, cross)
    out = out + _outer(double_cross, cr[..., None] * phi)
    return out


@dataclass(frozen=True)
class SE3Derivatives:
    """Partials of ``se3_exp``: ``dr_dphi[..., i, j, k] = dR[i, j]/dphi[k]``,
    ``dp_dphi[..., i, k] = dp[i]/dphi[k]``, ``dp_dupsilon = J(phi)``."""

    dr_dphi: np.ndarray
    dp_dphi: np.ndarray
    dp_dupsilon: np.ndarray


def se3_exp_with_grads(u: LogParam) -> tuple[RigidTransform, SE3Derivatives]:
    """Exponential map together with its analytic derivative blocks."""
    phi = np.asarray(u.phi, float)
    ups = np.asarray(u.upsilon, float)
    rot, jac = so3_exp_and_left_jacobian(phi)
    # dR/dphi_k = hat(J e_k) @ R, stacked with the phi index last.
    dr = np.stack([hat(jac[..., :, k]) @ rot for k in range(3)], axis=-1)
    dp_dphi = translation_action_grad(phi, ups)
    transform = RigidTransform(rotation=rot, translation=_matvec(jac, ups))
    return transform, SE3Derivatives(dr_dphi=dr, dp_dphi=dp_dphi, dp_dupsilon=jac)


def is_rotation(r, tol: float = 1e-9) -> bool:
    """True when ``r`` is orthonormal with determinant +1 within ``tol``."""
    r = np.asarray(r, float)
    rtr = np.swapaxes(r, -1, -2) @ r
    ortho = np.linalg.norm(rtr - np.eye(3), axis=(-2, -1))
    det = np.linalg.det(r)
    return bool(np.all(ortho <= tol) and np.all(np.abs(det - 1.0) <= tol))
