"""Rigid-body primitives: skew maps, rotations, poses, exponentials.

Vectors are numpy arrays of shape (3,). Most functions also accept stacks
of shape (n, 3) / (n, 3, 3) so that per-landmark work stays vectorised.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

TOL_ORTH = 1e-9
TOL_UNIT = 1e-9
SMALL_ANGLE = 1e-6


class GeometryError(ValueError):
    pass


def skew(omega: np.ndarray) -> np.ndarray:
    """Matrix ``S`` with ``S @ v == cross(omega, v)``. Works on (..., 3)."""
    omega = np.asarray(omega, dtype=float)
    out = np.zeros(omega.shape[:-1] + (3, 3))
    out[..., 0, 1] = -omega[..., 2]
    out[..., 0, 2] = omega[..., 1]
    out[..., 1, 0] = omega[..., 2]
    out[..., 1, 2] = -omega[..., 0]
    out[..., 2, 0] = -omega[..., 1]
    out[..., 2, 1] = omega[..., 0]
    return out


def unskew(m: np.ndarray, tol: float = TOL_ORTH) -> np.ndarray:
    m = np.asarray(m, dtype=float)
    asym = np.abs(m + np.swapaxes(m, -1, -2)).max() if m.size else 0.0
    if asym > tol:
        raise GeometryError(f"matrix is not antisymmetric (|M + M^T| = {asym:.3g})")
    return np.stack([m[..., 2, 1], m[..., 0, 2], m[..., 1, 0]], axis=-1)


def projector(y: np.ndarray) -> np.ndarray:
    """Orthogonal projector ``I - y y^T`` onto the plane normal to unit ``y``."""
    y = np.asarray(y, dtype=float)
    return np.eye(3) - y[..., :, None] * y[..., None, :]


def so3_exp(omega: np.ndarray, dt: float = 1.0) -> np.ndarray:
    """Rodrigues exponential of ``dt * skew(omega)``; vectorised over (..., 3)."""
    phi = np.asarray(omega, dtype=float) * dt
    theta = np.linalg.norm(phi, axis=-1)[..., None, None]
    k = skew(phi)
    k2 = k @ k
    small = theta < SMALL_ANGLE
    # Taylor branch below the small-angle threshold avoids 0/0.
    safe = np.where(small, 1.0, theta)
    a = np.where(small, 1.0 - theta**2 / 6.0, np.sin(safe) / safe)
    b = np.where(small, 0.5 - theta**2 / 24.0, (1.0 - np.cos(safe)) / safe**2)
    return np.eye(3) + a * k + b * k2


def so3_left_jacobian(phi: np.ndarray) -> np.ndarray:
    phi = np.asarray(phi, dtype=float)
    theta = np.linalg.norm(phi, axis=-1)[..., None, None]
    k = skew(phi)
    small = theta < SMALL_ANGLE
    safe = np.where(small, 1.0, theta)
    b = np.where(small, 0.5 - theta**2 / 24.0, (1.0 - np.cos(safe)) / safe**2)
    c = np.where(small, 1.0 / 6.0 - theta**2 / 120.0, (safe - np.sin(safe)) / safe**3)
    return np.eye(3) + b * k + c * (k @ k)


def orthonormalize(r: np.ndarray) -> np.ndarray:
    """Nearest rotation (polar factor) of a 3x3 matrix or a stack of them."""
    u, _, vt = np.linalg.svd(r)
    d = np.sign(np.linalg.det(u @ vt))
    u = u.copy()
    u[..., :, 2] *= d[..., None]
    return u @ vt


def is_rotation(r: np.ndarray, tol: float = TOL_ORTH) -> bool:
    r = np.asarray(r, dtype=float)
    if r.shape[-2:] != (3, 3) or not np.all(np.isfinite(r)):
        return False
    eye_err = np.abs(r @ np.swapaxes(r, -1, -2) - np.eye(3)).max()
    det_err = np.abs(np.linalg.det(r) - 1.0).max() if r.size else 0.0
    return bool(eye_err <= tol and det_err <= tol)


def adjoint_rot(q: np.ndarray, w: np.ndarray) -> np.ndarray:
    """``Q W Q^T`` for a rotation ``Q`` and antisymmetric ``W``."""
    return q @ w @ np.swapaxes(q, -1, -2)


def normalize(v: np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


def angle_between(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Angle between paired vectors along the last axis, accurate near 0 and pi."""
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    return np.arctan2(np.linalg.norm(np.cross(a, b), axis=-1), np.sum(a * b, axis=-1))


@dataclass(frozen=True)
class RigidVelocity:
    """Body-frame velocity: angular rate ``omega`` (rad/s), linear ``v`` (m/s)."""

    omega: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "omega", np.asarray(self.omega, dtype=float).reshape(3))
        object.__setattr__(self, "v", np.asarray(self.v, dtype=float).reshape(3))

    @classmethod
    def zero(cls) -> RigidVelocity:
        return cls(np.zeros(3), np.zeros(3))

    @classmethod
    def from_vector(cls, vec) -> RigidVelocity:
        vec = np.asarray(vec, dtype=float)
        return cls(vec[:3], vec[3:6])

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.omega, self.v])

    def as_matrix(self) -> np.ndarray:
        m = np.zeros((4, 4))
        m[:3, :3] = skew(self.omega)
        m[:3, 3] = self.v
        return m

    def __mul__(self, s: float) -> RigidVelocity:
        return RigidVelocity(self.omega * s, self.v * s)

    __rmul__ = __mul__

    def __add__(self, other: RigidVelocity) -> RigidVelocity:
        return RigidVelocity(self.omega + other.omega, self.v + other.v)


@dataclass(frozen=True)
class Pose:
    """Element of SE(3) with rotation ``R`` and translation ``x``.

    Construction does not validate; call :meth:`validate` where the invariant
    matters (integrator stages legitimately hold slightly non-orthonormal R).
    """

    R: np.ndarray
    x: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "R", np.asarray(self.R, dtype=float).reshape(3, 3))
        object.__setattr__(self, "x", np.asarray(self.x, dtype=float).reshape(3))

    @classmethod
    def identity(cls) -> Pose:
        return cls(np.eye(3), np.zeros(3))

    @classmethod
    def from_matrix(cls, m) -> Pose:
        m = np.asarray(m, dtype=float)
        return cls(m[:3, :3], m[:3, 3])

    def as_matrix(self) -> np.ndarray:
        m = np.eye(4)
        m[:3, :3] = self.R
        m[:3, 3] = self.x
        return m

    def __matmul__(self, other: Pose) -> Pose:
        return Pose(self.R @ other.R, self.R @ other.x + self.x)

    def inverse(self) -> Pose:
        return Pose(self.R.T, -self.R.T @ self.x)

    def apply(self, p: np.ndarray) -> np.ndarray:
        """Map point(s) of shape (..., 3) through the pose."""
        return np.asarray(p) @ self.R.T + self.x

    def orthonormalized(self) -> Pose:
        return Pose(orthonormalize(self.R), self.x)

    def validate(self, tol: float = TOL_ORTH) -> None:
        if not is_rotation(self.R, tol):
            raise GeometryError("pose rotation is not in SO(3)")
        if not np.all(np.isfinite(self.x)):
            raise GeometryError("pose translation is not finite")


def se3_exp(u: RigidVelocity, dt: float = 1.0) -> Pose:
    phi = u.omega * dt
    return Pose(so3_exp(phi), so3_left_jacobian(phi) @ (u.v * dt))


def adjoint_se3(p: Pose, u: RigidVelocity) -> RigidVelocity:
    """``P U P^{-1}`` expressed as (omega, v)."""
    w = p.R @ u.omega
    return RigidVelocity(w, p.R @ u.v + np.cross(p.x, w))
