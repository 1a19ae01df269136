"""The VSLAM symmetry group SE(3) x (SO(3) x MR(1))^n and its actions.

Landmark data is stored as stacked arrays: rotations ``Q`` with shape
(n, 3, 3), scales ``a`` with shape (n,), positions ``p`` with shape (n, 3).
Antisymmetric algebra components are stored as their (n, 3) vectors.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import (
    GeometryError,
    Pose,
    RigidVelocity,
    TOL_ORTH,
    is_rotation,
    orthonormalize,
    se3_exp,
    skew,
    so3_exp,
)

R_MIN = 1e-6


class DomainError(ValueError):
    """Input lies outside the total space (e.g. a landmark at the robot)."""


@dataclass(frozen=True)
class GroupElement:
    A: Pose
    Q: np.ndarray
    a: np.ndarray

    def __post_init__(self):
        q = np.asarray(self.Q, dtype=float).reshape(-1, 3, 3)
        a = np.asarray(self.a, dtype=float).reshape(-1)
        if q.shape[0] != a.shape[0]:
            raise ValueError("Q and a must have the same landmark count")
        object.__setattr__(self, "Q", q)
        object.__setattr__(self, "a", a)

    @property
    def n(self) -> int:
        return self.a.shape[0]

    @classmethod
    def identity(cls, n: int) -> GroupElement:
        if n < 0:
            raise ValueError("n must be non-negative")
        return cls(Pose.identity(), np.tile(np.eye(3), (n, 1, 1)), np.ones(n))

    def __matmul__(self, other: GroupElement) -> GroupElement:
        return multiply(self, other)

    def inverse(self) -> GroupElement:
        return inverse(self)

    def validate(self, tol: float = TOL_ORTH) -> None:
        self.A.validate(tol)
        if self.n and not is_rotation(self.Q, tol):
            raise GeometryError("landmark rotation is not in SO(3)")
        if np.any(~(self.a > 0)):
            raise GeometryError("landmark scale must be positive")

    def orthonormalized(self) -> GroupElement:
        q = orthonormalize(self.Q) if self.n else self.Q
        return GroupElement(self.A.orthonormalized(), q, self.a)


@dataclass(frozen=True)
class AlgebraElement:
    """Element of the Lie algebra; ``W[i]`` is the vector of the skew ``W_i``."""

    U: RigidVelocity
    W: np.ndarray
    w: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "W", np.asarray(self.W, dtype=float).reshape(-1, 3))
        object.__setattr__(self, "w", np.asarray(self.w, dtype=float).reshape(-1))

    @property
    def n(self) -> int:
        return self.w.shape[0]

    def W_matrices(self) -> np.ndarray:
        return skew(self.W)


@dataclass(frozen=True)
class TotalState:
    """Robot pose ``P`` and landmark positions ``p`` (n, 3) in a common frame."""

    P: Pose
    p: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "p", np.asarray(self.p, dtype=float).reshape(-1, 3))

    @property
    def n(self) -> int:
        return self.p.shape[0]

    def body_coordinates(self) -> np.ndarray:
        """Ego-centric landmark coordinates ``R_P^T (p_i - x_P)``."""
        return (self.p - self.P.x) @ self.P.R

    def ranges(self) -> np.ndarray:
        return np.linalg.norm(self.p - self.P.x, axis=1)

    def validate(self, r_min: float = R_MIN) -> None:
        self.P.validate()
        if self.n and self.ranges().min() <= r_min:
            raise DomainError("landmark co-located with the robot")


def _check_n(*items) -> int:
    counts = {item.n for item in items}
    if len(counts) != 1:
        raise ValueError(f"mismatched landmark counts: {sorted(counts)}")
    return counts.pop()


def group_identity(n: int) -> GroupElement:
    return GroupElement.identity(n)


def multiply(x1: GroupElement, x2: GroupElement) -> GroupElement:
    """Componentwise product ``(A1 A2, (Q1 Q2, a1 a2)_i)``."""
    _check_n(x1, x2)
    return GroupElement(x1.A @ x2.A, x1.Q @ x2.Q, x1.a * x2.a)


def inverse(x: GroupElement) -> GroupElement:
    return GroupElement(x.A.inverse(), np.swapaxes(x.Q, -1, -2), 1.0 / x.a)


def action_state(x: GroupElement, xi: TotalState) -> TotalState:
    """Right action on the total space.

    The robot pose becomes ``P A``; each landmark's ego-centric coordinates
    are rotated by ``Q_i^T`` and scaled by ``1/a_i``.
    """
    _check_n(x, xi)
    pa = xi.P @ x.A
    q = xi.body_coordinates()
    rotated = np.einsum("nji,nj->ni", x.Q, q) / x.a[:, None]
    return TotalState(pa, rotated @ pa.R.T + pa.x)


def action_output(x: GroupElement, y: np.ndarray) -> np.ndarray:
    """Right action on bearings: ``y_i -> Q_i^T y_i``."""
    y = np.asarray(y, dtype=float).reshape(-1, 3)
    if y.shape[0] != x.n:
        raise ValueError(f"mismatched landmark counts: {x.n} vs {y.shape[0]}")
    return np.einsum("nji,nj->ni", x.Q, y)


def output(xi: TotalState, r_min: float = R_MIN) -> np.ndarray:
    """Body-frame unit bearings to every landmark, shape (n, 3)."""
    q = xi.body_coordinates()
    r = np.linalg.norm(q, axis=1)
    if xi.n and r.min() <= r_min:
        raise DomainError(f"landmark {int(r.argmin())} is co-located with the robot")
    return q / r[:, None]


def lift_body(q: np.ndarray, u: RigidVelocity, r_min: float = R_MIN):
    """Lift components ``(W_i, w_i)`` given ego-centric coordinates ``q``.

    Returns the (n, 3) rotation rates and (n,) scale rates.
    """
    q = np.asarray(q, dtype=float).reshape(-1, 3)
    r2 = np.einsum("ni,ni->n", q, q)
    if q.shape[0] and r2.min() <= r_min**2:
        raise DomainError("landmark too close to the robot to lift velocity")
    big_w = u.omega + np.cross(q, u.v) / r2[:, None]
    small_w = q @ u.v / r2
    return big_w, small_w


def lift(xi: TotalState, u: RigidVelocity, r_min: float = R_MIN) -> AlgebraElement:
    big_w, small_w = lift_body(xi.body_coordinates(), u, r_min)
    return AlgebraElement(u, big_w, small_w)


def group_exp(lam: AlgebraElement, s: float = 1.0) -> GroupElement:
    """Componentwise exponential of ``s * lam``."""
    return GroupElement(se3_exp(lam.U, s), so3_exp(lam.W, s), np.exp(s * lam.w))


def kinematics(xi: TotalState, u: RigidVelocity):
    """Tangent of the true system ``(P U, 0)`` as (dR, dx, dp)."""
    return xi.P.R @ skew(u.omega), xi.P.R @ u.v, np.zeros_like(xi.p)


def lift_condition_check(xi: TotalState, u: RigidVelocity, h_fd: float = 1e-5,
                         return_parts: bool = False):
    """Max defect between the differentiated action of the lift and the kinematics.

    Uses a central difference of ``s -> action_state(exp(s * lift), xi)``.
    """
    if h_fd <= 0:
        raise ValueError("h_fd must be positive")
    lam = lift(xi, u)
    plus = action_state(group_exp(lam, h_fd), xi)
    minus = action_state(group_exp(lam, -h_fd), xi)
    d_r = (plus.P.R - minus.P.R) / (2 * h_fd)
    d_x = (plus.P.x - minus.P.x) / (2 * h_fd)
    d_p = (plus.p - minus.p) / (2 * h_fd)
    f_r, f_x, f_p = kinematics(xi, u)
    parts = {
        "rotation": float(np.abs(d_r - f_r).max()),
        "translation": float(np.abs(d_x - f_x).max()),
        "landmarks": float(np.abs(d_p - f_p).max()) if xi.n else 0.0,
    }
    defect = max(parts.values())
    return (defect, parts) if return_parts else defect
