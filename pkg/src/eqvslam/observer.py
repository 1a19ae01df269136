"""Equivariant landmark observer on the VSLAM group.

The observer state is a group element ``Xhat`` acting on a fixed origin
configuration; the estimate is ``action_state(Xhat, origin)``. Each step
integrates

    d/dt Xhat = Xhat * lift(estimate, U) - innovation * Xhat

with landmark innovations built from bearing errors and a barrier on the
estimated range, and a pose innovation chosen by weighted least squares so
that estimated landmarks move as little as possible.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence, Union

import numpy as np

from .geometry import Pose, RigidVelocity, angle_between, adjoint_se3, se3_exp, skew, so3_exp
from .group import (
    DomainError,
    GroupElement,
    TotalState,
    action_state,
    lift_body,
)

log = logging.getLogger(__name__)

TAU_ANTIPODE = 1e-9

VelocityInput = Union[RigidVelocity, Callable[[float], RigidVelocity]]
BearingInput = Union[np.ndarray, Callable[[float], np.ndarray]]


class BarrierViolation(DomainError):
    """Estimated range reached the barrier floor epsilon."""


class ExceptionSetError(DomainError):
    """Bearing error is antipodal to the origin bearing for some landmark."""

    def __init__(self, msg: str, indices: Sequence[int]):
        super().__init__(msg)
        self.indices = list(indices)


class NumericalError(RuntimeError):
    pass


@dataclass(frozen=True)
class ObserverConfig:
    k: float = 5.0
    alpha: float = 500.0
    kappa: float = 1.0
    r_lower: float = 0.1
    k0: float = 0.5
    dt: float = 0.033
    c_max: float = 1e8
    d_init: float = 10.0
    integrator: str = "euler"
    max_retries: int = 8
    tau_antipode: float = TAU_ANTIPODE

    def __post_init__(self):
        for name in ("k", "alpha", "kappa", "r_lower", "k0", "dt", "c_max", "d_init"):
            value = getattr(self, name)
            if not (np.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be positive, got {value!r}")
        if self.integrator not in ("euler", "rk4"):
            raise ValueError(f"unknown integrator {self.integrator!r}")

    @property
    def epsilon(self) -> float:
        return min(self.k0, 0.5) * self.r_lower

    @classmethod
    def simulation_preset(cls, **overrides) -> ObserverConfig:
        return cls(**{"k": 5.0, "alpha": 500.0, **overrides})

    @classmethod
    def experiment_preset(cls, **overrides) -> ObserverConfig:
        return cls(**{"k": 5.0, "alpha": 0.5, **overrides})


@dataclass(frozen=True)
class ObserverState:
    Xhat: GroupElement
    origin: TotalState
    ids: tuple = ()
    degenerate: bool = False

    def __post_init__(self):
        if self.Xhat.n != self.origin.n or len(self.ids) != self.origin.n:
            raise ValueError("observer state components disagree on landmark count")

    @property
    def n(self) -> int:
        return self.origin.n

    def index_of(self, landmark_id) -> int:
        try:
            return self.ids.index(landmark_id)
        except ValueError:
            raise KeyError(f"unknown landmark id {landmark_id!r}") from None


@dataclass(frozen=True)
class Innovation:
    """Pose innovation ``delta`` and per-landmark (Gamma vectors, gamma)."""

    delta: RigidVelocity
    Gamma: np.ndarray
    gamma: np.ndarray

    def Gamma_matrices(self) -> np.ndarray:
        return skew(self.Gamma)


@dataclass
class StepDiagnostics:
    delta_err: np.ndarray
    r_hat: np.ndarray
    barrier: np.ndarray
    degenerate: bool
    condition: float
    substeps: int = 1
    rejections: int = 0


@dataclass
class LandmarkDiagnostics:
    delta: np.ndarray
    r_hat: np.ndarray
    storage: np.ndarray | None = None
    range_ratio: np.ndarray | None = None
    bearing_error: np.ndarray = field(default_factory=lambda: np.zeros(0))


def new_state(origin_pose: Pose | None = None) -> ObserverState:
    """Empty observer with identity group element and the given origin pose."""
    pose = Pose.identity() if origin_pose is None else origin_pose
    return ObserverState(GroupElement.identity(0), TotalState(pose, np.zeros((0, 3))), ())


def origin_bearings(origin: TotalState) -> tuple[np.ndarray, np.ndarray]:
    """Origin bearings and ranges (y_ring, r_ring)."""
    q = origin.body_coordinates()
    r = np.linalg.norm(q, axis=1)
    return q / r[:, None], r


def output_error(Xhat: GroupElement, y: np.ndarray) -> np.ndarray:
    """``rho(Xhat^{-1}, y)``, i.e. each bearing rotated by ``Qhat_i``."""
    y = np.asarray(y, dtype=float).reshape(-1, 3)
    if y.shape[0] != Xhat.n:
        raise ValueError(f"expected {Xhat.n} bearings, got {y.shape[0]}")
    return np.einsum("nij,nj->ni", Xhat.Q, y)


def estimated_range(Xhat: GroupElement, origin: TotalState) -> np.ndarray:
    return np.linalg.norm(origin.body_coordinates(), axis=1) / Xhat.a


def state_estimate(state: ObserverState) -> TotalState:
    return action_state(state.Xhat, state.origin)


def barrier(r_hat, cfg: ObserverConfig):
    """Barrier on the estimated range; zero above ``r_lower``, unbounded at epsilon."""
    r = np.asarray(r_hat, dtype=float)
    eps, rl = cfg.epsilon, cfg.r_lower
    if np.any(~(r > eps)):
        raise BarrierViolation(f"estimated range {np.min(r):.6g} at or below epsilon {eps:.6g}")
    inside = r < rl
    val = np.where(inside, (r - rl) ** 2 / ((rl - eps) ** 2 * (np.where(inside, r, rl) - eps)), 0.0)
    return val if val.ndim else float(val)


def barrier_derivative(r_hat, cfg: ObserverConfig):
    r = np.asarray(r_hat, dtype=float)
    eps, rl = cfg.epsilon, cfg.r_lower
    inside = r < rl
    rs = np.where(inside, r, rl)
    num = 2 * (rs - rl) * (rs - eps) - (rs - rl) ** 2
    val = np.where(inside, num / ((rl - eps) ** 2 * (rs - eps) ** 2), 0.0)
    return val if val.ndim else float(val)


def _check_antipode(c: np.ndarray, tau: float) -> None:
    bad = np.flatnonzero(1.0 + c <= tau)
    if bad.size:
        raise ExceptionSetError(f"antipodal bearing error for landmarks {bad.tolist()}", bad)


def landmark_innovation(delta, y_ring, r_hat, Q_hat, v, cfg: ObserverConfig):
    """Bearing and depth innovations for each landmark.

    Returns ``(Gamma, gamma)`` where ``Gamma[i]`` is the vector of the skew
    matrix ``Gamma_i``. Arrays are (n, 3), (n,) and broadcast over landmarks.
    """
    delta = np.asarray(delta, dtype=float).reshape(-1, 3)
    y_ring = np.asarray(y_ring, dtype=float).reshape(-1, 3)
    r_hat = np.asarray(r_hat, dtype=float).reshape(-1)
    c = np.einsum("ni,ni->n", delta, y_ring)
    _check_antipode(c, cfg.tau_antipode)
    qv = np.einsum("nij,j->ni", np.asarray(Q_hat).reshape(-1, 3, 3), np.asarray(v, dtype=float))
    d_qv = np.einsum("ni,ni->n", delta, qv)
    y_qv = np.einsum("ni,ni->n", y_ring, qv)
    sum_qv = d_qv + y_qv
    opc = 1.0 + c

    coef = d_qv / (2 * r_hat) - sum_qv / (r_hat * opc) - cfg.k
    Gamma = coef[:, None] * np.cross(delta, y_ring)

    # y_ring^T (I - delta delta^T) Q v
    y_proj_qv = y_qv - c * d_qv
    beta = barrier(r_hat, cfg)
    gamma = (
        cfg.alpha / r_hat**2 * ((1 - c) / (2 * opc) * d_qv - y_proj_qv / opc**2)
        + (y_qv - d_qv) / r_hat
        + cfg.alpha / r_hat * beta
    )
    return Gamma, gamma


def normal_equations(q_hat, b, kappa):
    """Assemble the 6x6 normal matrix and right-hand side for the pose WLS.

    Minimises ``sum_i kappa_i |q_i x omega - v + b_i|^2`` over (omega, v).
    """
    q_hat = np.asarray(q_hat, dtype=float).reshape(-1, 3)
    b = np.asarray(b, dtype=float).reshape(-1, 3)
    kappa = np.broadcast_to(np.asarray(kappa, dtype=float), (q_hat.shape[0],))
    qx = skew(q_hat)
    k3 = kappa[:, None, None]
    N = np.zeros((6, 6))
    N[:3, :3] = -(k3 * qx @ qx).sum(axis=0)
    N[:3, 3:] = (k3 * qx).sum(axis=0)
    N[3:, :3] = -N[:3, 3:]
    N[3:, 3:] = kappa.sum() * np.eye(3)
    rhs = np.concatenate([
        (kappa[:, None] * np.cross(q_hat, b)).sum(axis=0),
        (kappa[:, None] * b).sum(axis=0),
    ])
    return N, rhs


def landmark_drift_target(q_hat, Gamma, gamma, Q_hat):
    """Per-landmark ``gamma_i q_i + Ad_{Q_i^T}(Gamma_i) q_i``."""
    gvec = np.einsum("nji,nj->ni", np.asarray(Q_hat).reshape(-1, 3, 3), Gamma)
    return gamma[:, None] * q_hat + np.cross(gvec, q_hat)


def pose_innovation(Xhat: GroupElement, origin: TotalState, Gamma, gamma,
                    cfg: ObserverConfig, was_degenerate: bool = False):
    """Pose innovation minimising weighted squared landmark-estimate velocity.

    Returns ``(delta, degenerate, condition)``. When the normal matrix is
    ill conditioned (always for fewer than two landmarks) delta is zero.
    Leaving the degenerate regime needs the condition number to drop below
    half of ``c_max``.
    """
    if Xhat.n == 0:
        return RigidVelocity.zero(), True, float("inf")
    q_hat = np.einsum("nji,nj->ni", Xhat.Q, origin.body_coordinates()) / Xhat.a[:, None]
    b = landmark_drift_target(q_hat, Gamma, gamma, Xhat.Q)
    N, rhs = normal_equations(q_hat, b, cfg.kappa)
    if not (np.all(np.isfinite(N)) and np.all(np.isfinite(rhs))):
        raise NumericalError("non-finite pose normal equations")
    try:
        cond = float(np.linalg.cond(N))
    except np.linalg.LinAlgError:
        cond = float("inf")
    limit = cfg.c_max / 2 if was_degenerate else cfg.c_max
    if not np.isfinite(cond) or cond > limit:
        return RigidVelocity.zero(), True, cond
    z = np.linalg.solve(N, rhs)
    return adjoint_se3(Xhat.A, RigidVelocity(z[:3], z[3:])), False, cond


def _at(value, s):
    return value(s) if callable(value) else value


def _evaluate(Xhat: GroupElement, origin: TotalState, u: RigidVelocity, y, cfg: ObserverConfig,
              visible, was_degenerate: bool):
    """Lift, innovation and diagnostics at one point of the trajectory."""
    n = Xhat.n
    q_ring = origin.body_coordinates()
    r_ring = np.linalg.norm(q_ring, axis=1)
    y_ring = q_ring / r_ring[:, None]
    q_hat = np.einsum("nji,nj->ni", Xhat.Q, q_ring) / Xhat.a[:, None]
    W, w = lift_body(q_hat, u)
    r_hat = r_ring / Xhat.a
    Gamma = np.zeros((n, 3))
    gamma = np.zeros(n)
    delta = np.full((n, 3), np.nan)
    if n:
        y = np.asarray(y, dtype=float).reshape(-1, 3)
        if y.shape[0] != n:
            raise ValueError(f"expected {n} bearings, got {y.shape[0]}")
        vis = np.ones(n, bool) if visible is None else np.asarray(visible, bool)
        if not np.all(np.isfinite(y[vis])):
            raise NumericalError("non-finite bearing measurement")
        if np.any(vis):
            delta[vis] = np.einsum("nij,nj->ni", Xhat.Q[vis], y[vis])
            Gamma[vis], gamma[vis] = landmark_innovation(
                delta[vis], y_ring[vis], r_hat[vis], Xhat.Q[vis], u.v, cfg)
        if np.any(~vis):
            # Unobserved landmarks still need the barrier to hold.
            barrier(r_hat[~vis], cfg)
    d, degenerate, cond = pose_innovation(Xhat, origin, Gamma, gamma, cfg, was_degenerate)
    innov = Innovation(d, Gamma, gamma)
    return W, w, innov, delta, r_hat, degenerate, cond


def _euler(Xhat, origin, u_in, y_in, cfg, dt, visible, was_degenerate):
    u = _at(u_in, 0.0)
    W, w, innov, delta, r_hat, degen, cond = _evaluate(
        Xhat, origin, u, _at(y_in, 0.0), cfg, visible, was_degenerate)
    A = se3_exp(innov.delta, -dt) @ Xhat.A @ se3_exp(u, dt)
    Q = so3_exp(innov.Gamma, -dt) @ Xhat.Q @ so3_exp(W, dt)
    a = Xhat.a * np.exp(dt * (w - innov.gamma))
    return GroupElement(A, Q, a), (innov, delta, r_hat, degen, cond)


def _tangent(Xhat, origin, u, y, cfg, visible, was_degenerate):
    W, w, innov, delta, r_hat, degen, cond = _evaluate(
        Xhat, origin, u, y, cfg, visible, was_degenerate)
    R, x = Xhat.A.R, Xhat.A.x
    wd, vd = innov.delta.omega, innov.delta.v
    dR = R @ skew(u.omega) - skew(wd) @ R
    dx = R @ u.v - np.cross(wd, x) - vd
    dQ = Xhat.Q @ skew(W) - skew(innov.Gamma) @ Xhat.Q
    da = Xhat.a * (w - innov.gamma)
    return (dR, dx, dQ, da), (innov, delta, r_hat, degen, cond)


def _shift(Xhat: GroupElement, tangent, h: float) -> GroupElement:
    dR, dx, dQ, da = tangent
    return GroupElement(Pose(Xhat.A.R + h * dR, Xhat.A.x + h * dx), Xhat.Q + h * dQ, Xhat.a + h * da)


def _rk4(Xhat, origin, u_in, y_in, cfg, dt, visible, was_degenerate):
    """Classical RK4 in the ambient matrix space followed by projection to the group."""
    k1, info = _tangent(Xhat, origin, _at(u_in, 0.0), _at(y_in, 0.0), cfg, visible, was_degenerate)
    half = dt / 2
    k2, _ = _tangent(_shift(Xhat, k1, half), origin, _at(u_in, half), _at(y_in, half),
                     cfg, visible, info[3])
    k3, _ = _tangent(_shift(Xhat, k2, half), origin, _at(u_in, half), _at(y_in, half),
                     cfg, visible, info[3])
    k4, _ = _tangent(_shift(Xhat, k3, dt), origin, _at(u_in, dt), _at(y_in, dt),
                     cfg, visible, info[3])
    combo = tuple((a + 2 * b + 2 * c + d) / 6 for a, b, c, d in zip(k1, k2, k3, k4))
    X1 = _shift(Xhat, combo, dt)
    if np.any(~(X1.a > 0)):
        raise BarrierViolation("landmark scale left the positive reals")
    return X1, info


def _offset(value, s0):
    if callable(value):
        return lambda s: value(s0 + s)
    return value


def _advance(state: ObserverState, u, y, cfg, dt, visible, retries_left, stats):
    step = _rk4 if cfg.integrator == "rk4" else _euler
    try:
        # Overflow in a trial step shows up as a non-finite range and is rejected below.
        with np.errstate(all="ignore"):
            X1, info = step(state.Xhat, state.origin, u, y, cfg, dt, visible, state.degenerate)
            r_new = estimated_range(X1, state.origin)
        if X1.n and np.any(~(r_new > cfg.epsilon)):
            raise BarrierViolation(f"step would put estimated range at {r_new.min():.6g}")
    except BarrierViolation:
        if retries_left <= 0:
            raise
        stats["rejections"] += 1
        h = dt / 2
        s1, info = _advance(state, u, y, cfg, h, visible, retries_left - 1, stats)
        s2, _ = _advance(s1, _offset(u, h), _offset(y, h), cfg, h, visible, retries_left - 1, stats)
        return s2, info
    stats["substeps"] += 1
    X1 = X1.orthonormalized()
    return replace(state, Xhat=X1, degenerate=info[3]), info


def observer_step(state: ObserverState, u: VelocityInput, y: BearingInput, cfg: ObserverConfig,
                  dt: float | None = None, visible=None):
    """Advance the observer by one sample interval.

    ``u`` and ``y`` may be constant values or callables of the time offset
    within the step (the RK4 integrator samples them at 0, dt/2 and dt).
    ``visible`` masks landmarks without a measurement this step; they get
    zero innovation. A step that would push any estimated range to epsilon
    is rejected and redone as two half steps, down to ``cfg.max_retries``
    levels of halving.

    Returns ``(new_state, innovation, diagnostics)``; the innovation is the
    one evaluated at the start of the interval.
    """
    dt = cfg.dt if dt is None else dt
    u0 = _at(u, 0.0)
    if not (np.all(np.isfinite(u0.omega)) and np.all(np.isfinite(u0.v))):
        raise NumericalError("non-finite velocity input")
    stats = {"substeps": 0, "rejections": 0}
    try:
        new, info = _advance(state, u, y, cfg, dt, visible, cfg.max_retries, stats)
    except BarrierViolation as exc:
        raise NumericalError(f"barrier violated after {cfg.max_retries} step halvings: {exc}") from exc
    innov, delta, r_hat, degen, cond = info
    if not np.all(np.isfinite(new.Xhat.a)) or not np.all(np.isfinite(new.Xhat.A.x)):
        raise NumericalError("observer state became non-finite")
    if stats["rejections"]:
        log.debug("step rejected %d times, used %d substeps", stats["rejections"], stats["substeps"])
    diag = StepDiagnostics(
        delta_err=delta, r_hat=r_hat, barrier=barrier(r_hat, cfg) if len(r_hat) else r_hat,
        degenerate=degen, condition=cond, substeps=stats["substeps"], rejections=stats["rejections"])
    return new, innov, diag


def storage_forms(delta, y_ring, r_hat, r, alpha):
    """Chordal and cosine forms of the per-landmark storage function.

    With unit vectors ``|y - d|^2 = 2 - 2c`` and ``4 - |y - d|^2 = 2 + 2c``,
    so both forms equal ``(r/2)(1 - c)/(1 + c) + (r - r_hat)^2 / (2 alpha)``.
    """
    delta = np.asarray(delta, dtype=float).reshape(-1, 3)
    y_ring = np.asarray(y_ring, dtype=float).reshape(-1, 3)
    r_hat = np.asarray(r_hat, dtype=float).reshape(-1)
    r = np.asarray(r, dtype=float).reshape(-1)
    diff2 = np.sum((y_ring - delta) ** 2, axis=1)
    c = np.einsum("ni,ni->n", y_ring, delta)
    with np.errstate(divide="ignore"):
        chordal = r / 2 * diff2 / (4 - diff2) + r**2 / (2 * alpha) * (1 - r_hat / r) ** 2
        cosine = r / 2 * (1 - c) / (1 + c) + (r - r_hat) ** 2 / (2 * alpha)
    return chordal, cosine


def storage(delta, y_ring, r_hat, r, alpha, tau: float = TAU_ANTIPODE) -> np.ndarray:
    """Per-landmark storage; raises on the antipodal exception set."""
    y_ring = np.asarray(y_ring, dtype=float).reshape(-1, 3)
    c = np.einsum("ni,ni->n", y_ring, np.asarray(delta, dtype=float).reshape(-1, 3))
    _check_antipode(c, tau)
    return storage_forms(delta, y_ring, r_hat, r, alpha)[1]


def storage_rate(delta, y_ring, r_hat, r, cfg: ObserverConfig) -> np.ndarray:
    """Closed-form time derivative of the storage along the observer flow."""
    c = np.einsum("ni,ni->n", np.asarray(y_ring).reshape(-1, 3), np.asarray(delta).reshape(-1, 3))
    r_hat = np.asarray(r_hat, dtype=float)
    r = np.asarray(r, dtype=float)
    return -cfg.k * r * (1 - c) / (1 + c) + (r_hat - r) * barrier(r_hat, cfg)


def landmark_diagnostics(state: ObserverState, y, cfg: ObserverConfig,
                         true_ranges=None) -> LandmarkDiagnostics:
    y_ring, _ = origin_bearings(state.origin)
    delta = output_error(state.Xhat, y)
    r_hat = estimated_range(state.Xhat, state.origin)
    out = LandmarkDiagnostics(delta=delta, r_hat=r_hat, bearing_error=angle_between(delta, y_ring))
    if true_ranges is not None:
        out.storage = storage(delta, y_ring, r_hat, true_ranges, cfg.alpha, cfg.tau_antipode)
        out.range_ratio = r_hat / np.asarray(true_ranges)
    return out


def add_landmark(state: ObserverState, y_first, depth: float, landmark_id,
                 cfg: ObserverConfig | None = None) -> ObserverState:
    """Append a landmark whose estimate has bearing ``y_first`` at range ``depth``."""
    r_lower = cfg.r_lower if cfg is not None else 0.0
    if not depth >= r_lower or depth <= 0:
        raise ValueError(f"initial depth {depth!r} below r_lower {r_lower}")
    if landmark_id in state.ids:
        raise KeyError(f"duplicate landmark id {landmark_id!r}")
    y = np.asarray(y_first, dtype=float).reshape(3)
    y = y / np.linalg.norm(y)
    P0 = state.origin.P
    p_new = P0.x + depth * (P0.R @ y)
    X = state.Xhat
    Xhat = GroupElement(X.A, np.concatenate([X.Q, np.eye(3)[None]]), np.append(X.a, 1.0))
    origin = TotalState(P0, np.vstack([state.origin.p, p_new]))
    return ObserverState(Xhat, origin, state.ids + (landmark_id,), state.degenerate)


def remove_landmark(state: ObserverState, landmark_id) -> ObserverState:
    i = state.index_of(landmark_id)
    keep = np.arange(state.n) != i
    X = state.Xhat
    return ObserverState(
        GroupElement(X.A, X.Q[keep], X.a[keep]),
        TotalState(state.origin.P, state.origin.p[keep]),
        tuple(lid for j, lid in enumerate(state.ids) if j != i),
        state.degenerate,
    )


def pe_metric(times, bearings, velocities, window: float | None = None) -> float:
    """Excitation level of ``|y^x y^x V|`` averaged over time.

    With ``window`` given, returns the smallest average over all windows of
    that length contained in the samples; otherwise averages over the whole
    span.
    """
    t = np.asarray(times, dtype=float)
    if t.size < 2:
        raise ValueError("need at least two samples")
    y = np.asarray(bearings, dtype=float).reshape(-1, 3)
    v = np.asarray(velocities, dtype=float).reshape(-1, 3)
    proj = v - y * np.einsum("ni,ni->n", y, v)[:, None]
    g = np.linalg.norm(proj, axis=1)
    cum = np.concatenate([[0.0], np.cumsum(0.5 * (g[1:] + g[:-1]) * np.diff(t))])
    span = t[-1] - t[0]
    if window is None or window >= span:
        if window is not None and window > span + 1e-12:
            raise ValueError("samples span less than the window")
        return float(cum[-1] / span)
    ends = np.searchsorted(t, t + window - 1e-12)
    ok = ends < t.size
    starts = np.flatnonzero(ok)
    vals = (cum[ends[ok]] - cum[starts]) / (t[ends[ok]] - t[starts])
    return float(vals.min())


class Observer:
    """Stateful convenience wrapper around the functional observer API."""

    def __init__(self, cfg: ObserverConfig | None = None, origin_pose: Pose | None = None):
        self.cfg = cfg or ObserverConfig()
        self.state = new_state(origin_pose)
        self.last_innovation: Innovation | None = None
        self.last_diagnostics: StepDiagnostics | None = None

    @property
    def ids(self):
        return self.state.ids

    def add(self, landmark_id, y_first, depth: float | None = None) -> None:
        d = self.cfg.d_init if depth is None else depth
        self.state = add_landmark(self.state, y_first, d, landmark_id, self.cfg)

    def remove(self, landmark_id) -> None:
        self.state = remove_landmark(self.state, landmark_id)

    def step(self, u: VelocityInput, y: BearingInput, dt: float | None = None, visible=None):
        self.state, self.last_innovation, self.last_diagnostics = observer_step(
            self.state, u, y, self.cfg, dt, visible)
        return self.last_diagnostics

    def estimate(self) -> TotalState:
        return state_estimate(self.state)
