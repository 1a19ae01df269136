"""Empirical basin-of-attraction sweeps over observer gains.

An initial condition assigns every landmark an origin bearing and a range
ratio; the observer starts at the identity group element, so the initial
bearing error of landmark i is its first measurement. Bearing and range
errors evolve independently of the pose innovation and of each other, so
the sweep integrates only the landmark part ``(Qhat_i, ahat_i)`` of the
observer. That part is stiff near the exception set and near the barrier,
hence an implicit BDF solver with a block-diagonal Jacobian pattern.
"""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.integrate import solve_ivp
from scipy.sparse import block_diag

from .geometry import angle_between, normalize, skew
from .group import DomainError, TotalState, lift_body, output
from .observer import ObserverConfig, landmark_innovation
from .simulation import ScenarioConfig, true_pose_at

log = logging.getLogger(__name__)

_BLOCK = 10  # 9 rotation entries and one log-scale per landmark


@dataclass(frozen=True)
class SweepSpec:
    """Gain grid, sampling of initial conditions and the convergence test.

    ``horizon`` defaults to the scenario duration. A condition counts as
    converged when every landmark ends within ``bearing_tol`` rad and
    ``range_tol`` relative range error.
    """

    k: tuple = (1.0, 5.0, 25.0)
    alpha: tuple = (500.0,)
    samples: int = 200
    margin: float = 0.05
    ratio_range: tuple = (0.5, 2.0)
    bearing_tol: float = 0.01
    range_tol: float = 0.02
    seed: int = 1
    horizon: float | None = None
    batch: int = 20
    rtol: float = 1e-7
    atol: float = 1e-9
    workers: int = 1

    def __post_init__(self):
        if self.samples < 0 or self.batch < 1 or self.workers < 1:
            raise ValueError("samples, batch and workers must be positive")
        lo, hi = self.ratio_range
        if not 0 < lo <= hi:
            raise ValueError("ratio_range must satisfy 0 < low <= high")
        if self.margin < 0:
            raise ValueError("margin must be non-negative")


@dataclass(frozen=True)
class InitialCondition:
    """Origin bearings (n, 3) and range ratios (n,) for every landmark."""

    bearings: np.ndarray
    ratios: np.ndarray

    def margin(self, y0: np.ndarray) -> float:
        """Smallest ``1 + delta^T y_ring`` over landmarks (distance from the exception set)."""
        return float(np.min(1.0 + np.einsum("ni,ni->n", y0, self.bearings)))


@dataclass
class GainOutcome:
    k: float
    alpha: float
    converged: np.ndarray
    final_bearing_error: np.ndarray
    final_range_error: np.ndarray

    @property
    def fraction(self) -> float:
        return float(np.mean(self.converged)) if self.converged.size else float("nan")


@dataclass
class SweepResult:
    outcomes: list
    accepted: list
    excluded: list = field(default_factory=list)
    horizon: float = 0.0

    def fractions(self) -> dict:
        return {(o.k, o.alpha): o.fraction for o in self.outcomes}

    def non_decreasing_in_k(self, alpha: float) -> bool:
        rows = sorted((o.k, o.fraction) for o in self.outcomes if o.alpha == alpha)
        return all(b >= a for (_, a), (_, b) in zip(rows, rows[1:]))


def initial_bearings(scenario: ScenarioConfig) -> np.ndarray:
    return output(TotalState(scenario.initial_pose(), scenario.landmark_positions()))


def equilibrium_condition(scenario: ScenarioConfig) -> InitialCondition:
    y0 = initial_bearings(scenario)
    return InitialCondition(y0.copy(), np.ones(y0.shape[0]))


def sample_conditions(scenario: ScenarioConfig, spec: SweepSpec):
    """Draw initial conditions until ``spec.samples`` clear the exception-set margin.

    Origin bearings are uniform on the sphere and range ratios log-uniform on
    ``spec.ratio_range``. Returns ``(accepted, excluded)``.
    """
    rng = np.random.default_rng(spec.seed)
    y0 = initial_bearings(scenario)
    n = y0.shape[0]
    lo, hi = np.log(spec.ratio_range[0]), np.log(spec.ratio_range[1])
    accepted, excluded = [], []
    while len(accepted) < spec.samples:
        ic = InitialCondition(normalize(rng.normal(size=(n, 3))), np.exp(rng.uniform(lo, hi, n)))
        (accepted if ic.margin(y0) > spec.margin else excluded).append(ic)
    return accepted, excluded


def classify(conditions, scenario: ScenarioConfig, margin: float):
    """Split explicit conditions into (accepted, excluded) by the exception-set margin."""
    y0 = initial_bearings(scenario)
    accepted, excluded = [], []
    for ic in conditions:
        (accepted if ic.margin(y0) > margin else excluded).append(ic)
    return accepted, excluded


def _breakpoints(scenario: ScenarioConfig, horizon: float) -> list:
    inner = sorted({s.t_start for s in scenario.segments if 0.0 < s.t_start < horizon})
    return [0.0, *inner, horizon] if scenario.trajectory == "schedule" else [0.0, horizon]


def landmark_flow(scenario: ScenarioConfig, cfg: ObserverConfig, y_ring, r_ring, horizon: float,
                  rtol: float = 1e-7, atol: float = 1e-9):
    """Integrate the landmark part of the observer from the identity element.

    ``y_ring`` (m*n, 3) and ``r_ring`` (m*n,) are the origin bearings and
    depths of ``m`` stacked copies of the scenario's ``n`` landmarks.
    Returns the final ``(Q, a)``. Raises :class:`DomainError` if the solver
    cannot continue (barrier, exception set, or step size collapse).
    """
    base = scenario.landmark_positions()
    n = base.shape[0]
    y_ring = np.asarray(y_ring, dtype=float).reshape(-1, 3)
    r_ring = np.asarray(r_ring, dtype=float).reshape(-1)
    total = y_ring.shape[0]
    if n == 0 or total % n:
        raise ValueError("stacked landmarks must be whole copies of the scenario landmarks")
    reps = total // n
    q_ring = y_ring * r_ring[:, None]

    def field_at(t, z, u):
        Z = z.reshape(total, _BLOCK)
        Q = Z[:, :9].reshape(total, 3, 3)
        a = np.exp(Z[:, 9])
        P = true_pose_at(scenario, t)
        y = np.tile(output(TotalState(P, base)), (reps, 1))
        q_hat = np.einsum("nji,nj->ni", Q, q_ring) / a[:, None]
        try:
            W, w = lift_body(q_hat, u)
            delta = np.einsum("nij,nj->ni", Q, y)
            Gamma, gamma = landmark_innovation(delta, y_ring, r_ring / a, Q, u.v, cfg)
        except DomainError:
            # Rejects the trial step instead of aborting the solve.
            return np.full(z.shape, np.nan)
        dQ = Q @ skew(W) - skew(Gamma) @ Q
        return np.concatenate([dQ.reshape(total, 9), (w - gamma)[:, None]], axis=1).ravel()

    z = np.concatenate([np.tile(np.eye(3).ravel(), (total, 1)), np.zeros((total, 1))], axis=1).ravel()
    pattern = block_diag([np.ones((_BLOCK, _BLOCK))] * total, format="csc")
    knots = _breakpoints(scenario, horizon)
    for t0, t1 in zip(knots, knots[1:]):
        u = scenario.velocity(t0)
        with np.errstate(all="ignore"):
            sol = solve_ivp(field_at, (t0, t1), z, method="BDF", args=(u,), rtol=rtol, atol=atol,
                            jac_sparsity=pattern)
        if sol.status != 0 or not np.all(np.isfinite(sol.y[:, -1])):
            raise DomainError(f"landmark flow stopped at t={sol.t[-1]:.4g}: {sol.message}")
        z = sol.y[:, -1]
    Z = z.reshape(total, _BLOCK)
    return Z[:, :9].reshape(total, 3, 3), np.exp(Z[:, 9])


def _final_errors(scenario, Q, a, y_ring, r_ring, horizon):
    n = scenario.landmark_positions().shape[0]
    reps = Q.shape[0] // n
    truth = TotalState(true_pose_at(scenario, horizon), scenario.landmark_positions())
    y = np.tile(output(truth), (reps, 1))
    delta = normalize(np.einsum("nij,nj->ni", Q, y))
    bearing = angle_between(delta, y_ring)
    ratio = (r_ring / a) / np.tile(truth.ranges(), reps)
    return bearing, np.abs(ratio - 1.0)


def run_batch(scenario: ScenarioConfig, conditions, spec: SweepSpec, horizon: float | None = None):
    """Classify a list of conditions; returns (converged, bearing error, range error) per condition.

    A batch the solver cannot finish is split in half until single
    conditions remain; a single failing condition counts as diverged.
    """
    m = len(conditions)
    if m == 0:
        return np.zeros(0, bool), np.zeros(0), np.zeros(0)
    horizon = scenario.duration if horizon is None else horizon
    ranges = TotalState(scenario.initial_pose(), scenario.landmark_positions()).ranges()
    n = ranges.size
    y_ring = np.concatenate([ic.bearings for ic in conditions])
    r_ring = np.concatenate([ic.ratios * ranges for ic in conditions])
    try:
        Q, a = landmark_flow(scenario, scenario.observer, y_ring, r_ring, horizon, spec.rtol, spec.atol)
    except DomainError as exc:
        if m == 1:
            log.info("initial condition diverged: %s", exc)
            return np.zeros(1, bool), np.full(1, np.inf), np.full(1, np.inf)
        half = m // 2
        parts = [run_batch(scenario, conditions[:half], spec, horizon),
                 run_batch(scenario, conditions[half:], spec, horizon)]
        return tuple(np.concatenate(col) for col in zip(*parts))
    be, re = _final_errors(scenario, Q, a, y_ring, r_ring, horizon)
    be, re = be.reshape(m, n), re.reshape(m, n)
    ok = ((be < spec.bearing_tol) & (re < spec.range_tol)).all(axis=1)
    return ok, be.max(axis=1), re.max(axis=1)


def run_initial_condition(scenario: ScenarioConfig, ic: InitialCondition, spec: SweepSpec):
    """One condition on its own; returns (converged, max bearing error, max range error)."""
    ok, be, re = run_batch(scenario, [ic], spec, spec.horizon)
    return bool(ok[0]), float(be[0]), float(re[0])


def _run_job(args):
    scenario, conditions, spec = args
    return run_batch(scenario, conditions, spec, spec.horizon)


def run_sweep(scenario: ScenarioConfig, spec: SweepSpec, conditions=None) -> SweepResult:
    """Convergence fraction for every (k, alpha) pair over a shared set of initial conditions."""
    if conditions is None:
        accepted, excluded = sample_conditions(scenario, spec)
    else:
        accepted, excluded = classify(conditions, scenario, spec.margin)
    gains = [(float(k), float(a)) for k in spec.k for a in spec.alpha]
    chunks = [accepted[i:i + spec.batch] for i in range(0, len(accepted), spec.batch)]
    jobs = [
        (replace(scenario, observer=replace(scenario.observer, k=k, alpha=a)), chunk, spec)
        for k, a in gains for chunk in chunks
    ]
    if spec.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=spec.workers) as pool:
            results = list(pool.map(_run_job, jobs))
    else:
        results = [_run_job(job) for job in jobs]
    outcomes = []
    per_gain = len(chunks)
    for g, (k, a) in enumerate(gains):
        rows = results[g * per_gain:(g + 1) * per_gain]
        if rows:
            ok, be, re = (np.concatenate(col) for col in zip(*rows))
        else:
            ok, be, re = np.zeros(0, bool), np.zeros(0), np.zeros(0)
        outcomes.append(GainOutcome(k, a, ok, be, re))
    horizon = scenario.duration if spec.horizon is None else spec.horizon
    return SweepResult(outcomes, accepted, excluded, horizon)
