"""Alignment and error metrics for estimated SLAM configurations."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import Pose, angle_between
from .group import TotalState


class AlignmentError(ValueError):
    pass


@dataclass(frozen=True)
class AlignmentResult:
    """``ref ~ scale * S.R @ est + S.x`` with post-fit RMSE in metres."""

    S: Pose
    scale: float
    rmse: float

    def apply(self, points: np.ndarray) -> np.ndarray:
        return self.scale * np.asarray(points) @ self.S.R.T + self.S.x


@dataclass
class ErrorReport:
    bearing_error: np.ndarray
    range_ratio: np.ndarray
    storage: np.ndarray
    trajectory_rmse: float
    equivalence_residual: float

    def summary(self) -> dict:
        return {
            "max_bearing_error_rad": float(np.max(self.bearing_error, initial=0.0)),
            "max_range_ratio_error": float(np.max(np.abs(self.range_ratio - 1), initial=0.0)),
            "final_storage_sum": float(np.sum(self.storage)),
            "trajectory_rmse_m": float(self.trajectory_rmse),
            "equivalence_residual_m": float(self.equivalence_residual),
        }


def umeyama_align(est, ref, with_scale: bool = False) -> AlignmentResult:
    """Least-squares rigid (or similarity) transform taking ``est`` onto ``ref``.

    Closed form via the SVD of the cross-covariance, with the reflection
    correction so the result is a proper rotation.
    """
    est = np.asarray(est, dtype=float).reshape(-1, 3)
    ref = np.asarray(ref, dtype=float).reshape(-1, 3)
    if est.shape != ref.shape:
        raise AlignmentError(f"point sets differ in shape: {est.shape} vs {ref.shape}")
    m = est.shape[0]
    if m < 3:
        raise AlignmentError(f"need at least 3 point pairs, got {m}")
    mu_e, mu_r = est.mean(axis=0), ref.mean(axis=0)
    ec, rc = est - mu_e, ref - mu_r
    sv = np.linalg.svd(ec, compute_uv=False)
    if sv[1] <= 1e-9 * max(sv[0], 1.0):
        raise AlignmentError("estimated points are collinear or coincident; rotation is not determined")
    cov = rc.T @ ec / m
    u, d, vt = np.linalg.svd(cov)
    s = np.ones(3)
    if np.linalg.det(u) * np.linalg.det(vt) < 0:
        s[2] = -1.0
    R = u @ np.diag(s) @ vt
    var_e = np.sum(ec**2) / m
    scale = float(np.sum(d * s) / var_e) if with_scale else 1.0
    t = mu_r - scale * R @ mu_e
    resid = ref - (scale * est @ R.T + t)
    rmse = float(np.sqrt(np.mean(np.sum(resid**2, axis=1))))
    return AlignmentResult(Pose(R, t), scale, rmse)


def equivalence_residual(xi_hat: TotalState, xi: TotalState) -> float:
    """Largest difference in ego-centric landmark coordinates.

    Zero exactly when the two configurations differ by a rigid change of
    reference frame.
    """
    if xi_hat.n != xi.n:
        raise ValueError(f"mismatched landmark counts: {xi_hat.n} vs {xi.n}")
    if xi.n == 0:
        return 0.0
    diff = xi_hat.body_coordinates() - xi.body_coordinates()
    return float(np.linalg.norm(diff, axis=1).max())


def frame_change(S: Pose, xi: TotalState) -> TotalState:
    """Express ``xi`` in the frame obtained by the rigid transform ``S``: ``(S^-1 P, S^-1 p)``."""
    inv = S.inverse()
    return TotalState(inv @ xi.P, inv.apply(xi.p))


def align_by_pose(xi_hat: TotalState, xi: TotalState) -> TotalState:
    """Map the estimate into the true frame by matching robot poses."""
    S = xi_hat.P @ xi.P.inverse()
    return frame_change(S, xi_hat)


def bearing_errors(y_est, y_true) -> np.ndarray:
    return angle_between(np.asarray(y_est).reshape(-1, 3), np.asarray(y_true).reshape(-1, 3))


def trajectory_rmse(est_positions, ref_positions, with_scale: bool = False) -> AlignmentResult:
    return umeyama_align(est_positions, ref_positions, with_scale)


def storage_increase(storage) -> float:
    """Largest single-step increase over all landmark storage traces (negative if strictly decreasing)."""
    s = np.asarray(storage, dtype=float)
    if s.shape[0] < 2 or s.size == 0:
        return float("-inf")
    return float(np.max(np.diff(s, axis=0)))


def error_report(result) -> ErrorReport:
    """Final-time errors of a :class:`~eqvslam.simulation.SimulationResult`."""
    truth = result.true_state(-1)
    est = result.estimate(-1)
    try:
        rmse = umeyama_align(result.est_x, result.true_x).rmse
    except AlignmentError:
        rmse = float(np.sqrt(np.mean(np.sum((result.est_x - result.true_x) ** 2, axis=1))))
    return ErrorReport(
        bearing_error=result.bearing_error[-1],
        range_ratio=result.range_ratio[-1],
        storage=result.storage[-1],
        trajectory_rmse=rmse,
        equivalence_residual=equivalence_residual(est, truth),
    )
