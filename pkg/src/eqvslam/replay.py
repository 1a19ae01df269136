"""Replay recorded bearing and velocity logs through the observer.

Records are grouped by timestamp into frames. A landmark is added once it
has been seen in ``min_sightings`` consecutive frames, using its current
bearing and the record's depth (or ``d_init``). It is removed after missing
more than ``max_missed`` consecutive frames, and landmarks absent from the
final frame are dropped from the final map. Landmarks that are tracked but
missing from a frame get no innovation for that interval.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .config import ReplayOptions
from .evaluation import AlignmentResult, umeyama_align
from .geometry import RigidVelocity
from .observer import Observer, ObserverConfig, state_estimate
from .traces import DataError, read_table

log = logging.getLogger(__name__)

NORM_TOL = 1e-6


@dataclass(frozen=True)
class ReplayRecord:
    """One frame: time, body velocity and ``(id, bearing, depth or None)`` triples."""

    t: float
    u: RigidVelocity
    observations: tuple = ()

    @property
    def ids(self) -> tuple:
        return tuple(obs[0] for obs in self.observations)


@dataclass
class ReplayResult:
    times: np.ndarray
    est_R: np.ndarray
    est_x: np.ndarray
    landmark_trace: list
    innovation: np.ndarray
    final_map: dict
    events: list = field(default_factory=list)
    alignment: AlignmentResult | None = None
    rejections: int = 0


def _float(text, what, line, source):
    try:
        value = float(text)
    except ValueError:
        raise DataError(f"{what} is not a number: {text!r}", line, source) from None
    if not np.isfinite(value):
        raise DataError(f"{what} is not finite", line, source)
    return value


def read_velocity(path):
    """Velocity samples as ``(times, (m, 6) array of omega, v)``."""
    source = str(path)
    _, rows = read_table(path, "velocity")
    if not rows:
        raise DataError("no velocity samples", None, source)
    t = np.empty(len(rows))
    vals = np.empty((len(rows), 6))
    for j, (line, f) in enumerate(rows):
        t[j] = _float(f[0], "time", line, source)
        vals[j] = [_float(x, "velocity component", line, source) for x in f[1:7]]
        if j and t[j] <= t[j - 1]:
            raise DataError("velocity timestamps must be strictly increasing", line, source)
    return t, vals


def interpolate_velocity(times, samples, t) -> RigidVelocity:
    if t < times[0] - 1e-9 or t > times[-1] + 1e-9:
        raise DataError(f"time {t!r} outside the velocity log [{times[0]!r}, {times[-1]!r}]")
    vec = np.array([np.interp(t, times, samples[:, c]) for c in range(6)])
    return RigidVelocity.from_vector(vec)


def _parse_id(text):
    try:
        return int(text)
    except ValueError:
        return text


def read_records(records_path, velocity_path, norm_tol: float = NORM_TOL) -> list:
    """Frames from a records table, with velocity interpolated to frame times.

    Rows sharing a timestamp form one frame. Time must not decrease from row
    to row. Bearings further than ``norm_tol`` from unit norm are rejected;
    the rest are renormalised.
    """
    source = str(records_path)
    _, rows = read_table(records_path, "records")
    vt, vs = read_velocity(velocity_path)
    frames = []
    current_t, current, seen = None, [], set()
    record_no = 0
    for line, f in rows:
        record_no += 1
        t = _float(f[0], "time", line, source)
        if current_t is not None and t < current_t:
            raise DataError(f"record {record_no}: time {t!r} goes backwards", line, source)
        if current_t is not None and t > current_t:
            frames.append((current_t, tuple(current)))
            current, seen = [], set()
        current_t = t
        if not f[1]:
            if any(f[2:]):
                raise DataError(f"record {record_no}: bearing without landmark id", line, source)
            continue
        lid = _parse_id(f[1])
        if lid in seen:
            raise DataError(f"record {record_no}: landmark {lid!r} repeated within one frame", line, source)
        seen.add(lid)
        y = np.array([_float(x, "bearing component", line, source) for x in f[2:5]])
        norm = np.linalg.norm(y)
        if abs(norm - 1.0) > norm_tol:
            raise DataError(f"record {record_no}: bearing norm {norm!r} is not unit", line, source)
        depth = _float(f[5], "depth", line, source) if f[5] else None
        current.append((lid, y / norm, depth))
    if current_t is not None:
        frames.append((current_t, tuple(current)))
    out = []
    for t, obs in frames:
        try:
            u = interpolate_velocity(vt, vs, t)
        except DataError as exc:
            raise DataError(str(exc), None, source) from None
        out.append(ReplayRecord(t, u, obs))
    return out


def read_reference(path):
    """Reference positions as ``(times, (m, 3))`` from any table with t, x, y, z."""
    source = str(path)
    header, rows = read_table(path, None, required=["t", "x", "y", "z"])
    cols = [header.index(c) for c in ("t", "x", "y", "z")]
    data = np.array([[_float(f[c], "reference value", line, source) for c in cols] for line, f in rows])
    if data.shape[0] < 3:
        raise DataError("reference needs at least three samples", None, source)
    return data[:, 0], data[:, 1:]


def align_to_reference(times, est_x, ref_t, ref_x, with_scale: bool) -> AlignmentResult:
    """Umeyama fit of estimated positions to the reference interpolated at matching times."""
    inside = (times >= ref_t[0] - 1e-9) & (times <= ref_t[-1] + 1e-9)
    if inside.sum() < 3:
        raise DataError("fewer than three estimate times overlap the reference")
    ref = np.column_stack([np.interp(times[inside], ref_t, ref_x[:, c]) for c in range(3)])
    return umeyama_align(est_x[inside], ref, with_scale)


class LandmarkTracker:
    """Sighting and miss counters that decide when landmarks join or leave."""

    def __init__(self, options: ReplayOptions):
        self.options = options
        self.sightings: dict = {}
        self.missed: dict = {}

    def update(self, observed, tracked):
        """Returns ``(to_add, to_remove)`` for a frame observing ``observed``."""
        observed = list(observed)
        obs_set = set(observed)
        to_remove = []
        for lid in tracked:
            if lid in obs_set:
                self.missed[lid] = 0
            else:
                self.missed[lid] = self.missed.get(lid, 0) + 1
                if self.missed[lid] > self.options.max_missed:
                    to_remove.append(lid)
        for lid in list(self.sightings):
            if lid not in obs_set:
                del self.sightings[lid]
        to_add = []
        for lid in observed:
            self.sightings[lid] = self.sightings.get(lid, 0) + 1
            if lid not in tracked and self.sightings[lid] >= self.options.min_sightings:
                to_add.append(lid)
        for lid in to_remove:
            self.missed.pop(lid, None)
        return to_add, to_remove


def run_replay(records, cfg: ObserverConfig, options: ReplayOptions | None = None,
               reference=None) -> ReplayResult:
    """Stream frames through a fresh observer.

    The estimate is recorded at each frame time before the observer is
    advanced to the next frame; nothing is integrated after the last frame.
    ``reference`` is an optional ``(times, positions)`` pair for alignment.
    """
    options = options or ReplayOptions()
    obs = Observer(cfg)
    tracker = LandmarkTracker(options)
    m = len(records)
    est_R, est_x = np.zeros((m, 3, 3)), np.zeros((m, 3))
    innovation = np.zeros((max(m - 1, 0), 6))
    trace, events = [], []
    rejections = 0
    for k, rec in enumerate(records):
        if k and rec.t <= records[k - 1].t:
            raise DataError(f"record {k + 1}: timestamps must be strictly increasing")
        bearings = {lid: (y, d) for lid, y, d in rec.observations}
        to_add, to_remove = tracker.update(rec.ids, obs.ids)
        for lid in to_remove:
            obs.remove(lid)
            events.append((rec.t, "remove", lid))
        for lid in to_add:
            y, d = bearings[lid]
            obs.add(lid, y, d)
            events.append((rec.t, "add", lid))
        est = state_estimate(obs.state)
        est_R[k], est_x[k] = est.P.R, est.P.x
        for i, lid in enumerate(obs.ids):
            trace.append((rec.t, lid, est.p[i].copy()))
        if k == m - 1:
            break
        ids = obs.ids
        visible = np.array([lid in bearings for lid in ids], bool)
        y = np.array([bearings[lid][0] if lid in bearings else np.full(3, np.nan) for lid in ids])
        diag = obs.step(rec.u, y.reshape(-1, 3), records[k + 1].t - rec.t, visible)
        rejections += diag.rejections
        innovation[k] = obs.last_innovation.delta.as_vector()

    final_map = {}
    if m:
        est = state_estimate(obs.state)
        last_seen = set(records[-1].ids)
        for i, lid in enumerate(obs.ids):
            if lid in last_seen:
                final_map[lid] = est.p[i].copy()
            else:
                events.append((records[-1].t, "remove", lid))
    times = np.array([r.t for r in records])
    result = ReplayResult(times, est_R, est_x, trace, innovation, final_map, events,
                          rejections=rejections)
    if reference is not None:
        result.alignment = align_to_reference(times, est_x, *reference, options.with_scale)
    return result
