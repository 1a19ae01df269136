"""Random draws shared by the test modules."""

import numpy as np

from eqvslam.geometry import Pose, RigidVelocity
from eqvslam.group import GroupElement, TotalState


def rotation(rng):
    q, r = np.linalg.qr(rng.normal(size=(3, 3)))
    q = q * np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q


def unit(rng, n=None):
    v = rng.normal(size=(3,) if n is None else (n, 3))
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


def pose(rng, scale=3.0):
    return Pose(rotation(rng), rng.normal(scale=scale, size=3))


def velocity(rng):
    return RigidVelocity(rng.normal(size=3), rng.normal(size=3))


def group_element(rng, n):
    return GroupElement(pose(rng), np.array([rotation(rng) for _ in range(n)]).reshape(n, 3, 3),
                        np.exp(rng.normal(scale=0.5, size=n)))


def total_state(rng, n, min_range=0.5):
    P = pose(rng)
    dirs = unit(rng, n)
    ranges = min_range + rng.exponential(5.0, size=n)
    return TotalState(P, P.x + dirs * ranges[:, None])
