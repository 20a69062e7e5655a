"""Shared state containers for the two-level emitter."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ParticleState:
    """Real coordinates (q0, p0, q1, p1) of the complex pair u_j = q_j + i p_j."""

    q0: float
    p0: float
    q1: float
    p1: float

    def as_array(self) -> np.ndarray:
        return np.array([self.q0, self.p0, self.q1, self.p1])

    @staticmethod
    def from_array(x) -> "ParticleState":
        q0, p0, q1, p1 = (float(v) for v in x)
        return ParticleState(q0, p0, q1, p1)

    def l2(self) -> float:
        return self.q0**2 + self.p0**2 + self.q1**2 + self.p1**2


def rotate(x: np.ndarray, theta: float) -> np.ndarray:
    """Multiply both complex components by exp(i theta) in real coordinates."""
    c, s = np.cos(theta), np.sin(theta)
    q0, p0, q1, p1 = x
    return np.array([c * q0 - s * p0, s * q0 + c * p0, c * q1 - s * p1, s * q1 + c * p1])


# the symplectic block J = diag([[0,1],[-1,0]], [[0,1],[-1,0]])
J4 = np.array(
    [
        [0.0, 1.0, 0.0, 0.0],
        [-1.0, 0.0, 0.0, 0.0],
        [0.0, 0.0, 0.0, 1.0],
        [0.0, 0.0, -1.0, 0.0],
    ]
)
