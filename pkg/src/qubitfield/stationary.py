"""Stationary branches of the emitter models and the reduced energy landscape.

Normalized stationary states are parametrized as U* = (sin t, cos t) on the
unit circle.  Two symmetric branches exist for every kappa (t = pi/4 and
3pi/4, i.e. U1 = tau*U0 with tau = +/-1); two asymmetric branches open up for
kappa > 2 at the angles where sin(2t) = 2/kappa.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .coupling import CouplingShape, RadialGrid, compute_kappa, default_grid, sphere_measure_constant
from .state import ParticleState

SYMMETRIC_PLUS = "symmetric_plus"
SYMMETRIC_MINUS = "symmetric_minus"
ASYM_PLUS = "asym_plus"
ASYM_MINUS = "asym_minus"

SYMMETRIC_LABELS = (SYMMETRIC_PLUS, SYMMETRIC_MINUS)
ASYM_LABELS = (ASYM_PLUS, ASYM_MINUS)


class RegimeError(ValueError):
    """Requested branch does not exist for the given parameters."""


def reduced_energy(theta: float, kappa: float) -> float:
    """Energy along the normalized circle U = (sin t, cos t)."""
    c, s = np.cos(theta), np.sin(theta)
    return (c - s) ** 2 / 2.0 - kappa / 4.0 * (c**4 + s**4)


def reduced_energy_derivatives(theta: float, kappa: float) -> tuple[float, float]:
    """First and second derivative of reduced_energy in theta."""
    s2, c2 = np.sin(2 * theta), np.cos(2 * theta)
    d1 = kappa / 2.0 * c2 * (s2 - 2.0 / kappa)
    d2 = kappa * (c2**2 - s2 * (s2 - 2.0 / kappa))
    return float(d1), float(d2)


@dataclass(frozen=True)
class StationaryBranch:
    label: str
    particle: ParticleState
    omega: float
    energy: float
    classification: str
    kappa: float
    theta: float

    @property
    def tau(self) -> int:
        """Sign of U1/U0 for the symmetric branches (+1 for both asym branches)."""
        return -1 if self.label == SYMMETRIC_MINUS else 1

    def amplitudes(self) -> tuple[float, float]:
        """(|U0|^2, |U1|^2)."""
        return (
            self.particle.q0**2 + self.particle.p0**2,
            self.particle.q1**2 + self.particle.p1**2,
        )


def splitting_rates(kappa: float) -> tuple[float, float]:
    """The pair (A, B) = (kappa +- sqrt(kappa^2-4))/2 for kappa > 2; AB = 1."""
    if kappa <= 2:
        raise RegimeError("asymmetric branches require kappa > 2")
    root = np.sqrt(kappa * kappa - 4.0)
    return (kappa + root) / 2.0, (kappa - root) / 2.0


def asym_angles(kappa: float) -> tuple[float, float]:
    """Angles with sin(2t) = 2/kappa, in (0, pi/4) and (pi/4, pi/2)."""
    if kappa <= 2:
        raise RegimeError("asymmetric branches require kappa > 2")
    tp = 0.5 * np.arcsin(2.0 / kappa)
    return tp, np.pi / 2.0 - tp


def _branch(label: str, theta: float, omega: float, classification: str, kappa: float) -> StationaryBranch:
    particle = ParticleState(np.sin(theta), 0.0, np.cos(theta), 0.0)
    return StationaryBranch(
        label=label,
        particle=particle,
        omega=float(omega),
        energy=reduced_energy(theta, kappa),
        classification=classification,
        kappa=float(kappa),
        theta=float(theta),
    )


def hartree_branches(kappa: float) -> list[StationaryBranch]:
    """All normalized stationary branches at this kappa with classifications."""
    if not kappa > 0:
        raise ValueError("kappa must be positive")
    if kappa == 2.0:
        raise RegimeError("kappa = 2 is the degenerate threshold; no classification there")
    if kappa < 2.0:
        return [
            _branch(SYMMETRIC_PLUS, np.pi / 4, kappa / 2.0, "min", kappa),
            _branch(SYMMETRIC_MINUS, 3 * np.pi / 4, kappa / 2.0 - 2.0, "max", kappa),
        ]
    tp, tm = asym_angles(kappa)
    return [
        _branch(SYMMETRIC_PLUS, np.pi / 4, kappa / 2.0, "local_max", kappa),
        _branch(SYMMETRIC_MINUS, 3 * np.pi / 4, kappa / 2.0 - 2.0, "max", kappa),
        _branch(ASYM_PLUS, tp, kappa - 1.0, "min", kappa),
        _branch(ASYM_MINUS, tm, kappa - 1.0, "min", kappa),
    ]


def get_branch(label: str, kappa: float) -> StationaryBranch:
    for b in hartree_branches(kappa):
        if b.label == label:
            return b
    raise RegimeError(f"branch {label!r} does not exist at kappa={kappa}")


def dispersion_omega(label: str, kappa: float) -> float:
    """Lagrange multiplier of the branch: kappa/2 + tau - 1 (symmetric), kappa - 1 (asym)."""
    if label in SYMMETRIC_LABELS:
        tau = 1 if label == SYMMETRIC_PLUS else -1
        return kappa / 2.0 + tau - 1.0
    if label in ASYM_LABELS:
        if kappa <= 2:
            raise RegimeError("asymmetric branches require kappa > 2")
        return kappa - 1.0
    raise ValueError(f"unknown branch label {label!r}")


def hartree_energy(x: np.ndarray, kappa: float) -> float:
    """H = |u0-u1|^2/2 - kappa/4 (|u0|^4 + |u1|^4) in real coordinates."""
    q0, p0, q1, p1 = x
    n0 = q0 * q0 + p0 * p0
    n1 = q1 * q1 + p1 * p1
    return ((q0 - q1) ** 2 + (p0 - p1) ** 2) / 2.0 - kappa / 4.0 * (n0 * n0 + n1 * n1)


def hartree_gradient(x: np.ndarray, kappa: float) -> np.ndarray:
    q0, p0, q1, p1 = x
    n0 = q0 * q0 + p0 * p0
    n1 = q1 * q1 + p1 * p1
    return np.array(
        [
            q0 - q1 - kappa * n0 * q0,
            p0 - p1 - kappa * n0 * p0,
            q1 - q0 - kappa * n1 * q1,
            p1 - p0 - kappa * n1 * p1,
        ]
    )


def stationarity_residual(branch: StationaryBranch) -> float:
    """Norm of grad H(X*) + omega X* (vanishes on every branch)."""
    x = branch.particle.as_array()
    return float(np.linalg.norm(hartree_gradient(x, branch.kappa) + branch.omega * x))


@dataclass(frozen=True)
class CoupledStationary:
    """Stationary state of the full emitter+field system on a radial grid.

    psi_hat[j] holds the static field transform of channel j at the grid
    nodes: psi*_j = -|U*_j|^2 sigma_hat/xi^2.  The conjugate momentum
    vanishes at the stationary state.
    """

    branch: StationaryBranch
    shape: CouplingShape
    grid: RadialGrid
    psi_hat: np.ndarray  # shape (2, n_nodes)

    def field_coupling(self) -> tuple[float, float]:
        """(int sigma psi*_0 dz, int sigma psi*_1 dz); equals -kappa |U_j|^2."""
        n = self.shape.dim
        c = sphere_measure_constant(n)
        r = self.grid.nodes
        w = c * self.grid.weights * r ** (n - 1) * self.shape.fourier_radial(r)
        return float(w @ self.psi_hat[0]), float(w @ self.psi_hat[1])


def coupled_stationary(
    branch: StationaryBranch, shape: CouplingShape, grid: RadialGrid | None = None
) -> CoupledStationary:
    if grid is None:
        grid = default_grid(shape)
    k = compute_kappa(shape, grid)
    if abs(k - branch.kappa) > 1e-8 * max(1.0, branch.kappa):
        raise RegimeError(
            f"shape has kappa={k}, branch was built at kappa={branch.kappa}; calibrate first"
        )
    n0, n1 = branch.amplitudes()
    gamma_hat = shape.fourier_radial(grid.nodes) / grid.nodes**2
    psi_hat = np.vstack([-n0 * gamma_hat, -n1 * gamma_hat])
    return CoupledStationary(branch=branch, shape=shape, grid=grid, psi_hat=psi_hat)
