"""Linearization operators around stationary branches and their spectra.

Two models, two branch families each:

* emitter-only (4x4 matrices): symmetric branches carry the constrained
  Hessian Lscript and the generator L = J Lscript with closed-form spectra;
  the asymmetric branches (kappa > 2) have their own pair.
* full emitter+field: the field enters through radial modes, discretized on
  the quadrature grid in scaled coordinates sqrt(w_tilde_k) * phi_hat(xi_k)
  so that the Hessian stays literally symmetric.  The mode continuum shows
  up as an eigenvalue cluster at 1/2 (the essential spectrum).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .coupling import CouplingShape, RadialGrid, compute_kappa, radial_grid, sphere_measure_constant
from .state import J4
from .stationary import (
    ASYM_LABELS,
    SYMMETRIC_LABELS,
    SYMMETRIC_MINUS,
    RegimeError,
    StationaryBranch,
    splitting_rates,
)

ESSENTIAL_POINT = 0.5
ESSENTIAL_TOL = 1e-6
JORDAN_RANK_TOL = 1e-10


@dataclass(frozen=True)
class OperatorMatrix:
    kind: str
    entries: np.ndarray
    params: dict


@dataclass(frozen=True)
class EigenvalueRecord:
    re: float
    im: float
    mult: int
    source: str  # closed_form | numeric

    def as_complex(self) -> complex:
        return complex(self.re, self.im)


@dataclass(frozen=True)
class SpectralReport:
    eigenvalues: list  # EigenvalueRecord for the generator L
    essential: list = field(default_factory=list)
    jordan: list = field(default_factory=list)
    lscript_eigenvalues: list = field(default_factory=list)

    def to_json_dict(self) -> dict:
        return {
            "eigenvalues": [
                {"re": e.re, "im": e.im, "mult": e.mult, "source": e.source}
                for e in self.eigenvalues
            ],
            "essential": list(self.essential),
            "jordan": list(self.jordan),
            "lscript_eigenvalues": list(self.lscript_eigenvalues),
        }


def build_Lscript_hartree(kappa: float, tau: int) -> OperatorMatrix:
    """Constrained Hessian at the symmetric branch U1 = tau*U0."""
    if tau not in (-1, 1):
        raise ValueError("tau must be +1 or -1")
    m = np.array(
        [
            [tau - kappa, 0.0, -1.0, 0.0],
            [0.0, tau, 0.0, -1.0],
            [-1.0, 0.0, tau - kappa, 0.0],
            [0.0, -1.0, 0.0, tau],
        ]
    )
    return OperatorMatrix(kind="Lscript_hartree_sym", entries=m, params={"kappa": kappa, "tau": tau})


def build_L_hartree(kappa: float, tau: int) -> OperatorMatrix:
    ls = build_Lscript_hartree(kappa, tau)
    return OperatorMatrix(kind="L_hartree_sym", entries=J4 @ ls.entries, params=ls.params)


def build_Lscript_extra(kappa: float) -> OperatorMatrix:
    """Constrained Hessian at the asymmetric branch (kappa > 2)."""
    A, B = splitting_rates(kappa)
    m = np.array(
        [
            [A - 2 * B, 0.0, -1.0, 0.0],
            [0.0, A, 0.0, -1.0],
            [-1.0, 0.0, B - 2 * A, 0.0],
            [0.0, -1.0, 0.0, B],
        ]
    )
    return OperatorMatrix(kind="Lscript_hartree_extra", entries=m, params={"kappa": kappa, "A": A, "B": B})


def build_L_extra(kappa: float) -> OperatorMatrix:
    ls = build_Lscript_extra(kappa)
    return OperatorMatrix(kind="L_hartree_extra", entries=J4 @ ls.entries, params=ls.params)


def _jordan_info(m: np.ndarray) -> list:
    """Detect a nontrivial Jordan block at 0 via kernel ranks of m and m^2."""
    def kdim(a):
        s = np.linalg.svd(a, compute_uv=False)
        return int(np.sum(s < JORDAN_RANK_TOL * max(1.0, s[0])))

    geo = kdim(m)
    alg = kdim(m @ m)
    if alg > geo > 0:
        return [{"eigenvalue": 0.0, "algebraic": alg, "geometric": geo}]
    return []


def _match_numeric(closed: list, numeric: np.ndarray, tol: float) -> None:
    for lam in closed:
        # a defective zero eigenvalue is only determined to sqrt(machine-eps)
        # by a generic eigensolver; everything else must match tightly
        eff = 1e-6 if lam == 0 else tol
        if np.min(np.abs(numeric - lam)) > eff:
            raise AssertionError(
                f"closed-form eigenvalue {lam} not found numerically (tol {eff})"
            )


def spectrum_L_hartree(kappa: float, tau: int) -> SpectralReport:
    """Spectrum of the symmetric-branch generator: 0 (Jordan pair) and lambda^2 = 2*tau*kappa - 4."""
    L = build_L_hartree(kappa, tau).entries
    lam2 = 2.0 * tau * kappa - 4.0
    lam = np.sqrt(complex(lam2))
    closed = [0.0 + 0j, lam, -lam]
    numeric = np.linalg.eigvals(L)
    _match_numeric(closed, numeric, 1e-12)
    eigs = [
        EigenvalueRecord(0.0, 0.0, 2, "closed_form"),
        EigenvalueRecord(lam.real, lam.imag, 1, "closed_form"),
        EigenvalueRecord(-lam.real, -lam.imag, 1, "closed_form"),
    ]
    ls = build_Lscript_hartree(kappa, tau).entries
    return SpectralReport(
        eigenvalues=eigs,
        jordan=_jordan_info(L),
        lscript_eigenvalues=sorted([0.0, -kappa, 2.0 * tau, 2.0 * tau - kappa]),
    )


def spectrum_extra_hartree(kappa: float) -> SpectralReport:
    """Asymmetric-branch generator: 0 (Jordan pair) and lambda = +-i sqrt(kappa^2-4)."""
    if kappa <= 2:
        raise RegimeError("asymmetric branches require kappa > 2")
    L = build_L_extra(kappa).entries
    w = np.sqrt(kappa * kappa - 4.0)
    closed = [0.0 + 0j, 1j * w, -1j * w]
    numeric = np.linalg.eigvals(L)
    _match_numeric(closed, numeric, 1e-12)
    eigs = [
        EigenvalueRecord(0.0, 0.0, 2, "closed_form"),
        EigenvalueRecord(0.0, w, 1, "closed_form"),
        EigenvalueRecord(0.0, -w, 1, "closed_form"),
    ]
    disc = np.sqrt(9.0 * kappa * kappa - 32.0)
    lscript = sorted([0.0, kappa, (-kappa + disc) / 2.0, (-kappa - disc) / 2.0])
    return SpectralReport(eigenvalues=eigs, jordan=_jordan_info(L), lscript_eigenvalues=lscript)


@dataclass(frozen=True)
class CoupledOperator:
    """Dense discretization of the coupled linearization, dimension 4 + 4*N.

    Coordinate layout: (q0, p0, q1, p1) then, per channel j, N scaled field
    modes followed by their N conjugate momenta.
    """

    branch: StationaryBranch
    shape: CouplingShape
    grid: RadialGrid
    c: float
    lscript: np.ndarray
    jmat: np.ndarray

    @property
    def n_modes(self) -> int:
        return len(self.grid.nodes)

    @property
    def dim(self) -> int:
        return 4 + 4 * self.n_modes

    def generator(self) -> np.ndarray:
        return self.jmat @ self.lscript

    def kernel_vector(self) -> np.ndarray:
        """The exact zero mode (0,1,0,U1/U0-ratio,0,...) of lscript, normalized."""
        v = np.zeros(self.dim)
        v[1] = self.branch.particle.q0
        v[3] = self.branch.particle.q1
        return v / np.linalg.norm(v)


def operator_grid(shape: CouplingShape, n_modes: int = 256) -> RadialGrid:
    """Quadrature grid with exactly n_modes nodes (16-point panels)."""
    if n_modes % 16 != 0:
        raise ValueError("n_modes must be a multiple of 16")
    cutoff = 9.0 / shape.width if shape.kind == "gaussian" else 150.0 / shape.width
    return radial_grid(cutoff, panels=n_modes // 16, order=16)


def build_coupled_operator(
    branch: StationaryBranch,
    shape: CouplingShape,
    grid: RadialGrid | None = None,
    c: float = 1.0,
) -> CoupledOperator:
    if grid is None:
        grid = operator_grid(shape)
    k = compute_kappa(shape, grid)
    if abs(k - branch.kappa) > 1e-8 * max(1.0, branch.kappa):
        raise RegimeError("shape kappa does not match the branch; calibrate first")

    n = shape.dim
    r = grid.nodes
    N = len(r)
    w_tilde = sphere_measure_constant(n) * grid.weights * r ** (n - 1)
    g = np.sqrt(w_tilde) * shape.fourier_radial(r) / r  # couples q_j to channel-j modes

    dim = 4 + 4 * N
    ls = np.zeros((dim, dim))

    # particle block
    if branch.label in SYMMETRIC_LABELS:
        tau = branch.tau
        diag = (tau, tau, tau, tau)
    elif branch.label in ASYM_LABELS:
        A, B = splitting_rates(branch.kappa)
        if branch.label == "asym_minus":
            A, B = B, A
        diag = (A, A, B, B)
    else:
        raise RegimeError(f"unknown branch label {branch.label!r}")
    ls[0, 0], ls[1, 1], ls[2, 2], ls[3, 3] = diag
    ls[0, 2] = ls[2, 0] = -1.0
    ls[1, 3] = ls[3, 1] = -1.0

    # field blocks: diagonal 1/2, plus q_j <-> channel-j mode coupling Q*_j g
    s0 = 4  # channel-0 modes
    s1 = 4 + 2 * N  # channel-1 modes
    for s in (s0, s1):
        ls[np.arange(s, s + 2 * N), np.arange(s, s + 2 * N)] = 0.5
    ls[0, s0 : s0 + N] = ls[s0 : s0 + N, 0] = branch.particle.q0 * g
    ls[2, s1 : s1 + N] = ls[s1 : s1 + N, 2] = branch.particle.q1 * g

    jm = np.zeros((dim, dim))
    jm[:4, :4] = J4
    for s in (s0, s1):
        idx = np.arange(s, s + N)
        jm[idx, idx + N] = 2.0 * c * r
        jm[idx + N, idx] = -2.0 * c * r

    return CoupledOperator(branch=branch, shape=shape, grid=grid, c=c, lscript=ls, jmat=jm)


def coupled_discrete_closed_forms(label: str, kappa: float) -> list:
    """Closed-form discrete eigenvalues of the coupled Hessian."""
    if label in SYMMETRIC_LABELS:
        tau = -1 if label == SYMMETRIC_MINUS else 1
        out = [0.0, 2.0 * tau]
        out += list(np.roots([1.0, -0.5, -kappa / 2.0]).real)
        out += list(np.roots([1.0, -(0.5 + 2.0 * tau), tau - kappa / 2.0]).real)
        return sorted(out)
    A, B = splitting_rates(kappa)
    quartic = [
        4.0,
        -4.0 * (kappa + 1.0),
        1.0,
        4.0 * A * A + 4.0 * B * B + kappa,
        -2.0 * (A - B) ** 2,
    ]
    roots = np.roots(quartic)
    if np.max(np.abs(roots.imag)) > 1e-10:
        raise AssertionError("coupled quartic produced complex roots")
    return sorted([0.0, kappa] + list(roots.real))


def split_essential_cluster(eigs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Separate numeric Hessian eigenvalues into (discrete, essential-cluster)."""
    mask = np.abs(eigs - ESSENTIAL_POINT) < ESSENTIAL_TOL
    return eigs[~mask], eigs[mask]


def spectrum_coupled_Lscript(
    branch: StationaryBranch,
    shape: CouplingShape,
    grid: RadialGrid | None = None,
    c: float = 1.0,
) -> SpectralReport:
    """Discrete spectrum of the coupled Hessian plus the essential point 1/2.

    Closed forms come from the secular quadratics (symmetric branch) or the
    quartic (asymmetric branch); the discretized dense operator corroborates
    each of them to mesh tolerance.
    """
    op = build_coupled_operator(branch, shape, grid, c)
    closed = coupled_discrete_closed_forms(branch.label, branch.kappa)
    numeric = np.linalg.eigvalsh(op.lscript)
    discrete, cluster = split_essential_cluster(numeric)
    eigs = []
    for lam in closed:
        matches = np.abs(discrete - lam) < 1e-6
        mult = max(1, int(np.sum(matches)))
        if not matches.any():
            raise AssertionError(f"closed-form Hessian eigenvalue {lam} unmatched numerically")
        eigs.append(EigenvalueRecord(float(lam), 0.0, mult, "closed_form"))
    return SpectralReport(
        eigenvalues=eigs,
        essential=[ESSENTIAL_POINT],
        jordan=[],
        lscript_eigenvalues=closed,
    )


def quadruple_symmetry_defect(eigs: np.ndarray, floor: float = 1e-10) -> float:
    """Max distance from {-lam, conj(lam), -conj(lam)} to the spectrum, over |lam|>floor."""
    worst = 0.0
    for lam in eigs:
        if abs(lam) <= floor:
            continue
        for partner in (-lam, np.conj(lam), -np.conj(lam)):
            worst = max(worst, float(np.min(np.abs(eigs - partner))))
    return worst
