"""Inertia counting for the linearized generators and stability verdicts.

The generalized eigenproblem behind L = J Lscript admits the integer identity

    N_neg + N_zero + N_pos + N_complex = morse_index(Lscript),

where N_neg/N_zero/N_pos count real generalized eigenvalues whose eigenvector
makes the quadratic form (Lscript^{-1} X | X) non-positive, and N_complex
counts generalized eigenvalues in the open upper half plane.  N_neg > 0 or
N_complex > 0 means spectral instability.

For the emitter-only model everything reduces to explicit 2x2 systems; for
the coupled model the real negative generalized eigenvalue (when it exists)
is the root gamma_c of  gamma - (2/c^2)(kappa_gamma - 2).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .coupling import KappaFamily, kappa_gamma
from .spectral import (
    build_coupled_operator,
    build_Lscript_extra,
    build_Lscript_hartree,
    coupled_discrete_closed_forms,
    operator_grid,
)
from .state import J4
from .stationary import (
    ASYM_LABELS,
    SYMMETRIC_LABELS,
    RegimeError,
    get_branch,
    splitting_rates,
)

STABLE = "spectrally_stable"
UNSTABLE = "spectrally_unstable"


@dataclass(frozen=True)
class StabilityVerdict:
    branch: str
    kappa: float
    tau: int
    c: float | None
    counts: tuple[int, int, int, int]  # (N_neg, N_zero, N_pos, N_complex)
    morse_index: int
    verdict: str
    gamma_c: float | None = None
    evidence: list = field(default_factory=list)

    def __post_init__(self):
        assert sum(self.counts) == self.morse_index, "counting identity violated"

    def to_json_dict(self) -> dict:
        return {
            "branch": self.branch,
            "kappa": self.kappa,
            "tau": self.tau,
            "c": self.c,
            "counts": {
                "N_neg": self.counts[0],
                "N_zero": self.counts[1],
                "N_pos": self.counts[2],
                "N_complex": self.counts[3],
            },
            "morse_index": self.morse_index,
            "gamma_c": self.gamma_c,
            "verdict": self.verdict,
            "evidence": list(self.evidence),
        }


def _verdict_from_counts(counts) -> str:
    return UNSTABLE if counts[0] > 0 or counts[3] > 0 else STABLE


def _zero_mode_product(lscript: np.ndarray, x0: np.ndarray) -> float:
    """(Lscript^{-1} y0 | y0) with y0 = -J x0, solved orthogonal to the kernel."""
    jmat = J4 if lscript.shape[0] == 4 else None
    if jmat is None:
        raise ValueError("use the dense path for coupled operators")
    y0 = -jmat @ x0
    sol, *_ = np.linalg.lstsq(lscript, y0, rcond=1e-10)
    return float(sol @ y0)


def count_hartree(kappa: float, branch: str | int) -> StabilityVerdict:
    """Counts for the emitter-only model; branch is +1/-1 (symmetric) or 'extra'."""
    if branch in (1, -1):
        tau = int(branch)
        label = "symmetric_plus" if tau == 1 else "symmetric_minus"
        if kappa == 2.0:
            raise RegimeError("kappa = 2 is the degenerate threshold")
        lscript = build_Lscript_hartree(kappa, tau).entries
        x0 = np.array([0.0, 1.0, 0.0, tau])
        mq = np.array([[tau - kappa, -1.0], [-1.0, tau - kappa]])
        m0 = np.array([[float(tau), -1.0], [-1.0, float(tau)]])
        q_product_matrix = m0 @ mq
        p_product_matrix = mq @ m0
        embed_q = lambda v: np.array([v[0], 0.0, v[1], 0.0])
        embed_p = lambda v: np.array([0.0, v[0], 0.0, v[1]])
    elif branch == "extra":
        tau = 1
        label = "asym_plus"
        A, B = splitting_rates(kappa)
        lscript = build_Lscript_extra(kappa).entries
        x0 = np.array([0.0, 1.0, 0.0, A])
        m = np.array([[A * A - 1.0, A - B], [B - A, B * B - 1.0]])
        q_product_matrix = m
        p_product_matrix = m.T
        embed_q = lambda v: np.array([v[0], 0.0, v[1], 0.0])
        embed_p = lambda v: np.array([0.0, v[0], 0.0, v[1]])
    else:
        raise ValueError(f"branch must be +1, -1 or 'extra', got {branch!r}")

    morse = int(np.sum(np.linalg.eigvalsh(lscript) < -1e-12))
    evidence = []

    # kernel direction: one zero generalized eigenvalue, counted iff the
    # solved quadratic form is non-positive
    z = _zero_mode_product(lscript, x0)
    n_zero = 1 if z <= 0 else 0
    evidence.append({"name": "zero_mode_product", "value": z})

    n_neg = n_pos = 0
    for name, pm, embed in (
        ("q_family", q_product_matrix, embed_q),
        ("p_family", p_product_matrix, embed_p),
    ):
        mus, vecs = np.linalg.eig(pm)
        for mu, vec in zip(mus.real, vecs.T.real):
            if abs(mu) < 1e-12:
                continue  # kernel/constraint direction, handled by n_zero
            x_tilde = embed(vec)
            product = float(x_tilde @ (lscript @ x_tilde))
            evidence.append({"name": f"{name}_mu", "value": float(mu), "form": product})
            if product <= 0:
                if mu < 0:
                    n_neg += 1
                else:
                    n_pos += 1

    n_complex = morse - n_neg - n_zero - n_pos
    counts = (n_neg, n_zero, n_pos, n_complex)
    return StabilityVerdict(
        branch=label,
        kappa=kappa,
        tau=tau,
        c=None,
        counts=counts,
        morse_index=morse,
        verdict=_verdict_from_counts(counts),
        evidence=evidence,
    )


def gamma_condition(family: KappaFamily, gamma: float, c: float) -> float:
    """F(gamma) = gamma - (2/c^2)(kappa_gamma - 2); a positive root flags a real instability."""
    return gamma - (2.0 / c**2) * (kappa_gamma(family, gamma) - 2.0)


def solve_gamma_c(family: KappaFamily, c: float, tau: int = 1) -> float | None:
    """Unique positive root of gamma_condition, existing only for tau=+1, kappa>2."""
    if tau != 1 or family.kappa <= 2.0:
        return None  # F > 0 on (0, infinity): no real negative generalized eigenvalue
    lo, hi = 1e-16, 1.0
    while gamma_condition(family, hi, c) < 0:
        hi *= 2.0
        if hi > 1e12:
            raise RuntimeError("failed to bracket gamma_c")
    root = brentq(
        lambda g: gamma_condition(family, g, c), lo, hi, xtol=1e-15, rtol=8.9e-16
    )
    assert abs(gamma_condition(family, root, c)) <= 1e-12
    return float(root)


def _screened_second_moment(family: KappaFamily, gamma: float) -> float:
    """int |sigma_hat|^2/(gamma+|xi|^2)^2 dxi/(2pi)^n."""
    r = family.grid.nodes
    return float(np.sum(family._surface_density() / (gamma + r**2) ** 2))


def count_coupled(
    label: str,
    family: KappaFamily,
    tau: int = 1,
    c: float = 1.0,
) -> StabilityVerdict:
    """Counts for the full emitter+field model on the given branch."""
    kappa = family.kappa
    if label in ASYM_LABELS and kappa <= 2:
        raise RegimeError("asymmetric branches require kappa > 2")
    if label in SYMMETRIC_LABELS:
        tau = -1 if label == "symmetric_minus" else 1

    closed = coupled_discrete_closed_forms(label, kappa)
    morse = int(sum(1 for x in closed if x < -1e-12))
    evidence = []

    # zero mode: solved on the dense discretization, product -2/kappa or -A/2
    branch = get_branch(label, kappa)
    op = build_coupled_operator(branch, family.shape, operator_grid(family.shape, 64), c=c)
    x0 = np.zeros(op.dim)
    x0[1], x0[3] = branch.particle.q0, branch.particle.q1
    x0 *= np.sqrt(2.0) if label in SYMMETRIC_LABELS else 1.0 / branch.particle.q0
    y0 = -op.jmat @ x0
    sol, *_ = np.linalg.lstsq(op.lscript, y0, rcond=1e-10)
    z = float(sol @ y0)
    if label in SYMMETRIC_LABELS:
        z_closed = -2.0 / kappa
    else:
        A, _ = splitting_rates(kappa)
        z_closed = -A / 2.0
    evidence.append({"name": "zero_mode_product", "value": z, "closed_form": z_closed})
    n_zero = 1 if z <= 0 else 0

    n_neg = 0
    gamma_c = None
    if label in SYMMETRIC_LABELS:
        gamma_c = solve_gamma_c(family, c, tau)
        if gamma_c is not None:
            moment = _screened_second_moment(family, gamma_c)
            counted_sign = -gamma_c * c**2 - 2.0 * gamma_c * moment
            excluded_sign = 4.0 + (8.0 / c**2) * moment
            evidence.append({"name": "gamma_c_counted_form", "value": counted_sign})
            evidence.append({"name": "gamma_c_excluded_form", "value": excluded_sign})
            if counted_sign <= 0:
                n_neg += 1
            assert excluded_sign > 0  # the companion family is never counted
    else:
        # kappa^2-4 + 4(1-kappa_gamma/kappa) + gamma c^2 > 0 for every gamma > 0
        samples = [
            kappa**2 - 4.0 + 4.0 * (1.0 - kappa_gamma(family, g) / kappa) + g * c**2
            for g in np.logspace(-6, 3, 19)
        ]
        evidence.append({"name": "extra_branch_positivity_min", "value": float(min(samples))})
        assert min(samples) > 0

    n_pos = 0  # every positive real generalized eigenvalue has a positive form
    n_complex = morse - n_neg - n_zero - n_pos
    counts = (n_neg, n_zero, n_pos, n_complex)
    return StabilityVerdict(
        branch=label,
        kappa=kappa,
        tau=tau,
        c=c,
        counts=counts,
        morse_index=morse,
        verdict=_verdict_from_counts(counts),
        gamma_c=gamma_c,
        evidence=evidence,
    )
