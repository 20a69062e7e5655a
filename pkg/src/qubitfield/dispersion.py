"""Complex dispersion relation of the coupled linearization, and the
boundary values of the resolvent integral across the imaginary axis.

Writing a candidate eigenvalue as lambda = a + ib and (A, B) = (a^2-b^2, 2ab),
the secular equation  lambda^2 + 4 - 2*tau*kappa_{lambda^2/c^2} = 0  splits
into two real components F = (F1, F2) evaluated by radial quadrature.  Roots
are chased with a damped Newton iteration, continued in the wave speed c.

Near the imaginary axis (B -> 0 with A < 0) the integrals develop a
principal-value singularity; the limiting values follow the half-residue
jump rule, evaluated here by subtract-and-add regularization.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .coupling import CouplingShape, KappaFamily

STIFF_CONDITION = 1e12


@dataclass(frozen=True)
class DispersionPoint:
    A: float
    B: float
    c: float
    residual: float
    iterations: int = 0
    stiff: bool = False
    converged: bool = True

    @property
    def lam(self) -> complex:
        """Recovered eigenvalue a+ib on the branch with a > 0."""
        return complex(np.sqrt(complex(self.A, self.B)))


def _quad_pieces(family: KappaFamily, A: float, B: float, c: float):
    r = family.grid.nodes
    dens = family._surface_density()
    u = A + c**2 * r**2
    den = u * u + B * B
    return dens, u, den


def dispersion_F(A: float, B: float, family: KappaFamily, tau: int, c: float) -> tuple[float, float]:
    """The two real components of the secular equation at lambda^2 = A + iB."""
    if B == 0.0 and A < 0.0:
        raise ValueError("on the branch cut; use the principal-value routines")
    dens, u, den = _quad_pieces(family, A, B, c)
    f1 = A + 4.0 - 2.0 * tau * c**2 * float(np.sum(dens * u / den))
    f2 = 1.0 + 2.0 * tau * c**2 * float(np.sum(dens / den))
    return f1, f2


def dispersion_jacobian(A: float, B: float, family: KappaFamily, tau: int, c: float) -> np.ndarray:
    dens, u, den = _quad_pieces(family, A, B, c)
    t = 2.0 * tau * c**2
    d11 = 1.0 - t * float(np.sum(dens * (B * B - u * u) / den**2))
    d12 = 2.0 * t * B * float(np.sum(dens * u / den**2))
    d21 = -2.0 * t * float(np.sum(dens * u / den**2))
    d22 = -2.0 * t * B * float(np.sum(dens / den**2))
    return np.array([[d11, d12], [d21, d22]])


def newton_dispersion(
    start: DispersionPoint,
    family: KappaFamily,
    tau: int,
    c: float,
    tol: float = 1e-10,
    max_iter: int = 100,
) -> DispersionPoint:
    """Damped Newton on F; non-convergence is reported, not raised."""
    x = np.array([start.A, start.B])
    f = np.array(dispersion_F(x[0], x[1], family, tau, c))
    res = float(np.linalg.norm(f))
    stiff = False
    for it in range(max_iter):
        if res <= tol:
            return DispersionPoint(x[0], x[1], c, res, iterations=it, stiff=stiff)
        jac = dispersion_jacobian(x[0], x[1], family, tau, c)
        if np.linalg.cond(jac) > STIFF_CONDITION:
            stiff = True
        try:
            step = np.linalg.solve(jac, f)
        except np.linalg.LinAlgError:
            break
        lam = 1.0
        for _ in range(40):
            cand = x - lam * step
            if cand[1] == 0.0 and cand[0] < 0.0:
                lam /= 2.0
                continue
            fc = np.array(dispersion_F(cand[0], cand[1], family, tau, c))
            rc = float(np.linalg.norm(fc))
            if rc < res:
                x, f, res = cand, fc, rc
                break
            lam /= 2.0
        else:
            break  # no descent: give up and report
    return DispersionPoint(
        x[0], x[1], c, res, iterations=max_iter, stiff=stiff, converged=res <= tol
    )


def resonance_family(shape: CouplingShape, panels: int = 512) -> KappaFamily:
    """KappaFamily on a grid fine enough to resolve near-axis resonance peaks.

    The F integrands develop a Lorentzian of width ~|B|/c^2 around the
    resonance shell; the default kappa grid is too coarse for it once c is
    large, which shows up as spurious Newton failure.
    """
    from .coupling import RadialGrid, compute_kappa, radial_grid

    cutoff = 9.0 / shape.width if shape.kind == "gaussian" else 150.0 / shape.width
    grid = radial_grid(cutoff, panels=panels)
    return KappaFamily(shape=shape, grid=grid, kappa=compute_kappa(shape, grid))


def root_path(
    family: KappaFamily,
    tau: int,
    c_values,
    start: DispersionPoint,
) -> list[DispersionPoint]:
    """Continuation of a dispersion root in c, warm-starting each solve.

    Roots come in conjugate pairs (F is even in B); the reported path is
    canonicalized to the upper branch B >= 0.
    """
    out = []
    cur = start
    for c in c_values:
        cur = newton_dispersion(cur, family, tau, c)
        if cur.B < 0:
            cur = DispersionPoint(
                cur.A, -cur.B, cur.c, cur.residual, cur.iterations, cur.stiff, cur.converged
            )
        out.append(cur)
    return out


# ---------------------------------------------------------------------------
# principal-value machinery


def spectral_density(shape: CouplingShape, r: np.ndarray) -> np.ndarray:
    """Sigma(r) = |sigma_hat(r)|^2 r^{n-1} (radial resolvent density, no sphere factor)."""
    return shape.fourier_radial(r) ** 2 * r ** (shape.dim - 1)


def _panel_quad(f, edges: np.ndarray, order: int = 16) -> float:
    t, w = np.polynomial.legendre.leggauss(order)
    h = 0.5 * (edges[1:] - edges[:-1])
    mid = 0.5 * (edges[1:] + edges[:-1])
    nodes = (np.outer(h, t) + mid[:, None]).ravel()
    weights = np.outer(h, w).ravel()
    return float(weights @ f(nodes))


def _edges_refined(mu: float, cutoff: float, levels: int) -> np.ndarray:
    """Panel edges on [0, cutoff], dyadically clustered toward r = sqrt(mu)."""
    root = np.sqrt(mu)
    h = root / 2.0
    offsets = h * 0.5 ** np.arange(levels + 1)
    edges = np.concatenate(
        [
            np.linspace(0.0, root - h, 8),
            root - offsets,
            [root],
            (root + offsets)[::-1],
            np.linspace(root + h, cutoff, max(8, int(cutoff - root)) + 1),
        ]
    )
    return np.unique(edges)


def plemelj_integral(mu: float, B: float, shape: CouplingShape) -> complex:
    """P(-mu, B) = int (r^2-mu) Sigma/(B^2+(r^2-mu)^2) dr - iB int Sigma/(B^2+(r^2-mu)^2) dr."""
    if mu <= 0:
        raise ValueError("mu must be positive")
    if B == 0.0:
        raise ValueError("B = 0 sits on the cut; use plemelj_limit")
    cutoff = 9.0 / shape.width if shape.kind == "gaussian" else 150.0 / shape.width

    def integrand_re(r):
        s = spectral_density(shape, r)
        return (r * r - mu) * s / (B * B + (r * r - mu) ** 2)

    def integrand_im(r):
        s = spectral_density(shape, r)
        return s / (B * B + (r * r - mu) ** 2)

    prev = None
    levels = max(8, int(np.ceil(np.log2(np.sqrt(mu) / (2 * abs(B)))) + 4))
    while True:
        edges = _edges_refined(mu, cutoff, levels)
        val = complex(_panel_quad(integrand_re, edges), -B * _panel_quad(integrand_im, edges))
        if prev is not None and abs(val - prev) <= 1e-8 * (1.0 + abs(val)):
            return val
        if levels > 60:
            raise RuntimeError("refinement near the resonance failed to settle")
        prev = val
        levels += 4


def plemelj_limit(mu: float, shape: CouplingShape) -> tuple[float, float]:
    """(P.V. integral, half-residue jump) so that  P(-mu, B) -> pv -+ i*jump  as B -> 0+-."""
    if mu <= 0:
        raise ValueError("mu must be positive")
    root = np.sqrt(mu)
    h = root / 2.0
    cutoff = 9.0 / shape.width if shape.kind == "gaussian" else 150.0 / shape.width
    sig_at_root = float(spectral_density(shape, np.array([root]))[0])

    def outer(r):
        return spectral_density(shape, r) / (r * r - mu)

    left = _panel_quad(outer, np.linspace(0.0, root - h, 17))
    right = _panel_quad(outer, np.linspace(root + h, cutoff, 65))

    def window_regular(r):
        # (Sigma(r) - Sigma(root))/(r^2 - mu): removable at r = root
        num = spectral_density(shape, r) - sig_at_root
        return num / (r * r - mu)

    edges = np.unique(np.concatenate([np.linspace(root - h, root, 17), np.linspace(root, root + h, 17)]))
    window = _panel_quad(window_regular, edges, order=24)
    # exact symmetric-window principal value of Sigma(root)/(r^2-mu)
    window += -sig_at_root / (2.0 * root) * np.log((2.0 * root + h) / (2.0 * root - h))

    pv = left + right + window
    jump = np.pi * sig_at_root / (2.0 * root)
    return pv, jump
