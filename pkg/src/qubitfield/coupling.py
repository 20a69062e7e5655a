"""Coupling shapes, radial quadrature, and the kappa family of integrals.

The emitter couples to each wave channel through a fixed radial profile
sigma(z) on R^n (n >= 3).  Everything downstream only ever needs radial
integrals of |sigma_hat|^2 against rational weights, so this module owns:

* the shape and its radial Fourier transform,
* a deterministic Gauss-Legendre radial grid with a built-in self test,
* kappa = int |sigma_hat(xi)|^2 / |xi|^2  dxi/(2pi)^n and its screened
  relatives kappa_gamma, kappa_z,
* the static potential Gamma solving -Delta Gamma = sigma.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import gamma as gamma_fn
from scipy.special import jv, erf


class ResolutionError(Exception):
    """Raised when a quadrature grid fails its self test or tail check."""


def sphere_measure_constant(n: int) -> float:
    """Constant c_n with  int f(|xi|) dxi/(2pi)^n = c_n * int f(r) r^{n-1} dr."""
    area = 2.0 * np.pi ** (n / 2.0) / gamma_fn(n / 2.0)
    return area / (2.0 * np.pi) ** n


def _bessel_kernel(x: np.ndarray, nu: float) -> np.ndarray:
    """J_nu(x)/x^nu, continued to x=0."""
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    small = np.abs(x) < 1e-6
    out[small] = (1.0 - x[small] ** 2 / (4.0 * (nu + 1.0))) / (
        2.0**nu * gamma_fn(nu + 1.0)
    )
    xs = x[~small]
    out[~small] = jv(nu, xs) / xs**nu
    return out


@dataclass(frozen=True)
class CouplingShape:
    """Radial coupling profile sigma and its analytic/semi-analytic transform.

    kind       -- "gaussian" or "bump"
    amplitude  -- overall positive prefactor
    width      -- length scale of the profile
    dim        -- space dimension n >= 3
    """

    kind: str
    amplitude: float
    width: float
    dim: int

    def profile(self, rho):
        """sigma as a function of the radius rho >= 0."""
        rho = np.asarray(rho, dtype=float)
        if self.kind == "gaussian":
            return self.amplitude * np.exp(-(rho**2) / (2.0 * self.width**2))
        # compactly supported bump on [0, width)
        out = np.zeros_like(rho)
        inside = rho < self.width
        u = (rho[inside] / self.width) ** 2
        out[inside] = self.amplitude * np.exp(-1.0 / (1.0 - u))
        return out

    def fourier_radial(self, xi):
        """sigma_hat as a function of the radial frequency |xi|.

        Real and radial since sigma is; Gaussian case is closed-form, bump
        case goes through the one-dimensional Hankel-type reduction of the
        n-dimensional transform.
        """
        xi = np.asarray(xi, dtype=float)
        n = self.dim
        if self.kind == "gaussian":
            s = self.width
            return (
                self.amplitude
                * (2.0 * np.pi) ** (n / 2.0)
                * s**n
                * np.exp(-(s**2) * xi**2 / 2.0)
            )
        nu = n / 2.0 - 1.0
        # fixed high-order rule on the support; integrand is C-infinity
        t, w = np.polynomial.legendre.leggauss(200)
        rho = 0.5 * self.width * (t + 1.0)
        wr = 0.5 * self.width * w
        f = self.profile(rho) * rho ** (n - 1) * wr
        kern = _bessel_kernel(np.outer(xi.ravel(), rho), nu)
        vals = ((2.0 * np.pi) ** (n / 2.0) * kern @ f).reshape(xi.shape)
        return vals if xi.shape else float(vals)


def make_shape(kind: str, amplitude: float = 1.0, width: float = 1.0, n: int = 3) -> CouplingShape:
    if kind not in ("gaussian", "bump"):
        raise ValueError(f"unknown shape kind {kind!r}")
    if not amplitude > 0:
        raise ValueError("amplitude must be positive")
    if not width > 0:
        raise ValueError("width must be positive")
    if n < 3:
        raise ValueError("dimension must be at least 3 for dispersive decay")
    return CouplingShape(kind=kind, amplitude=float(amplitude), width=float(width), dim=int(n))


@dataclass(frozen=True)
class RadialGrid:
    """Composite Gauss-Legendre rule on (0, cutoff].

    nodes/weights integrate dr on the interval; callers supply the r^{n-1}
    surface factor and the sphere constant themselves (see kappa below).
    """

    nodes: np.ndarray
    weights: np.ndarray
    cutoff: float

    def __post_init__(self):
        # self test: int_0^cutoff exp(-r^2) dr against the error function
        exact = 0.5 * np.sqrt(np.pi) * erf(self.cutoff)
        got = float(self.weights @ np.exp(-self.nodes**2))
        if abs(got - exact) > 1e-10 * abs(exact):
            raise ResolutionError(
                f"radial grid self-test failed: {got!r} vs {exact!r}"
            )


def radial_grid(cutoff: float, panels: int = 32, order: int = 16) -> RadialGrid:
    """Uniform composite Gauss-Legendre grid on (0, cutoff]."""
    t, w = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(0.0, cutoff, panels + 1)
    h = 0.5 * (edges[1:] - edges[:-1])
    mid = 0.5 * (edges[1:] + edges[:-1])
    nodes = (np.outer(h, t) + mid[:, None]).ravel()
    weights = np.outer(h, w).ravel()
    return RadialGrid(nodes=nodes, weights=weights, cutoff=float(cutoff))


def _default_cutoff(shape: CouplingShape) -> float:
    if shape.kind == "gaussian":
        return 9.0 / shape.width
    # bump transforms only decay like exp(-c sqrt(xi)); take a generous
    # window and let the tail check below catch any shortfall
    return 150.0 / shape.width


def default_grid(shape: CouplingShape) -> RadialGrid:
    """Grid whose panel count is doubled until kappa is stable to 1e-12."""
    cutoff = _default_cutoff(shape)
    # keep panel width ~2 or less so the construction self-test passes
    panels = max(16, int(np.ceil(cutoff / 2.0)))
    grid = radial_grid(cutoff, panels=panels)
    prev = compute_kappa(shape, grid, _tail_check=False)
    while panels <= 512:
        panels *= 2
        grid = radial_grid(cutoff, panels=panels)
        cur = compute_kappa(shape, grid, _tail_check=False)
        if abs(cur - prev) <= 1e-12 * abs(cur):
            return grid
        prev = cur
    raise ResolutionError("kappa did not stabilize under panel doubling")


def compute_kappa(shape: CouplingShape, grid: RadialGrid | None = None, *, _tail_check: bool = True) -> float:
    """kappa = int |sigma_hat(xi)|^2/|xi|^2 dxi/(2pi)^n, reduced radially."""
    if grid is None:
        grid = default_grid(shape)
    n = shape.dim
    c = sphere_measure_constant(n)
    f = shape.fourier_radial(grid.nodes) ** 2 * grid.nodes ** (n - 3)
    contrib = c * grid.weights * f
    total = float(np.sum(contrib))
    if _tail_check:
        tail = float(np.sum(contrib[grid.nodes > 0.9 * grid.cutoff]))
        if abs(tail) > 1e-13 * abs(total):
            raise ResolutionError("quadrature cutoff does not resolve the tail")
    return total


def calibrate_amplitude(shape: CouplingShape, target_kappa: float) -> CouplingShape:
    """Rescale the amplitude so that compute_kappa hits target_kappa (kappa ~ amplitude^2)."""
    if not target_kappa > 0:
        raise ValueError("target kappa must be positive")
    base = compute_kappa(shape)
    amp = shape.amplitude * np.sqrt(target_kappa / base)
    return CouplingShape(kind=shape.kind, amplitude=float(amp), width=shape.width, dim=shape.dim)


@dataclass(frozen=True)
class KappaFamily:
    """Screened coupling integrals kappa_gamma and their complex extension."""

    shape: CouplingShape
    grid: RadialGrid
    kappa: float

    @classmethod
    def build(cls, shape: CouplingShape, grid: RadialGrid | None = None) -> "KappaFamily":
        if grid is None:
            grid = default_grid(shape)
        return cls(shape=shape, grid=grid, kappa=compute_kappa(shape, grid))

    def _surface_density(self) -> np.ndarray:
        n = self.shape.dim
        c = sphere_measure_constant(n)
        r = self.grid.nodes
        return c * self.grid.weights * self.shape.fourier_radial(r) ** 2 * r ** (n - 1)


def kappa_gamma(family: KappaFamily, gamma: float) -> float:
    """int |sigma_hat|^2/(gamma+|xi|^2) dxi/(2pi)^n for gamma >= 0."""
    if gamma < 0:
        raise ValueError("gamma must be non-negative")
    r = family.grid.nodes
    return float(np.sum(family._surface_density() / (gamma + r**2)))


def kappa_gamma_deriv(family: KappaFamily, gamma: float) -> float:
    """d/dgamma of kappa_gamma (always negative)."""
    r = family.grid.nodes
    return -float(np.sum(family._surface_density() / (gamma + r**2) ** 2))


def kappa_complex(family: KappaFamily, z: complex) -> complex:
    """int |sigma_hat|^2/(z^2+|xi|^2) dxi/(2pi)^n for z off the imaginary axis."""
    z = complex(z)
    if z.real == 0.0:
        raise ValueError("purely imaginary argument sits on the resolvent cut")
    r = family.grid.nodes
    return complex(np.sum(family._surface_density() / (z * z + r**2)))


@dataclass(frozen=True)
class GammaProfile:
    """Static potential Gamma with -Delta Gamma = sigma, stored via its transform."""

    shape: CouplingShape
    grid: RadialGrid
    hat: np.ndarray  # sigma_hat(xi_k)/xi_k^2 on the grid nodes

    def __call__(self, rho):
        """Physical-space radial values Gamma(rho)."""
        rho = np.asarray(rho, dtype=float)
        n = self.shape.dim
        nu = n / 2.0 - 1.0
        r = self.grid.nodes
        kern = _bessel_kernel(np.outer(rho.ravel(), r), nu)
        f = (2.0 * np.pi) ** (-n / 2.0) * self.hat * r ** (n - 1) * self.grid.weights
        vals = (kern @ f).reshape(rho.shape)
        return vals if rho.shape else float(vals)

    def pairing_with_source(self) -> float:
        """int sigma Gamma dz; equals kappa by Parseval."""
        n = self.shape.dim
        c = sphere_measure_constant(n)
        r = self.grid.nodes
        return float(
            np.sum(c * self.grid.weights * self.shape.fourier_radial(r) * self.hat * r ** (n - 1))
        )


def gamma_potential(shape: CouplingShape, grid: RadialGrid | None = None) -> GammaProfile:
    if grid is None:
        grid = default_grid(shape)
    hat = shape.fourier_radial(grid.nodes) / grid.nodes**2
    return GammaProfile(shape=shape, grid=grid, hat=hat)
