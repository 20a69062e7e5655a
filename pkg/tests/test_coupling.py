import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qubitfield.coupling import (
    KappaFamily,
    ResolutionError,
    calibrate_amplitude,
    compute_kappa,
    default_grid,
    gamma_potential,
    kappa_complex,
    kappa_gamma,
    make_shape,
    radial_grid,
)

# adaptive-quadrature oracles (scipy.integrate.quad, computed independently
# of the Gauss-Legendre machinery under test) frozen as constants
KAPPA_GAUSSIAN_111_3 = 11.136655993663414  # also equals 2*pi^(3/2)
KAPPA_BUMP_111_3 = 0.025020686058654283
KAPPA_GAMMA_1_AT_242 = 0.5859493821380248
KAPPA_Z_1P2J_AT_05604 = -0.020339337814376926 - 0.05787435973770519j
GAMMA_AT_ORIGIN_GAUSSIAN = 1.0


def test_make_shape_validation():
    with pytest.raises(ValueError):
        make_shape("gaussian", amplitude=0.0)
    with pytest.raises(ValueError):
        make_shape("gaussian", n=2)
    with pytest.raises(ValueError):
        make_shape("triangle")


def test_gaussian_transform_closed_form():
    s = make_shape("gaussian", 1.0, 1.0, 3)
    xi = np.linspace(0.0, 5.0, 40)
    assert np.allclose(s.fourier_radial(xi), (2 * np.pi) ** 1.5 * np.exp(-xi**2 / 2), rtol=1e-14)


def test_kappa_gaussian_matches_oracle():
    s = make_shape("gaussian", 1.0, 1.0, 3)
    assert abs(compute_kappa(s) - KAPPA_GAUSSIAN_111_3) < 1e-10 * KAPPA_GAUSSIAN_111_3


def test_kappa_bump_matches_oracle():
    s = make_shape("bump", 1.0, 1.0, 3)
    assert abs(compute_kappa(s) - KAPPA_BUMP_111_3) < 1e-9 * KAPPA_BUMP_111_3


def test_kappa_quadratic_in_amplitude():
    s1 = make_shape("gaussian", 1.0, 1.0, 3)
    s2 = make_shape("gaussian", 2.0, 1.0, 3)
    assert np.isclose(compute_kappa(s2), 4.0 * compute_kappa(s1), rtol=1e-13)


@pytest.mark.parametrize("target", [1.4, 2.42, 0.5604])
def test_calibration_hits_target(target):
    s = calibrate_amplitude(make_shape("gaussian"), target)
    assert abs(compute_kappa(s) - target) < 1e-10 * target


def test_grid_self_test_catches_bad_resolution():
    with pytest.raises(ResolutionError):
        radial_grid(30.0, panels=2, order=4)


def test_kappa_gamma_oracle_and_limits():
    fam = KappaFamily.build(calibrate_amplitude(make_shape("gaussian"), 2.42))
    assert abs(kappa_gamma(fam, 1.0) - KAPPA_GAMMA_1_AT_242) < 1e-9
    assert np.isclose(kappa_gamma(fam, 0.0), fam.kappa, rtol=1e-13)
    vals = [kappa_gamma(fam, g) for g in (1.0, 10.0, 100.0)]
    assert vals[0] > vals[1] > vals[2] > 0


def test_kappa_gamma_monotone_sampled():
    fam = KappaFamily.build(make_shape("gaussian"))
    gammas = np.logspace(-3, 3, 50)
    vals = np.array([kappa_gamma(fam, g) for g in gammas])
    assert np.all(np.diff(vals) < 0)
    assert np.all(vals > 0) and np.all(vals <= fam.kappa)


def test_kappa_complex_oracle():
    fam = KappaFamily.build(calibrate_amplitude(make_shape("gaussian"), 0.5604))
    z = kappa_complex(fam, 1 + 2j)
    assert abs(z - KAPPA_Z_1P2J_AT_05604) < 1e-9


def test_kappa_complex_symmetries():
    fam = KappaFamily.build(make_shape("gaussian"))
    assert kappa_complex(fam, 2 - 1j) == np.conj(kappa_complex(fam, 2 + 1j))
    # real axis consistency with the screened family
    assert abs(kappa_complex(fam, 1.5) - kappa_gamma(fam, 1.5**2)) < 1e-12
    with pytest.raises(ValueError):
        kappa_complex(fam, 1j)


def test_gamma_potential_pairing_and_origin():
    s = make_shape("gaussian")
    prof = gamma_potential(s)
    assert abs(prof.pairing_with_source() - compute_kappa(s)) < 1e-9
    assert abs(prof(np.float64(0.0)) - GAMMA_AT_ORIGIN_GAUSSIAN) < 1e-8


def test_gamma_potential_linear_in_amplitude():
    g1 = gamma_potential(make_shape("gaussian", 1.0))
    g2 = gamma_potential(make_shape("gaussian", 3.0))
    rho = np.array([0.0, 0.5, 1.0, 2.0])
    assert np.allclose(g2(rho), 3.0 * g1(rho), rtol=1e-12)


def test_determinism():
    s = make_shape("gaussian", 1.3, 0.7, 4)
    assert compute_kappa(s) == compute_kappa(s)
    fam = KappaFamily.build(s)
    assert kappa_complex(fam, 0.3 + 4j) == kappa_complex(fam, 0.3 + 4j)


@settings(deadline=None, max_examples=25)
@given(
    amp=st.floats(0.2, 3.0),
    width=st.floats(0.5, 2.0),
    n=st.integers(3, 5),
)
def test_kappa_positive_and_scaling_property(amp, width, n):
    s = make_shape("gaussian", amp, width, n)
    k = compute_kappa(s)
    assert k > 0
    s2 = make_shape("gaussian", 2 * amp, width, n)
    assert np.isclose(compute_kappa(s2), 4 * k, rtol=1e-12)


@settings(deadline=None, max_examples=20)
@given(re=st.floats(0.2, 3.0), im=st.floats(-3.0, 3.0))
def test_kappa_complex_conjugation_property(re, im):
    fam = KappaFamily.build(make_shape("gaussian"))
    assert kappa_complex(fam, complex(re, -im)) == np.conj(kappa_complex(fam, complex(re, im)))
