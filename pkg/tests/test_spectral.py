import numpy as np
import pytest

from qubitfield.coupling import calibrate_amplitude, make_shape
from qubitfield.spectral import (
    build_coupled_operator,
    build_L_extra,
    build_L_hartree,
    build_Lscript_extra,
    build_Lscript_hartree,
    coupled_discrete_closed_forms,
    operator_grid,
    quadruple_symmetry_defect,
    spectrum_coupled_Lscript,
    spectrum_extra_hartree,
    spectrum_L_hartree,
    split_essential_cluster,
)
from qubitfield.state import J4
from qubitfield.stationary import RegimeError, get_branch


def test_factorization_and_symmetry():
    for kappa, tau in [(1.4, 1), (1.4, -1), (2.4, 1)]:
        L = build_L_hartree(kappa, tau).entries
        Ls = build_Lscript_hartree(kappa, tau).entries
        assert np.abs(L - J4 @ Ls).max() <= 1e-14
        assert np.abs(Ls - Ls.T).max() <= 1e-14
    for kappa in (2.4, 2.5):
        assert np.abs(build_L_extra(kappa).entries - J4 @ build_Lscript_extra(kappa).entries).max() <= 1e-14


def test_hessian_spectrum_closed_forms():
    # tau=+1: {0, -kappa, 2, 2-kappa}; tau=-1: {0, -kappa, -2, -2-kappa}
    ev = np.sort(np.linalg.eigvalsh(build_Lscript_hartree(1.4, 1).entries))
    assert np.allclose(ev, sorted([0, -1.4, 2, 0.6]), atol=1e-12)
    ev = np.sort(np.linalg.eigvalsh(build_Lscript_hartree(1.4, -1).entries))
    assert np.allclose(ev, sorted([0, -1.4, -2, -3.4]), atol=1e-12)
    assert np.sum(ev < -1e-12) == 3  # Morse index 3 for tau=-1


def test_hessian_eigenvectors():
    for tau in (1, -1):
        Ls = build_Lscript_hartree(1.4, tau).entries
        vecs = {
            0.0: np.array([0, 1, 0, tau]),
            -1.4: np.array([1, 0, tau, 0]),
            2 * tau - 1.4: np.array([1, 0, -tau, 0]),
            2 * tau: np.array([0, 1, 0, -tau]),
        }
        for lam, v in vecs.items():
            assert np.linalg.norm(Ls @ v - lam * v) < 1e-14


@pytest.mark.parametrize(
    "kappa,tau,expected",
    [
        (1.4, 1, 1.0954451150103324j),
        (1.4, -1, 2.6076809620810595j),
        (2.4, 1, 0.8944271909999159),
    ],
)
def test_generator_spectrum(kappa, tau, expected):
    rep = spectrum_L_hartree(kappa, tau)
    lams = sorted((e.as_complex() for e in rep.eigenvalues), key=lambda z: (z.real, z.imag))
    assert any(abs(l - expected) < 1e-12 for l in lams)
    assert any(abs(l + expected) < 1e-12 for l in lams)
    assert rep.jordan and rep.jordan[0]["algebraic"] == 2 and rep.jordan[0]["geometric"] == 1


def test_extra_generator_spectrum():
    rep = spectrum_extra_hartree(2.5)
    lams = [e.as_complex() for e in rep.eigenvalues]
    assert any(abs(l - 1.5j) < 1e-12 for l in lams)
    assert np.allclose(
        rep.lscript_eigenvalues, sorted([0.0, 2.5, 1.212214450449026, -3.712214450449026])
    )
    rep24 = spectrum_extra_hartree(2.4)
    assert np.allclose(
        rep24.lscript_eigenvalues, sorted([0.0, 2.4, 1.0271057451320085, -3.4271057451320086])
    )
    assert sum(1 for x in rep24.lscript_eigenvalues if x < 0) == 1
    with pytest.raises(RegimeError):
        spectrum_extra_hartree(1.4)


@pytest.fixture(scope="module")
def shape14():
    return calibrate_amplitude(make_shape("gaussian"), 1.4)


def test_coupled_operator_structure(shape14):
    b = get_branch("symmetric_plus", 1.4)
    grid = operator_grid(shape14, 128)
    op = build_coupled_operator(b, shape14, grid)
    assert op.dim == 4 + 4 * 128
    assert np.abs(op.lscript - op.lscript.T).max() <= 1e-14
    assert np.abs(op.jmat + op.jmat.T).max() <= 1e-14
    assert np.abs(op.generator() - op.jmat @ op.lscript).max() <= 1e-12
    kv = op.kernel_vector()
    assert np.linalg.norm(op.lscript @ kv) <= 1e-10


def test_coupled_spectrum_symmetric(shape14):
    b = get_branch("symmetric_plus", 1.4)
    rep = spectrum_coupled_Lscript(b, shape14, operator_grid(shape14, 128))
    expected = [-0.6232125, 0.0, 0.1263897, 1.1232125, 2.0, 2.3736103]
    assert np.allclose(rep.lscript_eigenvalues, expected, atol=2e-6)
    assert rep.essential == [0.5]
    assert sum(1 for x in rep.lscript_eigenvalues if x < -1e-9) == 1

    bm = get_branch("symmetric_minus", 1.4)
    repm = spectrum_coupled_Lscript(bm, shape14, operator_grid(shape14, 128))
    negatives = [x for x in repm.lscript_eigenvalues if x < -1e-9]
    assert np.allclose(sorted(negatives), [-2.2541609, -2.0, -0.6232125], atol=2e-6)


def test_coupled_spectrum_extra_branch():
    shape = calibrate_amplitude(make_shape("gaussian"), 2.4)
    b = get_branch("asym_plus", 2.4)
    rep = spectrum_coupled_Lscript(b, shape, operator_grid(shape, 128))
    negatives = [x for x in rep.lscript_eigenvalues if x < -1e-9]
    assert len(negatives) == 1  # quartic has exactly one negative root


def test_essential_cluster_grows(shape14):
    b = get_branch("symmetric_plus", 1.4)
    sizes = []
    discretes = []
    for n in (64, 128):
        op = build_coupled_operator(b, shape14, operator_grid(shape14, n))
        disc, cluster = split_essential_cluster(np.linalg.eigvalsh(op.lscript))
        sizes.append(len(cluster))
        discretes.append(np.sort(disc))
    assert sizes[1] > sizes[0]
    # discrete eigenvalues are mesh-independent
    assert len(discretes[0]) == len(discretes[1])
    assert np.abs(discretes[0] - discretes[1]).max() <= 1e-7


def test_generator_quadruple_symmetry(shape14):
    b = get_branch("symmetric_minus", 1.4)
    op = build_coupled_operator(b, shape14, operator_grid(shape14, 64))
    ev = np.linalg.eigvals(op.generator())
    assert quadruple_symmetry_defect(ev) <= 1e-8


def test_closed_forms_solve_secular_equations():
    for lam in coupled_discrete_closed_forms("symmetric_plus", 1.4):
        q1 = lam**2 - lam / 2 - 0.7
        q2 = lam**2 - 2.5 * lam + 1 - 0.7
        assert min(abs(q1), abs(q2), abs(lam), abs(lam - 2)) < 1e-12
