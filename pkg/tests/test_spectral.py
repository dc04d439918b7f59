import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from seqinv.spectral import BasisKind, SpectralProblem, basis_block, basis_eval, power_law_noise, volterra_spectrum

# 30-digit values of 1/((i - 1/2) pi) from mpmath
K1 = 0.63661977236758134307553505349
K3 = 0.127323954473516268615107010698


def gauss_legendre(nodes=400):
    t, w = np.polynomial.legendre.leggauss(nodes)
    return 0.5 * (t + 1.0), 0.5 * w


def test_volterra_values():
    fwd = volterra_spectrum(3)
    assert fwd.p == 1.0 and fwd.c1 == pytest.approx(np.pi)
    assert fwd.k[0] == pytest.approx(K1, rel=1e-15)
    assert fwd.k[2] == pytest.approx(K3, rel=1e-15)


def test_volterra_sandwich_and_decay():
    fwd = volterra_spectrum(5000)
    i = np.arange(1, 5001)
    ik = i * fwd.k
    assert np.all(np.diff(fwd.k) < 0)
    assert np.all(ik >= 1 / np.pi) and np.all(ik <= 2 / np.pi)
    assert ik[-1] == pytest.approx(1 / np.pi, rel=1e-3)


@pytest.mark.parametrize("n", [0, -1, 2.5])
def test_volterra_rejects_bad_n(n):
    with pytest.raises(ValueError):
        volterra_spectrum(n)


def test_basis_point_values():
    assert basis_eval(BasisKind.OUTPUT, 1, 0.0) == 0.0
    assert basis_eval("input", 1, 0.0) == pytest.approx(1.4142135623730951, rel=1e-15)
    with pytest.raises(ValueError):
        basis_eval("input", 1, 1.5)
    with pytest.raises(ValueError):
        basis_eval("output", 0, 0.5)


@pytest.mark.parametrize("kind", list(BasisKind))
def test_orthonormality(kind):
    x, w = gauss_legendre()
    block = basis_eval(kind, np.arange(1, 21)[:, None], x[None, :])
    gram = (block * w) @ block.T
    assert np.allclose(gram, np.eye(20), atol=1e-6)


def test_basis_block_matches_eval_and_is_cached():
    x = np.linspace(0, 1, 11)
    a = basis_block("input", 7, x)
    assert np.array_equal(a, basis_eval("input", np.arange(1, 8)[:, None], x[None, :]))
    assert basis_block("input", 7, x.copy()) is a
    assert not a.flags.writeable


def test_power_law_noise_values():
    assert power_law_noise(0.5, 2.0, 4)[3] == 4.0
    assert np.all(power_law_noise(0.0, 3.0, 10) == 3.0)
    assert power_law_noise(-2.0, 2.0, 10)[9] == pytest.approx(0.02, rel=1e-14)
    with pytest.raises(ValueError):
        power_law_noise(0.5, 0.0, 4)


@settings(max_examples=200, deadline=None)
@given(gamma=st.floats(-3, 3), scale=st.floats(0.1, 10), n=st.integers(1, 300))
def test_power_law_noise_sandwich(gamma, scale, n):
    k = volterra_spectrum(n)
    prob = SpectralProblem(k.k, power_law_noise(gamma, scale, n), 1.0, gamma, k.c1, max(scale, 1 / scale))
    assert prob.satisfies_sandwich(1e-12)


def test_problem_validation():
    with pytest.raises(ValueError):
        SpectralProblem([1.0, 2.0], [1.0])
    with pytest.raises(ValueError):
        SpectralProblem([1.0, 0.0], [1.0, 1.0])
    with pytest.raises(ValueError):
        SpectralProblem([], [])


def test_problem_constructors():
    v = SpectralProblem.volterra(100, gamma=-1.0)
    assert v.n == 100 and v.p_tilde == 0.0 and v.satisfies_sandwich()
    pl = SpectralProblem.power_law(50, 2.0, 0.5, k_scale=3.0)
    assert pl.k[1] == pytest.approx(3.0 / 4.0) and pl.satisfies_sandwich()
    swapped = v.with_sigma(np.ones(100))
    assert np.array_equal(swapped.k, v.k) and np.all(swapped.sigma == 1.0)
