import math

import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate, special

from gre.kernels import (
    Family,
    KernelSpec,
    TensorKernel,
    _matern_radial_mp,
    kernel_eval,
    kernel_from_json,
    matern_radial,
    scaled_distance,
    wendland_radial,
)

FAMILIES = [("matern", s) for s in range(4)] + [("wendland", s) for s in range(4)] + [("gaussian", 0)]


def test_scaled_distance_cases():
    assert scaled_distance((0.3, 0.7), (0.3, 0.7), (2.0, 5.0)) == 0.0
    assert scaled_distance((1, 0), (0, 0), (2, 1)) == 0.5
    assert scaled_distance((1, 1), (0, 0), (1, 1)) == pytest.approx(math.sqrt(2), rel=1e-15)


def test_matern_closed_forms():
    for s in range(5):
        assert matern_radial(0.0, s) == 1.0
    assert matern_radial(1.0, 0) == pytest.approx(math.exp(-1), rel=1e-15)
    r3 = math.sqrt(3)
    assert matern_radial(1.0, 1) == pytest.approx(math.exp(-r3) * (1 + r3), rel=1e-14)


@pytest.mark.parametrize("s", range(5))
def test_matern_matches_bessel_form(s):
    nu = s + 0.5
    for z in (0.05, 0.3, 1.0, 2.7, 6.0):
        a = math.sqrt(2 * nu) * z
        oracle = 2 ** (1 - nu) / special.gamma(nu) * a**nu * special.kv(nu, a)
        assert matern_radial(z, s) == pytest.approx(oracle, rel=1e-12)


def _wendland_quad(z, d, s):
    # k-fold application of (I phi)(r) = int_r^inf t phi(t) dt collapses to one integral
    ell = d // 2 + s + 1
    if z >= 1:
        return 0.0
    if s == 0:
        return (1 - z) ** ell
    kern = lambda t: (1 - t) ** ell * t * ((t * t - z * z) / 2) ** (s - 1) / math.factorial(s - 1)
    val, _ = integrate.quad(kern, z, 1, epsabs=0, epsrel=1e-13, limit=200)
    return val


@pytest.mark.parametrize("d", [1, 2, 3])
@pytest.mark.parametrize("s", [0, 1, 2, 3])
def test_wendland_matches_quadrature(d, s):
    for z in np.round(np.arange(0, 1.01, 0.1), 10):
        got = wendland_radial(float(z), d, s)
        want = _wendland_quad(float(z), d, s)
        if want == 0.0:
            assert got == 0.0
        else:
            assert got == pytest.approx(want, rel=1e-10)


def test_wendland_cases():
    assert wendland_radial(0.5, 1, 0) == 0.5
    assert wendland_radial(0.0, 1, 1) == pytest.approx(1 / 12, rel=1e-15)
    for d in (1, 2, 3):
        for s in range(4):
            assert wendland_radial(1.5, d, s) == 0.0


def test_gaussian_cases():
    k = KernelSpec("gaussian", 0, (1.0,), 1)
    assert k(0.4, 0.4) == 1.0
    assert k(0.0, 1.0) == pytest.approx(math.exp(-1), rel=1e-15)
    assert KernelSpec("matern", 2, (0.7,), 1)(0.3, 0.3) == 1.0


@pytest.mark.parametrize("s", range(4))
def test_matern_smoothness_at_origin(s):
    # the even extension phi(|t|) is C^{2s}: odd one-sided derivatives vanish up
    # to order 2s - 1 and the one of order 2s + 1 does not
    with mpmath.workdps(40):
        f = lambda z: _matern_radial_mp(z, s)
        for k in range(1, 2 * s, 2):
            assert abs(mpmath.diff(f, 0, k, direction=1)) < mpmath.mpf(10) ** -20
        assert abs(mpmath.diff(f, 0, 2 * s + 1, direction=1)) > 1e-3


@pytest.mark.parametrize("s", range(3))
def test_matern_finite_differences(s):
    # symmetric finite differences of phi(|t|) at 0 settle for orders <= 2s
    # and blow up under refinement for order 2s + 2 (the first order that
    # sees the kink in derivative 2s + 1)
    def fd(order, h):
        with mpmath.workdps(60):
            g = lambda t: _matern_radial_mp(abs(t), s)
            return mpmath.diff(g, 0, order, h=mpmath.mpf(h), method="step")

    est = [fd(2 * s, h) for h in (1e-3, 1e-4, 1e-5)]
    assert abs(est[-1] - est[-2]) < 1e-3 * (1 + abs(est[-1]))
    wild = [abs(fd(2 * s + 2, h)) for h in (1e-2, 1e-3, 1e-4)]
    assert wild[2] > 5 * wild[1] > 25 * wild[0]


points = st.lists(st.floats(-3, 3), min_size=2, max_size=2)


@pytest.mark.parametrize("family,s", FAMILIES)
@given(x=points, y=points, ell=st.lists(st.floats(0.1, 5), min_size=2, max_size=2))
def test_symmetry(family, s, x, y, ell):
    k = KernelSpec(family, s, tuple(ell), 2)
    assert kernel_eval(k, x, y) == kernel_eval(k, y, x)


@pytest.mark.parametrize("family,s", FAMILIES)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(1, 8), d=st.integers(1, 3))
def test_gram_is_psd(family, s, seed, n, d):
    rng = np.random.default_rng(seed)
    X = rng.random((n, d)) * 2
    k = KernelSpec(family, s, tuple(rng.uniform(0.2, 2.0, d)), d)
    G = k.gram(X)
    assert np.allclose(G, G.T, rtol=0, atol=0)
    assert np.linalg.eigvalsh(G).min() >= -1e-10 * np.trace(G)


@pytest.mark.parametrize("family,s", FAMILIES)
@given(c=st.floats(0.01, 100), seed=st.integers(0, 10**6))
def test_length_scale_invariance(family, s, c, seed):
    rng = np.random.default_rng(seed)
    x, y = rng.random(2), rng.random(2)
    ell = tuple(rng.uniform(0.3, 3, 2))
    k1 = KernelSpec(family, s, ell, 2)
    k2 = KernelSpec(family, s, tuple(v / c for v in ell), 2)
    assert k2(x / c, y / c) == pytest.approx(k1(x, y), rel=1e-12, abs=1e-15)


def test_gram_mp_agrees_with_float():
    rng = np.random.default_rng(3)
    X = rng.random((5, 2))
    for family, s in FAMILIES:
        k = KernelSpec(family, s, (0.7, 1.3), 2)
        with mpmath.workdps(30):
            G = np.array(k.gram_mp(X).tolist(), dtype=float)
        assert np.allclose(G, k.gram(X), rtol=1e-13, atol=1e-15)


def test_tensor_kernel_is_product():
    k = TensorKernel((KernelSpec("matern", 1, (0.5,), 1), KernelSpec("gaussian", 0, (2.0,), 1)))
    x, y = np.array([0.2, 0.9]), np.array([0.6, 0.1])
    assert k(x, y) == pytest.approx(matern_radial(0.8, 1) * math.exp(-0.16), rel=1e-14)
    X = np.array([[0.1, 0.2], [0.3, 0.5], [0.9, 0.9]])
    assert np.allclose(k.gram(X), [[k(a, b) for b in X] for a in X], rtol=1e-14)


def test_json_round_trip():
    for k in (
        KernelSpec("wendland", 2, (0.5, 2.0), 2),
        TensorKernel((KernelSpec("matern", 1, (0.5,), 1), KernelSpec("gaussian", 0, (2.0,), 1))),
    ):
        assert kernel_from_json(k.to_json()) == k
    assert KernelSpec.from_json({"family": "MATERN", "s": 1, "ell": 2.0, "dim": 2}).ell == (2.0, 2.0)


def test_invalid_specs():
    with pytest.raises(ValueError):
        KernelSpec("matern", -1, (1.0,), 1)
    with pytest.raises(ValueError):
        KernelSpec("matern", 1, (0.0,), 1)
    with pytest.raises(ValueError):
        KernelSpec("matern", 1, (1.0, 1.0), 1)
    with pytest.raises(ValueError):
        KernelSpec("cauchy", 1, (1.0,), 1)
    assert Family("wendland") is Family.WENDLAND
