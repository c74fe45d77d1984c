import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gre.classical import (
    Custom,
    DegenerateBasisError,
    RichardsonPowers,
    Sequence,
    Shanks,
    e_algorithm,
    germain_bonne,
    richardson,
    shanks,
    thiele,
)


def halving(n, start=1.0):
    return start * 0.5 ** np.arange(n)


# -- E-algorithm ---------------------------------------------------------------


def test_exact_ansatz_recovered():
    g = lambda k, seq: math.cos(k) + k * k
    seq = Sequence([5 + 3 * g(k, None) for k in range(4)])
    assert e_algorithm(seq, Custom((g,))) == pytest.approx(5.0, rel=1e-12)
    assert e_algorithm(seq, Custom((g,)), m=2) == pytest.approx(5.0, rel=1e-12)


def test_no_basis_is_identity():
    seq = Sequence([1.5, 2.5, 3.5])
    assert [e_algorithm(seq, Custom(()), m) for m in range(3)] == [1.5, 2.5, 3.5]


def test_richardson_basis_on_quadratic():
    x = np.array([1, 0.5, 0.25])
    seq = Sequence(1 + x + x**2, x)
    assert e_algorithm(seq, RichardsonPowers(2)) == pytest.approx(1.0, abs=1e-14)


def test_random_ansatz_instances():
    rng = np.random.default_rng(0)
    for _ in range(100):
        n = int(rng.integers(1, 5))
        S = rng.normal()
        coef = rng.normal(size=n)
        fns = tuple((lambda k, seq, c=c, w=w: math.sin(w * k + c)) for c, w in rng.uniform(0.3, 2, (n, 2)))
        y = [S + sum(a * g(k, None) for a, g in zip(coef, fns)) for k in range(n + 3)]
        seq = Sequence(y)
        assert e_algorithm(seq, Custom(fns), m=int(rng.integers(0, 3))) == pytest.approx(S, abs=1e-10 * (1 + abs(S)))


def test_degenerate_basis_raises():
    with pytest.raises(DegenerateBasisError):
        germain_bonne(Sequence([2.0, 2.0, 2.0, 2.0]), 2)
    g = lambda k, seq: 1.0  # duplicates the constant column
    with pytest.raises(DegenerateBasisError):
        e_algorithm(Sequence([1.0, 2.0, 3.0]), Custom((g,)))
    with pytest.raises(ValueError):
        e_algorithm(Sequence([1.0, 2.0]), RichardsonPowers(2))


# -- Richardson ------------------------------------------------------------------


def test_two_point_linear():
    h, f0, c1 = 0.3, 2.5, -1.75
    seq = Sequence([f0 + c1 * 2 * h, f0 + c1 * h], [2 * h, h])
    assert richardson(seq, r=1).y[0] == pytest.approx(f0, rel=1e-15)


def test_constant_and_quadratic():
    assert richardson(Sequence([4.0, 4.0, 4.0], [1, 0.5, 0.25])).y.tolist() == [4.0]
    x = np.array([1, 0.5])
    assert richardson(Sequence(1 + x**2, x), r=2).y[0] == 1.0


def test_random_polynomials_exact():
    rng = np.random.default_rng(1)
    for _ in range(100):
        deg = int(rng.integers(1, 5))
        c = rng.normal(size=deg + 1)
        x = np.sort(rng.uniform(0.05, 1, deg + 1 + int(rng.integers(0, 3))))[::-1]
        y = np.polyval(c[::-1], x)
        out = richardson(Sequence(y, x), r=1, depth=deg)
        assert np.allclose(out.y, c[0], atol=1e-10 * (1 + np.abs(c).sum()))


def test_tableau_equals_e_algorithm():
    rng = np.random.default_rng(2)
    for _ in range(50):
        x = np.sort(rng.uniform(0.05, 1, 6))[::-1]
        seq = Sequence(rng.normal(size=6), x)
        r, step = rng.choice([1.0, 2.0]), rng.choice([1.0, 2.0])
        for depth in range(1, 5):
            col = richardson(seq, r, depth, step)
            for m, v in zip(col.index, col.y):
                ref = e_algorithm(seq, RichardsonPowers(depth, r, step), m)
                assert v == pytest.approx(ref, rel=1e-9, abs=1e-9)
            assert col.x.tolist() == x[depth:].tolist()


@given(a=st.floats(-10, 10), b=st.floats(-10, 10), seed=st.integers(0, 10**6))
def test_richardson_affine_equivariance(a, b, seed):
    rng = np.random.default_rng(seed)
    x = halving(5)
    y = rng.normal(size=5)
    base = richardson(Sequence(y, x), 1.0).y
    moved = richardson(Sequence(a * y + b, x), 1.0).y
    assert moved == pytest.approx(a * base + b, abs=1e-9 * (1 + abs(a) + abs(b)))


def test_richardson_validation():
    with pytest.raises(ValueError):
        richardson(Sequence([1.0, 2.0]))
    with pytest.raises(ValueError):
        richardson(Sequence([1.0], [0.5]))
    with pytest.raises(ValueError):
        Sequence([1.0, 2.0], [0.5, 1.0])


# -- Shanks ------------------------------------------------------------------------


def test_shanks_geometric():
    out = shanks(Sequence([3.0, 2.0, 1.5]))
    assert out.y.tolist() == [1.0] and out.index == (0,)


def test_shanks_arithmetic_is_undefined():
    out = shanks(Sequence([0.0, 1.0, 2.0, 3.0]))
    assert len(out) == 0 and out.index == ()


def test_shanks_leibniz():
    partial = np.cumsum([(-1) ** k / (2 * k + 1) for k in range(3)])
    out = shanks(Sequence(partial))
    assert abs(out.y[0] - math.pi / 4) < abs(partial[2] - math.pi / 4)


def test_shanks_random_geometric():
    rng = np.random.default_rng(3)
    for _ in range(100):
        A, B = rng.normal(size=2)
        q = rng.uniform(-0.9, 0.9)
        if abs(q) < 0.05 or abs(B) < 1e-3:
            continue
        y = A + B * q ** np.arange(5)
        out = shanks(Sequence(y))
        assert np.allclose(out.y, A, atol=1e-10 * (1 + abs(A) + abs(B)))


def test_shanks_matches_e_algorithm():
    y = np.array([1.0, 0.3, 0.55, 0.48, 0.5])
    closed = shanks(Sequence(y))
    for m, v in zip(closed.index, closed.y):
        assert v == pytest.approx(e_algorithm(Sequence(y), Shanks(1), m), rel=1e-12)


@given(a=st.floats(0.1, 10), b=st.floats(-10, 10))
def test_shanks_affine_equivariance(a, b):
    y = np.array([1.0, 0.3, 0.55, 0.48])
    base = shanks(Sequence(y)).y
    assert shanks(Sequence(a * y + b)).y == pytest.approx(a * base + b, rel=1e-10, abs=1e-10)


# -- Germain-Bonne and Thiele --------------------------------------------------------


def test_germain_bonne_geometric_remainder():
    rng = np.random.default_rng(4)
    for _ in range(100):
        S, B, q = rng.normal(), rng.normal(), rng.uniform(0.1, 0.9)
        if abs(B) < 1e-3:
            continue
        y = S + B * q ** np.arange(4)
        assert germain_bonne(Sequence(y), 2, int(rng.integers(0, 2))) == pytest.approx(S, abs=1e-10 * (1 + abs(S)))


def test_thiele_rational():
    x = np.array([1, 0.5, 0.25])
    y = (1 + x) / (1 + 2 * x)
    assert thiele(Sequence(y, x), 1) == pytest.approx(1.0, abs=1e-14)


def test_thiele_order_zero_is_identity():
    seq = Sequence([3.0, 1.0, 4.0, 1.5], halving(4))
    assert [thiele(seq, 0, m) for m in range(4)] == [3.0, 1.0, 4.0, 1.5]


def test_thiele_random_rationals():
    rng = np.random.default_rng(5)
    done = 0
    while done < 100:
        a0, a1, b1 = rng.normal(size=3)
        x = np.sort(rng.uniform(0.05, 1, 3))[::-1]
        den = 1 + b1 * x
        if np.min(np.abs(den)) < 0.2 or abs(a1 - a0 * b1) < 1e-2:
            continue
        y = (a0 + a1 * x) / den
        assert thiele(Sequence(y, x), 1) == pytest.approx(a0, abs=1e-10 * (1 + abs(a0)))
        done += 1


def test_thiele_polynomial_of_degree_p():
    rng = np.random.default_rng(6)
    for _ in range(100):
        c0, c1 = rng.normal(size=2)
        x = np.sort(rng.uniform(0.05, 1, 3))[::-1]
        try:
            got = thiele(Sequence(c0 + c1 * x, x), 1)
        except DegenerateBasisError:
            # y x is then a combination of 1 and x only if c1 = 0; skip exact-zero slopes
            assert abs(c1) < 1e-12
            continue
        assert got == pytest.approx(c0, abs=1e-8 * (1 + abs(c0) + abs(c1)))
