"""Radial kernels for the normalised error: Matern, Wendland and Gaussian.

All kernels are of the form ``phi(d_ell(x, y))`` where ``d_ell`` is the
length-scale weighted Euclidean distance.  Wendland radial functions are
built by exact rational integration of truncated powers and are left
unnormalised, so ``phi(0)`` is generally not 1.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from functools import lru_cache
from typing import Sequence

import mpmath
import numpy as np


class Family(str, Enum):
    MATERN = "matern"
    WENDLAND = "wendland"
    GAUSSIAN = "gaussian"


def scaled_distance(x, y, ell) -> float:
    """Length-scale weighted Euclidean distance ``sqrt(sum((x_i-y_i)^2/ell_i^2))``."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    ell = np.atleast_1d(np.asarray(ell, dtype=float))
    if not (x.shape == y.shape == ell.shape):
        raise ValueError(
            f"dimension mismatch: x{x.shape}, y{y.shape}, ell{ell.shape}"
        )
    return float(np.sqrt(np.sum(((x - y) / ell) ** 2)))


# --------------------------------------------------------------------------
# Matern


@lru_cache(maxsize=None)
def _matern_coefficients(s: int) -> tuple[float, ...]:
    # coefficient of z^(s-i), i = 0..s
    a = math.sqrt(2 * s + 1)
    pre = Fraction(math.factorial(s), math.factorial(2 * s))
    out = []
    for i in range(s + 1):
        c = pre * Fraction(
            math.factorial(s + i), math.factorial(i) * math.factorial(s - i)
        )
        out.append(float(c) * (2.0 * a) ** (s - i))
    return tuple(out)


def matern_radial(z, s: int):
    """Matern radial function with half-integer smoothness ``nu = s + 1/2``.

    Accepts a scalar or an array of nonnegative distances.
    """
    if s < 0:
        raise ValueError("smoothness s must be nonnegative")
    z = np.asarray(z, dtype=float)
    coeffs = _matern_coefficients(s)
    poly = np.zeros_like(z)
    for c in coeffs:  # Horner in z, highest power first
        poly = poly * z + c
    out = np.exp(-math.sqrt(2 * s + 1) * z) * poly
    return float(out) if out.ndim == 0 else out


def _matern_radial_mp(z, s: int):
    a = mpmath.sqrt(2 * s + 1)
    total = mpmath.mpf(0)
    pre = mpmath.factorial(s) / mpmath.factorial(2 * s)
    for i in range(s + 1):
        c = mpmath.factorial(s + i) / (mpmath.factorial(i) * mpmath.factorial(s - i))
        total += c * (2 * a * z) ** (s - i)
    return mpmath.exp(-a * z) * pre * total


# --------------------------------------------------------------------------
# Wendland via piecewise polynomials


@dataclass(frozen=True)
class PiecewisePolynomial:
    """Piecewise polynomial in the monomial basis with exact rational coefficients.

    ``segments[k][j]`` is the coefficient of ``z**j`` on
    ``[breakpoints[k], breakpoints[k+1]]``.  The function is zero beyond the
    last breakpoint.
    """

    breakpoints: tuple[Fraction, ...]
    segments: tuple[tuple[Fraction, ...], ...]

    def __post_init__(self):
        if len(self.segments) != len(self.breakpoints) - 1:
            raise ValueError("need exactly one segment per interval")
        if any(b >= a for a, b in zip(self.breakpoints[1:], self.breakpoints)):
            raise ValueError("breakpoints must be strictly ascending")

    @classmethod
    def truncated_power(cls, m: int) -> "PiecewisePolynomial":
        """``(1 - z)_+^m`` on ``[0, 1]``."""
        coeffs = [Fraction(math.comb(m, j) * (-1) ** j) for j in range(m + 1)]
        return cls((Fraction(0), Fraction(1)), (tuple(coeffs),))

    def _segment_index(self, z) -> int | None:
        if z > self.breakpoints[-1] or z < self.breakpoints[0]:
            return None
        k = bisect.bisect_right(self.breakpoints, z) - 1
        return min(k, len(self.segments) - 1)

    def exact(self, z: Fraction) -> Fraction:
        k = self._segment_index(z)
        if k is None:
            return Fraction(0)
        acc = Fraction(0)
        for c in reversed(self.segments[k]):
            acc = acc * z + c
        return acc

    def __call__(self, z) -> float:
        # exact rational evaluation avoids cancellation near the support edge
        if z < 0:
            raise ValueError("z must be nonnegative")
        return float(self.exact(Fraction(float(z))))

    def evaluate_mp(self, z):
        z = mpmath.mpf(z)
        edges = [mpmath.mpf(b.numerator) / b.denominator for b in self.breakpoints]
        if z > edges[-1] or z < edges[0]:
            return mpmath.mpf(0)
        k = min(bisect.bisect_right(edges, z) - 1, len(self.segments) - 1)
        acc = mpmath.mpf(0)
        for c in reversed(self.segments[k]):
            acc = acc * z + mpmath.mpf(c.numerator) / c.denominator
        return acc

    def integrate_upper(self) -> "PiecewisePolynomial":
        """Return ``z -> integral_z^inf t * p(t) dt``."""

        def antiderivative(coeffs):
            # antiderivative of t * p(t): sum c_j t^(j+2) / (j+2)
            out = [Fraction(0), Fraction(0)]
            out.extend(c / (j + 2) for j, c in enumerate(coeffs))
            return out

        def value(coeffs, z):
            acc = Fraction(0)
            for c in reversed(coeffs):
                acc = acc * z + c
            return acc

        antis = [antiderivative(seg) for seg in self.segments]
        nseg = len(self.segments)
        tails = [Fraction(0)] * (nseg + 1)
        for k in range(nseg - 1, -1, -1):
            lo, hi = self.breakpoints[k], self.breakpoints[k + 1]
            tails[k] = tails[k + 1] + value(antis[k], hi) - value(antis[k], lo)
        new_segments = []
        for k in range(nseg):
            hi = self.breakpoints[k + 1]
            const = value(antis[k], hi) + tails[k + 1]
            coeffs = [-c for c in antis[k]]
            coeffs[0] += const
            while len(coeffs) > 1 and coeffs[-1] == 0:
                coeffs.pop()
            new_segments.append(tuple(coeffs))
        return PiecewisePolynomial(self.breakpoints, tuple(new_segments))


@lru_cache(maxsize=None)
def wendland_polynomial(d: int, s: int) -> PiecewisePolynomial:
    if d < 1 or s < 0:
        raise ValueError("Wendland kernel needs d >= 1 and s >= 0")
    p = PiecewisePolynomial.truncated_power(d // 2 + s + 1)
    for _ in range(s):
        p = p.integrate_upper()
    return p


def wendland_radial(z, d: int, s: int):
    """Unnormalised Wendland radial function ``I^s (1-z)_+^(floor(d/2)+s+1)``."""
    poly = wendland_polynomial(d, s)
    if np.ndim(z) == 0:
        return poly(z)
    z = np.asarray(z, dtype=float)
    flat = np.array([poly(v) for v in z.ravel()])
    return flat.reshape(z.shape)


def gaussian_radial(z):
    z = np.asarray(z, dtype=float)
    out = np.exp(-(z**2))
    return float(out) if out.ndim == 0 else out


# --------------------------------------------------------------------------
# Kernel specifications


@dataclass(frozen=True)
class KernelSpec:
    """Radial kernel on R^d with per-axis length-scales."""

    family: Family
    s: int = 0
    ell: tuple[float, ...] = (1.0,)
    dim: int = field(default=0)

    def __post_init__(self):
        object.__setattr__(self, "family", Family(self.family))
        ell = tuple(float(v) for v in np.atleast_1d(self.ell))
        object.__setattr__(self, "ell", ell)
        if self.dim == 0:
            object.__setattr__(self, "dim", len(ell))
        if len(ell) != self.dim:
            raise ValueError(f"{len(ell)} length-scales given for dim={self.dim}")
        if any(not (v > 0 and math.isfinite(v)) for v in ell):
            raise ValueError("length-scales must be positive and finite")
        if int(self.s) != self.s or self.s < 0:
            raise ValueError("smoothness s must be a nonnegative integer")
        object.__setattr__(self, "s", int(self.s))

    def radial(self, z):
        if self.family is Family.MATERN:
            return matern_radial(z, self.s)
        if self.family is Family.WENDLAND:
            return wendland_radial(z, self.dim, self.s)
        return gaussian_radial(z)

    def radial_mp(self, z):
        if self.family is Family.MATERN:
            return _matern_radial_mp(z, self.s)
        if self.family is Family.WENDLAND:
            return wendland_polynomial(self.dim, self.s).evaluate_mp(z)
        return mpmath.exp(-(z**2))

    def __call__(self, x, y) -> float:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if x.shape[-1] != self.dim:
            raise ValueError(f"point of dimension {x.shape[-1]} for a dim={self.dim} kernel")
        return float(self.radial(scaled_distance(x, y, self.ell)))

    def gram(self, X, Y=None) -> np.ndarray:
        X = _as_points(X, self.dim)
        Y = X if Y is None else _as_points(Y, self.dim)
        diff = (X[:, None, :] - Y[None, :, :]) / np.asarray(self.ell)
        return np.asarray(self.radial(np.sqrt(np.sum(diff**2, axis=-1))), dtype=float)

    def gram_mp(self, X, Y=None) -> mpmath.matrix:
        X = _as_points(X, self.dim)
        Y = X if Y is None else _as_points(Y, self.dim)
        out = mpmath.matrix(len(X), len(Y))
        for i, xi in enumerate(X):
            for j, yj in enumerate(Y):
                z2 = mpmath.fsum(
                    ((mpmath.mpf(a) - mpmath.mpf(b)) / mpmath.mpf(l)) ** 2
                    for a, b, l in zip(xi, yj, self.ell)
                )
                out[i, j] = self.radial_mp(mpmath.sqrt(z2))
        return out

    def to_json(self) -> dict:
        return {"family": self.family.value, "s": self.s, "ell": list(self.ell), "dim": self.dim}

    @classmethod
    def from_json(cls, obj: dict) -> "KernelSpec":
        ell = obj.get("ell", [1.0])
        dim = int(obj.get("dim", len(np.atleast_1d(ell))))
        if np.ndim(ell) == 0:
            ell = [float(ell)] * dim
        return cls(Family(obj["family"].lower()), int(obj.get("s", 0)), tuple(ell), dim)


@dataclass(frozen=True)
class TensorKernel:
    """Product of one-dimensional kernels, one factor per axis."""

    factors: tuple[KernelSpec, ...]

    def __post_init__(self):
        object.__setattr__(self, "factors", tuple(self.factors))
        if not self.factors:
            raise ValueError("tensor kernel needs at least one factor")
        for k in self.factors:
            if k.dim != 1:
                raise ValueError("tensor kernel factors must be one-dimensional")

    @property
    def dim(self) -> int:
        return len(self.factors)

    def __call__(self, x, y) -> float:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        y = np.atleast_1d(np.asarray(y, dtype=float))
        if x.shape[-1] != self.dim or y.shape[-1] != self.dim:
            raise ValueError("dimension mismatch")
        return float(np.prod([k(x[i : i + 1], y[i : i + 1]) for i, k in enumerate(self.factors)]))

    def gram(self, X, Y=None) -> np.ndarray:
        X = _as_points(X, self.dim)
        Y = X if Y is None else _as_points(Y, self.dim)
        out = np.ones((len(X), len(Y)))
        for i, k in enumerate(self.factors):
            out *= k.gram(X[:, i : i + 1], Y[:, i : i + 1])
        return out

    def gram_mp(self, X, Y=None) -> mpmath.matrix:
        X = _as_points(X, self.dim)
        Y = X if Y is None else _as_points(Y, self.dim)
        out = mpmath.matrix([[1] * len(Y) for _ in range(len(X))]) if len(X) else mpmath.matrix(0, 0)
        for i, k in enumerate(self.factors):
            g = k.gram_mp(X[:, i : i + 1], Y[:, i : i + 1])
            for a in range(len(X)):
                for b in range(len(Y)):
                    out[a, b] *= g[a, b]
        return out

    def to_json(self) -> dict:
        return {"family": "tensor", "factors": [k.to_json() for k in self.factors]}


def tensor_product(factors: Sequence[KernelSpec]) -> TensorKernel:
    return TensorKernel(tuple(factors))


def kernel_from_json(obj: dict):
    if obj.get("family", "").lower() == "tensor":
        return TensorKernel(tuple(KernelSpec.from_json(f) for f in obj["factors"]))
    return KernelSpec.from_json(obj)


def kernel_eval(spec, x, y) -> float:
    return spec(x, y)


def _as_points(X, dim: int) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X.reshape(-1, 1) if dim == 1 else X.reshape(1, -1)
    if X.shape[1] != dim:
        raise ValueError(f"points of dimension {X.shape[1]} for a dim={dim} kernel")
    return X
