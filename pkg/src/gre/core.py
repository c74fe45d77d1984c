"""Numerical-analysis-informed Gaussian process and its flat-prior limit.

The prior covariance is ``sigma^2 [k0^2 + b(x) b(x') k_e(x, x')]`` and every
quantity here is the ``k0^2 -> inf`` limit.  Linear algebra always goes
through ``K_b = B K_e B`` with ``B = diag(b(x_i))``: factorise ``K_e`` once
and rescale by ``1/b``, since ``b`` can be tiny near the origin.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import mpmath
import numpy as np

from ._linalg import Factor, IllConditionedError, cholesky
from .kernels import KernelSpec, TensorKernel, kernel_from_json

__all__ = [
    "Monomial",
    "AdditiveMonomials",
    "ProductMonomials",
    "CustomPolynomial",
    "bound_from_json",
    "bound_eval",
    "Dataset",
    "GreModel",
    "GrePosterior",
    "Interval",
    "build_kb",
    "fit",
    "predict",
    "credible_interval",
    "finite_k0_posterior",
    "norm_ppf",
    "box_fill_distance",
    "gamma_constant",
    "IllConditionedError",
]


# --------------------------------------------------------------------------
# Error bounds


def _check_point(x, dim):
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if dim is not None and x.shape[0] != dim:
        raise ValueError(f"bound expects {dim}-dimensional points, got {x.shape[0]}")
    if np.any(x < 0):
        raise ValueError("fidelity parameters must be nonnegative")
    return x


@dataclass(frozen=True)
class Monomial:
    """``b(x) = x[axis] ** r``."""

    r: float
    axis: int = 0

    def __post_init__(self):
        if not self.r > 0:
            raise ValueError("convergence order r must be positive")

    dim = None

    def __call__(self, x) -> float:
        x = _check_point(x, None)
        return float(x[self.axis] ** self.r)

    def eval_mp(self, x):
        return mpmath.mpf(float(x[self.axis])) ** mpmath.mpf(self.r)

    def to_json(self):
        return {"form": "monomial", "r": self.r, "axis": self.axis}


@dataclass(frozen=True)
class AdditiveMonomials:
    """``b(x) = sum_i w_i x_i ** r_i``."""

    weights: tuple[float, ...]
    orders: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))
        object.__setattr__(self, "orders", tuple(float(r) for r in self.orders))
        if len(self.weights) != len(self.orders) or not self.orders:
            raise ValueError("weights and orders must be nonempty and of equal length")
        if any(w <= 0 for w in self.weights) or any(r <= 0 for r in self.orders):
            raise ValueError("weights and orders must be positive")

    @property
    def dim(self):
        return len(self.orders)

    def __call__(self, x) -> float:
        x = _check_point(x, self.dim)
        return float(sum(w * xi**r for w, xi, r in zip(self.weights, x, self.orders)))

    def eval_mp(self, x):
        return mpmath.fsum(
            mpmath.mpf(w) * mpmath.mpf(float(xi)) ** mpmath.mpf(r)
            for w, xi, r in zip(self.weights, x, self.orders)
        )

    def to_json(self):
        return {"form": "additive", "weights": list(self.weights), "orders": list(self.orders)}


@dataclass(frozen=True)
class ProductMonomials:
    """``b(x) = prod_i x_i ** r_i``."""

    orders: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "orders", tuple(float(r) for r in self.orders))
        if not self.orders or any(r <= 0 for r in self.orders):
            raise ValueError("orders must be nonempty and positive")

    @property
    def dim(self):
        return len(self.orders)

    def __call__(self, x) -> float:
        x = _check_point(x, self.dim)
        return float(np.prod([xi**r for xi, r in zip(x, self.orders)]))

    def eval_mp(self, x):
        out = mpmath.mpf(1)
        for xi, r in zip(x, self.orders):
            out *= mpmath.mpf(float(xi)) ** mpmath.mpf(r)
        return out

    def to_json(self):
        return {"form": "product", "orders": list(self.orders)}


@dataclass(frozen=True)
class CustomPolynomial:
    """``b(x) = sum_k c_k prod_i x_i ** e_ki`` with positive coefficients.

    Every term must have at least one positive exponent so that ``b(0) = 0``.
    """

    terms: tuple[tuple[float, tuple[float, ...]], ...]

    def __post_init__(self):
        terms = tuple((float(c), tuple(float(e) for e in ex)) for c, ex in self.terms)
        object.__setattr__(self, "terms", terms)
        if not terms:
            raise ValueError("polynomial needs at least one term")
        dims = {len(ex) for _, ex in terms}
        if len(dims) != 1:
            raise ValueError("all exponent tuples must have the same length")
        for c, ex in terms:
            if c <= 0 or any(e < 0 for e in ex) or not any(e > 0 for e in ex):
                raise ValueError("terms need c > 0, exponents >= 0 and no constant term")

    @property
    def dim(self):
        return len(self.terms[0][1])

    def __call__(self, x) -> float:
        x = _check_point(x, self.dim)
        return float(sum(c * np.prod([xi**e for xi, e in zip(x, ex)]) for c, ex in self.terms))

    def eval_mp(self, x):
        total = mpmath.mpf(0)
        for c, ex in self.terms:
            t = mpmath.mpf(c)
            for xi, e in zip(x, ex):
                t *= mpmath.mpf(float(xi)) ** mpmath.mpf(e)
            total += t
        return total

    def to_json(self):
        return {"form": "polynomial", "terms": [[c, list(ex)] for c, ex in self.terms]}


ErrorBound = Monomial | AdditiveMonomials | ProductMonomials | CustomPolynomial


def bound_from_json(obj: dict) -> ErrorBound:
    form = obj["form"].lower()
    if form == "monomial":
        return Monomial(float(obj["r"]), int(obj.get("axis", 0)))
    if form == "additive":
        orders = obj["orders"]
        return AdditiveMonomials(tuple(obj.get("weights", [1.0] * len(orders))), tuple(orders))
    if form == "product":
        return ProductMonomials(tuple(obj["orders"]))
    if form == "polynomial":
        return CustomPolynomial(tuple((c, tuple(ex)) for c, ex in obj["terms"]))
    raise ValueError(f"unknown error-bound form {obj['form']!r}")


def bound_eval(b: ErrorBound, x) -> float:
    return b(x)


def _bound_values(b: ErrorBound, X: np.ndarray) -> np.ndarray:
    return np.array([b(x) for x in X], dtype=float)


# --------------------------------------------------------------------------
# Data and model


@dataclass(frozen=True)
class Dataset:
    """Simulator outputs ``values[i] = f(points[i])`` at distinct fidelities in (0, inf)^d.

    ``values`` may hold mpmath numbers when the data come from an
    extended-precision evaluation.
    """

    points: np.ndarray
    values: np.ndarray
    costs: np.ndarray | None = None

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts.reshape(-1, 1)
        vals = np.asarray(self.values)
        if vals.dtype != object:
            vals = vals.astype(float)
        vals = vals.reshape(-1)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "values", vals)
        if len(pts) < 1:
            raise ValueError("dataset needs at least one point")
        if len(vals) != len(pts):
            raise ValueError(f"{len(pts)} points but {len(vals)} values")
        if not np.all(np.isfinite(pts)) or np.any(pts <= 0):
            bad = int(np.argmax(np.any(~(pts > 0), axis=1)))
            raise ValueError(f"point {bad} has a zero, negative or non-finite component")
        if len({tuple(p) for p in pts}) != len(pts):
            raise ValueError("dataset points must be pairwise distinct")
        if self.costs is not None:
            costs = np.asarray(self.costs, dtype=float).reshape(-1)
            if len(costs) != len(pts) or np.any(costs <= 0):
                raise ValueError("costs must be positive, one per point")
            object.__setattr__(self, "costs", costs)

    @property
    def n(self) -> int:
        return len(self.points)

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def shifted(self, a) -> "Dataset":
        return Dataset(self.points, self.values + a, self.costs)

    def scaled(self, c) -> "Dataset":
        return Dataset(self.points, self.values * c, self.costs)

    def take(self, idx: Sequence[int]) -> "Dataset":
        idx = list(idx)
        costs = None if self.costs is None else self.costs[idx]
        return Dataset(self.points[idx], self.values[idx], costs)


@dataclass(frozen=True)
class GreModel:
    bound: ErrorBound
    kernel: KernelSpec | TensorKernel
    nugget_relative: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.nugget_relative <= 1e-4:
            raise ValueError("nugget_relative must lie in [0, 1e-4]")

    def to_json(self) -> dict:
        return {
            "bound": self.bound.to_json(),
            "kernel": self.kernel.to_json(),
            "nugget_relative": self.nugget_relative,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "GreModel":
        return cls(
            bound_from_json(obj["bound"]),
            kernel_from_json(obj["kernel"]),
            float(obj.get("nugget_relative", 0.0)),
        )


def build_kb(dataset: Dataset, model: GreModel):
    """Return ``(K_b, b, K_e)`` with ``K_b = diag(b) K_e diag(b)``."""
    b = _bound_values(model.bound, dataset.points)
    Ke = model.kernel.gram(dataset.points)
    return b[:, None] * Ke * b[None, :], b, Ke


# --------------------------------------------------------------------------
# Posterior


class Interval(NamedTuple):
    lo: float
    hi: float
    alpha: float
    degenerate: bool


@dataclass(frozen=True)
class GrePosterior:
    """Flat-limit posterior.

    ``weights`` are ``K_b^{-1} 1 / (1' K_b^{-1} 1)``, ``objective`` is
    ``1' K_b^{-1} 1`` and ``var_at_zero = sigma2 / objective``.
    """

    dataset: Dataset
    model: GreModel
    weights: np.ndarray
    mean_at_zero: float
    var_at_zero: float
    sigma2: float
    objective: float
    factor: Factor = field(repr=False)
    flags: tuple[str, ...] = ()
    # internals for prediction
    _u: object = field(default=None, repr=False)
    _z1: object = field(default=None, repr=False)
    _coef: object = field(default=None, repr=False)
    dps: int | None = None

    @property
    def sd_at_zero(self):
        return self.var_at_zero**0.5 if self.dps is None else mpmath.sqrt(self.var_at_zero)

    @property
    def jitter(self) -> float:
        return self.factor.jitter

    def predict(self, x):
        return predict(self, x)

    def cov(self, x, y) -> float:
        return _posterior_cov(self, x, y)

    def interval(self, alpha: float = 0.05) -> Interval:
        return credible_interval(self, alpha)

    def summary(self, alpha: float = 0.05) -> dict:
        ci = credible_interval(self, alpha)
        return {
            "mean_at_zero": float(self.mean_at_zero),
            "sd_at_zero": float(self.sd_at_zero),
            "sigma2": float(self.sigma2),
            "objective": float(self.objective),
            "weights": [float(w) for w in self.weights],
            "interval": {"alpha": alpha, "lo": ci.lo, "hi": ci.hi},
            "degenerate": ci.degenerate,
            "jitter": self.jitter,
            "flags": list(self.flags),
        }


def fit(dataset: Dataset, model: GreModel, dps: int | None = None) -> GrePosterior:
    """Condition the flat-limit GP on ``dataset``.

    With ``dps`` set, kernel evaluation and all linear algebra run in mpmath
    at that many decimal digits.
    """
    if dps is not None:
        with mpmath.workdps(dps):
            return _fit_mp(dataset, model, dps)
    X, f = dataset.points, np.asarray(dataset.values, dtype=float)
    n = len(f)
    b = _bound_values(model.bound, X)
    if np.any(b <= 0):
        raise ValueError("error bound vanishes at a data point; b(x) > 0 is required")
    factor = _factorize(model, X)
    u = 1.0 / b
    z1 = factor.forward(u)
    objective = float(z1 @ z1)
    zf = factor.forward(u * f)
    # one point: the mean is that value and the residual vanishes exactly
    mean = float(f[0]) if n == 1 else float(z1 @ zf) / objective
    resid = f - mean
    zr = factor.forward(u * resid)
    sigma2 = float(zr @ zr) / n
    weights = np.ones(1) if n == 1 else u * factor.backward(z1) / objective
    coef = u * factor.backward(zr)  # K_b^{-1} (f - mean 1)
    flags = ("single_point",) if n == 1 else ()
    if factor.jitter:
        flags += ("jitter",)
    return GrePosterior(
        dataset, model, weights, mean, sigma2 / objective, sigma2, objective,
        factor, flags, u, z1, coef,
    )


def _factorize(model: GreModel, X):
    Ke = model.kernel.gram(X)
    return cholesky(Ke, model.nugget_relative)


def _fit_mp(dataset: Dataset, model: GreModel, dps: int) -> GrePosterior:
    X = dataset.points
    n = len(X)
    f = [mpmath.mpf(v) for v in dataset.values]
    b = [model.bound.eval_mp(x) for x in X]
    if any(v <= 0 for v in b):
        raise ValueError("error bound vanishes at a data point; b(x) > 0 is required")
    Ke = model.kernel.gram_mp(X)
    factor = cholesky(Ke, model.nugget_relative)
    u = mpmath.matrix([1 / v for v in b])
    z1 = factor.forward(u)
    objective = _dot(z1, z1)
    zf = factor.forward(mpmath.matrix([u[i] * f[i] for i in range(n)]))
    mean = f[0] if n == 1 else _dot(z1, zf) / objective
    resid = [f[i] - mean for i in range(n)]
    zr = factor.forward(mpmath.matrix([u[i] * resid[i] for i in range(n)]))
    sigma2 = _dot(zr, zr) / n
    g = factor.backward(z1)
    weights = np.array([u[i] * g[i] / objective for i in range(n)], dtype=object)
    br = factor.backward(zr)
    coef = [u[i] * br[i] for i in range(n)]
    flags = ("single_point",) if n == 1 else ()
    return GrePosterior(
        dataset, model, weights, mean, sigma2 / objective, sigma2, objective,
        factor, flags, u, z1, coef, dps,
    )


def _dot(a, b):
    return mpmath.fsum(a[i] * b[i] for i in range(len(a)))


def _pieces(post: GrePosterior, x):
    """Return ``(b(x), kb, w)`` with ``w = L^{-1} B^{-1} k_b(x)``."""
    X = post.dataset.points
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if np.any(x < 0):
        raise ValueError("prediction point must be componentwise nonnegative")
    bx = post.model.bound(x)
    ke = post.model.kernel.gram(X, x.reshape(1, -1))[:, 0]
    b = 1.0 / post._u
    kb = bx * b * ke
    w = post.factor.forward(bx * ke) if bx != 0 else np.zeros(len(X))
    return bx, kb, w, ke


def predict(post: GrePosterior, x) -> tuple[float, float]:
    """Conditional mean and ``sigma2``-scaled variance at ``x``."""
    if post.dps is not None:
        with mpmath.workdps(post.dps):
            return _predict_mp(post, x)
    bx, kb, w, _ = _pieces(post, x)
    if bx == 0:
        return post.mean_at_zero, post.var_at_zero
    mean = post.mean_at_zero + float(kb @ post._coef)
    kxx = bx * bx * post.model.kernel(x, x)
    t = float(w @ post._z1) - 1.0
    var = kxx - float(w @ w) + t * t / post.objective
    return mean, max(var, 0.0) * post.sigma2


def _posterior_cov(post: GrePosterior, x, y) -> float:
    bx, _, wx, _ = _pieces(post, x)
    by, _, wy, _ = _pieces(post, y)
    kxy = bx * by * post.model.kernel(x, y)
    tx = float(wx @ post._z1) - 1.0
    ty = float(wy @ post._z1) - 1.0
    return post.sigma2 * (kxy - float(wx @ wy) + tx * ty / post.objective)


def _predict_mp(post: GrePosterior, x):
    X = post.dataset.points
    x = np.atleast_1d(np.asarray(x, dtype=float))
    bx = post.model.bound.eval_mp(x)
    if bx == 0:
        return post.mean_at_zero, post.var_at_zero
    ke = post.model.kernel.gram_mp(X, x.reshape(1, -1))
    n = len(X)
    kb = [bx / post._u[i] * ke[i, 0] for i in range(n)]
    mean = post.mean_at_zero + mpmath.fsum(kb[i] * post._coef[i] for i in range(n))
    w = post.factor.forward(mpmath.matrix([bx * ke[i, 0] for i in range(n)]))
    kxx = bx * bx * post.model.kernel.gram_mp(x.reshape(1, -1))[0, 0]
    t = _dot(w, post._z1) - 1
    var = kxx - _dot(w, w) + t * t / post.objective
    return mean, max(var, mpmath.mpf(0)) * post.sigma2


# --------------------------------------------------------------------------
# Credible intervals


_A = (-3.969683028665376e01, 2.209460984245205e02, -2.759285104469687e02,
      1.383577518672690e02, -3.066479806614716e01, 2.506628277459239e00)
_B = (-5.447609879822406e01, 1.615858368580409e02, -1.556989798598866e02,
      6.680131188771972e01, -1.328068155288572e01)
_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e00,
      -2.549732539343734e00, 4.374664141464968e00, 2.938163982698783e00)
_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e00,
      3.754408661907416e00)


def norm_ppf(p: float) -> float:
    """Inverse standard normal CDF: rational approximation plus one Halley step."""
    if not 0.0 < p < 1.0:
        if p == 0.0:
            return -math.inf
        if p == 1.0:
            return math.inf
        raise ValueError("p must lie in [0, 1]")
    if p == 0.5:
        return 0.0
    plow = 0.02425
    if p < plow:
        q = math.sqrt(-2 * math.log(p))
        x = (((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5]) / (
            (((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1
        )
    elif p <= 1 - plow:
        q = p - 0.5
        r = q * q
        x = (((((_A[0] * r + _A[1]) * r + _A[2]) * r + _A[3]) * r + _A[4]) * r + _A[5]) * q / (
            ((((_B[0] * r + _B[1]) * r + _B[2]) * r + _B[3]) * r + _B[4]) * r + 1
        )
    else:
        q = math.sqrt(-2 * math.log1p(-p))
        x = -(((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5]) / (
            (((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1
        )
    # refine on the CDF; erfc keeps relative accuracy in both tails
    e = 0.5 * math.erfc(-x / math.sqrt(2)) - p
    u = e * math.sqrt(2 * math.pi) * math.exp(x * x / 2)
    return x - u / (1 + x * u / 2)


def credible_interval(post: GrePosterior, alpha: float = 0.05) -> Interval:
    if not 0.0 < alpha <= 1.0:
        raise ValueError("alpha must lie in (0, 1]")
    m = float(post.mean_at_zero)
    sd = float(post.sd_at_zero)
    q = norm_ppf(1.0 - alpha / 2.0)
    if sd == 0.0 or q == 0.0:
        return Interval(m, m, alpha, sd == 0.0)
    return Interval(m - q * sd, m + q * sd, alpha, False)


# --------------------------------------------------------------------------
# Finite-k0 reference computation (test oracle)


def finite_k0_posterior(dataset: Dataset, model: GreModel, k0sq: float,
                        sigma2: float = 1.0, dps: int = 50):
    """Ordinary GP conditioning with ``k = sigma2 (k0sq + k_b)`` before any limit.

    Runs densely in mpmath so that the ``k0sq`` term does not swamp ``K_b``.
    Returns ``(mean_fn, cov_fn)`` producing floats.
    """
    X = dataset.points
    n = len(X)
    with mpmath.workdps(dps):
        k0 = mpmath.mpf(k0sq)
        s2 = mpmath.mpf(sigma2)
        b = [model.bound.eval_mp(x) for x in X]
        Ke = model.kernel.gram_mp(X)
        K = mpmath.matrix(n, n)
        for i in range(n):
            for j in range(n):
                K[i, j] = s2 * (k0 + b[i] * b[j] * Ke[i, j])
        f = mpmath.matrix([mpmath.mpf(v) for v in dataset.values])
        alpha = mpmath.lu_solve(K, f)

    def kvec(x):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        bx = model.bound.eval_mp(x)
        ke = model.kernel.gram_mp(X, x.reshape(1, -1))
        return mpmath.matrix([s2 * (k0 + bx * b[i] * ke[i, 0]) for i in range(n)]), bx

    def mean_fn(x) -> float:
        with mpmath.workdps(dps):
            kx, _ = kvec(x)
            return float(_dot(kx, alpha))

    def cov_fn(x, y) -> float:
        with mpmath.workdps(dps):
            kx, bx = kvec(x)
            ky, by = kvec(y)
            xa = np.atleast_1d(np.asarray(x, dtype=float)).reshape(1, -1)
            ya = np.atleast_1d(np.asarray(y, dtype=float)).reshape(1, -1)
            kxy = s2 * (k0 + bx * by * model.kernel.gram_mp(xa, ya)[0, 0])
            return float(kxy - _dot(kx, mpmath.lu_solve(K, ky)))

    return mean_fn, cov_fn


# --------------------------------------------------------------------------
# Diagnostics


class FillDistance(NamedTuple):
    value: float
    exact: bool


def box_fill_distance(points, dim: int | None = None, resolution: int = 64,
                      seed: int | None = None, n_random: int = 0) -> FillDistance:
    """Box fill distance of ``points`` in the unit cube.

    Exact in one dimension (largest gap between consecutive sorted points,
    counting the segments to 0 and 1).  In higher dimensions a lower bound
    from anchoring boxes on a lattice of at most ``resolution**min(d, 3)``
    nodes, optionally supplemented with ``n_random`` uniform anchors.
    """
    P = np.asarray(points, dtype=float)
    if P.size == 0:
        return FillDistance(1.0, dim in (None, 1))
    if P.ndim == 1:
        P = P.reshape(-1, 1) if (dim in (None, 1)) else P.reshape(1, -1)
    d = P.shape[1]
    if np.any(P < 0) or np.any(P > 1):
        raise ValueError("points must lie in [0, 1]^d")
    if d == 1:
        grid = np.concatenate(([0.0], np.sort(P[:, 0]), [1.0]))
        return FillDistance(float(np.max(np.diff(grid))), True)
    per_axis = max(2, int(round(resolution ** (min(d, 3) / d))))
    axis = np.linspace(0.0, 1.0, per_axis, endpoint=False)
    anchors = np.array(list(itertools.product(axis, repeat=d)))
    if n_random:
        rng = np.random.default_rng(seed)
        anchors = np.vstack([anchors, rng.random((n_random, d))])
    best = 0.0
    for chunk in np.array_split(anchors, max(1, len(anchors) // 4096)):
        room = 1.0 - chunk.max(axis=1)
        ahead = np.all(P[None, :, :] >= chunk[:, None, :], axis=2)
        reach = np.max(P[None, :, :] - chunk[:, None, :], axis=2)
        reach = np.where(ahead, reach, np.inf)
        nu = np.minimum(room, reach.min(axis=1))
        best = max(best, float(nu.max()))
    return FillDistance(best, False)


def gamma_constant(d: int) -> int:
    """Constants ``gamma_1 = 2``, ``gamma_d = 2 d (1 + gamma_{d-1})``."""
    if d < 1:
        raise ValueError("d must be a positive integer")
    g = 2
    for k in range(2, d + 1):
        g = 2 * k * (1 + g)
    return g


def fill_distance_threshold(d: int, r: float, s: int) -> float:
    """Fill-distance level below which the finite-smoothness rate is guaranteed."""
    return 1.0 / (gamma_constant(d) * (r + 2 * s))
