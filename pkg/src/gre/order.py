"""Grid-search estimation of convergence orders, smoothness and length-scale."""

from __future__ import annotations

import itertools
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np

from ._linalg import cholesky
from .core import AdditiveMonomials, Dataset, Monomial, ProductMonomials
from .kernels import Family, KernelSpec, TensorKernel

__all__ = [
    "OrderGrid",
    "OrderEstimate",
    "BoundFamily",
    "AxisEstimate",
    "AxiswiseEstimate",
    "log_quasi_likelihood",
    "estimate_order",
    "estimate_axiswise",
    "FlatDataWarning",
]


class FlatDataWarning(UserWarning):
    pass


class BoundFamily(str, Enum):
    monomial = "monomial"
    additive = "additive"
    product = "product"


@dataclass(frozen=True)
class OrderGrid:
    r_values: tuple[float, ...] = (0.5, 1.0, 2.0)
    s_values: tuple[int, ...] = (0, 1, 2)
    ell_values: tuple[float, ...] | None = None
    family: Family = Family.MATERN

    def __post_init__(self):
        object.__setattr__(self, "r_values", tuple(sorted(float(r) for r in self.r_values)))
        object.__setattr__(self, "s_values", tuple(sorted(int(s) for s in self.s_values)))
        object.__setattr__(self, "family", Family(self.family))
        if not self.r_values or not self.s_values:
            raise ValueError("r and s grids must be nonempty")
        if any(r <= 0 for r in self.r_values) or any(s < 0 for s in self.s_values):
            raise ValueError("r must be positive and s nonnegative")
        if self.ell_values is not None:
            ells = tuple(sorted(float(v) for v in self.ell_values))
            if not ells or any(v <= 0 for v in ells):
                raise ValueError("length-scales must be positive")
            object.__setattr__(self, "ell_values", ells)

    def ells_for(self, points: np.ndarray) -> tuple[float, ...]:
        if self.ell_values is not None:
            return self.ell_values
        return default_ells(points)

    @classmethod
    def from_json(cls, obj: dict) -> "OrderGrid":
        unknown = set(obj) - {"r", "s", "ell", "family"}
        if unknown:
            raise ValueError(f"unknown order-grid keys {sorted(unknown)}; expected r, s, ell, family")
        return cls(
            tuple(obj.get("r", cls.r_values)),
            tuple(obj.get("s", cls.s_values)),
            tuple(obj["ell"]) if obj.get("ell") is not None else None,
            obj.get("family", "matern"),
        )

    def to_json(self) -> dict:
        return {
            "r": list(self.r_values),
            "s": list(self.s_values),
            "ell": None if self.ell_values is None else list(self.ell_values),
            "family": self.family.value,
        }


def default_ells(points: np.ndarray, count: int = 9) -> tuple[float, ...]:
    """Log-spaced over [0.1, 10] times the data range."""
    P = np.asarray(points, dtype=float).reshape(len(points), -1)
    span = float(np.max(P.max(axis=0) - P.min(axis=0)))
    if span <= 0:
        span = float(np.max(np.abs(P)))
    return tuple(float(v) for v in np.geomspace(0.1 * span, 10 * span, count))


@dataclass(frozen=True)
class OrderEstimate:
    r_hat: float | tuple[float, ...]
    s_hat: int
    ell_hat: float
    log_ql: float
    sigma_hat: float
    surface: tuple[tuple, ...] = field(repr=False)
    flat: bool = False

    def to_json(self) -> dict:
        r = list(self.r_hat) if isinstance(self.r_hat, tuple) else self.r_hat
        return {
            "r_hat": r,
            "s_hat": self.s_hat,
            "ell_hat": self.ell_hat,
            "log_ql": self.log_ql,
            "sigma_hat": self.sigma_hat,
            "flat": self.flat,
            "surface": [
                [list(r) if isinstance(r, tuple) else r, s, ell, ll] for r, s, ell, ll in self.surface
            ],
        }


def _quasi_terms(dataset: Dataset, bound, kernel, nugget_relative=0.0):
    """Return ``(Q, logdet K_b, sigma2)`` with ``Q`` the centred quadratic form."""
    X = dataset.points
    f = np.asarray(dataset.values, dtype=float)
    b = np.array([bound(x) for x in X])
    factor = cholesky(kernel.gram(X), nugget_relative)
    u = 1.0 / b
    z1 = factor.forward(u)
    zf = factor.forward(u * f)
    mean = float(z1 @ zf) / float(z1 @ z1)
    zr = factor.forward(u * (f - mean))
    return float(zr @ zr), 2.0 * float(np.sum(np.log(b))) + factor.logdet(), float(zr @ zr) / len(f)


def log_quasi_likelihood(dataset: Dataset, bound, kernel, nugget_relative: float = 0.0) -> float:
    """``-f'K^-1 f + (1'K^-1 f)^2 / 1'K^-1 1 - log det K_b``."""
    if dataset.n < 2:
        raise ValueError("quasi-likelihood needs at least two points")
    q, logdet, _ = _quasi_terms(dataset, bound, kernel, nugget_relative)
    return -q - logdet


def _make_bound(family: BoundFamily, r, d: int):
    if family is BoundFamily.monomial:
        return Monomial(r)
    if family is BoundFamily.additive:
        return AdditiveMonomials((1.0,) * d, r)
    return ProductMonomials(r)


def _is_flat(values) -> bool:
    f = np.asarray(values, dtype=float)
    return bool(np.ptp(f) <= 1e-12 * max(1.0, float(np.max(np.abs(f)))))


def estimate_order(dataset: Dataset, grid: OrderGrid = OrderGrid(),
                   bound_family: BoundFamily | str = BoundFamily.monomial,
                   nugget_relative: float = 0.0, workers: int = 1) -> OrderEstimate:
    """Exhaustive quasi-likelihood search over ``r x s x ell``.

    Ties go to the smallest ``(r, s, ell)``.  For constant data every
    candidate has the same (zero) quadratic part and the log-determinant alone
    is unbounded over the grid, so the smallest candidate is returned with a
    :class:`FlatDataWarning`.
    """
    family = BoundFamily(bound_family)
    d = dataset.dim
    if family is BoundFamily.monomial and d != 1:
        raise ValueError("monomial bound family needs one-dimensional data; use additive or product")
    if dataset.n < 2:
        raise ValueError("order estimation needs at least two points")
    if dataset.n < 3:
        warnings.warn("order estimation with fewer than 3 points is unreliable", UserWarning)
    if family is BoundFamily.monomial:
        r_candidates = list(grid.r_values)
    else:
        r_candidates = list(itertools.product(grid.r_values, repeat=d))
    ells = grid.ells_for(dataset.points)
    cells = [(r, s, ell) for r in r_candidates for s in grid.s_values for ell in ells]

    def evaluate(cell):
        r, s, ell = cell
        kernel = KernelSpec(grid.family, s, (ell,) * d, d)
        try:
            q, logdet, sigma2 = _quasi_terms(dataset, _make_bound(family, r, d), kernel, nugget_relative)
        except np.linalg.LinAlgError:
            return -math.inf, math.nan
        return -q - logdet, sigma2

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(evaluate, cells))
    else:
        results = [evaluate(c) for c in cells]

    surface = tuple((r, s, ell, ll) for (r, s, ell), (ll, _) in zip(cells, results))
    if all(ll == -math.inf for ll, _ in results):
        raise np.linalg.LinAlgError("every candidate in the order grid is numerically infeasible")

    flat = _is_flat(dataset.values)
    if flat:
        warnings.warn("data are constant; returning the smallest grid candidate", FlatDataWarning)
        best = next(i for i, (ll, _) in enumerate(results) if ll > -math.inf)
    else:
        best = None
        for i, (ll, _) in enumerate(results):
            if ll == -math.inf:
                continue
            if best is None or ll > results[best][0] + 1e-12 * abs(results[best][0]):
                best = i
    r, s, ell = cells[best]
    ll, sigma2 = results[best]
    return OrderEstimate(r, s, ell, ll, math.sqrt(max(sigma2, 0.0)), surface, flat)


@dataclass(frozen=True)
class AxisEstimate:
    axis: int
    r: float
    s: int
    ell: float
    sigma_hat: float
    estimate: OrderEstimate = field(repr=False)


@dataclass(frozen=True)
class AxiswiseEstimate:
    axes: tuple[AxisEstimate, ...]
    bound: AdditiveMonomials
    kernel: TensorKernel
    family: Family

    def to_json(self) -> dict:
        return {
            "axes": [
                {"axis": a.axis, "r": a.r, "s": a.s, "ell": a.ell, "sigma_hat": a.sigma_hat,
                 "flat": a.estimate.flat}
                for a in self.axes
            ],
            "bound": self.bound.to_json(),
            "kernel": self.kernel.to_json(),
        }


def estimate_axiswise(datasets: Sequence[Dataset], grid: OrderGrid = OrderGrid(),
                      nugget_relative: float = 0.0, workers: int = 1) -> AxiswiseEstimate:
    """Per-axis monomial fits, assembled into an additive bound and tensor kernel.

    ``datasets[i]`` varies only component ``i``; the other components are held
    at their lo-fi values.  Axis weights are the per-axis scale estimates
    (standard deviations).  A flat axis has zero scale; its weight is floored
    at ``1e-8`` times the largest weight so the bound stays positive.
    """
    axes = []
    for i, ds in enumerate(datasets):
        if ds.n < 2:
            raise ValueError(f"axis {i} dataset needs at least two points")
        pts = ds.points
        if pts.shape[1] > 1:
            others = np.delete(pts, i, axis=1)
            if np.ptp(others, axis=0).max(initial=0.0) > 0:
                raise ValueError(f"axis {i} dataset varies components other than {i}")
            pts = pts[:, i]
        est = estimate_order(Dataset(pts, ds.values), grid, BoundFamily.monomial, nugget_relative, workers)
        axes.append(AxisEstimate(i, est.r_hat, est.s_hat, est.ell_hat, est.sigma_hat, est))
    top = max(a.sigma_hat for a in axes)
    floor = 1e-8 * top if top > 0 else 1.0
    weights = tuple(max(a.sigma_hat, floor) for a in axes)
    bound = AdditiveMonomials(weights, tuple(a.r for a in axes))
    kernel = TensorKernel(tuple(KernelSpec(grid.family, a.s, (a.ell,), 1) for a in axes))
    return AxiswiseEstimate(tuple(axes), bound, kernel, grid.family)
