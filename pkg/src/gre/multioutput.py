"""Extrapolation of vector-valued outputs observed on a fidelity x index grid.

The prior is ``sigma^2 [k0^2 + k_b(x, x')] k_T(t, t')`` and the data form a
complete Cartesian grid, so the covariance matrix is a Kronecker product.
Only the two factors (sizes ``n1`` and ``n2``) are ever factorised.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._linalg import Factor, cholesky
from .core import Dataset, GreModel, _bound_values
from .kernels import KernelSpec

__all__ = ["GridDataset", "MultiPosterior", "OffGridError", "fit_grid", "predict_grid", "default_index_kernel"]


class OffGridError(ValueError):
    pass


@dataclass(frozen=True)
class GridDataset:
    """``values[i, j] = f(x_points[i], t_points[j])``."""

    x_points: np.ndarray
    t_points: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        X = np.asarray(self.x_points, dtype=float)
        if X.ndim == 1:
            X = X.reshape(-1, 1)
        T = np.asarray(self.t_points, dtype=float).reshape(-1)
        Y = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "x_points", X)
        object.__setattr__(self, "t_points", T)
        object.__setattr__(self, "values", Y)
        # reuse the scalar checks on the fidelity side
        Dataset(X, np.zeros(len(X)))
        if len(np.unique(T)) != len(T):
            raise ValueError("index values must be distinct")
        if Y.shape != (len(X), len(T)):
            raise ValueError(f"values must have shape {(len(X), len(T))}, got {Y.shape}")
        if not np.all(np.isfinite(Y)):
            raise ValueError("grid has missing or non-finite cells; fit each output with scalar GRE instead")

    @classmethod
    def from_long(cls, points, t, f) -> "GridDataset":
        """Assemble from long-format rows; every (x, t) pair must appear exactly once."""
        P = np.asarray(points, dtype=float)
        if P.ndim == 1:
            P = P.reshape(-1, 1)
        t = np.asarray(t, dtype=float).reshape(-1)
        f = np.asarray(f, dtype=float).reshape(-1)
        xs = sorted({tuple(p) for p in P}, key=lambda p: tuple(-v for v in p))
        ts = sorted(set(t.tolist()))
        xi = {p: i for i, p in enumerate(xs)}
        ti = {v: j for j, v in enumerate(ts)}
        Y = np.full((len(xs), len(ts)), np.nan)
        seen = np.zeros_like(Y, dtype=bool)
        for p, tv, fv in zip(P, t, f):
            i, j = xi[tuple(p)], ti[tv]
            if seen[i, j]:
                raise ValueError(f"duplicate row for x={p.tolist()}, t={tv}")
            seen[i, j] = True
            Y[i, j] = fv
        if not seen.all():
            missing = int((~seen).sum())
            raise ValueError(
                f"incomplete grid: {missing} of {seen.size} (x, t) cells missing; "
                "fit each output with scalar GRE instead"
            )
        return cls(np.array(xs), np.array(ts), Y)


def default_index_kernel(t_points) -> KernelSpec:
    """Gaussian kernel whose length-scale equals the span of the index values."""
    t = np.asarray(t_points, dtype=float)
    span = float(t.max() - t.min()) if len(t) > 1 else 1.0
    return KernelSpec("gaussian", 0, (span if span > 0 else 1.0,), 1)


@dataclass(frozen=True)
class MultiPosterior:
    grid: GridDataset
    model: GreModel
    kernel_t: object
    weights: np.ndarray
    means: np.ndarray  # extrapolated value at (0, t_j)
    sigma2: float
    objective: float
    factor_x: Factor = field(repr=False)
    factor_t: Factor = field(repr=False)
    _u: np.ndarray = field(repr=False, default=None)
    _z1: np.ndarray = field(repr=False, default=None)
    _coef: np.ndarray = field(repr=False, default=None)

    def _t_index(self, t) -> int:
        hits = np.nonzero(self.grid.t_points == float(t))[0]
        if len(hits) == 0:
            raise OffGridError(
                f"t={t} is not a training index value; in the flat limit the conditional "
                "covariance off the training index set has no finite limit, so a proper "
                "prior is needed for off-grid prediction"
            )
        return int(hits[0])

    def _x_terms(self, x):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        bx = self.model.bound(x)
        if bx == 0:
            return bx, np.zeros(len(self._u)), np.zeros(len(self._u))
        ke = self.model.kernel.gram(self.grid.x_points, x.reshape(1, -1))[:, 0]
        kb = bx * ke / self._u
        w = self.factor_x.forward(bx * ke)
        return bx, kb, w

    def _x_cov(self, x, y) -> float:
        bx, _, wx = self._x_terms(x)
        by, _, wy = self._x_terms(y)
        kxy = bx * by * self.model.kernel(x, y) if bx and by else 0.0
        tx = float(wx @ self._z1) - 1.0
        ty = float(wy @ self._z1) - 1.0
        return kxy - float(wx @ wy) + tx * ty / self.objective

    def mean(self, x, t) -> float:
        j = self._t_index(t)
        _, kb, _ = self._x_terms(x)
        return float(self.means[j] + kb @ self._coef[:, j])

    def cov(self, x, t, y, s) -> float:
        i, j = self._t_index(t), self._t_index(s)
        kt = self.kernel_t(self.grid.t_points[i : i + 1], self.grid.t_points[j : j + 1])
        return self.sigma2 * kt * self._x_cov(x, y)

    def predict(self, x, t):
        return predict_grid(self, x, t)

    def trajectory(self):
        """``(t, mean, sd)`` of the extrapolated output at x = 0."""
        kt = np.array([self.kernel_t(v, v) for v in self.grid.t_points])
        sd = np.sqrt(np.maximum(self.sigma2 * kt / self.objective, 0.0))
        return self.grid.t_points.copy(), self.means.copy(), sd


def fit_grid(grid: GridDataset, model: GreModel, kernel_t=None) -> MultiPosterior:
    """Flat-limit conditioning on a complete grid.

    The scale estimate is ``tr(R' P R K_T^{-1}) / (n1 n2)`` where
    ``P = K_b^{-1} - K_b^{-1} 1 1' K_b^{-1} / 1'K_b^{-1}1`` and ``R`` the data
    table, the Kronecker form of the scalar estimator.
    """
    kernel_t = default_index_kernel(grid.t_points) if kernel_t is None else kernel_t
    X, Y = grid.x_points, grid.values
    n1, n2 = Y.shape
    b = _bound_values(model.bound, X)
    fx = cholesky(model.kernel.gram(X), model.nugget_relative)
    ft = cholesky(kernel_t.gram(grid.t_points.reshape(-1, 1)), model.nugget_relative)
    u = 1.0 / b
    z1 = fx.forward(u)
    objective = float(z1 @ z1)
    weights = u * fx.backward(z1) / objective
    # same operation order as the scalar fit, column by column
    means = Y[0].copy() if n1 == 1 else (z1 @ fx.forward(u[:, None] * Y)) / objective
    R = Y - means[None, :]
    Z = fx.forward(u[:, None] * R)  # n1 x n2
    W = ft.forward(Z.T)  # n2 x n1: L_T^{-1} Z'
    sigma2 = float(np.sum(W * W)) / (n1 * n2)
    coef = u[:, None] * fx.backward(Z)  # K_b^{-1} R
    return MultiPosterior(grid, model, kernel_t, weights, means, sigma2, objective, fx, ft, u, z1, coef)


def predict_grid(post: MultiPosterior, x, t):
    """Mean and variance at ``(x, t)`` for a training index value ``t``."""
    mean = post.mean(x, t)
    var = post.cov(x, t, x, t)
    return mean, max(var, 0.0)
