"""Independent reference computations shared by the unit and acceptance tests.

Each one takes the textbook route (dense matrices, explicit enumeration,
extended precision) rather than the factorised formulas in the package.
"""

import itertools

import mpmath
import numpy as np


def seminorm(ds, model, dps=50):
    """``(alpha' K_b alpha, m)`` with ``alpha = K_b^{-1}(f - m 1)``, in mpmath."""
    with mpmath.workdps(dps):
        b = [model.bound.eval_mp(x) for x in ds.points]
        Ke = model.kernel.gram_mp(ds.points)
        n = ds.n
        Kb = mpmath.matrix(n, n)
        for i in range(n):
            for j in range(n):
                Kb[i, j] = b[i] * b[j] * Ke[i, j]
        one = mpmath.matrix([1] * n)
        f = mpmath.matrix([mpmath.mpf(v) for v in ds.values])
        k1 = mpmath.lu_solve(Kb, one)
        kf = mpmath.lu_solve(Kb, f)
        m = sum(kf) / sum(k1)
        alpha = mpmath.lu_solve(Kb, f - m * one)
        return float((alpha.T * Kb * alpha)[0]), float(m)


def naive_design(problem):
    """Best affordable subset by enumerating every subset with a dense solve."""
    n = len(problem.candidates)
    best, best_obj = (), 0.0
    for k in range(1, n + 1):
        for S in itertools.combinations(range(n), k):
            if sum(problem.costs[list(S)]) > problem.budget:
                continue
            P = problem.candidates[list(S)]
            b = np.array([problem.bound(x) for x in P])
            Kb = b[:, None] * problem.kernel.gram(P) * b[None, :]
            one = np.ones(k)
            obj = float(one @ np.linalg.solve(Kb, one))
            if obj > best_obj:
                best, best_obj = S, obj
    return best, best_obj


class KroneckerOracle:
    """Dense GP on the full grid with covariance ``sigma2 (k0sq + k_b) k_T``."""

    def __init__(self, grid, model, kernel_t, sigma2, k0sq=1e8, dps=50):
        self.grid, self.model, self.kernel_t = grid, model, kernel_t
        self.dps = dps
        with mpmath.workdps(dps):
            self.k0 = mpmath.mpf(k0sq)
            self.s2 = mpmath.mpf(sigma2)
            X, T = grid.x_points, grid.t_points
            self.cells = [(X[i], T[j]) for i in range(len(X)) for j in range(len(T))]
            self.K = mpmath.matrix([[self._k(a, b) for b in self.cells] for a in self.cells])
            f = mpmath.matrix([grid.values[i, j] for i in range(len(X)) for j in range(len(T))])
            self.alpha = mpmath.lu_solve(self.K, f)

    def _k(self, a, b):
        (x, t), (y, s) = a, b
        x, y = np.atleast_1d(x), np.atleast_1d(y)
        kb = self.model.bound.eval_mp(x) * self.model.bound.eval_mp(y)
        if kb != 0:
            kb *= self.model.kernel.gram_mp(x.reshape(1, -1), y.reshape(1, -1))[0, 0]
        kt = mpmath.mpf(self.kernel_t(np.array([t]), np.array([s])))
        return self.s2 * (self.k0 + kb) * kt

    def _vec(self, x, t):
        return mpmath.matrix([self._k(c, (x, t)) for c in self.cells])

    def mean(self, x, t):
        with mpmath.workdps(self.dps):
            return float((self._vec(x, t).T * self.alpha)[0])

    def cov(self, x, t, y, s):
        with mpmath.workdps(self.dps):
            kx, ky = self._vec(x, t), self._vec(y, s)
            return float(self._k((x, t), (y, s)) - (kx.T * mpmath.lu_solve(self.K, ky))[0])
