"""Cholesky factorisation with relative-jitter escalation, in float64 or mpmath."""

from __future__ import annotations

import threading
from contextlib import contextmanager
from dataclasses import dataclass

import mpmath
import numpy as np
import scipy.linalg

JITTER_LADDER = (1e-12, 1e-11, 1e-10, 1e-9, 1e-8)


class IllConditionedError(np.linalg.LinAlgError):
    """Raised when a kernel matrix cannot be factorised even after jitter escalation."""

    def __init__(self, message: str, pair: tuple[int, int] | None = None):
        super().__init__(message)
        self.pair = pair


_log = threading.local()


@contextmanager
def record_factorizations():
    """Collect the sizes of every factorisation performed inside the block."""
    sizes: list[int] = []
    previous = getattr(_log, "sizes", None)
    _log.sizes = sizes
    try:
        yield sizes
    finally:
        _log.sizes = previous


def _note(n: int) -> None:
    sizes = getattr(_log, "sizes", None)
    if sizes is not None:
        sizes.append(n)


def _ladder(nugget_relative: float):
    yield nugget_relative
    for lam in JITTER_LADDER:
        if lam > nugget_relative:
            yield lam


def most_collinear_pair(K) -> tuple[int, int] | None:
    K = np.asarray(K, dtype=float)
    n = K.shape[0]
    if n < 2:
        return None
    d = np.sqrt(np.abs(np.diag(K)))
    d[d == 0] = 1.0
    C = np.abs(K / np.outer(d, d))
    np.fill_diagonal(C, -np.inf)
    i, j = np.unravel_index(np.argmax(C), C.shape)
    return (int(min(i, j)), int(max(i, j)))


@dataclass
class Factor:
    """Lower Cholesky factor of ``K + jitter * I``."""

    L: object  # ndarray or mpmath.matrix
    jitter: float
    lam: float
    mp: bool = False

    @property
    def n(self) -> int:
        return self.L.rows if self.mp else self.L.shape[0]

    def forward(self, v):
        """``L^{-1} v`` for a vector or (float path) a matrix of columns."""
        if not self.mp:
            return scipy.linalg.solve_triangular(self.L, v, lower=True, check_finite=False)
        n = self.n
        out = mpmath.matrix(n, 1)
        for i in range(n):
            acc = v[i]
            for k in range(i):
                acc -= self.L[i, k] * out[k]
            out[i] = acc / self.L[i, i]
        return out

    def backward(self, v):
        if not self.mp:
            return scipy.linalg.solve_triangular(self.L, v, lower=True, trans="T", check_finite=False)
        n = self.n
        out = mpmath.matrix(n, 1)
        for i in range(n - 1, -1, -1):
            acc = v[i]
            for k in range(i + 1, n):
                acc -= self.L[k, i] * out[k]
            out[i] = acc / self.L[i, i]
        return out

    def solve(self, v):
        return self.backward(self.forward(v))

    def logdet(self):
        if not self.mp:
            return 2.0 * float(np.sum(np.log(np.diag(self.L))))
        return 2 * mpmath.fsum(mpmath.log(self.L[i, i]) for i in range(self.n))


def cholesky(K, nugget_relative: float = 0.0) -> Factor:
    """Factorise a symmetric PSD matrix, escalating relative jitter on failure.

    The jitter added is ``lam * mean(diag(K))`` with ``lam`` running over
    ``nugget_relative`` and then ``1e-12, 1e-11, ..., 1e-8``.
    """
    if isinstance(K, mpmath.matrix):
        return _cholesky_mp(K, nugget_relative)
    K = np.asarray(K, dtype=float)
    n = K.shape[0]
    _note(n)
    if n == 0:
        return Factor(np.zeros((0, 0)), 0.0, nugget_relative)
    if not np.all(np.isfinite(K)):
        raise IllConditionedError("kernel matrix has non-finite entries")
    scale = float(np.mean(np.diag(K)))
    for lam in _ladder(nugget_relative):
        jitter = lam * scale
        try:
            L = np.linalg.cholesky(K + jitter * np.eye(n)) if jitter else np.linalg.cholesky(K)
        except np.linalg.LinAlgError:
            continue
        if np.all(np.diag(L) > 0) and np.all(np.isfinite(L)):
            return Factor(L, jitter, lam)
    pair = most_collinear_pair(K)
    raise IllConditionedError(
        f"kernel matrix not factorisable with relative jitter up to {JITTER_LADDER[-1]:g}"
        + (f"; points {pair[0]} and {pair[1]} are nearly indistinguishable" if pair else ""),
        pair,
    )


def _cholesky_mp(K: mpmath.matrix, nugget_relative: float) -> Factor:
    n = K.rows
    _note(n)
    scale = mpmath.fsum(K[i, i] for i in range(n)) / n if n else mpmath.mpf(0)
    for lam in _ladder(nugget_relative):
        A = K.copy()
        if lam:
            for i in range(n):
                A[i, i] += lam * scale
        try:
            L = mpmath.cholesky(A)
        except (ValueError, ZeroDivisionError):
            continue
        return Factor(L, float(lam * scale), lam, mp=True)
    Kf = np.array([[float(K[i, j]) for j in range(n)] for i in range(n)])
    pair = most_collinear_pair(Kf)
    raise IllConditionedError("kernel matrix not factorisable in extended precision", pair)
