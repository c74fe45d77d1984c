"""Classical sequence transformations written as instances of the E-algorithm.

A transformation assumes ``y_m = S + a_1 g_1(m) + ... + a_{n-1} g_{n-1}(m)``
and solves ``n`` consecutive instances of that ansatz for ``S``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.linalg

__all__ = [
    "Sequence",
    "DegenerateBasisError",
    "RichardsonPowers",
    "Shanks",
    "GermainBonne",
    "Thiele",
    "Custom",
    "e_algorithm",
    "richardson",
    "shanks",
    "germain_bonne",
    "thiele",
]


class DegenerateBasisError(ValueError):
    pass


@dataclass(frozen=True)
class Sequence:
    """Values ``y`` observed at (optional) strictly decreasing parameters ``x``.

    ``index`` records, for transformed sequences, which start index produced
    each entry.  Only transformed sequences may be empty.
    """

    y: np.ndarray
    x: np.ndarray | None = None
    index: tuple[int, ...] | None = None

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float).reshape(-1)
        object.__setattr__(self, "y", y)
        if len(y) < 1 and self.index is None:
            raise ValueError("sequence must be nonempty")
        if self.x is not None:
            x = np.asarray(self.x, dtype=float).reshape(-1)
            if len(x) != len(y):
                raise ValueError("x and y lengths differ")
            if len(np.unique(x)) != len(x):
                raise ValueError("repeated x values")
            if np.any(np.diff(x) >= 0):
                raise ValueError("x must be strictly decreasing")
            object.__setattr__(self, "x", x)

    def __len__(self):
        return len(self.y)


# --------------------------------------------------------------------------
# Bases.  ``columns(seq, m)`` returns the (n, n-1) matrix of g_i(k),
# k = m..m+n-1, and ``size`` is the number of unknowns n.


@dataclass(frozen=True)
class RichardsonPowers:
    count: int
    start: float = 1.0
    step: float = 1.0

    @property
    def size(self):
        return self.count + 1

    def needed(self, m):
        return m + self.size

    def columns(self, seq, m):
        if seq.x is None:
            raise ValueError("Richardson powers need x values")
        x = seq.x[m : m + self.size]
        return np.column_stack([x ** (self.start + i * self.step) for i in range(self.count)])


@dataclass(frozen=True)
class Shanks:
    count: int = 1

    @property
    def size(self):
        return self.count + 1

    def needed(self, m):
        return m + 2 * self.count + 1

    def columns(self, seq, m):
        y = seq.y
        return np.array(
            [[y[k + i] - y[k + i - 1] for i in range(1, self.count + 1)] for k in range(m, m + self.size)]
        ).reshape(self.size, self.count)


@dataclass(frozen=True)
class GermainBonne:
    """``g_i(m) = (y_{m+1} - y_m)^i``; ``n`` is the number of unknowns."""

    n: int

    @property
    def size(self):
        return self.n

    def needed(self, m):
        return m + self.n + 1

    def columns(self, seq, m):
        dy = np.diff(seq.y)[m : m + self.n]
        return np.column_stack([dy**i for i in range(1, self.n)]) if self.n > 1 else np.zeros((self.n, 0))


@dataclass(frozen=True)
class Thiele:
    """``x^i`` and ``y x^i`` for ``i = 1..p``; ``n = 2p + 1``."""

    p: int

    @property
    def size(self):
        return 2 * self.p + 1

    def needed(self, m):
        return m + self.size

    def columns(self, seq, m):
        if seq.x is None:
            raise ValueError("Thiele's method needs x values")
        x = seq.x[m : m + self.size]
        y = seq.y[m : m + self.size]
        cols = [x**i for i in range(1, self.p + 1)] + [y * x**i for i in range(1, self.p + 1)]
        return np.column_stack(cols) if cols else np.zeros((self.size, 0))


@dataclass(frozen=True)
class Custom:
    """User basis: each ``g(k, seq)`` returns ``g_i(k)``."""

    functions: tuple[Callable, ...]

    @property
    def size(self):
        return len(self.functions) + 1

    def needed(self, m):
        return m + self.size

    def columns(self, seq, m):
        rows = [[g(k, seq) for g in self.functions] for k in range(m, m + self.size)]
        return np.array(rows, dtype=float).reshape(self.size, len(self.functions))


def e_algorithm(seq: Sequence, basis, m: int = 0) -> float:
    """Solve the ansatz at ``m, ..., m+n-1`` for the limit ``S``.

    Uses a column-pivoted QR solve rather than the determinant ratio.
    """
    n = basis.size
    if m < 0 or basis.needed(m) > len(seq):
        raise ValueError(f"need {basis.needed(m)} terms from index 0, have {len(seq)}")
    if n == 1:
        return float(seq.y[m])
    A = np.column_stack([np.ones(n), basis.columns(seq, m)])
    rhs = seq.y[m : m + n]
    # equilibrate columns so the rank test is scale-free
    norms = np.linalg.norm(A, axis=0)
    if np.any(norms == 0):
        raise DegenerateBasisError("a basis function vanishes on the window")
    Q, R, piv = scipy.linalg.qr(A / norms, pivoting=True)
    diag = np.abs(np.diag(R))
    if diag[-1] <= 1e-13 * diag[0]:
        raise DegenerateBasisError("basis functions are linearly dependent on the window")
    sol = scipy.linalg.solve_triangular(R, Q.T @ rhs)
    coef = np.empty(n)
    coef[piv] = sol
    return float(coef[0] / norms[0])


def richardson(seq: Sequence, r: float = 1.0, depth: int | None = None, step: float = 1.0) -> Sequence:
    """Eliminate the powers ``x^r, x^(r+step), ...`` one column at a time.

    Column ``k`` of the tableau uses ``k + 1`` consecutive terms; the returned
    sequence is column ``depth`` (default: the deepest), each entry labelled
    with the finest ``x`` of its window.  Exact for any spacing of ``x``.
    """
    if seq.x is None:
        raise ValueError("Richardson extrapolation needs x values")
    N = len(seq)
    if N < 2:
        raise ValueError("Richardson extrapolation needs at least two terms")
    depth = N - 1 if depth is None else depth
    if not 0 <= depth <= N - 1:
        raise ValueError(f"depth must lie in [0, {N - 1}]")
    E = seq.y.copy()
    g = np.array([seq.x ** (r + i * step) for i in range(depth)])  # g[i, m]
    for k in range(depth):
        gk = g[k]
        den = gk[1:] - gk[:-1]
        if np.any(den == 0):
            raise DegenerateBasisError("repeated basis values in the tableau")
        E = (E[:-1] * gk[1:] - E[1:] * gk[:-1]) / den
        g = (g[:, :-1] * gk[1:] - g[:, 1:] * gk[:-1]) / den
    M = N - depth
    return Sequence(E, seq.x[depth : depth + M], tuple(range(M)))


def shanks(seq: Sequence, rtol: float = 1e-14) -> Sequence:
    """Closed-form Shanks transform; entries with a vanishing denominator are dropped."""
    y = seq.y
    if len(y) < 3:
        raise ValueError("Shanks' transformation needs at least three terms")
    out, xs, idx = [], [], []
    for m in range(len(y) - 2):
        a, b, c = y[m], y[m + 1], y[m + 2]
        den = a - 2 * b + c
        scale = max(abs(a), abs(b), abs(c))
        if abs(den) <= rtol * scale or den == 0:
            continue
        out.append((a * c - b * b) / den)
        idx.append(m)
        if seq.x is not None:
            xs.append(seq.x[m + 2])
    return Sequence(np.array(out), np.array(xs) if seq.x is not None else None, tuple(idx))


def germain_bonne(seq: Sequence, n: int, m: int = 0) -> float:
    return e_algorithm(seq, GermainBonne(n), m)


def thiele(seq: Sequence, p: int, m: int = 0) -> float:
    return e_algorithm(seq, Thiele(p), m)
