"""Budgeted choice of fidelities maximising ``1' K_b^{-1} 1``.

The objective is the reciprocal of the (unit-scale) posterior variance at
the origin and is monotone under adding points, so among feasible sets only
cost-maximal ones can be optimal.  Up to ``EXHAUSTIVE_LIMIT`` candidates the
search is exhaustive; beyond that it is greedy.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
import scipy.linalg

from . import _backend
from ._linalg import IllConditionedError, cholesky

EXHAUSTIVE_LIMIT = 20
TIE_RTOL = 1e-12
BREAKDOWN_TOL = 1e-13

__all__ = [
    "DesignProblem",
    "DesignSolution",
    "Method",
    "IncrementalDesign",
    "design_objective",
    "incremental_objective",
    "optimize_design",
    "EmptyDesignWarning",
]


class EmptyDesignWarning(UserWarning):
    pass


class Method(str, Enum):
    exhaustive = "exhaustive"
    greedy = "greedy"


@dataclass(frozen=True)
class DesignProblem:
    candidates: np.ndarray
    costs: np.ndarray
    budget: float
    bound: object
    kernel: object
    nugget_relative: float = 0.0

    def __post_init__(self):
        C = np.asarray(self.candidates, dtype=float)
        if C.ndim == 1:
            C = C.reshape(-1, 1)
        costs = np.asarray(self.costs, dtype=float).reshape(-1)
        object.__setattr__(self, "candidates", C)
        object.__setattr__(self, "costs", costs)
        if len(C) == 0:
            raise ValueError("design needs at least one candidate")
        if len(costs) != len(C):
            raise ValueError("one cost per candidate is required")
        if np.any(~(costs > 0)):
            raise ValueError("costs must be positive")
        if np.any(C <= 0):
            raise ValueError("candidate fidelities must have positive components")
        if len({tuple(c) for c in C}) != len(C):
            raise ValueError("candidates must be distinct")
        if not self.budget > 0:
            raise ValueError("budget must be positive")


@dataclass(frozen=True)
class DesignSolution:
    selected: tuple[int, ...]
    objective: float
    total_cost: float
    method: Method
    optimality_flag: bool
    jitter_relative: float = 0.0
    nodes: int = 0
    warnings: tuple[str, ...] = ()
    diagnostics: dict = field(default_factory=dict, compare=False)

    def to_json(self) -> dict:
        return {
            "selected": list(self.selected),
            "objective": self.objective,
            "total_cost": self.total_cost,
            "method": self.method.value,
            "optimality_flag": self.optimality_flag,
            "jitter_relative": self.jitter_relative,
            "nodes": self.nodes,
            "warnings": list(self.warnings),
            "diagnostics": self.diagnostics,
        }


def design_objective(points, bound, kernel, nugget_relative: float = 0.0) -> float:
    """``1' K_b^{-1} 1`` on ``points``; 0 for no points, ``-inf`` if singular."""
    P = np.asarray(points, dtype=float)
    if P.size == 0:
        return 0.0
    if P.ndim == 1:
        P = P.reshape(-1, kernel.dim)
    b = np.array([bound(x) for x in P])
    try:
        factor = cholesky(kernel.gram(P), nugget_relative)
    except IllConditionedError:
        return -math.inf
    z = factor.forward(1.0 / b)
    return float(z @ z)


class IncrementalDesign:
    """Growing design with its Cholesky factor, updated one row at a time.

    The absolute jitter is ``jitter_relative * k_e(x, x)``, which is the same
    for every subset because the kernels are radial.
    """

    def __init__(self, bound, kernel, jitter_relative: float = 0.0):
        self.bound = bound
        self.kernel = kernel
        self.jitter_relative = jitter_relative
        self.points: list[np.ndarray] = []
        self.L = np.zeros((0, 0))
        self.z = np.zeros(0)
        self.objective = 0.0

    def _row(self, x):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        kxx = self.kernel(x, x)
        kxx += self.jitter_relative * kxx
        if not self.points:
            return x, np.zeros(0), kxx
        kvec = self.kernel.gram(np.array(self.points), x.reshape(1, -1))[:, 0]
        l = scipy.linalg.solve_triangular(self.L, kvec, lower=True, check_finite=False)
        return x, l, kxx - float(l @ l)

    def _scratch(self, x) -> float:
        return design_objective(np.array(self.points + [x]), self.bound, self.kernel, self.jitter_relative)

    def objective_with(self, x) -> float:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if any(np.array_equal(p, x) for p in self.points):
            return -math.inf
        x, l, d2 = self._row(x)
        if not d2 > BREAKDOWN_TOL * self.kernel(x, x):
            return self._scratch(x)
        znew = (1.0 / self.bound(x) - float(l @ self.z)) / math.sqrt(d2)
        return self.objective + znew * znew

    def add(self, x) -> float:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if any(np.array_equal(p, x) for p in self.points):
            raise ValueError("point already in the design")
        x, l, d2 = self._row(x)
        if not d2 > BREAKDOWN_TOL * self.kernel(x, x):
            self.points.append(x)
            P = np.array(self.points)
            factor = cholesky(self.kernel.gram(P), self.jitter_relative)
            self.L = factor.L
            self.z = factor.forward(1.0 / np.array([self.bound(p) for p in P]))
            self.objective = float(self.z @ self.z)
            return self.objective
        k = len(self.points)
        L = np.zeros((k + 1, k + 1))
        L[:k, :k] = self.L
        L[k, :k] = l
        L[k, k] = math.sqrt(d2)
        znew = (1.0 / self.bound(x) - float(l @ self.z)) / L[k, k]
        self.L = L
        self.z = np.append(self.z, znew)
        self.points.append(x)
        self.objective += znew * znew
        return self.objective


def incremental_objective(current: IncrementalDesign, new_point) -> float:
    return current.objective_with(new_point)


def _prepare(problem: DesignProblem):
    K = problem.kernel.gram(problem.candidates)
    factor = cholesky(K, problem.nugget_relative)
    Kj = K + factor.jitter * np.eye(len(K))
    u = 1.0 / np.array([problem.bound(x) for x in problem.candidates])
    return Kj, u, factor.lam


def _exhaustive(problem: DesignProblem, workers: int):
    Kj, u, lam = _prepare(problem)
    search = _backend.exhaustive_search
    if workers <= 1:
        sel, obj, nodes = search(Kj, u, problem.costs, problem.budget, TIE_RTOL, BREAKDOWN_TOL)
        return sel, obj, nodes, lam
    n = len(u)
    with ProcessPoolExecutor(workers) as pool:
        futures = [
            pool.submit(search, Kj, u, problem.costs, problem.budget, TIE_RTOL, BREAKDOWN_TOL, j)
            for j in range(n)
        ]
        parts = [f.result() for f in futures]
    # branches come in lexicographic order, so the strict rule keeps the smallest set
    sel, obj, nodes = [], 0.0, 0
    for s, o, k in parts:
        nodes += k
        if s and o > obj + TIE_RTOL * abs(obj):
            sel, obj = s, o
    return sel, obj, nodes, lam


def _greedy(problem: DesignProblem, per_cost: bool, lam: float):
    state = IncrementalDesign(problem.bound, problem.kernel, lam)
    chosen: list[int] = []
    spent = 0.0
    while True:
        best, best_score = None, -math.inf
        for j, x in enumerate(problem.candidates):
            if j in chosen or spent + problem.costs[j] > problem.budget:
                continue
            obj = state.objective_with(x)
            if obj == -math.inf:
                continue
            gain = obj - state.objective
            score = gain / problem.costs[j] if per_cost else gain
            if score > best_score:
                best, best_score = j, score
        if best is None:
            break
        state.add(problem.candidates[best])
        chosen.append(best)
        spent += problem.costs[best]
    return sorted(chosen), state.objective


def optimize_design(problem: DesignProblem, workers: int = 1,
                    exhaustive_limit: int = EXHAUSTIVE_LIMIT) -> DesignSolution:
    n = len(problem.candidates)
    notes: tuple[str, ...] = ()
    if problem.budget < float(np.min(problem.costs)):
        msg = "budget is below the cheapest candidate; returning an empty design"
        warnings.warn(msg, EmptyDesignWarning)
        method = Method.exhaustive if n <= exhaustive_limit else Method.greedy
        return DesignSolution((), 0.0, 0.0, method, method is Method.exhaustive, 0.0, 0, (msg,))
    if n <= exhaustive_limit:
        sel, obj, nodes, lam = _exhaustive(problem, workers)
        method, optimal, diagnostics = Method.exhaustive, True, {}
    else:
        _, _, lam = _prepare(problem)
        sel, obj = _greedy(problem, per_cost=False, lam=lam)
        alt, alt_obj = _greedy(problem, per_cost=True, lam=lam)
        nodes = 0
        method, optimal = Method.greedy, False
        diagnostics = {"gain_per_cost": {"selected": alt, "objective": alt_obj}}
    total = float(sum(problem.costs[i] for i in sel))
    if lam:
        notes += (f"relative jitter {lam:g} added to the candidate kernel matrix",)
    return DesignSolution(tuple(sorted(sel)), float(obj), total, method, optimal, lam, nodes, notes,
                          diagnostics)
