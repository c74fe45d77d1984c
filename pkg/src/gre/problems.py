"""Test problems with known limits and the convergence-study harness.

Run ``python -m gre.problems <name> --x ...`` to use a problem as a
stand-alone simulator process; it prints ``{"value": ..., "cost": ...}``.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import mpmath
import numpy as np

from .classical import Sequence as ClassicalSequence
from .classical import richardson
from .core import AdditiveMonomials, Dataset, GreModel, Monomial, fit
from .design import DesignProblem
from .kernels import KernelSpec

__all__ = [
    "OracleProblem",
    "StudyResult",
    "MethodCurve",
    "central_difference_oracle",
    "trapezoid_oracle",
    "separable_oracle",
    "euler_design_problem",
    "run_convergence_study",
    "fit_slope",
    "PROBLEMS",
]


@dataclass(frozen=True)
class OracleProblem:
    """``evaluate(x, dps=None)`` returns a float, or an mpf when ``dps`` is set."""

    name: str
    dim: int
    evaluate: Callable
    true_limit: float
    bound: object
    cost_model: Callable | None = None
    notes: str = ""
    true_limit_mp: Callable | None = field(default=None, repr=False)

    def limit(self, dps=None):
        if dps is None or self.true_limit_mp is None:
            return self.true_limit
        with mpmath.workdps(dps):
            return self.true_limit_mp()


def central_difference_oracle(s_true: int = 2) -> OracleProblem:
    """Symmetric difference quotient of ``psi(t) = sin(10 t) + [t > 0] t^(s+4)`` at 0."""
    if s_true < 0 or int(s_true) != s_true:
        raise ValueError("s_true must be a nonnegative integer")
    p = s_true + 4

    def psi(t):
        return math.sin(10 * t) + (t**p if t > 0 else 0.0)

    def psi_mp(t):
        return mpmath.sin(10 * t) + (t**p if t > 0 else 0)

    def evaluate(x, dps=None):
        x = _scalar(x)
        if dps is None:
            return (psi(x) - psi(-x)) / (2 * x)
        with mpmath.workdps(dps):
            t = mpmath.mpf(x)
            return (psi_mp(t) - psi_mp(-t)) / (2 * t)

    return OracleProblem(
        "central-difference", 1, evaluate, 10.0, Monomial(2),
        notes=f"one-sided smooth term of degree {p}",
        true_limit_mp=lambda: mpmath.mpf(10),
    )


def _scalar(x) -> float:
    return float(np.asarray(x, dtype=float).reshape(-1)[0])


def trapezoid_oracle() -> OracleProblem:
    """Composite trapezoid rule for ``int_0^1 sin(10 t) + t^2 dt`` with ``x = 1/panels``."""

    def panels(x):
        n = 1.0 / x
        k = max(1, int(round(n)))
        if abs(n - k) > 1e-9 * k:
            warnings.warn(f"x={x} is not a reciprocal integer; using {k} panels", UserWarning)
        return k

    def evaluate(x, dps=None):
        n = panels(_scalar(x))
        if dps is None:
            t = np.arange(n + 1) / n
            y = np.sin(10 * t) + t * t
            return float((y.sum() - 0.5 * (y[0] + y[-1])) / n)
        with mpmath.workdps(dps):
            y = [mpmath.sin(10 * mpmath.mpf(i) / n) + (mpmath.mpf(i) / n) ** 2 for i in range(n + 1)]
            return (mpmath.fsum(y) - (y[0] + y[-1]) / 2) / n

    return OracleProblem(
        "trapezoid", 1, evaluate, (1 - math.cos(10)) / 10 + 1 / 3, Monomial(2),
        cost_model=lambda x: 1.0 / _scalar(x),
        notes="x = 1/n for n panels",
        true_limit_mp=lambda: (1 - mpmath.cos(10)) / 10 + mpmath.mpf(1) / 3,
    )


def separable_oracle() -> OracleProblem:
    """``f(x) = 1 + x1 + x2^2``: two independent error sources of orders 1 and 2."""

    def evaluate(x, dps=None):
        x = np.asarray(x, dtype=float).reshape(-1)
        if dps is None:
            return 1.0 + x[0] + x[1] ** 2
        with mpmath.workdps(dps):
            return 1 + mpmath.mpf(x[0]) + mpmath.mpf(x[1]) ** 2

    return OracleProblem(
        "separable", 2, evaluate, 1.0, AdditiveMonomials((1.0, 1.0), (1.0, 2.0)),
        cost_model=lambda x: float(1.0 / np.prod(np.asarray(x, dtype=float))),
        true_limit_mp=lambda: mpmath.mpf(1),
    )


PROBLEMS = {
    "central-difference": central_difference_oracle,
    "trapezoid": trapezoid_oracle,
    "separable": separable_oracle,
}


def euler_design_problem(grid_size: int = 20, budget: float | None = None,
                         kernel: KernelSpec | None = None) -> DesignProblem:
    """First-order method with cost ``1/x`` on the grid ``k/grid_size``, ``k = 1..grid_size``."""
    if grid_size < 2:
        raise ValueError("grid_size must be at least 2")
    x = np.arange(1, grid_size + 1) / grid_size
    costs = 1.0 / x
    budget = float(costs.sum()) if budget is None else budget
    kernel = KernelSpec("matern", 0, (1.0,), 1) if kernel is None else kernel
    return DesignProblem(x, costs, budget, Monomial(1), kernel)


# --------------------------------------------------------------------------
# Convergence study


@dataclass(frozen=True)
class MethodCurve:
    method: str
    abs_errors: tuple[float, ...]
    rel_errors: tuple[float, ...]
    slope: float
    window: tuple[int, int]


@dataclass(frozen=True)
class StudyResult:
    problem: str
    h_values: tuple[float, ...]
    curves: dict
    precision: int | None = None

    def rows(self):
        for name, c in self.curves.items():
            for h, a, r in zip(self.h_values, c.abs_errors, c.rel_errors):
                yield h, name, a, r

    def summary(self) -> dict:
        return {
            "problem": self.problem,
            "precision": "double" if self.precision is None else f"extended:{self.precision}",
            "h": list(self.h_values),
            "methods": {
                name: {"slope": c.slope, "window": list(c.window)} for name, c in self.curves.items()
            },
        }


def _parse_method(spec: str):
    parts = spec.lower().split(":")
    if parts[0] == "gre":
        family = parts[1] if len(parts) > 1 else "matern"
        s = int(parts[2]) if len(parts) > 2 else 0
        ell = float(parts[3]) if len(parts) > 3 else 1.0
        return "gre", (family, s, ell)
    if parts[0] == "raw":
        return "raw", None
    if parts[0] == "richardson":
        return "richardson", float(parts[1]) if len(parts) > 1 else 1.0
    raise ValueError(f"unknown method {spec!r}; use gre:<family>:<s>[:<ell>], raw or richardson[:<step>]")


def fit_slope(h_values, errors, floor: float):
    """Least-squares slope of log error against log h.

    Uses the longest contiguous run of errors at or above ``floor``; ties go
    to the run with the largest h.
    """
    h = np.asarray(h_values, dtype=float)
    e = np.asarray(errors, dtype=float)
    ok = np.isfinite(e) & (e >= floor)
    best = (0, 0)
    i = 0
    while i < len(ok):
        if ok[i]:
            j = i
            while j < len(ok) and ok[j]:
                j += 1
            if j - i > best[1] - best[0]:
                best = (i, j)
            i = j
        else:
            i += 1
    lo, hi = best
    if hi - lo < 2:
        return math.nan, best
    slope = np.polyfit(np.log(h[lo:hi]), np.log(e[lo:hi]), 1)[0]
    return float(slope), best


def run_convergence_study(problem: OracleProblem, base_design: Sequence, h_values: Sequence[float],
                          methods: Sequence[str], precision: int | None = None) -> StudyResult:
    """Scale ``base_design`` by each ``h``, extrapolate with each method and record errors.

    ``precision`` is ``None`` for float64 or a number of decimal digits, in
    which case both the problem evaluations and the GRE linear algebra run in
    mpmath at that precision.
    """
    if not methods:
        raise ValueError("at least one method is required")
    parsed = [(m, *_parse_method(m)) for m in methods]
    base = np.asarray(base_design, dtype=float)
    if base.ndim == 1:
        base = base.reshape(-1, 1)
    f0 = problem.limit(precision)
    eps = 2.0**-52 if precision is None else 10.0 ** (-precision)
    floor = 100 * eps * abs(float(f0))
    abs_err = {m: [] for m in methods}
    rel_err = {m: [] for m in methods}
    for h in h_values:
        if not 0 < h <= 1:
            raise ValueError("h values must lie in (0, 1]")
        X = h * base
        vals = [problem.evaluate(x, precision) for x in X]
        values = np.array(vals, dtype=object if precision is not None else float)
        # order from coarse to fine for the sequence transforms
        finest = int(np.argmin([problem.bound(x) for x in X]))
        for name, kind, arg in parsed:
            if kind == "gre":
                family, s, ell = arg
                kernel = KernelSpec(family, s, (ell,) * problem.dim, problem.dim)
                post = fit(Dataset(X, values), GreModel(problem.bound, kernel), dps=precision)
                err = f0 - post.mean_at_zero
                sd = post.sd_at_zero
                rel = float(err / sd) if sd > 0 else math.nan
                abs_err[name].append(float(abs(err)))
                rel_err[name].append(rel)
            elif kind == "raw":
                abs_err[name].append(float(abs(f0 - values[finest])))
                rel_err[name].append(math.nan)
            else:
                order = np.argsort(-X[:, 0])
                seq = ClassicalSequence(np.array([float(v) for v in values[order]]), X[order, 0])
                r = problem.bound.r if isinstance(problem.bound, Monomial) else 1.0
                est = richardson(seq, r=r, step=arg).y[-1]
                abs_err[name].append(float(abs(float(f0) - est)))
                rel_err[name].append(math.nan)
    curves = {}
    for m in methods:
        slope, window = fit_slope(h_values, abs_err[m], floor)
        curves[m] = MethodCurve(m, tuple(abs_err[m]), tuple(rel_err[m]), slope, window)
    return StudyResult(problem.name, tuple(float(h) for h in h_values), curves, precision)


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="python -m gre.problems", description="Evaluate a test problem.")
    ap.add_argument("problem", choices=sorted(PROBLEMS))
    ap.add_argument("--x", type=float, nargs="+", required=True)
    ap.add_argument("--s-true", type=int, default=2)
    args = ap.parse_args(argv)
    prob = central_difference_oracle(args.s_true) if args.problem == "central-difference" else PROBLEMS[args.problem]()
    x = np.array(args.x)
    if len(x) != prob.dim:
        ap.error(f"{args.problem} takes {prob.dim} fidelity value(s)")
    out = {"value": prob.evaluate(x)}
    if prob.cost_model is not None:
        out["cost"] = prob.cost_model(x)
    sys.stdout.write(json.dumps(out) + "\n")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
