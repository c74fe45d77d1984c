"""Interpreted twin of the compiled subset search in ``_speedups.pyx``."""

from __future__ import annotations

import math

import numpy as np


class _Search:
    def __init__(self, K, u, cost, budget, rtol, tol):
        self.K = np.asarray(K, dtype=float).tolist()
        self.u = [float(v) for v in u]
        self.cost = [float(c) for c in cost]
        self.n = len(self.u)
        self.budget = float(budget)
        self.rtol = rtol
        self.tol = tol
        self.best = 0.0
        self.nbest = 0
        self.L = [[0.0] * self.n for _ in range(self.n)]
        self.z = [0.0] * self.n
        self.stack = [0] * self.n
        self.best_set = [0] * self.n
        self.nodes = 0

    def visit(self, k, start, stop, spent, obj):
        if k == self.n:
            return
        K, L, z, stack = self.K, self.L, self.z, self.stack
        Lk = L[k]
        for j in range(start, stop):
            c = spent + self.cost[j]
            if c > self.budget:
                continue
            for i in range(k):
                acc = K[stack[i]][j]
                Li = L[i]
                for m in range(i):
                    acc -= Li[m] * Lk[m]
                Lk[i] = acc / Li[i]
            d2 = K[j][j]
            acc = self.u[j]
            for i in range(k):
                d2 -= Lk[i] * Lk[i]
                acc -= Lk[i] * z[i]
            if not d2 > self.tol * K[j][j]:
                continue
            Lk[k] = math.sqrt(d2)
            znew = acc / Lk[k]
            z[k] = znew
            stack[k] = j
            self.nodes += 1
            val = obj + znew * znew
            if val > self.best + self.rtol * abs(self.best):
                self.best = val
                self.best_set[: k + 1] = stack[: k + 1]
                self.nbest = k + 1
            self.visit(k + 1, j + 1, self.n, c, val)


def exhaustive_search(K, u, cost, budget, rtol=1e-12, tol=1e-13, first=-1):
    s = _Search(K, u, cost, budget, rtol, tol)
    if first < 0:
        s.visit(0, 0, s.n, 0.0, 0.0)
    else:
        s.visit(0, first, first + 1, 0.0, 0.0)
    return list(s.best_set[: s.nbest]), float(s.best), s.nodes
