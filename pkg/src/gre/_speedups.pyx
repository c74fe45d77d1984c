# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled depth-first subset search for the budgeted design problem.

Mirrors ``_purepy.exhaustive_search`` statement for statement.
"""

import numpy as np

from libc.math cimport fabs, sqrt


cdef class _Search:
    cdef const double[:, ::1] K
    cdef const double[::1] u
    cdef const double[::1] cost
    cdef double budget, rtol, tol, best
    cdef Py_ssize_t n, nbest
    cdef double[:, ::1] L
    cdef double[::1] z
    cdef Py_ssize_t[::1] stack
    cdef Py_ssize_t[::1] best_set
    cdef long long nodes

    def __init__(self, K, u, cost, double budget, double rtol, double tol):
        self.K = K
        self.u = u
        self.cost = cost
        self.n = K.shape[0]
        self.budget = budget
        self.rtol = rtol
        self.tol = tol
        self.best = 0.0
        self.nbest = 0
        self.L = np.zeros((self.n, self.n))
        self.z = np.zeros(self.n)
        self.stack = np.zeros(self.n, dtype=np.intp)
        self.best_set = np.zeros(self.n, dtype=np.intp)
        self.nodes = 0

    cdef void visit(self, Py_ssize_t k, Py_ssize_t start, Py_ssize_t stop,
                    double spent, double obj) noexcept:
        cdef Py_ssize_t j, i, m
        cdef double acc, d2, znew, c, val
        for j in range(start, stop):
            c = spent + self.cost[j]
            if c > self.budget:
                continue
            for i in range(k):
                acc = self.K[self.stack[i], j]
                for m in range(i):
                    acc -= self.L[i, m] * self.L[k, m]
                self.L[k, i] = acc / self.L[i, i]
            d2 = self.K[j, j]
            acc = self.u[j]
            for i in range(k):
                d2 -= self.L[k, i] * self.L[k, i]
                acc -= self.L[k, i] * self.z[i]
            if not d2 > self.tol * self.K[j, j]:
                continue
            self.L[k, k] = sqrt(d2)
            znew = acc / self.L[k, k]
            self.z[k] = znew
            self.stack[k] = j
            self.nodes += 1
            val = obj + znew * znew
            if val > self.best + self.rtol * fabs(self.best):
                self.best = val
                for i in range(k + 1):
                    self.best_set[i] = self.stack[i]
                self.nbest = k + 1
            self.visit(k + 1, j + 1, self.n, c, val)


def exhaustive_search(K, u, cost, double budget, double rtol=1e-12, double tol=1e-13,
                      Py_ssize_t first=-1):
    """Best index set maximising ``u' K[S,S]^{-1} u`` subject to ``sum(cost[S]) <= budget``.

    With ``first >= 0`` only sets whose smallest index is ``first`` are searched.
    Returns ``(indices, objective, nodes_visited)``.
    """
    K = np.ascontiguousarray(K, dtype=np.float64)
    u = np.ascontiguousarray(u, dtype=np.float64)
    cost = np.ascontiguousarray(cost, dtype=np.float64)
    cdef _Search s = _Search(K, u, cost, budget, rtol, tol)
    if first < 0:
        s.visit(0, 0, s.n, 0.0, 0.0)
    else:
        s.visit(0, first, first + 1, 0.0, 0.0)
    return [int(s.best_set[i]) for i in range(s.nbest)], float(s.best), int(s.nodes)
