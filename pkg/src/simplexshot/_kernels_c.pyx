# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels; see ``_kernels_py`` for the reference semantics."""
import numpy as np

from libc.math cimport exp, isfinite

NAME = "compiled"


cdef void _softmax(const double[:, ::1] V, double[:, ::1] W) noexcept nogil:
    cdef Py_ssize_t n = V.shape[0], k = V.shape[1], i, c
    cdef double m, s
    for i in range(n):
        m = V[i, 0]
        for c in range(1, k):
            if V[i, c] > m:
                m = V[i, c]
        s = 0.0
        for c in range(k):
            W[i, c] = exp(V[i, c] - m)
            s += W[i, c]
        for c in range(k):
            W[i, c] /= s


cdef double _recon(const double[:, ::1] W, const double[:, ::1] D,
                   const double[:, ::1] X) noexcept nogil:
    cdef Py_ssize_t n = X.shape[0], d = X.shape[1], k = D.shape[0], i, j, c
    cdef double total = 0.0, r
    for i in range(n):
        for j in range(d):
            r = -X[i, j]
            for c in range(k):
                r += W[i, c] * D[c, j]
            total += r * r
    return total


cdef double _vgrad(const double[:, ::1] V, const double[:, ::1] D,
                   const double[:, ::1] X, double coef, double[:, ::1] W,
                   double[:, ::1] grad, double[::1] g) noexcept nogil:
    """Fills W and grad, returns the squared residual."""
    cdef Py_ssize_t n = X.shape[0], d = X.shape[1], k = D.shape[0], i, j, c
    cdef double total = 0.0, r, inner
    _softmax(V, W)
    for i in range(n):
        for c in range(k):
            g[c] = 0.0
        for j in range(d):
            r = -X[i, j]
            for c in range(k):
                r += W[i, c] * D[c, j]
            total += r * r
            for c in range(k):
                g[c] += r * D[c, j]
        inner = 0.0
        for c in range(k):
            g[c] *= 2.0 * coef
            inner += g[c] * W[i, c]
        for c in range(k):
            grad[i, c] = W[i, c] * (g[c] - inner)
    return total


def softmax_rows(V):
    cdef const double[:, ::1] v = np.ascontiguousarray(V, dtype=np.float64)
    out = np.empty((v.shape[0], v.shape[1]))
    cdef double[:, ::1] w = out
    with nogil:
        _softmax(v, w)
    return out


def recon_error(W, D, X):
    cdef const double[:, ::1] w = np.ascontiguousarray(W, dtype=np.float64)
    cdef const double[:, ::1] dd = np.ascontiguousarray(D, dtype=np.float64)
    cdef const double[:, ::1] x = np.ascontiguousarray(X, dtype=np.float64)
    cdef double total
    with nogil:
        total = _recon(w, dd, x)
    return total


def vgrad(V, D, X, double coef):
    cdef const double[:, ::1] v = np.ascontiguousarray(V, dtype=np.float64)
    cdef const double[:, ::1] dd = np.ascontiguousarray(D, dtype=np.float64)
    cdef const double[:, ::1] x = np.ascontiguousarray(X, dtype=np.float64)
    W = np.empty((v.shape[0], v.shape[1]))
    grad = np.empty((v.shape[0], v.shape[1]))
    g = np.empty(v.shape[1])
    cdef double[:, ::1] w_view = W
    cdef double[:, ::1] grad_view = grad
    cdef double[::1] g_view = g
    cdef double err
    with nogil:
        err = _vgrad(v, dd, x, coef, w_view, grad_view, g_view)
    return W, err, grad


cdef double _gram_err(const double[:, ::1] W, const double[:, ::1] M,
                      const double[:, ::1] P, const double[::1] x2) noexcept nogil:
    cdef Py_ssize_t n = W.shape[0], k = W.shape[1], i, a, b
    cdef double total = 0.0, e, mw
    for i in range(n):
        e = x2[i]
        for a in range(k):
            mw = 0.0
            for b in range(k):
                mw += M[a, b] * W[i, b]
            e += W[i, a] * (mw - 2.0 * P[i, a])
        total += e
    return total


def w_descent(V, D, X, double coef, double lr, int steps, int max_halvings):
    Vout = np.array(V, dtype=np.float64, order="C", copy=True)
    Xa = np.asarray(X, dtype=np.float64)
    c = Xa.mean(axis=0)
    Dc = np.asarray(D, dtype=np.float64) - c
    Xc = Xa - c
    cdef const double[:, ::1] M = np.ascontiguousarray(Dc @ Dc.T)
    cdef const double[:, ::1] P = np.ascontiguousarray(Xc @ Dc.T)
    cdef const double[::1] x2 = np.ascontiguousarray(np.einsum("ij,ij->i", Xc, Xc))
    cdef double[:, ::1] v = Vout
    cdef Py_ssize_t n = v.shape[0], k = v.shape[1], i, a, b
    cdef double[:, ::1] w = np.empty((n, k))
    cdef double[:, ::1] w_trial = np.empty((n, k))
    cdef double[:, ::1] grad = np.empty((n, k))
    cdef double[:, ::1] trial = np.empty((n, k))
    cdef double[::1] g = np.empty(k)
    cdef double err, trial_err, step, inner
    cdef int s, h, accepted = 0, status = 0
    cdef bint moved, nonzero

    with nogil:
        _softmax(v, w)
        err = _gram_err(w, M, P, x2)
        if coef != 0.0:
            for s in range(steps):
                nonzero = False
                for i in range(n):
                    inner = 0.0
                    for a in range(k):
                        g[a] = -P[i, a]
                        for b in range(k):
                            g[a] += M[a, b] * w[i, b]
                        g[a] *= 2.0 * coef
                        inner += g[a] * w[i, a]
                    for a in range(k):
                        grad[i, a] = w[i, a] * (g[a] - inner)
                        if not isfinite(grad[i, a]):
                            status = -1
                        elif grad[i, a] != 0.0:
                            nonzero = True
                if status != 0 or not nonzero:
                    break
                step = lr
                moved = False
                for h in range(max_halvings + 1):
                    for i in range(n):
                        for a in range(k):
                            trial[i, a] = v[i, a] - step * grad[i, a]
                    _softmax(trial, w_trial)
                    trial_err = _gram_err(w_trial, M, P, x2)
                    if trial_err <= err:
                        v[:, :] = trial
                        w[:, :] = w_trial
                        err = trial_err
                        moved = True
                        accepted += 1
                        break
                    step *= 0.5
                if not moved:
                    break
    return Vout, accepted, err, status


def pair_argmin(Q, q_offsets, S):
    cdef const double[:, ::1] q = np.ascontiguousarray(Q, dtype=np.float64)
    cdef const double[:, ::1] sv = np.ascontiguousarray(S, dtype=np.float64)
    cdef const Py_ssize_t[::1] off = np.ascontiguousarray(q_offsets, dtype=np.intp)
    cdef Py_ssize_t nb = off.shape[0] - 1, ns = sv.shape[0], d = sv.shape[1]
    best_arr = np.empty(nb)
    best_s_arr = np.empty(nb, dtype=np.intp)
    best_q_arr = np.empty(nb, dtype=np.intp)
    cdef double[::1] best = best_arr
    cdef Py_ssize_t[::1] best_s = best_s_arr
    cdef Py_ssize_t[::1] best_q = best_q_arr
    cdef Py_ssize_t b, s, r, j, bs, bq
    cdef double d2, diff, m
    with nogil:
        for b in range(nb):
            m = -1.0
            bs = 0
            bq = off[b]
            for s in range(ns):
                for r in range(off[b], off[b + 1]):
                    d2 = 0.0
                    for j in range(d):
                        diff = sv[s, j] - q[r, j]
                        d2 += diff * diff
                    if m < 0.0 or d2 < m:
                        m = d2
                        bs = s
                        bq = r
            best[b] = m
            best_s[b] = bs
            best_q[b] = bq
    return best_arr, best_s_arr, best_q_arr
