# cython: language_level=3
"""Compiled inner loops.

Every function here has a numpy twin in ``_fallback.py`` with the same
signature and the same in-place semantics; ``staircase._kernels`` picks one
at import time.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, isfinite

cnp.import_array()


def fwht(double[::1] a):
    """In-place unnormalized Walsh-Hadamard butterfly; len(a) must be 2**k."""
    cdef Py_ssize_t n = a.shape[0]
    cdef Py_ssize_t h = 1, i, j
    cdef double u, v
    while h < n:
        i = 0
        while i < n:
            for j in range(i, i + h):
                u = a[j]
                v = a[j + h]
                a[j] = u + v
                a[j + h] = u - v
            i += 2 * h
        h *= 2


cdef inline double _step(const double[:, ::1] P, const double[::1] r0,
                         const double[::1] wt, Py_ssize_t row0, Py_ssize_t nrows,
                         double uniform, double[::1] w, const double[::1] reg,
                         double[::1] grad) noexcept nogil:
    # Returns the gradient norm; fills grad[0:d] (edges) and grad[d] (bias).
    cdef Py_ssize_t d = P.shape[1]
    cdef Py_ssize_t i, j, row
    cdef double zi, res, c, norm2 = 0.0
    for j in range(d + 1):
        grad[j] = 0.0
    for i in range(nrows):
        row = row0 + i
        if uniform > 0.0:
            c = uniform
        else:
            c = wt[i]
            if c == 0.0:
                continue
        zi = 0.0
        for j in range(d):
            zi += w[j] * P[row, j]
        res = c * (r0[row] + zi * zi + w[d])
        grad[d] += res
        res *= 2.0 * zi
        for j in range(d):
            grad[j] += res * P[row, j]
    for j in range(d):
        grad[j] += reg[j] * w[j]
    for j in range(d + 1):
        norm2 += grad[j] * grad[j]
    return sqrt(norm2)


def neuron_sgd_weighted(const double[:, ::1] P, const double[::1] r0,
                        const double[:, ::1] weights, double[::1] w,
                        const double[::1] reg, double alpha, double eps_stop):
    """NeuronSGD iterations where iteration k's minibatch is a weighting of P's rows.

    ``w`` holds the incoming edge weights followed by the bias and is updated
    in place. Returns ``(iterations, stopped)``; when stopped, ``iterations``
    is the index of the iteration whose gradient met the threshold.
    """
    cdef Py_ssize_t K = weights.shape[0], N = P.shape[0], d = P.shape[1]
    cdef Py_ssize_t k, j
    cdef double norm
    cdef double[::1] grad = np.zeros(d + 1)
    with nogil:
        for k in range(K):
            norm = _step(P, r0, weights[k], 0, N, 0.0, w, reg, grad)
            if norm <= eps_stop:
                with gil:
                    return k, True
            if not isfinite(norm):
                with gil:
                    return k, False
            for j in range(d + 1):
                w[j] -= alpha * grad[j]
    return K, False


def neuron_sgd_batched(const double[:, ::1] P, const double[::1] r0, Py_ssize_t B,
                       double[::1] w, const double[::1] reg, double alpha,
                       double eps_stop):
    """NeuronSGD iterations over consecutive blocks of B sample rows."""
    cdef Py_ssize_t K = P.shape[0] // B, d = P.shape[1]
    cdef Py_ssize_t k, j
    cdef double norm
    cdef double[::1] grad = np.zeros(d + 1)
    cdef double[::1] dummy = np.zeros(1)
    with nogil:
        for k in range(K):
            norm = _step(P, r0, dummy, k * B, B, 1.0 / B, w, reg, grad)
            if norm <= eps_stop:
                with gil:
                    return k, True
            if not isfinite(norm):
                with gil:
                    return k, False
            for j in range(d + 1):
                w[j] -= alpha * grad[j]
    return K, False


def resnet_sgd(double[:, ::1] W_in, double[::1] b_in, double[:, :, ::1] Wb,
               double[:, ::1] bb, double[::1] w_out, double[::1] b_out,
               const double[:, ::1] X, const double[::1] y, Py_ssize_t pos,
               Py_ssize_t steps, Py_ssize_t B, double lr, double[::1] losses):
    """Plain minibatch SGD on the square loss, walking X cyclically from ``pos``.

    Parameters are updated in place. ``losses[t]`` receives the minibatch
    mean of 0.5*(out - y)**2 before step t. Returns ``(pos, steps_done)``;
    steps_done < steps signals divergence (non-finite or > 1e6 loss).
    """
    cdef Py_ssize_t m = X.shape[0], n = X.shape[1], width = W_in.shape[0]
    cdef Py_ssize_t depth = Wb.shape[0]
    cdef Py_ssize_t t, s, row, i, j, l
    cdef double out, err, acc, loss
    cdef double[:, :, ::1] H = np.zeros((B, depth + 1, width))
    cdef double[:, :, ::1] U = np.zeros((B, depth, width))
    cdef double[::1] dh = np.zeros(width)
    cdef double[::1] du = np.zeros(width)
    cdef double[:, ::1] gW_in = np.zeros((width, n))
    cdef double[::1] gb_in = np.zeros(width)
    cdef double[:, :, ::1] gWb = np.zeros((depth, width, width))
    cdef double[:, ::1] gbb = np.zeros((depth, width))
    cdef double[::1] gw_out = np.zeros(width)
    cdef double gb_out
    cdef double invB = 1.0 / B
    with nogil:
        for t in range(steps):
            gW_in[:, :] = 0.0
            gb_in[:] = 0.0
            gWb[:, :, :] = 0.0
            gbb[:, :] = 0.0
            gw_out[:] = 0.0
            gb_out = 0.0
            loss = 0.0
            for s in range(B):
                row = (pos + s) % m
                for i in range(width):
                    acc = b_in[i]
                    for j in range(n):
                        acc += W_in[i, j] * X[row, j]
                    H[s, 0, i] = acc
                for l in range(depth):
                    for i in range(width):
                        acc = bb[l, i]
                        for j in range(width):
                            acc += Wb[l, i, j] * H[s, l, j]
                        U[s, l, i] = acc
                        H[s, l + 1, i] = H[s, l, i] + (acc if acc > 0.0 else 0.0)
                out = b_out[0]
                for i in range(width):
                    out += w_out[i] * H[s, depth, i]
                err = out - y[row]
                loss += 0.5 * err * err
                err *= invB
                gb_out += err
                for i in range(width):
                    gw_out[i] += err * H[s, depth, i]
                    dh[i] = err * w_out[i]
                for l in range(depth - 1, -1, -1):
                    for i in range(width):
                        du[i] = dh[i] if U[s, l, i] > 0.0 else 0.0
                        gbb[l, i] += du[i]
                    # du is fixed before dh is touched, so one row pass does both
                    for i in range(width):
                        if du[i] != 0.0:
                            acc = du[i]
                            for j in range(width):
                                gWb[l, i, j] += acc * H[s, l, j]
                                dh[j] += Wb[l, i, j] * acc
                for i in range(width):
                    gb_in[i] += dh[i]
                    for j in range(n):
                        gW_in[i, j] += dh[i] * X[row, j]
            loss *= invB
            losses[t] = loss
            if not isfinite(loss) or loss > 1e6:
                with gil:
                    return pos, t
            for i in range(width):
                b_in[i] -= lr * gb_in[i]
                for j in range(n):
                    W_in[i, j] -= lr * gW_in[i, j]
            for l in range(depth):
                for i in range(width):
                    bb[l, i] -= lr * gbb[l, i]
                    for j in range(width):
                        Wb[l, i, j] -= lr * gWb[l, i, j]
            for i in range(width):
                w_out[i] -= lr * gw_out[i]
            b_out[0] -= lr * gb_out
            pos = (pos + B) % m
    return pos, steps
