# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled training kernels (see ``_pykernels`` for the reference semantics)."""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp, log, pow, isfinite, NAN

cnp.import_array()

cdef double EPS = 1e-12


cdef double _row_loss_grad(const double[::1] z, Py_ssize_t y, int base_code, double lam,
                           const double[:, ::1] M, const double[:, ::1] T,
                           double alpha, double gamma,
                           double[::1] p, double[::1] g) noexcept nogil:
    """Loss of one example; writes the logit gradient into ``g``. ``p`` is scratch."""
    cdef Py_ssize_t c = z.shape[0], k
    cdef double zmax = z[0], s = 0.0, loss = 0.0, S = 0.0
    cdef double q, logq, om, w, dw, qdf, pen, t
    for k in range(1, c):
        if z[k] > zmax:
            zmax = z[k]
    for k in range(c):
        if not isfinite(z[k]):
            for k in range(c):
                g[k] = NAN
            return NAN
    for k in range(c):
        p[k] = exp(z[k] - zmax)
        s += p[k]
    for k in range(c):
        p[k] = p[k] / s

    if base_code == 1:
        q = p[y]
        if q >= EPS:
            logq = log(q)
        else:
            logq = log(EPS)
        om = 1.0 - q
        w = pow(om, gamma)
        loss = -alpha * w * logq
        dw = 0.0
        if gamma != 0.0 and om > 0.0:
            dw = -gamma * q * pow(om, gamma - 1.0)
        qdf = -alpha * (w + dw * logq)
        for k in range(c):
            g[k] = -qdf * p[k]
        g[y] += qdf
    else:
        for k in range(c):
            t = T[y, k]
            S += t
            if p[k] >= EPS:
                loss -= t * log(p[k])
            else:
                loss -= t * log(EPS)
        for k in range(c):
            g[k] = p[k] * S - T[y, k]

    if lam != 0.0:
        pen = 0.0
        for k in range(c):
            pen += M[y, k] * p[k]
        loss += lam * pen
        for k in range(c):
            g[k] += lam * p[k] * (M[y, k] - pen)
    return loss


def loss_grad_batch(Z, y, int base_code, double lam, M, targets, double alpha, double gamma):
    cdef double[:, ::1] Zv = np.ascontiguousarray(Z, dtype=np.float64)
    cdef cnp.intp_t[::1] yv = np.ascontiguousarray(y, dtype=np.intp)
    cdef double[:, ::1] Mv = np.ascontiguousarray(M, dtype=np.float64)
    cdef double[:, ::1] Tv = np.ascontiguousarray(targets, dtype=np.float64)
    cdef Py_ssize_t n = Zv.shape[0], c = Zv.shape[1], i
    losses = np.empty(n)
    G = np.empty((n, c))
    cdef double[::1] lv = losses
    cdef double[:, ::1] Gv = G
    cdef double[::1] p = np.empty(c)
    with nogil:
        for i in range(n):
            lv[i] = _row_loss_grad(Zv[i], yv[i], base_code, lam, Mv, Tv, alpha, gamma, p, Gv[i])
    return losses, G


def sgd_epoch_linear(double[:, ::1] W, double[::1] b, const double[:, ::1] X, const cnp.intp_t[::1] y,
                     const cnp.intp_t[::1] order, Py_ssize_t batch_size, double lr, int base_code,
                     double lam, M, targets, double alpha, double gamma):
    cdef const double[:, ::1] Mv = np.ascontiguousarray(M, dtype=np.float64)
    cdef const double[:, ::1] Tv = np.ascontiguousarray(targets, dtype=np.float64)
    cdef Py_ssize_t n = order.shape[0], c = W.shape[0], d = W.shape[1]
    cdef Py_ssize_t start, stop, bi = 0, r, i, k, j, m
    cdef double[:, ::1] Gb = np.empty((batch_size, c))
    cdef double[:, ::1] Zb = np.empty((batch_size, c))
    cdef double[::1] p = np.empty(c)
    cdef double total = 0.0, l, scale
    cdef double[::1] lb = np.empty(batch_size)
    cdef int bad = -1
    with nogil:
        start = 0
        while start < n:
            stop = start + batch_size
            if stop > n:
                stop = n
            m = stop - start
            for r in range(m):
                i = order[start + r]
                for k in range(c):
                    l = b[k]
                    for j in range(d):
                        l += W[k, j] * X[i, j]
                    Zb[r, k] = l
                lb[r] = _row_loss_grad(Zb[r], y[i], base_code, lam, Mv, Tv, alpha, gamma, p, Gb[r])
            for r in range(m):
                if not isfinite(lb[r]):
                    bad = <int>bi
                    break
            if bad >= 0:
                break
            for r in range(m):
                total += lb[r]
            scale = lr / m
            for r in range(m):
                i = order[start + r]
                for k in range(c):
                    l = scale * Gb[r, k]
                    b[k] -= l
                    for j in range(d):
                        W[k, j] -= l * X[i, j]
            start = stop
            bi += 1
    if bad >= 0:
        return total / (start if start > 0 else 1), bad
    return total / n, -1


def sgd_epoch_mlp(double[:, ::1] W1, double[::1] b1, double[:, ::1] W2, double[::1] b2,
                  const double[:, ::1] X, const cnp.intp_t[::1] y, const cnp.intp_t[::1] order,
                  Py_ssize_t batch_size, double lr, int base_code, double lam, M, targets,
                  double alpha, double gamma):
    cdef const double[:, ::1] Mv = np.ascontiguousarray(M, dtype=np.float64)
    cdef const double[:, ::1] Tv = np.ascontiguousarray(targets, dtype=np.float64)
    cdef Py_ssize_t n = order.shape[0], c = W2.shape[0], h = W1.shape[0], d = W1.shape[1]
    cdef Py_ssize_t start, stop, bi = 0, r, i, k, j, m
    cdef double[:, ::1] Hpre = np.empty((batch_size, h))
    cdef double[:, ::1] dH = np.empty((batch_size, h))
    cdef double[:, ::1] Zb = np.empty((batch_size, c))
    cdef double[:, ::1] Gb = np.empty((batch_size, c))
    cdef double[::1] p = np.empty(c)
    cdef double[::1] lb = np.empty(batch_size)
    cdef double total = 0.0, l, scale, hv
    cdef int bad = -1
    with nogil:
        start = 0
        while start < n:
            stop = start + batch_size
            if stop > n:
                stop = n
            m = stop - start
            for r in range(m):
                i = order[start + r]
                for k in range(h):
                    l = b1[k]
                    for j in range(d):
                        l += W1[k, j] * X[i, j]
                    Hpre[r, k] = l
                for k in range(c):
                    l = b2[k]
                    for j in range(h):
                        hv = Hpre[r, j]
                        if hv > 0.0:
                            l += W2[k, j] * hv
                    Zb[r, k] = l
                lb[r] = _row_loss_grad(Zb[r], y[i], base_code, lam, Mv, Tv, alpha, gamma, p, Gb[r])
            for r in range(m):
                if not isfinite(lb[r]):
                    bad = <int>bi
                    break
            if bad >= 0:
                break
            for r in range(m):
                total += lb[r]
            # backprop through W2 before it is updated
            for r in range(m):
                for j in range(h):
                    l = 0.0
                    if Hpre[r, j] > 0.0:
                        for k in range(c):
                            l += Gb[r, k] * W2[k, j]
                    dH[r, j] = l
            scale = lr / m
            for r in range(m):
                i = order[start + r]
                for k in range(c):
                    l = scale * Gb[r, k]
                    b2[k] -= l
                    for j in range(h):
                        hv = Hpre[r, j]
                        if hv > 0.0:
                            W2[k, j] -= l * hv
                for k in range(h):
                    l = scale * dH[r, k]
                    b1[k] -= l
                    for j in range(d):
                        W1[k, j] -= l * X[i, j]
            start = stop
            bi += 1
    if bad >= 0:
        return total / (start if start > 0 else 1), bad
    return total / n, -1
