# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels: probe gradient descent and soft k-means iteration.

Same contracts as cropshot._kernels_py, written as explicit float64
loops; avoids per-epoch temporary allocation, which dominates at the
small matrix sizes episodes produce.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, log, sqrt

cnp.import_array()

BACKEND_NAME = "cython"


def train_linear_head(X, y, sample_weight, int n_classes, double lr, int epochs, double l2):
    """Full-batch GD on weighted-mean softmax cross-entropy + l2 * ||W||^2."""
    cdef cnp.ndarray[cnp.float64_t, ndim=2] X_arr = np.ascontiguousarray(X, dtype=np.float64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] y_arr = np.ascontiguousarray(y, dtype=np.int64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] wn = np.ascontiguousarray(sample_weight, dtype=np.float64).copy()
    wn /= wn.sum()

    cdef int n = X_arr.shape[0]
    cdef int d = X_arr.shape[1]
    cdef int w = n_classes
    cdef cnp.ndarray[cnp.float64_t, ndim=2] W = np.zeros((w, d), dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] b = np.zeros(w, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] gW = np.empty((w, d), dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] gb = np.empty(w, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] z = np.empty(w, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] losses = np.empty(epochs + 1, dtype=np.float64)

    cdef double[:, :] Xv = X_arr
    cdef long long[:] yv = y_arr
    cdef double[:] wv = wn
    cdef double[:, :] Wv = W
    cdef double[:] bv = b
    cdef double[:, :] gWv = gW
    cdef double[:] gbv = gb
    cdef double[:] zv = z

    cdef int epoch, i, j, k
    cdef double zmax, denom, loss, reg, g, p

    for epoch in range(epochs):
        loss = 0.0
        for j in range(w):
            gbv[j] = 0.0
            for k in range(d):
                gWv[j, k] = 0.0
        for i in range(n):
            zmax = -1e300
            for j in range(w):
                zv[j] = bv[j]
                for k in range(d):
                    zv[j] += Wv[j, k] * Xv[i, k]
                if zv[j] > zmax:
                    zmax = zv[j]
            denom = 0.0
            for j in range(w):
                denom += exp(zv[j] - zmax)
            loss -= wv[i] * (zv[yv[i]] - zmax - log(denom))
            for j in range(w):
                p = exp(zv[j] - zmax) / denom
                if j == yv[i]:
                    p -= 1.0
                g = wv[i] * p
                gbv[j] += g
                for k in range(d):
                    gWv[j, k] += g * Xv[i, k]
        reg = 0.0
        for j in range(w):
            for k in range(d):
                reg += Wv[j, k] * Wv[j, k]
        losses[epoch] = loss + l2 * reg
        for j in range(w):
            bv[j] -= lr * gbv[j]
            for k in range(d):
                Wv[j, k] -= lr * (gWv[j, k] + 2.0 * l2 * Wv[j, k])

    # Objective at the final parameters.
    loss = 0.0
    for i in range(n):
        zmax = -1e300
        for j in range(w):
            zv[j] = bv[j]
            for k in range(d):
                zv[j] += Wv[j, k] * Xv[i, k]
            if zv[j] > zmax:
                zmax = zv[j]
        denom = 0.0
        for j in range(w):
            denom += exp(zv[j] - zmax)
        loss -= wv[i] * (zv[yv[i]] - zmax - log(denom))
    reg = 0.0
    for j in range(w):
        for k in range(d):
            reg += Wv[j, k] * Wv[j, k]
    losses[epochs] = loss + l2 * reg
    return W, b, losses


cdef void _assign(double[:, :] Q, double[:, :] C, double beta, double[:, :] R) noexcept:
    cdef int nq = Q.shape[0]
    cdef int w = C.shape[0]
    cdef int d = Q.shape[1]
    cdef int i, j, k
    cdef double diff, d2, best, denom
    for i in range(nq):
        best = -1e300
        for j in range(w):
            d2 = 0.0
            for k in range(d):
                diff = Q[i, k] - C[j, k]
                d2 += diff * diff
            R[i, j] = -beta * d2
            if R[i, j] > best:
                best = R[i, j]
        denom = 0.0
        for j in range(w):
            R[i, j] = exp(R[i, j] - best)
            denom += R[i, j]
        for j in range(w):
            R[i, j] /= denom


def soft_kmeans(support_sums, support_counts, query, centroids, double beta,
                int max_iters, double tol):
    """Iterate soft assignment / centroid update; see the numpy twin for semantics."""
    cdef cnp.ndarray[cnp.float64_t, ndim=2] S = np.ascontiguousarray(support_sums, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] counts = np.ascontiguousarray(support_counts, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] Q = np.ascontiguousarray(query, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] C = np.array(centroids, dtype=np.float64, copy=True)

    cdef int nq = Q.shape[0]
    cdef int w = C.shape[0]
    cdef int d = C.shape[1]
    cdef cnp.ndarray[cnp.float64_t, ndim=2] R = np.empty((nq, w), dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] C_new = np.empty((w, d), dtype=np.float64)

    cdef double[:, :] Sv = S
    cdef double[:] cv = counts
    cdef double[:, :] Qv = Q
    cdef double[:, :] Cv = C
    cdef double[:, :] Rv = R
    cdef double[:, :] Nv = C_new

    cdef int it, i, j, k, iterations = 0
    cdef double mass, disp, dist2, diff
    cdef bint converged = False

    for it in range(max_iters):
        iterations += 1
        _assign(Qv, Cv, beta, Rv)
        disp = 0.0
        for j in range(w):
            mass = cv[j]
            for i in range(nq):
                mass += Rv[i, j]
            for k in range(d):
                Nv[j, k] = Sv[j, k]
                for i in range(nq):
                    Nv[j, k] += Rv[i, j] * Qv[i, k]
                Nv[j, k] /= mass
            dist2 = 0.0
            for k in range(d):
                diff = Nv[j, k] - Cv[j, k]
                dist2 += diff * diff
            if sqrt(dist2) > disp:
                disp = sqrt(dist2)
            for k in range(d):
                Cv[j, k] = Nv[j, k]
        if disp < tol:
            converged = True
            break
    _assign(Qv, Cv, beta, Rv)
    return R, C, iterations, converged
