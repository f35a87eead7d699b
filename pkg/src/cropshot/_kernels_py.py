"""Pure-numpy kernels: probe gradient descent and soft k-means iteration.

This is the fallback backend; cropshot._ckernels implements the same
contracts in Cython. Both operate in float64 and must agree to high
precision (cross-checked in tests), though not bit-for-bit.
"""

from __future__ import annotations

import numpy as np

BACKEND_NAME = "python"


def train_linear_head(X, y, sample_weight, n_classes, lr, epochs, l2):
    """Full-batch gradient descent on the linear softmax head.

    Objective: weighted-mean cross-entropy plus l2 * ||W||^2, from zero
    initialization. Returns (W, b, losses) where losses has epochs + 1
    entries: the objective before each step and after the last one.
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    n, d = X.shape
    w_norm = np.asarray(sample_weight, dtype=np.float64)
    w_norm = w_norm / w_norm.sum()

    W = np.zeros((n_classes, d), dtype=np.float64)
    b = np.zeros(n_classes, dtype=np.float64)
    onehot = np.zeros((n, n_classes), dtype=np.float64)
    onehot[np.arange(n), y] = 1.0

    losses = np.empty(epochs + 1, dtype=np.float64)
    rows = np.arange(n)
    for epoch in range(epochs):
        Z = X @ W.T + b
        Zs = Z - Z.max(axis=1, keepdims=True)
        expZ = np.exp(Zs)
        denom = expZ.sum(axis=1)
        logp = Zs[rows, y] - np.log(denom)
        losses[epoch] = -(w_norm * logp).sum() + l2 * np.sum(W * W)

        G = (expZ / denom[:, None] - onehot) * w_norm[:, None]
        W -= lr * (G.T @ X + 2.0 * l2 * W)
        b -= lr * G.sum(axis=0)

    Z = X @ W.T + b
    Zs = Z - Z.max(axis=1, keepdims=True)
    logp = Zs[rows, y] - np.log(np.exp(Zs).sum(axis=1))
    losses[epochs] = -(w_norm * logp).sum() + l2 * np.sum(W * W)
    return W, b, losses


def softmax_neg_sqdist(features, centroids, beta):
    """Row-stochastic responsibilities r_ic proportional to exp(-beta * ||x_i - c_c||^2)."""
    F = np.asarray(features, dtype=np.float64)
    C = np.asarray(centroids, dtype=np.float64)
    d2 = ((F[:, None, :] - C[None, :, :]) ** 2).sum(axis=2)
    logits = -beta * d2
    logits -= logits.max(axis=1, keepdims=True)
    expl = np.exp(logits)
    return expl / expl.sum(axis=1, keepdims=True)


def soft_kmeans(support_sums, support_counts, query, centroids, beta, max_iters, tol):
    """Iterate soft assignment / centroid update until displacement < tol.

    Support features stay anchored: each centroid update averages the
    fixed per-class support sums (weight 1 per support feature) together
    with softly assigned query features. Returns (responsibilities,
    centroids, iterations, converged); responsibilities are recomputed
    from the final centroids so the returned state is self-consistent.
    """
    S = np.asarray(support_sums, dtype=np.float64)
    counts = np.asarray(support_counts, dtype=np.float64)
    Q = np.ascontiguousarray(query, dtype=np.float64)
    C = np.array(centroids, dtype=np.float64, copy=True)

    iterations = 0
    converged = False
    for _ in range(max_iters):
        iterations += 1
        R = softmax_neg_sqdist(Q, C, beta)
        mass = counts + R.sum(axis=0)
        C_new = (S + R.T @ Q) / mass[:, None]
        displacement = np.sqrt(((C_new - C) ** 2).sum(axis=1)).max()
        C = C_new
        if displacement < tol:
            converged = True
            break
    R = softmax_neg_sqdist(Q, C, beta)
    return R, C, iterations, converged
