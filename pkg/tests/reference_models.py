"""Slow, obviously-correct reference classifiers used as test oracles.

These deliberately avoid the vectorized search strategies of the real
implementations: plain loops, explicit sorts, direct formulas. They share
only the documented tie-breaking rules.
"""
from __future__ import annotations

import math

import numpy as np

VARIANCE_FLOOR = 1e-9


def ref_knn_predict(X_train, y_train, k, X):
    out = []
    k = min(k, len(X_train))
    for x in X:
        dists = [(math.dist(x, xt), i) for i, xt in enumerate(X_train)]
        dists.sort()  # distance, then training index
        neighbors = dists[:k]
        pos = [(d, i) for d, i in neighbors if y_train[i] == 1]
        neg = [(d, i) for d, i in neighbors if y_train[i] == 0]
        if len(pos) > len(neg):
            out.append(1)
        elif len(neg) > len(pos):
            out.append(0)
        else:
            d_pos = sum(d for d, _ in pos)
            d_neg = sum(d for d, _ in neg)
            out.append(1 if d_pos < d_neg else 0)
    return np.array(out)


def ref_nb_predict(X_train, y_train, X):
    stats = {}
    for cls in (0, 1):
        rows = X_train[y_train == cls]
        stats[cls] = (
            math.log(len(rows) / len(X_train)),
            rows.mean(axis=0),
            np.maximum(rows.var(axis=0), VARIANCE_FLOOR),
        )
    out = []
    for x in X:
        scores = {}
        for cls, (log_prior, mean, var) in stats.items():
            total = log_prior
            for j in range(len(x)):
                total += -0.5 * (math.log(2 * math.pi * var[j])
                                 + (x[j] - mean[j]) ** 2 / var[j])
            scores[cls] = total
        out.append(1 if scores[1] > scores[0] else 0)
    return np.array(out)


def _gini(n_pos, n_total):
    if n_total == 0:
        return 0.0
    p = n_pos / n_total
    q = (n_total - n_pos) / n_total
    return 1.0 - p * p - q * q


def _ref_best_split(X, y):
    n = len(y)
    parent = _gini(float(np.sum(y == 1)), float(n))
    best = None
    for f in range(X.shape[1]):
        values = sorted(set(X[:, f]))
        for a, b in zip(values[:-1], values[1:]):
            threshold = (a + b) / 2.0
            left = X[:, f] <= threshold
            n_left = float(np.sum(left))
            n_right = float(n) - n_left
            pos_left = float(np.sum(y[left] == 1))
            pos_right = float(np.sum(y == 1)) - pos_left
            child = (n_left / n) * _gini(pos_left, n_left) \
                + (n_right / n) * _gini(pos_right, n_right)
            gain = parent - child
            if gain > 0.0 and (best is None or gain > best[0]):
                best = (gain, f, threshold)
    return best


def ref_dt_fit(X, y, max_depth):
    if max_depth <= 0 or len(set(y)) == 1:
        n_pos = int(np.sum(y == 1))
        return ("leaf", 1 if n_pos > len(y) - n_pos else 0)
    split = _ref_best_split(X, y)
    if split is None:
        n_pos = int(np.sum(y == 1))
        return ("leaf", 1 if n_pos > len(y) - n_pos else 0)
    _, f, threshold = split
    mask = X[:, f] <= threshold
    return ("node", f, threshold,
            ref_dt_fit(X[mask], y[mask], max_depth - 1),
            ref_dt_fit(X[~mask], y[~mask], max_depth - 1))


def ref_dt_predict(tree, X):
    out = []
    for x in X:
        node = tree
        while node[0] == "node":
            _, f, threshold, left, right = node
            node = left if x[f] <= threshold else right
        out.append(node[1])
    return np.array(out)


def ref_svm_cvxopt(X, y01, C, gamma):
    """Exact dual solution of the soft-margin RBF SVM via quadratic programming."""
    from cvxopt import matrix, solvers

    y = np.where(np.asarray(y01) == 1, 1.0, -1.0)
    n = len(X)
    sq = np.sum(X * X, axis=1)
    K = np.exp(-gamma * np.maximum(sq[:, None] + sq[None, :] - 2.0 * (X @ X.T), 0.0))
    P = matrix(np.outer(y, y) * K)
    q = matrix(-np.ones(n))
    G = matrix(np.vstack([-np.eye(n), np.eye(n)]))
    h = matrix(np.concatenate([np.zeros(n), C * np.ones(n)]))
    A = matrix(y[None, :])
    b = matrix(np.zeros(1))
    solvers.options["show_progress"] = False
    solution = solvers.qp(P, q, G, h, A, b)
    alpha = np.array(solution["x"]).ravel()
    free = (alpha > 1e-6) & (alpha < C - 1e-6)
    f_no_bias = K @ (alpha * y)
    if np.any(free):
        bias = float(np.mean(y[free] - f_no_bias[free]))
    else:
        bias = float(np.mean(y - f_no_bias))
    return alpha, bias, y, K

def ref_svm_predict(X_train, alpha, bias, y_signed, gamma, X):
    sq_t = np.sum(X_train * X_train, axis=1)
    sq_x = np.sum(X * X, axis=1)
    K = np.exp(-gamma * np.maximum(sq_x[:, None] + sq_t[None, :] - 2.0 * (X @ X_train.T), 0.0))
    f = K @ (alpha * y_signed) + bias
    return (f > 0).astype(int)
