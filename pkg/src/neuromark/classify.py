"""From-scratch KNN, RBF-SVM (simplified SMO), CART decision tree and
Gaussian naive Bayes over the 10-dimensional scaled feature vectors,
plus stratified-CV grid search and binary model persistence.

Labels are handled as ints internally (1 = positive reaction); the
prediction API returns Reaction values with a positive-class score in
[0, 1]. Every fit is deterministic given its seed.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._binio import Reader, Writer, write_atomic
from .core import (
    DegenerateTrainingError,
    ParameterError,
    Reaction,
    ShapeError,
    StratificationError,
)

MODEL_KINDS = ("knn", "svm", "dt", "nb")

POSITIVE, NEGATIVE = 1, 0

DEFAULT_GRIDS: dict[str, list[dict]] = {
    "knn": [{"k": k} for k in (1, 3, 5, 7, 9)],
    "svm": [{"C": c, "gamma": g}
            for c in (0.1, 1.0, 10.0, 100.0)
            for g in (0.01, 0.1, 1.0, 10.0)],
    "dt": [{"max_depth": d} for d in (2, 3, 5, 8)],
    "nb": [{}],
}

VARIANCE_FLOOR = 1e-9
SMO_TOLERANCE = 1e-3
SMO_MAX_PASSES = 10
SMO_MAX_SWEEPS = 200


def labels_to_ints(labels) -> np.ndarray:
    return np.array([POSITIVE if l == Reaction.POSITIVE else NEGATIVE for l in labels],
                    dtype=np.int64)


def int_to_reaction(value: int) -> Reaction:
    return Reaction.POSITIVE if value == POSITIVE else Reaction.NEGATIVE


@dataclass(frozen=True, eq=False)
class KnnModel:
    kind = "knn"
    X: np.ndarray
    y: np.ndarray
    k: int


@dataclass(frozen=True, eq=False)
class NbModel:
    kind = "nb"
    log_priors: np.ndarray   # (2,), order [negative, positive]
    means: np.ndarray        # (2, d)
    variances: np.ndarray    # (2, d), floored


@dataclass(frozen=True, eq=False)
class TreeNode:
    feature: int = -1                  # -1 marks a leaf
    threshold: float = 0.0
    left: "TreeNode | None" = None
    right: "TreeNode | None" = None
    label: int = NEGATIVE

    @property
    def is_leaf(self) -> bool:
        return self.feature < 0


@dataclass(frozen=True, eq=False)
class DtModel:
    kind = "dt"
    root: TreeNode
    max_depth: int
    n_features: int


@dataclass(frozen=True, eq=False)
class SvmModel:
    kind = "svm"
    sv_x: np.ndarray       # support vectors
    sv_y: np.ndarray       # +-1 labels
    alpha: np.ndarray
    bias: float
    C: float
    gamma: float
    kernel: str            # rbf | linear
    n_features: int


TrainedModel = KnnModel | NbModel | DtModel | SvmModel


def _check_training_data(X, y) -> tuple[np.ndarray, np.ndarray]:
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if X.ndim != 2:
        raise ShapeError(f"X must be 2-d, got shape {X.shape}")
    if len(X) != len(y):
        raise ShapeError(f"{len(X)} rows but {len(y)} labels")
    if len(X) < 2:
        raise ShapeError(f"need at least 2 training rows, got {len(X)}")
    if not np.all(np.isin(y, (NEGATIVE, POSITIVE))):
        raise ShapeError("labels must be 0 (negative) or 1 (positive)")
    return X, y


def fit(kind: str, X, y, hyperparams: dict | None = None, seed: int = 0) -> TrainedModel:
    """Train one model kind; see DEFAULT_GRIDS for the tunable knobs."""
    if kind not in MODEL_KINDS:
        raise ParameterError(f"unknown model kind {kind!r}; expected one of {MODEL_KINDS}")
    X, y = _check_training_data(X, y)
    hp = dict(hyperparams or {})
    if kind != "knn" and len(np.unique(y)) < 2:
        raise DegenerateTrainingError(f"{kind} needs both classes in the training set")
    if kind == "knn":
        k = int(hp.pop("k", 5))
        if k < 1:
            raise ParameterError(f"k must be >= 1, got {k}")
        model: TrainedModel = KnnModel(X=X, y=y, k=k)
    elif kind == "nb":
        model = _fit_nb(X, y)
    elif kind == "dt":
        model = _fit_dt(X, y, max_depth=int(hp.pop("max_depth", 5)))
    else:
        model = _fit_svm(X, y, C=float(hp.pop("C", 1.0)), gamma=float(hp.pop("gamma", 1.0)),
                         kernel=hp.pop("kernel", "rbf"), seed=seed)
    if hp:
        raise ParameterError(f"unknown hyperparameters for {kind}: {sorted(hp)}")
    return model


def predict(model: TrainedModel, x) -> tuple[Reaction, float]:
    """Classify one vector; the score is the positive-class strength in [0, 1]."""
    labels, scores = predict_many(model, np.asarray(x, dtype=np.float64)[None, :])
    return int_to_reaction(int(labels[0])), float(scores[0])


def predict_many(model: TrainedModel, X) -> tuple[np.ndarray, np.ndarray]:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ShapeError(f"X must be 2-d, got shape {X.shape}")
    expected = model.X.shape[1] if isinstance(model, KnnModel) else (
        model.means.shape[1] if isinstance(model, NbModel) else model.n_features)
    if X.shape[1] != expected:
        raise ShapeError(f"expected {expected} features, got {X.shape[1]}")
    if isinstance(model, KnnModel):
        return _predict_knn(model, X)
    if isinstance(model, NbModel):
        return _predict_nb(model, X)
    if isinstance(model, DtModel):
        return _predict_dt(model, X)
    return _predict_svm(model, X)


# --- KNN ---------------------------------------------------------------

def _predict_knn(model: KnnModel, X):
    k = min(model.k, len(model.X))
    diff = X[:, None, :] - model.X[None, :, :]
    dist = np.sqrt(np.sum(diff * diff, axis=2))
    order = np.argsort(dist, axis=1, kind="stable")[:, :k]
    labels = np.empty(len(X), dtype=np.int64)
    scores = np.empty(len(X))
    for i in range(len(X)):
        neighbors = order[i]
        votes = model.y[neighbors]
        n_pos = int(np.sum(votes == POSITIVE))
        n_neg = k - n_pos
        scores[i] = n_pos / k
        if n_pos != n_neg:
            labels[i] = POSITIVE if n_pos > n_neg else NEGATIVE
            continue
        # tie: smaller summed distance wins, then negative
        d_pos = float(np.sum(dist[i, neighbors[votes == POSITIVE]]))
        d_neg = float(np.sum(dist[i, neighbors[votes == NEGATIVE]]))
        labels[i] = POSITIVE if d_pos < d_neg else NEGATIVE
    return labels, scores


# --- Gaussian naive Bayes ------------------------------------------------

def _fit_nb(X, y) -> NbModel:
    means = np.empty((2, X.shape[1]))
    variances = np.empty((2, X.shape[1]))
    log_priors = np.empty(2)
    for cls in (NEGATIVE, POSITIVE):
        rows = X[y == cls]
        means[cls] = rows.mean(axis=0)
        variances[cls] = np.maximum(rows.var(axis=0), VARIANCE_FLOOR)
        log_priors[cls] = math.log(len(rows) / len(X))
    return NbModel(log_priors=log_priors, means=means, variances=variances)


def _nb_log_posteriors(model: NbModel, X):
    out = np.empty((len(X), 2))
    for cls in (NEGATIVE, POSITIVE):
        var = model.variances[cls]
        log_lik = -0.5 * (np.log(2.0 * np.pi * var) + (X - model.means[cls]) ** 2 / var)
        out[:, cls] = model.log_priors[cls] + log_lik.sum(axis=1)
    return out


def _predict_nb(model: NbModel, X):
    log_post = _nb_log_posteriors(model, X)
    labels = np.where(log_post[:, POSITIVE] > log_post[:, NEGATIVE], POSITIVE, NEGATIVE)
    shifted = log_post - log_post.max(axis=1, keepdims=True)
    probs = np.exp(shifted)
    probs /= probs.sum(axis=1, keepdims=True)
    return labels.astype(np.int64), probs[:, POSITIVE]


# --- CART decision tree ---------------------------------------------------

def _gini_from_counts(n_pos: float, n_total: float) -> float:
    if n_total == 0:
        return 0.0
    p = n_pos / n_total
    q = (n_total - n_pos) / n_total
    return 1.0 - p * p - q * q


def _best_split(X, y):
    """Best (feature, threshold) by Gini gain.

    Thresholds are the midpoints between consecutive sorted unique
    values; ties are broken toward the lowest feature index, then the
    lowest threshold.
    """
    n = len(y)
    parent = _gini_from_counts(float(np.sum(y == POSITIVE)), float(n))
    best = None  # (gain, feature, threshold)
    for f in range(X.shape[1]):
        col = X[:, f]
        order = np.argsort(col, kind="stable")
        sv = col[order]
        sy = y[order]
        boundary = np.nonzero(sv[:-1] != sv[1:])[0]
        if len(boundary) == 0:
            continue
        cum_pos = np.cumsum(sy == POSITIVE)
        for idx in boundary:
            n_left = float(idx + 1)
            n_right = float(n) - n_left
            pos_left = float(cum_pos[idx])
            pos_right = float(cum_pos[-1]) - pos_left
            child = (n_left / n) * _gini_from_counts(pos_left, n_left) \
                + (n_right / n) * _gini_from_counts(pos_right, n_right)
            gain = parent - child
            if gain > 0.0 and (best is None or gain > best[0]):
                threshold = (sv[idx] + sv[idx + 1]) / 2.0
                best = (gain, f, threshold)
    return best


def _majority(y) -> int:
    n_pos = int(np.sum(y == POSITIVE))
    n_neg = len(y) - n_pos
    return POSITIVE if n_pos > n_neg else NEGATIVE  # exact tie -> negative


def _grow(X, y, depth: int, max_depth: int) -> TreeNode:
    if depth >= max_depth or len(np.unique(y)) == 1:
        return TreeNode(label=_majority(y))
    split = _best_split(X, y)
    if split is None:
        return TreeNode(label=_majority(y))
    _, feature, threshold = split
    mask = X[:, feature] <= threshold
    left = _grow(X[mask], y[mask], depth + 1, max_depth)
    right = _grow(X[~mask], y[~mask], depth + 1, max_depth)
    return TreeNode(feature=feature, threshold=threshold, left=left, right=right)


def _fit_dt(X, y, max_depth: int) -> DtModel:
    if max_depth < 1:
        raise ParameterError(f"max_depth must be >= 1, got {max_depth}")
    return DtModel(root=_grow(X, y, 0, max_depth), max_depth=max_depth,
                   n_features=X.shape[1])


def _predict_dt(model: DtModel, X):
    labels = np.empty(len(X), dtype=np.int64)
    for i, row in enumerate(X):
        node = model.root
        while not node.is_leaf:
            node = node.left if row[node.feature] <= node.threshold else node.right
        labels[i] = node.label
    return labels, labels.astype(np.float64)


def tree_depth(model: DtModel) -> int:
    def depth(node):
        if node.is_leaf:
            return 0
        return 1 + max(depth(node.left), depth(node.right))

    return depth(model.root)


# --- SVM via simplified sequential optimization ---------------------------

def _kernel_matrix(A, B, kernel: str, gamma: float):
    if kernel == "linear":
        return A @ B.T
    sq_a = np.sum(A * A, axis=1)[:, None]
    sq_b = np.sum(B * B, axis=1)[None, :]
    d2 = np.maximum(sq_a + sq_b - 2.0 * (A @ B.T), 0.0)
    return np.exp(-gamma * d2)


def _fit_svm(X, y01, C: float, gamma: float, kernel: str = "rbf", seed: int = 0,
             tol: float = SMO_TOLERANCE, max_passes: int = SMO_MAX_PASSES,
             max_sweeps: int = SMO_MAX_SWEEPS) -> SvmModel:
    if C <= 0 or gamma <= 0:
        raise ParameterError(f"C and gamma must be positive, got C={C}, gamma={gamma}")
    if kernel not in ("rbf", "linear"):
        raise ParameterError(f"kernel must be rbf or linear, got {kernel!r}")
    n = len(X)
    y = np.where(y01 == POSITIVE, 1.0, -1.0)
    K = _kernel_matrix(X, X, kernel, gamma)
    alpha = np.zeros(n)
    b = 0.0
    f = np.zeros(n)  # decision values over the training set, kept incrementally
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0x57]))

    passes = 0
    sweeps = 0
    while passes < max_passes and sweeps < max_sweeps:
        sweeps += 1
        changed = 0
        for i in range(n):
            e_i = f[i] - y[i]
            if not ((y[i] * e_i < -tol and alpha[i] < C) or
                    (y[i] * e_i > tol and alpha[i] > 0)):
                continue
            # try a random partner first, then everything else
            for j in rng.permutation(n):
                if j == i:
                    continue
                e_j = f[j] - y[j]
                if y[i] != y[j]:
                    lo = max(0.0, alpha[j] - alpha[i])
                    hi = min(C, C + alpha[j] - alpha[i])
                else:
                    lo = max(0.0, alpha[i] + alpha[j] - C)
                    hi = min(C, alpha[i] + alpha[j])
                if lo >= hi:
                    continue
                eta = 2.0 * K[i, j] - K[i, i] - K[j, j]
                if eta >= 0.0:
                    continue
                a_j_new = alpha[j] - y[j] * (e_i - e_j) / eta
                a_j_new = min(max(a_j_new, lo), hi)
                if abs(a_j_new - alpha[j]) < 1e-5:
                    continue
                a_i_new = alpha[i] + y[i] * y[j] * (alpha[j] - a_j_new)
                d_i = a_i_new - alpha[i]
                d_j = a_j_new - alpha[j]
                b1 = b - e_i - y[i] * d_i * K[i, i] - y[j] * d_j * K[i, j]
                b2 = b - e_j - y[i] * d_i * K[i, j] - y[j] * d_j * K[j, j]
                if 0.0 < a_i_new < C:
                    b_new = b1
                elif 0.0 < a_j_new < C:
                    b_new = b2
                else:
                    b_new = 0.5 * (b1 + b2)
                f += y[i] * d_i * K[i] + y[j] * d_j * K[j] + (b_new - b)
                alpha[i] = a_i_new
                alpha[j] = a_j_new
                b = b_new
                changed += 1
                break
        passes = passes + 1 if changed == 0 else 0

    keep = alpha > 1e-12
    return SvmModel(sv_x=X[keep].copy(), sv_y=y[keep].copy(), alpha=alpha[keep].copy(),
                    bias=b, C=C, gamma=gamma, kernel=kernel, n_features=X.shape[1])


def decision_function(model: SvmModel, X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if len(model.alpha) == 0:
        return np.full(len(X), model.bias)
    K = _kernel_matrix(X, model.sv_x, model.kernel, model.gamma)
    return K @ (model.alpha * model.sv_y) + model.bias


def _predict_svm(model: SvmModel, X):
    f = decision_function(model, X)
    labels = np.where(f > 0.0, POSITIVE, NEGATIVE).astype(np.int64)
    scores = 1.0 / (1.0 + np.exp(-f))
    return labels, scores


# --- grid search -----------------------------------------------------------

def stratified_folds(y, folds: int, seed: int = 0) -> np.ndarray:
    """Assign each row to one of ``folds`` folds, class-balanced."""
    if folds < 2:
        raise ParameterError(f"folds must be >= 2, got {folds}")
    y = np.asarray(y)
    assignment = np.empty(len(y), dtype=np.int64)
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0xF0]))
    for cls in np.unique(y):
        idx = np.nonzero(y == cls)[0]
        if len(idx) < folds:
            raise StratificationError(
                f"class {cls} has only {len(idx)} members for {folds} folds")
        idx = idx[rng.permutation(len(idx))]
        assignment[idx] = np.arange(len(idx)) % folds
    return assignment


def grid_search(kind: str, X, y, grid: list[dict] | None = None,
                folds: int = 3, seed: int = 0) -> dict:
    """Pick the candidate with the best mean validation accuracy.

    Ties keep the earliest grid entry, so the result is deterministic.
    """
    X, y = _check_training_data(X, y)
    candidates = grid if grid is not None else DEFAULT_GRIDS[kind]
    if not candidates:
        raise ParameterError("grid must contain at least one candidate")
    fold_of = stratified_folds(y, folds, seed)
    best_acc = -1.0
    best: dict = {}
    for ci, candidate in enumerate(candidates):
        accs = []
        for fold in range(folds):
            train = fold_of != fold
            val = ~train
            model = fit(kind, X[train], y[train], candidate,
                        seed=_derive_seed(seed, ci, fold))
            pred, _ = predict_many(model, X[val])
            accs.append(float(np.mean(pred == y[val])))
        mean_acc = float(np.mean(accs))
        if mean_acc > best_acc:
            best_acc = mean_acc
            best = dict(candidate)
    return best


def _derive_seed(seed: int, *parts: int) -> int:
    return int(np.random.SeedSequence([seed, *parts]).generate_state(1)[0])


# --- persistence -----------------------------------------------------------

MODEL_MAGIC = b"NMKM"
_KIND_TAGS = {"knn": 1, "nb": 2, "dt": 3, "svm": 4}
_TAG_KINDS = {v: k for k, v in _KIND_TAGS.items()}


def _flatten_tree(node: TreeNode, nodes: list):
    index = len(nodes)
    nodes.append(None)
    if node.is_leaf:
        nodes[index] = (-1, 0.0, -1, -1, node.label)
        return index
    left = _flatten_tree(node.left, nodes)
    right = _flatten_tree(node.right, nodes)
    nodes[index] = (node.feature, node.threshold, left, right, 0)
    return index


def _rebuild_tree(nodes: list, index: int) -> TreeNode:
    feature, threshold, left, right, label = nodes[index]
    if feature < 0:
        return TreeNode(label=label)
    return TreeNode(feature=feature, threshold=threshold,
                    left=_rebuild_tree(nodes, left),
                    right=_rebuild_tree(nodes, right))


def model_bytes(model: TrainedModel) -> bytes:
    w = Writer()
    w.magic(MODEL_MAGIC)
    w.u32(_KIND_TAGS[model.kind])
    if isinstance(model, KnnModel):
        w.u32(model.k)
        w.f64_tensor(model.X)
        w.f64_array(model.y.astype(np.float64))
    elif isinstance(model, NbModel):
        w.f64_array(model.log_priors)
        w.f64_tensor(model.means)
        w.f64_tensor(model.variances)
    elif isinstance(model, DtModel):
        w.u32(model.max_depth)
        w.u32(model.n_features)
        nodes: list = []
        _flatten_tree(model.root, nodes)
        w.u32(len(nodes))
        for feature, threshold, left, right, label in nodes:
            w.u32(feature + 1)  # 0 marks a leaf
            w.f64(threshold)
            w.u32(left + 1)
            w.u32(right + 1)
            w.u8(label)
    else:
        w.text(model.kernel)
        w.f64(model.C)
        w.f64(model.gamma)
        w.f64(model.bias)
        w.u32(model.n_features)
        w.f64_tensor(model.sv_x)
        w.f64_array(model.sv_y)
        w.f64_array(model.alpha)
    return w.getvalue()


def model_from_bytes(data: bytes) -> TrainedModel:
    r = Reader(data, label="model file")
    r.magic(MODEL_MAGIC)
    kind = _TAG_KINDS.get(r.u32())
    if kind == "knn":
        k = r.u32()
        X = r.f64_tensor()
        y = r.f64_array().astype(np.int64)
        model: TrainedModel = KnnModel(X=X, y=y, k=k)
    elif kind == "nb":
        model = NbModel(log_priors=r.f64_array(), means=r.f64_tensor(),
                        variances=r.f64_tensor())
    elif kind == "dt":
        max_depth = r.u32()
        n_features = r.u32()
        nodes = []
        for _ in range(r.u32()):
            feature = r.u32() - 1
            threshold = r.f64()
            left = r.u32() - 1
            right = r.u32() - 1
            label = r.u8()
            nodes.append((feature, threshold, left, right, label))
        model = DtModel(root=_rebuild_tree(nodes, 0), max_depth=max_depth,
                        n_features=n_features)
    elif kind == "svm":
        kernel = r.text()
        C = r.f64()
        gamma = r.f64()
        bias = r.f64()
        n_features = r.u32()
        sv_x = r.f64_tensor()
        sv_y = r.f64_array()
        alpha = r.f64_array()
        model = SvmModel(sv_x=sv_x, sv_y=sv_y, alpha=alpha, bias=bias, C=C,
                         gamma=gamma, kernel=kernel, n_features=n_features)
    else:
        raise ParameterError("model file carries an unknown kind tag")
    r.expect_end()
    return model


def save_model(model: TrainedModel, path) -> None:
    write_atomic(path, model_bytes(model))


def load_model(path) -> TrainedModel:
    with open(path, "rb") as handle:
        return model_from_bytes(handle.read())
