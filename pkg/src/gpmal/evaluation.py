"""Downstream-task evaluation: cross-validated classification accuracy.

The protocol embeds the full dataset first and splits into folds
afterwards, which keeps implicit- and explicit-mapping methods
comparable.  kNN (k=5) is the cheap deterministic classifier; the random
forest mirrors the 100-tree ensemble evaluation and is deterministic via
per-tree RNG streams spawned from one seed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .dataset import FoldAssignment


def knn_predict(train_points, train_labels, test_points, k: int) -> np.ndarray:
    """Majority vote over the k Euclidean-nearest training points.

    Neighbour order ties break by ascending training index; vote ties go
    to the nearest neighbour carrying one of the tied labels.
    """
    train = np.asarray(train_points, dtype=np.float64)
    test = np.atleast_2d(np.asarray(test_points, dtype=np.float64))
    labels = np.asarray(train_labels)
    if train.shape[0] == 0:
        raise ValueError("empty training set")
    if k > train.shape[0]:
        raise ValueError(f"k={k} exceeds training size {train.shape[0]}")
    ids = np.arange(train.shape[0])
    out = np.empty(test.shape[0], dtype=labels.dtype)
    for t in range(test.shape[0]):
        d2 = np.square(train - test[t]).sum(axis=1)
        order = np.lexsort((ids, d2))[:k]
        votes = labels[order]
        uniq, counts = np.unique(votes, return_counts=True)
        best = counts.max()
        tied = set(uniq[counts == best])
        if len(tied) == 1:
            out[t] = next(iter(tied))
        else:
            for j in order:
                if labels[j] in tied:
                    out[t] = labels[j]
                    break
    return out


class _TreeNode:
    __slots__ = ("feature", "threshold", "left", "right", "label")

    def __init__(self):
        self.feature = -1
        self.threshold = 0.0
        self.left = None
        self.right = None
        self.label = None


def _gini(counts: np.ndarray) -> float:
    total = counts.sum()
    if total == 0:
        return 0.0
    p = counts / total
    return 1.0 - float(np.square(p).sum())


def _grow_cart(X, y, n_classes, idx, rng, n_candidates, min_leaf):
    node = _TreeNode()
    counts = np.bincount(y[idx], minlength=n_classes)
    if counts.max() == len(idx) or len(idx) < 2 * min_leaf:
        node.label = int(counts.argmax())
        return node
    p = X.shape[1]
    feats = rng.choice(p, size=min(n_candidates, p), replace=False)
    best = (np.inf, -1, 0.0)
    for f in feats:
        vals = X[idx, f]
        order = np.argsort(vals, kind="mergesort")
        sv = vals[order]
        sy = y[idx][order]
        left = np.zeros(n_classes, dtype=np.int64)
        right = np.bincount(sy, minlength=n_classes).astype(np.int64)
        for cut in range(len(idx) - 1):
            left[sy[cut]] += 1
            right[sy[cut]] -= 1
            if sv[cut] == sv[cut + 1]:
                continue
            nl = cut + 1
            nr = len(idx) - nl
            if nl < min_leaf or nr < min_leaf:
                continue
            impurity = (nl * _gini(left) + nr * _gini(right)) / len(idx)
            if impurity < best[0]:
                best = (impurity, int(f), (sv[cut] + sv[cut + 1]) / 2.0)
    if best[1] < 0:
        node.label = int(counts.argmax())
        return node
    node.feature = best[1]
    node.threshold = best[2]
    mask = X[idx, node.feature] <= node.threshold
    node.left = _grow_cart(X, y, n_classes, idx[mask], rng, n_candidates, min_leaf)
    node.right = _grow_cart(X, y, n_classes, idx[~mask], rng, n_candidates, min_leaf)
    return node


def _predict_cart(node, X):
    out = np.empty(X.shape[0], dtype=np.int64)
    for i in range(X.shape[0]):
        cur = node
        while cur.label is None:
            cur = cur.left if X[i, cur.feature] <= cur.threshold else cur.right
        out[i] = cur.label
    return out


def rf_predict(train_points, train_labels, test_points, n_trees: int = 100,
               rng=None) -> np.ndarray:
    """Majority vote of bootstrap CART trees split by Gini impurity.

    Each node considers ceil(sqrt(p)) randomly drawn candidate features;
    leaves form when pure or below the minimum size.  Tree t draws from
    its own RNG stream, so predictions do not depend on build order.
    """
    train = np.asarray(train_points, dtype=np.float64)
    test = np.atleast_2d(np.asarray(test_points, dtype=np.float64))
    labels = np.asarray(train_labels)
    n = train.shape[0]
    if n < 2:
        raise ValueError("need at least 2 training instances")
    classes, y = np.unique(labels, return_inverse=True)
    if rng is None:
        seed = 0
    elif isinstance(rng, (int, np.integer)):
        seed = int(rng)
    else:
        seed = int(rng.integers(0, 2**63))
    streams = [np.random.default_rng(s)
               for s in np.random.SeedSequence(seed).spawn(n_trees)]
    n_candidates = int(np.ceil(np.sqrt(train.shape[1])))
    votes = np.zeros((test.shape[0], len(classes)), dtype=np.int64)
    for t in range(n_trees):
        tree_rng = streams[t]
        boot = tree_rng.integers(0, n, size=n)
        root = _grow_cart(train, y, len(classes), boot, tree_rng,
                          n_candidates, min_leaf=1)
        pred = _predict_cart(root, test)
        votes[np.arange(test.shape[0]), pred] += 1
    return classes[votes.argmax(axis=1)]


@dataclass(frozen=True)
class CvAccuracy:
    classifier: str
    mean_accuracy: float
    per_fold: list[float]
    params: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "classifier": self.classifier,
            "mean_accuracy": self.mean_accuracy,
            "per_fold": self.per_fold,
            "params": self.params,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def cv_accuracy(embedding, labels, folds: FoldAssignment,
                classifier: str = "knn", knn_k: int = 5,
                n_trees: int = 100, seed: int = 0) -> CvAccuracy:
    """Per-fold and mean accuracy of a classifier on the embedding.

    The embedding is produced from the whole dataset before splitting
    (deliberate, for comparability with methods that cannot embed
    out-of-sample points).
    """
    emb = np.asarray(embedding, dtype=np.float64)
    labels = np.asarray(labels)
    if emb.shape[0] != labels.shape[0]:
        raise ValueError(f"embedding has {emb.shape[0]} rows but "
                         f"{labels.shape[0]} labels")
    if emb.shape[0] != folds.fold_of_instance.shape[0]:
        raise ValueError("fold assignment does not align with the embedding")
    per_fold = []
    for f in range(folds.n_folds):
        tr = folds.train_indices(f)
        te = folds.test_indices(f)
        if classifier == "knn":
            pred = knn_predict(emb[tr], labels[tr], emb[te], k=min(knn_k, len(tr)))
        elif classifier == "rf":
            pred = rf_predict(emb[tr], labels[tr], emb[te], n_trees=n_trees,
                              rng=seed + f)
        else:
            raise ValueError(f"unknown classifier {classifier!r}")
        per_fold.append(float(np.mean(pred == labels[te])))
    params = {"k": knn_k} if classifier == "knn" else {"n_trees": n_trees, "seed": seed}
    return CvAccuracy(classifier, float(np.mean(per_fold)), per_fold, params)
