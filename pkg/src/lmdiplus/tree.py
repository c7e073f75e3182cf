"""CART trees: axis-aligned splits chosen by maximal impurity decrease.

Trees retain what the stump-basis linearization needs afterwards: the
ordered split list, per-split in-bag child counts, and the realized
impurity decrease of every split. Bootstrap resampling is expressed as
integer sample weights, so in-bag counts N(v) are multiplicity sums.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._seeding import rng_for
from .data import Task


@dataclass(frozen=True)
class Split:
    node_id: int
    feature: int
    threshold: float
    n_left: float
    n_right: float
    n_node: float
    delta: float


@dataclass(frozen=True)
class TreeParams:
    min_samples_leaf: int = 5
    max_features: float | str = 1.0
    max_depth: int | None = None
    seed: int = 0


@dataclass
class TreeModel:
    """Array-of-nodes decision tree.

    feature[v] is -1 for leaves; value[v] stores the in-bag mean response
    (positive-class fraction for classification) at every node. splits is
    the ordered structure; split_pos_of_node maps a node id back into it.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    n_node: np.ndarray
    splits: list[Split]
    split_pos_of_node: dict[int, int]
    split_index_by_feature: dict[int, list[int]]
    task: Task
    n_features: int

    @property
    def n_nodes(self) -> int:
        return self.feature.shape[0]


def _resolve_max_features(max_features, p: int) -> int:
    if isinstance(max_features, str):
        if max_features == "sqrt":
            return max(1, int(math.floor(math.sqrt(p))))
        raise ValueError(f"unknown max_features token {max_features!r}")
    f = float(max_features)
    if f <= 0:
        raise ValueError("max_features must be positive")
    if f <= 1.0:
        return max(1, int(math.floor(f * p)))
    return min(p, int(f))


def _sse(y: np.ndarray, w: np.ndarray) -> float:
    """Weighted sum of squared deviations from the weighted mean."""
    n = float(w.sum())
    if n == 0.0:
        return 0.0
    mean = float(w @ y) / n
    d = y - mean
    return float(w @ (d * d))


def _gini_sum(y: np.ndarray, w: np.ndarray) -> float:
    """N(v) times the weighted Gini impurity, for 0/1 responses."""
    n = float(w.sum())
    if n == 0.0:
        return 0.0
    pos = float(w @ y)
    return n - pos * pos / n - (n - pos) * (n - pos) / n


def impurity_decrease(y_node, y_left, y_right, kind: Task = Task.REGRESSION) -> float:
    """Impurity decrease of a split: the node's impurity sum minus the
    children's, divided by the node count. Variance impurity for
    regression, Gini for classification, with identical weighting.
    """
    y_node = np.asarray(y_node, dtype=np.float64)
    y_left = np.asarray(y_left, dtype=np.float64)
    y_right = np.asarray(y_right, dtype=np.float64)
    if y_left.size == 0 or y_right.size == 0:
        raise ValueError("both children must be nonempty")
    if y_left.size + y_right.size != y_node.size:
        raise ValueError("children must partition the node")
    impurity = _gini_sum if kind is Task.BINARY_CLASSIFICATION else _sse
    ones = np.ones_like
    total = impurity(y_node, ones(y_node))
    return (total - impurity(y_left, ones(y_left)) - impurity(y_right, ones(y_right))) / y_node.size


def _best_split_on_feature(xs, y, w, min_leaf, is_gini):
    """Scan midpoint thresholds of one feature at one node.

    Returns (delta, threshold) for the best valid split, or None. Candidates
    are boundaries between consecutive distinct sorted values; cumulative
    weighted sums make the scan O(m log m).
    """
    order = np.argsort(xs, kind="stable")
    xs = xs[order]
    yw = y[order] * w[order]
    ws = w[order]
    cw = np.cumsum(ws)
    cwy = np.cumsum(yw)
    n_tot = cw[-1]
    sum_tot = cwy[-1]
    bounds = np.flatnonzero(xs[:-1] < xs[1:])
    if bounds.size == 0:
        return None
    n_l = cw[bounds]
    sum_l = cwy[bounds]
    n_r = n_tot - n_l
    sum_r = sum_tot - sum_l
    valid = (n_l >= min_leaf) & (n_r >= min_leaf)
    if not valid.any():
        return None
    if is_gini:
        child = (
            n_l - sum_l**2 / n_l - (n_l - sum_l) ** 2 / n_l
            + n_r - sum_r**2 / n_r - (n_r - sum_r) ** 2 / n_r
        )
        total = n_tot - sum_tot**2 / n_tot - (n_tot - sum_tot) ** 2 / n_tot
    else:
        cwy2 = np.cumsum(yw * y[order])
        sq_l = cwy2[bounds]
        sq_r = cwy2[-1] - sq_l
        child = sq_l - sum_l**2 / n_l + sq_r - sum_r**2 / n_r
        total = cwy2[-1] - sum_tot**2 / n_tot
    delta = (total - child) / n_tot
    delta[~valid] = -np.inf
    best = int(np.argmax(delta))  # first max = lowest threshold on ties
    if not delta[best] > 0.0:
        return None
    b = bounds[best]
    return float(delta[best]), 0.5 * (xs[b] + xs[b + 1])


class _Builder:
    def __init__(self, X, y, w, params: TreeParams, task: Task):
        self.X = X
        self.y = y
        self.w = w
        self.params = params
        self.task = task
        self.is_gini = task is Task.BINARY_CLASSIFICATION
        self.n_sub = _resolve_max_features(params.max_features, X.shape[1])
        self.rng = rng_for(params.seed)
        self.feature: list[int] = []
        self.threshold: list[float] = []
        self.left: list[int] = []
        self.right: list[int] = []
        self.value: list[float] = []
        self.n_node: list[float] = []
        self.splits: list[Split] = []
        self.split_pos_of_node: dict[int, int] = {}

    def _new_node(self, mean, n):
        nid = len(self.feature)
        self.feature.append(-1)
        self.threshold.append(np.nan)
        self.left.append(-1)
        self.right.append(-1)
        self.value.append(mean)
        self.n_node.append(n)
        return nid

    def build(self, rows: np.ndarray, depth: int) -> int:
        y, w = self.y[rows], self.w[rows]
        n = float(w.sum())
        mean = float(w @ y) / n
        nid = self._new_node(mean, n)

        msl = self.params.min_samples_leaf
        if n < 2 * msl:
            return nid
        if self.params.max_depth is not None and depth >= self.params.max_depth:
            return nid
        if np.all(y == y[0]):
            return nid

        p = self.X.shape[1]
        if self.n_sub < p:
            cand = np.sort(self.rng.choice(p, size=self.n_sub, replace=False))
        else:
            cand = np.arange(p)

        best = None  # (delta, feature, threshold); scan order gives the tie-breaks
        for k in cand:
            found = _best_split_on_feature(self.X[rows, k], y, w, msl, self.is_gini)
            if found is not None and (best is None or found[0] > best[0]):
                best = (found[0], int(k), found[1])
        if best is None:
            return nid

        _, k, tau = best
        go_left = self.X[rows, k] <= tau
        rows_l, rows_r = rows[go_left], rows[~go_left]
        w_l, w_r = self.w[rows_l], self.w[rows_r]
        n_l, n_r = float(w_l.sum()), float(w_r.sum())

        # recompute the decrease with the numerically stable two-pass form
        impurity = _gini_sum if self.is_gini else _sse
        delta = (impurity(y, w) - impurity(self.y[rows_l], w_l) - impurity(self.y[rows_r], w_r)) / n
        if not delta > 0.0:
            return nid

        self.feature[nid] = k
        self.threshold[nid] = tau
        self.split_pos_of_node[nid] = len(self.splits)
        self.splits.append(
            Split(node_id=nid, feature=k, threshold=tau,
                  n_left=n_l, n_right=n_r, n_node=n, delta=delta)
        )
        self.left[nid] = self.build(rows_l, depth + 1)
        self.right[nid] = self.build(rows_r, depth + 1)
        return nid

    def finish(self) -> TreeModel:
        by_feature: dict[int, list[int]] = {}
        for pos, s in enumerate(self.splits):
            by_feature.setdefault(s.feature, []).append(pos)
        return TreeModel(
            feature=np.asarray(self.feature, dtype=np.int64),
            threshold=np.asarray(self.threshold, dtype=np.float64),
            left=np.asarray(self.left, dtype=np.int64),
            right=np.asarray(self.right, dtype=np.int64),
            value=np.asarray(self.value, dtype=np.float64),
            n_node=np.asarray(self.n_node, dtype=np.float64),
            splits=self.splits,
            split_pos_of_node=self.split_pos_of_node,
            split_index_by_feature=by_feature,
            task=self.task,
            n_features=self.X.shape[1],
        )


def fit_tree(
    X: np.ndarray,
    y: np.ndarray,
    params: TreeParams | None = None,
    sample_weight: np.ndarray | None = None,
    task: Task = Task.REGRESSION,
) -> TreeModel:
    """Grow a CART tree. Rows with zero weight are out-of-bag and ignored.

    A root too small to split yields a single-leaf tree rather than an error.
    """
    params = params or TreeParams()
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2 or y.shape != (X.shape[0],):
        raise ValueError("X must be n x p and y length n")
    if not np.isfinite(y).all() or not np.isfinite(X).all():
        raise ValueError("non-finite inputs")
    if sample_weight is None:
        w = np.ones(X.shape[0])
    else:
        w = np.asarray(sample_weight, dtype=np.float64)
        if w.shape != y.shape or (w < 0).any():
            raise ValueError("sample_weight must be nonnegative, length n")
    rows = np.flatnonzero(w > 0)
    if rows.size == 0:
        raise ValueError("no rows with positive weight")
    builder = _Builder(X, y, w, params, task)
    builder.build(rows, depth=0)
    return builder.finish()


def leaf_ids(tree: TreeModel, X: np.ndarray) -> np.ndarray:
    """Route every row to its leaf node id (left on x <= threshold)."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != tree.n_features:
        raise ValueError(f"expected {tree.n_features} columns, got {X.shape}")
    node = np.zeros(X.shape[0], dtype=np.int64)
    while True:
        feat = tree.feature[node]
        active = feat >= 0
        if not active.any():
            return node
        idx = np.flatnonzero(active)
        cur = node[idx]
        go_left = X[idx, feat[idx]] <= tree.threshold[cur]
        node[idx] = np.where(go_left, tree.left[cur], tree.right[cur])


def predict_tree(tree: TreeModel, X: np.ndarray) -> np.ndarray:
    return tree.value[leaf_ids(tree, X)]


def decision_path(tree: TreeModel, x: np.ndarray) -> list[Split]:
    """Splits encountered routing x from the root to its leaf, in order."""
    x = np.asarray(x, dtype=np.float64).ravel()
    if x.shape[0] != tree.n_features:
        raise ValueError(f"expected {tree.n_features} values, got {x.shape[0]}")
    path = []
    nid = 0
    while tree.feature[nid] >= 0:
        path.append(tree.splits[tree.split_pos_of_node[nid]])
        if x[tree.feature[nid]] <= tree.threshold[nid]:
            nid = int(tree.left[nid])
        else:
            nid = int(tree.right[nid])
    return path


def tree_to_dict(tree: TreeModel) -> dict:
    """JSON-serializable document; node entries carry the split fields."""
    nodes = []
    for v in range(tree.n_nodes):
        node = {
            "id": v,
            "left": int(tree.left[v]),
            "right": int(tree.right[v]),
            "value": float(tree.value[v]),
            "n_node": float(tree.n_node[v]),
        }
        if tree.feature[v] >= 0:
            s = tree.splits[tree.split_pos_of_node[v]]
            node.update(
                feature=int(s.feature),
                threshold=float(s.threshold),
                n_left=float(s.n_left),
                n_right=float(s.n_right),
                delta=float(s.delta),
            )
        nodes.append(node)
    return {
        "task": tree.task.value,
        "n_features": tree.n_features,
        "nodes": nodes,
        "split_order": [s.node_id for s in tree.splits],
    }


def tree_from_dict(doc: dict) -> TreeModel:
    nodes = doc["nodes"]
    n = len(nodes)
    feature = np.full(n, -1, dtype=np.int64)
    threshold = np.full(n, np.nan)
    left = np.full(n, -1, dtype=np.int64)
    right = np.full(n, -1, dtype=np.int64)
    value = np.zeros(n)
    n_node = np.zeros(n)
    by_node = {}
    for node in nodes:
        v = node["id"]
        left[v] = node["left"]
        right[v] = node["right"]
        value[v] = node["value"]
        n_node[v] = node["n_node"]
        if "feature" in node:
            feature[v] = node["feature"]
            threshold[v] = node["threshold"]
            by_node[v] = node
    splits = []
    split_pos_of_node = {}
    for pos, v in enumerate(doc["split_order"]):
        node = by_node[v]
        split_pos_of_node[v] = pos
        splits.append(
            Split(node_id=v, feature=node["feature"], threshold=node["threshold"],
                  n_left=node["n_left"], n_right=node["n_right"],
                  n_node=node["n_node"], delta=node["delta"])
        )
    by_feature: dict[int, list[int]] = {}
    for pos, s in enumerate(splits):
        by_feature.setdefault(s.feature, []).append(pos)
    return TreeModel(
        feature=feature, threshold=threshold, left=left, right=right,
        value=value, n_node=n_node, splits=splits,
        split_pos_of_node=split_pos_of_node, split_index_by_feature=by_feature,
        task=Task(doc["task"]), n_features=doc["n_features"],
    )
