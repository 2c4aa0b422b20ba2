"""Histogram-based gradient-boosted trees for binary mask prediction.

Numeric features are quantile-binned on the training data; null cells get a
dedicated bin and each split learns a default direction for it, so the model
can exploit missingness directly. Categorical features split on category
subsets found by scanning prefixes of the gradient-sorted category order.
Training is fully deterministic: no subsampling, no randomized tie-breaking.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from mechdetect.data import NULL_CODE, Column, ColumnKind, MaskColumn, Table

_EPS = 1e-12
_MIN_GAIN = 1e-10
_SCORE_CLIP = 50.0  # sigmoid saturates well before this


@dataclass(frozen=True)
class GbdtParams:
    n_iterations: int = 100
    learning_rate: float = 0.1
    max_leaves: int = 31
    min_samples_leaf: int = 20
    max_bins: int = 255
    l2_regularization: float = 0.0
    seed: int = 0  # reserved for subsampled binning; the exact algorithm is deterministic

    def __post_init__(self):
        if self.n_iterations < 1:
            raise ValueError("n_iterations must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.max_leaves < 2:
            raise ValueError("max_leaves must be >= 2")
        if not 2 <= self.max_bins <= 255:
            raise ValueError("max_bins must be in [2, 255]")
        if self.min_samples_leaf < 1:
            raise ValueError("min_samples_leaf must be >= 1")
        if self.l2_regularization < 0:
            raise ValueError("l2_regularization must be >= 0")


@dataclass(frozen=True)
class FeatureBinning:
    """Per-feature bin layout learned from the training fold.

    Numeric features map values into `n_bins` quantile bins via `edges`;
    categorical features use their category code as the bin. Bin id
    `n_bins` is reserved for nulls (and unseen categories at predict time).
    """

    name: str
    kind: ColumnKind
    n_bins: int
    edges: np.ndarray | None = None
    categories: tuple[str, ...] | None = None


@dataclass(frozen=True)
class Tree:
    feature: np.ndarray
    threshold: np.ndarray
    is_cat_split: np.ndarray
    missing_left: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    is_leaf: np.ndarray
    cat_left: np.ndarray

    @property
    def n_leaves(self) -> int:
        return int(self.is_leaf.sum())


@dataclass(frozen=True)
class TrainedModel:
    initial_score: float
    trees: tuple[Tree, ...]
    binning: tuple[FeatureBinning, ...]
    params: GbdtParams
    train_losses: tuple[float, ...]


def _fit_binning(column: Column, max_bins: int) -> FeatureBinning:
    if column.kind is ColumnKind.CATEGORICAL:
        return FeatureBinning(
            column.name, column.kind, n_bins=len(column.categories), categories=column.categories
        )
    observed = column.values[~np.isnan(column.values)]
    distinct = np.unique(observed)
    if len(distinct) <= max_bins:
        edges = (distinct[:-1] + distinct[1:]) / 2.0
    else:
        qs = np.arange(1, max_bins) * (100.0 / max_bins)
        edges = np.unique(np.percentile(observed, qs, method="midpoint"))
    return FeatureBinning(column.name, column.kind, n_bins=len(edges) + 1, edges=edges)


def _bin_column(column: Column, binning: FeatureBinning) -> np.ndarray:
    """Local bin codes for one column; nulls and unseen categories map to
    the reserved bin `n_bins`."""
    if binning.kind is ColumnKind.CATEGORICAL:
        codes = column.values.astype(np.int64)
        if column.categories != binning.categories:
            # remap by label so codes refer to the training dictionary
            train_code = {lab: i for i, lab in enumerate(binning.categories)}
            remap = np.array(
                [train_code.get(lab, binning.n_bins) for lab in column.categories],
                dtype=np.int64,
            )
            out = np.full(len(codes), binning.n_bins, dtype=np.int64)
            seen = codes != NULL_CODE
            out[seen] = remap[codes[seen]]
            return out
        codes = np.where(codes == NULL_CODE, binning.n_bins, codes)
        return codes
    codes = np.searchsorted(binning.edges, column.values, side="left").astype(np.int64)
    codes[np.isnan(column.values)] = binning.n_bins
    return codes


def _bin_table(table: Table, binnings: tuple[FeatureBinning, ...]) -> np.ndarray:
    binned = np.empty((table.n_rows, len(binnings)), dtype=np.int64, order="C")
    for f, (col, binning) in enumerate(zip(table.columns, binnings)):
        binned[:, f] = _bin_column(col, binning)
    return binned


def _sigmoid(scores: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-np.clip(scores, -_SCORE_CLIP, _SCORE_CLIP)))


def _logistic_loss(scores: np.ndarray, y: np.ndarray) -> float:
    return float(np.mean(np.logaddexp(0.0, scores) - y * scores))


@njit(cache=True)
def _accumulate_hist(binned, bin_offset, order, start, count, g, h, hist_g, hist_h, hist_c, node):
    n_feat = binned.shape[1]
    width = hist_g.shape[1]
    for w in range(width):
        hist_g[node, w] = 0.0
        hist_h[node, w] = 0.0
        hist_c[node, w] = 0
    for ii in range(start, start + count):
        i = order[ii]
        for f in range(n_feat):
            w = bin_offset[f] + binned[i, f]
            hist_g[node, w] += g[i]
            hist_h[node, w] += h[i]
            hist_c[node, w] += 1


@njit(cache=True)
def _scan_node(
    node, n_feat, nb, is_cat, bin_offset, hist_g, hist_h, hist_c,
    total_g, total_h, total_c, min_samples_leaf, l2,
):
    """Best split for one node over all features and both null directions.

    Returns (gain, feature, cut_pos, missing_left); cut_pos is the bin id
    for numeric features and the prefix length minus one in the
    gradient-sorted category order for categorical ones.
    """
    best_gain = -1.0
    best_f = -1
    best_pos = -1
    best_missleft = False
    parent_score = total_g * total_g / (total_h + l2 + _EPS)
    for f in range(n_feat):
        off = bin_offset[f]
        k = nb[f]
        if k < 1:
            continue
        g_miss = hist_g[node, off + k]
        h_miss = hist_h[node, off + k]
        c_miss = hist_c[node, off + k]
        if is_cat[f] == 1:
            ratio = np.empty(k, dtype=np.float64)
            for b in range(k):
                ratio[b] = hist_g[node, off + b] / (hist_h[node, off + b] + l2 + _EPS)
            scan = np.argsort(ratio)
        else:
            scan = np.arange(k)
        cum_g = 0.0
        cum_h = 0.0
        cum_c = 0
        for pos in range(k):
            b = scan[pos]
            cum_g += hist_g[node, off + b]
            cum_h += hist_h[node, off + b]
            cum_c += hist_c[node, off + b]
            # nulls stay right
            gl, hl, cl = cum_g, cum_h, cum_c
            cr = total_c - cl
            if cl >= min_samples_leaf and cr >= min_samples_leaf:
                gr = total_g - gl
                hr = total_h - hl
                gain = (
                    gl * gl / (hl + l2 + _EPS)
                    + gr * gr / (hr + l2 + _EPS)
                    - parent_score
                )
                if gain > best_gain:
                    best_gain = gain
                    best_f = f
                    best_pos = pos
                    best_missleft = False
            if pos == k - 1:
                break
            # nulls go left
            if c_miss > 0:
                gl2 = cum_g + g_miss
                hl2 = cum_h + h_miss
                cl2 = cum_c + c_miss
                cr2 = total_c - cl2
                if cl2 >= min_samples_leaf and cr2 >= min_samples_leaf:
                    gr2 = total_g - gl2
                    hr2 = total_h - hl2
                    gain2 = (
                        gl2 * gl2 / (hl2 + l2 + _EPS)
                        + gr2 * gr2 / (hr2 + l2 + _EPS)
                        - parent_score
                    )
                    if gain2 > best_gain:
                        best_gain = gain2
                        best_f = f
                        best_pos = pos
                        best_missleft = True
    return best_gain, best_f, best_pos, best_missleft


@njit(cache=True)
def _category_prefix(node, f, nb, bin_offset, hist_g, hist_h, l2, pos):
    """Bin ids of the first pos+1 categories in gradient-sorted order."""
    off = bin_offset[f]
    k = nb[f]
    ratio = np.empty(k, dtype=np.float64)
    for b in range(k):
        ratio[b] = hist_g[node, off + b] / (hist_h[node, off + b] + l2 + _EPS)
    scan = np.argsort(ratio)
    return scan[: pos + 1]


@njit(cache=True)
def _grow_tree(
    binned, nb, is_cat, bin_offset, g, h, order, scratch,
    hist_g, hist_h, hist_c,
    max_leaves, min_samples_leaf, l2, learning_rate, scores,
):
    n_samples = order.shape[0]
    n_feat = binned.shape[1]
    max_nodes = 2 * max_leaves - 1
    max_nb = int(np.max(nb))
    width = hist_g.shape[1]

    feature = np.full(max_nodes, -1, dtype=np.int64)
    threshold = np.full(max_nodes, -1, dtype=np.int64)
    is_cat_split = np.zeros(max_nodes, dtype=np.uint8)
    missing_left = np.zeros(max_nodes, dtype=np.uint8)
    left = np.full(max_nodes, -1, dtype=np.int64)
    right = np.full(max_nodes, -1, dtype=np.int64)
    value = np.zeros(max_nodes, dtype=np.float64)
    is_leaf = np.ones(max_nodes, dtype=np.uint8)
    cat_left = np.zeros((max_nodes, max_nb), dtype=np.uint8)

    start = np.zeros(max_nodes, dtype=np.int64)
    count = np.zeros(max_nodes, dtype=np.int64)
    total_g = np.zeros(max_nodes, dtype=np.float64)
    total_h = np.zeros(max_nodes, dtype=np.float64)
    total_c = np.zeros(max_nodes, dtype=np.int64)
    best_gain = np.full(max_nodes, -1.0, dtype=np.float64)
    best_f = np.full(max_nodes, -1, dtype=np.int64)
    best_pos = np.full(max_nodes, -1, dtype=np.int64)
    best_missleft = np.zeros(max_nodes, dtype=np.uint8)

    start[0] = 0
    count[0] = n_samples
    _accumulate_hist(binned, bin_offset, order, 0, n_samples, g, h, hist_g, hist_h, hist_c, 0)
    off0 = bin_offset[0]
    total_g[0] = hist_g[0, off0 : off0 + nb[0] + 1].sum()
    total_h[0] = hist_h[0, off0 : off0 + nb[0] + 1].sum()
    total_c[0] = n_samples
    if n_samples >= 2 * min_samples_leaf:
        gain, f, pos, missleft = _scan_node(
            0, n_feat, nb, is_cat, bin_offset, hist_g, hist_h, hist_c,
            total_g[0], total_h[0], total_c[0], min_samples_leaf, l2,
        )
        best_gain[0] = gain
        best_f[0] = f
        best_pos[0] = pos
        best_missleft[0] = 1 if missleft else 0

    n_nodes = 1
    n_leaves = 1
    while n_leaves < max_leaves:
        node = -1
        gmax = _MIN_GAIN
        for i in range(n_nodes):
            if is_leaf[i] == 1 and best_gain[i] > gmax:
                gmax = best_gain[i]
                node = i
        if node < 0:
            break

        f = best_f[node]
        pos = best_pos[node]
        missleft = best_missleft[node] == 1
        k = nb[f]
        if is_cat[f] == 1:
            prefix = _category_prefix(node, f, nb, bin_offset, hist_g, hist_h, l2, pos)
            for b in prefix:
                cat_left[node, b] = 1
        # partition: left rows first, order within side preserved
        s = start[node]
        c = count[node]
        n_left = 0
        n_right = 0
        for ii in range(s, s + c):
            i = order[ii]
            code = binned[i, f]
            if code == k:
                goes_left = missleft
            elif is_cat[f] == 1:
                goes_left = cat_left[node, code] == 1
            else:
                goes_left = code <= pos
            if goes_left:
                scratch[s + n_left] = i
                n_left += 1
            else:
                n_right += 1
        n_right = 0
        for ii in range(s, s + c):
            i = order[ii]
            code = binned[i, f]
            if code == k:
                goes_left = missleft
            elif is_cat[f] == 1:
                goes_left = cat_left[node, code] == 1
            else:
                goes_left = code <= pos
            if not goes_left:
                scratch[s + n_left + n_right] = i
                n_right += 1
        for ii in range(s, s + c):
            order[ii] = scratch[ii]

        child_l = n_nodes
        child_r = n_nodes + 1
        n_nodes += 2
        start[child_l] = s
        count[child_l] = n_left
        start[child_r] = s + n_left
        count[child_r] = n_right

        # build the smaller child's histogram, derive the sibling by subtraction
        if n_left <= n_right:
            small, big = child_l, child_r
        else:
            small, big = child_r, child_l
        _accumulate_hist(
            binned, bin_offset, order, start[small], count[small], g, h,
            hist_g, hist_h, hist_c, small,
        )
        for w in range(width):
            hist_g[big, w] = hist_g[node, w] - hist_g[small, w]
            hist_h[big, w] = hist_h[node, w] - hist_h[small, w]
            hist_c[big, w] = hist_c[node, w] - hist_c[small, w]
        for ch in (child_l, child_r):
            total_g[ch] = hist_g[ch, off0 : off0 + nb[0] + 1].sum()
            total_h[ch] = hist_h[ch, off0 : off0 + nb[0] + 1].sum()
            total_c[ch] = count[ch]
            if count[ch] >= 2 * min_samples_leaf:
                gain, bf, bp, bm = _scan_node(
                    ch, n_feat, nb, is_cat, bin_offset, hist_g, hist_h, hist_c,
                    total_g[ch], total_h[ch], total_c[ch], min_samples_leaf, l2,
                )
                best_gain[ch] = gain
                best_f[ch] = bf
                best_pos[ch] = bp
                best_missleft[ch] = 1 if bm else 0

        feature[node] = f
        threshold[node] = pos
        is_cat_split[node] = is_cat[f]
        missing_left[node] = 1 if missleft else 0
        left[node] = child_l
        right[node] = child_r
        is_leaf[node] = 0
        n_leaves += 1

    if n_nodes > 1:
        for i in range(n_nodes):
            if is_leaf[i] == 1:
                denom = total_h[i] + l2
                if denom < _EPS:
                    v = 0.0
                else:
                    v = -learning_rate * total_g[i] / denom
                value[i] = v
                for ii in range(start[i], start[i] + count[i]):
                    scores[order[ii]] += v

    return (
        feature[:n_nodes], threshold[:n_nodes], is_cat_split[:n_nodes],
        missing_left[:n_nodes], left[:n_nodes], right[:n_nodes],
        value[:n_nodes], is_leaf[:n_nodes], cat_left[:n_nodes], n_nodes,
    )


@njit(cache=True)
def _predict_tree(
    binned, nb, feature, threshold, is_cat_split, missing_left, cat_left,
    left, right, value, is_leaf, out,
):
    n = binned.shape[0]
    for i in range(n):
        node = 0
        while is_leaf[node] == 0:
            f = feature[node]
            code = binned[i, f]
            if code == nb[f]:
                goes_left = missing_left[node] == 1
            elif is_cat_split[node] == 1:
                goes_left = cat_left[node, code] == 1
            else:
                goes_left = code <= threshold[node]
            node = left[node] if goes_left else right[node]
        out[i] += value[node]


def fit(train: Table, target: MaskColumn, params: GbdtParams | None = None) -> TrainedModel:
    """Gradient boosting on logistic loss; one histogram tree per iteration."""
    params = params or GbdtParams()
    if train.n_rows == 0:
        raise ValueError("cannot fit on an empty table")
    y = target.bits.astype(np.float64)
    if len(y) != train.n_rows:
        raise ValueError("target length must match the number of rows")
    n_pos = int(target.bits.sum())
    if n_pos == 0 or n_pos == len(y):
        raise ValueError("target must contain both classes")

    binnings = tuple(_fit_binning(c, params.max_bins) for c in train.columns)
    binned = _bin_table(train, binnings)
    n, n_feat = binned.shape
    nb = np.array([b.n_bins for b in binnings], dtype=np.int64)
    is_cat = np.array(
        [1 if b.kind is ColumnKind.CATEGORICAL else 0 for b in binnings], dtype=np.uint8
    )
    bin_offset = np.zeros(n_feat, dtype=np.int64)
    np.cumsum(nb[:-1] + 1, out=bin_offset[1:])
    width = int(np.sum(nb + 1))

    max_nodes = 2 * params.max_leaves - 1
    hist_g = np.zeros((max_nodes, width), dtype=np.float64)
    hist_h = np.zeros((max_nodes, width), dtype=np.float64)
    hist_c = np.zeros((max_nodes, width), dtype=np.int64)
    scratch = np.empty(n, dtype=np.int64)

    base_rate = n_pos / len(y)
    initial_score = float(np.log(base_rate / (1.0 - base_rate)))
    scores = np.full(n, initial_score, dtype=np.float64)
    losses = [_logistic_loss(scores, y)]
    trees = []
    for _ in range(params.n_iterations):
        p = _sigmoid(scores)
        g = p - y
        h = p * (1.0 - p)
        order = np.arange(n, dtype=np.int64)
        result = _grow_tree(
            binned, nb, is_cat, bin_offset, g, h, order, scratch,
            hist_g, hist_h, hist_c,
            params.max_leaves, params.min_samples_leaf,
            params.l2_regularization, params.learning_rate, scores,
        )
        n_nodes = result[9]
        if n_nodes == 1:
            # nothing splittable; later iterations would see the same gradients
            break
        trees.append(Tree(*[a.copy() for a in result[:9]]))
        losses.append(_logistic_loss(scores, y))

    return TrainedModel(
        initial_score=initial_score,
        trees=tuple(trees),
        binning=binnings,
        params=params,
        train_losses=tuple(losses),
    )


def _check_schema(model: TrainedModel, data: Table) -> None:
    got = [(c.name, c.kind) for c in data.columns]
    expected = [(b.name, b.kind) for b in model.binning]
    if got != expected:
        raise ValueError(f"schema mismatch: model expects {expected}, data has {got}")


def predict_scores(model: TrainedModel, data: Table) -> np.ndarray:
    """Additive log-odds scores; monotone in the predicted probability."""
    _check_schema(model, data)
    binned = _bin_table(data, model.binning)
    nb = np.array([b.n_bins for b in model.binning], dtype=np.int64)
    out = np.full(data.n_rows, model.initial_score, dtype=np.float64)
    for t in model.trees:
        _predict_tree(
            binned, nb, t.feature, t.threshold, t.is_cat_split, t.missing_left,
            t.cat_left, t.left, t.right, t.value, t.is_leaf, out,
        )
    return out


def predict_proba(model: TrainedModel, data: Table) -> np.ndarray:
    return _sigmoid(predict_scores(model, data))
