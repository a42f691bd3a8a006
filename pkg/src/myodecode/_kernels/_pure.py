"""Numpy fallback for the compiled kernels.

Mirrors ``_core`` operation-for-operation: histogram accumulation order
(bincount = sequential adds), cumulative-sum split scans, stable
partitions, and the build-small/subtract-big sibling scheme.  Tree
growth is bit-identical across backends; only the RMS reduction differs
in summation order (pairwise vs sequential) and is compared with a
tolerance.
"""

from __future__ import annotations

import numpy as np


def _seq_sum(a: np.ndarray) -> float:
    # sequential accumulation, matching a plain C loop (np.sum is pairwise)
    return float(np.cumsum(a)[-1]) if a.size else 0.0


class Grower:
    """Level-wise histogram tree grower over pre-binned features (numpy)."""

    def __init__(self, bins, max_depth, n_bins, reg_lambda, min_child_hessian, min_gain):
        self.bins = np.ascontiguousarray(bins, dtype=np.uint8)
        self.n_samples, self.n_features = self.bins.shape
        self.n_bins = int(n_bins)
        self.max_depth = int(max_depth)
        self.reg_lambda = float(reg_lambda)
        self.min_child_hessian = float(min_child_hessian)
        self.min_gain = float(min_gain)
        self.max_nodes = (1 << (self.max_depth + 1)) - 1
        self._flat_offsets = (np.arange(self.n_features, dtype=np.intp) * self.n_bins)

    def _hist(self, idx, g, h):
        flat = (self.bins[idx].astype(np.intp) + self._flat_offsets).ravel()
        size = self.n_features * self.n_bins
        hg = np.bincount(flat, weights=np.repeat(g[idx], self.n_features), minlength=size)
        hh = np.bincount(flat, weights=np.repeat(h[idx], self.n_features), minlength=size)
        return hg.reshape(self.n_features, self.n_bins), hh.reshape(self.n_features, self.n_bins)

    def _scan(self, hg, hh):
        g_tot = float(np.cumsum(hg[0])[-1])
        h_tot = float(np.cumsum(hh[0])[-1])
        gl = np.cumsum(hg[:, :-1], axis=1)
        hl = np.cumsum(hh[:, :-1], axis=1)
        gr = g_tot - gl
        hr = h_tot - hl
        lam = self.reg_lambda
        parent = (g_tot * g_tot) / (h_tot + lam)
        with np.errstate(divide="ignore", invalid="ignore"):
            gain = 0.5 * ((gl * gl) / (hl + lam) + (gr * gr) / (hr + lam) - parent)
        valid = (hl >= self.min_child_hessian) & (hr >= self.min_child_hessian)
        gain = np.where(valid, gain, -np.inf)
        k = int(np.argmax(gain))  # first occurrence = lowest (feature, bin), as in _core
        best = gain.flat[k]
        if not np.isfinite(best) or best <= self.min_gain:
            return -1, -1, g_tot, h_tot
        return k // (self.n_bins - 1), k % (self.n_bins - 1), g_tot, h_tot

    def grow(self, g, h):
        g = np.ascontiguousarray(g, dtype=np.float64)
        h = np.ascontiguousarray(h, dtype=np.float64)
        M = self.max_nodes
        feature = np.full(M, -1, dtype=np.int32)
        thr_bin = np.full(M, -1, dtype=np.int32)
        left = np.full(M, -1, dtype=np.int32)
        right = np.full(M, -1, dtype=np.int32)
        value = np.zeros(M, dtype=np.float64)
        leaf_assign = np.empty(self.n_samples, dtype=np.int32)

        idx0 = np.arange(self.n_samples, dtype=np.int32)
        hg0, hh0 = self._hist(idx0, g, h)
        # per live node: (idx array, hist_g, hist_h)
        level = [(idx0, hg0, hh0)]
        level_ids = [0]
        n_nodes = 1
        lam = self.reg_lambda

        for depth in range(self.max_depth):
            nxt, nxt_ids = [], []
            for node, (idx, hg, hh) in zip(level_ids, level):
                f, b, g_tot, h_tot = self._scan(hg, hh)
                if f < 0:
                    value[node] = -g_tot / (h_tot + lam)
                    leaf_assign[idx] = node
                    continue
                mask = self.bins[idx, f] <= b
                li, ri = idx[mask], idx[~mask]
                if li.size == 0 or ri.size == 0:
                    value[node] = -g_tot / (h_tot + lam)
                    leaf_assign[idx] = node
                    continue
                feature[node] = f
                thr_bin[node] = b
                left[node] = n_nodes
                right[node] = n_nodes + 1
                if li.size <= ri.size:
                    hsl, hsh = self._hist(li, g, h)
                    pair = [(li, hsl, hsh), (ri, hg - hsl, hh - hsh)]
                else:
                    hsl, hsh = self._hist(ri, g, h)
                    pair = [(li, hg - hsl, hh - hsh), (ri, hsl, hsh)]
                nxt.extend(pair)
                nxt_ids.extend([n_nodes, n_nodes + 1])
                n_nodes += 2
            level, level_ids = nxt, nxt_ids
            if not level:
                break

        for node, (idx, _, _) in zip(level_ids, level):
            g_tot = _seq_sum(g[idx])
            h_tot = _seq_sum(h[idx])
            value[node] = -g_tot / (h_tot + lam)
            leaf_assign[idx] = node

        self.n_nodes = n_nodes
        self.feature = feature[:n_nodes].copy()
        self.thr_bin = thr_bin[:n_nodes].copy()
        self.left = left[:n_nodes].copy()
        self.right = right[:n_nodes].copy()
        self.value = value[:n_nodes].copy()
        self.leaf_assign = leaf_assign
        return n_nodes


def predict_margins(feature, threshold, left, right, value, roots, X, n_classes,
                    _chunk=512):
    """Vectorized twin of ``_core.predict_margins`` (chunked over rows)."""
    feature = np.asarray(feature, dtype=np.int32)
    threshold = np.asarray(threshold, dtype=np.float64)
    left = np.asarray(left, dtype=np.int32)
    right = np.asarray(right, dtype=np.int32)
    value = np.asarray(value, dtype=np.float64)
    roots = np.asarray(roots, dtype=np.int32)
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    n = X.shape[0]
    T = roots.shape[0]
    tree_cls = np.arange(T) % n_classes
    out = np.zeros((n, n_classes), dtype=np.float64)
    for lo in range(0, n, _chunk):
        hi = min(lo + _chunk, n)
        xc = X[lo:hi]
        pos = np.broadcast_to(roots, (hi - lo, T)).copy()
        alive = left[pos] >= 0
        while alive.any():
            f = feature[pos]
            f[~alive] = 0
            goes_left = np.take_along_axis(xc, f, axis=1) <= threshold[pos]
            nxt = np.where(goes_left, left[pos], right[pos])
            pos = np.where(alive, nxt, pos)
            alive = left[pos] >= 0
        vals = value[pos]
        for c in range(n_classes):
            # cumsum keeps the sequential add order of the compiled kernel
            out[lo:hi, c] = np.cumsum(vals[:, tree_cls == c], axis=1)[:, -1]
    return out


def filter_rms(grid):
    """Spatial 3x3 cross filter (circular rows, zero columns) + per-channel RMS."""
    grid = np.asarray(grid, dtype=np.float64)
    up = np.roll(grid, 1, axis=0)
    down = np.roll(grid, -1, axis=0)
    lr = np.zeros_like(grid)
    lr[:, :-1] += grid[:, 1:]
    lr[:, 1:] += grid[:, :-1]
    y = ((up + down) + lr + 0.5 * grid) / 4.0
    rms = np.sqrt(np.mean(y * y, axis=2))  # [16, 2]
    return rms.T.ravel()  # channel k = row + 16 * col
