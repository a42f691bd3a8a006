# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels: histogram tree growth, ensemble traversal, grid filter + RMS.

The numpy twin lives in ``_pure``; both must produce identical trees
(same accumulation order, same tie-breaking) so the backends are
interchangeable at import time.
"""

from libc.math cimport sqrt
from libc.string cimport memset

import numpy as np

cimport numpy as cnp

cnp.import_array()

ctypedef cnp.uint8_t u8
ctypedef cnp.int32_t i32
ctypedef cnp.float64_t f64


cdef inline void _hist_node(const u8* bins, Py_ssize_t n_features, Py_ssize_t n_bins,
                            const i32* idx, Py_ssize_t lo, Py_ssize_t hi,
                            const f64* g, const f64* h, f64* hist) noexcept nogil:
    # hist layout: [feature, 2 * bin] with g at 2b, h at 2b + 1
    cdef Py_ssize_t k, f, stride = 2 * n_bins
    cdef Py_ssize_t i
    cdef const u8* row
    cdef f64 gi, hi_
    cdef f64* cell
    cdef f64* block
    for k in range(lo, hi):
        i = idx[k]
        gi = g[i]
        hi_ = h[i]
        row = bins + i * n_features
        block = hist
        for f in range(n_features):
            cell = block + 2 * <Py_ssize_t> row[f]
            cell[0] += gi
            cell[1] += hi_
            block += stride


cdef class Grower:
    """Level-wise histogram tree grower over pre-binned features."""

    cdef const u8[:, ::1] _bins
    cdef Py_ssize_t n_samples, n_features, n_bins, max_depth, max_nodes
    cdef f64 reg_lambda, min_child_hessian, min_gain
    # scratch, reused across grow() calls
    cdef i32[::1] _idx, _scratch
    cdef f64[::1] _hist_arena          # [max_nodes][F][2B]
    cdef i32[::1] _node_start, _node_end, _node_hist
    # outputs of the last grow()
    cdef public object feature, thr_bin, left, right, value, leaf_assign
    cdef public int n_nodes

    def __init__(self, bins, int max_depth, int n_bins, double reg_lambda,
                 double min_child_hessian, double min_gain):
        bins = np.ascontiguousarray(bins, dtype=np.uint8)
        self._bins = bins
        self.n_samples = bins.shape[0]
        self.n_features = bins.shape[1]
        self.n_bins = n_bins
        self.max_depth = max_depth
        self.reg_lambda = reg_lambda
        self.min_child_hessian = min_child_hessian
        self.min_gain = min_gain
        self.max_nodes = (1 << (max_depth + 1)) - 1
        self._idx = np.empty(self.n_samples, dtype=np.int32)
        self._scratch = np.empty(self.n_samples, dtype=np.int32)
        self._hist_arena = np.zeros(self.max_nodes * self.n_features * 2 * n_bins,
                                    dtype=np.float64)
        self._node_start = np.zeros(self.max_nodes, dtype=np.int32)
        self._node_end = np.zeros(self.max_nodes, dtype=np.int32)
        self._node_hist = np.zeros(self.max_nodes, dtype=np.int32)

    cdef void _scan_node(self, const f64* hist, f64 g_tot, f64 h_tot,
                         i32* out_f, i32* out_b, f64* out_gain) noexcept nogil:
        cdef Py_ssize_t f, b, stride = 2 * self.n_bins
        cdef f64 gl, hl, gr, hr, gain
        cdef f64 lam = self.reg_lambda
        cdef f64 parent = (g_tot * g_tot) / (h_tot + lam)
        cdef f64 best_gain = self.min_gain
        cdef i32 best_f = -1, best_b = -1
        for f in range(self.n_features):
            gl = 0.0
            hl = 0.0
            for b in range(self.n_bins - 1):
                gl += hist[f * stride + 2 * b]
                hl += hist[f * stride + 2 * b + 1]
                if hl < self.min_child_hessian:
                    continue
                hr = h_tot - hl
                if hr < self.min_child_hessian:
                    break
                gr = g_tot - gl
                gain = 0.5 * ((gl * gl) / (hl + lam) + (gr * gr) / (hr + lam) - parent)
                if gain > best_gain:
                    best_gain = gain
                    best_f = <i32> f
                    best_b = <i32> b
        out_f[0] = best_f
        out_b[0] = best_b
        out_gain[0] = best_gain

    cdef Py_ssize_t _partition(self, Py_ssize_t lo, Py_ssize_t hi,
                               Py_ssize_t feat, Py_ssize_t thr) noexcept nogil:
        # stable partition of idx[lo:hi]: bins <= thr first; returns boundary
        cdef Py_ssize_t k, w = lo, s = 0
        cdef i32 i
        cdef const u8* bins = &self._bins[0, 0]
        cdef i32* idx = &self._idx[0]
        cdef i32* scratch = &self._scratch[0]
        for k in range(lo, hi):
            i = idx[k]
            if <Py_ssize_t> bins[i * self.n_features + feat] <= thr:
                idx[w] = i
                w += 1
            else:
                scratch[s] = i
                s += 1
        for k in range(s):
            idx[w + k] = scratch[k]
        return w

    def grow(self, g, h):
        """Fit one regression tree to gradients/hessians; returns node count."""
        g = np.ascontiguousarray(g, dtype=np.float64)
        h = np.ascontiguousarray(h, dtype=np.float64)
        cdef const f64[::1] gv = g
        cdef const f64[::1] hv = h

        feature = np.full(self.max_nodes, -1, dtype=np.int32)
        thr_bin = np.full(self.max_nodes, -1, dtype=np.int32)
        left = np.full(self.max_nodes, -1, dtype=np.int32)
        right = np.full(self.max_nodes, -1, dtype=np.int32)
        value = np.zeros(self.max_nodes, dtype=np.float64)
        leaf_assign = np.empty(self.n_samples, dtype=np.int32)
        cdef i32[::1] fv = feature
        cdef i32[::1] tv = thr_bin
        cdef i32[::1] lv = left
        cdef i32[::1] rv = right
        cdef f64[::1] vv = value
        cdef i32[::1] la = leaf_assign

        cdef Py_ssize_t n = self.n_samples, F = self.n_features
        cdef Py_ssize_t hist_len = F * 2 * self.n_bins
        cdef Py_ssize_t stride = 2 * self.n_bins
        cdef const u8* binsp = &self._bins[0, 0]
        cdef f64* arena = &self._hist_arena[0]
        cdef i32* idx = &self._idx[0]
        cdef Py_ssize_t k, depth, node, child_big, child_small
        cdef Py_ssize_t level_lo, level_hi, n_nodes, lo, hi, mid
        cdef f64 g_tot, h_tot, gain
        cdef i32 best_f, best_b
        cdef Py_ssize_t b_
        cdef f64* hist
        cdef f64* hsmall
        cdef f64* hbig

        with nogil:
            for k in range(n):
                idx[k] = <i32> k
            memset(arena, 0, hist_len * sizeof(f64))
            _hist_node(binsp, F, self.n_bins, idx, 0, n, &gv[0], &hv[0], arena)
        self._node_start[0] = 0
        self._node_end[0] = <i32> n
        self._node_hist[0] = 0
        n_nodes = 1
        level_lo = 0
        level_hi = 1

        for depth in range(self.max_depth):
            for node in range(level_lo, level_hi):
                lo = self._node_start[node]
                hi = self._node_end[node]
                hist = arena + self._node_hist[node] * hist_len
                with nogil:
                    g_tot = 0.0
                    h_tot = 0.0
                    for b_ in range(self.n_bins):
                        g_tot += hist[2 * b_]
                        h_tot += hist[2 * b_ + 1]
                    self._scan_node(hist, g_tot, h_tot, &best_f, &best_b, &gain)
                if best_f < 0:
                    vv[node] = -g_tot / (h_tot + self.reg_lambda)
                    continue
                mid = self._partition(lo, hi, best_f, best_b)
                if mid == lo or mid == hi:
                    # degenerate after the hessian floor; keep as leaf
                    vv[node] = -g_tot / (h_tot + self.reg_lambda)
                    continue
                fv[node] = best_f
                tv[node] = best_b
                lv[node] = <i32> n_nodes
                rv[node] = <i32> (n_nodes + 1)
                self._node_start[n_nodes] = <i32> lo
                self._node_end[n_nodes] = <i32> mid
                self._node_start[n_nodes + 1] = <i32> mid
                self._node_end[n_nodes + 1] = <i32> hi
                # build the smaller child, derive the bigger one by subtraction
                if mid - lo <= hi - mid:
                    child_small = n_nodes
                    child_big = n_nodes + 1
                else:
                    child_small = n_nodes + 1
                    child_big = n_nodes
                self._node_hist[child_small] = <i32> child_small
                self._node_hist[child_big] = self._node_hist[node]
                hsmall = arena + child_small * hist_len
                hbig = arena + self._node_hist[child_big] * hist_len
                with nogil:
                    memset(hsmall, 0, hist_len * sizeof(f64))
                    _hist_node(binsp, F, self.n_bins, idx,
                               self._node_start[child_small], self._node_end[child_small],
                               &gv[0], &hv[0], hsmall)
                    for k in range(hist_len):
                        hbig[k] -= hsmall[k]
                n_nodes += 2
            level_lo = level_hi
            level_hi = n_nodes
            if level_lo == level_hi:
                break

        # deepest level never got scanned: assign Newton leaf values
        for node in range(level_lo, level_hi):
            lo = self._node_start[node]
            hi = self._node_end[node]
            with nogil:
                g_tot = 0.0
                h_tot = 0.0
                for k in range(lo, hi):
                    g_tot += gv[idx[k]]
                    h_tot += hv[idx[k]]
            vv[node] = -g_tot / (h_tot + self.reg_lambda)

        with nogil:
            for node in range(n_nodes):
                if lv[node] < 0:
                    for k in range(self._node_start[node], self._node_end[node]):
                        la[idx[k]] = <i32> node

        self.n_nodes = <int> n_nodes
        self.feature = feature[:n_nodes].copy()
        self.thr_bin = thr_bin[:n_nodes].copy()
        self.left = left[:n_nodes].copy()
        self.right = right[:n_nodes].copy()
        self.value = value[:n_nodes].copy()
        self.leaf_assign = leaf_assign
        return self.n_nodes


def predict_margins(feature, threshold, left, right, value, roots, X, int n_classes):
    """Sum per-class tree outputs for each row of X (tree t scores class t % K)."""
    cdef const i32[::1] fv = np.ascontiguousarray(feature, dtype=np.int32)
    cdef const f64[::1] tv = np.ascontiguousarray(threshold, dtype=np.float64)
    cdef const i32[::1] lv = np.ascontiguousarray(left, dtype=np.int32)
    cdef const i32[::1] rv = np.ascontiguousarray(right, dtype=np.int32)
    cdef const f64[::1] vv = np.ascontiguousarray(value, dtype=np.float64)
    cdef const i32[::1] rt = np.ascontiguousarray(roots, dtype=np.int32)
    X = np.ascontiguousarray(X, dtype=np.float64)
    cdef const f64[:, ::1] xv = X
    cdef Py_ssize_t n = xv.shape[0], T = rt.shape[0]
    out = np.zeros((n, n_classes), dtype=np.float64)
    cdef f64[:, ::1] ov = out
    cdef Py_ssize_t i, t, pos
    with nogil:
        for i in range(n):
            for t in range(T):
                pos = rt[t]
                while lv[pos] >= 0:
                    if xv[i, fv[pos]] <= tv[pos]:
                        pos = lv[pos]
                    else:
                        pos = rv[pos]
                ov[i, t % n_classes] += vv[pos]
    return out


def filter_rms(grid):
    """Spatial 3x3 cross filter (circular rows, zero-padded columns) + per-channel RMS.

    grid: float64[16, 2, T]; returns float64[32] in channel order (row + 16 * col).
    """
    grid = np.ascontiguousarray(grid, dtype=np.float64)
    cdef const f64[:, :, ::1] gv = grid
    cdef Py_ssize_t R = gv.shape[0], C = gv.shape[1], T = gv.shape[2]
    out = np.zeros(R * C, dtype=np.float64)
    cdef f64[::1] ov = out
    cdef Py_ssize_t r, c, t, up, dn
    cdef f64 s, lr, y, acc
    with nogil:
        for r in range(R):
            up = R - 1 if r == 0 else r - 1
            dn = 0 if r == R - 1 else r + 1
            for c in range(C):
                acc = 0.0
                for t in range(T):
                    s = gv[up, c, t] + gv[dn, c, t]
                    lr = 0.0
                    if c > 0:
                        lr += gv[r, c - 1, t]
                    if c < C - 1:
                        lr += gv[r, c + 1, t]
                    y = ((s + lr) + 0.5 * gv[r, c, t]) / 4.0
                    acc += y * y
                ov[c * R + r] = sqrt(acc / T)
    return out
