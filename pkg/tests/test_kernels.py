"""Backend equivalence: the compiled extension and the numpy twin must agree."""

import numpy as np
import pytest

from myodecode import _kernels

pytestmark = pytest.mark.skipif(
    _kernels.compiled is None, reason="compiled extension not built"
)

PARAMS = dict(max_depth=6, n_bins=64, reg_lambda=1.0,
              min_child_hessian=1e-3, min_gain=0.0)


def _random_problem(seed, n=2000, f=32, b=64):
    rng = np.random.default_rng(seed)
    bins = rng.integers(0, b, size=(n, f), dtype=np.uint8)
    g = rng.normal(size=n)
    h = rng.uniform(0.01, 0.25, size=n)
    return bins, g, h


class TestGrowerEquivalence:
    @pytest.mark.parametrize("seed", [0, 1, 2, 3, 4])
    def test_trees_bit_identical(self, seed):
        bins, g, h = _random_problem(seed)
        gc = _kernels.compiled.Grower(bins, **{k: PARAMS[k] for k in
                                               ("max_depth", "n_bins")},
                                      reg_lambda=1.0, min_child_hessian=1e-3,
                                      min_gain=0.0)
        gp = _kernels.pure.Grower(bins, 6, 64, 1.0, 1e-3, 0.0)
        nc = gc.grow(g, h)
        np_ = gp.grow(g, h)
        assert nc == np_
        for name in ("feature", "thr_bin", "left", "right", "value", "leaf_assign"):
            assert np.array_equal(getattr(gc, name), getattr(gp, name)), name

    def test_shallow_and_degenerate(self):
        # constant bins: nothing to split on
        bins = np.zeros((100, 4), dtype=np.uint8)
        g = np.linspace(-1, 1, 100)
        h = np.full(100, 0.25)
        for impl in (_kernels.compiled, _kernels.pure):
            gr = impl.Grower(bins, 3, 8, 1.0, 1e-3, 0.0)
            assert gr.grow(g, h) == 1
            assert gr.left[0] == -1
            # Newton root value: -sum(g) / (sum(h) + lambda)
            assert gr.value[0] == pytest.approx(-g.sum() / (h.sum() + 1.0))


class TestPredictEquivalence:
    def test_margins_match(self):
        bins, g, h = _random_problem(7)
        rng = np.random.default_rng(8)
        gc = _kernels.compiled.Grower(bins, 4, 64, 1.0, 1e-3, 0.0)
        gc.grow(g, h)
        edges = np.sort(rng.normal(size=(32, 63)), axis=1)
        thr = np.zeros(gc.n_nodes)
        split = gc.feature >= 0
        thr[split] = edges[gc.feature[split], gc.thr_bin[split]]
        X = rng.normal(size=(200, 32))
        args = (gc.feature, thr, gc.left, gc.right, gc.value,
                np.zeros(1, dtype=np.int32), X, 1)
        out_c = _kernels.compiled.predict_margins(*args)
        out_p = _kernels.pure.predict_margins(*args)
        assert np.array_equal(out_c, out_p)

    def test_multitree_class_assignment(self):
        # two stub trees (single leaves) per class: margins sum per class
        feature = np.array([-1, -1, -1, -1], dtype=np.int32)
        threshold = np.zeros(4)
        left = np.array([-1, -1, -1, -1], dtype=np.int32)
        right = left.copy()
        value = np.array([1.0, 10.0, 2.0, 20.0])
        roots = np.array([0, 1, 2, 3], dtype=np.int32)
        X = np.zeros((3, 5))
        for impl in (_kernels.compiled, _kernels.pure):
            out = impl.predict_margins(feature, threshold, left, right, value,
                                       roots, X, 2)
            assert np.allclose(out, [[3.0, 30.0]] * 3)


class TestFilterEquivalence:
    def test_filter_rms_matches(self):
        rng = np.random.default_rng(9)
        grid = rng.normal(size=(16, 2, 360)) * 500
        out_c = _kernels.compiled.filter_rms(grid)
        out_p = _kernels.pure.filter_rms(grid)
        assert np.allclose(out_c, out_p, rtol=1e-12, atol=1e-12)
