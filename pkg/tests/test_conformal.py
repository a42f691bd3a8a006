import numpy as np
import pytest

from myodecode.conformal import (
    PredictionSet,
    RapsCalibration,
    SolverWindow,
    calibrate,
    fit_calibration,
    predict_set,
    raps_score,
)
from myodecode.errors import EmptyCalibration, NotCalibrated, UnknownClass


class TestRapsScore:
    def test_top1_mass_no_penalty(self):
        assert raps_score(np.array([1.0, 0, 0, 0]), 0, lam=0.01, k_reg=1) == 1.0

    def test_uniform_rank3_hand_value(self):
        # cumulative mass 0.75 + penalty 0.01 * (3 - 1) = 0.77
        probs = np.array([0.25, 0.25, 0.25, 0.25])
        order = np.argsort(-probs, kind="stable")
        third = int(order[2])
        assert raps_score(probs, third, lam=0.01, k_reg=1) == pytest.approx(0.77)

    def test_monotone_in_rank(self):
        probs = np.array([0.4, 0.3, 0.2, 0.1])
        scores = [raps_score(probs, c, lam=0.01, k_reg=1) for c in range(4)]
        assert scores == sorted(scores)

    def test_unknown_class(self):
        with pytest.raises(UnknownClass):
            raps_score(np.array([0.5, 0.5]), 2)


class TestCalibrate:
    def test_n9_alpha01_takes_largest(self):
        scores = np.arange(1, 10) / 10.0  # 9 scores
        assert calibrate(scores, alpha=0.1) == pytest.approx(0.9)

    def test_all_equal(self):
        assert calibrate(np.full(50, 0.42), alpha=0.1) == pytest.approx(0.42)

    def test_quantile_index_formula(self):
        scores = np.linspace(0, 1, 100)
        # ceil(101 * 0.9) = 91 -> 91st smallest
        assert calibrate(scores, alpha=0.1) == pytest.approx(np.sort(scores)[90])

    def test_empty_raises(self):
        with pytest.raises(EmptyCalibration):
            calibrate([], alpha=0.1)


class TestPredictSet:
    def _cal(self, q):
        return RapsCalibration(alpha=0.1, lam=0.01, k_reg=1, q_hat=q)

    def test_confident_singleton(self):
        # rank-2 running score is 0.98 + 0.01 penalty = 0.99 > q_hat
        pset = predict_set(np.array([0.97, 0.01, 0.01, 0.01]), self._cal(0.9))
        assert pset.labels == (0,)
        assert pset.certain

    def test_uniform_tight_q_multilabel(self):
        pset = predict_set(np.array([0.25, 0.25, 0.25, 0.25]), self._cal(0.78))
        assert len(pset.labels) > 1
        assert not pset.certain

    def test_q_zero_still_top1(self):
        pset = predict_set(np.array([0.4, 0.3, 0.2, 0.1]), self._cal(0.0))
        assert pset.labels == (0,)

    def test_not_calibrated(self):
        with pytest.raises(NotCalibrated):
            predict_set(np.array([0.5, 0.5]), RapsCalibration())

    def test_labels_in_descending_probability(self):
        probs = np.array([0.1, 0.5, 0.15, 0.25])
        pset = predict_set(probs, self._cal(1.5))
        assert list(pset.labels) == sorted(pset.labels,
                                           key=lambda c: -probs[c])


class TestSolver:
    def _set(self, labels, probs):
        return PredictionSet(labels=tuple(labels), probs=np.asarray(probs, float))

    def test_certain_short_circuits(self):
        w = SolverWindow(capacity=75)
        for _ in range(40):
            w.solve(self._set([1], [0.1, 0.9]))
        assert w.solve(self._set([0], [0.9, 0.1])) == 0

    def test_majority_count(self):
        w = SolverWindow(capacity=75)
        for _ in range(40):
            w.solve(self._set([0], [0.6, 0.3, 0.1]))
        # class 0 appears in 41 sets, class 1 only in the newest one
        out = w.solve(self._set([1, 0], [0.3, 0.6, 0.1]))
        assert out == 0

    def test_tiebreak_by_newest_probability(self):
        w = SolverWindow(capacity=75)
        out = w.solve(self._set([0, 1], [0.6, 0.4]))
        assert out == 0
        w2 = SolverWindow(capacity=75)
        out2 = w2.solve(self._set([1, 0], [0.4, 0.6]))
        assert out2 == 1

    def test_tiebreak_lower_class_id(self):
        w = SolverWindow(capacity=75)
        out = w.solve(self._set([0, 1], [0.5, 0.5]))
        assert out == 0

    def test_window_capacity_75(self):
        w = SolverWindow()
        for i in range(100):
            w.solve(self._set([i % 3], np.eye(3)[i % 3]))
        assert len(w.history) == 75

    def test_all_singletons_equals_argmax(self):
        rng = np.random.default_rng(0)
        w = SolverWindow(capacity=75)
        for _ in range(200):
            probs = rng.dirichlet(np.ones(4))
            top = int(np.argmax(probs))
            assert w.solve(self._set([top], probs)) == top

    def test_replay_determinism(self):
        rng = np.random.default_rng(1)
        stream = []
        for _ in range(300):
            probs = rng.dirichlet(np.ones(4))
            order = np.argsort(-probs)
            k = rng.integers(1, 4)
            stream.append(self._set([int(c) for c in order[:k]], probs))
        w1, w2 = SolverWindow(), SolverWindow()
        out1 = [w1.solve(s) for s in stream]
        out2 = [w2.solve(s) for s in stream]
        assert out1 == out2


class TestSingletonRateTrend:
    @pytest.mark.slow
    def test_singleton_rate_increases_with_separability(self):
        from myodecode import simdev
        from myodecode.decoder import (
            GbdtParams,
            apply_normalizer,
            assemble,
            fit_normalizer,
            train_gbdt,
        )
        from myodecode.kinematics import GuideTiming

        rates = {}
        for snr in (0.05, 0.3, 2.0, 6.0, 12.0):
            model_sim = simdev.one_hot_model(["thumb", "index", "grasp"],
                                             snr=snr, seed=21)
            rec = simdev.scripted_session(model_sim, ["thumb", "index", "grasp"],
                                          GuideTiming(), duration_s=12.0)
            ds = assemble(rec, rec.catalog())
            norm = fit_normalizer(ds)
            Xn = apply_normalizer(norm, ds.X)
            model = train_gbdt(Xn[ds.train_idx], ds.y[ds.train_idx], ds.n_classes,
                               GbdtParams(n_rounds=100))
            cal = fit_calibration(model.predict_proba(Xn[ds.cal_idx]),
                                  ds.y[ds.cal_idx])
            proba = model.predict_proba(Xn[ds.test_idx])
            singleton = np.mean([predict_set(p, cal).certain for p in proba])
            rates[snr] = float(singleton)
        # strict rise while separability is the binding constraint
        assert rates[0.05] < rates[0.3] < rates[2.0]
        # past saturation the rate stays at its ceiling, never decreasing
        assert rates[2.0] <= rates[6.0] + 1e-9 <= rates[12.0] + 2e-9


class TestFitCalibration:
    def test_coverage_on_synthetic_softmax(self):
        # exchangeable synthetic scores: coverage must meet 1 - alpha
        rng = np.random.default_rng(7)
        n_classes, n_cal, n_test = 4, 500, 2000
        labels = rng.integers(0, n_classes, size=n_cal + n_test)
        probs = np.empty((n_cal + n_test, n_classes))
        for i, y in enumerate(labels):
            p = rng.dirichlet(np.ones(n_classes) * 0.8)
            boost = rng.uniform(0.0, 4.0)
            p[y] += boost
            probs[i] = p / p.sum()
        cal = fit_calibration(probs[:n_cal], labels[:n_cal], alpha=0.1)
        hits = sum(
            int(y in predict_set(p, cal).labels)
            for p, y in zip(probs[n_cal:], labels[n_cal:])
        )
        assert hits / n_test >= 0.87
