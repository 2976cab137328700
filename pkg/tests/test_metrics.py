import numpy as np
import pytest

from funnet.errors import DataError
from funnet.metrics import mep, mspe, r_squared


class TestMspe:
    def test_zero_for_perfect_predictions(self, rng):
        y = rng.normal(size=10)
        assert mspe(y, y.copy()) == 0.0

    def test_hand_value(self):
        assert mspe([0.0, 0.0], [1.0, 2.0]) == pytest.approx(2.5)

    def test_accumulation_oracle(self, rng):
        y, yhat = rng.normal(size=9), rng.normal(size=9)
        total = 0.0
        for a, b in zip(y, yhat):
            total += (a - b) ** 2
        assert mspe(y, yhat) == pytest.approx(total / 9, abs=1e-12)

    def test_length_mismatch_rejected(self):
        with pytest.raises(DataError):
            mspe([1.0], [1.0, 2.0])

    def test_empty_rejected(self):
        with pytest.raises(DataError):
            mspe([], [])


class TestRSquared:
    def test_perfect_fit(self, rng):
        y = rng.normal(size=12)
        assert r_squared(y, y.copy()) == 1.0

    def test_mean_predictor_scores_zero(self, rng):
        y = rng.normal(size=15)
        yhat = np.full(15, y.mean())
        assert r_squared(y, yhat) == pytest.approx(0.0, abs=1e-12)

    def test_hand_value(self):
        # SST = 2, SSE = 0.25 -> 0.875
        y = np.array([0.0, 2.0])
        yhat = np.array([0.5, 2.0])
        assert r_squared(y, yhat) == pytest.approx(0.875)

    def test_constant_target_perfect(self):
        assert r_squared([3.0, 3.0], [3.0, 3.0]) == 1.0

    def test_constant_target_miss(self):
        assert r_squared([3.0, 3.0], [3.0, 4.0]) == -np.inf


class TestMep:
    def test_population_variance_convention(self):
        # y = (0, 2): population variance 1, sample variance 2
        y = np.array([0.0, 2.0])
        yhat = np.array([1.0, 1.0])
        assert mep(y, yhat) == pytest.approx(1.0)

    def test_mean_predictor_scores_one(self, rng):
        y = rng.normal(size=20)
        yhat = np.full(20, y.mean())
        assert mep(y, yhat) == pytest.approx(1.0, abs=1e-12)

    def test_zero_variance_rejected(self):
        with pytest.raises(DataError):
            mep([2.0, 2.0, 2.0], [2.0, 2.0, 2.0])

    def test_scale_invariance(self, rng):
        y, yhat = rng.normal(size=25), rng.normal(size=25)
        assert mep(5.0 * y, 5.0 * yhat) == pytest.approx(mep(y, yhat),
                                                         rel=1e-12)
