import math

import numpy as np
import pytest
from scipy import stats

from randbell.chsh import chsh_max
from randbell.core import X_AXIS, Z_AXIS, BlochVector, InvalidInputError, WernerState, correlator
from randbell.sampling import RngStream, random_triad
from randbell.statistics import (
    LAB_ACCIDENTAL_RATE,
    CountsRecord,
    CountsTable,
    DegenerateDataError,
    NoiseModel,
    ShiftedBound,
    chsh_error_poisson,
    estimate_correlator,
    estimate_correlators,
    estimate_visibility_from_mean,
    expected_counts,
    simulate_count_table,
    simulate_counts,
    subtract_accidentals,
    violation_probability,
    wilson_interval,
)


def direction(theta):
    return BlochVector(math.sin(theta), 0.0, math.cos(theta))


class TestTypes:
    def test_counts_record_validation(self):
        with pytest.raises(InvalidInputError):
            CountsRecord((1, 2, 3, -1))
        with pytest.raises(InvalidInputError):
            CountsRecord((1, 2, 3, 4), duration=0.0)
        with pytest.raises(InvalidInputError):
            CountsRecord((1, 2, 3))

    def test_noise_model_validation(self):
        with pytest.raises(InvalidInputError):
            NoiseModel(-1.0)

    def test_shifted_bound(self):
        assert ShiftedBound(0.1).bound == pytest.approx(2.1)
        assert ShiftedBound().bound == 2.0
        with pytest.raises(InvalidInputError):
            ShiftedBound(-0.1)

    def test_lab_like_rate_reproduces_raw_visibility(self):
        noise = NoiseModel.lab_like()
        lam, _ = expected_counts(-0.94, noise, 1.0)
        raw = (lam[0] + lam[3] - lam[1] - lam[2]) / lam.sum()
        assert raw == pytest.approx(-0.885, abs=1e-12)
        assert noise.accidental_rate == pytest.approx(LAB_ACCIDENTAL_RATE)


class TestSimulateCounts:
    def test_forbidden_outcomes(self):
        rng = RngStream(1, 0, 1)
        for _ in range(50):
            c = simulate_counts(Z_AXIS, Z_AXIS, WernerState(1.0), NoiseModel(1000.0, 0.0), 1.0, rng)
            assert c.main[0] == 0 and c.main[3] == 0
            assert c.delayed == (0, 0, 0, 0)

    def test_poisson_mean_equals_variance(self):
        rng = RngStream(2, 0, 1)
        draws = np.array([simulate_counts(Z_AXIS, X_AXIS, WernerState(0.0), NoiseModel(1000.0, 0.0), 1.0, rng).main
                          for _ in range(10_000)])
        mean, var = draws.mean(axis=0), draws.var(axis=0, ddof=1)
        assert np.all(np.abs(mean - 250) < 4 * math.sqrt(250 / 10_000))
        assert np.all(np.abs(var / mean - 1) < 0.05)

    def test_table_matches_single_pair(self):
        a, b = direction(0.3), direction(1.1)
        t = simulate_count_table(a.array[None], b.array[None], WernerState(0.9), NoiseModel(500.0, 7.0), 2.0, RngStream(5, 3, 1))
        c = simulate_counts(a, b, WernerState(0.9), NoiseModel(500.0, 7.0), 2.0, RngStream(5, 3, 1))
        assert t.record(0, 0) == c

    def test_bad_duration(self):
        with pytest.raises(InvalidInputError):
            simulate_counts(Z_AXIS, Z_AXIS, WernerState(1.0), NoiseModel(), 0.0, RngStream(0))


class TestAccidentals:
    def test_zero_delayed(self):
        c = CountsRecord((5, 6, 7, 8))
        np.testing.assert_array_equal(subtract_accidentals(c), [5, 6, 7, 8])

    def test_example(self):
        c = CountsRecord((100, 100, 100, 100), (10, 10, 10, 10))
        np.testing.assert_array_equal(subtract_accidentals(c), [90, 90, 90, 90])

    def test_negative_kept(self):
        np.testing.assert_array_equal(subtract_accidentals(CountsRecord((0, 5, 5, 0), (2, 0, 0, 0))), [-2, 5, 5, 0])

    def test_subtraction_unbiased(self):
        a, b, s = direction(0.0), direction(0.7), WernerState(0.9)
        noise = NoiseModel(1000.0, 40.0)
        rng = RngStream(3, 0, 1)
        corrected = np.array([subtract_accidentals(simulate_counts(a, b, s, noise, 1.0, rng)) for _ in range(10_000)])
        lam_clean, _ = expected_counts(correlator(a, b, s), NoiseModel(1000.0, 0.0), 1.0)
        se = corrected.std(axis=0, ddof=1) / math.sqrt(len(corrected))
        z = (corrected.mean(axis=0) - lam_clean) / se
        # four cells jointly: 2 s.e. per cell would fail ~17% of seeds by chance
        assert np.sum(z * z) < stats.chi2(4).ppf(0.99)
        assert np.all(np.abs(z) < 3)


class TestEstimateCorrelator:
    def test_examples(self):
        assert estimate_correlator((25, 25, 25, 25)) == 0.0
        assert estimate_correlator((0, 500, 500, 0)) == -1.0

    def test_clamped(self):
        assert estimate_correlator((10, -3, 0, 0)) == 1.0

    def test_degenerate(self):
        with pytest.raises(DegenerateDataError):
            estimate_correlator((0, 0, 0, 0))
        with pytest.raises(DegenerateDataError):
            estimate_correlator((5, -5, 0, 0))

    def test_vector_form_agrees(self, rng):
        c = rng.integers(0, 500, (50, 4)).astype(float) + 1
        np.testing.assert_allclose(estimate_correlators(c), [estimate_correlator(r) for r in c], atol=1e-15)

    def test_half_anticorrelation(self):
        b = direction(math.acos(0.5))
        c = simulate_counts(Z_AXIS, b, WernerState(1.0), NoiseModel(1e5, 0.0), 1.0, RngStream(4, 0, 1))
        assert estimate_correlator(subtract_accidentals(c)) == pytest.approx(-0.5, abs=0.01)

    def test_asymptotically_unbiased_with_accidentals(self):
        a, b, s = direction(0.2), direction(1.0), WernerState(0.95)
        true_e = correlator(a, b, s)
        noise = NoiseModel(1000.0, 30.0)
        rng = RngStream(6, 0, 1)
        est = np.array([estimate_correlator(subtract_accidentals(simulate_counts(a, b, s, noise, 100.0, rng)))
                        for _ in range(1000)])
        assert abs(est.mean() - true_e) < 3 * est.std(ddof=1) / math.sqrt(len(est))

    def test_accidentals_dilute_raw_correlations(self):
        a, b, s = direction(0.2), direction(1.0), WernerState(0.95)
        true_e = correlator(a, b, s)
        rng = RngStream(7, 0, 1)
        raw = np.array([estimate_correlator(simulate_counts(a, b, s, NoiseModel(1000.0, 30.0), 100.0, rng).main)
                        for _ in range(1000)])
        # one-sided: mean |E_raw| below |E_true| by more than 3 standard errors
        assert np.abs(raw).mean() + 3 * raw.std(ddof=1) / math.sqrt(len(raw)) < abs(true_e)


def triad_table(seed, pair_rate=1000.0, duration=1.0, visibility=1.0):
    rng = RngStream(seed)
    A, B = random_triad(rng).matrix.T, random_triad(rng).matrix.T
    return A, B, simulate_count_table(A, B, WernerState(visibility), NoiseModel(pair_rate, 0.0), duration, RngStream(seed, 0, 1))


class TestChshError:
    def test_disabled_is_zero(self):
        _, _, t = triad_table(1)
        assert chsh_error_poisson(t, 0, RngStream(0)) == 0.0

    def test_too_few_resamples(self):
        _, _, t = triad_table(1)
        with pytest.raises(InvalidInputError):
            chsh_error_poisson(t, 50, RngStream(0))

    def test_scales_like_inverse_sqrt_counts(self):
        _, _, t = triad_table(2)
        big = CountsTable(t.main * 100, t.delayed * 100, t.duration)
        small_err = chsh_error_poisson(t, 1000, RngStream(1, 0, 2))
        big_err = chsh_error_poisson(big, 1000, RngStream(1, 0, 2))
        assert 8 < small_err / big_err < 12

    def test_bracketed_by_direct_simulation(self):
        A, B, t = triad_table(3)
        err = chsh_error_poisson(t, 1000, RngStream(3, 0, 2))
        # oracle: fresh experiments from the true state, not resamples of one table
        rng = RngStream(3, 1, 1)
        direct = np.std([chsh_max(simulate_count_table(A, B, WernerState(1.0), NoiseModel(1000.0, 0.0), 1.0, rng).correlators()).value
                         for _ in range(1000)], ddof=1)
        assert 0.02 <= err <= 0.15
        assert 0.02 <= direct <= 0.15
        assert 2 / 3 < err / direct < 3 / 2

    def test_raw_mode(self):
        _, _, t = triad_table(4)
        assert chsh_error_poisson(t, 200, RngStream(4, 0, 2), corrected=False) > 0


class TestViolationProbability:
    def test_ninety_five_of_hundred(self):
        p, se = violation_probability([2.5] * 95 + [1.9] * 5, ShiftedBound(0.0))
        assert p == 0.95
        assert se == pytest.approx(0.0218, abs=1e-4)

    def test_strict_inequality(self):
        assert violation_probability([2.0] * 10, ShiftedBound(0.0)) == (0.0, 0.0)

    def test_shifted_threshold(self):
        p, se = violation_probability([2.05, 2.11], ShiftedBound(0.1))
        assert p == 0.5 and se == pytest.approx(0.5 / math.sqrt(2), rel=1e-12)

    def test_empty(self):
        with pytest.raises(InvalidInputError):
            violation_probability([], ShiftedBound())

    def test_monotone_in_delta(self, rng):
        values = rng.uniform(1.5, 2.8, 5000)
        probs = [violation_probability(values, ShiftedBound(d))[0] for d in np.linspace(0, 0.8, 41)]
        assert all(b <= a for a, b in zip(probs, probs[1:]))


class TestVisibilityEstimate:
    def test_quoted_ratios(self):
        assert estimate_visibility_from_mean(2.45, 2.6) == pytest.approx(0.942, abs=5e-4)
        assert estimate_visibility_from_mean(2.3, 2.6) == pytest.approx(0.885, abs=5e-4)

    def test_bad_reference(self):
        with pytest.raises(InvalidInputError):
            estimate_visibility_from_mean(2.4, 0.0)


def test_wilson_interval_contains_estimate():
    lo, hi = wilson_interval(95, 100)
    assert lo < 0.95 < hi
    assert lo == pytest.approx(0.8882, abs=1e-3)
