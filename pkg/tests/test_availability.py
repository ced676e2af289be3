"""Bernoulli and trace availability processes."""

import numpy as np
import pytest

from fedsim import (
    ConfigurationError,
    RngStream,
    is_available,
    make_stale_trace,
    sample_probabilities,
)
from fedsim.availability import bernoulli_model, load_trace_csv, trace_model


class TestSampleProbabilities:
    def test_degenerate_interval_all_one(self):
        p = sample_probabilities(20, 1.0, np.random.default_rng(0))
        np.testing.assert_array_equal(p, 1.0)

    def test_uniform_mean_within_three_standard_errors(self):
        n = 2000
        p = sample_probabilities(n, 0.1, np.random.default_rng(1))
        mean = (0.1 + 1.0) / 2
        se = (1.0 - 0.1) / np.sqrt(12 * n)
        assert abs(p.mean() - mean) < 3 * se

    def test_minimum_respected(self):
        p = sample_probabilities(100, 0.5, np.random.default_rng(2))
        assert p.min() >= 0.5
        assert p.max() <= 1.0

    @pytest.mark.parametrize("p_min", [0.0, -0.1, 1.5])
    def test_invalid_p_min(self, p_min):
        with pytest.raises(ConfigurationError):
            sample_probabilities(10, p_min, np.random.default_rng(0))


class TestIsAvailable:
    def test_probability_one_always_true(self):
        model = bernoulli_model(np.ones(3))
        rng = RngStream(5)
        assert all(is_available(model, 1, t, rng) for t in range(1, 50))

    def test_empirical_frequency_matches(self):
        model = bernoulli_model([0.1])
        rng = RngStream(6)
        hits = sum(is_available(model, 0, t, rng) for t in range(1, 10001))
        se = np.sqrt(0.1 * 0.9 / 10000)
        assert abs(hits / 10000 - 0.1) < 3 * se

    def test_stale_three_trace_over_nine_rounds(self):
        model = make_stale_trace(5, 9, stale_client=0, stale_rounds=3)
        rng = RngStream(0)
        got = [is_available(model, 0, t, rng) for t in range(1, 10)]
        assert got == [True] * 6 + [False] * 3
        for other in range(1, 5):
            assert all(is_available(model, other, t, rng) for t in range(1, 10))

    def test_unknown_client_rejected(self):
        model = bernoulli_model([0.5, 0.5])
        with pytest.raises(ConfigurationError):
            is_available(model, 2, 1, RngStream(0))

    def test_round_beyond_trace_rejected(self):
        model = make_stale_trace(2, 4, 0, 1)
        with pytest.raises(ConfigurationError):
            is_available(model, 0, 5, RngStream(0))

    def test_outcome_depends_only_on_seed_client_round(self):
        model = bernoulli_model(np.full(10, 0.5))
        rng = RngStream(7)
        # evaluate client 3 alone, then interleaved with other clients
        alone = [is_available(model, 3, t, rng) for t in range(1, 30)]
        interleaved = []
        for t in range(1, 30):
            for c in (9, 0, 3, 5):
                value = is_available(model, c, t, rng)
                if c == 3:
                    interleaved.append(value)
        assert alone == interleaved

    def test_seed_determinism_of_full_matrix(self):
        model = bernoulli_model(sample_probabilities(6, 0.2, np.random.default_rng(3)))

        def matrix(seed):
            rng = RngStream(seed)
            return [
                [is_available(model, c, t, rng) for t in range(1, 20)] for c in range(6)
            ]

        assert matrix(11) == matrix(11)
        assert matrix(11) != matrix(12)


class TestStaleTrace:
    def test_fresh_case_everyone_available(self):
        model = make_stale_trace(5, 9, 0, 0)
        assert model.schedule.all()

    def test_stale_six_leaves_three_active_rounds(self):
        model = make_stale_trace(5, 9, 0, 6)
        np.testing.assert_array_equal(
            model.schedule[0], [True] * 3 + [False] * 6
        )

    def test_full_staleness_boundary(self):
        model = make_stale_trace(3, 7, 2, 7)
        assert not model.schedule[2].any()
        assert model.schedule[:2].all()

    def test_out_of_range_client(self):
        with pytest.raises(ConfigurationError):
            make_stale_trace(3, 5, 3, 1)


class TestTraceCsv:
    def test_round_trip(self, tmp_path):
        path = tmp_path / "trace.csv"
        path.write_text("1,0,1\n0,1,1\n")
        model = load_trace_csv(path)
        np.testing.assert_array_equal(
            model.schedule, [[True, False, True], [False, True, True]]
        )

    def test_non_binary_rejected(self, tmp_path):
        path = tmp_path / "trace.csv"
        path.write_text("1,2\n0,1\n")
        with pytest.raises(Exception):
            load_trace_csv(path)

    def test_inline_schedule_validation(self):
        with pytest.raises(ConfigurationError):
            trace_model([[0, 2]])
