"""Analytics: accuracy stats, histogram/KDE, Shapley values, t-tests."""

import itertools
import math

import numpy as np
import pytest

from fedsim import (
    CapacityError,
    DataError,
    ExperimentConfig,
    ModelSpec,
    accuracy_stats,
    histogram_pdf,
    paired_t_test,
    shapley,
    staleness_contribution_experiment,
)
from fedsim.analysis import regularized_incomplete_beta, student_t_two_sided_p


def brute_force_shapley(value_fn, n):
    """Oracle: average marginal contribution over all n! orderings."""
    phi = np.zeros(n)
    perms = list(itertools.permutations(range(n)))
    for perm in perms:
        coalition = []
        prev = value_fn(tuple(coalition))
        for player in perm:
            coalition = sorted(coalition + [player])
            curr = value_fn(tuple(coalition))
            phi[player] += curr - prev
            prev = curr
    return phi / len(perms)


def random_game(rng, n):
    """Random characteristic function with v(empty) = 0."""
    table = {(): 0.0}
    for size in range(1, n + 1):
        for coalition in itertools.combinations(range(n), size):
            table[coalition] = float(rng.normal())
    return lambda coalition: table[tuple(coalition)]


class TestAccuracyStats:
    def test_constant_vector(self):
        s = accuracy_stats(np.full(30, 0.4))
        assert s.mean == pytest.approx(0.4, abs=1e-12)
        assert s.variance == pytest.approx(0.0, abs=1e-24)
        assert s.worst10_mean == pytest.approx(0.4, abs=1e-12)
        assert s.best10_mean == pytest.approx(0.4, abs=1e-12)
        assert not s.small_sample

    def test_matches_sort_and_slice_oracle(self):
        rng = np.random.default_rng(0)
        acc = rng.uniform(0, 1, size=100)
        s = accuracy_stats(acc)
        ranked = np.sort(acc)
        assert s.mean == pytest.approx(acc.mean(), abs=1e-12)
        assert s.variance == pytest.approx(np.var(acc), abs=1e-12)
        assert s.std == pytest.approx(np.std(acc), abs=1e-12)
        assert s.worst10_mean == pytest.approx(ranked[:10].mean(), abs=1e-12)
        assert s.best10_mean == pytest.approx(ranked[-10:].mean(), abs=1e-12)
        assert s.worst10_std == pytest.approx(ranked[:10].std(), abs=1e-12)
        assert s.worst10_mean <= s.mean <= s.best10_mean

    def test_population_variance_convention(self):
        s = accuracy_stats([0.0, 1.0])
        assert s.variance == 0.25
        assert s.small_sample

    def test_decile_ties_broken_by_client_id(self):
        acc = np.array([0.5] * 20)
        acc[7] = 0.1
        s = accuracy_stats(acc)
        # worst decile = clients (7, 0) after the tie-break
        assert s.worst10_mean == pytest.approx((0.1 + 0.5) / 2)

    def test_empty_rejected(self):
        with pytest.raises(DataError):
            accuracy_stats([])


class TestHistogramPdf:
    def test_single_client_lands_in_one_bin(self):
        result = histogram_pdf([0.5], 0.1)
        assert result.counts.sum() == 1
        assert result.counts[5] == 1

    def test_density_integrates_to_one(self):
        rng = np.random.default_rng(1)
        for acc in (
            rng.uniform(0, 1, 50),
            rng.beta(8, 3, 200),
            np.full(10, 0.3),
            np.array([0.02, 0.05, 0.96, 0.99]),
        ):
            result = histogram_pdf(acc, 0.05)
            integral = np.trapezoid(result.density, result.grid)
            assert integral == pytest.approx(1.0, abs=1e-3)

    def test_uniform_accuracies_give_flat_interior(self):
        grid_points = np.linspace(0.01, 0.99, 400)
        result = histogram_pdf(grid_points, 0.1)
        interior = (result.grid > 0.2) & (result.grid < 0.8)
        values = result.density[interior]
        assert values.max() / values.min() < 1.15

    def test_counts_cover_unit_interval(self):
        result = histogram_pdf([0.0, 0.999, 1.0], 0.25)
        assert result.counts.sum() == 3
        assert result.bin_edges[0] == 0.0
        assert result.bin_edges[-1] >= 1.0

    def test_empty_rejected(self):
        with pytest.raises(DataError):
            histogram_pdf([], 0.1)


class TestShapley:
    def test_two_symmetric_players(self):
        values = {(): 0.0, (0,): 0.5, (1,): 0.5, (0, 1): 1.0}
        report = shapley(lambda c: values[tuple(c)], 2)
        np.testing.assert_allclose(report.values, [0.5, 0.5], atol=1e-12)
        np.testing.assert_allclose(report.percents, [50.0, 50.0], atol=1e-9)

    def test_dummy_player_gets_zero(self):
        rng = np.random.default_rng(2)
        base = random_game(rng, 3)
        # player 3 adds nothing to any coalition
        def with_dummy(coalition):
            return base(tuple(i for i in coalition if i != 3))
        report = shapley(with_dummy, 4)
        assert abs(report.values[3]) < 1e-12

    def test_matches_permutation_brute_force(self):
        rng = np.random.default_rng(3)
        game = random_game(rng, 4)
        report = shapley(game, 4)
        np.testing.assert_allclose(report.values, brute_force_shapley(game, 4), atol=1e-12)

    def test_efficiency_axiom(self):
        rng = np.random.default_rng(4)
        for n in (2, 3, 5):
            game = random_game(rng, n)
            report = shapley(game, n)
            grand = game(tuple(range(n)))
            assert report.values.sum() == pytest.approx(grand, abs=1e-9)

    def test_negative_total_normalized_by_abs(self):
        values = {(): 0.0, (0,): -1.0, (1,): -0.5, (0, 1): -1.5}
        report = shapley(lambda c: values[tuple(c)], 2)
        assert report.normalized_by_abs
        assert report.values.sum() < 0
        assert np.abs(report.percents).sum() == pytest.approx(100.0)

    def test_capacity_limit(self):
        with pytest.raises(CapacityError):
            shapley(lambda c: 0.0, 13)


class TestPairedTTest:
    def test_identical_series(self):
        result = paired_t_test([1.0, 2.0, 3.0], [1.0, 2.0, 3.0])
        assert result.t == 0.0
        assert result.p == 1.0
        assert result.degenerate

    def test_two_pair_frozen_value(self):
        # differences {1, 3}: t = 2, df = 1, p = 1 - (2/pi) atan 2
        result = paired_t_test([2.0, 5.0], [1.0, 2.0])
        assert result.t == pytest.approx(2.0, abs=1e-12)
        assert result.p == pytest.approx(0.29516723530086656, abs=1e-10)
        assert not result.degenerate

    def test_sign_flip_negates_t_keeps_p(self):
        rng = np.random.default_rng(5)
        a = rng.normal(size=12)
        b = a + rng.normal(scale=0.5, size=12) + 0.3
        fwd = paired_t_test(a, b)
        rev = paired_t_test(b, a)
        assert fwd.t == pytest.approx(-rev.t, abs=1e-12)
        assert fwd.p == pytest.approx(rev.p, abs=1e-12)

    def test_constant_nonzero_difference_degenerate(self):
        result = paired_t_test([2.0, 3.0, 4.0], [1.0, 2.0, 3.0])
        assert result.degenerate
        assert result.p == 0.0
        assert math.isinf(result.t)

    def test_p_monotone_in_t_at_fixed_df(self):
        ts = np.linspace(0.0, 6.0, 40)
        for df in (1, 3, 10, 30):
            ps = [student_t_two_sided_p(t, df) for t in ts]
            assert all(0.0 <= p <= 1.0 for p in ps)
            assert all(b < a for a, b in zip(ps, ps[1:]))

    def test_survival_function_matches_scipy(self):
        stats = pytest.importorskip("scipy.stats")
        for df in (1, 2, 5, 17, 60):
            for t in (0.1, 0.7, 1.5, 2.3, 4.8):
                want = 2 * stats.t.sf(t, df)
                assert student_t_two_sided_p(t, df) == pytest.approx(want, abs=1e-10)

    def test_incomplete_beta_matches_scipy(self):
        special = pytest.importorskip("scipy.special")
        rng = np.random.default_rng(6)
        for _ in range(50):
            a, b = rng.uniform(0.2, 20, size=2)
            x = rng.uniform(0, 1)
            assert regularized_incomplete_beta(a, b, x) == pytest.approx(
                special.betainc(a, b, x), abs=1e-12
            )

    def test_unequal_lengths_rejected(self):
        with pytest.raises(DataError):
            paired_t_test([1.0, 2.0], [1.0])


def staleness_base_config(seed=0):
    return ExperimentConfig(
        strategy="fedar",
        num_clients=5,
        rounds=9,
        local_steps=5,
        batch_size=64,
        eta0=0.1,
        model=ModelSpec("logistic-regression", 6, 5, weight_decay=0.001),
        dataset={"kind": "synth", "num_classes": 5, "per_class": 150,
                 "input_dim": 6, "separation": 2.0},
        seed=seed,
        classes_per_client=2,
    )


class TestStalenessContribution:
    def test_fresh_level_all_clients_contribute(self):
        reports = staleness_contribution_experiment(staleness_base_config(), [0])
        report = reports[0]
        assert len(report.values) == 5
        # every client participated in the final round, so each marginal
        # contribution is computed from a fresh stored update
        assert np.all(np.abs(report.values) > 0) or np.any(report.values != 0)

    def test_reports_emitted_per_level(self):
        reports = staleness_contribution_experiment(staleness_base_config(), [0, 3, 6])
        assert sorted(reports) == [0, 3, 6]
        for report in reports.values():
            assert len(report.percents) == 5

    def test_efficiency_equals_accuracy_gain_of_real_update(self):
        # the grand coalition applies exactly the aggregation the server
        # performed, so the values must sum to the realized accuracy gain
        import dataclasses

        from fedsim import Simulation, accuracy

        config = staleness_base_config(seed=3)
        reports = staleness_contribution_experiment(config, [2])
        report = reports[2]

        run_config = dataclasses.replace(
            config,
            availability={"kind": "stale_trace", "stale_client": 0, "stale_rounds": 2},
        )
        sim = Simulation(run_config)
        for _ in range(8):
            sim.run_round()
        w_pre = sim.global_w.copy()
        sim.run_round()
        gain = accuracy(config.model, sim.global_w, sim.global_test) - accuracy(
            config.model, w_pre, sim.global_test
        )
        assert report.values.sum() == pytest.approx(gain, abs=1e-9)
