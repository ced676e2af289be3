"""Experiment analytics.

Per-client accuracy statistics, histogram/kernel-density summaries of the
accuracy distribution, exact Shapley values for client contribution
analysis, paired t-tests, and the staleness contribution experiment that
measures how a client's Shapley value decays as its stored update ages.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import NamedTuple

import numpy as np

from .engine import ExperimentConfig, Simulation, lr_at
from .errors import CapacityError, ConfigurationError, DataError
from .models import accuracy

SHAPLEY_MAX_PLAYERS = 12


@dataclass(frozen=True)
class AccuracyStats:
    """Population-moment summary of per-client accuracies.

    Decile fields cover the floor(N/10) lowest/highest clients; when there
    are fewer than 10 clients they fall back to max(1, floor(N/10)) and
    ``small_sample`` is set.
    """

    mean: float
    std: float
    variance: float
    worst10_mean: float
    worst10_std: float
    best10_mean: float
    best10_std: float
    small_sample: bool = False


def accuracy_stats(per_client_acc) -> AccuracyStats:
    acc = np.asarray(per_client_acc, dtype=np.float64)
    if acc.ndim != 1 or len(acc) == 0:
        raise DataError("per-client accuracies must be a nonempty vector")
    n = len(acc)
    k = max(1, n // 10)
    # stable sort: equal accuracies resolve by client id
    order = np.lexsort((np.arange(n), acc))
    worst = acc[order[:k]]
    best = acc[order[-k:]]
    std = float(np.std(acc))
    return AccuracyStats(
        mean=float(np.mean(acc)),
        std=std,
        variance=std * std,
        worst10_mean=float(np.mean(worst)),
        worst10_std=float(np.std(worst)),
        best10_mean=float(np.mean(best)),
        best10_std=float(np.std(best)),
        small_sample=n < 10,
    )


class HistogramPdf(NamedTuple):
    counts: np.ndarray  # per bin over [0, 1]
    bin_edges: np.ndarray
    grid: np.ndarray  # 101 sample points
    density: np.ndarray  # Gaussian-kernel density at grid


def histogram_pdf(per_client_acc, bin_width: float) -> HistogramPdf:
    """Histogram over [0, 1] plus a Silverman-bandwidth Gaussian KDE.

    The density is sampled at 101 points spanning the data plus four
    bandwidths each side, so its trapezoid integral is 1 to within 1e-3.
    """
    if bin_width <= 0:
        raise ConfigurationError("bin_width must be positive")
    acc = np.asarray(per_client_acc, dtype=np.float64)
    if acc.ndim != 1 or len(acc) == 0:
        raise DataError("per-client accuracies must be a nonempty vector")
    n_bins = int(np.ceil(1.0 / bin_width))
    edges = np.linspace(0.0, n_bins * bin_width, n_bins + 1)
    counts, _ = np.histogram(np.clip(acc, 0.0, edges[-1]), bins=edges)

    n = len(acc)
    sigma = float(np.std(acc))
    q75, q25 = np.percentile(acc, [75, 25])
    # float noise on a constant vector must not collapse the bandwidth
    floor = 1e-9 * max(1.0, float(np.max(np.abs(acc))))
    scales = [s for s in (sigma, (q75 - q25) / 1.34) if s > floor]
    h = 0.9 * min(scales) * n ** (-0.2) if scales else bin_width
    grid = np.linspace(acc.min() - 4 * h, acc.max() + 4 * h, 101)
    z = (grid[:, None] - acc[None, :]) / h
    density = np.exp(-0.5 * z * z).mean(axis=1) / (h * math.sqrt(2 * math.pi))
    return HistogramPdf(counts, edges, grid, density)


@dataclass(frozen=True)
class ShapleyReport:
    """Exact per-player Shapley values plus percentage shares.

    Percentages preserve sign and sum to 100 when the values sum to a
    positive total; otherwise they are normalized by the sum of absolute
    values and ``normalized_by_abs`` is set.
    """

    values: np.ndarray
    percents: np.ndarray
    normalized_by_abs: bool = False


def shapley(value_fn, num_players: int) -> ShapleyReport:
    """Exact Shapley values by coalition enumeration (2^n evaluations).

    ``value_fn`` receives a coalition as a sorted tuple of player ids.
    """
    if num_players < 1:
        raise ConfigurationError("num_players must be >= 1")
    if num_players > SHAPLEY_MAX_PLAYERS:
        raise CapacityError(
            f"exact enumeration supports at most {SHAPLEY_MAX_PLAYERS} players, got {num_players}"
        )
    n = num_players
    values = np.empty(1 << n)
    for mask in range(1 << n):
        coalition = tuple(i for i in range(n) if mask >> i & 1)
        values[mask] = float(value_fn(coalition))

    fact = [math.factorial(k) for k in range(n + 1)]
    weight = [fact[s] * fact[n - s - 1] / fact[n] for s in range(n)]
    phi = np.zeros(n)
    for mask in range(1 << n):
        s = bin(mask).count("1")
        for i in range(n):
            if mask >> i & 1:
                continue
            phi[i] += weight[s] * (values[mask | 1 << i] - values[mask])

    total = phi.sum()
    mass = np.abs(phi).sum()
    # percent shares are meaningless when the values nearly cancel; fall
    # back to the absolute mass there as well as for nonpositive totals
    if total > 1e-9 * mass:
        return ShapleyReport(phi, 100.0 * phi / total)
    percents = 100.0 * phi / mass if mass > 0 else np.zeros(n)
    return ShapleyReport(phi, percents, normalized_by_abs=True)


def _coalition_value_fn(model, w_pre, updates, psi, seen, eta, test_shard):
    """Value of a coalition: test-accuracy gain from aggregating only its
    members' stored updates, relative to the pre-aggregation model."""
    base = accuracy(model, w_pre, test_shard)

    def value(coalition) -> float:
        members = [i for i in coalition if seen[i]]
        contributors = [i for i in members if psi[i] > 0]
        if not contributors:
            return 0.0
        total = (updates[members] * psi[members, None]).sum(axis=0)
        w_s = w_pre - (eta / len(contributors)) * total
        return accuracy(model, w_s, test_shard) - base

    return value


def staleness_contribution_experiment(
    base_config: ExperimentConfig, stale_levels
) -> dict:
    """Shapley contributions of every client as client 0 grows stale.

    For each level s, client 0 is silenced for the final s rounds (s = 0
    is the fresh case), the run is stopped just before the last
    aggregation, and each coalition of stored updates is applied to the
    pre-aggregation model to value it by test accuracy.  Returns
    {stale_level: ShapleyReport}.
    """
    reports = {}
    for level in stale_levels:
        cfg = replace(
            base_config,
            strategy="fedar",
            availability={
                "kind": "stale_trace",
                "stale_client": 0,
                "stale_rounds": int(level),
            },
        )
        sim = Simulation(cfg)
        for _ in range(cfg.rounds - 1):
            sim.run_round()
        w_pre = sim.global_w.copy()
        sim.run_round()
        strat = sim.strategy
        value_fn = _coalition_value_fn(
            cfg.model,
            w_pre,
            strat.updates,
            strat.weights(cfg.rounds),
            strat.seen,
            lr_at(cfg.lr_schedule, cfg.eta0, cfg.rounds, cfg.lr_a),
            sim.global_test,
        )
        reports[int(level)] = shapley(value_fn, cfg.num_clients)
    return reports


class TTestResult(NamedTuple):
    t: float
    p: float
    degenerate: bool = False


def _beta_continued_fraction(a: float, b: float, x: float) -> float:
    """Lentz continued fraction for the regularized incomplete beta."""
    tiny = 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < tiny:
        d = tiny
    d = 1.0 / d
    h = d
    for m in range(1, 300):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 1e-15:
            return h
    raise ArithmeticError("incomplete beta continued fraction did not converge")


def regularized_incomplete_beta(a: float, b: float, x: float) -> float:
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    ln_front = (
        math.lgamma(a + b)
        - math.lgamma(a)
        - math.lgamma(b)
        + a * math.log(x)
        + b * math.log1p(-x)
    )
    front = math.exp(ln_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _beta_continued_fraction(a, b, x) / a
    return 1.0 - front * _beta_continued_fraction(b, a, 1.0 - x) / b


def student_t_two_sided_p(t: float, df: int) -> float:
    """P(|T| >= |t|) for T with ``df`` degrees of freedom."""
    if df < 1:
        raise ConfigurationError("df must be >= 1")
    if not math.isfinite(t):
        return 0.0
    return regularized_incomplete_beta(df / 2.0, 0.5, df / (df + t * t))


def paired_t_test(series_a, series_b) -> TTestResult:
    """Two-sided paired t-test between equally long metric series.

    Zero-variance differences are degenerate: p = 1 when the mean
    difference is also zero, p = 0 otherwise, flagged either way.
    """
    a = np.asarray(series_a, dtype=np.float64)
    b = np.asarray(series_b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise DataError("paired series must be 1-D and equally long")
    n = len(a)
    if n < 2:
        raise DataError("paired t-test needs at least 2 pairs")
    d = a - b
    mean = float(np.mean(d))
    sd = float(np.std(d, ddof=1))
    if sd == 0.0:
        if mean == 0.0:
            return TTestResult(0.0, 1.0, degenerate=True)
        return TTestResult(math.copysign(math.inf, mean), 0.0, degenerate=True)
    t = mean / (sd / math.sqrt(n))
    return TTestResult(t, student_t_two_sided_p(t, n - 1))
