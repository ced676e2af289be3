"""Server-side aggregation strategies.

All strategies share one contract: ``on_round(global_w, received,
round_idx, eta_t)`` consumes the local models returned this round (a map
from client id to final local parameters) and produces the next global
model.  Strategies never see raw client data.

FedAR keeps the latest observed normalized update per client, reuses it
while the client is silent, weights each stored update by a mildly
increasing function of the client's inactive-round count (capped, and cut
off entirely beyond a round-dependent staleness threshold), and divides by
the number of clients actually contributing.
"""

from __future__ import annotations

import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, ProtocolError
from .rng import RngStream

logger = logging.getLogger(__name__)

STRATEGY_NAMES = ("fedar", "fedavg", "fedavg_is", "fedavg_s", "mifa", "fedvarp", "scaffold")


@dataclass(frozen=True)
class CutoffSchedule:
    """Staleness threshold g(t) above which a stored update is dropped.

    convex:    g(t) = t0 + t / b          (requires b > 2)
    nonconvex: g(t) = c * max(sqrt(t), sqrt(t0))
    infinite:  g(t) = +inf  (never drop)
    """

    kind: str = "convex"
    t0: float = 10.0
    b: float = 4.0
    c: float = 5.0

    def __post_init__(self):
        if self.kind not in ("convex", "nonconvex", "infinite"):
            raise ConfigurationError(f"unknown cutoff kind {self.kind!r}")
        if self.kind == "convex" and (self.t0 <= 0 or self.b <= 2):
            raise ConfigurationError("convex cutoff requires t0 > 0 and b > 2")
        if self.kind == "nonconvex" and (self.t0 <= 0 or self.c <= 0):
            raise ConfigurationError("nonconvex cutoff requires t0 > 0 and c > 0")


def g_eval(g: CutoffSchedule, round_idx: int) -> float:
    if round_idx < 1:
        raise ConfigurationError("rounds are 1-based")
    if g.kind == "convex":
        return g.t0 + round_idx / g.b
    if g.kind == "nonconvex":
        return g.c * max(np.sqrt(round_idx), np.sqrt(g.t0))
    return np.inf


def fedar_weight(tau_i: int, round_idx: int, rho: float, psi_max: float, g: CutoffSchedule) -> float:
    """Weight of one stored update given its inactive-round count.

    Zero at or beyond the cutoff, otherwise min((tau+1)^rho, psi_max);
    equals 1 exactly for a fresh update.
    """
    if not 0.0 <= rho <= 1.0:
        raise ConfigurationError(f"rho must be in [0, 1], got {rho}")
    if psi_max <= 0:
        raise ConfigurationError("psi_max must be positive")
    if tau_i >= g_eval(g, round_idx):
        return 0.0
    return min((tau_i + 1.0) ** rho, psi_max)


class Strategy(ABC):
    """Aggregation policy plus whatever per-client state it maintains."""

    name: str = "base"

    def __init__(self):
        self.n_contributing = 0  # clients counted in the last aggregation

    def local_correction(self, client: int) -> np.ndarray | None:
        """Optional term added to every local gradient step (Scaffold only)."""
        return None

    @abstractmethod
    def on_round(
        self, global_w: np.ndarray, received: dict, round_idx: int, eta_t: float
    ) -> np.ndarray:
        """Aggregate this round's local models into the next global model."""


def _normalized_update(global_w: np.ndarray, local_w: np.ndarray, eta_t: float) -> np.ndarray:
    # the per-client update the server stores: (w_t - w_local) / eta
    return (global_w - local_w) / eta_t


class FedAr(Strategy):
    """Stale-update approximation plus staleness-weighted rectification."""

    name = "fedar"

    def __init__(
        self,
        num_clients: int,
        dim: int,
        rho: float = 0.1,
        psi_max: float = 2.0,
        cutoff: CutoffSchedule = CutoffSchedule(),
    ):
        super().__init__()
        if not 0.0 <= rho <= 1.0:
            raise ConfigurationError(f"rho must be in [0, 1], got {rho}")
        if psi_max > 2.0:
            logger.warning(
                "psi_max=%.3g exceeds 2; the convergence guarantee no longer applies",
                psi_max,
            )
        self.num_clients = num_clients
        self.rho = rho
        self.psi_max = psi_max
        self.cutoff = cutoff
        self.updates = np.zeros((num_clients, dim))  # latest stored update per client
        self.tau = np.zeros(num_clients, dtype=np.int64)  # inactive-round counts
        self.seen = np.zeros(num_clients, dtype=bool)  # ever-observed client set

    def record(self, received: dict, global_w: np.ndarray, eta_t: float) -> None:
        """Store this round's received updates and advance staleness counts."""
        if eta_t <= 0:
            raise ConfigurationError("eta_t must be positive")
        for client in received:
            if not 0 <= client < self.num_clients:
                raise ProtocolError(f"received update from unknown client {client}")
        for client in range(self.num_clients):
            if client in received:
                self.updates[client] = _normalized_update(global_w, received[client], eta_t)
                self.tau[client] = 0
                self.seen[client] = True
            else:
                self.tau[client] += 1

    def weights(self, round_idx: int) -> np.ndarray:
        return np.array(
            [
                fedar_weight(t, round_idx, self.rho, self.psi_max, self.cutoff)
                for t in self.tau
            ]
        )

    def global_step(self, global_w: np.ndarray, eta_t: float, round_idx: int):
        """Apply the weighted stored updates; returns (new_w, n_contributing).

        Clients never observed contribute nothing and are not counted; a
        round with no contributors leaves the model unchanged.
        """
        psi = self.weights(round_idx)
        contributing = self.seen & (psi > 0.0)
        n_t = int(np.count_nonzero(contributing))
        if n_t == 0:
            logger.info("round %d: no contributing clients, global model unchanged", round_idx)
            return global_w.copy(), 0
        members = np.flatnonzero(self.seen)
        total = (self.updates[members] * psi[members, None]).sum(axis=0)
        return global_w - (eta_t / n_t) * total, n_t

    def on_round(self, global_w, received, round_idx, eta_t):
        self.record(received, global_w, eta_t)
        new_w, self.n_contributing = self.global_step(global_w, eta_t, round_idx)
        return new_w


class FedAvg(Strategy):
    """Plain average of the models received this round."""

    name = "fedavg"

    def on_round(self, global_w, received, round_idx, eta_t):
        self.n_contributing = len(received)
        if not received:
            return global_w.copy()
        stack = np.stack([received[i] for i in sorted(received)])
        return stack.mean(axis=0)


class FedAvgIS(Strategy):
    """Received-only average, importance-weighted by 1/p_i.

    Uses the simulator's knowledge of each client's availability
    probability; weights are normalized over the received set.
    """

    name = "fedavg_is"

    def __init__(self, probabilities: np.ndarray):
        super().__init__()
        self.probabilities = np.asarray(probabilities, dtype=np.float64)

    def on_round(self, global_w, received, round_idx, eta_t):
        self.n_contributing = len(received)
        if not received:
            return global_w.copy()
        ids = sorted(received)
        weights = 1.0 / self.probabilities[ids]
        weights /= weights.sum()
        stack = np.stack([received[i] for i in ids])
        return weights @ stack


class FedAvgS(Strategy):
    """FedAvg over a uniform subsample of at most ``cap`` received clients."""

    name = "fedavg_s"

    def __init__(self, cap: int, rng: RngStream):
        super().__init__()
        if cap < 1:
            raise ConfigurationError("subsample cap must be >= 1")
        self.cap = cap
        self.rng = rng

    def on_round(self, global_w, received, round_idx, eta_t):
        if not received:
            self.n_contributing = 0
            return global_w.copy()
        ids = sorted(received)
        if len(ids) > self.cap:
            gen = self.rng.child("fedavg_s", round_idx).generator()
            picked = gen.choice(len(ids), size=self.cap, replace=False)
            ids = [ids[j] for j in sorted(picked)]
        self.n_contributing = len(ids)
        return np.stack([received[i] for i in ids]).mean(axis=0)


class Mifa(Strategy):
    """Memory-based aggregation with equal weights for all stored updates.

    Requires every client to respond in round 1 (the orchestrator forces
    this); afterwards the latest stored update of each client enters the
    average with identical weight and a fixed divisor of N.
    """

    name = "mifa"

    def __init__(self, num_clients: int, dim: int):
        super().__init__()
        self.num_clients = num_clients
        self.updates = np.zeros((num_clients, dim))

    def on_round(self, global_w, received, round_idx, eta_t):
        if eta_t <= 0:
            raise ConfigurationError("mifa requires eta_t > 0")
        if round_idx == 1 and len(received) < self.num_clients:
            raise ProtocolError(
                f"mifa needs all {self.num_clients} clients in round 1, got {len(received)}"
            )
        for client in received:
            if not 0 <= client < self.num_clients:
                raise ProtocolError(f"received update from unknown client {client}")
            self.updates[client] = _normalized_update(global_w, received[client], eta_t)
        total = self.updates.sum(axis=0)
        self.n_contributing = self.num_clients
        return global_w - (eta_t / self.num_clients) * total


class FedVarp(Strategy):
    """Variance-reduced aggregation keeping one stored update per client.

    Each round the average of all stored updates is corrected by the mean
    difference between fresh and stored updates over the received set.
    """

    name = "fedvarp"

    def __init__(self, num_clients: int, dim: int, server_lr: float = 1.0):
        super().__init__()
        if server_lr <= 0:
            raise ConfigurationError("server_lr must be positive")
        self.num_clients = num_clients
        self.server_lr = server_lr
        self.stored = np.zeros((num_clients, dim))

    def on_round(self, global_w, received, round_idx, eta_t):
        if eta_t <= 0:
            raise ConfigurationError("fedvarp requires eta_t > 0")
        self.n_contributing = self.num_clients
        v = self.stored.mean(axis=0)
        if received:
            ids = sorted(received)
            fresh = np.stack(
                [_normalized_update(global_w, received[i], eta_t) for i in ids]
            )
            v = v + (fresh - self.stored[ids]).mean(axis=0)
            self.stored[ids] = fresh
        new_w = global_w - self.server_lr * eta_t * v
        return new_w


class Scaffold(Strategy):
    """Control-variate-corrected local training with averaged model deltas.

    Participants run local steps on gradients shifted by (c - c_i); after
    the round each participant's variate moves to
    c_i - c + (w_t - w_local) / (K * eta), and the server variate absorbs
    the participant deltas scaled by 1/N, which keeps it the exact mean of
    the client variates.
    """

    name = "scaffold"

    def __init__(self, num_clients: int, dim: int, local_steps: int):
        super().__init__()
        self.num_clients = num_clients
        self.local_steps = local_steps
        self.c_global = np.zeros(dim)
        self.c_clients = np.zeros((num_clients, dim))

    def local_correction(self, client: int) -> np.ndarray:
        return self.c_global - self.c_clients[client]

    def on_round(self, global_w, received, round_idx, eta_t):
        if eta_t <= 0:
            raise ConfigurationError("scaffold requires eta_t > 0")
        self.n_contributing = len(received)
        if not received:
            return global_w.copy()
        ids = sorted(received)
        stack = np.stack([received[i] for i in ids])
        new_w = global_w + (stack - global_w).mean(axis=0)
        # every participant's update uses the variate broadcast at round start
        c_start = self.c_global
        scale = 1.0 / (self.local_steps * eta_t)
        delta = np.zeros_like(c_start)
        for i in ids:
            c_new = self.c_clients[i] - c_start + scale * (global_w - received[i])
            delta += c_new - self.c_clients[i]
            self.c_clients[i] = c_new
        self.c_global = c_start + delta / self.num_clients
        return new_w


def make_strategy(
    name: str,
    num_clients: int,
    dim: int,
    *,
    rho: float = 0.1,
    psi_max: float = 2.0,
    cutoff: CutoffSchedule = CutoffSchedule(),
    probabilities: np.ndarray | None = None,
    s_cap: int | None = None,
    rng: RngStream | None = None,
    server_lr: float = 1.0,
    local_steps: int = 5,
) -> Strategy:
    """Instantiate a strategy by its config name."""
    if name == "fedar":
        return FedAr(num_clients, dim, rho=rho, psi_max=psi_max, cutoff=cutoff)
    if name == "fedavg":
        return FedAvg()
    if name == "fedavg_is":
        if probabilities is None:
            raise ConfigurationError(
                "fedavg_is needs per-client availability probabilities (bernoulli mode)"
            )
        return FedAvgIS(probabilities)
    if name == "fedavg_s":
        cap = s_cap if s_cap is not None else int(np.ceil(num_clients / 2))
        if rng is None:
            raise ConfigurationError("fedavg_s needs an rng stream")
        return FedAvgS(cap, rng.child("strategy"))
    if name == "mifa":
        return Mifa(num_clients, dim)
    if name == "fedvarp":
        return FedVarp(num_clients, dim, server_lr=server_lr)
    if name == "scaffold":
        return Scaffold(num_clients, dim, local_steps)
    raise ConfigurationError(f"unknown strategy {name!r}; choose from {STRATEGY_NAMES}")
