"""Client availability processes.

Two kinds: independent per-round Bernoulli participation with per-client
probabilities, and scripted boolean traces (used by the staleness
contribution experiment).  Bernoulli draws come from substreams keyed by
(client, round), so the outcome for one client never depends on another
client's draw or on evaluation order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, FormatError
from .rng import RngStream


@dataclass(frozen=True)
class AvailabilityModel:
    kind: str  # "bernoulli" | "trace"
    probabilities: np.ndarray | None = None  # (num_clients,), bernoulli only
    schedule: np.ndarray | None = None  # (num_clients, rounds) bool, trace only

    @property
    def num_clients(self) -> int:
        if self.kind == "bernoulli":
            return len(self.probabilities)
        return len(self.schedule)


def sample_probabilities(num_clients: int, p_min: float, rng: np.random.Generator) -> np.ndarray:
    """Draw per-client availability probabilities i.i.d. uniform on [p_min, 1]."""
    if not 0.0 < p_min <= 1.0:
        raise ConfigurationError(f"p_min must be in (0, 1], got {p_min}")
    return rng.uniform(p_min, 1.0, size=num_clients)


def bernoulli_model(probabilities) -> AvailabilityModel:
    p = np.asarray(probabilities, dtype=np.float64)
    if p.ndim != 1 or len(p) == 0 or np.any(p <= 0) or np.any(p > 1):
        raise ConfigurationError("probabilities must be a nonempty vector in (0, 1]")
    return AvailabilityModel("bernoulli", probabilities=p)


def trace_model(schedule) -> AvailabilityModel:
    s = np.asarray(schedule)
    if s.ndim != 2 or s.size == 0:
        raise ConfigurationError("trace schedule must be a nonempty 2-D matrix")
    if not np.isin(s, (0, 1)).all():
        raise ConfigurationError("trace schedule entries must be 0 or 1")
    return AvailabilityModel("trace", schedule=s.astype(bool))


def is_available(model: AvailabilityModel, client: int, round_idx: int, rng: RngStream) -> bool:
    """Whether ``client`` returns its update in 1-based round ``round_idx``."""
    if not 0 <= client < model.num_clients:
        raise ConfigurationError(f"unknown client id {client}")
    if round_idx < 1:
        raise ConfigurationError(f"rounds are 1-based, got {round_idx}")
    if model.kind == "trace":
        if round_idx > model.schedule.shape[1]:
            raise ConfigurationError(
                f"trace covers {model.schedule.shape[1]} rounds, round {round_idx} requested"
            )
        return bool(model.schedule[client, round_idx - 1])
    draw = rng.child("avail", client, round_idx).generator().random()
    return bool(draw < model.probabilities[client])


def make_stale_trace(
    num_clients: int, total_rounds: int, stale_client: int, stale_rounds: int
) -> AvailabilityModel:
    """Trace where one client goes silent for the final ``stale_rounds`` rounds.

    Every other client is available in all rounds; ``stale_rounds = 0`` is
    the fully fresh case.
    """
    if not 0 <= stale_client < num_clients:
        raise ConfigurationError(f"stale_client {stale_client} out of range")
    if not 0 <= stale_rounds <= total_rounds:
        raise ConfigurationError("stale_rounds must be in [0, total_rounds]")
    schedule = np.ones((num_clients, total_rounds), dtype=bool)
    if stale_rounds > 0:
        schedule[stale_client, total_rounds - stale_rounds :] = False
    return AvailabilityModel("trace", schedule=schedule)


def load_trace_csv(path) -> AvailabilityModel:
    """Read a 0/1 CSV matrix (rows = clients, columns = rounds)."""
    try:
        matrix = np.loadtxt(path, delimiter=",", dtype=np.int64, ndmin=2)
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from None
    if matrix.size == 0:
        raise FormatError(f"{path}: empty trace")
    if not np.isin(matrix, (0, 1)).all():
        raise FormatError(f"{path}: trace entries must be 0 or 1")
    return AvailabilityModel("trace", schedule=matrix.astype(bool))
