"""Experiment orchestration.

Each round: draw availability, run local SGD for every available client
from the current global model (each client on its own keyed rng
substream), hand the immutable result map to the strategy, record
metrics.  Two runs with the same config and seed produce bitwise-identical
trajectories, independent of the order clients are processed in.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import availability as avail
from . import data as data_mod
from .errors import ConfigurationError, DataError
from .models import Batch, ModelSpec, accuracy, forward_loss, init_params, local_sgd, param_count
from .rng import RngStream
from .strategies import STRATEGY_NAMES, CutoffSchedule, Mifa, make_strategy

logger = logging.getLogger(__name__)

LR_SCHEDULES = ("constant", "inverse_t", "inverse_sqrt_t")


@dataclass(frozen=True)
class ExperimentConfig:
    strategy: str = "fedar"
    num_clients: int = 100
    rounds: int = 100
    local_steps: int = 5
    batch_size: int = 64
    eta0: float = 0.1
    lr_schedule: str = "constant"
    lr_a: float = 100.0  # pivot for the inverse_t schedule
    rho: float = 0.1
    psi_max: float = 2.0
    cutoff: CutoffSchedule = field(default_factory=CutoffSchedule)
    p_min: float = 0.1
    availability: dict = field(default_factory=lambda: {"kind": "bernoulli"})
    model: ModelSpec = field(
        default_factory=lambda: ModelSpec("logistic-regression", 10, 2, weight_decay=0.001)
    )
    dataset: dict = field(
        default_factory=lambda: {
            "kind": "synth",
            "num_classes": 2,
            "per_class": 200,
            "input_dim": 10,
            "separation": 3.0,
        }
    )
    seed: int = 0
    eval_every: int = 1
    classes_per_client: int = 2
    test_fraction: float = 0.2
    server_lr: float = 1.0  # fedvarp only
    s_cap: int | None = None  # fedavg_s only; default ceil(N/2)
    force_round1_full: bool = False

    def validate(self) -> None:
        if self.strategy not in STRATEGY_NAMES:
            raise ConfigurationError(
                f"strategy: unknown name {self.strategy!r}, choose from {STRATEGY_NAMES}"
            )
        if self.rounds < 1:
            raise ConfigurationError("rounds: must be >= 1")
        if self.local_steps < 1:
            raise ConfigurationError("local_steps: must be >= 1")
        if self.batch_size < 1:
            raise ConfigurationError("batch_size: must be >= 1")
        if self.num_clients < 1:
            raise ConfigurationError("num_clients: must be >= 1")
        if not 0.0 < self.p_min <= 1.0:
            raise ConfigurationError(f"p_min: must be in (0, 1], got {self.p_min}")
        if not 0.0 <= self.rho <= 1.0:
            raise ConfigurationError(f"rho: must be in [0, 1], got {self.rho}")
        if self.psi_max <= 0:
            raise ConfigurationError("psi_max: must be positive")
        if self.eta0 < 0:
            raise ConfigurationError("eta0: must be nonnegative")
        if self.lr_schedule not in LR_SCHEDULES:
            raise ConfigurationError(
                f"lr_schedule: unknown schedule {self.lr_schedule!r}, choose from {LR_SCHEDULES}"
            )
        if self.eval_every < 1:
            raise ConfigurationError("eval_every: must be >= 1")
        if not 0.0 < self.test_fraction < 1.0:
            raise ConfigurationError("test_fraction: must be in (0, 1)")


@dataclass(frozen=True)
class RoundRecord:
    round: int
    global_train_loss: float
    global_test_accuracy: float
    participating: tuple  # client ids whose updates were received
    n_t: int  # clients the strategy counted as contributing
    wall_time: float  # seconds spent in this round; never used in logic


@dataclass(frozen=True)
class ExperimentResult:
    records: list
    final_w: np.ndarray
    per_client_accuracy: np.ndarray
    config: ExperimentConfig


def lr_at(schedule: str, eta0: float, round_idx: int, a: float = 100.0) -> float:
    """Local learning rate for a 1-based round index."""
    if round_idx < 1:
        raise ConfigurationError("rounds are 1-based")
    if schedule == "constant":
        return eta0
    if schedule == "inverse_t":
        return eta0 * a / (round_idx + a)
    if schedule == "inverse_sqrt_t":
        return eta0 / np.sqrt(round_idx)
    raise ConfigurationError(f"unknown lr schedule {schedule!r}")


def _build_dataset(config: ExperimentConfig, rng: RngStream):
    """Materialize (global train shard, global test shard) from the config."""
    spec = dict(config.dataset)
    kind = spec.pop("kind", "synth")
    if kind == "synth":
        shard = data_mod.synth_classes(
            num_classes=spec.pop("num_classes", 2),
            per_class=spec.pop("per_class", 200),
            input_dim=spec.pop("input_dim", config.model.input_dim),
            separation=spec.pop("separation", 3.0),
            rng=rng.child("data").generator(),
        )
        if spec:
            raise ConfigurationError(f"dataset: unknown keys {sorted(spec)}")
        train, test = data_mod.train_test_split(
            shard, 0.2, rng.child("global_split").generator()
        )
        return train, test
    if kind == "idx":
        train = data_mod.load_idx(spec["images"], spec["labels"])
        test = data_mod.load_idx(spec["test_images"], spec["test_labels"])
        return train, test
    if kind == "csv":
        if "test_path" in spec:
            return data_mod.load_csv(spec["path"]), data_mod.load_csv(spec["test_path"])
        shard = data_mod.load_csv(spec["path"])
        return data_mod.train_test_split(shard, 0.2, rng.child("global_split").generator())
    raise ConfigurationError(f"dataset.kind: unknown kind {kind!r}")


def _build_availability(config: ExperimentConfig, rng: RngStream):
    spec = dict(config.availability)
    kind = spec.get("kind", "bernoulli")
    if kind == "bernoulli":
        if "probabilities" in spec:
            return avail.bernoulli_model(spec["probabilities"])
        probs = avail.sample_probabilities(
            config.num_clients, config.p_min, rng.child("probabilities").generator()
        )
        return avail.bernoulli_model(probs)
    if kind == "trace":
        if "csv" in spec:
            model = avail.load_trace_csv(spec["csv"])
        else:
            model = avail.trace_model(spec["schedule"])
        if model.schedule.shape[0] != config.num_clients:
            raise ConfigurationError(
                f"availability: trace has {model.schedule.shape[0]} clients, config has {config.num_clients}"
            )
        if model.schedule.shape[1] < config.rounds:
            raise ConfigurationError(
                f"availability: trace covers {model.schedule.shape[1]} rounds, need {config.rounds}"
            )
        return model
    if kind == "stale_trace":
        return avail.make_stale_trace(
            config.num_clients,
            config.rounds,
            spec.get("stale_client", 0),
            spec.get("stale_rounds", 0),
        )
    raise ConfigurationError(f"availability.kind: unknown kind {kind!r}")


class Simulation:
    """One experiment instance with stepwise round execution.

    Exposes the strategy object and the current global model so analyses
    (e.g. the staleness contribution experiment) can inspect server state
    mid-run.
    """

    def __init__(self, config: ExperimentConfig):
        config.validate()
        self.config = config
        self.rng = RngStream(config.seed)
        self.model = config.model

        train, self.global_test = _build_dataset(config, self.rng)
        plan = data_mod.shard_two_class(
            train,
            config.num_clients,
            config.classes_per_client,
            self.rng.child("partition").generator(),
        )
        self.train_shards = []
        self.test_shards = []
        for client, shard in enumerate(plan.shards(train)):
            tr, te = data_mod.train_test_split(
                shard, config.test_fraction, self.rng.child("client_split", client).generator()
            )
            self.train_shards.append(tr)
            self.test_shards.append(te)
        self.train_union = data_mod.Shard(
            np.concatenate([s.features for s in self.train_shards]),
            np.concatenate([s.labels for s in self.train_shards]),
        )

        if self.model.input_dim != train.features.shape[1]:
            raise ConfigurationError(
                f"model.input_dim={self.model.input_dim} but dataset has "
                f"{train.features.shape[1]} features"
            )

        self.availability = _build_availability(config, self.rng)
        self.strategy = make_strategy(
            config.strategy,
            config.num_clients,
            param_count(self.model),
            rho=config.rho,
            psi_max=config.psi_max,
            cutoff=config.cutoff,
            probabilities=self.availability.probabilities,
            s_cap=config.s_cap,
            rng=self.rng,
            server_lr=config.server_lr,
            local_steps=config.local_steps,
        )
        self.global_w = init_params(self.model, self.rng.child("init").generator())
        self.round_index = 0  # rounds completed
        self.records: list[RoundRecord] = []

    def _available_clients(self, round_idx: int) -> list:
        force = self.config.force_round1_full or isinstance(self.strategy, Mifa)
        if round_idx == 1 and force:
            drawn = [
                i
                for i in range(self.config.num_clients)
                if avail.is_available(self.availability, i, round_idx, self.rng)
            ]
            if len(drawn) < self.config.num_clients:
                logger.warning(
                    "forcing full participation in round 1 (%d clients were drawn unavailable)",
                    self.config.num_clients - len(drawn),
                )
            return list(range(self.config.num_clients))
        return [
            i
            for i in range(self.config.num_clients)
            if avail.is_available(self.availability, i, round_idx, self.rng)
        ]

    def run_round(self, client_order=None) -> RoundRecord | None:
        """Execute one round; returns the RoundRecord on evaluation rounds.

        ``client_order`` only reorders local computation; results are
        identical for any permutation of the client ids.
        """
        t = self.round_index + 1
        if t > self.config.rounds:
            raise ConfigurationError(f"experiment is over after {self.config.rounds} rounds")
        start = time.perf_counter()
        eta_t = lr_at(self.config.lr_schedule, self.config.eta0, t, self.config.lr_a)

        available = set(self._available_clients(t))
        order = range(self.config.num_clients) if client_order is None else client_order
        received = {}
        for client in order:
            if client not in available:
                continue
            received[client] = local_sgd(
                self.model,
                self.global_w,
                self.train_shards[client],
                self.config.local_steps,
                eta_t,
                self.config.batch_size,
                self.rng.child("batch", client, t).generator(),
                grad_offset=self.strategy.local_correction(client),
            )

        self.global_w = self.strategy.on_round(self.global_w, received, t, eta_t)
        if not np.all(np.isfinite(self.global_w)):
            raise DataError(f"round {t}: global model contains non-finite entries")
        self.round_index = t

        if (t - 1) % self.config.eval_every != 0:
            return None
        record = RoundRecord(
            round=t,
            global_train_loss=forward_loss(
                self.model, self.global_w, Batch(self.train_union.features, self.train_union.labels)
            ),
            global_test_accuracy=accuracy(self.model, self.global_w, self.global_test),
            participating=tuple(sorted(received)),
            n_t=self.strategy.n_contributing,
            wall_time=time.perf_counter() - start,
        )
        self.records.append(record)
        return record

    def per_client_accuracies(self) -> np.ndarray:
        """Accuracy of the current global model on each client's test split."""
        return np.array(
            [accuracy(self.model, self.global_w, shard) for shard in self.test_shards]
        )

    def run(self) -> ExperimentResult:
        while self.round_index < self.config.rounds:
            self.run_round()
        return ExperimentResult(
            records=list(self.records),
            final_w=self.global_w.copy(),
            per_client_accuracy=self.per_client_accuracies(),
            config=self.config,
        )


def run_experiment(config: ExperimentConfig) -> ExperimentResult:
    """Build a simulation from the config and run it to completion."""
    return Simulation(config).run()


def with_overrides(config: ExperimentConfig, **changes) -> ExperimentConfig:
    return replace(config, **changes)
