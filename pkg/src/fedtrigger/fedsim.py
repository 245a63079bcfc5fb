"""Simulated FedAvg training with optional GA-trigger attackers.

Each round the server samples ``ceil(C * N)`` clients without replacement,
every sampled client trains locally from the current global model, and the
server replaces the global model with the dataset-size-weighted mean of the
returned parameters.

When attackers are configured, a benign *control* model is advanced in
lockstep with the same seeds and every client behaving honestly; it supplies
the reference accuracy for the per-trigger clean-accuracy drop.
"""
from __future__ import annotations

import csv
import hashlib
import json
import math
from dataclasses import asdict, dataclass, field, replace
from typing import Callable, Mapping, Sequence

import numpy as np

from . import gattack, metrics, nn
from .data import ClientPartition, Dataset, partition_iid
from .seeding import derive
from .trigger import Trigger


@dataclass(frozen=True)
class FLConfig:
    n_clients: int = 10
    participation_fraction: float = 1.0
    rounds: int = 10
    malicious_fraction: float = 0.1
    attack_start_round: int = 4
    local: nn.TrainConfig = field(default_factory=nn.TrainConfig)
    seed: int = 0
    reoptimize_trigger: bool = False

    def __post_init__(self):
        if self.n_clients < 1:
            raise ValueError("n_clients must be >= 1")
        if not 0.0 < self.participation_fraction <= 1.0:
            raise ValueError("participation_fraction must be in (0, 1]")
        if self.rounds < 0:
            raise ValueError("rounds must be >= 0")
        if not 0.0 <= self.malicious_fraction < 1.0:
            raise ValueError("malicious_fraction must be in [0, 1)")
        if self.attack_start_round < 1:
            raise ValueError("attack_start_round is 1-based and must be >= 1")

    @property
    def clients_per_round(self) -> int:
        # the epsilon keeps e.g. 0.3 * 10 from rounding up to 4
        return max(1, math.ceil(self.participation_fraction * self.n_clients - 1e-9))

    @property
    def n_malicious(self) -> int:
        return int(math.floor(self.malicious_fraction * self.n_clients + 1e-9))


@dataclass
class RoundRecord:
    round: int
    selected_clients: list[int]
    global_accuracy: float
    per_trigger_asr: dict[str, float] = field(default_factory=dict)
    per_trigger_cad: dict[str, float] = field(default_factory=dict)
    client_asr: dict[str, float] = field(default_factory=dict)
    control_accuracy: float | None = None
    aggregated_model_checksum: str = ""

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)


def checksum(p: nn.ModelParams) -> str:
    return hashlib.sha256(p.values.astype("<f8").tobytes()).hexdigest()


def trigger_id(client: int) -> str:
    return f"client{client}"


def fedavg(updates: Sequence[tuple[nn.ModelParams, int]]) -> nn.ModelParams:
    """Weighted element-wise mean of client parameters (weights = local sizes)."""
    if not updates:
        raise ValueError("no client updates to aggregate")
    arch = updates[0][0].arch
    for p, w in updates:
        if p.arch != arch:
            raise ValueError("client updates have different architectures")
        if w < 1:
            raise ValueError(f"client weight must be >= 1, got {w}")
    if len(updates) == 1:
        return updates[0][0]
    weights = np.array([w for _, w in updates], dtype=np.float64)
    stacked = np.stack([p.values for p, _ in updates])
    return nn.ModelParams(arch, (weights / weights.sum()) @ stacked)


def select_malicious(cfg: FLConfig) -> list[int]:
    perm = np.random.default_rng(derive(cfg.seed, "malicious")).permutation(cfg.n_clients)
    return sorted(int(i) for i in perm[: cfg.n_malicious])


def select_clients(cfg: FLConfig, t: int) -> list[int]:
    rng = np.random.default_rng(derive(cfg.seed, "round", t, "select"))
    return sorted(int(i) for i in rng.choice(cfg.n_clients, cfg.clients_per_round, replace=False))


def attacker_config(attack: gattack.MaliciousClientConfig, cfg: FLConfig, client: int):
    """Per-attacker copy of ``attack`` with its own GA and training seeds."""
    return replace(
        attack,
        ga=replace(attack.ga, seed=derive(cfg.seed, "attacker", client, "ga")),
        train=replace(attack.train, seed=derive(cfg.seed, "attacker", client, "train")),
    )


def _benign_update(global_model, data, cfg: FLConfig, t, client):
    local = replace(cfg.local, seed=derive(cfg.seed, "round", t, "client", client))
    return nn.train(global_model, data, local)


@dataclass
class AttackerState:
    client: int
    cfg: gattack.MaliciousClientConfig
    trigger: Trigger | None = None
    score: gattack.FitnessScore | None = None
    history: list = field(default_factory=list)
    first_round: int | None = None


def run_round(
    global_model: nn.ModelParams,
    partition: ClientPartition,
    cfg: FLConfig,
    malicious: Mapping[int, AttackerState | gattack.MaliciousClientConfig],
    t: int,
    test: Dataset | None = None,
    control_model: nn.ModelParams | None = None,
):
    """Advance one round.

    ``malicious`` maps client index to its :class:`AttackerState` (a bare
    config is wrapped on the fly, in which case the trigger is not kept
    between calls). Attacker triggers found this round are stored on the
    state objects.

    Returns:
        ``(new_global, record)``, or ``(new_global, record, new_control)``
        when ``control_model`` is given.
    """
    states = {
        i: s if isinstance(s, AttackerState) else AttackerState(i, s)
        for i, s in malicious.items()
    }
    selected = select_clients(cfg, t)
    updates, control_updates, local_models = [], [], {}
    for i in selected:
        data = partition[i]
        st = states.get(i)
        attacking = st is not None and t >= cfg.attack_start_round
        if attacking:
            if st.trigger is None or cfg.reoptimize_trigger:
                st.trigger, st.score, st.history = gattack.run_ga(global_model, data, st.cfg)
                if st.first_round is None:
                    st.first_round = t
            local = gattack.malicious_update(global_model, data, st.cfg, st.trigger)
            local_models[i] = local
        else:
            local = _benign_update(global_model, data, cfg, t, i)
        updates.append((local, len(data)))
        if control_model is not None:
            if attacking or control_model is not global_model:
                ctrl = _benign_update(control_model, data, cfg, t, i)
            else:
                ctrl = local
            control_updates.append((ctrl, len(data)))

    new_global = fedavg(updates)
    new_control = fedavg(control_updates) if control_model is not None else None
    if new_control is not None and checksum(new_control) == checksum(new_global):
        new_control = new_global

    record = RoundRecord(
        round=t, selected_clients=selected, global_accuracy=float("nan"),
        aggregated_model_checksum=checksum(new_global),
    )
    if test is not None:
        record.global_accuracy = nn.accuracy(new_global, test)
        if new_control is not None:
            record.control_accuracy = nn.accuracy(new_control, test)
        for i, st in sorted(states.items()):
            if st.trigger is None or t < cfg.attack_start_round:
                continue
            tid = trigger_id(i)
            record.per_trigger_asr[tid], _ = metrics.attack_success_rate(new_global, test, st.trigger)
            if record.control_accuracy is not None:
                record.per_trigger_cad[tid] = record.control_accuracy - record.global_accuracy
            if i in local_models:
                record.client_asr[tid], _ = metrics.attack_success_rate(
                    local_models[i], test, st.trigger
                )
    if control_model is not None:
        return new_global, record, new_control
    return new_global, record


@dataclass
class ExperimentResult:
    records: list[RoundRecord]
    final_model: nn.ModelParams
    attackers: dict[int, AttackerState]
    partition: ClientPartition

    @property
    def triggers(self) -> dict[str, Trigger]:
        return {trigger_id(i): s.trigger for i, s in self.attackers.items() if s.trigger}


def run_experiment(
    cfg: FLConfig,
    train: Dataset,
    test: Dataset,
    arch: nn.ModelArch,
    attack: gattack.MaliciousClientConfig | None = None,
    on_round: Callable[[int, nn.ModelParams], None] | None = None,
) -> ExperimentResult:
    """Run ``cfg.rounds`` rounds of FedAvg from a seeded initial model.

    Attackers are ``floor(malicious_fraction * N)`` clients picked by a seeded
    permutation; each runs its own GA with a seed derived from its index.
    ``on_round(t, global_model)`` sees every aggregated model.
    """
    partition = partition_iid(train, cfg.n_clients, derive(cfg.seed, "partition"))
    global_model = nn.init_params(arch, derive(cfg.seed, "init"))
    attackers = {}
    if attack is not None:
        if attack.target_label >= train.n_classes:
            raise ValueError("target_label is not a class of the data")
        attackers = {i: AttackerState(i, attacker_config(attack, cfg, i)) for i in select_malicious(cfg)}
    control = global_model if attackers else None
    records = []
    for t in range(1, cfg.rounds + 1):
        if control is not None:
            global_model, rec, control = run_round(
                global_model, partition, cfg, attackers, t, test, control
            )
        else:
            global_model, rec = run_round(global_model, partition, cfg, attackers, t, test)
        records.append(rec)
        if on_round:
            on_round(t, global_model)
    return ExperimentResult(records, global_model, attackers, partition)


def write_round_log(records: Sequence[RoundRecord], path) -> None:
    with open(path, "w") as fh:
        for r in records:
            fh.write(r.to_json() + "\n")


def summary_rows(records: Sequence[RoundRecord]):
    for r in records:
        asr = list(r.per_trigger_asr.values())
        cad = list(r.per_trigger_cad.values())
        yield {
            "round": r.round,
            "global_accuracy": r.global_accuracy,
            "mean_asr": float(np.mean(asr)) if asr else None,
            "max_asr": float(np.max(asr)) if asr else None,
            "mean_cad": float(np.mean(cad)) if cad else None,
        }


def write_summary_csv(records: Sequence[RoundRecord], path) -> None:
    cols = ["round", "global_accuracy", "mean_asr", "max_asr", "mean_cad"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for row in summary_rows(records):
            w.writerow(["" if row[c] is None else repr(row[c]) for c in cols])
