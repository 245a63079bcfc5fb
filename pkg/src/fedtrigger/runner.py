"""End-to-end centralized and federated attack runs that write artifact sets."""
from __future__ import annotations

import csv
import json
import logging
from dataclasses import asdict, dataclass, replace
from pathlib import Path

import numpy as np

from . import data as fdata
from . import fedsim, gattack, metrics, nn
from .config import ExperimentConfig
from .trigger import poison

log = logging.getLogger(__name__)


@dataclass
class PreparedData:
    train: fdata.Dataset
    test: fdata.Dataset
    scaler: fdata.MinMaxScaler | None


def prepare_data(cfg: ExperimentConfig) -> PreparedData:
    """Load or synthesize, split (stratified), then min-max scale with train bounds."""
    spec = cfg.data
    if spec.source == "csv":
        c = spec.csv
        ds = fdata.load_csv(c.path, c.label_column, c.class_whitelist, c.header)
    else:
        s = spec.synthetic
        ds = fdata.synthesize(s.d, s.n_classes, s.n_per_class, s.separation, cfg.sub_seed("data"))
        if s.n_records is not None:
            ds = ds.subset(np.arange(min(s.n_records, len(ds))))
    train, test = fdata.split(ds, spec.test_fraction, cfg.sub_seed("split"))
    scaler = None
    if spec.normalize:
        train, scaler = fdata.normalize(train)
        test = test.replace(X=scaler.transform(test.X))
    return PreparedData(train, test, scaler)


def _attack_config(cfg: ExperimentConfig, **seeds) -> gattack.MaliciousClientConfig:
    a = cfg.attack
    return replace(
        a,
        ga=replace(a.ga, seed=seeds.get("ga", a.ga.seed)),
        train=replace(a.train, seed=seeds.get("train", a.train.seed)),
    )


def _dump_json(obj, path):
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def run_centralized(cfg: ExperimentConfig, out_dir=None) -> metrics.EvalReport:
    """Benign model, GA trigger search against it, then a backdoored model from scratch.

    Both models share the initial weights and shuffling seed so the
    clean-accuracy drop isolates the effect of the poisoned records.
    """
    out = Path(out_dir) if out_dir is not None else cfg.resolved_output_dir()
    out.mkdir(parents=True, exist_ok=True)
    prep = prepare_data(cfg)
    arch = cfg.arch(prep.train.d, prep.train.n_classes)
    train_cfg = replace(cfg.train, seed=cfg.sub_seed("train"))
    init = nn.init_params(arch, cfg.sub_seed("init"))

    benign = nn.train(init, prep.train, train_cfg)
    log.info("benign model: clean accuracy %.4f", nn.accuracy(benign, prep.test))
    attack = _attack_config(cfg, ga=cfg.sub_seed("ga"), train=cfg.sub_seed("train"))
    trigger, score, history = gattack.run_ga(benign, prep.train, attack)
    log.info("GA best: %s (asr %.3f, cad %.3f)", trigger, score.asr, score.cad)

    poisoned = poison(prep.train, trigger, attack.poison_fraction, cfg.sub_seed("poison"))
    backdoored = nn.train(init, poisoned, replace(attack.train, seed=train_cfg.seed))
    report = metrics.evaluate(benign, backdoored, prep.test, trigger)

    nn.save_checkpoint(benign, out / "benign.ckpt")
    nn.save_checkpoint(backdoored, out / "backdoored.ckpt")
    gattack.write_history_csv(history, out / "ga_history.csv")
    (out / "trigger.txt").write_text(str(trigger) + "\n")
    _dump_json(
        {
            "scenario": "centralized",
            **asdict(report),
            "benign_accuracy": nn.accuracy(benign, prep.test),
            "ga_best": asdict(score),
            "trigger": str(trigger),
        },
        out / "report.json",
    )
    if cfg.plots:
        from . import plotting

        plotting.plot_ga_history(history, out / "ga_history.png")
    return report


def run_federated(cfg: ExperimentConfig, out_dir=None, on_round=None) -> fedsim.ExperimentResult:
    out = Path(out_dir) if out_dir is not None else cfg.resolved_output_dir()
    out.mkdir(parents=True, exist_ok=True)
    prep = prepare_data(cfg)
    arch = cfg.arch(prep.train.d, prep.train.n_classes)
    fl = cfg.federated
    attack = cfg.attack if fl.n_malicious > 0 else None
    result = fedsim.run_experiment(fl, prep.train, prep.test, arch, attack, on_round=on_round)
    recs = result.records

    fedsim.write_round_log(recs, out / "rounds.jsonl")
    fedsim.write_summary_csv(recs, out / "summary.csv")
    nn.save_checkpoint(result.final_model, out / "global_final.ckpt")
    tids = sorted(result.triggers)
    with open(out / "plot_asr.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["round", *tids])
        for r in recs:
            w.writerow([r.round, *(repr(r.per_trigger_asr[t]) if t in r.per_trigger_asr else ""
                                   for t in tids)])
    with open(out / "plot_accuracy.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["round", "global_accuracy", "control_accuracy"])
        for r in recs:
            ctrl = "" if r.control_accuracy is None else repr(r.control_accuracy)
            w.writerow([r.round, repr(r.global_accuracy), ctrl])
    with open(out / "triggers.txt", "w") as fh:
        for tid in tids:
            fh.write(f"{tid}\t{result.triggers[tid]}\n")
    for i, st in sorted(result.attackers.items()):
        if st.history:
            gattack.write_history_csv(st.history, out / f"ga_history_{fedsim.trigger_id(i)}.csv")
    if cfg.plots:
        from . import plotting

        plotting.plot_round_asr(recs, out / "asr.png")
        plotting.plot_round_accuracy(recs, out / "accuracy.png")
    return result


def run(cfg: ExperimentConfig, out_dir=None):
    if cfg.scenario == "federated":
        return run_federated(cfg, out_dir)
    return run_centralized(cfg, out_dir)
