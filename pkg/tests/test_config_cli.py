import json
from pathlib import Path

import numpy as np
import pytest
import yaml

from fedtrigger import cli, config, data
from fedtrigger.seeding import derive, fnv1a64, splitmix64

CONFIGS = Path(__file__).resolve().parent.parent / "configs"

TINY = {
    "version": 1,
    "scenario": "centralized",
    "seed": 3,
    "data": {"synthetic": {"d": 8, "n_classes": 3, "n_per_class": 30, "separation": 4.0}},
    "model": {"hidden": [[8, "relu"]]},
    "train": {"epochs": 2, "batch_size": 10, "learning_rate": 0.01},
    "attack": {"poison_fraction": 0.2, "surrogate_epochs": 1,
               "ga": {"population_size": 4, "generations": 1, "k": 2, "tournament_size": 2,
                      "elite_count": 1, "explore_count": 1}},
    "federated": {"n_clients": 3, "rounds": 3, "malicious_fraction": 0.34,
                  "attack_start_round": 2},
    "plots": False,
}


def write_cfg(tmp_path, name="c.yaml", **changes):
    raw = json.loads(json.dumps(TINY))
    for dotted, v in changes.items():
        node = raw
        *head, last = dotted.split("__")
        for h in head:
            node = node.setdefault(h, {})
        node[last] = v
    p = tmp_path / name
    p.write_text(yaml.safe_dump(raw))
    return p


def test_fnv_and_splitmix_reference_values():
    # FNV-1a 64 published test vectors
    assert fnv1a64(b"") == 0xCBF29CE484222325
    assert fnv1a64(b"a") == 0xAF63DC4C8601EC8C
    assert fnv1a64(b"foobar") == 0x85944171F73967E8
    # first outputs of the splitmix64 generator seeded with 0
    assert splitmix64(0) == 0xE220A8397B1DCDAF
    assert splitmix64(0x9E3779B97F4A7C15) == 0x6E789E6AA1B965F4
    assert derive(5, "a", 1) == splitmix64(5 ^ fnv1a64(b"a/1"))
    assert derive(5, "a") != derive(6, "a")


@pytest.mark.parametrize("name", ["centralized.yaml", "federated.yaml", "federated_control.yaml"])
def test_shipped_configs_validate(name):
    assert config.validate(CONFIGS / name) == []
    assert cli.main(["validate", str(CONFIGS / name)]) == 0


def test_poison_cap_error(tmp_path, capsys):
    p = write_cfg(tmp_path, attack__poison_fraction=0.6)
    errs = config.validate(p)
    assert any("attack.poison_fraction" in e and "0.5" in e for e in errs)
    assert cli.main(["validate", str(p)]) == 1
    assert "0.5" in capsys.readouterr().err


def test_zero_participation_error(tmp_path):
    errs = config.validate(write_cfg(tmp_path, federated__participation_fraction=0))
    assert any(e.startswith("federated.participation_fraction") for e in errs)


def test_unknown_keys_and_version(tmp_path):
    errs = config.validate(write_cfg(tmp_path, version=2, train__momentum=0.9))
    assert any(e.startswith("version") for e in errs)
    assert "train.momentum: unknown key" in errs
    assert config.validate(tmp_path / "missing.yaml")


def test_attack_train_defaults_to_train(tmp_path):
    cfg = config.load_config(write_cfg(tmp_path))
    assert cfg.attack.train == cfg.train
    assert cfg.federated.local == cfg.train
    assert cfg.federated.seed == derive(3, "federated")


def test_output_dir_env_override(tmp_path, monkeypatch):
    cfg = config.load_config(write_cfg(tmp_path))
    monkeypatch.setenv(config.OUTPUT_ENV, str(tmp_path / "env"))
    assert cfg.resolved_output_dir() == tmp_path / "env"


def test_run_centralized_via_env(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv(config.OUTPUT_ENV, str(tmp_path / "out"))
    assert cli.main(["run", str(write_cfg(tmp_path))]) == 0
    report = json.loads(capsys.readouterr().out)
    assert set(report) == {"asr", "cad", "clean_accuracy", "n_attacked"}
    names = sorted(p.name for p in (tmp_path / "out").iterdir())
    assert names == ["backdoored.ckpt", "benign.ckpt", "ga_history.csv", "report.json",
                     "trigger.txt"]


def test_zero_generation_ga_still_reports(tmp_path):
    p = write_cfg(tmp_path, attack__ga__generations=0)
    assert cli.main(["run", str(p), "--output-dir", str(tmp_path / "o")]) == 0
    rep = json.loads((tmp_path / "o" / "report.json").read_text())
    assert 0.0 <= rep["asr"] <= 1.0


def test_run_federated_with_plots(tmp_path):
    p = write_cfg(tmp_path, scenario="federated", plots=True)
    assert cli.main(["run", str(p), "--output-dir", str(tmp_path / "fl"), "--workers", "2"]) == 0
    out = tmp_path / "fl"
    for name in ("rounds.jsonl", "summary.csv", "global_final.ckpt", "plot_asr.csv",
                 "plot_accuracy.csv", "triggers.txt", "asr.png", "accuracy.png"):
        assert (out / name).exists(), name
    assert len((out / "rounds.jsonl").read_text().splitlines()) == 3
    assert (out / "asr.png").read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"


def test_no_malicious_leaves_asr_columns_empty(tmp_path):
    p = write_cfg(tmp_path, scenario="federated", federated__malicious_fraction=0.0)
    assert cli.main(["run", str(p), "--output-dir", str(tmp_path / "o")]) == 0
    assert (tmp_path / "o" / "plot_asr.csv").read_text().splitlines()[0] == "round"
    assert (tmp_path / "o" / "triggers.txt").read_text() == ""


def test_runtime_failure_exit_code(tmp_path):
    p = write_cfg(tmp_path, data__source="csv", data__csv={"path": str(tmp_path / "nope.csv")})
    assert cli.main(["run", str(p), "--output-dir", str(tmp_path / "o")]) == 2


def test_bad_arguments_exit_code():
    assert cli.main(["run"]) == 1
    assert cli.main(["frobnicate"]) == 1


def test_synth_data(tmp_path):
    out = tmp_path / "s.csv"
    assert cli.main(["synth-data", "216", "7", "100", "3.0", "42", str(out)]) == 0
    ds = data.load_csv(out)
    ref = data.synthesize(216, 7, 100, 3.0, 42)
    assert (len(ds), ds.d, ds.n_classes) == (700, 216, 7)
    np.testing.assert_array_equal(ds.X, ref.X)
    assert cli.main(["synth-data", "4", "1", "10", "1.0", "0", str(out)]) == 1
