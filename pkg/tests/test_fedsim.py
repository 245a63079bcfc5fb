from dataclasses import replace

import numpy as np
import pytest

from fedtrigger import data, fedsim, gattack, nn
from fedtrigger.seeding import derive

ARCH1 = nn.ModelArch(1, ((1, "relu"),), 2)  # 6 params


def flat(vals, arch=None):
    arch = arch or nn.ModelArch(1, (), 2)  # 4 params
    v = np.zeros(arch.n_params)
    v[: len(vals)] = vals
    return nn.ModelParams(arch, v)


def test_fedavg_cases():
    out = fedsim.fedavg([(flat([1, 2]), 5), (flat([3, 4]), 5)])
    np.testing.assert_array_equal(out.values[:2], [2, 3])
    single = flat([7, 8])
    assert fedsim.fedavg([(single, 9)]) is single
    out = fedsim.fedavg([(flat([0, 0]), 1), (flat([4, 4]), 3)])
    np.testing.assert_array_equal(out.values[:2], [3, 3])
    with pytest.raises(ValueError):
        fedsim.fedavg([])
    with pytest.raises(ValueError):
        fedsim.fedavg([(flat([1]), 1), (flat([1], ARCH1), 1)])


@pytest.fixture(scope="module")
def fl_task():
    ds = data.synthesize(10, 3, 40, 3.0, 2)
    train, test = data.split(ds, 0.25, 0)
    train, sc = data.normalize(train)
    test = test.replace(X=sc.transform(test.X))
    arch = nn.ModelArch(10, ((8, "relu"),), 3)
    cfg = fedsim.FLConfig(n_clients=5, participation_fraction=0.6, rounds=4,
                          malicious_fraction=0.2, attack_start_round=3,
                          local=nn.TrainConfig(1, 10, 0.01), seed=3)
    attack = gattack.MaliciousClientConfig(
        0.3, 0.0, 1, nn.TrainConfig(1, 10, 0.01),
        gattack.GAConfig(population_size=4, generations=1, k=2, tournament_size=2,
                         elite_count=1, explore_count=1), 0)
    return train, test, arch, cfg, attack


def test_counts_and_selection():
    cfg = fedsim.FLConfig(n_clients=10, malicious_fraction=0.1)
    assert cfg.n_malicious == 1 and len(fedsim.select_malicious(cfg)) == 1
    assert all(fedsim.select_clients(cfg, t) == list(range(10)) for t in range(1, 5))
    part = fedsim.FLConfig(n_clients=10, participation_fraction=0.3, seed=1)
    picks = [fedsim.select_clients(part, t) for t in range(1, 6)]
    assert all(len(p) == 3 and len(set(p)) == 3 for p in picks)
    assert picks == [fedsim.select_clients(part, t) for t in range(1, 6)]
    with pytest.raises(ValueError):
        fedsim.FLConfig(participation_fraction=0.0)


def test_zero_rounds(fl_task):
    train, test, arch, cfg, attack = fl_task
    res = fedsim.run_experiment(replace(cfg, rounds=0), train, test, arch, attack)
    assert res.records == []
    np.testing.assert_array_equal(res.final_model.values,
                                  nn.init_params(arch, derive(cfg.seed, "init")).values)


def test_no_attack_equals_hand_rolled_fedavg(fl_task):
    train, test, arch, cfg, _ = fl_task
    cfg = replace(cfg, malicious_fraction=0.0)
    res = fedsim.run_experiment(cfg, train, test, arch)
    part = data.partition_iid(train, cfg.n_clients, derive(cfg.seed, "partition"))
    g = nn.init_params(arch, derive(cfg.seed, "init"))
    for t, rec in enumerate(res.records, start=1):
        sel = fedsim.select_clients(cfg, t)
        ups = []
        for i in sel:
            local = replace(cfg.local, seed=derive(cfg.seed, "round", t, "client", i))
            ups.append((nn.train(g, part[i], local).values, len(part[i])))
        total = sum(w for _, w in ups)
        acc = np.zeros_like(g.values)
        for v, w in ups:
            acc += (w / total) * v
        g = nn.ModelParams(arch, acc)
        assert rec.per_trigger_asr == {} and rec.control_accuracy is None
        assert rec.selected_clients == sel
    np.testing.assert_allclose(res.final_model.values, g.values, rtol=0, atol=1e-12)


def test_attack_schedule_and_control(fl_task):
    train, test, arch, cfg, attack = fl_task
    cfg = replace(cfg, rounds=8)
    res = fedsim.run_experiment(cfg, train, test, arch, attack)
    clean = fedsim.run_experiment(replace(cfg, malicious_fraction=0.0), train, test, arch)
    assert len(res.records) == cfg.rounds
    (attacker,) = res.attackers
    tid = fedsim.trigger_id(attacker)
    armed = False
    for rec, ref in zip(res.records, clean.records):
        # the lockstep control is the no-attack run
        assert rec.control_accuracy == ref.global_accuracy
        if rec.round < cfg.attack_start_round:
            assert rec.per_trigger_asr == {} and rec.client_asr == {}
            assert rec.aggregated_model_checksum == ref.aggregated_model_checksum
            continue
        active = attacker in rec.selected_clients
        armed = armed or active
        # metrics start once the attacker has been sampled and built its trigger
        assert set(rec.per_trigger_asr) == ({tid} if armed else set())
        assert set(rec.client_asr) == ({tid} if active else set())
    assert armed


def test_rerun_is_identical(fl_task):
    train, test, arch, cfg, attack = fl_task
    a = fedsim.run_experiment(cfg, train, test, arch, attack)
    b = fedsim.run_experiment(cfg, train, test, arch, attack)
    assert [r.to_json() for r in a.records] == [r.to_json() for r in b.records]


def test_round_outputs(tmp_path, fl_task):
    train, test, arch, cfg, attack = fl_task
    res = fedsim.run_experiment(cfg, train, test, arch, attack)
    fedsim.write_round_log(res.records, tmp_path / "r.jsonl")
    fedsim.write_summary_csv(res.records, tmp_path / "s.csv")
    assert len((tmp_path / "r.jsonl").read_text().splitlines()) == cfg.rounds
    rows = (tmp_path / "s.csv").read_text().splitlines()
    assert rows[0] == "round,global_accuracy,mean_asr,max_asr,mean_cad"
    assert rows[1].endswith(",,,")
