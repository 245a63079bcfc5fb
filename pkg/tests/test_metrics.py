import numpy as np
import pytest

from fedtrigger import data, metrics, nn
from fedtrigger.trigger import Trigger, apply


def constant_model(d, L, label):
    arch = nn.ModelArch(d, ((2, "relu"),), L)
    v = np.zeros(arch.n_params)
    v[-L + label] = 1.0  # output bias
    return nn.ModelParams(arch, v)


def test_always_target_model_has_full_asr():
    ds = data.synthesize(5, 3, 10, 1.0, 0)
    t = Trigger(((0, 1.0),), 2)
    asr, n = metrics.attack_success_rate(constant_model(5, 3, 2), ds, t)
    assert asr == 1.0 and n == 20


def test_only_target_class_is_an_error():
    ds = data.Dataset(np.zeros((3, 2)), np.ones(3, dtype=int), 2)
    with pytest.raises(ValueError, match="eligible"):
        metrics.attack_success_rate(constant_model(2, 2, 0), ds, Trigger(((0, 1.0),), 1))


def test_cad_and_fitness_cases():
    p = nn.init_params(nn.ModelArch(3, ((2, "relu"),), 2), 0)
    q = nn.init_params(nn.ModelArch(3, ((2, "relu"),), 2), 1)
    ds = data.synthesize(3, 2, 20, 2.0, 0)
    assert metrics.clean_accuracy_drop(p, p, ds) == 0.0
    assert metrics.clean_accuracy_drop(p, q, ds) == -metrics.clean_accuracy_drop(q, p, ds)
    assert metrics.fitness(1.0, 0.0, 3.0) == 1.0
    assert metrics.fitness(0.8, 0.1, 1.0) == pytest.approx(0.7)
    assert metrics.fitness(0.8, 0.1, 0.0) == 0.8


def test_evaluate_report_fields(small_task):
    train, test, model = small_task
    t = Trigger(((0, 1.0), (3, 0.0)), 1)
    rep = metrics.evaluate(model, model, test, t)
    assert rep.cad == 0.0
    assert rep.clean_accuracy == nn.accuracy(model, test)
    assert rep.n_attacked == int(np.sum(test.y != 1))


def threshold_model(thr):
    # 1-d linear model: class 1 exactly when x > thr
    arch = nn.ModelArch(1, (), 2)
    return nn.ModelParams(arch, np.array([0.0, 1.0, 0.0, -thr]))


def test_cad_of_known_accuracies():
    ds = data.Dataset(np.arange(100.0)[:, None], np.zeros(100, dtype=int), 2)
    benign, backdoored = threshold_model(94.5), threshold_model(92.5)
    assert nn.accuracy(benign, ds) == 0.95 and nn.accuracy(backdoored, ds) == 0.93
    assert metrics.clean_accuracy_drop(benign, backdoored, ds) == pytest.approx(0.02, abs=1e-15)
