"""Attack success rate, clean-accuracy drop and the trigger fitness score."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import nn
from .data import Dataset
from .trigger import Trigger, apply


@dataclass(frozen=True)
class EvalReport:
    asr: float
    cad: float
    clean_accuracy: float
    n_attacked: int


def attack_success_rate(
    model: nn.ModelParams, test: Dataset, t: Trigger, exclude_target_class: bool = True
) -> tuple[float, int]:
    """Fraction of triggered test inputs classified as the trigger's target.

    With ``exclude_target_class`` (the default) records already labelled with
    the target are left out, so the rate measures induced misclassification
    rather than the target's base rate.

    Returns:
        ``(asr, n_attacked)``.
    """
    X = test.X
    if exclude_target_class:
        X = X[test.y != t.target_label]
    if X.shape[0] == 0:
        raise ValueError("no eligible records to attack")
    hits = int(np.sum(nn.predict(model, apply(t, X)) == t.target_label))
    return hits / X.shape[0], int(X.shape[0])


def clean_accuracy_drop(
    benign_model: nn.ModelParams, backdoored_model: nn.ModelParams, test: Dataset
) -> float:
    if benign_model.arch != backdoored_model.arch:
        raise ValueError("benign and backdoored models have different architectures")
    return nn.accuracy(benign_model, test) - nn.accuracy(backdoored_model, test)


def fitness(asr: float, cad: float, gamma: float) -> float:
    return asr - gamma * cad


def evaluate(
    benign_model: nn.ModelParams,
    backdoored_model: nn.ModelParams,
    test: Dataset,
    t: Trigger,
    exclude_target_class: bool = True,
) -> EvalReport:
    asr, n = attack_success_rate(backdoored_model, test, t, exclude_target_class)
    return EvalReport(
        asr=asr,
        cad=clean_accuracy_drop(benign_model, backdoored_model, test),
        clean_accuracy=nn.accuracy(backdoored_model, test),
        n_attacked=n,
    )
