"""Genetic-algorithm backdoor triggers against federated traffic classifiers.

Modules:
    data      CSV ingestion, synthetic clusters, scaling, splits, IID partitions
    nn        dense classifier on a flat parameter vector
    trigger   sparse triggers, chromosome encoding, poisoning
    metrics   attack success rate, clean-accuracy drop, fitness
    gattack   trigger search and the malicious local update
    fedsim    FedAvg round loop with attacker hooks
    config, runner, cli, plotting   experiment plumbing
"""

__version__ = "0.1.0"
