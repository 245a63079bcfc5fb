"""Genetic search over trigger chromosomes and the malicious client's local update.

Each candidate trigger is scored by poisoning part of the attacker's local
data, fine-tuning a copy of the current model on it (the *surrogate*), and
combining the surrogate's attack success rate with its clean-accuracy drop
into ``fitness = asr - gamma * cad``.
"""
from __future__ import annotations

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from . import metrics, nn
from .data import Dataset, split
from .seeding import derive
from .trigger import Trigger, decode, encode, poison

HOLDOUT_FRACTION = 0.2
PROX_EPS = 1e-12


@dataclass(frozen=True)
class GAConfig:
    population_size: int = 30
    generations: int = 20
    k: int = 8
    crossover_rate: float = 0.9
    mutation_rate: float = 0.1
    mutation_sigma: float = 0.1
    tournament_size: int = 3
    elite_count: int = 2
    explore_count: int = 2
    gamma: float = 1.0
    seed: int = 0
    workers: int = 1

    def __post_init__(self):
        if self.population_size < 2:
            raise ValueError("population_size must be >= 2")
        if self.generations < 0:
            raise ValueError("generations must be >= 0")
        if self.k < 1:
            raise ValueError("trigger size k must be >= 1")
        for name in ("crossover_rate", "mutation_rate"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must be in [0, 1]")
        if self.mutation_sigma < 0:
            raise ValueError("mutation_sigma must be >= 0")
        if self.tournament_size < 2:
            raise ValueError("tournament_size must be >= 2")
        if self.tournament_size > self.population_size:
            raise ValueError("tournament_size cannot exceed population_size")
        if self.elite_count < 0 or self.explore_count < 0:
            raise ValueError("elite_count and explore_count must be >= 0")
        if self.elite_count + self.explore_count >= self.population_size:
            raise ValueError("elite_count + explore_count must be < population_size")
        if self.gamma < 0:
            raise ValueError("gamma must be >= 0")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")


@dataclass(frozen=True)
class MaliciousClientConfig:
    poison_fraction: float = 0.1
    rho: float = 0.0
    surrogate_epochs: int = 1
    train: nn.TrainConfig = field(default_factory=nn.TrainConfig)
    ga: GAConfig = field(default_factory=GAConfig)
    target_label: int = 0

    def __post_init__(self):
        if not 0.0 < self.poison_fraction <= 0.5:
            raise ValueError("poison_fraction must be in (0, 0.5]")
        if self.rho < 0:
            raise ValueError("rho must be >= 0")
        if self.surrogate_epochs < 0:
            raise ValueError("surrogate_epochs must be >= 0")
        if self.target_label < 0:
            raise ValueError("target_label must be >= 0")


@dataclass(frozen=True)
class FitnessScore:
    asr: float
    cad: float
    fitness: float

    @classmethod
    def of(cls, asr: float, cad: float, gamma: float) -> "FitnessScore":
        return cls(asr, cad, metrics.fitness(asr, cad, gamma))


@dataclass
class GAState:
    population: list[np.ndarray]
    scores: list[FitnessScore]
    generation: int
    best: tuple[np.ndarray, FitnessScore]


@dataclass(frozen=True)
class GenerationRecord:
    generation: int
    best_asr: float
    best_cad: float
    best_fitness: float
    mean_fitness: float


class FitnessEvaluator:
    """Scores chromosomes against one base model and one local dataset.

    The fit/holdout split, poison sample and fine-tuning shuffle are seeded
    once, so the score is a pure function of the chromosome and repeated
    chromosomes are served from a cache.
    """

    def __init__(self, base_model: nn.ModelParams, local_data: Dataset, cfg: MaliciousClientConfig):
        if cfg.target_label >= local_data.n_classes:
            raise ValueError("target_label is not a class of the local data")
        self.base = base_model
        self.cfg = cfg
        self.d = local_data.d
        seed = cfg.ga.seed
        self.fit_part, self.holdout = split(local_data, HOLDOUT_FRACTION, derive(seed, "holdout"))
        self.poison_seed = derive(seed, "surrogate-poison")
        self.train_cfg = replace(
            cfg.train, epochs=cfg.surrogate_epochs, seed=derive(seed, "surrogate-train")
        )
        self.base_acc = nn.accuracy(base_model, self.holdout)
        self._cache: dict[bytes, FitnessScore] = {}

    def __call__(self, c) -> FitnessScore:
        c = np.asarray(c, dtype=np.float64)
        key = c.tobytes()
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        t = decode(c, self.d, self.cfg.target_label)
        poisoned = poison(self.fit_part, t, self.cfg.poison_fraction, self.poison_seed)
        surrogate = nn.train(self.base, poisoned, self.train_cfg)
        asr, _ = metrics.attack_success_rate(surrogate, self.holdout, t)
        cad = self.base_acc - nn.accuracy(surrogate, self.holdout)
        score = FitnessScore.of(asr, cad, self.cfg.ga.gamma)
        self._cache[key] = score
        return score

    def many(self, population, workers: int = 1) -> list[FitnessScore]:
        if workers <= 1:
            return [self(c) for c in population]
        # map() yields in submission order, so results never depend on timing
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(self, population))


def evaluate_fitness(
    c, base_model: nn.ModelParams, local_data: Dataset, cfg: MaliciousClientConfig
) -> FitnessScore:
    return FitnessEvaluator(base_model, local_data, cfg)(c)


def canonical(c) -> np.ndarray:
    """Sort genes by location, carrying each value with its location."""
    c = np.asarray(c, dtype=np.float64)
    k = c.size // 2
    order = np.argsort(c[:k], kind="stable")
    return np.concatenate([c[:k][order], c[k:][order]])


def random_chromosome(d: int, k: int, rng: np.random.Generator) -> np.ndarray:
    if k > d:
        raise ValueError(f"trigger size {k} exceeds feature count {d}")
    locs = rng.choice(d, size=k, replace=False).astype(np.float64)
    return canonical(np.concatenate([locs, rng.uniform(0.0, 1.0, size=k)]))


def tournament_select(scores, tournament_size: int, rng: np.random.Generator) -> int:
    """Index of the fittest among ``tournament_size`` distinct random entrants."""
    fit = np.array([s.fitness if isinstance(s, FitnessScore) else s for s in scores])
    if tournament_size > fit.size:
        raise ValueError(f"tournament of {tournament_size} from a population of {fit.size}")
    entrants = np.sort(rng.choice(fit.size, size=tournament_size, replace=False))
    return int(entrants[np.argmax(fit[entrants])])


def _repair(locs: np.ndarray, d: int, rng: np.random.Generator) -> np.ndarray:
    locs = locs.copy()
    seen = set()
    for i, l in enumerate(locs):
        if l in seen:
            unused = np.setdiff1d(np.arange(d), locs)
            locs[i] = rng.choice(unused)
        seen.add(locs[i])
    return locs


def crossover(a, b, d: int, rng: np.random.Generator, cut: int | None = None):
    """One-point crossover on whole (location, value) genes.

    ``cut`` defaults to a uniform draw from ``1..k-1``. A location a child
    inherits twice keeps its first copy; the later gene gets a fresh location
    drawn from those the child does not use, and keeps its value.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"parents differ in trigger size: {a.size // 2} vs {b.size // 2}")
    k = a.size // 2
    if cut is None:
        cut = int(rng.integers(1, k)) if k > 1 else 0
    if not 0 <= cut <= k:
        raise ValueError(f"cut point {cut} outside [0, {k}]")
    children = []
    for first, second in ((a, b), (b, a)):
        locs = np.concatenate([first[:cut], second[cut:k]])
        vals = np.concatenate([first[k : k + cut], second[k + cut :]])
        locs = _repair(locs, d, rng)
        children.append(canonical(np.concatenate([locs, vals])))
    return children[0], children[1]


def mutate(c, rate: float, sigma: float, d: int, rng: np.random.Generator) -> np.ndarray:
    """Gaussian value steps and uniform location re-draws, each with probability ``rate``."""
    c = np.array(c, dtype=np.float64)
    k = c.size // 2
    val_mask = rng.random(k) < rate
    steps = rng.normal(0.0, 1.0, size=k) * sigma
    vals = np.where(val_mask, np.clip(c[k:] + steps, 0.0, 1.0), c[k:])
    locs = c[:k].copy()
    loc_mask = rng.random(k) < rate
    for i in np.flatnonzero(loc_mask):
        unused = np.setdiff1d(np.arange(d), locs)
        if unused.size:
            locs[i] = rng.choice(unused)
    if not loc_mask.any() and not val_mask.any():
        return c
    return canonical(np.concatenate([locs, vals]))


def _ranked(scores) -> list[int]:
    # fitness descending, ties to the lower index
    return sorted(range(len(scores)), key=lambda i: (-scores[i].fitness, i))


def run_ga(
    base_model: nn.ModelParams,
    local_data: Dataset,
    cfg: MaliciousClientConfig,
    on_generation: Callable[[GAState], None] | None = None,
) -> tuple[Trigger, FitnessScore, list[GenerationRecord]]:
    """Evolve a trigger against ``base_model`` on the attacker's local data.

    Returns the all-time best trigger, its score and one
    :class:`GenerationRecord` per generation (generation 0 is the random
    initial population).
    """
    ga = cfg.ga
    d = local_data.d
    rng = np.random.default_rng(derive(ga.seed, "ga"))
    evaluator = FitnessEvaluator(base_model, local_data, cfg)

    population = [random_chromosome(d, ga.k, rng) for _ in range(ga.population_size)]
    scores = evaluator.many(population, ga.workers)
    top = _ranked(scores)[0]
    state = GAState(population, scores, 0, (population[top], scores[top]))
    history = [_record(state)]
    if on_generation:
        on_generation(state)

    for gen in range(1, ga.generations + 1):
        ranked = _ranked(state.scores)
        elites = ranked[: ga.elite_count]
        rest = ranked[ga.elite_count :]
        explorers = rng.choice(rest, size=ga.explore_count, replace=False) if ga.explore_count else []
        nxt = [state.population[i] for i in elites]
        nxt += [state.population[int(i)] for i in explorers]
        while len(nxt) < ga.population_size:
            pa = state.population[tournament_select(state.scores, ga.tournament_size, rng)]
            pb = state.population[tournament_select(state.scores, ga.tournament_size, rng)]
            if rng.random() < ga.crossover_rate:
                ca, cb = crossover(pa, pb, d, rng)
            else:
                ca, cb = pa.copy(), pb.copy()
            for child in (ca, cb):
                if len(nxt) < ga.population_size:
                    nxt.append(mutate(child, ga.mutation_rate, ga.mutation_sigma, d, rng))
        new_scores = evaluator.many(nxt, ga.workers)
        best = state.best
        cand = _ranked(new_scores)[0]
        if new_scores[cand].fitness > best[1].fitness:
            best = (nxt[cand], new_scores[cand])
        state = GAState(nxt, new_scores, gen, best)
        history.append(_record(state))
        if on_generation:
            on_generation(state)

    chrom, score = state.best
    return decode(chrom, d, cfg.target_label), score, history


def _record(state: GAState) -> GenerationRecord:
    _, s = state.best
    return GenerationRecord(
        generation=state.generation,
        best_asr=s.asr,
        best_cad=s.cad,
        best_fitness=s.fitness,
        mean_fitness=float(np.mean([x.fitness for x in state.scores])),
    )


def write_history_csv(history, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["generation", "best_asr", "best_cad", "best_fitness", "mean_fitness"])
        for r in history:
            w.writerow(
                [r.generation, repr(r.best_asr), repr(r.best_cad), repr(r.best_fitness),
                 repr(r.mean_fitness)]
            )


def malicious_update(
    global_model: nn.ModelParams,
    local_data: Dataset,
    cfg: MaliciousClientConfig,
    trigger: Trigger,
) -> nn.ModelParams:
    """Train from the received global model on poisoned local data.

    With ``rho > 0`` the distance penalty ``rho * ||params - global||_2`` is
    applied as a proximal step after every optimizer update: the offset from
    the global model is shrunk toward zero by ``learning_rate * rho`` (or
    zeroed when smaller). Offsets below ``PROX_EPS`` are left alone.
    """
    if global_model.arch.input_dim != local_data.d:
        raise ValueError("model input size does not match local data")
    poisoned = poison(local_data, trigger, cfg.poison_fraction, derive(cfg.ga.seed, "poison"))
    if cfg.rho == 0:
        return nn.train(global_model, poisoned, cfg.train)
    anchor = global_model.values
    step = cfg.train.learning_rate * cfg.rho

    def prox(w):
        off = w - anchor
        norm = np.linalg.norm(off)
        if norm < PROX_EPS:
            return w
        return anchor + off * max(0.0, 1.0 - step / norm)

    return nn.train(global_model, poisoned, cfg.train, post_step=prox)
