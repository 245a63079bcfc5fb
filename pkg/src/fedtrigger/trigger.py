"""Sparse feature-space triggers and their chromosome encoding.

A trigger overwrites ``k`` feature coordinates with fixed values. Its
chromosome is the flat vector ``[loc_1..loc_k, v_1..v_k]``, locations first.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Dataset, concat


class InvalidChromosome(ValueError):
    pass


@dataclass(frozen=True)
class Trigger:
    genes: tuple[tuple[int, float], ...]
    target_label: int

    def __post_init__(self):
        genes = tuple(sorted((int(l), float(v)) for l, v in self.genes))
        if not genes:
            raise ValueError("a trigger needs at least one gene")
        locs = [l for l, _ in genes]
        if len(set(locs)) != len(locs):
            raise ValueError(f"duplicate trigger locations in {locs}")
        if locs[0] < 0:
            raise ValueError("trigger locations must be non-negative")
        for _, v in genes:
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"trigger value {v} outside [0, 1]")
        if self.target_label < 0:
            raise ValueError("target_label must be non-negative")
        object.__setattr__(self, "genes", genes)

    @property
    def k(self) -> int:
        return len(self.genes)

    @property
    def locations(self) -> np.ndarray:
        return np.array([l for l, _ in self.genes], dtype=np.int64)

    @property
    def values(self) -> np.ndarray:
        return np.array([v for _, v in self.genes], dtype=np.float64)

    def __str__(self):
        body = ", ".join(f"{l}:{v!r}" for l, v in self.genes)
        return f"{self.target_label}; {body}"

    @classmethod
    def parse(cls, text: str) -> "Trigger":
        """Inverse of ``str(trigger)``: ``"target; loc:val, loc:val"``."""
        try:
            head, body = text.split(";", 1)
            genes = []
            for item in body.split(","):
                loc, val = item.split(":")
                genes.append((int(loc), float(val)))
            return cls(tuple(genes), int(head))
        except ValueError as exc:
            raise ValueError(f"cannot parse trigger {text!r}: {exc}") from None


def encode(t: Trigger) -> np.ndarray:
    return np.concatenate([t.locations.astype(np.float64), t.values])


def decode(c, d: int, target_label: int) -> Trigger:
    """Chromosome to trigger. Values are clamped to [0, 1]; locations are not repaired."""
    c = np.asarray(c, dtype=np.float64)
    if c.ndim != 1 or c.size == 0 or c.size % 2:
        raise InvalidChromosome(f"chromosome length must be even and positive, got {c.size}")
    k = c.size // 2
    locs, vals = c[:k], c[k:]
    if not np.all(np.isfinite(c)):
        raise InvalidChromosome("chromosome has non-finite entries")
    if np.any(locs != np.round(locs)):
        raise InvalidChromosome(f"non-integral location in {locs.tolist()}")
    if np.any(locs < 0) or np.any(locs >= d):
        raise InvalidChromosome(f"location out of range [0, {d}) in {locs.tolist()}")
    if np.unique(locs).size != k:
        raise InvalidChromosome(f"duplicate location in {locs.tolist()}")
    vals = np.clip(vals, 0.0, 1.0)
    return Trigger(tuple(zip(locs.astype(np.int64).tolist(), vals.tolist())), target_label)


def apply(t: Trigger, x) -> np.ndarray:
    """Copy of ``x`` (one vector or a row matrix) with the trigger stamped in."""
    x = np.array(x, dtype=np.float64)
    d = x.shape[-1]
    locs = t.locations
    if locs.max() >= d:
        raise ValueError(f"trigger location {int(locs.max())} outside input of dimension {d}")
    x[..., locs] = t.values
    return x


def poison(ds: Dataset, t: Trigger, poison_fraction: float, seed: int) -> Dataset:
    """Clean records followed by ``floor(fraction * n)`` triggered, relabelled copies."""
    if not 0.0 < poison_fraction <= 0.5:
        raise ValueError(f"poison_fraction must be in (0, 0.5], got {poison_fraction}")
    if t.target_label >= ds.n_classes:
        raise ValueError(f"target label {t.target_label} not a class of the dataset")
    n_poison = int(np.floor(poison_fraction * len(ds)))
    if n_poison < 1:
        raise ValueError(
            f"poison_fraction {poison_fraction} of {len(ds)} records poisons nothing"
        )
    rng = np.random.default_rng(seed)
    idx = np.sort(rng.choice(len(ds), size=n_poison, replace=False))
    bad = ds.replace(
        X=apply(t, ds.X[idx]), y=np.full(n_poison, t.target_label, dtype=np.int64)
    )
    return concat([ds, bad])
