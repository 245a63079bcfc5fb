"""Matplotlib figures for run reports. Rendered off-screen with the Agg backend."""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

STYLE = {
    "figure.figsize": (5.0, 3.2),
    "figure.dpi": 100,
    "font.size": 9,
    "axes.linewidth": 0.6,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "legend.fontsize": 8,
    "legend.frameon": False,
}

# fixed PNG metadata so reruns write identical bytes
_META = {"Software": "fedtrigger"}


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, metadata=_META)
    plt.close(fig)


def plot_ga_history(history, path):
    gens = [h.generation for h in history]
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        ax.plot(gens, [h.best_fitness for h in history], marker="o", ms=3, label="best fitness")
        ax.plot(gens, [h.mean_fitness for h in history], ls="--", label="mean fitness")
        ax.plot(gens, [h.best_asr for h in history], ls=":", label="best ASR")
        ax.set_xlabel("generation")
        ax.set_ylabel("score")
        ax.legend(loc="lower right")
        _save(fig, path)


def plot_round_asr(records, path):
    """Global-model ASR per trigger against FL round."""
    tids = sorted({t for r in records for t in r.per_trigger_asr})
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        for tid in tids:
            pts = [(r.round, 100 * r.per_trigger_asr[tid]) for r in records if tid in r.per_trigger_asr]
            ax.plot(*zip(*pts), marker="o", ms=3, label=tid)
        ax.set_xlabel("FL round")
        ax.set_ylabel("ASR (%)")
        ax.set_ylim(-2, 102)
        if records:
            ax.set_xlim(0.5, records[-1].round + 0.5)
        if tids:
            ax.legend(loc="best")
        _save(fig, path)


def plot_round_accuracy(records, path):
    rounds = [r.round for r in records]
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        ax.plot(rounds, [100 * r.global_accuracy for r in records], marker="o", ms=3,
                label="global model")
        ctrl = [(r.round, 100 * r.control_accuracy) for r in records if r.control_accuracy is not None]
        if ctrl:
            ax.plot(*zip(*ctrl), ls="--", label="no-attack control")
            ax.legend(loc="lower right")
        ax.set_xlabel("FL round")
        ax.set_ylabel("clean accuracy (%)")
        _save(fig, path)
