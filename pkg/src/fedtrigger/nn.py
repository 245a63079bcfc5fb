"""Dense feed-forward classifier on a flat parameter vector.

Parameters live in one contiguous float64 vector, laid out layer by layer as
the row-major ``(fan_in, fan_out)`` weight matrix followed by the bias. Keeping
the model flat makes FedAvg, update deltas and the proximal regulariser plain
vector arithmetic.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

ACTIVATIONS = ("relu", "tanh")
ADAM_BETA1, ADAM_BETA2, ADAM_EPS = 0.9, 0.999, 1e-7
CHECKPOINT_VERSION = "fedtrigger-checkpoint-v1"

# depth/width presets standing in for small, medium and large models
PRESETS = {
    "small": ((64, "relu"),),
    "medium": ((128, "relu"), (64, "relu")),
    "large": ((256, "relu"), (128, "relu"), (64, "relu")),
}


@dataclass(frozen=True)
class ModelArch:
    input_dim: int
    hidden: tuple[tuple[int, str], ...]
    output_dim: int

    def __post_init__(self):
        hidden = tuple((int(w), str(a)) for w, a in self.hidden)
        object.__setattr__(self, "hidden", hidden)
        if self.input_dim < 1:
            raise ValueError("input_dim must be >= 1")
        if self.output_dim < 2:
            raise ValueError("output_dim must be >= 2")
        for w, a in hidden:
            if w < 1:
                raise ValueError(f"hidden width must be >= 1, got {w}")
            if a not in ACTIVATIONS:
                raise ValueError(f"unknown activation {a!r}")

    @classmethod
    def preset(cls, name: str, input_dim: int, output_dim: int) -> "ModelArch":
        if name not in PRESETS:
            raise ValueError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
        return cls(input_dim, PRESETS[name], output_dim)

    @property
    def layer_sizes(self) -> list[tuple[int, int]]:
        dims = [self.input_dim, *(w for w, _ in self.hidden), self.output_dim]
        return list(zip(dims[:-1], dims[1:]))

    @property
    def n_params(self) -> int:
        return sum(i * o + o for i, o in self.layer_sizes)

    def spec_string(self) -> str:
        """Single-line form, e.g. ``216>128:relu>64:relu>7``."""
        mid = [f"{w}:{a}" for w, a in self.hidden]
        return ">".join([str(self.input_dim), *mid, str(self.output_dim)])

    @classmethod
    def from_spec_string(cls, text: str) -> "ModelArch":
        parts = text.strip().split(">")
        if len(parts) < 2:
            raise ValueError(f"bad arch spec {text!r}")
        hidden = []
        for p in parts[1:-1]:
            w, a = p.split(":")
            hidden.append((int(w), a))
        return cls(int(parts[0]), tuple(hidden), int(parts[-1]))


@dataclass(frozen=True, eq=False)
class ModelParams:
    arch: ModelArch
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64)
        if v.shape != (self.arch.n_params,):
            raise ValueError(
                f"expected {self.arch.n_params} parameters for {self.arch.spec_string()}, "
                f"got {v.size}"
            )
        if not np.all(np.isfinite(v)):
            raise ValueError("parameters must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def layers(self, values=None) -> list[tuple[np.ndarray, np.ndarray]]:
        return _unpack(self.arch, self.values if values is None else values)

    def with_values(self, values) -> "ModelParams":
        return ModelParams(self.arch, values)


OPTIMIZERS = ("adam", "sgd")


@dataclass(frozen=True)
class TrainConfig:
    """Local training settings.

    ``optimizer="adam"`` uses the usual (0.9, 0.999, 1e-7) moment settings; the
    Adam state is reset on every call to :func:`train`, as a freshly compiled
    model would. ``"sgd"`` is plain mini-batch gradient descent.
    """

    epochs: int = 3
    batch_size: int = 100
    learning_rate: float = 0.001
    seed: int = 0
    optimizer: str = "adam"

    def __post_init__(self):
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be > 0")
        if self.optimizer not in OPTIMIZERS:
            raise ValueError(f"optimizer must be one of {OPTIMIZERS}")


def _unpack(arch: ModelArch, values: np.ndarray):
    out, pos = [], 0
    for i, o in arch.layer_sizes:
        W = values[pos : pos + i * o].reshape(i, o)
        pos += i * o
        b = values[pos : pos + o]
        pos += o
        out.append((W, b))
    return out


def _act(name, z):
    return np.maximum(z, 0.0) if name == "relu" else np.tanh(z)


def _act_grad(name, a):
    # derivative expressed through the activation output
    return (a > 0).astype(a.dtype) if name == "relu" else 1.0 - a * a


def _softmax(logits):
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def init_params(arch: ModelArch, seed: int) -> ModelParams:
    """Weights ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)), biases zero."""
    rng = np.random.default_rng(seed)
    chunks = []
    for i, o in arch.layer_sizes:
        bound = 1.0 / math.sqrt(i)
        chunks.append(rng.uniform(-bound, bound, size=i * o))
        chunks.append(np.zeros(o))
    return ModelParams(arch, np.concatenate(chunks))


def zeros_like(arch: ModelArch) -> ModelParams:
    return ModelParams(arch, np.zeros(arch.n_params))


def _check_inputs(arch, X):
    X = np.asarray(X, dtype=np.float64)
    if X.shape[-1] != arch.input_dim:
        raise ValueError(f"input has {X.shape[-1]} features, model expects {arch.input_dim}")
    return X


def logits(p: ModelParams, X) -> np.ndarray:
    X = _check_inputs(p.arch, X)
    h = X
    layers = p.layers()
    for (W, b), (_, act) in zip(layers[:-1], p.arch.hidden):
        h = _act(act, h @ W + b)
    W, b = layers[-1]
    return h @ W + b


def forward(p: ModelParams, x) -> np.ndarray:
    """Class probabilities for one feature vector or a batch of rows."""
    return _softmax(logits(p, x))


def predict(p: ModelParams, X) -> np.ndarray:
    # np.argmax returns the first maximum, i.e. ties go to the lowest class
    return np.argmax(logits(p, np.atleast_2d(X)), axis=1)


def _loss_grad_values(arch, values, X, y):
    layers = _unpack(arch, values)
    acts = [X]
    h = X
    for (W, b), (_, act) in zip(layers[:-1], arch.hidden):
        h = _act(act, h @ W + b)
        acts.append(h)
    W, b = layers[-1]
    z = h @ W + b
    z = z - z.max(axis=1, keepdims=True)
    logsum = np.log(np.exp(z).sum(axis=1))
    n = X.shape[0]
    loss = float(np.mean(logsum - z[np.arange(n), y]))

    delta = np.exp(z - logsum[:, None])
    delta[np.arange(n), y] -= 1.0
    delta /= n
    grads = []
    for li in range(len(layers) - 1, -1, -1):
        W, _ = layers[li]
        a_in = acts[li]
        grads.append((a_in.T @ delta).ravel())
        grads.append(delta.sum(axis=0))
        if li > 0:
            delta = (delta @ W.T) * _act_grad(arch.hidden[li - 1][1], a_in)
    # grads were collected last layer first as (W, b) pairs
    ordered = []
    for k in range(len(grads) - 2, -1, -2):
        ordered.extend([grads[k], grads[k + 1]])
    return loss, np.concatenate(ordered)


def _as_batch(batch, y=None):
    if y is not None:
        return np.asarray(batch, dtype=np.float64), np.asarray(y, dtype=np.int64)
    if hasattr(batch, "X") and hasattr(batch, "y"):
        return batch.X, batch.y
    recs = list(batch)
    if not recs:
        return np.zeros((0, 0)), np.zeros(0, dtype=np.int64)
    return (
        np.array([r[0] for r in recs], dtype=np.float64),
        np.array([r[1] for r in recs], dtype=np.int64),
    )


def loss_and_grad(p: ModelParams, batch, y=None) -> tuple[float, np.ndarray]:
    """Mean cross-entropy over a batch and its gradient w.r.t. ``p.values``.

    ``batch`` is a Dataset, an iterable of ``(features, label)`` records, or a
    feature matrix when ``y`` is given.
    """
    X, y = _as_batch(batch, y)
    if X.shape[0] == 0:
        raise ValueError("empty batch")
    X = _check_inputs(p.arch, X)
    if y.min() < 0 or y.max() >= p.arch.output_dim:
        raise ValueError("label out of range for model output")
    return _loss_grad_values(p.arch, p.values, X, y)


def fit(
    p: ModelParams,
    X: np.ndarray,
    y: np.ndarray,
    cfg: TrainConfig,
    extra_grad: Callable[[np.ndarray], np.ndarray] | None = None,
    on_epoch: Callable[[int, float], None] | None = None,
    post_step: Callable[[np.ndarray], np.ndarray] | None = None,
) -> ModelParams:
    """Mini-batch training with a fresh seeded shuffle each epoch.

    ``extra_grad(values)`` is added to every step's loss gradient before the
    optimizer update and ``post_step(values)`` maps the parameters after it
    (a proximal operator, say). ``on_epoch(epoch, mean_loss)`` observes the
    mean pre-update batch loss of each epoch.
    """
    X = _check_inputs(p.arch, X)
    if X.shape[0] == 0:
        raise ValueError("cannot train on an empty dataset")
    if cfg.epochs == 0:
        return p
    rng = np.random.default_rng(cfg.seed)
    w = p.values.copy()
    n = X.shape[0]
    adam = cfg.optimizer == "adam"
    if adam:
        m = np.zeros_like(w)
        v = np.zeros_like(w)
        step = 0
    for epoch in range(cfg.epochs):
        perm = rng.permutation(n)
        total = 0.0
        for start in range(0, n, cfg.batch_size):
            idx = perm[start : start + cfg.batch_size]
            loss, g = _loss_grad_values(p.arch, w, X[idx], y[idx])
            total += loss * idx.size
            if extra_grad is not None:
                g = g + extra_grad(w)
            if adam:
                step += 1
                m = ADAM_BETA1 * m + (1 - ADAM_BETA1) * g
                v = ADAM_BETA2 * v + (1 - ADAM_BETA2) * g * g
                m_hat = m / (1 - ADAM_BETA1**step)
                v_hat = v / (1 - ADAM_BETA2**step)
                w -= cfg.learning_rate * m_hat / (np.sqrt(v_hat) + ADAM_EPS)
            else:
                w -= cfg.learning_rate * g
            if post_step is not None:
                w = np.array(post_step(w), dtype=np.float64)
        if on_epoch is not None:
            on_epoch(epoch, total / n)
    return ModelParams(p.arch, w)


def train(p: ModelParams, ds, cfg: TrainConfig, **kw) -> ModelParams:
    return fit(p, ds.X, ds.y, cfg, **kw)


def accuracy(p: ModelParams, ds) -> float:
    X, y = _as_batch(ds)
    if X.shape[0] == 0:
        raise ValueError("accuracy of an empty dataset is undefined")
    return float(np.mean(predict(p, X) == y))


def params_delta(a: ModelParams, b: ModelParams) -> np.ndarray:
    if a.arch != b.arch:
        raise ValueError(f"arch mismatch: {a.arch.spec_string()} vs {b.arch.spec_string()}")
    return a.values - b.values


def l2_norm(v) -> float:
    return float(np.linalg.norm(np.asarray(v, dtype=np.float64)))


def save_checkpoint(p: ModelParams, path) -> None:
    lines = [CHECKPOINT_VERSION, p.arch.spec_string()]
    lines.extend(format(float(v), ".17g") for v in p.values)
    Path(path).write_text("\n".join(lines) + "\n")


def load_checkpoint(path) -> ModelParams:
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0].strip() != CHECKPOINT_VERSION:
        raise ValueError(f"{path}: not a {CHECKPOINT_VERSION} file")
    arch = ModelArch.from_spec_string(lines[1])
    values = np.array([float(s) for s in lines[2:] if s.strip()], dtype=np.float64)
    return ModelParams(arch, values)
