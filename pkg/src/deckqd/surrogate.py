"""Surrogate models of game outcomes: a small MLP and a linear baseline.

Both models map a bag-of-cards encoding to a raw output vector that is
de-standardized into (objective, measures, optional ancillary data).  The
forward pass, reverse-mode gradients and the Adam optimizer are implemented
directly in numpy so the training pipeline is a pure, seedable function of
its inputs.  ``finite_difference_check`` provides an independent gradient
oracle.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .rng import derive_rng

ANCILLARY_FIELDS = (
    "win_percentage",
    "total_damage",
    "cards_drawn",
    "mana_spent",
    "mana_wasted",
    "mana_sum",
    "mana_variance",
    "minion_count",
    "spell_count",
)

# Raw model output layout: objective, two measures, then ancillary fields.
BASE_OUTPUT_DIM = 3
FULL_OUTPUT_DIM = BASE_OUTPUT_DIM + len(ANCILLARY_FIELDS)

MLP_HIDDEN_SIZES = (128, 32, 16)


@dataclass(frozen=True)
class AncillaryData:
    """Gameplay and deck-composition statistics predicted alongside the
    objective.  Ground-truth instances satisfy win_percentage in [0, 1] and
    non-negative counts; model predictions are unconstrained.
    """

    win_percentage: float
    total_damage: float
    cards_drawn: float
    mana_spent: float
    mana_wasted: float
    mana_sum: float
    mana_variance: float
    minion_count: float
    spell_count: float

    def to_vector(self) -> np.ndarray:
        return np.array([getattr(self, name) for name in ANCILLARY_FIELDS])

    @classmethod
    def from_vector(cls, vec: Sequence[float]) -> "AncillaryData":
        if len(vec) != len(ANCILLARY_FIELDS):
            raise ValueError(f"expected {len(ANCILLARY_FIELDS)} ancillary values")
        return cls(**{name: float(v) for name, v in zip(ANCILLARY_FIELDS, vec)})


@dataclass(frozen=True)
class LabeledSample:
    """One training record: encoding, objective, measures, ancillary data."""

    x: np.ndarray
    f: float
    m: tuple[float, float]
    alpha: AncillaryData | None = None


@dataclass(frozen=True)
class TargetScaler:
    """Per-output standardization (mean/std); degenerate stds become 1."""

    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def fit(cls, targets: np.ndarray) -> "TargetScaler":
        mean = targets.mean(axis=0)
        std = targets.std(axis=0)
        std = np.where(std > 0.0, std, 1.0)
        return cls(mean=mean, std=std)

    @classmethod
    def identity(cls, dim: int) -> "TargetScaler":
        return cls(mean=np.zeros(dim), std=np.ones(dim))

    def scale(self, y: np.ndarray) -> np.ndarray:
        return (y - self.mean) / self.std

    def unscale(self, y: np.ndarray) -> np.ndarray:
        return y * self.std + self.mean


class DataBuffer:
    """Append-only labeled dataset accumulated across outer iterations."""

    def __init__(self) -> None:
        self.samples: list[LabeledSample] = []
        self.target_scaler: TargetScaler | None = None

    def __len__(self) -> int:
        return len(self.samples)

    def append(self, sample: LabeledSample) -> None:
        self.samples.append(sample)

    def inputs(self) -> np.ndarray:
        return np.stack([s.x for s in self.samples])

    def targets(self, with_ancillary: bool) -> np.ndarray:
        rows = []
        for s in self.samples:
            row = [s.f, s.m[0], s.m[1]]
            if with_ancillary:
                if s.alpha is None:
                    raise ValueError("sample has no ancillary data")
                row.extend(s.alpha.to_vector())
            rows.append(row)
        return np.asarray(rows)


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.01
    batch_size: int = 64
    epochs: int = 20
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    shuffle_seed: int = 0

    def __post_init__(self) -> None:
        if self.learning_rate <= 0 or self.batch_size < 1 or self.epochs < 1:
            raise ValueError("learning_rate, batch_size and epochs must be positive")
        if not (0 < self.beta1 < 1 and 0 < self.beta2 < 1):
            raise ValueError("betas must be in (0, 1)")


@dataclass(frozen=True)
class Prediction:
    f_hat: float
    m_hat: tuple[float, float]
    alpha_hat: AncillaryData | None = None


class ModelKind(enum.Enum):
    MLP = "mlp"
    LINEAR = "linear"


def elu(z: np.ndarray | float) -> np.ndarray | float:
    """Exponential linear unit with alpha = 1: z if z > 0 else exp(z) - 1."""
    return np.where(z > 0.0, z, np.expm1(np.minimum(z, 0.0)))


def _elu_grad(z: np.ndarray) -> np.ndarray:
    return np.where(z > 0.0, 1.0, np.exp(np.minimum(z, 0.0)))


@dataclass
class Gradients:
    weights: list[np.ndarray]
    biases: list[np.ndarray]


class SurrogateModel:
    """Feed-forward network with ELU hidden layers and identity output.

    ``kind`` MLP uses hidden sizes (128, 32, 16); LINEAR is a single affine
    map.  Weight matrices have shape (fan_out, fan_in).  Adam moment
    accumulators live on the model so training warm-starts across calls.
    """

    def __init__(self, kind: ModelKind, layer_sizes: Sequence[int]):
        if len(layer_sizes) < 2 or any(s < 1 for s in layer_sizes):
            raise ValueError("layer_sizes needs >= 2 positive entries")
        self.kind = kind
        self.layer_sizes = tuple(int(s) for s in layer_sizes)
        self.weights: list[np.ndarray] = [
            np.zeros((out, inp)) for inp, out in zip(layer_sizes, layer_sizes[1:])
        ]
        self.biases: list[np.ndarray] = [np.zeros(out) for out in layer_sizes[1:]]
        self.m_weights = [np.zeros_like(w) for w in self.weights]
        self.v_weights = [np.zeros_like(w) for w in self.weights]
        self.m_biases = [np.zeros_like(b) for b in self.biases]
        self.v_biases = [np.zeros_like(b) for b in self.biases]
        self.step = 0
        self.scaler: TargetScaler | None = None

    @property
    def input_dim(self) -> int:
        return self.layer_sizes[0]

    @property
    def output_dim(self) -> int:
        return self.layer_sizes[-1]

    @property
    def has_ancillary(self) -> bool:
        return self.output_dim == FULL_OUTPUT_DIM

    def forward(self, x: np.ndarray) -> np.ndarray:
        """Raw (pre-de-standardization) output for a single input vector."""
        return self.forward_batch(np.asarray(x, dtype=np.float64).reshape(1, -1))[0]

    def forward_batch(self, x: np.ndarray) -> np.ndarray:
        if x.ndim != 2 or x.shape[1] != self.input_dim:
            raise ValueError(f"expected input of width {self.input_dim}, got {x.shape}")
        a = x
        last = len(self.weights) - 1
        for layer, (w, b) in enumerate(zip(self.weights, self.biases)):
            z = a @ w.T + b
            a = z if layer == last else elu(z)
        return a

    def predict(self, x: np.ndarray) -> Prediction:
        """Forward pass followed by de-standardization and output splitting."""
        raw = self.forward(x)
        scaler = self.scaler if self.scaler is not None else TargetScaler.identity(self.output_dim)
        y = scaler.unscale(raw)
        alpha = AncillaryData.from_vector(y[BASE_OUTPUT_DIM:]) if self.has_ancillary else None
        return Prediction(f_hat=float(y[0]), m_hat=(float(y[1]), float(y[2])), alpha_hat=alpha)

    def predict_batch(self, x: np.ndarray) -> np.ndarray:
        """De-standardized outputs for a batch, as a (n, output_dim) array."""
        raw = self.forward_batch(x)
        if self.scaler is None:
            return raw
        return self.scaler.unscale(raw)

    def parameters(self) -> list[np.ndarray]:
        return self.weights + self.biases

    def copy(self) -> "SurrogateModel":
        dup = SurrogateModel(self.kind, self.layer_sizes)
        dup.weights = [w.copy() for w in self.weights]
        dup.biases = [b.copy() for b in self.biases]
        dup.m_weights = [m.copy() for m in self.m_weights]
        dup.v_weights = [v.copy() for v in self.v_weights]
        dup.m_biases = [m.copy() for m in self.m_biases]
        dup.v_biases = [v.copy() for v in self.v_biases]
        dup.step = self.step
        dup.scaler = self.scaler
        return dup


def initialize_model(
    kind: ModelKind, input_dim: int, output_dim: int, seed: int
) -> SurrogateModel:
    """Build a model with fan-in-uniform weights and zero biases.

    Weights are drawn from U[-sqrt(6/fan_in), +sqrt(6/fan_in)], layer by
    layer, from a generator derived from the seed.
    """
    if input_dim < 1 or output_dim < 1:
        raise ValueError("dimensions must be >= 1")
    if kind is ModelKind.MLP:
        sizes = (input_dim, *MLP_HIDDEN_SIZES, output_dim)
    else:
        sizes = (input_dim, output_dim)
    model = SurrogateModel(kind, sizes)
    rng = derive_rng(seed, "model-init")
    for layer, w in enumerate(model.weights):
        bound = np.sqrt(6.0 / sizes[layer])
        model.weights[layer] = rng.uniform(-bound, bound, size=w.shape)
    return model


def _scaled_targets(model: SurrogateModel, batch: Sequence[LabeledSample]) -> tuple[np.ndarray, np.ndarray]:
    x = np.stack([np.asarray(s.x, dtype=np.float64) for s in batch])
    rows = []
    for s in batch:
        row = [s.f, s.m[0], s.m[1]]
        if model.has_ancillary:
            if s.alpha is None:
                raise ValueError("sample has no ancillary data")
            row.extend(s.alpha.to_vector())
        rows.append(row)
    y = np.asarray(rows)
    if model.scaler is not None:
        y = model.scaler.scale(y)
    return x, y


def _loss_value(model: SurrogateModel, x: np.ndarray, y: np.ndarray) -> float:
    diff = model.forward_batch(x) - y
    return float(np.mean(diff * diff))


def _loss_and_gradients_arrays(
    model: SurrogateModel, x: np.ndarray, y: np.ndarray
) -> tuple[float, Gradients]:
    """Mean squared error over batch and output dims, with reverse-mode
    gradients of the exact forward computation."""
    n_layers = len(model.weights)
    activations = [x]
    pre = []
    a = x
    for layer in range(n_layers):
        z = a @ model.weights[layer].T + model.biases[layer]
        pre.append(z)
        a = z if layer == n_layers - 1 else elu(z)
        activations.append(a)
    diff = activations[-1] - y
    loss = float(np.mean(diff * diff))

    grad_w = [np.empty(0)] * n_layers
    grad_b = [np.empty(0)] * n_layers
    delta = 2.0 * diff / diff.size
    for layer in range(n_layers - 1, -1, -1):
        grad_w[layer] = delta.T @ activations[layer]
        grad_b[layer] = delta.sum(axis=0)
        if layer > 0:
            delta = (delta @ model.weights[layer]) * _elu_grad(pre[layer - 1])
    return loss, Gradients(weights=grad_w, biases=grad_b)


def loss_and_gradients(
    model: SurrogateModel, batch: Sequence[LabeledSample]
) -> tuple[float, Gradients]:
    """MSE loss and parameter gradients for a batch of labeled samples.

    Targets are standardized with the model's scaler (identity if unset)
    before the loss is taken.
    """
    if len(batch) == 0:
        raise ValueError("batch must be non-empty")
    x, y = _scaled_targets(model, batch)
    return _loss_and_gradients_arrays(model, x, y)


def adam_step(model: SurrogateModel, grads: Gradients, config: TrainConfig) -> SurrogateModel:
    """One Adam update with bias correction; mutates and returns the model."""
    for g, w in zip(grads.weights, model.weights):
        if g.shape != w.shape:
            raise ValueError("gradient shape mismatch")
    for g, b in zip(grads.biases, model.biases):
        if g.shape != b.shape:
            raise ValueError("gradient shape mismatch")
    model.step += 1
    t = model.step
    b1, b2, eps, lr = config.beta1, config.beta2, config.epsilon, config.learning_rate
    bias1 = 1.0 - b1**t
    bias2 = 1.0 - b2**t
    for params, grads_list, ms, vs in (
        (model.weights, grads.weights, model.m_weights, model.v_weights),
        (model.biases, grads.biases, model.m_biases, model.v_biases),
    ):
        for i, g in enumerate(grads_list):
            ms[i] *= b1
            ms[i] += (1.0 - b1) * g
            vs[i] *= b2
            vs[i] += (1.0 - b2) * g * g
            params[i] -= lr * (ms[i] / bias1) / (np.sqrt(vs[i] / bias2) + eps)
    return model


def train(model: SurrogateModel, buffer: DataBuffer, config: TrainConfig) -> list[float]:
    """Train on the full buffer for config.epochs, returning per-epoch mean
    loss (per-sample average, final partial mini-batch included).

    The target scaler is recomputed from the whole buffer at each call and
    stored on both the buffer and the model.  Parameters and Adam moments are
    warm-started: nothing is reinitialized across calls.
    """
    if len(buffer) == 0:
        raise ValueError("buffer must be non-empty")
    targets = buffer.targets(model.has_ancillary)
    scaler = TargetScaler.fit(targets)
    buffer.target_scaler = scaler
    model.scaler = scaler
    x = buffer.inputs()
    y = scaler.scale(targets)
    n = len(buffer)
    history = []
    for epoch in range(config.epochs):
        perm = derive_rng(config.shuffle_seed, epoch).permutation(n)
        total = 0.0
        for start in range(0, n, config.batch_size):
            idx = perm[start : start + config.batch_size]
            loss, grads = _loss_and_gradients_arrays(model, x[idx], y[idx])
            adam_step(model, grads, config)
            total += loss * len(idx)
        history.append(total / n)
    return history


def finite_difference_check(
    model: SurrogateModel, samples: Sequence[LabeledSample], h: float = 1e-5
) -> float:
    """Central-difference check of every parameter gradient.

    Returns the maximum relative error, computed per parameter as
    |analytic - numeric| / max(|analytic|, |numeric|, 1e-8).  The numeric
    side uses forward passes only, so it is independent of the backprop
    implementation.
    """
    if h <= 0:
        raise ValueError("h must be positive")
    x, y = _scaled_targets(model, samples)
    _, grads = _loss_and_gradients_arrays(model, x, y)
    worst = 0.0
    for analytic, param in zip(
        grads.weights + grads.biases, model.weights + model.biases
    ):
        flat_param = param.reshape(-1)
        flat_grad = analytic.reshape(-1)
        for i in range(flat_param.size):
            original = flat_param[i]
            flat_param[i] = original + h
            plus = _loss_value(model, x, y)
            flat_param[i] = original - h
            minus = _loss_value(model, x, y)
            flat_param[i] = original
            numeric = (plus - minus) / (2.0 * h)
            denom = max(abs(flat_grad[i]), abs(numeric), 1e-8)
            worst = max(worst, abs(flat_grad[i] - numeric) / denom)
    return worst


CHECKPOINT_MAGIC = "deckqd-checkpoint v1"


def save_checkpoint(model: SurrogateModel, path: str | Path) -> None:
    """Write the model to a flat binary checkpoint.

    Layout: three ASCII header lines (magic, kind, layer sizes) terminated by
    a blank line, then little-endian float64 data: scaler mean, scaler std,
    and per layer the weight matrix (row-major) followed by the bias vector.
    Loading reproduces predictions bit-exactly.  Adam moments are not stored;
    a loaded checkpoint is an inference snapshot.
    """
    scaler = model.scaler if model.scaler is not None else TargetScaler.identity(model.output_dim)
    header = (
        f"{CHECKPOINT_MAGIC}\n"
        f"kind={model.kind.value}\n"
        f"layer_sizes={','.join(str(s) for s in model.layer_sizes)}\n"
        "\n"
    )
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        for arr in (scaler.mean, scaler.std, *[
            a for w, b in zip(model.weights, model.biases) for a in (w, b)
        ]):
            data = np.ascontiguousarray(arr, dtype="<f8")
            fh.write(data.tobytes())


def load_checkpoint(path: str | Path) -> SurrogateModel:
    with open(path, "rb") as fh:
        blob = fh.read()
    header_end = blob.index(b"\n\n")
    lines = blob[:header_end].decode("ascii").split("\n")
    if lines[0] != CHECKPOINT_MAGIC:
        raise ValueError(f"not a checkpoint file: {path}")
    fields = dict(line.split("=", 1) for line in lines[1:])
    kind = ModelKind(fields["kind"])
    sizes = tuple(int(tok) for tok in fields["layer_sizes"].split(","))
    model = SurrogateModel(kind, sizes)

    offset = header_end + 2
    def take(shape: tuple[int, ...]) -> np.ndarray:
        nonlocal offset
        count = int(np.prod(shape))
        arr = np.frombuffer(blob, dtype="<f8", count=count, offset=offset)
        offset += count * 8
        return arr.reshape(shape).copy()

    mean = take((sizes[-1],))
    std = take((sizes[-1],))
    model.scaler = TargetScaler(mean=mean, std=std)
    for layer in range(len(model.weights)):
        model.weights[layer] = take(model.weights[layer].shape)
        model.biases[layer] = take(model.biases[layer].shape)
    if offset != len(blob):
        raise ValueError("checkpoint has trailing bytes")
    return model
