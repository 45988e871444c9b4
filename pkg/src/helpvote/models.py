"""The five predictors: linear, logistic, and three fixed MLP topologies.

All hidden layers are ``ReLU`` followed by inverted dropout; every kind but
``linear`` ends in a sigmoid. Backpropagation is written out by hand for
this fixed layer stack.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np

from .errors import ConfigError, DimensionMismatch
from .features import StandardizationStats

HIDDEN_SIZES = {
    "linear": (),
    "logistic": (),
    "mlp64": (64, 32),
    "mlp128": (128,),
    "mlp64deep": (64, 32, 32, 32),
}
MODEL_KINDS = tuple(HIDDEN_SIZES)

TRAIN, EVAL = "train", "eval"


@dataclass(frozen=True)
class ModelConfig:
    kind: str
    input_dim: int
    dropout_rate: float = 0.2
    seed: int = 0

    def __post_init__(self):
        if self.kind not in HIDDEN_SIZES:
            raise ConfigError(f"unknown model kind {self.kind!r}; expected one of {MODEL_KINDS}")
        if self.input_dim < 1:
            raise ConfigError("input_dim must be positive")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ConfigError("dropout_rate must lie in [0, 1)")

    @property
    def layer_sizes(self) -> tuple[int, ...]:
        return (self.input_dim, *HIDDEN_SIZES[self.kind], 1)


@dataclass
class DenseLayer:
    W: np.ndarray  # (out, in)
    b: np.ndarray  # (out,)


@dataclass
class Model:
    layers: list[DenseLayer]
    config: ModelConfig

    @property
    def kind(self) -> str:
        return self.config.kind

    def parameters(self) -> list[np.ndarray]:
        """Flat ``[W1, b1, W2, b2, ...]`` list (views, not copies)."""
        return [p for layer in self.layers for p in (layer.W, layer.b)]

    def weight_mask(self) -> list[bool]:
        """True for weight matrices, False for biases, aligned with parameters()."""
        return [flag for _ in self.layers for flag in (True, False)]

    def with_parameters(self, params) -> "Model":
        layers = [DenseLayer(np.array(params[2 * i], dtype=np.float64), np.array(params[2 * i + 1], dtype=np.float64))
                  for i in range(len(self.layers))]
        return Model(layers, self.config)

    def copy(self) -> "Model":
        return self.with_parameters(self.parameters())


@dataclass
class ForwardTrace:
    pre_activations: list[np.ndarray]  # z for every layer, output layer last
    activations: list[np.ndarray]  # h1..hk after dropout
    masks: list[np.ndarray]  # per hidden layer; values in {0, 1/(1-p)}
    output: np.ndarray  # (n,)
    inputs: np.ndarray  # (n, d)


def init_model(config: ModelConfig) -> Model:
    """Glorot-uniform weights from a generator seeded by ``config.seed``; zero biases."""
    rng = np.random.default_rng(config.seed & ((1 << 64) - 1))
    sizes = config.layer_sizes
    layers = []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        W = rng.uniform(-limit, limit, size=(fan_out, fan_in))
        layers.append(DenseLayer(W, np.zeros(fan_out)))
    return Model(layers, config)


def sigmoid(z):
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _as_batch(model: Model, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != model.config.input_dim:
        raise DimensionMismatch(f"expected inputs with {model.config.input_dim} features, got shape {x.shape}")
    return x


def forward(model: Model, x, mode: str = EVAL, rng: np.random.Generator | None = None, masks=None) -> ForwardTrace:
    """Run the network on a batch (or a single row).

    In ``train`` mode each hidden activation is multiplied by an inverted
    dropout mask, drawn from ``rng`` unless ``masks`` are supplied (used to
    replay the exact same masks). ``eval`` mode never drops.
    """
    x = _as_batch(model, x)
    p = model.config.dropout_rate
    n_hidden = len(model.layers) - 1
    drop = mode == TRAIN and p > 0.0 and n_hidden > 0
    if drop and masks is None and rng is None:
        raise ValueError("train-mode forward with dropout needs an rng or explicit masks")

    h = x
    zs, hs, used_masks = [], [], []
    for i, layer in enumerate(model.layers):
        z = h @ layer.W.T + layer.b
        zs.append(z)
        if i == n_hidden:
            break
        a = np.maximum(z, 0.0)
        if drop:
            if masks is not None:
                mask = masks[i]
            else:
                mask = (rng.random(a.shape) >= p) / (1.0 - p)
            a = a * mask
            used_masks.append(mask)
        h = a
        hs.append(h)

    logits = zs[-1][:, 0]
    out = logits.copy() if model.kind == "linear" else sigmoid(logits)
    return ForwardTrace(zs, hs, used_masks, out, x)


def loss_from_trace(model: Model, trace: ForwardTrace, y) -> float:
    """Batch-mean training loss: MSE for ``linear``, BCE (from logits) otherwise."""
    y = np.asarray(y, dtype=np.float64)
    z = trace.pre_activations[-1][:, 0]
    if model.kind == "linear":
        return float(np.mean((z - y) ** 2))
    # log(1 + e^z) - y z, stable for large |z|
    return float(np.mean(np.logaddexp(0.0, z) - y * z))


def gradients(model: Model, x, y, mode: str = TRAIN, rng: np.random.Generator | None = None, masks=None):
    """Gradients of the batch-mean loss with respect to every parameter.

    Returns ``(grads, loss, trace)`` where ``grads`` aligns with
    ``model.parameters()``. The gradient flows through the dropout masks
    actually sampled in this forward pass.
    """
    x = _as_batch(model, x)
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    if y.shape[0] != x.shape[0]:
        raise DimensionMismatch(f"{x.shape[0]} rows but {y.shape[0]} labels")
    if x.shape[0] == 0:
        raise DimensionMismatch("empty batch")
    trace = forward(model, x, mode, rng, masks)
    n = x.shape[0]
    z_out = trace.pre_activations[-1][:, 0]
    if model.kind == "linear":
        delta = (2.0 / n) * (z_out - y)
    else:
        delta = (trace.output - y) / n
    delta = delta[:, None]

    grads: list[np.ndarray] = [None] * (2 * len(model.layers))
    for i in range(len(model.layers) - 1, -1, -1):
        h_in = trace.inputs if i == 0 else trace.activations[i - 1]
        grads[2 * i] = delta.T @ h_in
        grads[2 * i + 1] = delta.sum(axis=0)
        if i == 0:
            break
        delta = delta @ model.layers[i].W
        if trace.masks:
            delta = delta * trace.masks[i - 1]
        delta = delta * (trace.pre_activations[i - 1] > 0.0)
    return grads, loss_from_trace(model, trace, y), trace


def predict(model: Model, x) -> np.ndarray:
    """Eval-mode output; probabilities for sigmoid kinds, raw values for linear."""
    return forward(model, x, EVAL).output


def classify(p, threshold: float = 0.5):
    """1 where ``p >= threshold``; a tie goes to the positive class."""
    out = (np.asarray(p) >= threshold).astype(np.int8)
    return int(out) if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# checkpoints

def save_checkpoint(path, model: Model, stats: StandardizationStats | None, feature_names) -> None:
    doc = {
        "config": asdict(model.config),
        "layers": [
            {"shape": list(layer.W.shape), "W": [float(v) for v in layer.W.ravel()], "b": [float(v) for v in layer.b]}
            for layer in model.layers
        ],
        "standardization": stats.to_dict() if stats is not None else None,
        "features": list(feature_names),
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


def load_checkpoint(path):
    """Returns ``(model, stats, feature_names)``; floats round-trip exactly."""
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    config = ModelConfig(**doc["config"])
    layers = []
    for entry in doc["layers"]:
        W = np.asarray(entry["W"], dtype=np.float64).reshape(entry["shape"])
        layers.append(DenseLayer(W, np.asarray(entry["b"], dtype=np.float64)))
    model = Model(layers, config)
    expected = config.layer_sizes
    if [l.W.shape for l in layers] != list(zip(expected[1:], expected[:-1])):
        raise DimensionMismatch(f"checkpoint layer shapes do not match kind {config.kind!r}")
    stats = doc.get("standardization")
    return model, StandardizationStats.from_dict(stats) if stats else None, tuple(doc["features"])
