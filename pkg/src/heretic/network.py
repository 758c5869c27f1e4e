"""Fully connected feed-forward network with a steepened logistic activation.

Every unit computes ``sigmoid(m * (w . h + theta))``. With a large steepness
``m`` the units behave like binary step units while staying differentiable;
backpropagation picks up an extra factor ``m`` at every unit.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

FORMAT_VERSION = 1
_CLAMP = 700.0


class TrainingError(RuntimeError):
    pass


@dataclass(frozen=True)
class NetworkConfig:
    layer_sizes: tuple[int, ...]
    steepness: float = 100.0
    learning_rate: float = 0.002
    epochs: int = 200
    weight_decay: float = 1e-4
    seed: int = 0
    # init range is +-init_scale / steepness, i.e. +-init_scale in unsteepened units
    init_scale: float = 0.5
    # "inverse_epoch" divides the learning rate by the 1-based epoch number
    lr_schedule: str = "inverse_epoch"
    # targets are (low, 1 - low) instead of (0, 1)
    target_low: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "layer_sizes", tuple(int(s) for s in self.layer_sizes))
        if len(self.layer_sizes) < 3:
            raise ValueError("need an input layer, at least one hidden layer and an output layer")
        if min(self.layer_sizes) < 1:
            raise ValueError("layer sizes must be positive")
        if not self.steepness > 0:
            raise ValueError("steepness must be positive")
        if not self.learning_rate > 0:
            raise ValueError("learning rate must be positive")
        if self.epochs < 0:
            raise ValueError("epochs must be non-negative")
        if self.weight_decay < 0:
            raise ValueError("weight decay must be non-negative")
        if not 0.0 <= self.target_low < 0.5:
            raise ValueError("target_low must lie in [0, 0.5)")
        if self.lr_schedule not in ("constant", "inverse_epoch"):
            raise ValueError(f"unknown learning-rate schedule {self.lr_schedule!r}")


@dataclass
class Network:
    """``weights[k]`` has shape (units in layer k, units in layer k+1)."""

    weights: list[np.ndarray]
    biases: list[np.ndarray]
    steepness: float
    input_names: list[str] = field(default_factory=list)
    classes: list[str] = field(default_factory=list)

    def __post_init__(self):
        self.weights = [np.array(w, dtype=float) for w in self.weights]
        self.biases = [np.array(b, dtype=float) for b in self.biases]
        if len(self.weights) != len(self.biases) or not self.weights:
            raise ValueError("weights and biases must pair up")
        for k, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.ndim != 2 or b.shape != (w.shape[1],):
                raise ValueError(f"layer {k}: inconsistent weight/bias shapes")
            if k and w.shape[0] != self.weights[k - 1].shape[1]:
                raise ValueError(f"layer {k}: fan-in does not match previous layer")
            if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
                raise ValueError(f"layer {k}: non-finite parameters")
        if not self.steepness > 0:
            raise ValueError("steepness must be positive")
        if self.input_names and len(self.input_names) != self.n_inputs:
            raise ValueError("input_names length does not match input width")
        if self.classes and len(self.classes) != self.layer_sizes[-1]:
            raise ValueError("one output unit per class is required")

    @property
    def layer_sizes(self) -> list[int]:
        return [self.weights[0].shape[0]] + [w.shape[1] for w in self.weights]

    @property
    def n_inputs(self) -> int:
        return self.weights[0].shape[0]

    def copy(self) -> "Network":
        return Network(
            [w.copy() for w in self.weights],
            [b.copy() for b in self.biases],
            self.steepness,
            list(self.input_names),
            list(self.classes),
        )

    def unit_names(self, layer: int) -> list[str]:
        """Symbols of the units in layer ``layer`` (1 = first hidden layer)."""
        n = self.layer_sizes[layer]
        if layer == len(self.weights):
            labels = self.classes or [str(j) for j in range(n)]
            return [f"out[{c}]" for c in labels]
        return [f"h{layer}.{j}" for j in range(n)]


def steep_sigmoid(x, m: float):
    """``1 / (1 + exp(-m x))``, saturating instead of overflowing."""
    z = np.clip(np.multiply(m, x), -_CLAMP, _CLAMP)
    out = 1.0 / (1.0 + np.exp(-z))
    return float(out) if np.ndim(out) == 0 else out


def _check_input(net: Network, x: np.ndarray):
    if x.shape[-1] != net.n_inputs:
        raise ValueError(f"input width {x.shape[-1]} does not match network input width {net.n_inputs}")


def forward(net: Network, x) -> list[np.ndarray]:
    """Activations of every layer, input layer first.

    ``x`` may be one instance or a matrix of instances (one per row).
    """
    h = np.asarray(x, dtype=float)
    _check_input(net, h)
    trace = [h]
    for w, b in zip(net.weights, net.biases):
        h = steep_sigmoid(h @ w + b, net.steepness)
        trace.append(h)
    return trace


def outputs(net: Network, X) -> np.ndarray:
    return forward(net, X)[-1]


def predict_index(net: Network, X) -> np.ndarray:
    """Index of the most active output unit; ``argmax`` keeps the lowest on ties."""
    return np.argmax(np.atleast_2d(outputs(net, X)), axis=1)


def predict(net: Network, x):
    """Class label (or labels, for a matrix) of the most active output unit."""
    idx = predict_index(net, x)
    labels = net.classes or list(range(net.layer_sizes[-1]))
    if np.ndim(x) == 1:
        return labels[int(idx[0])]
    return [labels[int(i)] for i in idx]


def init_network(cfg: NetworkConfig, rng: np.random.Generator) -> Network:
    s = cfg.init_scale / cfg.steepness
    weights, biases = [], []
    for n_in, n_out in zip(cfg.layer_sizes[:-1], cfg.layer_sizes[1:]):
        weights.append(rng.uniform(-s, s, size=(n_in, n_out)))
        biases.append(rng.uniform(-s, s, size=n_out))
    return Network(weights, biases, cfg.steepness)


def gradients(net: Network, x, t) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """Gradient of ``0.5 * sum((t - y)^2)`` w.r.t. weights and biases."""
    m = net.steepness
    trace = forward(net, x)
    y = trace[-1]
    delta = (y - np.asarray(t, dtype=float)) * m * y * (1.0 - y)
    gw, gb = [None] * len(net.weights), [None] * len(net.weights)
    for k in range(len(net.weights) - 1, -1, -1):
        gw[k] = np.outer(trace[k], delta)
        gb[k] = delta
        if k:
            h = trace[k]
            delta = (net.weights[k] @ delta) * m * h * (1.0 - h)
    return gw, gb


def sse(net: Network, X, T) -> float:
    Y = np.atleast_2d(outputs(net, X))
    return float(0.5 * np.sum((np.atleast_2d(T) - Y) ** 2))


def train(X, targets, cfg: NetworkConfig, *, input_names=(), classes=()) -> Network:
    """Per-instance backpropagation with the steepness factor and weight decay.

    ``targets`` holds class indices; they become one-hot vectors (softened to
    ``target_low`` / ``1 - target_low`` when configured).
    """
    X = np.asarray(X, dtype=float)
    targets = np.asarray(targets, dtype=int)
    n_out = cfg.layer_sizes[-1]
    if X.ndim != 2 or X.shape[1] != cfg.layer_sizes[0]:
        raise ValueError("training matrix width does not match the input layer")
    if len(targets) != len(X):
        raise ValueError("one target per instance is required")
    if len(targets) and (targets.min() < 0 or targets.max() >= n_out):
        raise ValueError("target index outside the output layer")

    rng = np.random.default_rng(cfg.seed)
    net = init_network(cfg, rng)
    net.input_names = list(input_names)
    net.classes = [str(c) for c in classes]
    if net.classes and len(net.classes) != n_out:
        raise ValueError("one output unit per class is required")

    T = np.full((len(X), n_out), cfg.target_low)
    T[np.arange(len(X)), targets] = 1.0 - cfg.target_low
    m = cfg.steepness
    W, B = net.weights, net.biases
    n_layers = len(W)

    outer = np.multiply.outer
    for epoch in range(cfg.epochs):
        alpha = cfg.learning_rate
        if cfg.lr_schedule == "inverse_epoch":
            alpha /= epoch + 1
        shrink = 1.0 - alpha * cfg.weight_decay
        # the inner loop inlines the sigmoid: exp overflowing to inf gives 0
        with np.errstate(over="ignore", invalid="ignore"):
            for i in rng.permutation(len(X)):
                h = X[i]
                trace = [h]
                for w, b in zip(W, B):
                    h = 1.0 / (1.0 + np.exp(-m * (h @ w + b)))
                    trace.append(h)
                delta = (T[i] - h) * m * h * (1.0 - h)
                for k in range(n_layers - 1, -1, -1):
                    # error for the layer below uses the pre-update weights
                    below = None
                    if k:
                        h = trace[k]
                        below = (W[k] @ delta) * m * h * (1.0 - h)
                    W[k] *= shrink
                    W[k] += outer(alpha * trace[k], delta)
                    B[k] += alpha * delta
                    delta = below
        if not all(np.all(np.isfinite(w)) for w in W):
            raise TrainingError(f"training diverged in epoch {epoch + 1}")
    return net


# -- serialization ---------------------------------------------------------


def to_dict(net: Network) -> dict:
    return {
        "format": "heretic-network",
        "version": FORMAT_VERSION,
        "layer_sizes": net.layer_sizes,
        "steepness": net.steepness,
        "input_names": list(net.input_names),
        "classes": list(net.classes),
        "weights": [w.ravel().tolist() for w in net.weights],
        "biases": [b.tolist() for b in net.biases],
    }


def from_dict(data: dict) -> Network:
    if data.get("format") != "heretic-network":
        raise ValueError("not a serialized network")
    if data.get("version") != FORMAT_VERSION:
        raise ValueError(f"unsupported network format version {data.get('version')!r}")
    sizes = data["layer_sizes"]
    weights = [
        np.array(w, dtype=float).reshape(a, b) for w, a, b in zip(data["weights"], sizes[:-1], sizes[1:])
    ]
    return Network(weights, data["biases"], data["steepness"], data["input_names"], data["classes"])


def save_network(net: Network, path) -> None:
    # json writes floats with repr(), which round-trips exactly
    with open(path, "w") as fh:
        json.dump(to_dict(net), fh, indent=1)
        fh.write("\n")


def load_network(path) -> Network:
    with open(path) as fh:
        return from_dict(json.load(fh))


__all__ = [
    "Network",
    "NetworkConfig",
    "TrainingError",
    "forward",
    "gradients",
    "load_network",
    "predict",
    "predict_index",
    "save_network",
    "sse",
    "steep_sigmoid",
    "train",
]
