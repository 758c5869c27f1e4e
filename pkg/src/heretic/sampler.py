"""Per-neuron training sets obtained by forward-propagating the data.

Units of the first hidden layer see the encoded features themselves; every
later unit sees the binarized outputs of the layer below it.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass

import numpy as np

from heretic.network import Network, forward
from heretic.tree import BINARY, SampleSet

THRESHOLD = 0.5


@dataclass
class NeuronSampleSet(SampleSet):
    layer: int = 0
    unit: int = 0
    symbol: str = ""

    @property
    def constant(self) -> bool:
        """True when the unit emits the same bit on every row."""
        return len(np.unique(self.y)) <= 1


def binarize(a):
    """1 where the activation is at least 0.5, else 0."""
    arr = np.asarray(a, dtype=float)
    if np.any((arr < 0.0) | (arr > 1.0)) or np.any(np.isnan(arr)):
        raise ValueError("activations must lie in [0, 1]")
    bits = (arr >= THRESHOLD).astype(int)
    return int(bits) if bits.ndim == 0 else bits


def layer_bits(net: Network, X) -> list[np.ndarray]:
    """Binarized activations of every non-input layer for the rows of ``X``."""
    return [binarize(a) for a in forward(net, np.atleast_2d(X))[1:]]


def collect_neuron_samples(net: Network, X, input_names, input_kinds) -> list[NeuronSampleSet]:
    """One sample set per hidden and output unit, in layer order."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != net.n_inputs or len(input_names) != net.n_inputs:
        raise ValueError(f"data has {X.shape[1]} columns, network expects {net.n_inputs}")
    bits = layer_bits(net, X)
    out = []
    inputs, names, kinds = X, list(input_names), list(input_kinds)
    for k, layer_out in enumerate(bits, start=1):
        symbols = net.unit_names(k)
        for j, sym in enumerate(symbols):
            out.append(
                NeuronSampleSet(inputs, layer_out[:, j], names, kinds, (0, 1), layer=k, unit=j, symbol=sym)
            )
        inputs = layer_out.astype(float)
        names = symbols
        kinds = [BINARY] * len(symbols)
    return out


def ambiguous_fraction(net: Network, X, low: float = 0.05, high: float = 0.95) -> float:
    """Share of unit activations that are not close to 0 or 1."""
    acts = forward(net, np.atleast_2d(X))[1:]
    total = sum(a.size for a in acts)
    return sum(int(np.count_nonzero((a > low) & (a < high))) for a in acts) / total


def dump_samples(samples: list[NeuronSampleSet], directory) -> list[str]:
    """Write each sample set as ``<symbol>.csv`` (inputs then output bit)."""
    os.makedirs(directory, exist_ok=True)
    paths = []
    for s in samples:
        path = os.path.join(directory, f"{s.symbol}.csv")
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow([*s.input_names, s.symbol])
            for row, bit in zip(s.X, s.y):
                w.writerow([f"{v:g}" for v in row] + [int(bit)])
        paths.append(path)
    return paths
