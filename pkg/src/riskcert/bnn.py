"""Mean-field Gaussian feed-forward networks.

Every weight and bias carries an independent Gaussian posterior ``N(mean, std**2)``.
A concrete network is obtained by drawing one flat parameter vector; the flat
layout is, layer after layer, the row-major weight matrix followed by the bias.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DimensionMismatch, EmptyArch, MalformedFile, NegativeStd, ShapeMismatch

ACTIVATIONS = ("relu", "tanh", "linear", "softmax")


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=float)
    arr.setflags(write=False)
    return arr


def _activate(z: np.ndarray, kind: str) -> np.ndarray:
    if kind == "linear":
        return z
    if kind == "relu":
        return np.maximum(z, 0.0)
    if kind == "tanh":
        return np.tanh(z)
    # softmax over the last axis
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


@dataclass(frozen=True)
class LayerSpec:
    weight_mean: np.ndarray
    weight_std: np.ndarray
    bias_mean: np.ndarray
    bias_std: np.ndarray
    activation: str = "linear"

    def __post_init__(self):
        for name in ("weight_mean", "weight_std", "bias_mean", "bias_std"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))
        if self.activation not in ACTIVATIONS:
            raise MalformedFile(f"unknown activation {self.activation!r}")
        wm, ws, bm, bs = self.weight_mean, self.weight_std, self.bias_mean, self.bias_std
        if wm.ndim != 2 or ws.shape != wm.shape:
            raise ShapeMismatch(f"weight mean/std shapes {wm.shape} vs {ws.shape}")
        if bm.ndim != 1 or bs.shape != bm.shape or bm.shape[0] != wm.shape[0]:
            raise ShapeMismatch(
                f"bias shapes {bm.shape}/{bs.shape} do not match {wm.shape[0]} outputs"
            )
        if (ws < 0).any() or (bs < 0).any():
            raise NegativeStd("posterior standard deviations must be nonnegative")

    @property
    def n_in(self) -> int:
        return self.weight_mean.shape[1]

    @property
    def n_out(self) -> int:
        return self.weight_mean.shape[0]

    @property
    def n_params(self) -> int:
        return self.weight_mean.size + self.bias_mean.size


@dataclass(frozen=True)
class BnnModel:
    layers: tuple[LayerSpec, ...]
    input_dim: int = field(default=-1)
    output_dim: int = field(default=-1)

    def __post_init__(self):
        layers = tuple(self.layers)
        if not layers:
            raise EmptyArch("a model needs at least one layer")
        object.__setattr__(self, "layers", layers)
        for k in range(len(layers) - 1):
            if layers[k].n_out != layers[k + 1].n_in:
                raise ShapeMismatch(
                    f"layer {k} emits {layers[k].n_out} values, layer {k + 1} expects {layers[k + 1].n_in}"
                )
            if layers[k].activation == "softmax":
                raise ShapeMismatch("softmax is only allowed on the final layer")
        if self.input_dim == -1:
            object.__setattr__(self, "input_dim", layers[0].n_in)
        if self.output_dim == -1:
            object.__setattr__(self, "output_dim", layers[-1].n_out)
        if self.input_dim != layers[0].n_in or self.output_dim != layers[-1].n_out:
            raise ShapeMismatch("declared input/output dims disagree with the layers")

    @property
    def n_params(self) -> int:
        return sum(layer.n_params for layer in self.layers)

    def mean_vector(self) -> np.ndarray:
        return np.concatenate(
            [np.concatenate([l.weight_mean.ravel(), l.bias_mean]) for l in self.layers]
        )

    def std_vector(self) -> np.ndarray:
        return np.concatenate(
            [np.concatenate([l.weight_std.ravel(), l.bias_std]) for l in self.layers]
        )

    def model_id(self) -> str:
        """Content hash, stable across processes."""
        blob = json.dumps(model_to_dict(self), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


@dataclass(frozen=True)
class WeightSample:
    values: np.ndarray
    seed: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen(self.values))


def model_to_dict(model: BnnModel) -> dict:
    return {
        "input_dim": model.input_dim,
        "output_dim": model.output_dim,
        "layers": [
            {
                "weight_mean": l.weight_mean.tolist(),
                "weight_std": l.weight_std.tolist(),
                "bias_mean": l.bias_mean.tolist(),
                "bias_std": l.bias_std.tolist(),
                "activation": l.activation,
            }
            for l in model.layers
        ],
    }


def model_from_dict(d: dict) -> BnnModel:
    try:
        layers = [
            LayerSpec(
                weight_mean=np.array(l["weight_mean"], dtype=float),
                weight_std=np.array(l["weight_std"], dtype=float),
                bias_mean=np.array(l["bias_mean"], dtype=float),
                bias_std=np.array(l["bias_std"], dtype=float),
                activation=l.get("activation", "linear"),
            )
            for l in d["layers"]
        ]
        input_dim, output_dim = int(d["input_dim"]), int(d["output_dim"])
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, (ShapeMismatch, NegativeStd)):
            raise
        raise MalformedFile(f"model record is malformed: {exc}") from exc
    return BnnModel(tuple(layers), input_dim=input_dim, output_dim=output_dim)


def load_model(path) -> BnnModel:
    """Read and validate a JSON model file (schema in README)."""
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except json.JSONDecodeError as exc:
        raise MalformedFile(f"{path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise MalformedFile(f"{path}: top level must be an object")
    return model_from_dict(raw)


def save_model(model: BnnModel, path) -> None:
    Path(path).write_text(json.dumps(model_to_dict(model), indent=1))


def _as_rng(rng) -> tuple[np.random.Generator, int | None]:
    if isinstance(rng, np.random.Generator):
        return rng, None
    return np.random.default_rng(rng), int(rng)


def sample_weights(model: BnnModel, rng) -> WeightSample:
    """Draw one parameter vector; ``rng`` is a Generator or an integer seed."""
    gen, seed = _as_rng(rng)
    z = gen.standard_normal(model.n_params)
    return WeightSample(model.mean_vector() + model.std_vector() * z, seed=seed)


def sample_weight_matrix(model: BnnModel, rng: np.random.Generator, k: int) -> np.ndarray:
    """``k`` independent parameter vectors stacked as rows."""
    z = rng.standard_normal((k, model.n_params))
    return model.mean_vector() + model.std_vector() * z


def forward_batch(model: BnnModel, weights: np.ndarray, xs: np.ndarray) -> np.ndarray:
    """Evaluate row ``k`` of ``xs`` through the network with parameters ``weights[k]``.

    ``weights`` may also be a single flat vector shared by every input.
    """
    xs = np.atleast_2d(np.asarray(xs, dtype=float))
    weights = np.asarray(weights, dtype=float)
    if xs.shape[1] != model.input_dim:
        raise DimensionMismatch(f"input has {xs.shape[1]} entries, model expects {model.input_dim}")
    if weights.shape[-1] != model.n_params:
        raise DimensionMismatch(f"weight vector has {weights.shape[-1]} entries, expected {model.n_params}")
    shared = weights.ndim == 1
    if not shared and weights.shape[0] != xs.shape[0]:
        raise DimensionMismatch("need one weight row per input row")
    h = xs
    offset = 0
    for layer in model.layers:
        nw = layer.weight_mean.size
        W = weights[..., offset:offset + nw].reshape(weights.shape[:-1] + layer.weight_mean.shape)
        b = weights[..., offset + nw:offset + nw + layer.n_out]
        offset += layer.n_params
        z = h @ W.T + b if shared else np.einsum("kij,kj->ki", W, h) + b
        h = _activate(z, layer.activation)
    return h


def forward(model: BnnModel, w: WeightSample | np.ndarray, x) -> np.ndarray:
    values = w.values if isinstance(w, WeightSample) else np.asarray(w, dtype=float)
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise DimensionMismatch("forward expects a single input vector")
    return forward_batch(model, values, x[None, :])[0]


def synth_model(
    arch: Sequence[int],
    activation: str = "tanh",
    weight_scale: float = 1.0,
    std_scale: float = 0.1,
    seed: int = 0,
    output_activation: str = "linear",
) -> BnnModel:
    """Random stand-in posterior: Gaussian means scaled by ``weight_scale``, constant stds."""
    if len(arch) < 2:
        raise EmptyArch("arch needs an input and an output size")
    rng = np.random.default_rng(seed)
    layers = []
    for k, (n_in, n_out) in enumerate(zip(arch[:-1], arch[1:])):
        last = k == len(arch) - 2
        layers.append(
            LayerSpec(
                weight_mean=weight_scale * rng.standard_normal((n_out, n_in)),
                weight_std=np.full((n_out, n_in), float(std_scale)),
                bias_mean=weight_scale * rng.standard_normal(n_out),
                bias_std=np.full(n_out, float(std_scale)),
                activation=output_activation if last else activation,
            )
        )
    return BnnModel(tuple(layers))
