"""Feedforward surrogate for the antenna-selection bound cost.

A small fully connected net maps (one-hot virtual-array occupancy, prior
variance) to the optimized known-phase bound cost.  It is trained offline
to overfit a dense grid of exact evaluations, so candidate ranking at run
time is a constant-time forward pass.

Targets are regressed in log-cost space to tame their dynamic range; inputs
are standardized (the variance feature on a log scale).  All normalization
constants ride along with the model file.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .controllers import AntennaCandidate
from .errors import NumericError, VersionError

logger = logging.getLogger(__name__)

__all__ = [
    "FeatureCodec",
    "Mlp",
    "TrainConfig",
    "encode_input",
    "build_dataset_features",
    "train",
    "predict",
    "loss_and_gradients",
    "save_model",
    "load_model",
    "make_candidate_ranker",
]

MODEL_FORMAT_VERSION = 1

ACTIVATIONS = {
    "tanh": (np.tanh, lambda z: 1.0 - np.tanh(z) ** 2),
    "identity": (lambda z: z, lambda z: np.ones_like(z)),
}


@dataclass(frozen=True)
class FeatureCodec:
    """Maps a candidate and belief variance to the network input layout.

    The occupancy block has one slot per distinct virtual position in the
    candidate universe (presence, not multiplicity); the prior variance is
    appended as the last coordinate.
    """

    positions: np.ndarray

    def __post_init__(self):
        pos = np.unique(np.asarray(self.positions, dtype=float))
        pos.setflags(write=False)
        object.__setattr__(self, "positions", pos)

    @classmethod
    def from_candidates(cls, candidates: Sequence[AntennaCandidate]) -> "FeatureCodec":
        all_pos = np.concatenate([c.virtual_positions for c in candidates])
        return cls(all_pos)

    @property
    def n_features(self) -> int:
        return self.positions.size + 1

    def encode(self, candidate: AntennaCandidate, variance: float) -> np.ndarray:
        """One-hot occupancy of the candidate's virtual elements plus variance."""
        feat = np.zeros(self.n_features)
        idx = np.searchsorted(self.positions, candidate.virtual_positions)
        bad = (idx >= self.positions.size) | ~np.isclose(
            self.positions[np.minimum(idx, self.positions.size - 1)],
            candidate.virtual_positions,
        )
        if np.any(bad):
            unknown = np.asarray(candidate.virtual_positions)[bad]
            raise ValueError(f"virtual position(s) {unknown.tolist()} not in the universe")
        feat[idx] = 1.0
        feat[-1] = variance
        return feat


def encode_input(codec: FeatureCodec, candidate: AntennaCandidate, variance: float):
    return codec.encode(candidate, variance)


def build_dataset_features(
    codec: FeatureCodec, candidates: Sequence[AntennaCandidate], variances
) -> np.ndarray:
    """Feature matrix for the full candidate x variance grid, variance-major."""
    rows = [
        codec.encode(c, v) for v in np.atleast_1d(np.asarray(variances, dtype=float))
        for c in candidates
    ]
    return np.stack(rows)


@dataclass
class Mlp:
    """Dense layers (weights, biases, activation tags) plus normalization.

    ``x_scale_log`` marks input coordinates normalized on a log10 scale
    (the variance feature); targets are standardized log costs.
    """

    weights: list
    biases: list
    activations: tuple
    x_mean: np.ndarray
    x_std: np.ndarray
    x_log: np.ndarray
    y_mean: float
    y_std: float

    def layer_sizes(self) -> list:
        return [self.weights[0].shape[0]] + [w.shape[1] for w in self.weights]


def _normalize_inputs(mlp: Mlp, features: np.ndarray) -> np.ndarray:
    x = np.array(features, dtype=float)
    x = np.where(mlp.x_log, np.log10(np.maximum(x, 1e-300)), x)
    return (x - mlp.x_mean) / mlp.x_std


def _forward(mlp: Mlp, z: np.ndarray):
    """All pre-activations and activations, input first."""
    acts = [z]
    pre = []
    for w, b, tag in zip(mlp.weights, mlp.biases, mlp.activations):
        s = acts[-1] @ w + b
        pre.append(s)
        acts.append(ACTIVATIONS[tag][0](s))
    return pre, acts


def predict(mlp: Mlp, features) -> np.ndarray:
    """Cost estimate for one feature vector or a batch (pure forward pass)."""
    features = np.asarray(features, dtype=float)
    single = features.ndim == 1
    x = _normalize_inputs(mlp, np.atleast_2d(features))
    if x.shape[1] != mlp.weights[0].shape[0]:
        raise ValueError(
            f"got {x.shape[1]} features, model expects {mlp.weights[0].shape[0]}"
        )
    _, acts = _forward(mlp, x)
    out = np.exp(acts[-1][:, 0] * mlp.y_std + mlp.y_mean)
    return float(out[0]) if single else out


def loss_and_gradients(mlp: Mlp, z: np.ndarray, targets: np.ndarray):
    """Half-MSE loss in normalized space and its parameter gradients.

    Returns ``(loss, grad_weights, grad_biases)``.  This is the training
    objective; gradients are analytic backpropagation.
    """
    n = z.shape[0]
    pre, acts = _forward(mlp, z)
    resid = acts[-1][:, 0] - targets
    loss = 0.5 * float(resid @ resid) / n
    delta = (resid / n)[:, None] * ACTIVATIONS[mlp.activations[-1]][1](pre[-1])
    grad_w = [None] * len(mlp.weights)
    grad_b = [None] * len(mlp.biases)
    for layer in range(len(mlp.weights) - 1, -1, -1):
        grad_w[layer] = acts[layer].T @ delta
        grad_b[layer] = delta.sum(axis=0)
        if layer > 0:
            delta = (delta @ mlp.weights[layer].T) * ACTIVATIONS[
                mlp.activations[layer - 1]
            ][1](pre[layer - 1])
    return loss, grad_w, grad_b


@dataclass(frozen=True)
class TrainConfig:
    hidden: tuple = (64, 64)
    learning_rate: float = 0.05
    momentum: float = 0.9
    epochs: int = 3000
    batch_size: int = 128
    lr_decay: float = 0.999
    seed: int = 0
    # Stop early once the epoch metric (mean squared relative error on the
    # original cost scale) drops below this.
    target_relative_error: float = 1e-3


def _init_mlp(n_features: int, cfg: TrainConfig, x_mean, x_std, x_log, y_mean, y_std, rng) -> Mlp:
    sizes = [n_features, *cfg.hidden, 1]
    weights, biases, tags = [], [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        scale = np.sqrt(1.0 / fan_in)
        weights.append(rng.normal(0.0, scale, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
        tags.append("tanh")
    tags[-1] = "identity"
    return Mlp(weights, biases, tuple(tags), x_mean, x_std, x_log, y_mean, y_std)


def train(features, costs, cfg: Optional[TrainConfig] = None):
    """Fit the surrogate by mini-batch gradient descent with momentum.

    Deterministic given the config seed.  Returns ``(mlp, history)`` where
    ``history[k]`` is the mean squared relative error over the dataset
    after epoch k.  Raises :class:`NumericError` if the loss diverges.
    """
    cfg = cfg or TrainConfig()
    features = np.asarray(features, dtype=float)
    costs = np.asarray(costs, dtype=float)
    if features.ndim != 2 or features.shape[0] == 0:
        raise ValueError("need a non-empty 2-D feature matrix")
    if features.shape[0] != costs.shape[0]:
        raise ValueError("features and costs must have matching lengths")
    if not np.all(np.isfinite(costs)) or np.any(costs <= 0):
        raise ValueError("costs must be finite and positive")

    # Inputs: occupancy bits stay linear, the trailing variance goes log10.
    x_log = np.zeros(features.shape[1], dtype=bool)
    x_log[-1] = True
    x = np.where(x_log, np.log10(np.maximum(features, 1e-300)), features)
    x_mean = x.mean(axis=0)
    x_std = np.where(x.std(axis=0) > 0, x.std(axis=0), 1.0)
    y = np.log(costs)
    y_mean = float(y.mean())
    y_std = float(y.std()) or 1.0

    rng = np.random.default_rng(cfg.seed)
    mlp = _init_mlp(features.shape[1], cfg, x_mean, x_std, x_log, y_mean, y_std, rng)
    z = (x - x_mean) / x_std
    t = (y - y_mean) / y_std

    vel_w = [np.zeros_like(w) for w in mlp.weights]
    vel_b = [np.zeros_like(b) for b in mlp.biases]
    n = z.shape[0]
    lr = cfg.learning_rate
    history = []
    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        for start in range(0, n, cfg.batch_size):
            batch = order[start : start + cfg.batch_size]
            loss, grad_w, grad_b = loss_and_gradients(mlp, z[batch], t[batch])
            if not np.isfinite(loss):
                raise NumericError(f"training diverged at epoch {epoch}")
            for layer in range(len(mlp.weights)):
                vel_w[layer] = cfg.momentum * vel_w[layer] - lr * grad_w[layer]
                vel_b[layer] = cfg.momentum * vel_b[layer] - lr * grad_b[layer]
                mlp.weights[layer] = mlp.weights[layer] + vel_w[layer]
                mlp.biases[layer] = mlp.biases[layer] + vel_b[layer]
        lr *= cfg.lr_decay
        pred = predict(mlp, features)
        rel = float(np.mean(((pred - costs) / costs) ** 2))
        history.append(rel)
        logger.debug("epoch %d: mean squared relative error %.3e", epoch, rel)
        if rel < cfg.target_relative_error:
            break
    return mlp, np.asarray(history)


def save_model(mlp: Mlp, path: str) -> None:
    """Versioned binary with a JSON header (shapes, activations, normalization)."""
    header = {
        "version": MODEL_FORMAT_VERSION,
        "layer_sizes": mlp.layer_sizes(),
        "activations": list(mlp.activations),
        "y_mean": mlp.y_mean,
        "y_std": mlp.y_std,
    }
    arrays = {
        "header": np.frombuffer(json.dumps(header).encode("utf-8"), dtype=np.uint8),
        "x_mean": mlp.x_mean,
        "x_std": mlp.x_std,
        "x_log": mlp.x_log,
    }
    for i, (w, b) in enumerate(zip(mlp.weights, mlp.biases)):
        arrays[f"w{i}"] = w
        arrays[f"b{i}"] = b
    np.savez(path, **arrays)


def load_model(path: str) -> Mlp:
    path = str(path)
    actual = path if path.endswith(".npz") else path + ".npz"
    with np.load(actual) as data:
        header = json.loads(bytes(data["header"]).decode("utf-8"))
        if header["version"] != MODEL_FORMAT_VERSION:
            raise VersionError(
                f"model file {actual} has version {header['version']}, "
                f"expected {MODEL_FORMAT_VERSION}"
            )
        n_layers = len(header["activations"])
        weights = [data[f"w{i}"] for i in range(n_layers)]
        biases = [data[f"b{i}"] for i in range(n_layers)]
        return Mlp(
            weights=weights,
            biases=biases,
            activations=tuple(header["activations"]),
            x_mean=data["x_mean"],
            x_std=data["x_std"],
            x_log=data["x_log"].astype(bool),
            y_mean=float(header["y_mean"]),
            y_std=float(header["y_std"]),
        )


def make_candidate_ranker(mlp: Mlp, codec: FeatureCodec):
    """Adapter giving :func:`wwb_adapt.controllers.select_antennas` a
    surrogate evaluator: maps (candidates, variance) to predicted costs."""

    def ranker(candidates, variance):
        feats = np.stack([codec.encode(c, variance) for c in candidates])
        return predict(mlp, feats)

    return ranker
