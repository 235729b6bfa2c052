"""Deep autoencoder: build, train, score, calibrate, classify.

The encoder widens to twice the input, narrows back to the input width,
then maps into the bottleneck; the decoder mirrors it in reverse. For an
input width d and bottleneck m the unit counts per level are

    d -> 2d -> d -> m -> d -> 2d -> d

Encoder layers use tanh, decoder hidden layers relu, and the output
layer sigmoid so reconstructions live in (0, 1). The bottleneck defaults
to the input width itself; pass a smaller value for real compression
(which markedly strengthens the anomaly signal on near-binary data).

Anomaly score = per-example reconstruction loss; a threshold calibrated
on scored examples turns scores into binary anomaly calls.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import (
    CalibrationError,
    ConfigError,
    NotCalibratedError,
    NotTrainedError,
)
from . import nn_core
from .nn_core import Network, TrainConfig

AE_MAGIC = b"AEM1"
AE_VERSION = 1

DEFAULT_AE_EPOCHS = 30
DEFAULT_AE_BATCH = 256


@dataclass
class AeModel:
    net: Network
    input_dim: int
    bottleneck_dim: int
    loss: str = "bce"
    threshold: float | None = None
    trained: bool = False
    history: list[float] = field(default_factory=list)

    @property
    def layer_sizes(self) -> list[int]:
        return self.net.sizes


def build_ae(
    input_dim: int,
    bottleneck: int | None = None,
    seed: int = 0,
    loss: str = "bce",
) -> AeModel:
    """Fresh, untrained autoencoder with seed-deterministic weights."""
    if input_dim < 1:
        raise ConfigError(f"input_dim must be >= 1, got {input_dim}")
    if bottleneck is None:
        bottleneck = input_dim
    if bottleneck < 1:
        raise ConfigError(f"bottleneck must be >= 1, got {bottleneck}")
    d = input_dim
    sizes = [d, 2 * d, d, bottleneck, d, 2 * d, d]
    activations = ["tanh", "tanh", "tanh", "relu", "relu", "sigmoid"]
    net = nn_core.build_network(sizes, activations, seed=seed)
    return AeModel(net=net, input_dim=d, bottleneck_dim=bottleneck, loss=loss)


def default_train_config(seed: int = 0, lr: float = 1e-3, loss: str = "bce") -> TrainConfig:
    return TrainConfig(
        epochs=DEFAULT_AE_EPOCHS, batch_size=DEFAULT_AE_BATCH, lr=lr, seed=seed, loss=loss
    )


def train_ae(model: AeModel, X: np.ndarray, cfg: TrainConfig | None = None) -> AeModel:
    """Train to reconstruct the inputs (targets = inputs)."""
    if cfg is None:
        cfg = default_train_config(loss=model.loss)
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != model.input_dim:
        raise ConfigError(
            f"expected (n, {model.input_dim}) training matrix, got {X.shape}"
        )
    model.loss = cfg.loss
    _, history = nn_core.train(model.net, X, X, cfg)
    model.trained = True
    model.history = history
    return model


def encode(model: AeModel, x: np.ndarray) -> np.ndarray:
    """Bottleneck representation (first three layers of the network)."""
    encoder = Network(model.net.layers[:3])
    out, _ = nn_core.forward(encoder, x)
    return out


def reconstruction_error(model: AeModel, x: np.ndarray) -> float | np.ndarray:
    """Per-example mean reconstruction loss; float for a single vector."""
    if not model.trained:
        raise NotTrainedError("autoencoder must be trained before scoring")
    single = np.asarray(x).ndim == 1
    y, _ = nn_core.forward(model.net, x)
    Y = y.reshape(1, -1) if single else y
    T = np.asarray(x, dtype=np.float64).reshape(Y.shape)
    scores = nn_core.per_example_loss(Y, T, model.loss)
    return float(scores[0]) if single else scores


def _sweep_f1(tp: int, fp: int, fn: int) -> float:
    denom = 2 * tp + fp + fn
    return 0.0 if denom == 0 else 2.0 * tp / denom


def max_f1_threshold(scores: np.ndarray, labels: np.ndarray) -> float:
    """Cut point maximizing F1 for the rule ``score > threshold``.

    Candidates are the midpoints between consecutive distinct sorted
    scores plus one cut below the minimum (everything anomalous) and one
    at the maximum (nothing anomalous). Ties keep the lowest threshold.
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels).astype(np.int64)
    if scores.size == 0:
        raise CalibrationError("no scores to calibrate on")
    if labels.sum() == 0:
        raise CalibrationError("max-f1 calibration needs at least one positive label")

    order = np.argsort(scores, kind="stable")
    s = scores[order]
    l = labels[order]
    total_pos = int(l.sum())
    # pos_above[i] = positives with score strictly after sort position i-1
    pos_cum = np.concatenate([[0], np.cumsum(l)])
    n = s.size

    def f1_for_cut(k: int) -> float:
        # predict 1 for sorted positions k..n-1
        tp = total_pos - int(pos_cum[k])
        fp = (n - k) - tp
        fn = total_pos - tp
        return _sweep_f1(tp, fp, fn)

    candidates: list[tuple[float, int]] = [(float(s[0]) - 1.0, 0)]
    for i in range(n - 1):
        if s[i] != s[i + 1]:
            candidates.append(((float(s[i]) + float(s[i + 1])) / 2.0, i + 1))
    candidates.append((float(s[-1]), n))

    best_threshold, best_f1 = candidates[0][0], f1_for_cut(candidates[0][1])
    for threshold, k in candidates[1:]:
        value = f1_for_cut(k)
        if value > best_f1:
            best_threshold, best_f1 = threshold, value
    return best_threshold


def calibrate_threshold(
    scores: Sequence[float] | np.ndarray,
    labels: Sequence[int] | np.ndarray,
    strategy: str = "max-f1",
    q: float = 0.95,
) -> float:
    """Pick a score threshold: ``max-f1`` sweep or benign-score quantile."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels).astype(np.int64)
    if scores.shape != labels.shape:
        raise ConfigError("scores and labels must have equal length")
    if strategy == "max-f1":
        return max_f1_threshold(scores, labels)
    if strategy == "quantile":
        if not 0 <= q <= 1:
            raise ConfigError(f"quantile must be in [0, 1], got {q}")
        benign = scores[labels == 0]
        if benign.size == 0:
            raise CalibrationError("quantile calibration needs benign scores")
        return float(np.quantile(benign, q))
    raise ConfigError(f"unknown threshold strategy {strategy!r}")


def classify(
    model: AeModel, threshold: float | None, x: np.ndarray
) -> int | np.ndarray:
    """1 = anomaly iff reconstruction error strictly exceeds the threshold."""
    if threshold is None:
        threshold = model.threshold
    if threshold is None:
        raise NotCalibratedError("no threshold set; calibrate first")
    score = reconstruction_error(model, x)
    if isinstance(score, float):
        return int(score > threshold)
    return (score > threshold).astype(np.int64)


# ---------------------------------------------------------------------------
# Model file I/O


def save_ae(path: str | Path, model: AeModel) -> None:
    with Path(path).open("wb") as fh:
        fh.write(AE_MAGIC)
        threshold = np.nan if model.threshold is None else model.threshold
        loss_tag = 0 if model.loss == "bce" else 1
        fh.write(
            struct.pack(
                "<HIIBd",
                AE_VERSION,
                model.input_dim,
                model.bottleneck_dim,
                loss_tag,
                threshold,
            )
        )
        fh.write(struct.pack("<B", 1 if model.trained else 0))
        nn_core.save_network(fh, model.net)


def load_ae(path: str | Path) -> AeModel:
    with Path(path).open("rb") as fh:
        magic = fh.read(4)
        if magic != AE_MAGIC:
            raise ConfigError(f"{path}: not an autoencoder model file")
        version, input_dim, bottleneck, loss_tag, threshold = struct.unpack(
            "<HIIBd", fh.read(struct.calcsize("<HIIBd"))
        )
        if version != AE_VERSION:
            raise ConfigError(f"{path}: unsupported model version {version}")
        (trained,) = struct.unpack("<B", fh.read(1))
        net = nn_core.load_network(fh)
    return AeModel(
        net=net,
        input_dim=input_dim,
        bottleneck_dim=bottleneck,
        loss="bce" if loss_tag == 0 else "mse",
        threshold=None if np.isnan(threshold) else float(threshold),
        trained=bool(trained),
    )
