"""Minimal dense neural-network engine.

Forward pass, backpropagation, BCE/MSE losses, a Nesterov-Adam (NADAM)
optimizer, a learning-rate range finder, and a central finite-difference
gradient oracle for testing. Everything is float64 numpy; batches are
(n, d) row matrices.

Determinism contract: training shuffles and any random draws derive from
a single integer seed, and gradient accumulation is a fixed-order
reduction, so identical seeds give bit-identical trajectories.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import BinaryIO, Iterator, Sequence

import numpy as np

from .errors import ConfigError, NumericError

BCE_CLAMP = 1e-12

ACTIVATIONS = ("tanh", "relu", "sigmoid", "identity")
_ACT_TAG = {name: i for i, name in enumerate(ACTIVATIONS)}


def _apply_activation(name: str, z: np.ndarray) -> np.ndarray:
    if name == "tanh":
        return np.tanh(z)
    if name == "relu":
        return np.maximum(z, 0.0)
    if name == "sigmoid":
        # Split by sign to avoid overflow in exp.
        out = np.empty_like(z)
        pos = z >= 0
        out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
        ez = np.exp(z[~pos])
        out[~pos] = ez / (1.0 + ez)
        return out
    if name == "identity":
        return z
    raise ConfigError(f"unknown activation {name!r}")


def _activation_deriv(name: str, z: np.ndarray, a: np.ndarray) -> np.ndarray:
    """Derivative d a / d z, computed from pre-activation z and output a."""
    if name == "tanh":
        return 1.0 - a * a
    if name == "relu":
        return (z > 0).astype(z.dtype)
    if name == "sigmoid":
        return a * (1.0 - a)
    if name == "identity":
        return np.ones_like(z)
    raise ConfigError(f"unknown activation {name!r}")


@dataclass
class DenseLayer:
    """Affine map plus elementwise activation: a = act(x @ W.T + b)."""

    W: np.ndarray  # (out, in)
    b: np.ndarray  # (out,)
    activation: str

    def __post_init__(self) -> None:
        self.W = np.asarray(self.W, dtype=np.float64)
        self.b = np.asarray(self.b, dtype=np.float64)
        if self.W.ndim != 2 or self.b.ndim != 1 or self.W.shape[0] != self.b.shape[0]:
            raise ConfigError(
                f"inconsistent layer shapes W{self.W.shape} b{self.b.shape}"
            )
        if self.activation not in ACTIVATIONS:
            raise ConfigError(f"unknown activation {self.activation!r}")
        if not (np.isfinite(self.W).all() and np.isfinite(self.b).all()):
            raise NumericError("layer parameters must be finite")

    @property
    def n_in(self) -> int:
        return self.W.shape[1]

    @property
    def n_out(self) -> int:
        return self.W.shape[0]

    def copy(self) -> "DenseLayer":
        return DenseLayer(self.W.copy(), self.b.copy(), self.activation)


@dataclass
class Network:
    """Ordered dense layers with compatible dimensions."""

    layers: list[DenseLayer]

    def __post_init__(self) -> None:
        for prev, nxt in zip(self.layers, self.layers[1:]):
            if prev.n_out != nxt.n_in:
                raise ConfigError(
                    f"layer size mismatch: {prev.n_out} -> {nxt.n_in}"
                )

    @property
    def sizes(self) -> list[int]:
        """Unit counts per level, input first."""
        return [self.layers[0].n_in] + [layer.n_out for layer in self.layers]

    def parameters(self) -> list[np.ndarray]:
        """Flat parameter list [W1, b1, W2, b2, ...] (live references)."""
        params: list[np.ndarray] = []
        for layer in self.layers:
            params.append(layer.W)
            params.append(layer.b)
        return params

    def copy(self) -> "Network":
        return Network([layer.copy() for layer in self.layers])


def glorot_uniform(n_in: int, n_out: int, rng: np.random.Generator) -> np.ndarray:
    limit = np.sqrt(6.0 / (n_in + n_out))
    return rng.uniform(-limit, limit, size=(n_out, n_in))


def dense(n_in: int, n_out: int, activation: str, rng: np.random.Generator) -> DenseLayer:
    """Glorot-initialized layer with zero bias."""
    return DenseLayer(glorot_uniform(n_in, n_out, rng), np.zeros(n_out), activation)


def build_network(
    sizes: Sequence[int], activations: Sequence[str], seed: int = 0
) -> Network:
    """Network from a size chain [d0, d1, ...] and per-layer activations."""
    if len(activations) != len(sizes) - 1:
        raise ConfigError("need one activation per layer")
    rng = np.random.default_rng(seed)
    layers = [
        dense(sizes[i], sizes[i + 1], activations[i], rng)
        for i in range(len(sizes) - 1)
    ]
    return Network(layers)


# ---------------------------------------------------------------------------
# Forward / backward


def _as_batch(x: np.ndarray) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        return x.reshape(1, -1), True
    if x.ndim == 2:
        return x, False
    raise ConfigError(f"expected 1-D or 2-D input, got ndim={x.ndim}")


def forward(net: Network, x: np.ndarray) -> tuple[np.ndarray, list[tuple]]:
    """Run the network; also return per-layer (input, pre-act, post-act).

    Accepts a single vector or an (n, d) batch; output matches the input
    arity. The cache list feeds :func:`backprop_from_delta`.
    """
    batch, squeeze = _as_batch(x)
    if batch.shape[1] != net.layers[0].n_in:
        raise ConfigError(
            f"input width {batch.shape[1]} != network input {net.layers[0].n_in}"
        )
    caches = []
    a = batch
    for layer in net.layers:
        z = a @ layer.W.T + layer.b
        a_next = _apply_activation(layer.activation, z)
        caches.append((a, z, a_next))
        a = a_next
    return (a[0] if squeeze else a), caches


def per_example_loss(Y: np.ndarray, T: np.ndarray, loss: str) -> np.ndarray:
    """Per-row loss, averaged over output dimensions."""
    Y, _ = _as_batch(Y)
    T, _ = _as_batch(T)
    if loss == "mse":
        return np.mean((Y - T) ** 2, axis=1)
    if loss == "bce":
        Yc = np.clip(Y, BCE_CLAMP, 1.0 - BCE_CLAMP)
        return -np.mean(T * np.log(Yc) + (1.0 - T) * np.log(1.0 - Yc), axis=1)
    raise ConfigError(f"unknown loss {loss!r}")


def batch_loss(net: Network, X: np.ndarray, T: np.ndarray, loss: str) -> float:
    """Mean loss over the batch; forward pass only (no gradients)."""
    Y, _ = forward(net, X)
    Y, _ = _as_batch(Y)
    return float(np.mean(per_example_loss(Y, T, loss)))


def _check_bce_preconditions(net: Network, T: np.ndarray, loss: str) -> None:
    if loss != "bce":
        return
    if net.layers[-1].activation != "sigmoid":
        raise ConfigError("bce loss requires a sigmoid output layer")
    if np.any(T < 0) or np.any(T > 1):
        raise ConfigError("bce targets must lie in [0, 1]")


def output_delta(Y: np.ndarray, Z: np.ndarray, T: np.ndarray, loss: str, activation: str) -> np.ndarray:
    """Gradient of the mean batch loss w.r.t. the last pre-activation."""
    n, k = Y.shape
    if loss == "bce":
        # Fused with the sigmoid output layer.
        return (Y - T) / (n * k)
    if loss == "mse":
        dY = 2.0 * (Y - T) / (n * k)
        return dY * _activation_deriv(activation, Z, Y)
    raise ConfigError(f"unknown loss {loss!r}")


def backprop_from_delta(
    net: Network, caches: list[tuple], delta: np.ndarray
) -> tuple[list[tuple[np.ndarray, np.ndarray]], np.ndarray]:
    """Backpropagate a last-layer pre-activation gradient.

    Returns per-layer (dW, db) in layer order plus the gradient with
    respect to the network input.
    """
    grads: list[tuple[np.ndarray, np.ndarray]] = []
    for idx in range(len(net.layers) - 1, -1, -1):
        layer = net.layers[idx]
        a_prev, _, _ = caches[idx]
        dW = delta.T @ a_prev
        db = delta.sum(axis=0)
        grads.append((dW, db))
        dx = delta @ layer.W
        if idx > 0:
            _, z_prev, a_prev_out = caches[idx - 1]
            delta = dx * _activation_deriv(
                net.layers[idx - 1].activation, z_prev, a_prev_out
            )
    grads.reverse()
    return grads, dx


def output_grad_to_delta(net: Network, caches: list[tuple], d_out: np.ndarray) -> np.ndarray:
    """Convert a post-activation output gradient into the last pre-activation
    gradient, using the final layer's activation derivative."""
    _, z_last, a_last = caches[-1]
    return d_out * _activation_deriv(net.layers[-1].activation, z_last, a_last)


def backprop(
    net: Network, X: np.ndarray, T: np.ndarray, loss: str = "bce"
) -> tuple[list[tuple[np.ndarray, np.ndarray]], float]:
    """Gradients of the mean batch loss w.r.t. every W and b, plus the loss."""
    X, _ = _as_batch(X)
    T, _ = _as_batch(T)
    if X.shape[0] == 0:
        raise ConfigError("backprop needs a non-empty batch")
    _check_bce_preconditions(net, T, loss)
    Y, caches = forward(net, X)
    Y, _ = _as_batch(Y)
    losses = per_example_loss(Y, T, loss)
    mean_loss = float(np.mean(losses))
    if not np.isfinite(mean_loss):
        bad = int(np.flatnonzero(~np.isfinite(losses))[0]) if losses.size else 0
        raise NumericError(f"non-finite loss at batch index {bad}")
    delta = output_delta(Y, caches[-1][1], T, loss, net.layers[-1].activation)
    grads, _ = backprop_from_delta(net, caches, delta)
    return grads, mean_loss


def fd_gradient(
    net: Network, X: np.ndarray, T: np.ndarray, loss: str = "bce", step: float = 1e-5
) -> list[tuple[np.ndarray, np.ndarray]]:
    """Central finite-difference gradient estimate, parameter by parameter.

    Test oracle only: O(#params) forward passes.
    """
    if step <= 0:
        raise ConfigError(f"finite-difference step must be > 0, got {step}")
    grads = []
    for layer in net.layers:
        dW = np.zeros_like(layer.W)
        db = np.zeros_like(layer.b)
        for arr, darr in ((layer.W, dW), (layer.b, db)):
            flat = arr.ravel()
            dflat = darr.ravel()
            for i in range(flat.size):
                orig = flat[i]
                flat[i] = orig + step
                hi = batch_loss(net, X, T, loss)
                flat[i] = orig - step
                lo = batch_loss(net, X, T, loss)
                flat[i] = orig
                dflat[i] = (hi - lo) / (2.0 * step)
        grads.append((dW, db))
    return grads


def flatten_grads(grads: list[tuple[np.ndarray, np.ndarray]]) -> list[np.ndarray]:
    """[(dW, db), ...] -> [dW1, db1, dW2, db2, ...], matching parameters()."""
    flat: list[np.ndarray] = []
    for dW, db in grads:
        flat.append(dW)
        flat.append(db)
    return flat


# ---------------------------------------------------------------------------
# NADAM optimizer


@dataclass
class NadamState:
    """Per-parameter moment accumulators for the Nesterov-Adam update."""

    lr: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: list[np.ndarray] = field(default_factory=list)
    v: list[np.ndarray] = field(default_factory=list)

    def _ensure(self, params: Sequence[np.ndarray]) -> None:
        if not self.m:
            self.m = [np.zeros_like(p) for p in params]
            self.v = [np.zeros_like(p) for p in params]


def nadam_step(
    params: Sequence[np.ndarray],
    grads: Sequence[np.ndarray],
    state: NadamState,
) -> tuple[Sequence[np.ndarray], NadamState]:
    """One Nesterov-Adam update, in place on the parameter arrays.

    m <- b1*m + (1-b1)*g;  v <- b2*v + (1-b2)*g^2; with bias corrections
    m^ = m/(1-b1^t) and v^ = v/(1-b2^t) the step direction is the
    look-ahead numerator b1*m^ + (1-b1)*g/(1-b1^t), scaled by
    lr / (sqrt(v^) + eps).
    """
    state._ensure(params)
    if len(params) != len(grads) or len(params) != len(state.m):
        raise ConfigError("parameter/gradient count mismatch")
    state.t += 1
    t = state.t
    b1, b2 = state.beta1, state.beta2
    m_corr = 1.0 - b1**t
    v_corr = 1.0 - b2**t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        m_hat = m / m_corr
        v_hat = v / v_corr
        numerator = b1 * m_hat + (1.0 - b1) * g / m_corr
        update = state.lr * numerator / (np.sqrt(v_hat) + state.eps)
        if not np.isfinite(update).all():
            raise NumericError("non-finite optimizer update")
        p -= update
    return params, state


# ---------------------------------------------------------------------------
# Training loop


@dataclass
class TrainConfig:
    """Epochs, batching, learning rate and optimizer hyperparameters."""

    epochs: int
    batch_size: int
    lr: float = 1e-3
    seed: int = 0
    shuffle: bool = True
    loss: str = "bce"
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self) -> None:
        if self.epochs < 1:
            raise ConfigError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.lr <= 0:
            raise ConfigError(f"lr must be > 0, got {self.lr}")
        if self.loss not in ("bce", "mse"):
            raise ConfigError(f"loss must be 'bce' or 'mse', got {self.loss!r}")


def _batches(
    n: int, batch_size: int, rng: np.random.Generator, shuffle: bool
) -> Iterator[np.ndarray]:
    order = rng.permutation(n) if shuffle else np.arange(n)
    for start in range(0, n, batch_size):
        yield order[start : start + batch_size]


def train(
    net: Network, X: np.ndarray, T: np.ndarray, cfg: TrainConfig
) -> tuple[Network, list[float]]:
    """NADAM-train the network in place; returns it plus per-epoch loss.

    Runs epochs * ceil(N / batch_size) optimizer steps with a fresh
    seed-driven shuffle each epoch. The short final batch is kept and
    averaged over its actual size. Epoch loss is the example-weighted
    mean of batch losses.
    """
    X, _ = _as_batch(X)
    T, _ = _as_batch(T)
    n = X.shape[0]
    if n == 0:
        raise ConfigError("training data must be non-empty")
    rng = np.random.default_rng(cfg.seed)
    params = net.parameters()
    state = NadamState(lr=cfg.lr, beta1=cfg.beta1, beta2=cfg.beta2, eps=cfg.eps)
    history: list[float] = []
    for epoch in range(cfg.epochs):
        loss_sum = 0.0
        for step, idx in enumerate(_batches(n, cfg.batch_size, rng, cfg.shuffle)):
            try:
                grads, loss = backprop(net, X[idx], T[idx], cfg.loss)
                nadam_step(params, flatten_grads(grads), state)
            except NumericError as exc:
                raise NumericError(
                    f"diverged at epoch {epoch + 1} step {step + 1}: {exc}"
                ) from None
            loss_sum += loss * len(idx)
        history.append(loss_sum / n)
    return net, history


# ---------------------------------------------------------------------------
# Learning-rate range finder


def lr_finder(
    net: Network,
    X: np.ndarray,
    T: np.ndarray,
    lr_min: float,
    lr_max: float,
    steps: int,
    batch_size: int = 256,
    loss: str = "bce",
    seed: int = 0,
    smoothing: float = 0.98,
    blowup: float = 4.0,
) -> tuple[list[tuple[float, float]], float]:
    """Sweep geometrically increasing learning rates on a throwaway copy.

    One mini-batch NADAM step per rate; after each step the loss on a
    fixed probe batch is measured (so the curve reflects parameter
    movement, not batch composition), exponentially smoothed with bias
    correction, and recorded against the rate just applied. The sweep
    stops early once the loss turns non-finite or exceeds ``blowup``
    times the best smoothed loss so far. Suggested rate = rate at the
    steepest smoothed-loss drop, divided by 10.
    """
    if not 0 < lr_min < lr_max:
        raise ConfigError(f"need 0 < lr_min < lr_max, got {lr_min}, {lr_max}")
    if steps < 1:
        raise ConfigError(f"steps must be >= 1, got {steps}")
    X, _ = _as_batch(X)
    T, _ = _as_batch(T)
    n = X.shape[0]
    work = net.copy()
    params = work.parameters()
    state = NadamState(lr=lr_min)
    rng = np.random.default_rng(seed)

    probe = rng.permutation(n)[: min(batch_size, n)]
    probe_x, probe_t = X[probe], T[probe]

    if steps == 1:
        rates = np.array([lr_min])
    else:
        rates = lr_min * (lr_max / lr_min) ** (np.arange(steps) / (steps - 1))

    curve: list[tuple[float, float]] = []
    ema = 0.0
    best = np.inf
    order = rng.permutation(n)
    cursor = 0
    for i, rate in enumerate(rates):
        if cursor + batch_size > n:
            order = rng.permutation(n)
            cursor = 0
        idx = order[cursor : cursor + min(batch_size, n)]
        cursor += batch_size
        state.lr = float(rate)
        try:
            grads, _ = backprop(work, X[idx], T[idx], loss)
            nadam_step(params, flatten_grads(grads), state)
            loss_val = batch_loss(work, probe_x, probe_t, loss)
        except NumericError:
            break
        if not np.isfinite(loss_val):
            break
        ema = smoothing * ema + (1.0 - smoothing) * loss_val
        smoothed = ema / (1.0 - smoothing ** (i + 1))
        if smoothed > blowup * best and i > 0:
            break
        curve.append((float(rate), float(smoothed)))
        best = min(best, smoothed)

    if not curve:
        raise NumericError("no stable learning rate in range")
    if len(curve) == 1:
        return curve, curve[0][0] / 10.0
    smoothed_losses = np.array([s for _, s in curve])
    drops = np.diff(smoothed_losses)
    steepest = int(np.argmin(drops)) + 1
    return curve, curve[steepest][0] / 10.0


# ---------------------------------------------------------------------------
# Serialization

NETWORK_MAGIC = b"DNW1"
NETWORK_VERSION = 1


def save_network(fh: BinaryIO, net: Network) -> None:
    """Versioned little-endian binary block, embeddable in model files."""
    fh.write(NETWORK_MAGIC)
    fh.write(struct.pack("<HH", NETWORK_VERSION, len(net.layers)))
    for layer in net.layers:
        fh.write(
            struct.pack("<IIB", layer.n_in, layer.n_out, _ACT_TAG[layer.activation])
        )
        fh.write(np.ascontiguousarray(layer.W, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(layer.b, dtype="<f8").tobytes())


def load_network(fh: BinaryIO) -> Network:
    magic = fh.read(4)
    if magic != NETWORK_MAGIC:
        raise ConfigError(f"bad network block magic {magic!r}")
    version, n_layers = struct.unpack("<HH", fh.read(4))
    if version != NETWORK_VERSION:
        raise ConfigError(f"unsupported network block version {version}")
    layers = []
    for _ in range(n_layers):
        n_in, n_out, tag = struct.unpack("<IIB", fh.read(9))
        if tag >= len(ACTIVATIONS):
            raise ConfigError(f"unknown activation tag {tag}")
        W = np.frombuffer(fh.read(8 * n_in * n_out), dtype="<f8").reshape(n_out, n_in)
        b = np.frombuffer(fh.read(8 * n_out), dtype="<f8")
        layers.append(DenseLayer(W.copy(), b.copy(), ACTIVATIONS[tag]))
    return Network(layers)


def save_network_file(path: str | Path, net: Network) -> None:
    with Path(path).open("wb") as fh:
        save_network(fh, net)


def load_network_file(path: str | Path) -> Network:
    with Path(path).open("rb") as fh:
        return load_network(fh)


def write_history_csv(
    path: str | Path, history: Sequence[float], meta: dict[str, object] | None = None
) -> None:
    """Per-epoch loss history as ``epoch,loss`` rows."""
    with Path(path).open("w", encoding="utf-8") as fh:
        if meta:
            parts = " ".join(f"{k}={v}" for k, v in meta.items())
            fh.write(f"# {parts}\n")
        fh.write("epoch,loss\n")
        for i, value in enumerate(history, start=1):
            fh.write(f"{i},{value!r}\n")
