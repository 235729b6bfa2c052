"""Variational autoencoder: latent-Gaussian encoder, sampling decoder.

The encoder trunk mirrors the autoencoder's encoder (d -> 2d -> d, tanh)
and feeds two parallel linear heads that emit the latent mean and
log-variance, each of ``latent_dim`` units (default 2). Samples are
drawn with the shift-and-scale form z = mu + exp(log_var / 2) * eps,
eps ~ N(0, I), which keeps the draw differentiable. The decoder maps the
latent back through mirrored relu layers to a sigmoid output.

Training minimizes per-example reconstruction BCE plus ``kl_weight``
times the closed-form divergence from the latent prior
KL(N(mu, sigma^2) || N(0, 1)) = 0.5 * sum(mu^2 + sigma^2 - 1 - log sigma^2),
with one fresh eps draw per example per step. Gradients flow through the
sampling via the same shift-and-scale expression.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ConfigError, NotTrainedError, NumericError
from . import nn_core
from .nn_core import Network, TrainConfig

VAE_MAGIC = b"VAE1"
VAE_VERSION = 1

DEFAULT_VAE_EPOCHS = 1000
DEFAULT_VAE_BATCH = 128
DEFAULT_LATENT_DIM = 2


@dataclass
class VaeModel:
    trunk: Network
    mu_head: Network
    logvar_head: Network
    decoder: Network
    input_dim: int
    latent_dim: int
    kl_weight: float = 1.0
    threshold: float | None = None
    trained: bool = False
    history: list[float] = field(default_factory=list)


def build_vae(
    input_dim: int,
    latent_dim: int = DEFAULT_LATENT_DIM,
    hidden: Sequence[int] | None = None,
    seed: int = 0,
    kl_weight: float = 1.0,
) -> VaeModel:
    """Fresh, untrained VAE; trunk hidden sizes default to [2d, d]."""
    if input_dim < 1:
        raise ConfigError(f"input_dim must be >= 1, got {input_dim}")
    if latent_dim < 1:
        raise ConfigError(f"latent_dim must be >= 1, got {latent_dim}")
    d = input_dim
    hidden = list(hidden) if hidden is not None else [2 * d, d]
    if not hidden:
        raise ConfigError("need at least one trunk hidden layer")
    trunk = nn_core.build_network([d] + hidden, ["tanh"] * len(hidden), seed=seed)
    mu_head = nn_core.build_network([hidden[-1], latent_dim], ["identity"], seed=seed + 1)
    logvar_head = nn_core.build_network(
        [hidden[-1], latent_dim], ["identity"], seed=seed + 2
    )
    dec_sizes = [latent_dim] + list(reversed(hidden)) + [d]
    dec_acts = ["relu"] * len(hidden) + ["sigmoid"]
    decoder = nn_core.build_network(dec_sizes, dec_acts, seed=seed + 3)
    return VaeModel(
        trunk=trunk,
        mu_head=mu_head,
        logvar_head=logvar_head,
        decoder=decoder,
        input_dim=d,
        latent_dim=latent_dim,
        kl_weight=kl_weight,
    )


def encode(model: VaeModel, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Deterministic (mu, log_var) for one vector or a batch."""
    h, _ = nn_core.forward(model.trunk, x)
    mu, _ = nn_core.forward(model.mu_head, h)
    logvar, _ = nn_core.forward(model.logvar_head, h)
    return mu, logvar


def reparameterize(mu: np.ndarray, logvar: np.ndarray, eps: np.ndarray) -> np.ndarray:
    """z = mu + exp(log_var / 2) * eps, elementwise."""
    mu = np.asarray(mu, dtype=np.float64)
    logvar = np.asarray(logvar, dtype=np.float64)
    eps = np.asarray(eps, dtype=np.float64)
    if mu.shape != logvar.shape or mu.shape != eps.shape:
        raise ConfigError("mu, log_var and eps must share a shape")
    return mu + np.exp(0.5 * logvar) * eps


def kl_divergence(mu: np.ndarray, logvar: np.ndarray) -> float | np.ndarray:
    """KL(N(mu, sigma^2) || N(0, I)) = 0.5 * sum(mu^2 + sigma^2 - 1 - log sigma^2).

    Summed over latent dimensions; per-row array for batch input.
    """
    mu = np.asarray(mu, dtype=np.float64)
    logvar = np.asarray(logvar, dtype=np.float64)
    if mu.shape != logvar.shape:
        raise ConfigError("mu and log_var must share a shape")
    per_dim = 0.5 * (mu * mu + np.exp(logvar) - 1.0 - logvar)
    total = per_dim.sum(axis=-1)
    return float(total) if total.ndim == 0 else total


def decode(model: VaeModel, z: np.ndarray) -> np.ndarray:
    out, _ = nn_core.forward(model.decoder, z)
    return out


def vae_parameters(model: VaeModel) -> list[np.ndarray]:
    """Live parameter arrays: trunk, mu head, log-var head, decoder."""
    return (
        model.trunk.parameters()
        + model.mu_head.parameters()
        + model.logvar_head.parameters()
        + model.decoder.parameters()
    )


def vae_batch_loss(model: VaeModel, X: np.ndarray, eps: np.ndarray) -> float:
    """Mean total loss (reconstruction BCE + weighted KL) under frozen eps.

    Value-only path used by training diagnostics and gradient oracles.
    """
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    mu, logvar = encode(model, X)
    z = reparameterize(mu, logvar, eps)
    y = decode(model, z)
    recon = nn_core.per_example_loss(y, X, "bce")
    kl = kl_divergence(mu, logvar)
    return float(np.mean(recon + model.kl_weight * kl))


def vae_grads(
    model: VaeModel, X: np.ndarray, eps: np.ndarray
) -> tuple[float, list[np.ndarray]]:
    """Mean total loss and its gradient w.r.t. every parameter.

    Gradient order matches :func:`vae_parameters`. The sampling step is
    differentiated through its shift-and-scale form with eps held fixed.
    """
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    n, k = X.shape
    if model.decoder.layers[-1].activation != "sigmoid":
        raise ConfigError("decoder must end in a sigmoid layer")

    h, trunk_caches = nn_core.forward(model.trunk, X)
    mu, mu_caches = nn_core.forward(model.mu_head, h)
    logvar, lv_caches = nn_core.forward(model.logvar_head, h)
    sigma = np.exp(0.5 * logvar)
    z = mu + sigma * eps
    y, dec_caches = nn_core.forward(model.decoder, z)

    recon = nn_core.per_example_loss(y, X, "bce")
    kl = kl_divergence(mu, logvar)
    loss = float(np.mean(recon + model.kl_weight * kl))
    if not np.isfinite(loss):
        raise NumericError("non-finite loss in sampling autoencoder")

    # Reconstruction path: BCE fused with the sigmoid output layer.
    delta_dec = (y - X) / (n * k)
    dec_grads, dz = nn_core.backprop_from_delta(model.decoder, dec_caches, delta_dec)

    w = model.kl_weight / n
    dmu = dz + w * mu
    dlogvar = dz * eps * 0.5 * sigma + w * 0.5 * (np.exp(logvar) - 1.0)

    # Identity heads: post-activation gradient equals pre-activation gradient.
    mu_grads, dh_mu = nn_core.backprop_from_delta(model.mu_head, mu_caches, dmu)
    lv_grads, dh_lv = nn_core.backprop_from_delta(model.logvar_head, lv_caches, dlogvar)

    delta_trunk = nn_core.output_grad_to_delta(model.trunk, trunk_caches, dh_mu + dh_lv)
    trunk_grads, _ = nn_core.backprop_from_delta(model.trunk, trunk_caches, delta_trunk)

    flat = (
        nn_core.flatten_grads(trunk_grads)
        + nn_core.flatten_grads(mu_grads)
        + nn_core.flatten_grads(lv_grads)
        + nn_core.flatten_grads(dec_grads)
    )
    return loss, flat


def default_train_config(seed: int = 0, lr: float = 1e-3) -> TrainConfig:
    return TrainConfig(
        epochs=DEFAULT_VAE_EPOCHS, batch_size=DEFAULT_VAE_BATCH, lr=lr, seed=seed
    )


def train_vae(model: VaeModel, X: np.ndarray, cfg: TrainConfig | None = None) -> VaeModel:
    """NADAM-train in place; one fresh eps draw per example per step."""
    if cfg is None:
        cfg = default_train_config()
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != model.input_dim:
        raise ConfigError(f"expected (n, {model.input_dim}) training matrix, got {X.shape}")
    n = X.shape[0]
    if n == 0:
        raise ConfigError("training data must be non-empty")

    rng = np.random.default_rng(cfg.seed)
    params = vae_parameters(model)
    state = nn_core.NadamState(lr=cfg.lr, beta1=cfg.beta1, beta2=cfg.beta2, eps=cfg.eps)
    history: list[float] = []
    for epoch in range(cfg.epochs):
        order = rng.permutation(n) if cfg.shuffle else np.arange(n)
        loss_sum = 0.0
        for step, start in enumerate(range(0, n, cfg.batch_size)):
            idx = order[start : start + cfg.batch_size]
            eps = rng.standard_normal((len(idx), model.latent_dim))
            try:
                loss, grads = vae_grads(model, X[idx], eps)
                nn_core.nadam_step(params, grads, state)
            except NumericError as exc:
                raise NumericError(
                    f"diverged at epoch {epoch + 1} step {step + 1}: {exc}"
                ) from None
            loss_sum += loss * len(idx)
        history.append(loss_sum / n)
    model.trained = True
    model.history = history
    return model


def copy_model(model: VaeModel) -> VaeModel:
    return VaeModel(
        trunk=model.trunk.copy(),
        mu_head=model.mu_head.copy(),
        logvar_head=model.logvar_head.copy(),
        decoder=model.decoder.copy(),
        input_dim=model.input_dim,
        latent_dim=model.latent_dim,
        kl_weight=model.kl_weight,
        threshold=model.threshold,
        trained=model.trained,
        history=list(model.history),
    )


def lr_finder_vae(
    model: VaeModel,
    X: np.ndarray,
    lr_min: float,
    lr_max: float,
    steps: int,
    batch_size: int = 128,
    seed: int = 0,
    smoothing: float = 0.98,
    blowup: float = 4.0,
) -> tuple[list[tuple[float, float]], float]:
    """Geometric learning-rate sweep on a throwaway copy of the model.

    Same recipe as :func:`insiderkit.nn_core.lr_finder`: step on rotating
    mini-batches of the full sampling-autoencoder loss, then measure the
    loss on a fixed probe batch (with fixed probe eps) so the curve
    reflects parameter movement only.
    """
    if not 0 < lr_min < lr_max:
        raise ConfigError(f"need 0 < lr_min < lr_max, got {lr_min}, {lr_max}")
    if steps < 1:
        raise ConfigError(f"steps must be >= 1, got {steps}")
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    n = X.shape[0]
    work = copy_model(model)
    params = vae_parameters(work)
    state = nn_core.NadamState(lr=lr_min)
    rng = np.random.default_rng(seed)

    probe = rng.permutation(n)[: min(batch_size, n)]
    probe_x = X[probe]
    probe_eps = rng.standard_normal((probe_x.shape[0], work.latent_dim))

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
        eps = rng.standard_normal((len(idx), work.latent_dim))
        state.lr = float(rate)
        try:
            _, grads = vae_grads(work, X[idx], eps)
            nn_core.nadam_step(params, grads, state)
            loss_val = vae_batch_loss(work, probe_x, probe_eps)
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
    steepest = int(np.argmin(np.diff(smoothed_losses))) + 1
    return curve, curve[steepest][0] / 10.0


def vae_score(
    model: VaeModel, x: np.ndarray, n_samples: int = 1, seed: int = 0
) -> float | np.ndarray:
    """Anomaly score: sampled mean reconstruction BCE plus the KL term.

    ``n_samples=0`` skips sampling and decodes the latent mean directly.
    Deterministic given the seed.
    """
    if not model.trained:
        raise NotTrainedError("model must be trained before scoring")
    if n_samples < 0:
        raise ConfigError(f"n_samples must be >= 0, got {n_samples}")
    single = np.asarray(x).ndim == 1
    X = np.atleast_2d(np.asarray(x, dtype=np.float64))
    mu, logvar = encode(model, X)
    kl = np.atleast_1d(kl_divergence(mu, logvar))
    if n_samples == 0:
        recon = nn_core.per_example_loss(decode(model, mu), X, "bce")
    else:
        rng = np.random.default_rng(seed)
        recon = np.zeros(X.shape[0])
        for _ in range(n_samples):
            eps = rng.standard_normal(mu.shape)
            z = reparameterize(mu, logvar, eps)
            recon += nn_core.per_example_loss(decode(model, z), X, "bce")
        recon /= n_samples
    scores = recon + model.kl_weight * kl
    return float(scores[0]) if single else scores


def generate(
    model: VaeModel, z: np.ndarray | None = None, n: int = 1, seed: int = 0
) -> np.ndarray:
    """Decode a latent point, or ``n`` prior draws when ``z`` is None.

    Outputs lie in (0, 1); thresholding at 0.5 gives a binary pseudo-event.
    """
    if z is None:
        rng = np.random.default_rng(seed)
        z = rng.standard_normal((n, model.latent_dim))
    z = np.asarray(z, dtype=np.float64)
    if z.shape[-1] != model.latent_dim:
        raise ConfigError(
            f"latent width {z.shape[-1]} != model latent_dim {model.latent_dim}"
        )
    return decode(model, z)


# ---------------------------------------------------------------------------
# Model file I/O


def save_vae(path: str | Path, model: VaeModel) -> None:
    with Path(path).open("wb") as fh:
        fh.write(VAE_MAGIC)
        threshold = np.nan if model.threshold is None else model.threshold
        fh.write(
            struct.pack(
                "<HIIddB",
                VAE_VERSION,
                model.input_dim,
                model.latent_dim,
                model.kl_weight,
                threshold,
                1 if model.trained else 0,
            )
        )
        for net in (model.trunk, model.mu_head, model.logvar_head, model.decoder):
            nn_core.save_network(fh, net)


def load_vae(path: str | Path) -> VaeModel:
    with Path(path).open("rb") as fh:
        magic = fh.read(4)
        if magic != VAE_MAGIC:
            raise ConfigError(f"{path}: not a variational model file")
        version, input_dim, latent_dim, kl_weight, threshold, trained = struct.unpack(
            "<HIIddB", fh.read(struct.calcsize("<HIIddB"))
        )
        if version != VAE_VERSION:
            raise ConfigError(f"{path}: unsupported model version {version}")
        trunk = nn_core.load_network(fh)
        mu_head = nn_core.load_network(fh)
        logvar_head = nn_core.load_network(fh)
        decoder = nn_core.load_network(fh)
    return VaeModel(
        trunk=trunk,
        mu_head=mu_head,
        logvar_head=logvar_head,
        decoder=decoder,
        input_dim=input_dim,
        latent_dim=latent_dim,
        kl_weight=kl_weight,
        threshold=None if np.isnan(threshold) else float(threshold),
        trained=bool(trained),
    )
