"""Variational autoencoder: heads, sampling, KL, training, generation."""

import numpy as np
import pytest

from insiderkit import features
from insiderkit.errors import ConfigError, NotTrainedError
from insiderkit.nn_core import TrainConfig
from insiderkit.vae import (
    build_vae,
    copy_model,
    decode,
    encode,
    generate,
    kl_divergence,
    load_vae,
    lr_finder_vae,
    reparameterize,
    save_vae,
    train_vae,
    vae_batch_loss,
    vae_grads,
    vae_parameters,
    vae_score,
)


def _zeroed(model):
    for p in vae_parameters(model):
        p[:] = 0.0
    return model


class TestEncode:
    def test_default_heads_have_latent_dim_two(self):
        model = build_vae(50)
        mu, logvar = encode(model, np.zeros(50))
        assert mu.shape == (2,)
        assert logvar.shape == (2,)
        assert model.mu_head.sizes == [50, 2]
        assert model.logvar_head.sizes == [50, 2]

    def test_zero_weights_give_standard_normal_parameters(self):
        model = _zeroed(build_vae(10, latent_dim=3, seed=1))
        mu, logvar = encode(model, np.ones(10))
        assert np.array_equal(mu, np.zeros(3))
        assert np.array_equal(logvar, np.zeros(3))  # sigma = 1

    def test_encode_is_deterministic(self):
        model = build_vae(12, seed=4)
        x = (np.random.default_rng(0).random(12) < 0.3).astype(float)
        a = encode(model, x)
        b = encode(model, x)
        assert np.array_equal(a[0], b[0])
        assert np.array_equal(a[1], b[1])

    def test_trunk_mirrors_autoencoder_encoder_by_default(self):
        model = build_vae(20)
        assert model.trunk.sizes == [20, 40, 20]
        assert model.decoder.sizes == [2, 20, 40, 20]
        assert model.decoder.layers[-1].activation == "sigmoid"


class TestReparameterize:
    def test_zero_noise_returns_the_mean(self):
        mu = np.array([0.5, -1.0])
        logvar = np.array([0.3, 0.7])
        assert np.array_equal(reparameterize(mu, logvar, np.zeros(2)), mu)

    def test_unit_gaussian_passes_noise_through(self):
        eps = np.array([1.3, -0.2])
        z = reparameterize(np.zeros(2), np.zeros(2), eps)
        assert np.array_equal(z, eps)

    def test_sample_moments_match_mu_and_sigma_squared(self):
        """Monte-Carlo mean/variance agree with (mu, sigma^2) within 3 SE."""
        n = 100_000
        mu = np.array([0.7, -1.2])
        logvar = np.array([0.4, -0.6])
        sigma2 = np.exp(logvar)
        eps = np.random.default_rng(3).standard_normal((n, 2))
        z = reparameterize(np.tile(mu, (n, 1)), np.tile(logvar, (n, 1)), eps)
        se_mean = np.sqrt(sigma2 / n)
        assert np.all(np.abs(z.mean(axis=0) - mu) < 3 * se_mean)
        se_var = sigma2 * np.sqrt(2.0 / n)
        assert np.all(np.abs(z.var(axis=0) - sigma2) < 3 * se_var)

    def test_affine_in_the_noise(self):
        rng = np.random.default_rng(9)
        mu = rng.normal(size=4)
        logvar = rng.normal(size=4)
        e1, e2 = rng.normal(size=4), rng.normal(size=4)
        lhs = (
            reparameterize(mu, logvar, e1)
            + reparameterize(mu, logvar, e2)
            - reparameterize(mu, logvar, np.zeros(4))
        )
        rhs = reparameterize(mu, logvar, e1 + e2)
        assert np.allclose(lhs, rhs, atol=1e-12)

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ConfigError):
            reparameterize(np.zeros(2), np.zeros(3), np.zeros(2))


class TestKlDivergence:
    def test_standard_normal_has_zero_divergence(self):
        assert kl_divergence(np.zeros(2), np.zeros(2)) == 0.0

    def test_unit_mean_shift_costs_one_half(self):
        # 0.5 * (1^2 + 1 - 1 - 0) = 0.5 for the shifted dim, 0 for the other
        assert kl_divergence(np.array([1.0, 0.0]), np.zeros(2)) == pytest.approx(0.5)

    def test_nonnegative_everywhere_and_zero_only_at_the_prior(self):
        rng = np.random.default_rng(12)
        for _ in range(200):
            mu = rng.normal(scale=2.0, size=3)
            logvar = rng.normal(scale=1.5, size=3)
            value = kl_divergence(mu, logvar)
            assert value >= 0.0
            if not np.allclose(mu, 0) or not np.allclose(logvar, 0):
                assert value > 0.0

    def test_matches_monte_carlo_within_one_percent(self):
        """Antithetic MC estimate of E[log q - log p] vs the closed form."""
        rng = np.random.default_rng(42)
        for _ in range(20):
            k = 4
            mu = rng.uniform(1.0, 2.5, size=k) * rng.choice([-1.0, 1.0], size=k)
            logvar = rng.uniform(-1.0, 1.0, size=k)
            closed = kl_divergence(mu, logvar)
            half = rng.standard_normal((50_000, k))
            eps = np.concatenate([half, -half])
            z = mu + np.exp(0.5 * logvar) * eps
            mc = float(np.mean(np.sum(-0.5 * logvar - 0.5 * eps**2 + 0.5 * z**2, axis=1)))
            assert abs(closed - mc) / abs(closed) < 0.01

    def test_batch_input_gives_per_row_values(self):
        mu = np.array([[0.0, 0.0], [1.0, 0.0]])
        logvar = np.zeros((2, 2))
        values = kl_divergence(mu, logvar)
        assert values.shape == (2,)
        assert values[0] == 0.0
        assert values[1] == pytest.approx(0.5)


class TestGradients:
    def test_full_loss_gradient_matches_finite_differences(self):
        model = build_vae(38, latent_dim=2, hidden=[8], seed=2)
        rng = np.random.default_rng(1)
        X = (rng.random((3, 38)) < 0.12).astype(float)
        eps = rng.standard_normal((3, 2))
        _, grads = vae_grads(model, X, eps)
        params = vae_parameters(model)
        h = 1e-5
        worst = 0.0
        for p, g in zip(params, grads):
            flat, gflat = p.ravel(), np.asarray(g).ravel()
            for i in range(flat.size):
                orig = flat[i]
                flat[i] = orig + h
                hi = vae_batch_loss(model, X, eps)
                flat[i] = orig - h
                lo = vae_batch_loss(model, X, eps)
                flat[i] = orig
                fd = (hi - lo) / (2 * h)
                worst = max(worst, abs(gflat[i] - fd) / max(abs(gflat[i]), abs(fd), 1e-4))
        assert worst <= 1e-4


class TestTrainVae:
    def test_default_epochs_and_batch(self):
        from insiderkit.vae import default_train_config

        cfg = default_train_config()
        assert cfg.epochs == 1000
        assert cfg.batch_size == 128

    def test_zero_kl_weight_toy_reconstruction_improves(self):
        X = np.zeros((60, 12))
        X[:, [1, 5, 9]] = 1.0
        model = build_vae(12, latent_dim=2, seed=3, kl_weight=0.0)
        cfg = TrainConfig(epochs=60, batch_size=60, lr=0.02, seed=0)
        train_vae(model, X, cfg)
        assert model.history[-1] < model.history[0]
        assert model.trained

    def test_fixed_seed_reproduces_the_loss_history(self):
        X = (np.random.default_rng(4).random((40, 10)) < 0.3).astype(float)
        histories = []
        for _ in range(2):
            model = build_vae(10, latent_dim=2, seed=6)
            cfg = TrainConfig(epochs=5, batch_size=16, lr=0.01, seed=11)
            train_vae(model, X, cfg)
            histories.append(model.history)
        assert histories[0] == histories[1]

    def test_history_length_equals_epochs(self):
        X = np.ones((10, 6))
        model = build_vae(6, seed=1)
        train_vae(model, X, TrainConfig(epochs=3, batch_size=4, lr=0.01, seed=0))
        assert len(model.history) == 3

    def test_wrong_width_rejected(self):
        model = build_vae(8)
        with pytest.raises(ConfigError):
            train_vae(model, np.zeros((4, 7)))


class TestVaeScore:
    def _trained(self, seed=0):
        X = (np.random.default_rng(seed).random((80, 10)) < 0.25).astype(float)
        model = build_vae(10, latent_dim=2, seed=seed)
        train_vae(model, X, TrainConfig(epochs=8, batch_size=16, lr=0.01, seed=seed))
        return model, X

    def test_mean_mode_equals_decoded_mean_plus_kl(self):
        from insiderkit.nn_core import per_example_loss

        model, X = self._trained()
        x = X[0]
        score = vae_score(model, x, n_samples=0)
        mu, logvar = encode(model, x)
        recon = per_example_loss(decode(model, mu), x, "bce")[0]
        assert score == pytest.approx(recon + model.kl_weight * kl_divergence(mu, logvar))

    def test_untrained_model_rejected(self):
        model = build_vae(10)
        with pytest.raises(NotTrainedError):
            vae_score(model, np.zeros(10))

    def test_deterministic_given_the_seed(self):
        model, X = self._trained()
        a = vae_score(model, X, n_samples=3, seed=5)
        b = vae_score(model, X, n_samples=3, seed=5)
        assert np.array_equal(a, b)

    def test_variance_shrinks_with_more_samples(self):
        """Averaging more latent draws reduces score variance."""
        model, X = self._trained(seed=2)
        x = X[0]

        def spread(n_samples):
            values = [vae_score(model, x, n_samples=n_samples, seed=s) for s in range(40)]
            return np.var(values)

        assert spread(16) < spread(1)

    def test_negative_sample_count_rejected(self):
        model, _ = self._trained()
        with pytest.raises(ConfigError):
            vae_score(model, np.zeros(10), n_samples=-1)


class TestGenerate:
    def test_fixed_latent_point_is_deterministic(self):
        model, _ = TestVaeScore()._trained(seed=3)
        z = np.array([0.3, -0.8])
        assert np.array_equal(generate(model, z), generate(model, z))

    def test_zero_weight_model_emits_all_halves(self):
        model = _zeroed(build_vae(10, latent_dim=2, seed=0))
        out = generate(model, np.zeros(2))
        assert np.allclose(out, 0.5)

    def test_outputs_lie_in_the_open_unit_interval(self):
        model, _ = TestVaeScore()._trained(seed=4)
        samples = generate(model, n=20, seed=9)
        assert samples.shape == (20, 10)
        assert np.all(samples > 0) and np.all(samples < 1)

    def test_latent_width_checked(self):
        model = build_vae(10, latent_dim=2)
        with pytest.raises(ConfigError):
            generate(model, np.zeros(3))

    def test_samples_decode_to_valid_events_after_training(self):
        """>= 80% of prior draws threshold to a one-bit-per-field vector."""
        events = [
            features.EncodedEvent(day=d, time=t, activity_code=a)
            for d, t, a in [(0, 9, 1), (1, 10, 7), (2, 11, 5), (3, 9, 7), (4, 10, 1)]
        ]
        X, _ = features.vectorize(events * 120, pad=False)
        model = build_vae(38, latent_dim=2, seed=3, kl_weight=0.05)
        train_vae(
            model, X.astype(float),
            TrainConfig(epochs=150, batch_size=128, lr=0.01, seed=1),
        )
        samples = generate(model, n=100, seed=7)
        valid = 0
        for row in (samples > 0.5).astype(np.uint8):
            try:
                features.decode_one_hot(row)
                valid += 1
            except ValueError:
                pass
        assert valid >= 80


class TestLrFinderVae:
    def test_model_is_untouched_and_curve_monotone_range(self):
        X = (np.random.default_rng(6).random((64, 10)) < 0.3).astype(float)
        model = build_vae(10, latent_dim=2, seed=5)
        before = [p.copy() for p in vae_parameters(model)]
        curve, suggested = lr_finder_vae(model, X, 1e-4, 0.5, steps=25, batch_size=32, seed=0)
        for p, q in zip(vae_parameters(model), before):
            assert np.array_equal(p, q)
        assert curve and suggested > 0


class TestModelFile:
    def test_roundtrip(self, tmp_path):
        model = build_vae(14, latent_dim=3, seed=8, kl_weight=0.5)
        model.trained = True
        model.threshold = 0.75
        path = tmp_path / "vae.model"
        save_vae(path, model)
        loaded = load_vae(path)
        assert loaded.latent_dim == 3
        assert loaded.kl_weight == 0.5
        assert loaded.threshold == 0.75
        assert loaded.trained
        for net_a, net_b in (
            (model.trunk, loaded.trunk),
            (model.mu_head, loaded.mu_head),
            (model.logvar_head, loaded.logvar_head),
            (model.decoder, loaded.decoder),
        ):
            for la, lb in zip(net_a.layers, net_b.layers):
                assert np.array_equal(la.W, lb.W)
                assert np.array_equal(la.b, lb.b)

    def test_copy_is_independent(self):
        model = build_vae(6, seed=1)
        clone = copy_model(model)
        clone.trunk.layers[0].W[:] = 99.0
        assert not np.array_equal(model.trunk.layers[0].W, clone.trunk.layers[0].W)
