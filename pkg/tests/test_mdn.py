"""Network forward pass, mixture constraints, densities, and sampling."""

import math

import numpy as np
import pytest
from scipy import stats

from chanmdn.errors import ConfigError
from chanmdn.mdn import (
    SIGMA_FLOOR,
    Architecture,
    MixtureParams,
    NetworkWeights,
    forward,
    init_weights,
    mixture_cdf,
    mixture_logpdf,
    mixture_pdf,
    nll_loss,
    sample_mixture,
    to_mixture,
)

from helpers import bias_only_net, sigma_raw_for

TINY = Architecture(num_layers=2, num_units=4, m_c=3)


def random_mixture(rng, m=None) -> MixtureParams:
    m = m or int(rng.integers(1, 9))
    alphas = rng.dirichlet(np.ones(m))
    return MixtureParams(
        alphas=alphas,
        mus=rng.normal(0.0, 2.0, m),
        sigmas=rng.uniform(0.05, 1.5, m),
    )


class TestInit:
    def test_deterministic(self):
        a = init_weights(TINY, seed=9)
        b = init_weights(TINY, seed=9)
        for (wa, ba), (wb, bb) in zip(a.layers, b.layers):
            assert np.array_equal(wa, wb) and np.array_equal(ba, bb)

    def test_hidden_std_matches_fan_in(self):
        arch = Architecture(num_layers=3, num_units=64, m_c=8)
        for layer_index in (1, 2):  # 64-unit fan-in layers
            stds = []
            for seed in range(10):
                w = init_weights(arch, seed).layers[layer_index][0]
                stds.append(w.std())
            target = math.sqrt(2.0 / 64)
            assert abs(np.mean(stds) - target) < 0.1 * target

    def test_output_layout(self):
        w = init_weights(Architecture(), seed=0)
        assert w.layers[-1][1].shape == (24,)  # 3 * m_c for m_c = 8
        assert w.layers[-1][0].shape == (24, 256)
        w.validate()

    def test_output_layer_damped(self):
        w = init_weights(Architecture(num_layers=2, num_units=64, m_c=4), seed=3)
        hidden_std = w.layers[1][0].std()
        out_std = w.layers[-1][0].std()
        assert out_std < 0.05 * hidden_std


class TestForward:
    def test_zero_weights_zero_output(self):
        w = bias_only_net(TINY, np.zeros(3), np.zeros(3), np.zeros(3))
        raw = forward(w, 0.37)
        assert np.all(raw.alpha_logits == 0)
        assert np.all(raw.mu_raw == 0) and np.all(raw.sigma_raw == 0)

    def test_deterministic(self):
        w = init_weights(TINY, seed=1)
        a = forward(w, 0.5)
        b = forward(w, 0.5)
        assert np.array_equal(a.mu_raw, b.mu_raw)
        assert np.array_equal(a.alpha_logits, b.alpha_logits)

    def test_matches_hand_rolled_matrix_oracle(self):
        arch = Architecture(num_layers=2, num_units=4, m_c=2)
        w = init_weights(arch, seed=7)
        rng = np.random.default_rng(0)
        for wi, bi in w.layers:
            wi += rng.normal(0, 0.5, wi.shape)
            bi += rng.normal(0, 0.5, bi.shape)
        x = 0.62
        # independent forward pass, plain loops
        act = np.array([x])
        for wi, bi in w.layers[:-1]:
            act = np.maximum(wi @ act + bi, 0.0)
        expected = w.layers[-1][0] @ act + w.layers[-1][1]
        raw = forward(w, x)
        got = np.concatenate([raw.alpha_logits, raw.mu_raw, raw.sigma_raw])
        assert np.allclose(got, expected, atol=1e-12, rtol=0)

    def test_wrong_shapes_rejected(self):
        w = init_weights(TINY, seed=1)
        w.layers[1] = (w.layers[1][0][:, :-1], w.layers[1][1])
        with pytest.raises(ConfigError):
            w.validate()


class TestToMixture:
    def test_equal_logits_uniform(self):
        arch = Architecture(num_layers=1, num_units=2, m_c=8)
        raw = forward(bias_only_net(arch, np.ones(8), np.zeros(8), np.zeros(8)), 0.1)
        p = to_mixture(raw)
        assert np.allclose(p.alphas, 1.0 / 8, rtol=0, atol=1e-15)

    def test_softplus_at_zero(self):
        raw = forward(bias_only_net(TINY, np.zeros(3), np.zeros(3), np.zeros(3)), 0.1)
        p = to_mixture(raw)
        assert np.allclose(p.sigmas, math.log(2.0) + 1e-6, rtol=1e-12)

    def test_extreme_logit_stable(self):
        logits = np.array([1000.0, 0.0, 0.0])
        raw = forward(bias_only_net(TINY, logits, np.zeros(3), np.zeros(3)), 0.1)
        p = to_mixture(raw)
        assert np.isfinite(p.alphas).all()
        assert p.alphas[0] == pytest.approx(1.0, rel=1e-12)

    def test_simplex_and_floor_invariants(self):
        rng = np.random.default_rng(4)
        for _ in range(200):
            arch = Architecture(num_layers=1, num_units=2, m_c=int(rng.integers(1, 9)))
            m = arch.m_c
            raw = forward(
                bias_only_net(arch, rng.normal(0, 5, m), rng.normal(0, 5, m),
                              rng.normal(0, 5, m)),
                0.3,
            )
            p = to_mixture(raw)
            assert abs(p.alphas.sum() - 1.0) <= 1e-12
            assert np.all(p.alphas >= 0)
            assert np.all(p.sigmas >= SIGMA_FLOOR)

    def test_exp_transform(self):
        raw = forward(bias_only_net(TINY, np.zeros(3), np.zeros(3), np.zeros(3)), 0.1)
        p = to_mixture(raw, sigma_transform="exp")
        assert np.allclose(p.sigmas, 1.0 + 1e-6, rtol=1e-12)


class TestMixturePdf:
    def test_standard_normal_peak(self):
        p = MixtureParams(np.array([1.0]), np.array([0.0]), np.array([1.0]))
        assert mixture_pdf(p, 0.0) == pytest.approx(0.3989423, abs=1e-7)

    def test_duplicate_components_degenerate(self):
        single = MixtureParams(np.array([1.0]), np.array([0.4]), np.array([0.3]))
        double = MixtureParams(np.array([0.5, 0.5]), np.array([0.4, 0.4]),
                               np.array([0.3, 0.3]))
        xs = np.linspace(-2, 3, 50)
        assert np.allclose(mixture_pdf(single, xs), mixture_pdf(double, xs),
                           rtol=1e-12)

    def test_integrates_to_one(self):
        rng = np.random.default_rng(12)
        for _ in range(25):
            p = random_mixture(rng)
            lo = p.mus.min() - 10 * p.sigmas.max()
            hi = p.mus.max() + 10 * p.sigmas.max()
            xs = np.linspace(lo, hi, 20001)
            total = np.trapezoid(mixture_pdf(p, xs), xs)
            assert abs(total - 1.0) <= 1e-6


class TestMixtureCdf:
    def test_median_of_single_component(self):
        p = MixtureParams(np.array([1.0]), np.array([1.7]), np.array([0.4]))
        assert mixture_cdf(p, 1.7) == pytest.approx(0.5, rel=1e-12)

    def test_far_left_tail(self):
        rng = np.random.default_rng(3)
        p = random_mixture(rng)
        x = p.mus.min() - 50 * p.sigmas.max()
        assert mixture_cdf(p, x) < 1e-12

    def test_matches_pdf_quadrature(self):
        rng = np.random.default_rng(8)
        p = random_mixture(rng)
        lo = p.mus.min() - 12 * p.sigmas.max()
        hi = p.mus.max() + 2 * p.sigmas.max()
        xs = np.linspace(lo, hi, 200001)
        pdf = mixture_pdf(p, xs)
        dx = xs[1] - xs[0]
        cum = np.concatenate([[0.0], np.cumsum((pdf[1:] + pdf[:-1]) * 0.5 * dx)])
        for frac in (0.25, 0.5, 0.75, 1.0):
            idx = int((xs.size - 1) * frac)
            assert abs(mixture_cdf(p, xs[idx]) - cum[idx]) < 1e-8

    def test_monotone(self):
        rng = np.random.default_rng(21)
        p = random_mixture(rng)
        xs = np.linspace(-10, 10, 500)
        cdf = mixture_cdf(p, xs)
        assert np.all(np.diff(cdf) >= 0)


class TestNllLoss:
    def test_single_component_at_target(self):
        x_target = 0.73
        w = bias_only_net(
            Architecture(num_layers=1, num_units=2, m_c=1),
            np.array([0.0]), np.array([x_target]),
            np.array([sigma_raw_for(1.0)]),
        )
        loss = nll_loss(w, np.array([0.5]), np.array([x_target]))
        assert loss == pytest.approx(0.5 * math.log(2 * math.pi), rel=1e-10)
        assert loss == pytest.approx(0.9189385, abs=1e-7)

    def test_duplicated_batch_invariance(self):
        w = init_weights(TINY, seed=6)
        x = np.array([0.2, 0.8, 0.5])
        y = np.array([0.1, 0.9, 0.4])
        base = nll_loss(w, x, y)
        doubled = nll_loss(w, np.tile(x, 2), np.tile(y, 2))
        assert doubled == pytest.approx(base, rel=1e-12)

    def test_composition_oracle(self):
        # direct route: mean of -log(pdf) built from the public pieces
        w = init_weights(TINY, seed=13)
        rng = np.random.default_rng(13)
        for wi, bi in w.layers:
            wi += rng.normal(0, 0.4, wi.shape)
            bi += rng.normal(0, 0.4, bi.shape)
        x = rng.uniform(0.1, 1.0, 5)
        y = rng.normal(0.5, 0.4, 5)
        direct = -np.mean(
            [math.log(mixture_pdf(to_mixture(forward(w, xi)), yi))
             for xi, yi in zip(x, y)]
        )
        assert nll_loss(w, x, y) == pytest.approx(direct, rel=1e-10)

    def test_empty_batch_rejected(self):
        w = init_weights(TINY, seed=1)
        with pytest.raises(ValueError):
            nll_loss(w, np.array([]), np.array([]))


class TestSampleMixture:
    def test_one_hot_component(self):
        p = MixtureParams(np.array([0.0, 1.0, 0.0]), np.array([-5.0, 2.0, 5.0]),
                          np.array([0.5, 0.25, 0.5]))
        rng = np.random.default_rng(17)
        n = 10**5
        draws = sample_mixture(p, rng, size=n)
        assert abs(draws.mean() - 2.0) < 3 * 0.25 / math.sqrt(n)
        assert np.all(np.abs(draws - 2.0) < 2.5)  # never the other components

    def test_sigma_floor_degenerate(self):
        p = MixtureParams(np.array([0.5, 0.5]), np.array([1.0, 3.0]),
                          np.array([SIGMA_FLOOR, SIGMA_FLOOR]))
        rng = np.random.default_rng(2)
        draws = sample_mixture(p, rng, size=1000)
        near = np.minimum(np.abs(draws - 1.0), np.abs(draws - 3.0))
        assert np.all(near < 1e-4)

    def test_ks_against_cdf(self):
        rng = np.random.default_rng(23)
        p = random_mixture(rng, m=5)
        draws = sample_mixture(p, np.random.default_rng(24), size=10**5)
        res = stats.kstest(draws, lambda q: mixture_cdf(p, q))
        assert res.pvalue > 0.01


class TestLogpdfStability:
    def test_log_space_evaluation(self):
        p = MixtureParams(np.array([1.0]), np.array([0.0]), np.array([1.0]))
        # far in the tail: pdf underflows but logpdf stays finite
        lp = mixture_logpdf(p, 60.0)
        assert np.isfinite(lp)
        assert lp == pytest.approx(-0.5 * math.log(2 * math.pi) - 1800.0, rel=1e-12)
