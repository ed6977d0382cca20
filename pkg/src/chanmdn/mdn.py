"""Mixture density network: dense ReLU trunk, Gaussian-mixture head, exact gradients.

The network maps a normalized distance to the parameters of a univariate
Gaussian mixture over log-scaled received power: per component a mixing
logit, a mean, and a raw width.  Mixing coefficients go through an
overflow-safe softmax; widths through softplus (default) or exp, plus a
1e-6 floor.  The training objective is the mean negative log-likelihood,
evaluated fully in log space.

Gradients are reverse-mode and analytic.  The head derivatives follow from
posterior component responsibilities pi_i = alpha_i*phi_i / sum_j alpha_j*phi_j:

    dE/d logit_i  = alpha_i - pi_i
    dE/d mu_i     = pi_i * (mu_i - y) / sigma_i^2
    dE/d sigma_i  = pi_i * (1/sigma_i - (y - mu_i)^2 / sigma_i^3)

Network inputs in a batch are typically drawn from a small distance grid, so
the trunk runs once per unique input and per-sample head gradients are
summed back onto their input group; with all-distinct inputs this reduces to
plain per-sample backprop.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .errors import ConfigError

SIGMA_FLOOR = 1e-6
LOG_2PI = float(np.log(2.0 * np.pi))


@dataclass(frozen=True)
class Architecture:
    num_layers: int = 8
    num_units: int = 256
    m_c: int = 8
    input_dim: int = 1
    sigma_transform: str = "softplus"

    def __post_init__(self):
        if min(self.num_layers, self.num_units, self.m_c) < 1:
            raise ConfigError("layer, unit and component counts must be >= 1")
        if self.input_dim != 1:
            raise ConfigError("only scalar distance input is supported")
        if self.sigma_transform not in ("softplus", "exp"):
            raise ConfigError(f"unknown sigma transform {self.sigma_transform!r}")

    @property
    def output_dim(self) -> int:
        return 3 * self.m_c


@dataclass
class NetworkWeights:
    """Ordered (weight, bias) pairs; weight matrices are out_dim x in_dim."""

    layers: list[tuple[np.ndarray, np.ndarray]]
    arch: Architecture

    def validate(self) -> None:
        arch = self.arch
        dims = [arch.input_dim] + [arch.num_units] * arch.num_layers + [arch.output_dim]
        if len(self.layers) != arch.num_layers + 1:
            raise ConfigError(
                f"expected {arch.num_layers + 1} layers, found {len(self.layers)}"
            )
        for i, (w, b) in enumerate(self.layers):
            if w.shape != (dims[i + 1], dims[i]) or b.shape != (dims[i + 1],):
                raise ConfigError(
                    f"layer {i} has shape {w.shape}/{b.shape}, "
                    f"expected {(dims[i + 1], dims[i])}/{(dims[i + 1],)}"
                )
            if not (np.isfinite(w).all() and np.isfinite(b).all()):
                raise ConfigError(f"layer {i} contains non-finite entries")

    def copy(self) -> "NetworkWeights":
        return NetworkWeights(
            layers=[(w.copy(), b.copy()) for w, b in self.layers], arch=self.arch
        )

    def is_finite(self) -> bool:
        return all(np.isfinite(w).all() and np.isfinite(b).all()
                   for w, b in self.layers)


@dataclass
class RawOutput:
    """Head output for one input, split into the three component vectors."""

    alpha_logits: np.ndarray
    mu_raw: np.ndarray
    sigma_raw: np.ndarray


@dataclass
class MixtureParams:
    """Gaussian mixture coefficients: simplex weights, means, positive widths."""

    alphas: np.ndarray
    mus: np.ndarray
    sigmas: np.ndarray


def init_weights(arch: Architecture, seed: int) -> NetworkWeights:
    """Fan-in scaled ReLU initialization with a damped linear head.

    Hidden weights ~ Normal(0, 2/fan_in); the output layer is shrunk by 100x
    so the initial mixtures stay diffuse; biases start at zero.
    """
    rng = np.random.default_rng(np.random.SeedSequence([seed]))
    dims = [arch.input_dim] + [arch.num_units] * arch.num_layers + [arch.output_dim]
    layers = []
    for i in range(len(dims) - 1):
        fan_in = dims[i]
        std = np.sqrt(2.0 / fan_in)
        if i == len(dims) - 2:
            std *= 0.01
        w = rng.normal(0.0, std, size=(dims[i + 1], fan_in))
        layers.append((w, np.zeros(dims[i + 1])))
    return NetworkWeights(layers=layers, arch=arch)


def _logsumexp(a: np.ndarray, axis: int) -> np.ndarray:
    hi = np.max(a, axis=axis, keepdims=True)
    hi = np.where(np.isfinite(hi), hi, 0.0)
    return np.squeeze(hi, axis) + np.log(np.sum(np.exp(a - hi), axis=axis))


def softplus(x: np.ndarray) -> np.ndarray:
    return np.logaddexp(0.0, x)


def _forward_trunk(weights: NetworkWeights, x: np.ndarray):
    """Run trunk + head on a column of inputs; keeps activations for backprop."""
    act = np.asarray(x, dtype=float).reshape(-1, 1)
    activations = [act]
    pre = []
    for w, b in weights.layers[:-1]:
        z = act @ w.T + b
        act = np.maximum(z, 0.0)
        pre.append(z)
        activations.append(act)
    w_out, b_out = weights.layers[-1]
    raw = act @ w_out.T + b_out
    return raw, pre, activations


def forward(weights: NetworkWeights, d_norm: float) -> RawOutput:
    """Evaluate the network at one normalized distance."""
    raw = _forward_trunk(weights, np.asarray([d_norm]))[0][0]
    m = weights.arch.m_c
    return RawOutput(
        alpha_logits=raw[:m], mu_raw=raw[m : 2 * m], sigma_raw=raw[2 * m :]
    )


def _head_params(raw: np.ndarray, m: int, sigma_transform: str):
    """Raw head rows -> (log_alpha, mu, sigma, dsigma/draw), vectorized."""
    logits = raw[:, :m]
    mu = raw[:, m : 2 * m]
    sig_raw = raw[:, 2 * m :]
    log_alpha = logits - _logsumexp(logits, axis=1)[:, None]
    if sigma_transform == "softplus":
        sigma = softplus(sig_raw) + SIGMA_FLOOR
        dsigma = expit(sig_raw)
    else:
        dsigma = np.exp(sig_raw)
        sigma = dsigma + SIGMA_FLOOR
    return log_alpha, mu, sigma, dsigma


def to_mixture(raw: RawOutput, sigma_transform: str = "softplus") -> MixtureParams:
    """Constrain raw head outputs onto the mixture parameter space."""
    row = np.concatenate([raw.alpha_logits, raw.mu_raw, raw.sigma_raw])[None, :]
    log_alpha, mu, sigma, _ = _head_params(row, raw.alpha_logits.size, sigma_transform)
    return MixtureParams(alphas=np.exp(log_alpha[0]), mus=mu[0], sigmas=sigma[0])


def mixture_at(weights: NetworkWeights, d_norm: float) -> MixtureParams:
    """Mixture parameters the network assigns to one normalized distance."""
    return to_mixture(forward(weights, d_norm), weights.arch.sigma_transform)


def mixture_logpdf(p: MixtureParams, x) -> np.ndarray:
    """Log density of the mixture at query points x (log-sum-exp in log space)."""
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    z = (xs[:, None] - p.mus) / p.sigmas
    comp = -0.5 * LOG_2PI - np.log(p.sigmas) - 0.5 * z**2
    with np.errstate(divide="ignore"):
        out = _logsumexp(np.log(p.alphas) + comp, axis=1)
    return out[0] if np.ndim(x) == 0 else out


def mixture_pdf(p: MixtureParams, x) -> np.ndarray:
    """Density of the mixture at query points x; nonnegative by construction."""
    return np.exp(mixture_logpdf(p, x))


def mixture_cdf(p: MixtureParams, x) -> np.ndarray:
    """Mixture CDF via the Gaussian error function; monotone in x."""
    from scipy.special import ndtr

    xs = np.atleast_1d(np.asarray(x, dtype=float))
    out = (p.alphas * ndtr((xs[:, None] - p.mus) / p.sigmas)).sum(axis=1)
    return float(out[0]) if np.ndim(x) == 0 else out


def sample_mixture(p: MixtureParams, rng: np.random.Generator, size: int | None = None):
    """Ancestral sampling: categorical component choice, then its Gaussian."""
    n = 1 if size is None else size
    edges = np.cumsum(p.alphas)
    comp = np.searchsorted(edges, rng.random(n) * edges[-1], side="right")
    comp = np.minimum(comp, p.alphas.size - 1)
    draws = rng.normal(p.mus[comp], p.sigmas[comp])
    return float(draws[0]) if size is None else draws


def _group_inputs(x: np.ndarray):
    """Deduplicate network inputs so the trunk runs once per distinct value."""
    unique, inverse = np.unique(np.asarray(x, dtype=float), return_inverse=True)
    return unique, inverse


def nll_loss(weights: NetworkWeights, x: np.ndarray, y: np.ndarray) -> float:
    """Mean negative log-likelihood of targets y under the conditional mixtures."""
    if np.size(y) == 0:
        raise ValueError("batch must be nonempty")
    unique, inverse = _group_inputs(x)
    raw = _forward_trunk(weights, unique)[0]
    arch = weights.arch
    log_alpha, mu, sigma, _ = _head_params(raw, arch.m_c, arch.sigma_transform)
    ys = np.asarray(y, dtype=float)
    z = (ys[:, None] - mu[inverse]) / sigma[inverse]
    lp = log_alpha[inverse] - 0.5 * LOG_2PI - np.log(sigma[inverse]) - 0.5 * z**2
    return float(-np.mean(_logsumexp(lp, axis=1)))


def nll_gradient(weights: NetworkWeights, x: np.ndarray, y: np.ndarray):
    """Loss plus its exact gradient in NetworkWeights shape."""
    if np.size(y) == 0:
        raise ValueError("batch must be nonempty")
    arch = weights.arch
    unique, inverse = _group_inputs(x)
    raw, pre, acts = _forward_trunk(weights, unique)
    log_alpha, mu, sigma, dsigma = _head_params(raw, arch.m_c, arch.sigma_transform)
    ys = np.asarray(y, dtype=float)
    n = ys.size

    mu_g = mu[inverse]
    sig_g = sigma[inverse]
    diff = ys[:, None] - mu_g
    lp = log_alpha[inverse] - 0.5 * LOG_2PI - np.log(sig_g) - 0.5 * (diff / sig_g) ** 2
    ll = _logsumexp(lp, axis=1)
    loss = float(-np.mean(ll))

    pi = np.exp(lp - ll[:, None])
    alpha_g = np.exp(log_alpha[inverse])
    d_logit = (alpha_g - pi) / n
    d_mu = pi * (mu_g - ys[:, None]) / sig_g**2 / n
    d_sig = pi * (1.0 / sig_g - diff**2 / sig_g**3) / n
    d_sig_raw = d_sig * dsigma[inverse]

    d_raw_rows = np.concatenate([d_logit, d_mu, d_sig_raw], axis=1)
    d_raw = np.zeros_like(raw)
    np.add.at(d_raw, inverse, d_raw_rows)

    grads: list[tuple[np.ndarray, np.ndarray]] = [None] * len(weights.layers)
    w_out, _ = weights.layers[-1]
    grads[-1] = (d_raw.T @ acts[-1], d_raw.sum(axis=0))
    d_act = d_raw @ w_out
    for i in range(arch.num_layers - 1, -1, -1):
        d_z = d_act * (pre[i] > 0)
        grads[i] = (d_z.T @ acts[i], d_z.sum(axis=0))
        if i:
            d_act = d_z @ weights.layers[i][0]
    return loss, grads


def gradient(weights: NetworkWeights, x: np.ndarray, y: np.ndarray):
    """Gradient of nll_loss with respect to every weight and bias."""
    return nll_gradient(weights, x, y)[1]
