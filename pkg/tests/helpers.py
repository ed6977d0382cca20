"""Shared test utilities: inverse transforms and the finite-difference checker."""

import math

import numpy as np

from chanmdn.mdn import SIGMA_FLOOR, NetworkWeights, nll_gradient, nll_loss


def softplus_inv(y: float) -> float:
    """Inverse of log(1 + e^x)."""
    return y + math.log(-math.expm1(-y))


def sigma_raw_for(sigma: float) -> float:
    """Raw head output that produces the requested mixture width."""
    return softplus_inv(sigma - SIGMA_FLOOR)


def bias_only_net(arch, alpha_logits, mus, sigma_raws) -> NetworkWeights:
    """All-zero weights with the head bias pinned; the net ignores its input."""
    from chanmdn.mdn import init_weights

    w = init_weights(arch, 0)
    for wi, bi in w.layers:
        wi[:] = 0.0
        bi[:] = 0.0
    out_b = w.layers[-1][1]
    m = arch.m_c
    out_b[:m] = alpha_logits
    out_b[m : 2 * m] = mus
    out_b[2 * m :] = sigma_raws
    return w


def max_fd_relative_error(weights, x, y, h: float = 1e-5) -> float:
    """Worst per-parameter relative error of analytic vs central differences.

    Near-zero coordinates are compared absolutely via the 1e-4 denominator
    floor (|delta| <= 1e-9 then counts as agreement), which keeps the check
    above the float64 finite-difference noise floor.
    """
    _, grads = nll_gradient(weights, x, y)
    worst = 0.0
    for li, (w, b) in enumerate(weights.layers):
        for arr, garr in ((w, grads[li][0]), (b, grads[li][1])):
            flat = arr.ravel()
            gflat = np.asarray(garr).ravel()
            for k in range(flat.size):
                orig = flat[k]
                flat[k] = orig + h
                up = nll_loss(weights, x, y)
                flat[k] = orig - h
                down = nll_loss(weights, x, y)
                flat[k] = orig
                fd = (up - down) / (2.0 * h)
                rel = abs(fd - gflat[k]) / max(abs(fd), abs(gflat[k]), 1e-4)
                worst = max(worst, rel)
    return worst


def min_hidden_preactivation(weights, x) -> float:
    """Smallest |pre-activation| over the trunk; guards FD checks near kinks."""
    from chanmdn.mdn import _forward_trunk, _group_inputs

    unique, _ = _group_inputs(x)
    _, pre, _ = _forward_trunk(weights, unique)
    return min(float(np.abs(z).min()) for z in pre)


def randomized_net(arch, seed: int, weight_scale: float = 0.4):
    """Small net with randomized weights and a matched random batch.

    Retries until every hidden pre-activation is safely away from the ReLU
    kink, so central differences with h = 1e-5 stay on one smooth branch.
    """
    from chanmdn.mdn import init_weights

    rng = np.random.default_rng(seed)
    for _ in range(50):
        w = init_weights(arch, int(rng.integers(2**31)))
        for wi, bi in w.layers:
            wi += rng.normal(0.0, weight_scale, wi.shape)
            bi += rng.normal(0.0, weight_scale, bi.shape)
        x = rng.uniform(0.05, 1.0, 6)
        y = rng.normal(0.4, 0.5, 6)
        if min_hidden_preactivation(w, x) > 1e-3:
            return w, x, y
    raise AssertionError("could not find a kink-free configuration")
