"""Adam optimization with a NaN watchdog, multi-restart experiments, transfer.

A training run iterates shuffled minibatches for a fixed number of epochs,
checkpointing the model after every epoch with its validation NLL and
validation overlap scores (one mixture draw per genuine validation sample,
per distance).  Any non-finite loss or gradient trips the watchdog: the run
discards weights and optimizer state and restarts from epoch 0 with a fresh
initialization seed, up to a bounded number of restarts.

An experiment repeats independent runs and ranks all epoch checkpoints by
validation MOA: Global Best is the maximum; Global Median sits at rank
floor(n/2) of the ascending order.  Transfer experiments are identical
except every run starts from a pretrained model instead of random weights.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, TrainingError
from .mdn import Architecture, NetworkWeights, init_weights, nll_gradient, nll_loss
from .metrics import KdeConfig, moa, oa_by_distance
from .pipeline import ScaledData, batches

__all__ = [
    "AdamState",
    "TrainConfig",
    "Checkpoint",
    "ModelRegistry",
    "adam_init",
    "adam_step",
    "train_run",
    "train_experiment",
    "transfer_train",
]


def derive_seed(*keys: int) -> int:
    """Deterministic substream key from a tuple of integer tags."""
    return int(np.random.SeedSequence(list(keys)).generate_state(1, np.uint64)[0])


@dataclass
class AdamState:
    m: list[tuple[np.ndarray, np.ndarray]]
    v: list[tuple[np.ndarray, np.ndarray]]
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-7
    lr: float = 0.005


def adam_init(weights: NetworkWeights, lr: float = 0.005) -> AdamState:
    zeros = lambda: [(np.zeros_like(w), np.zeros_like(b)) for w, b in weights.layers]
    return AdamState(m=zeros(), v=zeros(), lr=lr)


def adam_step(state: AdamState, weights: NetworkWeights, grads) -> tuple[AdamState, NetworkWeights]:
    """One bias-corrected Adam update; mutates state and weights in place."""
    state.t += 1
    c1 = 1.0 - state.beta1**state.t
    c2 = 1.0 - state.beta2**state.t
    for (w, b), (gw, gb), (mw, mb), (vw, vb) in zip(
        weights.layers, grads, state.m, state.v
    ):
        mw += (1.0 - state.beta1) * (gw - mw)
        mb += (1.0 - state.beta1) * (gb - mb)
        vw += (1.0 - state.beta2) * (gw * gw - vw)
        vb += (1.0 - state.beta2) * (gb * gb - vb)
        w -= state.lr * (mw / c1) / (np.sqrt(vw / c2) + state.eps)
        b -= state.lr * (mb / c1) / (np.sqrt(vb / c2) + state.eps)
    return state, weights


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 15
    iterations: int = 10
    batch_size: int = 10_000
    max_nan_restarts: int = 10
    seed: int = 0
    moa_sigma_coef: float = 2.0
    lr: float = 0.005
    arch: Architecture = Architecture()
    kde: KdeConfig = KdeConfig()

    def __post_init__(self):
        if self.epochs < 0 or self.iterations < 1 or self.batch_size < 1:
            raise ConfigError("epochs must be >= 0; iterations and batch_size >= 1")
        if self.max_nan_restarts < 0:
            raise ConfigError("max_nan_restarts must be >= 0")


@dataclass
class Checkpoint:
    weights: NetworkWeights
    epoch: int
    iteration: int
    val_moa: float
    val_avg_oa: float
    val_nll: float


@dataclass
class ModelRegistry:
    """All checkpoints of an experiment plus per-iteration outcomes."""

    checkpoints: list[Checkpoint] = field(default_factory=list)
    final_weights: list[NetworkWeights] = field(default_factory=list)
    restarts: list[int] = field(default_factory=list)
    failures: list[str] = field(default_factory=list)

    @property
    def total_restarts(self) -> int:
        return sum(self.restarts)

    @property
    def global_best(self) -> Checkpoint | None:
        if not self.checkpoints:
            return None
        return max(
            self.checkpoints, key=lambda c: (c.val_moa, -c.iteration, -c.epoch)
        )

    @property
    def global_median(self) -> Checkpoint | None:
        if not self.checkpoints:
            return None
        ranked = sorted(
            self.checkpoints, key=lambda c: (c.val_moa, c.iteration, c.epoch)
        )
        return ranked[len(ranked) // 2]

    def best_weights(self) -> NetworkWeights:
        best = self.global_best
        if best is not None:
            return best.weights
        if self.final_weights:
            return self.final_weights[0]
        raise TrainingError("registry holds no trained weights")


def _grads_finite(loss: float, grads) -> bool:
    if not np.isfinite(loss):
        return False
    return all(np.isfinite(gw).all() and np.isfinite(gb).all() for gw, gb in grads)


def train_run(
    cfg: TrainConfig,
    train: ScaledData,
    val: ScaledData,
    init: NetworkWeights,
    iteration: int = 1,
    restart_init=None,
) -> tuple[list[Checkpoint], NetworkWeights, int]:
    """One watchdog-guarded run; returns (checkpoints, final weights, restarts).

    `restart_init(restart_index)` supplies weights after a watchdog trip; the
    default draws a fresh seeded initialization of the same architecture.
    """
    if len(train) == 0 or len(val) == 0:
        raise ValueError("train and validation splits must be nonempty")
    if restart_init is None:
        restart_init = lambda restart: init_weights(
            init.arch, derive_seed(cfg.seed, 17, iteration, restart)
        )
    weights = init.copy()
    restarts = 0
    last_finite_loss = float("nan")
    while True:
        failed_at = None
        state = adam_init(weights, cfg.lr)
        checkpoints: list[Checkpoint] = []
        for epoch in range(1, cfg.epochs + 1):
            epoch_seed = derive_seed(cfg.seed, 23, iteration, restarts, epoch)
            for batch_index, (x, y) in enumerate(batches(train, cfg.batch_size, epoch_seed)):
                loss, grads = nll_gradient(weights, x, y)
                if not _grads_finite(loss, grads):
                    failed_at = (epoch, batch_index)
                    break
                last_finite_loss = loss
                adam_step(state, weights, grads)
            if failed_at:
                break
            val_nll = nll_loss(weights, val.d_norm, val.s)
            oas = oa_by_distance(
                weights, val, cfg.kde, derive_seed(cfg.seed, 29, iteration, epoch)
            )
            if not (np.isfinite(val_nll) and np.isfinite(oas).all()
                    and weights.is_finite()):
                failed_at = (epoch, -1)
                break
            checkpoints.append(
                Checkpoint(
                    weights=weights.copy(),
                    epoch=epoch,
                    iteration=iteration,
                    val_moa=moa(oas, cfg.moa_sigma_coef),
                    val_avg_oa=float(oas.mean()),
                    val_nll=val_nll,
                )
            )
        if failed_at is None:
            return checkpoints, weights, restarts
        restarts += 1
        if restarts > cfg.max_nan_restarts:
            raise TrainingError(
                f"non-finite loss persisted after {cfg.max_nan_restarts} restarts "
                f"(iteration {iteration}, epoch {failed_at[0]}, batch {failed_at[1]}, "
                f"last finite loss {last_finite_loss})"
            )
        weights = restart_init(restarts)


def _run_many(cfg: TrainConfig, train: ScaledData, val: ScaledData, init_for,
              fresh_restarts: bool) -> ModelRegistry:
    registry = ModelRegistry()
    for iteration in range(1, cfg.iterations + 1):
        init = init_for(iteration)
        try:
            cps, final, restarts = train_run(
                cfg, train, val, init,
                iteration=iteration,
                restart_init=None if fresh_restarts else (lambda r, w=init: w.copy()),
            )
        except TrainingError as exc:
            registry.failures.append(f"iteration {iteration}: {exc}")
            continue
        registry.checkpoints.extend(cps)
        registry.final_weights.append(final)
        registry.restarts.append(restarts)
    if not registry.final_weights:
        raise TrainingError(
            "every iteration failed: " + "; ".join(registry.failures)
        )
    return registry


def train_experiment(cfg: TrainConfig, train: ScaledData, val: ScaledData
                     ) -> ModelRegistry:
    """cfg.iterations independent runs from fresh seeded initializations."""

    def init_for(iteration: int) -> NetworkWeights:
        return init_weights(cfg.arch, derive_seed(cfg.seed, 11, iteration))

    return _run_many(cfg, train, val, init_for, fresh_restarts=True)


def transfer_train(
    pretrained: NetworkWeights, cfg: TrainConfig, train: ScaledData, val: ScaledData
) -> ModelRegistry:
    """Like train_experiment but every run starts from the pretrained weights.

    The optimizer state is reset; watchdog restarts also restart from the
    pretrained weights (shuffle seeds differ per restart).
    """
    if pretrained.arch != cfg.arch:
        raise ConfigError(
            f"pretrained architecture {pretrained.arch} does not match "
            f"configured architecture {cfg.arch}"
        )
    return _run_many(cfg, train, val, lambda iteration: pretrained.copy(),
                     fresh_restarts=False)
