"""Scaling transforms, stratified splitting, and shuffled batch iteration.

Received power is trained in a log-scaled frame s = log10(p_r + coef), which
symmetrizes the positively skewed channel distributions; distances are
min-max normalized by the grid maximum.  Scaled data lives in memory only —
the canonical on-disk unit system is the raw one from `dataset`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channels import ScenarioConfig
from .dataset import Dataset


def log_scale(x, coef: float):
    """log10(x + coef); the offset keeps the argument positive."""
    arg = np.asarray(x, dtype=float) + coef
    if np.any(arg <= 0):
        raise ValueError(f"log scaling needs x + {coef} > 0")
    out = np.log10(arg)
    return float(out) if np.ndim(x) == 0 else out

def inverse_scale(s, coef: float):
    """Map a scaled value back to the raw power domain: 10^s - coef."""
    out = np.power(10.0, np.asarray(s, dtype=float)) - coef
    return float(out) if np.ndim(s) == 0 else out


def normalize_distance(d, d_max: float):
    """Map distances in (0, d_max] onto the unit interval."""
    arr = np.asarray(d, dtype=float)
    if np.any(arr <= 0) or np.any(arr > d_max):
        raise ValueError(f"distance must lie in (0, {d_max}]")
    out = arr / d_max
    return float(out) if np.ndim(d) == 0 else out


@dataclass(frozen=True)
class SplitSpec:
    """Requested sizes for a disjoint train/validation/test partition."""

    n_train: int
    n_val: int
    n_test: int
    seed: int

    def __post_init__(self):
        if min(self.n_train, self.n_val, self.n_test) < 0:
            raise ValueError("split sizes must be nonnegative")


@dataclass
class SampleSet:
    """A (d, p_r) selection tied to its scenario (one split of a dataset)."""

    d: np.ndarray
    p_r: np.ndarray
    scenario: ScenarioConfig

    def __len__(self) -> int:
        return self.d.size


def _quota(n: int, remaining: np.ndarray) -> np.ndarray:
    """Per-distance take counts: n split as evenly as capacity allows (+-1)."""
    n_d = remaining.size
    base = np.full(n_d, n // n_d)
    extra = n % n_d
    if np.any(base > remaining):
        raise ValueError("not enough samples per distance for a stratified split")
    quota = base.copy()
    if extra:
        # Put the remainder where the most capacity is left; ties go to the
        # lower distance index so the assignment is deterministic.
        headroom = remaining - base
        order = np.lexsort((np.arange(n_d), -headroom))
        chosen = order[:extra]
        if np.any(headroom[chosen] < 1):
            raise ValueError("not enough samples per distance for a stratified split")
        quota[chosen] += 1
    return quota


def split(dataset: Dataset, spec: SplitSpec) -> tuple[SampleSet, SampleSet, SampleSet]:
    """Disjoint seeded-shuffle partition, stratified by distance.

    Each split receives n_split/n_distances samples per distance (+-1), so
    per-distance metrics stay computable on every split.  Deterministic in
    spec.seed.
    """
    total = spec.n_train + spec.n_val + spec.n_test
    if total > len(dataset):
        raise ValueError(
            f"requested {total} samples but the dataset holds {len(dataset)}"
        )
    n_d = len(dataset.scenario.distance_grid)
    pools = []
    for i in range(n_d):
        rng = np.random.default_rng(np.random.SeedSequence([spec.seed, 7, i]))
        pools.append(i * dataset.n_per_d + rng.permutation(dataset.n_per_d))
    remaining = np.full(n_d, dataset.n_per_d)
    used = np.zeros(n_d, dtype=int)
    outputs = []
    for n_split in (spec.n_train, spec.n_val, spec.n_test):
        quota = _quota(n_split, remaining)
        picks = [pools[i][used[i] : used[i] + quota[i]] for i in range(n_d)]
        used += quota
        remaining -= quota
        idx = np.concatenate(picks) if picks else np.empty(0, dtype=int)
        outputs.append(
            SampleSet(d=dataset.d[idx], p_r=dataset.p_r[idx], scenario=dataset.scenario)
        )
    return tuple(outputs)


@dataclass
class ScaledData:
    """Log-scaled power with normalized distance inputs, grouped by raw d."""

    d_norm: np.ndarray
    s: np.ndarray
    d: np.ndarray
    scenario: ScenarioConfig

    def __len__(self) -> int:
        return self.s.size

    def by_distance(self) -> list[tuple[float, np.ndarray]]:
        """Scaled samples per grid distance, grid order; empty groups dropped."""
        groups = []
        for d in self.scenario.distance_grid:
            mask = np.isclose(self.d, d, rtol=0.0, atol=1e-9)
            if np.any(mask):
                groups.append((float(d), self.s[mask]))
        return groups


def scale(data: Dataset | SampleSet) -> ScaledData:
    """Apply log power scaling and distance normalization to one split."""
    scenario = data.scenario
    return ScaledData(
        d_norm=normalize_distance(data.d, scenario.d_max),
        s=log_scale(data.p_r, scenario.scaling_coef),
        d=np.asarray(data.d, dtype=float),
        scenario=scenario,
    )


def batches(scaled: ScaledData, batch_size: int, epoch_seed: int):
    """Yield (d_norm, s) minibatches covering every sample exactly once.

    A fresh full shuffle per epoch seed; the final partial batch is retained.
    """
    if batch_size <= 0:
        raise ValueError("batch_size must be positive")
    n = len(scaled)
    rng = np.random.default_rng(np.random.SeedSequence([epoch_seed, 13]))
    order = rng.permutation(n)
    for lo in range(0, n, batch_size):
        sel = order[lo : lo + batch_size]
        yield scaled.d_norm[sel], scaled.s[sel]
