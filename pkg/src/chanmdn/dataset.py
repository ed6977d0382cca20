"""Dataset container, seeded generation campaign, and the on-disk CSV format.

A dataset is a flat (d, p_r) table ordered by grid distance, n_per_d samples
per distance.  Generation draws from the scenario's closed-form sampler with
measurement noise, using one deterministic RNG substream per distance so the
result is independent of any per-distance parallelism.

On disk the format is UTF-8 CSV with a `d,p_r` header row preceded by
metadata comment lines:

    # name=N1
    # seed=7
    # n_per_d=2000
    # scaling_coef=2.0
    # version=1
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .channels import ScenarioConfig, builtin_scenario, sample_noisy_channel
from .errors import ConfigError, DataFormatError

FORMAT_VERSION = 1

# Redraw budget: generation aborts once rejections exceed this fraction.
MAX_REJECT_RATE = 0.01


@dataclass
class Dataset:
    """(d, p_r) samples plus the generation metadata needed to reproduce them."""

    d: np.ndarray
    p_r: np.ndarray
    scenario: ScenarioConfig
    seed: int
    n_per_d: int

    def __len__(self) -> int:
        return self.d.size

    def block(self, d_index: int) -> np.ndarray:
        """Received-power slice for one grid distance (generation order)."""
        lo = d_index * self.n_per_d
        return self.p_r[lo : lo + self.n_per_d]


def _distance_rng(seed: int, d_index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, d_index]))


def generate_dataset(scenario: ScenarioConfig, n_per_d: int, seed: int) -> Dataset:
    """Run the simulated measurement campaign over the scenario grid.

    Samples whose log-scaling argument p_r + scaling_coef would be nonpositive
    are rejected and redrawn; a rejection rate above MAX_REJECT_RATE means the
    scaling coefficient is too small for the scenario and raises ConfigError.
    """
    if n_per_d <= 0:
        raise ValueError("n_per_d must be positive")
    coef = scenario.scaling_coef
    blocks = []
    drawn = 0
    rejected = 0
    for d_index, d in enumerate(scenario.distance_grid):
        rng = _distance_rng(seed, d_index)
        kept = np.empty(n_per_d)
        filled = 0
        while filled < n_per_d:
            want = n_per_d - filled
            draw = sample_noisy_channel(scenario, d, rng, size=want)
            ok = draw + coef > 0  # False for NaN draws as well
            n_ok = int(np.count_nonzero(ok))
            kept[filled : filled + n_ok] = draw[ok]
            filled += n_ok
            drawn += want
            rejected += want - n_ok
            if rejected > max(100, 2 * n_per_d * len(scenario.distance_grid)):
                raise ConfigError(
                    f"scaling_coef {coef} rejects nearly all samples for {scenario.name}"
                )
        blocks.append(kept)
    if rejected > MAX_REJECT_RATE * drawn:
        raise ConfigError(
            f"rejection rate {rejected / drawn:.3%} exceeds {MAX_REJECT_RATE:.0%}; "
            f"scaling_coef {coef} is too small for scenario {scenario.name}"
        )
    d_col = np.repeat(np.asarray(scenario.distance_grid), n_per_d)
    return Dataset(d=d_col, p_r=np.concatenate(blocks), scenario=scenario,
                   seed=seed, n_per_d=n_per_d)


def write_dataset(dataset: Dataset, path: str | Path) -> None:
    """Serialize with full float precision (repr round-trips exactly)."""
    buf = io.StringIO()
    buf.write(f"# name={dataset.scenario.name}\n")
    buf.write(f"# seed={dataset.seed}\n")
    buf.write(f"# n_per_d={dataset.n_per_d}\n")
    buf.write(f"# scaling_coef={dataset.scenario.scaling_coef!r}\n")
    buf.write(f"# version={FORMAT_VERSION}\n")
    buf.write("d,p_r\n")
    for d, p in zip(dataset.d, dataset.p_r):
        buf.write(f"{float(d)!r},{float(p)!r}\n")
    Path(path).write_text(buf.getvalue(), encoding="utf-8")


def read_dataset(path: str | Path, scenario: ScenarioConfig | None = None) -> Dataset:
    """Load a dataset file.

    The scenario is resolved from the catalog via the `name` metadata line;
    pass `scenario` explicitly for datasets generated from custom configs.
    """
    path = Path(path)
    meta: dict[str, str] = {}
    with path.open("r", encoding="utf-8") as fh:
        pos = fh.tell()
        line = fh.readline()
        while line.startswith("#"):
            body = line[1:].strip()
            if "=" not in body:
                raise DataFormatError(f"{path}: bad metadata line {line!r}")
            key, value = body.split("=", 1)
            meta[key.strip()] = value.strip()
            pos = fh.tell()
            line = fh.readline()
        if line.strip() != "d,p_r":
            raise DataFormatError(f"{path}: expected 'd,p_r' header, got {line!r}")
        try:
            table = np.loadtxt(fh, delimiter=",", ndmin=2)
        except ValueError as exc:
            raise DataFormatError(f"{path}: unparseable sample rows: {exc}") from None
    for key in ("name", "seed", "n_per_d", "scaling_coef", "version"):
        if key not in meta:
            raise DataFormatError(f"{path}: missing metadata line '# {key}=...'")
    if int(meta["version"]) != FORMAT_VERSION:
        raise DataFormatError(
            f"{path}: unsupported dataset version {meta['version']}"
        )
    if scenario is None:
        try:
            scenario = builtin_scenario(meta["name"])
        except ConfigError:
            raise DataFormatError(
                f"{path}: scenario {meta['name']!r} is not a built-in; "
                "pass the scenario config explicitly"
            ) from None
    coef = float(meta["scaling_coef"])
    if abs(coef - scenario.scaling_coef) > 1e-9:
        raise DataFormatError(
            f"{path}: file scaling_coef {coef} does not match scenario "
            f"{scenario.name} ({scenario.scaling_coef})"
        )
    n_per_d = int(meta["n_per_d"])
    if table.shape[0] != n_per_d * len(scenario.distance_grid) or table.shape[1] != 2:
        raise DataFormatError(f"{path}: sample table has wrong shape {table.shape}")
    return Dataset(d=table[:, 0], p_r=table[:, 1], scenario=scenario,
                   seed=int(meta["seed"]), n_per_d=n_per_d)
