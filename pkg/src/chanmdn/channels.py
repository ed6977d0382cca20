"""Closed-form channel scenarios and seeded sampling.

Two benchmark families are modeled:

* Nakagami-m fading with exponential path loss. Received strength x is the
  amplitude whose square is Gamma-distributed: x = sqrt(G),
  G ~ Gamma(shape=m, scale=Omega/m) with Omega = p_t * eta * (d0/d)^alpha.
  All Nakagami quantities (eta, noise mean, noise variance) are stored in a
  scaled unit frame (scale_factor, default 1e14) so sample magnitudes are O(1).

* Log-normal shadowing with dual-slope path loss, in dB. The mean follows a
  two-segment log-distance law with a breakpoint at the critical distance dc;
  shadowing is zero-mean Gaussian with std delta1 (near) or delta2 (far).

Additive Gaussian measurement noise is applied to every drawn sample in the
scenario's sample domain (scaled linear for Nakagami, dB for log-normal).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigError

__all__ = [
    "NakagamiConfig",
    "LogNormalConfig",
    "NoiseConfig",
    "ScenarioConfig",
    "builtin_scenario",
    "builtin_scenario_names",
    "path_loss_nakagami",
    "nakagami_m",
    "sample_nakagami",
    "p_db_reference",
    "p_db_mean",
    "sample_lognormal",
    "add_noise",
    "analytic_moments",
    "distance_index",
]

DEFAULT_GRID = tuple(float(d) for d in range(10, 301, 10))


@dataclass(frozen=True)
class NakagamiConfig:
    """Nakagami fading channel with exponential path loss, in scaled units."""

    p_t: float  # transmit power (W)
    eta: float  # path-loss constant, already multiplied by scale_factor
    d0: float  # reference distance (m)
    alpha: float  # path-loss exponent
    m_near: float  # fading parameter for d <= d_break
    m_far: float  # fading parameter for d > d_break
    d_break: float  # breakpoint distance (m)
    scale_factor: float = 1e14

    def __post_init__(self):
        if self.p_t <= 0 or self.eta <= 0 or self.d0 <= 0 or self.alpha <= 0:
            raise ConfigError("p_t, eta, d0 and alpha must all be positive")
        if self.m_near < 0.5 or self.m_far < 0.5:
            raise ConfigError("Nakagami fading parameters must be >= 0.5")
        if self.d_break <= 0:
            raise ConfigError("d_break must be positive")


@dataclass(frozen=True)
class LogNormalConfig:
    """Dual-slope log-normal shadowing channel, sample domain is dB."""

    p_t: float  # transmit power (W)
    eta: float  # path-loss constant (linear, unscaled)
    d0: float  # reference distance (m)
    dc: float  # critical distance (m)
    delta1: float  # shadowing std (dB) for d <= dc
    delta2: float  # shadowing std (dB) for d > dc
    alpha1: float  # near path-loss exponent
    alpha2: float  # far path-loss exponent

    def __post_init__(self):
        if self.d0 >= self.dc:
            raise ConfigError("reference distance d0 must be below dc")
        if self.delta1 <= 0 or self.delta2 <= 0:
            raise ConfigError("shadowing stds must be positive")
        if self.alpha1 <= 0 or self.alpha2 <= 0:
            raise ConfigError("path-loss exponents must be positive")


@dataclass(frozen=True)
class NoiseConfig:
    """Additive Gaussian measurement noise.

    `domain` selects where the noise enters for dB-valued channels:
    "sample" adds in the channel's sample domain (the default), "linear"
    converts dB samples to watts, adds there, and converts back.  For
    linear-domain channels the two are identical.
    """

    mean: float = 0.0
    var: float = 0.0
    enabled: bool = False
    domain: str = "sample"

    def __post_init__(self):
        if self.var < 0:
            raise ConfigError("noise variance must be nonnegative")
        if self.domain not in ("sample", "linear"):
            raise ConfigError(f"unknown noise domain {self.domain!r}")


@dataclass(frozen=True)
class ScenarioConfig:
    """A channel family plus noise, distance grid and log-scaling offset."""

    family: NakagamiConfig | LogNormalConfig
    noise: NoiseConfig
    scaling_coef: float
    name: str
    distance_grid: tuple[float, ...] = DEFAULT_GRID

    def __post_init__(self):
        grid = tuple(float(d) for d in self.distance_grid)
        if not grid:
            raise ConfigError("distance grid must be nonempty")
        if any(d <= 0 for d in grid):
            raise ConfigError("distances must be positive")
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise ConfigError("distance grid must be strictly increasing")
        object.__setattr__(self, "distance_grid", grid)

    @property
    def kind(self) -> str:
        return "nakagami" if isinstance(self.family, NakagamiConfig) else "lognormal"

    @property
    def d_max(self) -> float:
        return self.distance_grid[-1]


def distance_index(scenario: ScenarioConfig, d: float) -> int:
    """Index of d in the scenario grid; raises if d is not a grid distance."""
    grid = np.asarray(scenario.distance_grid)
    hits = np.nonzero(np.isclose(grid, d, rtol=0.0, atol=1e-9))[0]
    if hits.size == 0:
        raise ValueError(f"distance {d} is not on the {scenario.name} grid")
    return int(hits[0])


# --- Nakagami family ---------------------------------------------------------


def path_loss_nakagami(cfg: NakagamiConfig, d: float) -> float:
    """Mean received power Omega(d) = p_t * eta * (d0/d)^alpha (scaled units)."""
    if d <= 0:
        raise ValueError("distance must be positive")
    return cfg.p_t * cfg.eta * (cfg.d0 / d) ** cfg.alpha


def nakagami_m(cfg: NakagamiConfig, d: float) -> float:
    """Piecewise fading parameter: m_near up to d_break, m_far beyond."""
    if d <= 0:
        raise ValueError("distance must be positive")
    return cfg.m_near if d <= cfg.d_break else cfg.m_far


def sample_nakagami(
    cfg: NakagamiConfig, d: float, rng: np.random.Generator, size: int | None = None
) -> float | np.ndarray:
    """Draw received-strength samples x with x^2 ~ Gamma(m, Omega/m)."""
    m = nakagami_m(cfg, d)
    omega = path_loss_nakagami(cfg, d)
    g = rng.gamma(shape=m, scale=omega / m, size=size)
    return np.sqrt(g)


# --- Log-normal family -------------------------------------------------------


def p_db_reference(cfg: LogNormalConfig) -> float:
    """Free-space receive power at the reference distance: 10*log10(p_t*eta/d0^2)."""
    arg = cfg.p_t * cfg.eta / cfg.d0**2
    if arg <= 0:
        raise ConfigError("free-space power argument must be positive")
    return 10.0 * math.log10(arg)


def p_db_mean(cfg: LogNormalConfig, d: float) -> float:
    """Deterministic dual-slope mean received power in dB (shadowing excluded)."""
    if d < cfg.d0:
        raise ValueError(f"distance {d} is below the reference distance {cfg.d0}")
    p0 = p_db_reference(cfg)
    if d <= cfg.dc:
        return p0 - 10.0 * cfg.alpha1 * math.log10(d / cfg.d0)
    near = 10.0 * cfg.alpha1 * math.log10(cfg.dc / cfg.d0)
    far = 10.0 * cfg.alpha2 * math.log10(d / cfg.dc)
    return p0 - near - far


def sample_lognormal(
    cfg: LogNormalConfig, d: float, rng: np.random.Generator, size: int | None = None
) -> float | np.ndarray:
    """Draw dB power samples: dual-slope mean plus Gaussian shadowing."""
    base = p_db_mean(cfg, d)
    delta = cfg.delta1 if d <= cfg.dc else cfg.delta2
    return base + rng.normal(0.0, delta, size=size)


# --- Noise and moments -------------------------------------------------------


def add_noise(
    x: float | np.ndarray, noise: NoiseConfig, rng: np.random.Generator
) -> float | np.ndarray:
    """Add Gaussian noise in the sample domain; identity when disabled."""
    if not noise.enabled:
        return x
    size = np.shape(x) if np.ndim(x) else None
    return x + rng.normal(noise.mean, math.sqrt(noise.var), size=size)


def _apply_noise(
    scenario: ScenarioConfig, values: np.ndarray, rng: np.random.Generator
) -> np.ndarray:
    """Scenario-aware noise application, honoring the noise domain switch."""
    noise = scenario.noise
    if not noise.enabled:
        return values
    if scenario.kind == "lognormal" and noise.domain == "linear":
        watts = 10.0 ** (values / 10.0)
        watts = watts + rng.normal(noise.mean, math.sqrt(noise.var), size=values.shape)
        with np.errstate(invalid="ignore", divide="ignore"):
            # Nonpositive watt values turn into NaN and get rejected upstream.
            return np.where(watts > 0, 10.0 * np.log10(np.abs(watts)), np.nan)
    return add_noise(values, noise, rng)


def _amplitude_moments(m: float, omega: float) -> tuple[float, float]:
    """Mean and variance of x = sqrt(G), G ~ Gamma(m, omega/m)."""
    ratio = math.exp(math.lgamma(m + 0.5) - math.lgamma(m))
    mean = ratio * math.sqrt(omega / m)
    var = omega * (1.0 - ratio**2 / m)
    return mean, var


def analytic_moments(scenario: ScenarioConfig, d: float) -> tuple[float, float]:
    """Exact (mean, variance) of the noisy channel distribution at grid distance d.

    Serves as the "ideal" reference for percent-error metrics.  Noise enters
    additively and independently, so its moments add.  No closed form exists
    for linear-domain noise on a dB channel.
    """
    distance_index(scenario, d)
    noise = scenario.noise
    n_mean = noise.mean if noise.enabled else 0.0
    n_var = noise.var if noise.enabled else 0.0
    if scenario.kind == "nakagami":
        fam = scenario.family
        mean, var = _amplitude_moments(nakagami_m(fam, d), path_loss_nakagami(fam, d))
        return mean + n_mean, var + n_var
    if noise.enabled and noise.domain == "linear":
        raise ConfigError("no closed-form dB moments with linear-domain noise")
    fam = scenario.family
    delta = fam.delta1 if d <= fam.dc else fam.delta2
    return p_db_mean(fam, d) + n_mean, delta**2 + n_var


def sample_channel(
    scenario: ScenarioConfig, d: float, rng: np.random.Generator, size: int
) -> np.ndarray:
    """Draw noiseless channel samples for one distance."""
    if scenario.kind == "nakagami":
        return sample_nakagami(scenario.family, d, rng, size=size)
    return sample_lognormal(scenario.family, d, rng, size=size)


def sample_noisy_channel(
    scenario: ScenarioConfig, d: float, rng: np.random.Generator, size: int
) -> np.ndarray:
    """Draw channel samples with measurement noise applied."""
    return _apply_noise(scenario, sample_channel(scenario, d, rng, size), rng)


# --- Built-in scenario catalog -----------------------------------------------

_N1_NOISE = NoiseConfig(mean=0.1256, var=0.1, enabled=True)

_CATALOG: dict[str, ScenarioConfig] = {
    "n1": ScenarioConfig(
        family=NakagamiConfig(
            p_t=0.28183815, eta=7.29, d0=100.0, alpha=2.0,
            m_near=2.0, m_far=1.0, d_break=140.0,
        ),
        noise=_N1_NOISE,
        scaling_coef=2.0,
        name="N1",
    ),
    "n2": ScenarioConfig(
        family=NakagamiConfig(
            p_t=0.28183815, eta=7.29, d0=100.0, alpha=2.5,
            m_near=1.5, m_far=1.0, d_break=140.0,
        ),
        noise=_N1_NOISE,
        scaling_coef=2.0,
        name="N2",
    ),
    "ln1": ScenarioConfig(
        family=LogNormalConfig(
            p_t=0.28183815, eta=7.29e-10, d0=1.0, dc=102.0,
            delta1=3.9, delta2=5.2, alpha1=2.56, alpha2=6.34,
        ),
        noise=NoiseConfig(),
        scaling_coef=435.0,
        name="LN1",
    ),
    "ln2": ScenarioConfig(
        family=LogNormalConfig(
            p_t=0.28183815, eta=7.29e-10, d0=1.0, dc=182.0,
            delta1=3.1, delta2=3.6, alpha1=1.89, alpha2=5.86,
        ),
        noise=NoiseConfig(),
        scaling_coef=435.0,
        name="LN2",
    ),
}


def builtin_scenario_names() -> tuple[str, ...]:
    return tuple(_CATALOG)


def scenario_from_dict(doc: dict) -> ScenarioConfig:
    """Build a scenario from plain config data (custom scenario files)."""
    try:
        kind = doc["family"]
        params = dict(doc["params"])
        if kind == "nakagami":
            family = NakagamiConfig(**params)
        elif kind == "lognormal":
            family = LogNormalConfig(**params)
        else:
            raise ConfigError(f"unknown channel family {kind!r}")
        noise = NoiseConfig(**doc.get("noise", {}))
        return ScenarioConfig(
            family=family,
            noise=noise,
            scaling_coef=float(doc["scaling_coef"]),
            name=str(doc.get("name", "custom")),
            distance_grid=tuple(doc.get("distance_grid", DEFAULT_GRID)),
        )
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"malformed scenario config: {exc}") from None


def builtin_scenario(
    name: str,
    noise_mean: float | None = None,
    noise_var: float | None = None,
    noise_enabled: bool | None = None,
) -> ScenarioConfig:
    """Look up a catalog scenario by name, optionally overriding the noise."""
    key = name.strip().lower()
    if key not in _CATALOG:
        known = ", ".join(sorted(_CATALOG))
        raise ConfigError(f"unknown scenario {name!r} (built-ins: {known})")
    scenario = _CATALOG[key]
    noise = scenario.noise
    if noise_mean is not None or noise_var is not None or noise_enabled is not None:
        noise = replace(
            noise,
            mean=noise.mean if noise_mean is None else noise_mean,
            var=noise.var if noise_var is None else noise_var,
            enabled=noise.enabled if noise_enabled is None else noise_enabled,
        )
        scenario = replace(scenario, noise=noise)
    return scenario
