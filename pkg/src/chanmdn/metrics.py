"""Fit-quality metrology: KDE overlap, modified overlap, and percent errors.

The headline metric is the Overlapped Area (OA): both the genuine and the
model-generated samples for one distance are kernel-density estimated with a
Gaussian kernel, and OA is the trapezoidal integral of the pointwise minimum
of the two curves over a uniform partition of their joint sample range.

OA runs in the raw power domain (model draws are scaled back first).  The
kernel width (default 0.3) is fixed in those units; in the log-scaled frame
the per-distance sample spread (~0.1) would sit far below the kernel width
and the truncated integral could never approach 1, so raw is the only frame
where the overlap ceiling is meaningful.

Aggregates over the distance grid:

* Average OA — mean of the per-distance OAs.
* MOA — Average OA minus `coef` (default 2) sample standard deviations of
  the per-distance OAs; penalizes inconsistency across distances.
* ScaledPE — (PE_mean_avg * 0.3 + PE_var_avg * 0.7) / 2, where the percent
  errors compare generated raw-domain moments against the closed-form noisy
  channel moments.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .channels import analytic_moments, distance_index
from .errors import ConfigError, DataFormatError
from .mdn import NetworkWeights, mixture_at, sample_mixture
from .pipeline import inverse_scale

REPORT_VERSION = 1

_KDE_NORM = 1.0 / math.sqrt(2.0 * math.pi)
_KDE_CHUNK = 512


@dataclass(frozen=True)
class KdeConfig:
    """Gaussian-kernel KDE settings for the overlap metric."""

    bandwidth: float = 0.3
    grid_divisor: int = 10

    def __post_init__(self):
        if self.bandwidth <= 0:
            raise ConfigError("KDE bandwidth must be positive")
        if self.grid_divisor < 1:
            raise ConfigError("grid divisor must be >= 1")


def kde(samples, bandwidth: float, x):
    """Gaussian kernel density estimate of `samples` at query points x."""
    data = np.asarray(samples, dtype=float).ravel()
    if data.size == 0:
        raise ValueError("KDE needs at least one sample")
    if bandwidth <= 0:
        raise ValueError("KDE bandwidth must be positive")
    queries = np.atleast_1d(np.asarray(x, dtype=float))
    out = np.empty(queries.size)
    scale = _KDE_NORM / (data.size * bandwidth)
    for lo in range(0, queries.size, _KDE_CHUNK):
        q = queries[lo : lo + _KDE_CHUNK]
        z = (q[:, None] - data) / bandwidth
        out[lo : lo + _KDE_CHUNK] = scale * np.exp(-0.5 * z * z).sum(axis=1)
    return float(out[0]) if np.ndim(x) == 0 else out


def overlap_grid(genuine, generated, cfg: KdeConfig) -> np.ndarray:
    """Uniform partition over the joint sample range used for the OA integral.

    The point count is min(n_genuine, n_generated) / grid_divisor, at least 2.
    """
    a = np.asarray(genuine, dtype=float)
    b = np.asarray(generated, dtype=float)
    if a.size == 0 or b.size == 0:
        raise ValueError("overlap needs nonempty sample lists")
    lo = min(a.min(), b.min())
    hi = max(a.max(), b.max())
    k = max(int(min(a.size, b.size) // cfg.grid_divisor), 2)
    return np.linspace(lo, hi, k)


def overlapped_area(genuine, generated, cfg: KdeConfig = KdeConfig()) -> float:
    """Trapezoidal integral of min(KDE_genuine, KDE_generated), clamped to [0, 1]."""
    a = np.asarray(genuine, dtype=float)
    b = np.asarray(generated, dtype=float)
    grid = overlap_grid(a, b, cfg)
    if grid[0] == grid[-1]:
        # Degenerate range: every sample in both lists is the same point, so
        # the two KDEs coincide and the overlap is total.
        return 1.0
    lower = np.minimum(kde(a, cfg.bandwidth, grid), kde(b, cfg.bandwidth, grid))
    oa = float(np.trapezoid(lower, grid))
    return min(max(oa, 0.0), 1.0)


def sample_stats(values) -> tuple[float, float]:
    """(mean, Bessel-corrected variance) of a sample list; variance needs n >= 2."""
    arr = np.asarray(values, dtype=float).ravel()
    if arr.size < 2:
        raise ValueError("variance is undefined for fewer than two samples")
    return float(arr.mean()), float(arr.var(ddof=1))


def moa(per_d_oa, coef: float = 2.0) -> float:
    """Average OA penalized by coef standard deviations of the per-d OAs."""
    arr = np.asarray(per_d_oa, dtype=float).ravel()
    if arr.size == 0:
        raise ValueError("MOA needs at least one OA value")
    spread = float(arr.std(ddof=1)) if arr.size > 1 else 0.0
    return float(arr.mean()) - coef * spread


def percent_error(ideal: float, generated: float) -> float:
    """|ideal - generated| / |ideal| * 100."""
    if ideal == 0:
        raise ValueError("percent error is undefined for a zero ideal value")
    return abs((ideal - generated) / ideal) * 100.0


def scaled_pe(pe_mean_avg: float, pe_var_avg: float) -> float:
    """Variance-weighted percent-error aggregate."""
    if pe_mean_avg < 0 or pe_var_avg < 0:
        raise ValueError("percent errors must be nonnegative")
    return (pe_mean_avg * 0.3 + pe_var_avg * 0.7) / 2.0


def eval_rng(seed: int, d_index: int) -> np.random.Generator:
    """Per-distance generation substream; shared by evaluate and the plots."""
    return np.random.default_rng(np.random.SeedSequence([seed, 29, d_index]))


def draw_model_samples(
    weights: NetworkWeights, d: float, d_max: float, n: int, rng: np.random.Generator
) -> np.ndarray:
    """Draw n scaled-power samples from the model's mixture at distance d."""
    return sample_mixture(mixture_at(weights, d / d_max), rng, size=n)


@dataclass
class EvalReport:
    """Per-distance and aggregate fit metrics for one model on one dataset."""

    scenario: str
    seed: int
    kde: KdeConfig
    moa_coef: float
    n_generated_per_d: int
    distances: np.ndarray
    per_d_oa: np.ndarray
    per_d_pe_mean: np.ndarray
    per_d_pe_var: np.ndarray
    gen_mean: np.ndarray
    gen_var: np.ndarray
    ideal_mean: np.ndarray
    ideal_var: np.ndarray
    average_oa: float
    oa_std: float
    moa: float
    pe_mean_avg: float
    pe_var_avg: float
    scaled_pe: float
    oa_domain: str = "raw"
    pe_domain: str = "raw"


def check_meta_compatible(meta, scenario) -> None:
    """Models may only be scored on data sharing their unit frame."""
    if abs(meta.scaling_coef - scenario.scaling_coef) > 1e-9 or abs(
        meta.d_max - scenario.d_max
    ) > 1e-9:
        raise ConfigError(
            f"model metadata (coef={meta.scaling_coef}, d_max={meta.d_max}) does not "
            f"match dataset scenario {scenario.name} "
            f"(coef={scenario.scaling_coef}, d_max={scenario.d_max})"
        )


def oa_by_distance(weights: NetworkWeights, scaled, cfg: KdeConfig, seed: int
                   ) -> np.ndarray:
    """Per-distance OA between a scaled genuine split and fresh model samples.

    Model draws and genuine values are mapped back to the raw power domain
    before the KDEs are built.
    """
    scenario = scaled.scenario
    coef = scenario.scaling_coef
    out = []
    for d, genuine_s in scaled.by_distance():
        rng = eval_rng(seed, distance_index(scenario, d))
        gen_s = draw_model_samples(weights, d, scenario.d_max, genuine_s.size, rng)
        out.append(
            overlapped_area(inverse_scale(genuine_s, coef),
                            inverse_scale(gen_s, coef), cfg)
        )
    return np.asarray(out)


def evaluate(
    weights: NetworkWeights,
    meta,
    genuine,
    cfg: KdeConfig = KdeConfig(),
    seed: int = 0,
    moa_coef: float = 2.0,
) -> EvalReport:
    """Score a model against a genuine dataset, one mixture draw per genuine sample.

    OA runs in the scaled domain; percent errors compare raw-domain generated
    moments with the analytic noisy-channel moments.  Deterministic in `seed`.
    """
    scenario = genuine.scenario
    check_meta_compatible(meta, scenario)
    coef = scenario.scaling_coef
    d_raw = np.asarray(genuine.d, dtype=float)
    p_raw = np.asarray(genuine.p_r, dtype=float)

    rows = []
    for d_index, d in enumerate(scenario.distance_grid):
        mask = np.isclose(d_raw, d, rtol=0.0, atol=1e-9)
        if not np.any(mask):
            continue
        genuine_raw = p_raw[mask]
        rng = eval_rng(seed, d_index)
        gen_s = draw_model_samples(weights, d, scenario.d_max, genuine_raw.size, rng)
        gen_raw = inverse_scale(gen_s, coef)
        oa = overlapped_area(genuine_raw, gen_raw, cfg)
        g_mean, g_var = sample_stats(gen_raw)
        i_mean, i_var = analytic_moments(scenario, d)
        pe_mean = percent_error(i_mean, g_mean) if i_mean != 0 else math.nan
        pe_var = percent_error(i_var, g_var) if i_var != 0 else math.nan
        rows.append((d, oa, pe_mean, pe_var, g_mean, g_var, i_mean, i_var,
                     genuine_raw.size))
    if not rows:
        raise ValueError("genuine dataset holds no samples on the scenario grid")

    cols = [np.asarray(c, dtype=float) for c in zip(*rows)]
    d_arr, oa_arr, pem_arr, pev_arr, gm, gv, im, iv, counts = cols
    avg_oa = float(oa_arr.mean())
    oa_std = float(oa_arr.std(ddof=1)) if oa_arr.size > 1 else 0.0
    pe_mean_avg = float(np.nanmean(pem_arr))
    pe_var_avg = float(np.nanmean(pev_arr))
    values, freq = np.unique(counts.astype(int), return_counts=True)
    return EvalReport(
        scenario=scenario.name,
        seed=seed,
        kde=cfg,
        moa_coef=moa_coef,
        n_generated_per_d=int(values[np.argmax(freq)]),
        distances=d_arr,
        per_d_oa=oa_arr,
        per_d_pe_mean=pem_arr,
        per_d_pe_var=pev_arr,
        gen_mean=gm,
        gen_var=gv,
        ideal_mean=im,
        ideal_var=iv,
        average_oa=avg_oa,
        oa_std=oa_std,
        moa=avg_oa - moa_coef * oa_std,
        pe_mean_avg=pe_mean_avg,
        pe_var_avg=pe_var_avg,
        scaled_pe=scaled_pe(pe_mean_avg, pe_var_avg),
    )


def _nan_to_none(x: float):
    return None if math.isnan(x) else x


def report_to_dict(report: EvalReport) -> dict:
    per_d = []
    for j in range(report.distances.size):
        per_d.append(
            {
                "d": report.distances[j],
                "oa": report.per_d_oa[j],
                "pe_mean": _nan_to_none(report.per_d_pe_mean[j]),
                "pe_var": _nan_to_none(report.per_d_pe_var[j]),
                "gen_mean": report.gen_mean[j],
                "gen_var": report.gen_var[j],
                "ideal_mean": report.ideal_mean[j],
                "ideal_var": report.ideal_var[j],
            }
        )
    return {
        "format_version": REPORT_VERSION,
        "scenario": report.scenario,
        "seed": report.seed,
        "kde": {"bandwidth": report.kde.bandwidth,
                "grid_divisor": report.kde.grid_divisor},
        "moa_coef": report.moa_coef,
        "n_generated_per_d": report.n_generated_per_d,
        "oa_domain": report.oa_domain,
        "pe_domain": report.pe_domain,
        "average_oa": report.average_oa,
        "oa_std": report.oa_std,
        "moa": report.moa,
        "pe_mean_avg": report.pe_mean_avg,
        "pe_var_avg": report.pe_var_avg,
        "scaled_pe": report.scaled_pe,
        "per_distance": per_d,
    }


def write_report(report: EvalReport, path: str | Path) -> None:
    Path(path).write_text(
        json.dumps(report_to_dict(report), indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )


def read_report(path: str | Path) -> dict:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if doc.get("format_version") != REPORT_VERSION:
        raise DataFormatError(f"{path}: unsupported report version")
    return doc


def write_report_csv(report: EvalReport, path: str | Path) -> None:
    """Per-distance companion table: d, oa, pe_mean, pe_var."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["d", "oa", "pe_mean", "pe_var"])
    for j in range(report.distances.size):
        writer.writerow(
            [
                repr(float(report.distances[j])),
                repr(float(report.per_d_oa[j])),
                repr(float(report.per_d_pe_mean[j])),
                repr(float(report.per_d_pe_var[j])),
            ]
        )
    Path(path).write_text(buf.getvalue(), encoding="utf-8")
