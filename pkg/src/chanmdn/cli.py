"""Command-line surface: generate, train, transfer, eval, plot.

Option values resolve in three layers: built-in defaults, then a JSON config
file (`--config`, which also accepts a previously written run manifest), then
explicit flags.  The fully resolved snapshot is written to the run manifest,
so re-running any command from its manifest reproduces the outputs
byte-for-byte.

`--paper-scale` switches the data-volume defaults from the quick desk recipe
(2000 samples per distance, 3 iterations, batch 2000, 1/2-1/4-1/4 split) to
the full-size one (14000 per distance, 10 iterations, batch 10000,
216k/100k/100k split).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .channels import builtin_scenario, builtin_scenario_names, distance_index, scenario_from_dict
from .dataset import generate_dataset, read_dataset, write_dataset
from .errors import ChanMdnError, ConfigError
from .figures import convergence_figure, oa_profile_figure, overlap_figure
from .manifest import load_config_file, manifest_path, write_manifest
from .mdn import Architecture
from .metrics import (
    KdeConfig,
    check_meta_compatible,
    draw_model_samples,
    eval_rng,
    evaluate,
    kde,
    overlap_grid,
    overlapped_area,
    write_report,
    write_report_csv,
)
from .model_io import ModelMeta, load_model, save_model
from .pipeline import SplitSpec, inverse_scale, scale, split
from .training import TrainConfig, derive_seed, train_experiment, transfer_train

DESK = {"n_per_d": 2000, "iterations": 3, "batch": 2000}
PAPER = {"n_per_d": 14000, "iterations": 10, "batch": 10_000}
PAPER_SPLIT = (216_000, 100_000, 100_000)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="chanmdn",
        description="Mixture-density-network channel modeling toolkit",
    )
    parser.add_argument("--version", action="version", version=f"chanmdn {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--seed", type=int, help="master RNG seed (default 0)")
        sp.add_argument("--config", help="JSON config file or run manifest; flags override")
        sp.add_argument("--out", help="output file or directory")
        sp.add_argument("--paper-scale", dest="paper_scale",
                        action=argparse.BooleanOptionalAction,
                        help="use full paper-size data volumes")

    g = sub.add_parser("generate", help="simulate a measurement campaign into CSV")
    common(g)
    g.add_argument("--scenario",
                   help=f"built-in ({', '.join(builtin_scenario_names())}) "
                        "or a scenario JSON path")
    g.add_argument("--n-per-d", dest="n_per_d", type=int, help="samples per distance")
    g.add_argument("--noise-mean", dest="noise_mean", type=float)
    g.add_argument("--noise-var", dest="noise_var", type=float)
    g.add_argument("--no-noise", dest="no_noise", action=argparse.BooleanOptionalAction,
                   help="disable measurement noise")

    def train_opts(sp):
        sp.add_argument("--data", help="dataset CSV path")
        sp.add_argument("--scenario-config", dest="scenario_config",
                        help="scenario JSON for datasets with non-built-in names")
        sp.add_argument("--epochs", type=int)
        sp.add_argument("--iterations", type=int)
        sp.add_argument("--batch", type=int)
        sp.add_argument("--lr", type=float)
        sp.add_argument("--train-size", dest="train_size", type=int)
        sp.add_argument("--val-size", dest="val_size", type=int)
        sp.add_argument("--test-size", dest="test_size", type=int)

    t = sub.add_parser("train", help="fit mixture density networks to a dataset")
    common(t)
    train_opts(t)

    x = sub.add_parser("transfer", help="retrain an existing model on new data")
    common(x)
    x.add_argument("--init", help="pretrained model JSON path")
    train_opts(x)

    e = sub.add_parser("eval", help="score a model against a genuine dataset")
    common(e)
    e.add_argument("--model", help="model JSON path")
    e.add_argument("--data", help="dataset CSV path")
    e.add_argument("--scenario-config", dest="scenario_config")
    e.add_argument("--bandwidth", type=float, help="KDE bandwidth (default 0.3)")
    e.add_argument("--grid-divisor", dest="grid_divisor", type=int)

    p = sub.add_parser("plot", help="render the per-distance overlap figure")
    common(p)
    p.add_argument("--model", help="model JSON path")
    p.add_argument("--data", help="dataset CSV path")
    p.add_argument("--scenario-config", dest="scenario_config")
    p.add_argument("--distance", type=float, help="grid distance to display")
    p.add_argument("--bandwidth", type=float)
    p.add_argument("--grid-divisor", dest="grid_divisor", type=int)
    return parser


_SCHEMAS: dict[str, dict] = {
    "generate": {"seed": 0, "out": None, "paper_scale": False, "scenario": None,
                 "n_per_d": None, "noise_mean": None, "noise_var": None,
                 "no_noise": False},
    "train": {"seed": 0, "out": None, "paper_scale": False, "data": None,
              "scenario_config": None, "epochs": 15, "iterations": None,
              "batch": None, "lr": 0.005, "train_size": None, "val_size": None,
              "test_size": None},
    "eval": {"seed": 0, "out": None, "paper_scale": False, "model": None,
             "data": None, "scenario_config": None, "bandwidth": 0.3,
             "grid_divisor": 10},
    "plot": {"seed": 0, "out": None, "paper_scale": False, "model": None,
             "data": None, "scenario_config": None, "distance": None,
             "bandwidth": 0.3, "grid_divisor": 10},
}
_SCHEMAS["transfer"] = dict(_SCHEMAS["train"], init=None)


def resolve_config(args: argparse.Namespace) -> dict:
    """Merge defaults, config file and flags into the resolved snapshot."""
    schema = _SCHEMAS[args.command]
    file_cfg = load_config_file(args.config) if args.config else {}
    unknown = set(file_cfg) - set(schema)
    if unknown:
        raise ConfigError(f"config file has unknown keys: {sorted(unknown)}")
    cfg = {}
    for key, default in schema.items():
        value = getattr(args, key, None)
        if value is None:
            value = file_cfg.get(key, default)
        cfg[key] = value
    # Scale-dependent defaults resolve after --paper-scale is known.
    scale_defaults = PAPER if cfg["paper_scale"] else DESK
    for key in ("n_per_d", "iterations", "batch"):
        if key in cfg and cfg[key] is None:
            cfg[key] = scale_defaults[key]
    for key in ("out",):
        if cfg[key] is None:
            raise ConfigError(f"--{key} is required")
    cfg["out"] = str(cfg["out"])
    return cfg


def _require(cfg: dict, *keys: str) -> None:
    for key in keys:
        if cfg[key] is None:
            raise ConfigError(f"--{key.replace('_', '-')} is required")
        if isinstance(cfg[key], Path):
            cfg[key] = str(cfg[key])


def _resolve_scenario_arg(value: str):
    name = value.strip().lower()
    if name in builtin_scenario_names():
        return builtin_scenario(name)
    path = Path(value)
    if path.exists():
        return scenario_from_dict(json.loads(path.read_text(encoding="utf-8")))
    raise ConfigError(
        f"scenario {value!r} is neither a built-in ({', '.join(builtin_scenario_names())}) "
        "nor an existing config path"
    )


def _scenario_override(cfg: dict):
    if cfg.get("scenario_config"):
        return _resolve_scenario_arg(cfg["scenario_config"])
    return None


def _write_csv(path: Path, header: list[str], rows: list[list]) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([repr(v) if isinstance(v, float) else v for v in row])
    path.write_text(buf.getvalue(), encoding="utf-8")


def cmd_generate(cfg: dict) -> int:
    _require(cfg, "scenario")
    scenario = _resolve_scenario_arg(cfg["scenario"])
    noise = scenario.noise
    if cfg["noise_mean"] is not None:
        noise = replace(noise, mean=cfg["noise_mean"])
    if cfg["noise_var"] is not None:
        noise = replace(noise, var=cfg["noise_var"])
    if cfg["no_noise"]:
        noise = replace(noise, enabled=False)
    scenario = replace(scenario, noise=noise)
    dataset = generate_dataset(scenario, cfg["n_per_d"], cfg["seed"])
    out = Path(cfg["out"])
    out.parent.mkdir(parents=True, exist_ok=True)
    write_dataset(dataset, out)
    write_manifest(
        manifest_path(out), "generate", cfg,
        inputs={}, outputs=[str(out)],
        extra={"rows": len(dataset), "scenario_name": scenario.name},
    )
    print(f"wrote {len(dataset)} samples to {out}")
    return 0


def _split_sizes(cfg: dict, n_total: int) -> tuple[int, int, int]:
    explicit = (cfg["train_size"], cfg["val_size"], cfg["test_size"])
    if any(v is not None for v in explicit):
        if any(v is None for v in explicit):
            raise ConfigError("give all of --train-size/--val-size/--test-size or none")
        return explicit
    if cfg["paper_scale"]:
        return PAPER_SPLIT
    return n_total // 2, n_total // 4, n_total // 4


def _curves_rows(registry) -> list[tuple]:
    return [
        (c.iteration, c.epoch, c.val_nll, c.val_avg_oa, c.val_moa)
        for c in registry.checkpoints
    ]


def _checkpoint_summary(cp) -> dict | None:
    if cp is None:
        return None
    return {"iteration": cp.iteration, "epoch": cp.epoch, "val_moa": cp.val_moa,
            "val_avg_oa": cp.val_avg_oa, "val_nll": cp.val_nll}


def _run_training(cfg: dict, command: str) -> int:
    _require(cfg, "data")
    if command == "train" and cfg["epochs"] < 1:
        raise ConfigError("nothing to train: --epochs must be >= 1")
    pretrained = None
    arch = Architecture()
    if command == "transfer":
        _require(cfg, "init")
        pretrained, pre_meta = load_model(cfg["init"])
        arch = pretrained.arch
    data = read_dataset(cfg["data"], _scenario_override(cfg))
    sizes = _split_sizes(cfg, len(data))
    parts = split(data, SplitSpec(*sizes, seed=derive_seed(cfg["seed"], 41)))
    train_set, val_set, test_set = parts
    tc = TrainConfig(
        epochs=cfg["epochs"],
        iterations=cfg["iterations"],
        batch_size=cfg["batch"],
        seed=cfg["seed"],
        lr=cfg["lr"],
        arch=arch,
    )
    if command == "transfer":
        check_meta_compatible(pre_meta, data.scenario)
        registry = transfer_train(pretrained, tc, scale(train_set), scale(val_set))
    else:
        registry = train_experiment(tc, scale(train_set), scale(val_set))

    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    meta = ModelMeta(
        scenario=data.scenario.name,
        scaling_coef=data.scenario.scaling_coef,
        d_max=data.scenario.d_max,
        seed=cfg["seed"],
    )
    best = registry.global_best
    median = registry.global_median
    best_weights = registry.best_weights()
    median_weights = median.weights if median is not None else best_weights
    save_model(best_weights, meta, out / "global_best.json")
    save_model(median_weights, meta, out / "global_median.json")
    rows = _curves_rows(registry)
    _write_csv(out / "curves.csv",
               ["iteration", "epoch", "nll", "avg_oa", "moa"],
               [list(r) for r in rows])
    convergence_figure(rows, data.scenario.name, out / "curves.svg")
    test_report = evaluate(
        best_weights, meta, test_set, tc.kde, seed=derive_seed(cfg["seed"], 43)
    )
    summary = {
        "scenario": data.scenario.name,
        "checkpoints": len(registry.checkpoints),
        "iterations_completed": len(registry.final_weights),
        "global_best": _checkpoint_summary(best),
        "global_median": _checkpoint_summary(median),
        "test": {
            "average_oa": test_report.average_oa,
            "moa": test_report.moa,
            "scaled_pe": test_report.scaled_pe,
        },
        "nan_restarts": registry.restarts,
        "failures": registry.failures,
    }
    (out / "summary.json").write_text(
        json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    inputs = {"data": cfg["data"]}
    if command == "transfer":
        inputs["init"] = cfg["init"]
    write_manifest(
        out / "manifest.json", command, cfg, inputs=inputs,
        outputs=[str(out / n) for n in
                 ("global_best.json", "global_median.json", "curves.csv",
                  "curves.svg", "summary.json")],
        extra={"nan_restarts": registry.restarts,
               "total_nan_restarts": registry.total_restarts},
    )
    label = "test avg OA"
    print(f"{command}: {len(registry.checkpoints)} checkpoints; "
          f"{label} {test_report.average_oa:.3f}, MOA {test_report.moa:.3f}")
    return 0


def cmd_train(cfg: dict) -> int:
    return _run_training(cfg, "train")


def cmd_transfer(cfg: dict) -> int:
    return _run_training(cfg, "transfer")


def cmd_eval(cfg: dict) -> int:
    _require(cfg, "model", "data")
    weights, meta = load_model(cfg["model"])
    data = read_dataset(cfg["data"], _scenario_override(cfg))
    kcfg = KdeConfig(bandwidth=cfg["bandwidth"], grid_divisor=cfg["grid_divisor"])
    report = evaluate(weights, meta, data, kcfg, seed=cfg["seed"])
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    write_report(report, out / "report.json")
    write_report_csv(report, out / "per_distance.csv")
    oa_profile_figure(report.distances, report.per_d_oa, report.scenario,
                      out / "oa_by_distance.svg")
    write_manifest(
        out / "manifest.json", "eval", cfg,
        inputs={"model": cfg["model"], "data": cfg["data"]},
        outputs=[str(out / n) for n in
                 ("report.json", "per_distance.csv", "oa_by_distance.svg")],
        extra={"average_oa": report.average_oa, "moa": report.moa,
               "scaled_pe": report.scaled_pe},
    )
    print(f"eval {report.scenario}: average OA {report.average_oa:.3f}, "
          f"MOA {report.moa:.3f}, ScaledPE {report.scaled_pe:.3f}")
    return 0


def cmd_plot(cfg: dict) -> int:
    _require(cfg, "model", "data", "distance")
    weights, meta = load_model(cfg["model"])
    data = read_dataset(cfg["data"], _scenario_override(cfg))
    scenario = data.scenario
    check_meta_compatible(meta, scenario)
    d = float(cfg["distance"])
    d_index = distance_index(scenario, d)
    mask = np.isclose(data.d, d, rtol=0.0, atol=1e-9)
    if not np.any(mask):
        raise ConfigError(f"dataset holds no samples at distance {d:g}")
    genuine_raw = data.p_r[mask]
    rng = eval_rng(cfg["seed"], d_index)
    gen_s = draw_model_samples(weights, d, scenario.d_max, genuine_raw.size, rng)
    gen_raw = inverse_scale(gen_s, scenario.scaling_coef)
    kcfg = KdeConfig(bandwidth=cfg["bandwidth"], grid_divisor=cfg["grid_divisor"])
    grid = overlap_grid(genuine_raw, gen_raw, kcfg)
    kde_gen = kde(genuine_raw, kcfg.bandwidth, grid)
    kde_mod = kde(gen_raw, kcfg.bandwidth, grid)
    oa = overlapped_area(genuine_raw, gen_raw, kcfg)
    out = Path(cfg["out"])
    out.parent.mkdir(parents=True, exist_ok=True)
    overlap_figure(grid, kde_gen, kde_mod, oa, d, scenario.name, out)
    curve_csv = out.with_suffix(".csv")
    _write_csv(curve_csv, ["x", "kde_genuine", "kde_generated"],
               [[float(a), float(b), float(c)]
                for a, b, c in zip(grid, kde_gen, kde_mod)])
    write_manifest(
        manifest_path(out), "plot", cfg,
        inputs={"model": cfg["model"], "data": cfg["data"]},
        outputs=[str(out), str(curve_csv)],
        extra={"oa": oa, "distance": d},
    )
    print(f"plot {scenario.name} d={d:g}: OA {oa:.3f} -> {out}")
    return 0


_HANDLERS = {
    "generate": cmd_generate,
    "train": cmd_train,
    "transfer": cmd_transfer,
    "eval": cmd_eval,
    "plot": cmd_plot,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args)
        return _HANDLERS[args.command](cfg)
    except (ChanMdnError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
