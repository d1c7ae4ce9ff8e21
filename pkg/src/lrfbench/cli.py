"""Command-line front end: `bench`, `sweep`, `synth` and `timing`.

Runs are pure functions of (config file, input files, seed): outputs are
byte-identical across reruns and worker counts. Exit codes: 0 success,
1 config or I/O error, 2 partial per-pair failures (details in errors.log).
By default the repeatability CSV leaves the ns_per_axis column empty so
reruns stay byte-identical; pass --measure-time to fill it, or use the
`timing` command for the dedicated protocol.
"""
from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

import yaml

from . import datasets, evaluate, registry
from .errors import LrfError

OUT_ENV = "LRFBENCH_OUT"
SWEEP_KINDS = ("radius", "weights", "disambiguation", "zdependency")


def _common_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="YAML run configuration")
    p.add_argument("--methods", help="comma-separated method names, or 'all'")
    p.add_argument("--seed", type=int, help="run seed (required for stochastic steps)")
    p.add_argument("--out", help=f"output directory (default ${OUT_ENV} or ./lrfbench-out)")
    p.add_argument("--workers", type=int, help="parallel workers per run (default 1)")
    p.add_argument("--overlap-min", type=float, help="minimum pair overlap (default 0.10)")
    p.add_argument("--threshold-deg", type=float, help="repeatability threshold (default 5)")
    p.add_argument("--keypoints", type=int, help="keypoints per pair (default 1000)")
    p.add_argument("--dataset", help="parameter preset column (default synthetic)")


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="lrfbench",
        description="Local reference frame axis benchmarking harness",
    )
    sub = p.add_subparsers(dest="command", required=True)

    bench = sub.add_parser("bench", help="repeatability per method")
    _common_flags(bench)
    bench.add_argument("--measure-time", action="store_true",
                       help="fill ns_per_axis (reruns stop being byte-identical)")

    sweep = sub.add_parser("sweep", help="radius/weight/disambiguation/z-dependency matrices")
    _common_flags(sweep)
    sweep.add_argument("--kinds", help=f"comma list from {','.join(SWEEP_KINDS)}")

    synth = sub.add_parser("synth", help="write a synthetic scene pair to disk")
    synth.add_argument("spec", help="YAML synthetic spec")
    synth.add_argument("--out", help="output directory")
    synth.add_argument("--name", default="pair", help="output file stem")

    timing = sub.add_parser("timing", help="median ns per axis across radii")
    _common_flags(timing)
    timing.add_argument("--radii", help="comma list of radii in mr (default 5..30)")
    timing.add_argument("--evals", type=int, help="evaluations per cell (default 120)")
    timing.add_argument("--timing-keypoints", type=int, help="distinct keypoints (default 150)")
    timing.add_argument(
        "--weights", choices=("w0", "default"), default="w0",
        help="weighting during timing; w0 keeps rows comparable (default)",
    )
    return p


def _load_config(args) -> dict:
    cfg: dict = {}
    if getattr(args, "config", None):
        path = Path(args.config)
        if not path.exists():
            raise FileNotFoundError(f"config file not found: {path}")
        cfg = yaml.safe_load(path.read_text()) or {}
        cfg["_dir"] = path.parent
    else:
        cfg["_dir"] = Path(".")
    for key, attr in (
        ("methods", "methods"),
        ("seed", "seed"),
        ("out", "out"),
        ("workers", "workers"),
        ("overlap_min", "overlap_min"),
        ("threshold_deg", "threshold_deg"),
        ("keypoints", "keypoints"),
        ("dataset", "dataset"),
    ):
        value = getattr(args, attr, None)
        if value is not None:
            cfg[key] = value
    cfg.setdefault("seed", 0)
    cfg.setdefault("workers", 1)
    cfg.setdefault("overlap_min", 0.10)
    cfg.setdefault("threshold_deg", evaluate.DEFAULT_THRESHOLD_DEG)
    cfg.setdefault("keypoints", evaluate.DEFAULT_KEYPOINTS)
    cfg.setdefault("dataset", "synthetic")
    return cfg


def _out_dir(cfg) -> Path:
    out = cfg.get("out") or os.environ.get(OUT_ENV) or "lrfbench-out"
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _method_names(cfg) -> list[str]:
    methods = cfg.get("methods", "all")
    if isinstance(methods, str):
        methods = [m.strip() for m in methods.split(",") if m.strip()]
    names: list[str] = []
    for m in methods:
        if m in ("all", "all14"):
            names.extend(registry.METHOD_NAMES)
        elif m in registry.METHOD_NAMES:
            names.append(m)
        else:
            raise KeyError(f"unknown method name {m!r}")
    return names


def _resolve_pairs(cfg) -> tuple[list, list[str], str]:
    """(pairs, per-entry errors, input label) from the config's input block."""
    spec_input = cfg.get("input")
    if not spec_input:
        raise ValueError("config needs an 'input' block (synthetic: or manifest:)")
    base = cfg.get("_dir", Path("."))
    if "manifest" in spec_input:
        path = Path(spec_input["manifest"])
        if not path.is_absolute():
            path = base / path
        pairs, errors = datasets.load_manifest(path, overlap_min=cfg["overlap_min"])
        return pairs, errors, path.stem
    if "synthetic" in spec_input:
        raw = spec_input["synthetic"]
        if isinstance(raw, str):
            path = Path(raw)
            if not path.is_absolute():
                path = base / path
            raw = yaml.safe_load(path.read_text()) or {}
        spec = datasets.SyntheticSpec.from_dict(raw)
        seeds = spec_input.get("seeds") or [spec.seed]
        pairs = []
        for s in seeds:
            d = dict(raw)
            d["seed"] = int(s)
            pairs.append(datasets.generate_synthetic(datasets.SyntheticSpec.from_dict(d)))
        return pairs, [], f"synthetic-{spec.shape}"
    raise ValueError("input block needs 'manifest' or 'synthetic'")


def _write_errors(out: Path, errors: list[str]) -> None:
    if errors:
        (out / "errors.log").write_text("\n".join(errors) + "\n")


def cmd_bench(args) -> int:
    cfg = _load_config(args)
    out = _out_dir(cfg)
    pairs, errors, label = _resolve_pairs(cfg)
    names = _method_names(cfg)
    specs = {n: registry.make_spec(n, cfg["dataset"]) for n in names}
    measure = bool(getattr(args, "measure_time", False) or cfg.get("measure_time", False))
    robustness = cfg.get("robustness")

    keypoints = evaluate._shared_keypoints(pairs, cfg["keypoints"], cfg["seed"])
    reports = []
    for name, spec in specs.items():
        if robustness:
            schedule = [
                datasets.NuisanceConfig(robustness["kind"], float(lv), cfg["seed"] + i)
                for i, lv in enumerate(robustness["levels"])
            ]
            for condition, report in evaluate.robustness_schedule(
                pairs, spec, schedule,
                n=cfg["keypoints"], threshold_deg=cfg["threshold_deg"],
                seed=cfg["seed"], workers=cfg["workers"], method=name,
            ):
                if report is not None:
                    reports.append(report)
        else:
            per_pair = [
                evaluate.repeatability_run(
                    p, spec, threshold_deg=cfg["threshold_deg"],
                    workers=cfg["workers"], scene_keypoints=kp, measure_time=measure,
                )
                for p, kp in zip(pairs, keypoints)
            ]
            reports.append(evaluate.aggregate_reports(per_pair, name, label))

    (out / "repeatability.csv").write_text(evaluate.reports_to_csv(reports))
    (out / "repeatability.json").write_text(evaluate.reports_to_json(reports))
    _write_errors(out, errors)
    return 2 if errors else 0


def cmd_sweep(args) -> int:
    cfg = _load_config(args)
    out = _out_dir(cfg)
    pairs, errors, _ = _resolve_pairs(cfg)
    sweep_cfg = cfg.get("sweep", {})
    kinds = getattr(args, "kinds", None) or sweep_cfg.get("kinds", list(SWEEP_KINDS))
    if isinstance(kinds, str):
        kinds = [k.strip() for k in kinds.split(",") if k.strip()]
    for k in kinds:
        if k not in SWEEP_KINDS:
            raise KeyError(f"unknown sweep kind {k!r}")
    radii = sweep_cfg.get("radii", list(evaluate.DEFAULT_RADII_MR))
    common = dict(
        dataset=cfg["dataset"], n=cfg["keypoints"],
        threshold_deg=cfg["threshold_deg"], seed=cfg["seed"], workers=cfg["workers"],
    )

    if "radius" in kinds:
        table = {
            m: evaluate.sweep_radius(pairs, m, radii, **common)
            for m in registry.METHOD_NAMES
        }
        (out / "sweep_radius.csv").write_text(evaluate.radius_matrix_csv(table, radii))
    if "weights" in kinds:
        table = {
            m: evaluate.sweep_weights(pairs, m, **common)
            for m in registry.WEIGHTED_METHOD_NAMES
        }
        (out / "sweep_weights.csv").write_text(evaluate.weights_matrix_csv(table))
    if "disambiguation" in kinds:
        table = {
            m: evaluate.sweep_disambiguation(pairs, m, **common)
            for m in registry.CA_METHOD_NAMES
        }
        (out / "sweep_disambiguation.csv").write_text(evaluate.disambiguation_matrix_csv(table))
    if "zdependency" in kinds:
        table = {
            m: evaluate.sweep_z_dependency(pairs, m, **common)
            for m in registry.Z_DEPENDENT_METHOD_NAMES
        }
        (out / "sweep_zdependency.csv").write_text(evaluate.zdependency_matrix_csv(table))
    _write_errors(out, errors)
    return 2 if errors else 0


def cmd_synth(args) -> int:
    path = Path(args.spec)
    if not path.exists():
        raise FileNotFoundError(f"synthetic spec not found: {path}")
    raw = yaml.safe_load(path.read_text()) or {}
    spec = datasets.SyntheticSpec.from_dict(raw)
    pair = datasets.generate_synthetic(spec)
    out = Path(args.out or os.environ.get(OUT_ENV) or "lrfbench-out")
    paths = datasets.write_pair(pair, out, name=args.name)
    for role, p in sorted(paths.items()):
        print(f"{role}: {p}")
    return 0


def cmd_timing(args) -> int:
    cfg = _load_config(args)
    out = _out_dir(cfg)
    pairs, errors, _ = _resolve_pairs(cfg)
    timing_cfg = cfg.get("timing", {})
    radii = getattr(args, "radii", None)
    if radii:
        radii = [float(r) for r in radii.split(",")]
    else:
        radii = timing_cfg.get("radii", list(evaluate.DEFAULT_RADII_MR))
    evals = getattr(args, "evals", None) or timing_cfg.get("evals", 120)
    n_kp = (
        getattr(args, "timing_keypoints", None)
        or timing_cfg.get("keypoints", 150)
    )
    weight_mode = getattr(args, "weights", "w0")
    names = _method_names(cfg)
    overrides = {"weight": "w0", "z_weight": "w0"} if weight_mode == "w0" else {}
    specs = {n: registry.make_spec(n, cfg["dataset"], **overrides) for n in names}

    surface = pairs[0].model
    kp = evaluate.sample_keypoints(surface.cloud, min(n_kp, len(surface.cloud)), cfg["seed"])
    rows = evaluate.timing_run(
        specs, surface, kp, radii, pairs[0].mr, evals=int(evals)
    )
    (out / "timing.csv").write_text(evaluate.timing_csv(rows))
    _write_errors(out, errors)
    return 2 if errors else 0


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "bench": cmd_bench,
        "sweep": cmd_sweep,
        "synth": cmd_synth,
        "timing": cmd_timing,
    }
    try:
        return handlers[args.command](args)
    except (LrfError, KeyError, ValueError, OSError) as e:
        msg = e.args[0] if e.args else e
        print(f"lrfbench: error: {msg}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
