"""Command-line entry point.

Subcommands: gen-tile, gen-data, fit, validate, compare, export-plot.
Exit codes: 0 success, 1 numerical failure, 2 usage or I/O error.
All commands are deterministic under a fixed --seed; CONSERVOLAST_THREADS
caps internal parallelism and CONSERVOLAST_BACKEND picks the kernel
implementation (numba or numpy).
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import compare as compare_mod
from . import fileio
from .errors import ConservolastError
from .fit import FitConfig, greedy_fit
from .homogenize import SamplingGrid, generate_training_data
from .kernels import FAMILIES
from .tiles import TILE_FAMILIES, TileSpec, make_tile
from .validate import (error_table, extrapolation_experiment,
                       orthogonal_validation)


def parse_grid(text: str) -> SamplingGrid:
    """Parse 'l1:lo:hi:n,theta:n' (also accepts 'lambda1'/'λ1')."""
    grid = SamplingGrid()
    for part in text.split(","):
        bits = part.split(":")
        key = bits[0].strip().lower()
        if key in ("l1", "lambda1", "λ1"):
            if len(bits) != 4:
                raise ValueError(f"expected l1:lo:hi:n, got {part!r}")
            grid.lambda1_lo, grid.lambda1_hi = float(bits[1]), float(bits[2])
            grid.n_lambda1 = int(bits[3])
        elif key == "theta":
            if len(bits) != 2:
                raise ValueError(f"expected theta:n, got {part!r}")
            grid.n_theta = int(bits[1])
        else:
            raise ValueError(f"unknown grid key {key!r}")
    return grid


def _fit_config(args) -> FitConfig:
    kwargs = {}
    if args.config:
        with open(args.config) as fh:
            kwargs.update(json.load(fh))
    if getattr(args, "kernel", None):
        kwargs["kernel_family"] = args.kernel
    if getattr(args, "max_rbfs", None) is not None:
        kwargs["max_rbfs"] = args.max_rbfs
    if getattr(args, "target_error", None) is not None:
        kwargs["target_error"] = args.target_error
    if getattr(args, "seed", None) is not None:
        kwargs["kmeans_seed"] = args.seed
    return FitConfig(**kwargs)


def _outdir(path):
    os.makedirs(path, exist_ok=True)
    return path


def cmd_gen_tile(args) -> int:
    spec = TileSpec(family=args.family, target_elements=args.elements,
                    young=args.young, poisson=args.poisson,
                    hole_radius=args.hole_radius, slit_length=args.slit_length,
                    slit_gap=args.slit_gap, chevron_angle=args.chevron_angle,
                    chevron_thickness=args.chevron_thickness)
    tile = make_tile(spec)
    fileio.save_tile(args.out, tile)
    print(f"wrote {args.out}: {tile.n_elements} elements, "
          f"{len(tile.vertices)} nodes, {len(tile.periodic_pairs)} periodic pairs")
    return 0


def cmd_gen_data(args) -> int:
    tile = fileio.load_tile(args.tile)
    grid = parse_grid(args.grid) if args.grid else SamplingGrid()
    samples, records, log = generate_training_data(tile, grid)
    grid_meta = {"lambda1_lo": grid.lambda1_lo, "lambda1_hi": grid.lambda1_hi,
                 "n_lambda1": grid.n_lambda1, "n_theta": grid.n_theta,
                 "ortho_offset": grid.ortho_offset, "seed": args.seed,
                 "tile": os.path.basename(args.tile)}
    fileio.save_samples(args.out, samples, records=records, grid_meta=grid_meta, log=log)
    print(f"wrote {args.out}: {len(samples)} samples ({len(log)} log events)")
    return 0


def cmd_fit(args) -> int:
    samples, _ = fileio.load_samples(args.samples)
    config = _fit_config(args)
    model, report = greedy_fit(samples, config)
    out = _outdir(args.out)
    fileio.save_model(os.path.join(out, "model.json"), model)
    fileio.save_json(os.path.join(out, "fit_report.json"),
                     fileio.fit_report_to_dict(report))
    with open(os.path.join(out, "per_sample_errors.csv"), "w") as fh:
        fh.write(fileio.per_sample_errors_csv(report))
    print(f"fit: {report.n_rbfs} RBFs, stress {report.stress_error_pct:.3f}%, "
          f"stiffness {report.stiffness_error_pct:.3f}%")
    return 0


def cmd_validate(args) -> int:
    if args.mode != "extrapolation" and not args.model:
        print(f"--model is required for mode {args.mode}", file=sys.stderr)
        return 2
    model = fileio.load_model(args.model) if args.mode != "extrapolation" else None
    samples, sidecar = fileio.load_samples(args.samples)
    out = _outdir(args.out)
    if args.mode == "errors":
        rep = error_table(model, samples)
        fileio.save_json(os.path.join(out, "validation.json"),
                         {"schema": fileio.REPORT_SCHEMA, "kind": "errors",
                          "stress_error_pct": rep.stress_error_pct,
                          "stiffness_error_pct": rep.stiffness_error_pct,
                          "metadata": rep.metadata})
        cols = ["stress_norm_target", "stress_norm_fitted", "stress_error_pct",
                "stiffness_norm_target", "stiffness_norm_fitted", "stiffness_error_pct"]
        with open(os.path.join(out, "validation_rows.csv"), "w") as fh:
            fh.write(fileio.rows_csv(rep.rows, cols))
        print(f"errors: stress {rep.stress_error_pct:.3f}%, "
              f"stiffness {rep.stiffness_error_pct:.3f}%")
    elif args.mode == "orthogonal":
        if not sidecar or not sidecar.get("rows"):
            print("orthogonal mode needs the samples sidecar metadata", file=sys.stderr)
            return 2
        points = [(r["lambda1"], r["theta"], r["lambda2"])
                  for r in sidecar["rows"] if r.get("branch") == "star"]
        rep = orthogonal_validation(model, points)
        fileio.save_json(os.path.join(out, "orthogonal.json"),
                         {"schema": fileio.REPORT_SCHEMA, "kind": "orthogonal",
                          "orthogonal_error_pct": rep.orthogonal_error_pct,
                          "metadata": rep.metadata})
        cols = ["lambda1", "theta", "lambda2_tile", "lambda2_model", "error_pct"]
        with open(os.path.join(out, "orthogonal_rows.csv"), "w") as fh:
            fh.write(fileio.rows_csv(rep.rows, cols))
        print(f"orthogonal: mean {rep.orthogonal_error_pct:.3f}%, "
              f"max {rep.metadata['max_error_pct']:.3f}%")
    elif args.mode == "extrapolation":
        if not sidecar or not sidecar.get("rows"):
            print("extrapolation mode needs the samples sidecar metadata", file=sys.stderr)
            return 2
        config = _fit_config(args)
        train_err, test_err, _, detail = extrapolation_experiment(
            samples, sidecar["rows"], args.split, config)
        fileio.save_json(os.path.join(out, "extrapolation.json"),
                         {"schema": fileio.REPORT_SCHEMA, "kind": "extrapolation",
                          "train_error_pct": train_err, "test_error_pct": test_err,
                          "detail": detail})
        print(f"extrapolation [{args.split}]: train {train_err:.2f}%, test {test_err:.2f}%")
    else:
        raise ValueError(f"unknown validate mode {args.mode!r}")
    return 0


def cmd_compare(args) -> int:
    samples, sidecar = fileio.load_samples(args.samples)
    out = _outdir(args.out)
    seed = args.seed if args.seed is not None else 0
    if args.mode == "rbf-types":
        rows = compare_mod.rbf_type_comparison(samples, n_centers=args.centers, seed=seed)
        cols = ["family", "stress_error_pct", "stiffness_error_pct",
                "mean_error_pct", "chosen_radius", "n_rbfs"]
        with open(os.path.join(out, "rbf_types.csv"), "w") as fh:
            fh.write(fileio.rows_csv(rows, cols))
        fileio.save_json(os.path.join(out, "rbf_types.json"),
                         {"schema": fileio.REPORT_SCHEMA, "kind": "rbf-types", "rows": rows})
        for r in rows:
            print(f"{r['family']:22s} mean {r['mean_error_pct']:.3f}%")
    elif args.mode == "ablation":
        rows = compare_mod.ablation_comparison(samples, seed=seed)
        counts = sorted(set(r["param_count"] for r in rows))
        cols = ["variant", "param_count", "stress_error_pct", "stiffness_error_pct", "n_rbfs"]
        with open(os.path.join(out, "ablation.csv"), "w") as fh:
            fh.write(fileio.rows_csv(rows, cols))
        fileio.save_json(os.path.join(out, "ablation.json"),
                         {"schema": fileio.REPORT_SCHEMA, "kind": "ablation", "rows": rows})
        print(f"ablation at {counts} parameters:")
        for r in rows:
            print(f"  {r['variant']:16s} stress {r['stress_error_pct']:.2f}% "
                  f"stiffness {r['stiffness_error_pct']:.2f}%")
    elif args.mode == "energy-interp":
        if not sidecar or not sidecar.get("rows"):
            print("energy-interp mode needs sidecar energies", file=sys.stderr)
            return 2
        energies = np.array([r["energy_density"] for r in sidecar["rows"]])
        rows = compare_mod.energy_interp_comparison(samples, energies, seed=seed)
        cols = ["variant", "param_count", "stress_error_pct", "stiffness_error_pct"]
        with open(os.path.join(out, "energy_interp.csv"), "w") as fh:
            fh.write(fileio.rows_csv(rows, cols))
        fileio.save_json(os.path.join(out, "energy_interp.json"),
                         {"schema": fileio.REPORT_SCHEMA, "kind": "energy-interp",
                          "rows": rows})
        for r in rows:
            print(f"  {r['variant']:28s} stress {r['stress_error_pct']:.2f}% "
                  f"stiffness {r['stiffness_error_pct']:.2f}%")
    elif args.mode == "curl":
        config = _fit_config(args)
        model, _ = greedy_fit(samples, config)
        rows, summary, _ = compare_mod.curl_comparison(samples, model, seed=seed)
        cols = ["sample", "conservative_curl_pct", "stress_interp_curl_pct"]
        with open(os.path.join(out, "curl.csv"), "w") as fh:
            fh.write(fileio.rows_csv(rows, cols))
        fileio.save_json(os.path.join(out, "curl.json"),
                         {"schema": fileio.REPORT_SCHEMA, "kind": "curl",
                          "summary": summary})
        print(f"curl: conservative max {summary['conservative_max_pct']:.2e}%, "
              f"stress-interp max {summary['stress_interp_max_pct']:.2f}%")
    else:
        raise ValueError(f"unknown compare mode {args.mode!r}")
    return 0


def cmd_export_plot(args) -> int:
    with open(args.report) as fh:
        data = json.load(fh)
    rows = []
    for entry in data.get("history", []) or []:
        k = entry.get("n_rbfs")
        for cand in entry.get("sweep", []) or []:
            rows.append({"n_rbfs": k, "radius": cand["radius"],
                         "mean_error_pct": (cand["mean_error_pct"]
                                            if cand["mean_error_pct"] is not None else ""),
                         "feasible": int(cand["feasible"])})
    if not rows:
        for cand in data.get("sweep", []) or []:
            rows.append({"n_rbfs": data.get("n_rbfs", ""), "radius": cand["radius"],
                         "mean_error_pct": (cand["mean_error_pct"]
                                            if cand["mean_error_pct"] is not None else ""),
                         "feasible": int(cand["feasible"])})
    cols = ["n_rbfs", "radius", "mean_error_pct", "feasible"]
    with open(args.out, "w") as fh:
        fh.write(fileio.rows_csv(rows, cols))
    print(f"wrote {args.out}: {len(rows)} rows")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="conservolast",
                                description="Conservative RBF elasticity toolkit")
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("gen-tile", help="generate a periodic microstructure tile")
    t.add_argument("--family", choices=TILE_FAMILIES, default="solid")
    t.add_argument("--elements", type=int, default=512)
    t.add_argument("--young", type=float, default=1.0)
    t.add_argument("--poisson", type=float, default=0.3)
    t.add_argument("--hole-radius", type=float, default=0.3)
    t.add_argument("--slit-length", type=float, default=0.55)
    t.add_argument("--slit-gap", type=float, default=0.10)
    t.add_argument("--chevron-angle", type=float, default=35.0)
    t.add_argument("--chevron-thickness", type=float, default=0.22)
    t.add_argument("--out", required=True)
    t.set_defaults(func=cmd_gen_tile)

    d = sub.add_parser("gen-data", help="homogenize a tile over the stretch grid")
    d.add_argument("--tile", required=True)
    d.add_argument("--grid", default=None, help="l1:lo:hi:n,theta:n")
    d.add_argument("--seed", type=int, default=0)
    d.add_argument("--out", required=True)
    d.set_defaults(func=cmd_gen_data)

    f = sub.add_parser("fit", help="fit an energy model to training samples")
    f.add_argument("--samples", required=True)
    f.add_argument("--config", default=None)
    f.add_argument("--kernel", choices=FAMILIES, default=None)
    f.add_argument("--max-rbfs", type=int, default=None)
    f.add_argument("--target-error", type=float, default=None)
    f.add_argument("--seed", type=int, default=None)
    f.add_argument("--out", required=True)
    f.set_defaults(func=cmd_fit)

    v = sub.add_parser("validate", help="error tables, orthogonal and extrapolation checks")
    v.add_argument("--model", default=None)
    v.add_argument("--samples", required=True)
    v.add_argument("--mode", choices=("errors", "orthogonal", "extrapolation"),
                   default="errors")
    v.add_argument("--split", choices=("lower-half-stretch", "half-directions"),
                   default="lower-half-stretch")
    v.add_argument("--config", default=None)
    v.add_argument("--kernel", choices=FAMILIES, default=None)
    v.add_argument("--max-rbfs", type=int, default=None)
    v.add_argument("--target-error", type=float, default=None)
    v.add_argument("--seed", type=int, default=None)
    v.add_argument("--out", required=True)
    v.set_defaults(func=cmd_validate)

    c = sub.add_parser("compare", help="kernel/ablation/energy-interp/curl comparisons")
    c.add_argument("--samples", required=True)
    c.add_argument("--mode", choices=("rbf-types", "ablation", "energy-interp", "curl"),
                   required=True)
    c.add_argument("--centers", type=int, default=10)
    c.add_argument("--config", default=None)
    c.add_argument("--kernel", choices=FAMILIES, default=None)
    c.add_argument("--max-rbfs", type=int, default=None)
    c.add_argument("--target-error", type=float, default=None)
    c.add_argument("--seed", type=int, default=None)
    c.add_argument("--out", required=True)
    c.set_defaults(func=cmd_compare)

    e = sub.add_parser("export-plot", help="flatten report JSON to tidy CSV")
    e.add_argument("--report", required=True)
    e.add_argument("--out", required=True)
    e.set_defaults(func=cmd_export_plot)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConservolastError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 1
    except (OSError, json.JSONDecodeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
