"""Command-line interface: factorize / compile / eval / gradcheck / sweeps / report.

Every subcommand reads a JSON config (``--config PATH``) and writes CSV tables
and JSON manifests. Exit codes: 0 success, 1 validation error, 2 numerical
failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .compiler import compile_dfcn
from .conv import Filter
from .factorize import NumericalError, factorize_filter
from .nets import DFCN, deserialize, eval_edcnn, serialize
from .experiments import (
    ExperimentConfig,
    RateTable,
    approx_rate_run,
    learn_rate_run,
    slope_fit,
)
from .targets import target_by_name


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise SystemExit(1)


def _load_config(path: str) -> dict:
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(f"config file not found: {p}")
    with open(p) as fh:
        return json.load(fh)


def _manifest(config: dict, extra: dict | None = None) -> dict:
    doc = {"version": f"edcnn-{__version__}", "config": config}
    doc.update(extra or {})
    return doc


def _write_json(path: str, doc: dict):
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, default=float)


def _dfcn_from_doc(doc: dict) -> DFCN:
    layers = tuple(
        (np.asarray(entry["W"], dtype=float), np.asarray(entry["theta"], dtype=float))
        for entry in doc["layers"]
    )
    return DFCN(affine_layers=layers, output_weights=np.asarray(doc["output"], dtype=float))


def _cmd_factorize(cfg: dict) -> int:
    result = factorize_filter(Filter(np.asarray(cfg["filter"], dtype=float)),
                              int(cfg.get("s", 2)))
    doc = {
        "factors": [list(map(float, f.coeffs)) for f in result.factors],
        "depth_used": result.depth_used,
        "reconstruction_error": result.reconstruction_error,
    }
    out = cfg.get("output")
    if out:
        _write_json(out, doc)
    else:
        json.dump(doc, sys.stdout, indent=2)
        print()
    return 0


def _cmd_compile(cfg: dict) -> int:
    dfcn_doc = cfg["dfcn"]
    if isinstance(dfcn_doc, str):
        with open(dfcn_doc) as fh:
            dfcn_doc = json.load(fh)
    net = _dfcn_from_doc(dfcn_doc)
    compiled, report = compile_dfcn(
        net,
        int(cfg.get("s", 2)),
        probe_count=int(cfg.get("probes", 1000)),
        probe_seed=int(cfg.get("seed", 0)),
    )
    out_model = cfg.get("out_model", "model.edcnn.json")
    Path(out_model).parent.mkdir(parents=True, exist_ok=True)
    Path(out_model).write_bytes(serialize(compiled))
    _write_json(
        cfg.get("out_report", "compile_report.json"),
        _manifest(cfg, {
            "depth": report.depth,
            "layer_widths": list(report.layer_widths),
            "pool_sizes": list(report.pool_size),
            "probe_count": report.probe_count,
            "max_abs_error": report.max_abs_error,
            "status": report.status,
        }),
    )
    print(f"compiled depth={report.depth} max_probe_error={report.max_abs_error:.3e}")
    return 0


def _cmd_eval(cfg: dict) -> int:
    net = deserialize(Path(cfg["model"]).read_bytes())
    x = np.asarray(cfg["input"], dtype=float)
    print(repr(eval_edcnn(net, x)))
    return 0


def _cmd_gradcheck(cfg: dict) -> int:
    from .gradcheck import run_gradcheck

    summary = run_gradcheck(
        count=int(cfg.get("count", 50)),
        max_depth=int(cfg.get("max_depth", 6)),
        max_m=int(cfg.get("max_m", 32)),
        seed=int(cfg.get("seed", 0)),
        rel_tol=float(cfg.get("rel_tol", 1e-4)),
    )
    out = cfg.get("out")
    if out:
        _write_json(out, _manifest(cfg, summary))
    print(f"gradcheck: {summary['checked']} networks, "
          f"worst relative error {summary['worst_rel_error']:.3e}")
    if not summary["passed"]:
        raise NumericalError("gradient check failed")
    return 0


def _seed_table(args):
    kind, target_name, cfg_dict, seed = args
    exp = ExperimentConfig(**cfg_dict)
    target = target_by_name(target_name, exp.d)
    if kind == "approx":
        return approx_rate_run(target, exp.grid, exp.s, exp, seeds=[seed])
    return learn_rate_run(target, exp.grid, exp.noise, exp.s, exp, seeds=[seed])


def _run_sweep(kind: str, cfg: dict, jobs: int) -> RateTable:
    exp_fields = dict(
        target=cfg["target"],
        grid=tuple(cfg["grid"]),
        s=int(cfg.get("s", 2)),
        d=int(cfg.get("d", 1)),
        noise=float(cfg.get("sigma", 0.3)),
        restarts=int(cfg.get("restarts", 8)),
        epochs=int(cfg.get("epochs", 600)),
        n_mc=int(cfg.get("n_mc", 100_000)),
        seeds=tuple(cfg.get("seeds", [0, 1, 2])),
        train_size=int(cfg.get("train_size", 2048)),
    )
    exp = ExperimentConfig(**exp_fields)
    target = target_by_name(exp.target, exp.d)
    if jobs > 1 and len(exp.seeds) > 1:
        tasks = [(kind, exp.target, exp_fields, seed) for seed in exp.seeds]
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            tables = list(pool.map(_seed_table, tasks))
        rows = tuple(
            sorted(
                (r for t in tables for r in t.rows),
                key=lambda r: (r.scale, r.seed),
            )
        )
        return RateTable(rows=rows, metadata=tables[0].metadata)
    if kind == "approx":
        return approx_rate_run(target, exp.grid, exp.s, exp)
    return learn_rate_run(target, exp.grid, exp.noise, exp.s, exp)


def _cmd_sweep(kind: str, cfg: dict, jobs: int, deterministic: bool) -> int:
    table = _run_sweep(kind, cfg, 1 if deterministic else jobs)
    out_csv = cfg.get("out_csv", f"{kind}_rate.csv")
    Path(out_csv).parent.mkdir(parents=True, exist_ok=True)
    Path(out_csv).write_text(table.to_csv())
    _write_json(
        cfg.get("out_manifest", f"{kind}_rate_manifest.json"),
        _manifest(cfg, {"metadata": table.metadata, "rows": len(table.rows)}),
    )
    print(f"{kind}-rate: wrote {len(table.rows)} rows to {out_csv}")
    return 0


def _cmd_report(cfg: dict) -> int:
    table = RateTable.from_csv(Path(cfg["csv"]).read_text())
    slope, intercept, r2 = slope_fit(table)
    doc = _manifest(cfg, {"slope": slope, "intercept": intercept, "r_squared": r2})
    out = cfg.get("out")
    if out:
        _write_json(out, doc)
    print(f"slope={slope:.4f} intercept={intercept:.4f} r2={r2:.4f}")
    return 0


def main(argv=None) -> int:
    parser = _Parser(prog="edcnn", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("factorize", "compile", "eval", "gradcheck",
                 "approx-rate", "learn-rate", "report"):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="path to a JSON config")
        if name in ("approx-rate", "learn-rate"):
            p.add_argument("--jobs", type=int, default=1,
                           help="parallel workers over seeds")
            p.add_argument("--deterministic", action="store_true",
                           help="force sequential execution")

    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)

    try:
        cfg = _load_config(args.config)
        if args.command == "factorize":
            return _cmd_factorize(cfg)
        if args.command == "compile":
            return _cmd_compile(cfg)
        if args.command == "eval":
            return _cmd_eval(cfg)
        if args.command == "gradcheck":
            return _cmd_gradcheck(cfg)
        if args.command == "approx-rate":
            return _cmd_sweep("approx", cfg, args.jobs, args.deterministic)
        if args.command == "learn-rate":
            return _cmd_sweep("learn", cfg, args.jobs, args.deterministic)
        if args.command == "report":
            return _cmd_report(cfg)
        return 1
    except NumericalError as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        return 2
    except (ValueError, KeyError, OSError, json.JSONDecodeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
