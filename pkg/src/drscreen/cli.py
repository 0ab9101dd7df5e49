"""
drscreen command line.

    drscreen validate --config my.toml
    drscreen perf --config my.toml --out out/
    drscreen run --config my.toml --frequencies 1,2 --ages 20,40 --out out/
    drscreen psa --draws 2000 --seed 7 --workers 4 --out out/
    drscreen ceac --draws 2000 --wtp-max 60000 --wtp-step 500
    drscreen tornado --candidate copilot
    drscreen sweep --horizons 5:30

Without ``--config`` the bundled example parameter set is used. Exit status
is 0 on success; on an invalid configuration or argument a JSON object
describing the problem goes to stderr and the status is 2 (1 for I/O).
"""

from __future__ import annotations

import argparse
import json
import sys
from typing import List, Optional

import numpy as np

from .config import EXAMPLE_CONFIG, Config, ConfigError, load_config
from .grid import RunManifest, run_grid
from .markov import AGE_GROUPS, PERSPECTIVES, parse_frequency
from .reports import Provenance, emit_reports
from .sensitivity import ceac, horizon_sweep, relative_ranges, run_psa, tornado


def _csv_list(text: Optional[str]) -> Optional[List[str]]:
    if text is None:
        return None
    return [t.strip() for t in text.split(",") if t.strip()]


def _ages(text):
    items = _csv_list(text)
    if items is None:
        return None
    out = [int(t.split("-")[0]) for t in items]
    for a in out:
        if a not in AGE_GROUPS:
            raise ValueError(f"age group must be one of {AGE_GROUPS}, got {a}")
    return out


def _horizons(text: str) -> List[int]:
    if ":" in text:
        lo, hi = (int(x) for x in text.split(":"))
        return list(range(lo, hi + 1))
    return [int(x) for x in _csv_list(text)]


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", action="append", default=None,
                        help="TOML parameter file; repeat to layer overrides (default: bundled example)")
    common.add_argument("--out", default="out", help="output directory (default: out)")
    common.add_argument("--seed", type=int, default=None, help="master seed (default: from config)")
    common.add_argument("--workers", type=int, default=1, help="worker processes")
    common.add_argument("--perspective", choices=PERSPECTIVES, default="societal")
    common.add_argument("--strategies", help="comma-separated strategy names (default: all)")
    common.add_argument("--frequencies", help="comma-separated, e.g. 1,2,one-off (default: all)")
    common.add_argument("--ages", help="comma-separated start ages of age groups, e.g. 20,40")
    common.add_argument("--horizon", type=int, default=None,
                        help="years to simulate (default: until each band reaches the maximum age)")

    p = argparse.ArgumentParser(prog="drscreen", description=__doc__,
                                formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("validate", parents=[common], help="load and check the configuration only")
    sub.add_parser("perf", parents=[common], help="composed sensitivity/specificity/cost per strategy")
    sub.add_parser("run", parents=[common], help="scenario grid with CEA and frontiers")
    sub.add_parser("frontier", parents=[common], help="cost-effectiveness frontiers only")

    for name, text in (("psa", "probabilistic sensitivity analysis"),
                       ("ceac", "acceptability curves from a PSA")):
        sp = sub.add_parser(name, parents=[common], help=text)
        sp.add_argument("--draws", type=int, default=None, help="number of draws (default: from config)")
        sp.add_argument("--frequency", default="1", help="screening frequency of the PSA cell")
        sp.add_argument("--age", type=int, default=20, help="age group of the PSA cell")
        sp.add_argument("--per-draw", action="store_true", help="also write every draw")
        if name == "ceac":
            sp.add_argument("--wtp-max", type=float, default=None, help="default: 5x GDP per capita")
            sp.add_argument("--wtp-step", type=float, default=None, help="default: wtp-max / 100")

    tp = sub.add_parser("tornado", parents=[common], help="one-way sensitivity of an ICER")
    tp.add_argument("--candidate", action="append", default=None,
                    help="strategy compared with the status quo (repeatable; default: all)")
    tp.add_argument("--frequency", default="1")
    tp.add_argument("--age", type=int, default=20)
    tp.add_argument("--top", type=int, default=None, help="keep only the widest N bars")

    wp = sub.add_parser("sweep", parents=[common], help="CEA across time horizons")
    wp.add_argument("--horizons", default="5:30", help="lo:hi inclusive, or a comma list")
    wp.add_argument("--frequency", default="1")
    wp.add_argument("--age", type=int, default=20)
    return p


def _manifest(args, cfg: Config, analyses) -> RunManifest:
    freqs = _csv_list(args.frequencies)
    return RunManifest(
        config_paths=cfg.sources,
        strategies=_csv_list(args.strategies),
        frequencies=None if freqs is None else [parse_frequency(f) for f in freqs],
        age_groups=_ages(args.ages),
        perspective=args.perspective,
        seed=args.seed if args.seed is not None else cfg.psa_seed,
        out_dir=args.out,
        analyses=tuple(analyses),
        horizon=args.horizon,
        workers=args.workers,
    )


def _report(paths):
    for p in paths:
        print(p)


def dispatch(args) -> int:
    cfg = load_config(args.config or [EXAMPLE_CONFIG])
    inputs = cfg.inputs
    if args.command == "validate":
        print(json.dumps({"status": "ok", "config_hash": cfg.config_hash, "sources": cfg.sources,
                          "strategies": list(inputs.strategies), "comparator": inputs.comparator}))
        return 0

    if args.workers < 1:
        raise ValueError("--workers must be >= 1")
    analyses = {"perf": ["strategy-performance"], "run": ["grid", "frontier"],
                "frontier": ["frontier"], "psa": ["psa"], "ceac": ["psa", "ceac"],
                "tornado": ["tornado"], "sweep": ["horizon-sweep"]}[args.command]
    manifest = _manifest(args, cfg, analyses)
    names = manifest.names(inputs)
    prov = Provenance(cfg.config_hash, manifest.seed)

    if args.command == "perf":
        perfs = inputs.performances()
        _report(emit_reports(args.out, manifest, prov, inputs=inputs,
                             performances={n: perfs[n] for n in names}))
        for n in names:
            p = perfs[n]
            print(f"{n:28s} {inputs.strategies[n]:12s} Se={p.sensitivity:.4f} Sp={p.specificity:.4f} "
                  f"cost/case={p.expected_cost_per_case:.2f}", file=sys.stderr)
        return 0

    if args.command in ("run", "frontier"):
        grid = run_grid(inputs, manifest)
        _report(emit_reports(args.out, manifest, prov, inputs=inputs, grid=grid))
        return 0

    freq = parse_frequency(args.frequency)
    if args.age not in AGE_GROUPS:
        raise ValueError(f"age group must be one of {AGE_GROUPS}, got {args.age}")

    if args.command in ("psa", "ceac"):
        if inputs.comparator not in names:
            names = [inputs.comparator] + names
        draws = args.draws if args.draws is not None else cfg.psa_draws
        psa = run_psa(inputs, inputs.distributions, draws, manifest.seed, freq, args.age,
                      names=names, horizon=args.horizon, perspective=args.perspective,
                      workers=args.workers)
        table = grid_wtp = None
        if args.command == "ceac":
            hi = args.wtp_max if args.wtp_max is not None else 5 * inputs.wtp.gdp_per_capita
            step = args.wtp_step if args.wtp_step is not None else hi / 100
            if hi <= 0 or step <= 0:
                raise ValueError("--wtp-max and --wtp-step must be positive")
            grid_wtp = np.arange(0.0, hi + step / 2, step)
            table = ceac(psa, grid_wtp)
        _report(emit_reports(args.out, manifest, prov, inputs=inputs, psa=psa, ceac_table=table,
                             ceac_grid=grid_wtp, per_draw=args.per_draw))
        if psa.diagnostics:
            print(json.dumps({"warning": "failed draws", "count": len(psa.diagnostics)}), file=sys.stderr)
        return 0

    if args.command == "tornado":
        ranges = relative_ranges(inputs, cfg.tornado_paths, cfg.tornado_spread)
        ranges.update(inputs.tornado_ranges)
        if not ranges:
            raise ValueError("no tornado parameters: set [tornado] paths or ranges in the config")
        candidates = args.candidate or [n for n in names if n != inputs.comparator]
        bars = {}
        for c in candidates:
            if c not in inputs.strategies:
                raise ValueError(f"unknown strategy {c!r}")
            bars[f"{c} vs {inputs.comparator}"] = tornado(
                inputs, inputs.comparator, c, ranges, freq, args.age, args.horizon, args.perspective)
        _report(emit_reports(args.out, manifest, prov, inputs=inputs, tornado=bars,
                             tornado_top=args.top))
        return 0

    if args.command == "sweep":
        sweep = horizon_sweep(inputs, _horizons(args.horizons), freq, args.age, args.perspective)
        _report(emit_reports(args.out, manifest, prov, inputs=inputs, horizon=sweep))
        return 0
    raise AssertionError(args.command)


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return dispatch(args)
    except ConfigError as exc:
        print(json.dumps(exc.as_dict()), file=sys.stderr)
        return 2
    except (ValueError, KeyError) as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return 2
    except OSError as exc:
        print(json.dumps({"error": "io", "message": str(exc), "path": exc.filename}), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
