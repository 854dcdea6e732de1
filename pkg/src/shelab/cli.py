"""Command-line entry point: config-driven experiments with stable outputs.

Exit codes: 0 all verdicts PASS, 2 at least one verdict FAIL, 1 execution or
configuration error.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
import time

import numpy as np

from . import __version__
from .config import (ConfigError, ExperimentConfig, config_hash,
                     derived_quantities, parse_config, validate_config)
from .diagnostics import (equivalence_harness, kappa_experiment,
                          sewing_rate_check, uniqueness_coupling)
from .drift import check_c_beta_minus_convergence, mollify
from .noise import sample_noise, simulate_convolution, write_array_dump
from .reporting import (RunRecord, overall_exit_code, write_manifest,
                        write_records)
from .runner import map_indexed
from .solver import (SchemeKind, SchemeSpec, SolverBlowup,
                     grid_mollification_level, simulate_path)


def _simulate_worker(args):
    cfg, index = args
    grid, tgrid = cfg.grid(), cfg.tgrid()
    conv = simulate_convolution(sample_noise(grid, tgrid, cfg.master_seed, index))
    scheme = SchemeSpec(SchemeKind.SPLITTING_EXACT,
                        mollify(cfg.drift, grid_mollification_level(grid, tgrid)))
    try:
        path = simulate_path(scheme, conv, cfg.initial_value)
    except SolverBlowup as exc:
        return index, None, exc.step
    return index, path.u, None


def run_simulate(cfg: ExperimentConfig, out_dir: str):
    records = []
    args = [(cfg, i) for i in range(cfg.realizations)]
    os.makedirs(out_dir, exist_ok=True)
    for index, field, blown in map_indexed(_simulate_worker, args, cfg.workers):
        if field is None:
            records.append(RunRecord("simulate", "", f"realization[{index}]",
                                     float(blown), 0.0, "FAIL"))
            continue
        dump = os.path.join(out_dir, f"u_{index:04d}.bin")
        write_array_dump(dump, field)
        records.append(RunRecord("simulate", "", f"final_sup[{index}]",
                                 float(np.abs(field[-1]).max()), 0.0, "INFO"))
    return records, {"simulate": "PASS" if not any(
        r.verdict == "FAIL" for r in records) else "FAIL"}


def run_kappa(cfg: ExperimentConfig, out_dir: str):
    rep = kappa_experiment(cfg)
    records = rep.records(tol=0.12)
    verdict = "PASS" if not any(r.verdict == "FAIL" for r in records) else "FAIL"
    return records, {"kappa": verdict}


def run_equivalence(cfg: ExperimentConfig, out_dir: str):
    table = equivalence_harness(cfg)
    return table.records(), {"equivalence": table.verdict}


def run_uniqueness(cfg: ExperimentConfig, out_dir: str):
    table = uniqueness_coupling(cfg)
    return table.records(), {"uniqueness": table.verdict}


def run_sewing(cfg: ExperimentConfig, out_dir: str):
    level = 1.0 / cfg.sewing_f_scale
    rep = sewing_rate_check(mollify(cfg.drift, level), cfg.sewing_gamma, cfg,
                            germ_tag=cfg.drift.form)
    records = rep.records()
    return records, {"sewing": "PASS" if rep.passed else "FAIL"}


def run_besov(cfg: ExperimentConfig, out_dir: str):
    ladder = [mollify(cfg.drift, n) for n in cfg.mollify_levels]
    q = cfg.drift.q if math.isfinite(cfg.drift.q) else math.inf
    rep = check_c_beta_minus_convergence(ladder, cfg.drift, cfg.drift.beta,
                                         q=q, radius=cfg.besov_radius)
    records = [RunRecord("besov", "", "surrogate_estimator", 1.0, 0.0, "INFO")]
    records += [RunRecord("besov", "", f"sup_norm[n={n}]", v, 0.0, "INFO")
                for n, v in zip(rep.levels, rep.sup_estimates)]
    records.append(RunRecord("besov", "", "bounded", float(rep.bounded), 0.0,
                             "PASS" if rep.bounded else "FAIL"))
    for bp, diffs in sorted(rep.differences.items()):
        for (lo, hi), d in zip(zip(rep.levels, rep.levels[1:]), diffs):
            records.append(RunRecord("besov", "", f"diff[b'={bp:g},{lo}->{hi}]",
                                     d, 0.0, "INFO"))
    records.append(RunRecord("besov", "", "cauchy", float(rep.cauchy_ok), 0.0,
                             "PASS" if rep.cauchy_ok else "FAIL"))
    return records, {"besov": "PASS" if rep.passed else "FAIL"}


_EXPERIMENTS = {
    "simulate": run_simulate,
    "kappa": run_kappa,
    "equivalence": run_equivalence,
    "uniqueness": run_uniqueness,
    "sewing": run_sewing,
    "besov": run_besov,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="shelab",
        description="stochastic heat equation laboratory")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in (*_EXPERIMENTS, "validate"):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True)
        p.add_argument("--seed", type=int, default=None,
                       help="override run.master_seed")
        p.add_argument("--workers", type=int, default=None,
                       help="override run.workers")
        p.add_argument("--out-dir", default="shelab-out")
        p.add_argument("--format", choices=("csv", "ndjson"), default=None)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = parse_config(args.config, strict=args.command != "validate")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"cannot read config: {exc}", file=sys.stderr)
        return 1

    if args.command == "validate":
        for line in derived_quantities(cfg):
            print(line)
        violations = validate_config(cfg)
        for v in violations:
            print(f"violation: {v}", file=sys.stderr)
        return 1 if violations else 0

    cfg = cfg.with_overrides(seed=args.seed, workers=args.workers,
                             out_format=args.format)
    start = time.time()
    try:
        records, verdicts = _EXPERIMENTS[args.command](cfg, args.out_dir)
    except (ValueError, RuntimeError, FloatingPointError) as exc:
        print(f"execution error: {exc}", file=sys.stderr)
        return 1
    path = write_records(records, args.out_dir, cfg.out_format)
    write_manifest(args.out_dir, config_hash=config_hash(cfg),
                   version=__version__, verdicts=verdicts,
                   wall_time=time.time() - start)
    print(f"wrote {path}")
    for name, verdict in verdicts.items():
        print(f"{name}: {verdict}")
    return overall_exit_code(records)


if __name__ == "__main__":
    sys.exit(main())
