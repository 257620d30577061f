"""Command-line front end: scenario generation, assessment, ELCC and method comparison.

Every output file carries the tool version, the config hash, the scenario
fingerprint and the solver tolerances.  Outputs contain no timestamps, so a
fixed seed and config reproduce them byte for byte.

Exit codes: 0 success, 1 invalid input, 2 numerical failure, 3 I/O failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np
from pydantic import ValidationError

from . import __version__
from .config import StudyConfig, build_system, load_config, load_traces, resolve
from .dispatch import DispatchError
from .elcc import (BracketError, ElccStudy, EvalContext, NonMonotoneError, ScenarioMismatchError, assess_scenarios,
                   compare_methods, elcc_benchmark, nameplate_mw, prepare_addition)
from .scenario import CacheMismatchError, ScenarioSet, generate

log = logging.getLogger("adequacy")

EXIT_OK, EXIT_INVALID, EXIT_NUMERIC, EXIT_IO = 0, 1, 2, 3


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="study configuration (JSON)")
    common.add_argument("--scenarios", help="scenario cache path (overrides paths.scenarios)")
    common.add_argument("--threads", type=int, default=None,
                        help="scenario worker threads (default: machine parallelism)")
    common.add_argument("--seed", type=int, default=None, help="override scenarios.seed")
    common.add_argument("--output-dir", help="override paths.output_dir")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="adequacy", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("gen-scenarios", parents=[common], help="sample and cache the fixed scenario set")
    p = sub.add_parser("assess", parents=[common], help="expected reliability of the configured system")
    p.add_argument("--dispatcher", choices=("optimal", "heuristic"), default="optimal")
    p = sub.add_parser("elcc", parents=[common], help="ELCC of study.addition")
    p.add_argument("--dispatcher", choices=("optimal", "heuristic"), default="optimal")
    p.add_argument("--emit-plot-data", action="store_true", help="also write tidy CSV for plotting")
    p = sub.add_parser("compare", parents=[common],
                       help="heuristic vs optimal ELCC for each scaling factor")
    p.add_argument("--emit-plot-data", action="store_true", help="also write tidy CSV for plotting")
    return parser


# --- helpers -------------------------------------------------------------------

class _Run:
    """Config, system and paths shared by every command."""

    def __init__(self, args):
        self.args = args
        cfg, self.base_dir = load_config(args.config)
        if args.seed is not None:
            cfg = cfg.model_copy(update={"scenarios": cfg.scenarios.model_copy(update={"seed": args.seed})})
        self.cfg: StudyConfig = cfg
        self.threads = args.threads if args.threads is not None else (os.cpu_count() or 1)
        if self.threads < 1:
            raise CliError("--threads must be >= 1", EXIT_INVALID)
        self.traces = load_traces(cfg, self.base_dir)
        self.resources, self.load = build_system(cfg, self.traces)
        self.cache = Path(args.scenarios) if args.scenarios else resolve(self.base_dir, cfg.paths.scenarios)
        out = Path(args.output_dir) if args.output_dir else resolve(self.base_dir, cfg.paths.output_dir)
        self.out_dir = out

    def scenario_set(self) -> ScenarioSet:
        if not self.cache.exists():
            raise CliError(f"scenario cache {self.cache} not found; run gen-scenarios first", EXIT_IO)
        sset = ScenarioSet.load(self.cache, self.resources, self.load, threads=self.threads)
        if sset.seed != self.cfg.scenarios.seed or sset.N != self.cfg.scenarios.N:
            raise CacheMismatchError(
                f"cache holds seed={sset.seed}, N={sset.N}; config asks for "
                f"seed={self.cfg.scenarios.seed}, N={self.cfg.scenarios.N}")
        return sset

    def provenance(self, fingerprint: str, **extra) -> dict:
        s = self.cfg.solver
        out = {
            "tool": "adequacy", "version": __version__, "config_hash": self.cfg.config_hash(),
            "scenario_fingerprint": fingerprint, "lp_backend": s.backend,
            "feas_tol": s.feas_tol, "opt_tol": s.opt_tol,
        }
        out.update(extra)
        return out

    def path(self, name: str) -> Path:
        self.out_dir.mkdir(parents=True, exist_ok=True)
        return self.out_dir / name

    def study_kwargs(self) -> dict:
        st = self.cfg.study
        return dict(metric=st.metric, epsilon=st.epsilon, delta_lo=st.delta_lo, delta_hi=st.delta_hi,
                    delta_resolution=st.delta_resolution, mode=st.mode, reference_efor=st.reference_efor,
                    reference_mean_repair_hours=st.reference_mean_repair_hours, target_metric=st.target_metric,
                    rules=st.priority.build(), threads=self.threads, backend=self.cfg.solver.backend,
                    feas_tol=self.cfg.solver.feas_tol, opt_tol=self.cfg.solver.opt_tol)

    def addition(self):
        units = self.cfg.study.addition.build_units()
        if not units:
            raise CliError("study.addition lists no units", EXIT_INVALID)
        return units if len(units) > 1 else units[0]

    def study_provenance(self, fingerprint: str) -> dict:
        st = self.cfg.study
        return self.provenance(fingerprint, epsilon=st.epsilon, delta_resolution=st.delta_resolution,
                               metric=st.metric, mode=st.mode,
                               tank_recharge=[p.tank_recharge for p in self.cfg.study.addition.colocated])


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _write_csv(path: Path, provenance: dict, header: list[str], rows) -> None:
    with path.open("w", newline="", encoding="utf-8") as fh:
        for k in sorted(provenance):
            fh.write(f"# {k}: {json.dumps(provenance[k])}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])


# --- commands ------------------------------------------------------------------

def cmd_gen_scenarios(run: _Run) -> dict:
    sc = run.cfg.scenarios
    sset = generate(run.resources, run.load, sc.N, sc.seed, block_days=sc.block_days,
                    randomize_initial_soc=sc.randomize_initial_soc, threads=run.threads)
    run.cache.parent.mkdir(parents=True, exist_ok=True)
    sset.save(run.cache)
    return {"scenarios": str(run.cache), "N": sset.N, "T": sset.T, **run.provenance(sset.fingerprint)}


def cmd_assess(run: _Run) -> dict:
    sset = run.scenario_set()
    d = run.args.dispatcher
    ctx = EvalContext(dispatcher=d, threads=run.threads, backend=run.cfg.solver.backend,
                      feas_tol=run.cfg.solver.feas_tol, opt_tol=run.cfg.solver.opt_tol,
                      rules=run.cfg.study.priority.build())
    m = assess_scenarios(run.resources, run.load, sset, ctx)
    prov = run.provenance(sset.fingerprint, dispatcher=d)
    report = {
        "provenance": prov,
        "config": run.cfg.model_dump(mode="json"),
        "N": sset.N,
        "eue_mwh": float(m.eue_mwh.mean()),
        "lole_steps": float(m.lole_steps.mean()),
        "peak_shortfall_mw": float(m.peak_shortfall_mw.mean()),
        "lp_solves": int(ctx.lp_solves),
    }
    _write_json(run.path(f"assess_{d}.json"), report)
    _write_csv(run.path(f"assess_{d}_scenarios.csv"), prov,
               ["scenario_id", "eue_mwh", "lole_steps", "peak_shortfall_mw"],
               ((n, float(m.eue_mwh[n]), int(m.lole_steps[n]), float(m.peak_shortfall_mw[n]))
                for n in range(sset.N)))
    return {"eue_mwh": report["eue_mwh"], "lole_steps": report["lole_steps"], **prov}


def cmd_elcc(run: _Run) -> dict:
    sset = run.scenario_set()
    d = run.args.dispatcher
    st = run.cfg.study
    base, addition, swap = prepare_addition(run.resources, run.addition(), 1.0, st.twin_baseline, st.replaces)
    study = ElccStudy(base, run.load, addition, sset, replaces=swap, dispatcher=d, **run.study_kwargs())
    result = elcc_benchmark(study)
    prov = run.study_provenance(sset.fingerprint)
    prov["dispatcher"] = d
    payload = {"provenance": prov, "config": run.cfg.model_dump(mode="json"), "result": result.to_json_dict()}
    _write_json(run.path(f"elcc_{d}.json"), payload)
    summary = result.summary()
    _write_csv(run.path(f"elcc_{d}.csv"), prov, list(summary), [list(summary.values())])
    _write_csv(run.path(f"elcc_{d}_trace.csv"), prov, ["iteration", "delta_mw", "metric"],
               ((i, x, y) for i, (x, y) in enumerate(result.trace)))
    if run.args.emit_plot_data:
        units = addition if isinstance(addition, tuple) else (addition,)
        cap = sum(nameplate_mw(u) for u in units)
        _write_csv(run.path(f"elcc_{d}_plot.csv"), prov,
                   ["method", "installed_capacity_mw", "elcc_mw", "elcc_fraction"],
                   [(d, float(cap), result.delta_mw, result.delta_mw / cap if cap > 0 else float("nan"))])
    return {"delta_mw": result.delta_mw, "iterations": result.iterations, **prov}


def cmd_compare(run: _Run) -> dict:
    sset = run.scenario_set()
    st = run.cfg.study
    rows = compare_methods(run.resources, run.load, run.addition(), sset, st.scaling_factors,
                           twin_baseline=st.twin_baseline, replaces=st.replaces, **run.study_kwargs())
    prov = run.study_provenance(sset.fingerprint)
    _write_csv(run.path("compare.csv"), prov, ["scaling_factor", "heuristic_elcc_mw", "optimal_elcc_mw"],
               ((r.factor, r.heuristic.delta_mw, r.optimal.delta_mw) for r in rows))
    dominated = [r.factor for r in rows if not r.dominates]
    payload = {
        "provenance": prov, "config": run.cfg.model_dump(mode="json"),
        "optimal_dominates_every_row": not dominated,
        "rows": [{"scaling_factor": r.factor, "installed_capacity_mw": r.installed_mw,
                  "heuristic": r.heuristic.summary(), "optimal": r.optimal.summary()} for r in rows],
    }
    _write_json(run.path("compare.json"), payload)
    if run.args.emit_plot_data:
        long_rows = []
        for r in rows:
            for method, res in (("heuristic", r.heuristic), ("optimal", r.optimal)):
                frac = res.delta_mw / r.installed_mw if r.installed_mw > 0 else float("nan")
                long_rows.append((r.factor, r.installed_mw, method, res.delta_mw, frac))
        _write_csv(run.path("compare_plot.csv"), prov,
                   ["scaling_factor", "installed_capacity_mw", "method", "elcc_mw", "elcc_fraction"], long_rows)
    if dominated:
        raise CliError(f"heuristic ELCC exceeds optimal ELCC at scaling factors {dominated}", EXIT_NUMERIC)
    return {"rows": len(rows), "optimal_dominates_every_row": not dominated, **prov}


COMMANDS = {"gen-scenarios": cmd_gen_scenarios, "assess": cmd_assess, "elcc": cmd_elcc, "compare": cmd_compare}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        run = _Run(args)
        summary = COMMANDS[args.command](run)
    except CliError as exc:
        log.error("%s", exc)
        return exc.code
    except (BracketError, NonMonotoneError, DispatchError) as exc:
        log.error("numerical failure: %s", exc)
        return EXIT_NUMERIC
    except (ValidationError, CacheMismatchError, ScenarioMismatchError, ValueError, KeyError) as exc:
        log.error("invalid input: %s", exc)
        return EXIT_INVALID
    except OSError as exc:
        log.error("I/O failure: %s", exc)
        return EXIT_IO
    print(json.dumps(summary, sort_keys=True))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
