"""Command-line front end: single runs, fuzz campaigns, convergence campaigns, baseline diffs.

Exit codes: 0 when every verdict passes, 1 on a verdict failure (the failing
seed and a trace path are printed), 2 on bad flags.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import tempfile
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from typing import Optional

from .mv_consensus import CONCURRENT, SEQUENTIAL
from .scenarios import SCENARIOS, SCHEMA, ScenarioConfig, generate, run_scenario
from .to_urb import DEFAULT_DELTA

log = logging.getLogger("stabcons")


def _common(p: argparse.ArgumentParser, default_scenario: str, seeds: bool) -> None:
    p.add_argument("--scenario", default=default_scenario,
                   help=f"JSON scenario file, or a built-in name: {', '.join(SCENARIOS)}")
    p.add_argument("--nodes", type=int, default=None, help="number of processes (>= 3)")
    p.add_argument("--seed", type=int, default=0, help="seed (first seed for campaigns)")
    if seeds:
        p.add_argument("--seeds", type=int, default=100, help="number of seeds to run")
        p.add_argument("--jobs", type=int, default=1, help="worker threads")
    p.add_argument("--variant", choices=(SEQUENTIAL, CONCURRENT), default=None)
    p.add_argument("--delta", type=int, default=None, help="batching threshold for total-order scenarios")
    p.add_argument("--budget", type=int, default=None, help="step budget (0 picks the scenario default)")
    p.add_argument("--trace-out", default=None, help="write the NDJSON trace here")
    p.add_argument("--report-out", default=None, help="write the JSON report here")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="stabcons", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="cmd", required=True)
    _common(sub.add_parser("run", help="run one scenario"), "mv", seeds=False)
    _common(sub.add_parser("fuzz", help="run many seeds and aggregate verdicts"), "mv", seeds=True)
    _common(sub.add_parser("converge", help="transient-injection campaign"), "converge", seeds=True)
    _common(sub.add_parser("diff-baseline", help="paired mv and baseline runs on shared schedules"),
            "mrt", seeds=True)
    return ap


# -- configuration ---------------------------------------------------------------

def _config(args, seed: int) -> ScenarioConfig:
    """Scenario for one seed: a file is taken verbatim (flags override), a name is generated."""
    if os.path.isfile(args.scenario):
        with open(args.scenario, encoding="utf-8") as fh:
            cfg = ScenarioConfig.from_dict(json.load(fh))
        over = {"seed": seed}
        if args.nodes is not None:
            over["n"] = args.nodes
        for name in ("variant", "delta", "budget"):
            if getattr(args, name) is not None:
                over[name] = getattr(args, name)
        return replace(cfg, **over)
    if args.scenario not in SCENARIOS:
        raise ValueError(f"no scenario file or built-in scenario named {args.scenario!r}")
    return generate(args.scenario, args.nodes or 3, seed, variant=args.variant or SEQUENTIAL,
                    delta=args.delta or DEFAULT_DELTA, budget=args.budget or 0)


def _check_args(ap, args) -> None:
    if args.nodes is not None and args.nodes < 3:
        ap.error("--nodes must be at least 3")
    if getattr(args, "seeds", 1) < 1:
        ap.error("--seeds must be at least 1")
    if getattr(args, "jobs", 1) < 1:
        ap.error("--jobs must be at least 1")
    if args.delta is not None and args.delta < 1:
        ap.error("--delta must be positive")
    if args.budget is not None and args.budget < 0:
        ap.error("--budget must not be negative")
    try:
        _config(args, args.seed).validate()
    except (ValueError, KeyError, TypeError, json.JSONDecodeError) as e:
        ap.error(str(e))


# -- output ------------------------------------------------------------------------

def _write_json(path: Optional[str], doc: dict) -> None:
    if path:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True, default=str)
            fh.write("\n")


def _write_trace(path: str, trace) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for line in trace or ():
            fh.write(line + "\n")


def _failure_trace(args, cfg: ScenarioConfig) -> str:
    """Re-run a failing configuration with tracing on and return where the trace went."""
    report = run_scenario(cfg, keep_trace=True)
    path = args.trace_out or os.path.join(tempfile.gettempdir(),
                                          f"stabcons-{cfg.scenario}-n{cfg.n}-s{cfg.seed}.ndjson")
    _write_trace(path, report.trace)
    return path


def _fail_line(report, cfg, trace_path) -> str:
    names = ",".join(v.name for v in report.verdicts if not v.ok)
    return f"FAIL seed={cfg.seed} n={cfg.n} scenario={cfg.scenario} verdicts={names} trace={trace_path}"


# -- subcommands -------------------------------------------------------------------

def _cmd_run(args) -> int:
    cfg = _config(args, args.seed)
    report = run_scenario(cfg, keep_trace=True)
    if args.trace_out:
        _write_trace(args.trace_out, report.trace)
    doc = report.to_dict()
    _write_json(args.report_out, doc)
    for v in report.verdicts:
        print(f"{'PASS' if v.ok else 'FAIL'} {v.name}" + ("" if v.ok else f" {json.dumps(v.witness, default=str)}"))
    m = report.metrics
    shown = {k: m[k] for k in ("steps", "cycles", "max_bc_invocations", "cycles_to_legal", "cycles_to_pred") if k in m}
    print(f"seed={cfg.seed} n={cfg.n} scenario={cfg.scenario} trace_hash={report.trace_hash[:16]} {json.dumps(shown)}")
    if report.ok:
        return 0
    path = args.trace_out
    if not path:
        path = os.path.join(tempfile.gettempdir(), f"stabcons-{cfg.scenario}-n{cfg.n}-s{cfg.seed}.ndjson")
        _write_trace(path, report.trace)
    print(_fail_line(report, cfg, path))
    return 1


def _campaign(args):
    seeds = range(args.seed, args.seed + args.seeds)
    cfgs = [_config(args, s) for s in seeds]
    if args.jobs > 1:
        with ThreadPoolExecutor(max_workers=args.jobs) as ex:
            reports = list(ex.map(run_scenario, cfgs))
    else:
        reports = [run_scenario(c) for c in cfgs]
    return cfgs, reports


def _summarize(args, cfgs, reports, extra: dict) -> int:
    counts: dict = {}
    for r in reports:
        for v in r.verdicts:
            c = counts.setdefault(v.name, Counter())
            c["pass" if v.ok else "fail"] += 1
    failing = [(c, r) for c, r in zip(cfgs, reports) if not r.ok]
    doc = {"schema": SCHEMA, "command": args.cmd, "runs": len(reports), "passed": len(reports) - len(failing),
           "verdicts": {k: dict(v) for k, v in sorted(counts.items())},
           "failing_seeds": [c.seed for c, _ in failing], "config": cfgs[0].to_dict() if cfgs else None}
    doc.update(extra)
    for name, c in sorted(counts.items()):
        print(f"{name}: {c['pass']}/{c['pass'] + c['fail']} pass")
    for k, v in extra.items():
        if k != "table":
            print(f"{k}: {json.dumps(v, default=str)}")
    rc = 0
    if failing:
        rc = 1
        cfg, report = failing[0]
        path = _failure_trace(args, cfg)
        for c, r in failing:
            print(_fail_line(r, c, path if c is cfg else "-"))
        doc["first_failure_trace"] = path
    _write_json(args.report_out, doc)
    print(f"{len(reports) - len(failing)}/{len(reports)} runs passed")
    return rc


def _cmd_fuzz(args) -> int:
    cfgs, reports = _campaign(args)
    outcomes = Counter()
    for r in reports:
        res = r.metrics.get("results")
        if res:
            outcomes.update(v.split(":")[0] for v in res.values())
    extra = {"outcomes": dict(outcomes)} if outcomes else {}
    return _summarize(args, cfgs, reports, extra)


def _cmd_converge(args) -> int:
    cfgs, reports = _campaign(args)
    extra: dict = {}
    for key in ("steps_to_converge", "cycles_to_legal", "cycles_to_pred"):
        vals = [r.metrics[key] for r in reports if r.metrics.get(key) is not None]
        if vals:
            extra[f"max_{key}"] = max(vals)
    outcomes = Counter(r.metrics["outcome"] for r in reports if "outcome" in r.metrics)
    if outcomes:
        extra["outcomes"] = dict(outcomes)
    return _summarize(args, cfgs, reports, extra)


def _cmd_diff(args) -> int:
    """Same schedule, once with the baseline and once with the mv object."""
    rows = []
    cfgs, reports = [], []
    print(f"{'seed':>6} {'n':>2} {'baseline':<24} {'mv':<24} {'bc base':>7} {'bc mv':>6}")
    for s in range(args.seed, args.seed + args.seeds):
        base_cfg = _config(args, s)
        base_cfg = replace(base_cfg, scenario="mrt")
        mv_cfg = replace(base_cfg, scenario="mv")
        rb, rm = run_scenario(base_cfg), run_scenario(mv_cfg)
        cfgs += [base_cfg, mv_cfg]
        reports += [rb, rm]
        res_b = sorted(set(rb.metrics["results"].values()))
        res_m = sorted(set(rm.metrics["results"].values()))
        rows.append({"seed": s, "baseline": res_b, "mv": res_m,
                     "bc_baseline": rb.metrics["max_bc_invocations"], "bc_mv": rm.metrics["max_bc_invocations"]})
        print(f"{s:>6} {base_cfg.n:>2} {'|'.join(res_b)[:24]:<24} {'|'.join(res_m)[:24]:<24} "
              f"{rows[-1]['bc_baseline']:>7} {rows[-1]['bc_mv']:>6}")
    return _summarize(args, cfgs, reports, {"table": rows})


def main(argv: Optional[list] = None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    _check_args(ap, args)
    handler = {"run": _cmd_run, "fuzz": _cmd_fuzz, "converge": _cmd_converge, "diff-baseline": _cmd_diff}[args.cmd]
    return handler(args)


if __name__ == "__main__":
    sys.exit(main())
