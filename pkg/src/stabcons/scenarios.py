"""Scenario configurations, their seeded generators, and the run harness.

A :class:`ScenarioConfig` is plain data (JSON round-trippable).  The
``generate`` helper derives a randomized but reproducible configuration from
``(scenario, n, seed)``; ``run_scenario`` executes one configuration and
returns a :class:`RunReport` with verdicts and metrics.
"""
from __future__ import annotations

import hashlib
import logging
import random
from dataclasses import asdict, dataclass, field
from typing import Optional

from .core_types import BOT, TRANSIENT_ERROR, Decided, Kind
from .faults import CONTRAST_RECIPES, MV_RECIPES, inject_contrast, inject_mv, inject_to_urb, rsm_value
from .invariant_suite import (Verdict, _def4_node, check_agreement, check_def2_consistent, check_integrity, check_pred,
                         check_termination, check_total_order, check_validity)
from .mv_consensus import CONCURRENT, SEQUENTIAL
from .node import MRT, MV, ConsensusNode
from .rsm import RsmNode
from .simulator import EV_ACT, EV_BC, EV_CALL, EV_PKT, FaultConfig, World
from .to_urb import DEFAULT_DELTA, M, ToUrbNode

log = logging.getLogger(__name__)

SCENARIOS = ("mv", "mrt", "converge", "contrast", "to_urb", "quiescence", "rsm")
SCHEMA = 1
CYCLE_BOUND = 6
QUIESCENCE_CYCLES = 3
MRT_ROUNDS_PER_NODE = 64


@dataclass
class ScenarioConfig:
    scenario: str = "mv"
    n: int = 3
    seed: int = 0
    variant: str = SEQUENTIAL
    delta: int = DEFAULT_DELTA
    budget: int = 0
    faults: FaultConfig = field(default_factory=FaultConfig)
    recipes: list = field(default_factory=list)
    proposers: list = field(default_factory=list)
    broadcasts: list = field(default_factory=list)
    inject_at: Optional[int] = None
    t: Optional[int] = None

    def validate(self) -> None:
        if self.scenario not in SCENARIOS:
            raise ValueError(f"unknown scenario {self.scenario!r}")
        if self.n < 3:
            raise ValueError("n >= 3 required")
        if self.variant not in (SEQUENTIAL, CONCURRENT):
            raise ValueError(f"unknown variant {self.variant!r}")
        if self.delta < 1:
            raise ValueError("delta must be positive")
        if self.t is not None and not 0 <= self.t <= (self.n - 1) // 2:
            raise ValueError(f"t={self.t} violates t < n/2")
        if self.t is not None and len(self.faults.crashes) > self.t:
            raise ValueError("more crashes scheduled than t allows")
        self.faults.validate(self.n)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["faults"]["crashes"] = {str(k): v for k, v in self.faults.crashes.items()}
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ScenarioConfig":
        d = dict(d)
        d["faults"] = FaultConfig.from_dict(d.get("faults", {}))
        d["proposers"] = [tuple(x) for x in d.get("proposers", [])]
        d["broadcasts"] = [tuple(x) for x in d.get("broadcasts", [])]
        known = {f for f in cls.__dataclass_fields__}
        return cls(**{k: v for k, v in d.items() if k in known})


@dataclass
class RunReport:
    config: dict
    verdicts: list
    metrics: dict
    trace_hash: str
    trace: Optional[list] = None

    @property
    def ok(self) -> bool:
        return all(v.ok for v in self.verdicts)

    def verdict(self, name: str) -> Optional[Verdict]:
        return next((v for v in self.verdicts if v.name == name), None)

    def to_dict(self) -> dict:
        return {"schema": SCHEMA, "config": self.config, "ok": self.ok,
                "verdicts": [v.as_dict() for v in self.verdicts], "metrics": self.metrics,
                "trace_hash": self.trace_hash}


# -- generation -------------------------------------------------------------------

def _lossy_faults(rng: random.Random, n: int, crash_window: int, crashes: bool = True) -> FaultConfig:
    t = rng.randint(0, (n - 1) // 2) if crashes else 0
    victims = rng.sample(range(n), t)
    return FaultConfig(
        crashes={p: rng.randint(1, crash_window) for p in victims},
        drop=round(rng.uniform(0.01, 0.3), 3),
        dup=round(rng.uniform(0.01, 0.2), 3),
        reorder=True,
    )


def generate(scenario: str, n: int, seed: int, variant: str = SEQUENTIAL, delta: int = DEFAULT_DELTA,
             budget: int = 0) -> ScenarioConfig:
    """Reproducible randomized configuration for ``(scenario, n, seed)``."""
    if scenario == "rsm":
        n = 3
    rng = random.Random(f"{scenario}/{n}/{seed}")
    cfg = ScenarioConfig(scenario=scenario, n=n, seed=seed, variant=variant, delta=delta, budget=budget)
    if scenario in ("mv", "mrt"):
        cfg.faults = _lossy_faults(rng, n, 300)
        live = [p for p in range(n) if p not in cfg.faults.crashes]
        chosen = set(rng.sample(range(n), rng.randint(1, n))) | {rng.choice(live)}
        if scenario == "mrt":
            # the baseline only decides at processes that invoked propose
            chosen = set(range(n))
        cfg.proposers = [(p, rng.randint(1, 60)) for p in sorted(chosen)]
    elif scenario == "converge":
        cfg.faults = _lossy_faults(rng, n, 600)
        cfg.proposers = [(p, rng.randint(1, 30)) for p in range(n)]
        cfg.inject_at = rng.randint(1, 250)
        k = rng.randint(1, 3)
        cfg.recipes = rng.sample(MV_RECIPES, k)
        if "all_false" not in cfg.recipes and rng.random() < 0.25:
            cfg.recipes.append("all_false")
    elif scenario == "contrast":
        cfg.faults = _lossy_faults(rng, n, 1, crashes=False)
        cfg.proposers = [(p, 1 + p) for p in range(n)]
        cfg.inject_at = 0
        cfg.recipes = [CONTRAST_RECIPES[seed % len(CONTRAST_RECIPES)]]
    elif scenario in ("to_urb", "rsm", "quiescence"):
        cfg.faults = _lossy_faults(rng, n, 2500)
        cfg.faults.drop = round(rng.uniform(0.01, 0.15), 3)
        if scenario == "quiescence":
            cfg.broadcasts = [(rng.randint(1, 1500), rng.randrange(n)) for _ in range(rng.randint(1, 8))]
        elif scenario == "rsm":
            cfg.inject_at = rng.randint(50, 400)
            cfg.broadcasts = [(rng.randint(cfg.inject_at + 1, cfg.inject_at + 3000), rng.randrange(n))
                              for _ in range(20)]
        else:
            cfg.inject_at = rng.randint(100, 1500)
            before = [(rng.randint(1, cfg.inject_at), rng.randrange(n)) for _ in range(rng.randint(2, 8))]
            after = [(rng.randint(cfg.inject_at + 1, cfg.inject_at + 6000), rng.randrange(n))
                     for _ in range(rng.randint(8, 16))]
            cfg.broadcasts = before + after
        cfg.broadcasts.sort()
    else:
        raise ValueError(f"unknown scenario {scenario!r}")
    cfg.t = len(cfg.faults.crashes)
    return cfg


# -- helpers ----------------------------------------------------------------------

def _touched(ev) -> Optional[int]:
    kind = ev[0]
    if kind in (EV_ACT, EV_CALL, EV_BC):
        return ev[1]
    if kind == EV_PKT:
        return ev[1].msg.dest
    return None


def _metrics(world: World, extra: dict) -> dict:
    m = dict(sorted(world.metrics.items()))
    m["steps"] = world.clock
    m["cycles"] = world.cycles
    m.update(extra)
    return m


def _show(r) -> str:
    if isinstance(r, Decided):
        return "Decided:" + r.value.hex()
    return repr(r)


# -- single-shot consensus --------------------------------------------------------

class _ResultWatch:
    """Observer keeping every process's result history (transitions only)."""

    def __init__(self, nodes):
        self.nodes = nodes
        self.hist = {p.pid: [BOT] for p in nodes}

    def __call__(self, world, ev) -> None:
        pid = _touched(ev)
        if pid is None:
            return
        r = self.nodes[pid].result()
        h = self.hist[pid]
        if r != h[-1]:
            h.append(r)
            world.record("mv_result", p=pid, result=_show(r))

    def all_non_bot(self, pids) -> bool:
        return all(self.hist[p][-1] is not BOT for p in pids)


def _build_single(cfg: ScenarioConfig, protocol: str, keep_trace: bool):
    world = World(cfg.n, cfg.seed, FaultConfig.from_dict(asdict(cfg.faults)), keep_trace)
    nodes = [ConsensusNode(i, cfg.n, world, protocol, cfg.variant) for i in range(cfg.n)]
    world.add_processes(nodes)
    proposed: list = []
    values = {}
    for pid, step in cfg.proposers:
        v = f"v{pid}.{cfg.seed}".encode()
        values[pid] = v

        def call(pid=pid, v=v):
            nodes[pid].propose(v)
            proposed.append(v)

        world.at(step, pid, call)
    watch = _ResultWatch(nodes)
    world.observers.append(watch)
    return world, nodes, proposed, values, watch


def run_single(cfg: ScenarioConfig, keep_trace: bool = False) -> RunReport:
    """Fault-free (no corruption) single-shot run of the mv object or the baseline."""
    protocol = MRT if cfg.scenario == "mrt" else MV
    world, nodes, proposed, _, watch = _build_single(cfg, protocol, keep_trace)
    budget = cfg.budget or 40_000
    live = world.never_crashing()
    world.run(stop=lambda w: watch.all_non_bot(live), budget=budget)
    world.run(budget=min(budget, world.clock + 40 * cfg.n))

    final = {p: nodes[p].result() for p in range(cfg.n)}
    everything = {}
    for p, h in watch.hist.items():
        for i, r in enumerate(h):
            everything[(p, i)] = r
    verdicts = [check_agreement(everything), check_validity(everything, proposed)]
    bad = [(p, v) for p in range(cfg.n) if not (v := check_integrity(watch.hist[p])).ok]
    verdicts.append(Verdict("integrity", not bad, {"process": bad[0][0], **bad[0][1].witness} if bad else {}))
    verdicts.append(check_termination(final, live))
    inv = {p: nodes[p].bcc.invocations for p in range(cfg.n)}
    if protocol == MV:
        over = {p: c for p, c in inv.items() if c > cfg.n}
        verdicts.append(Verdict("bc_bound", not over, {"invocations": over} if over else {}))
        if cfg.variant == CONCURRENT:
            multi = {p: nodes[p].bcc.invocation_steps for p in range(cfg.n) if len(set(nodes[p].bcc.invocation_steps)) > 1}
            verdicts.append(Verdict("single_step_submission", not multi, {"steps": multi} if multi else {}))
    extra = {"bc_invocations": inv, "max_bc_invocations": max(inv.values()),
             "results": {p: _show(r) for p, r in final.items()}}
    if protocol == MRT:
        extra["rounds"] = {p: nodes[p].cons.rounds for p in range(cfg.n)}
    return RunReport(cfg.to_dict(), verdicts, _metrics(world, extra), world.trace_hash(),
                     world.trace if keep_trace else None)


def run_converge(cfg: ScenarioConfig, keep_trace: bool = False) -> RunReport:
    """Single-shot mv run with one transient injection, checked for convergence."""
    world, nodes, proposed, values, watch = _build_single(cfg, MV, keep_trace)
    world.run(budget=cfg.inject_at or 0)
    live = world.never_crashing()
    anchor = live[0]
    pool = sorted(values.values())
    before = {p: nodes[p].bcc.invocations for p in range(cfg.n)}
    injected = [inject_mv(world, nodes, r, pool, anchor) for r in cfg.recipes]
    for p in range(cfg.n):
        watch.hist[p].append(nodes[p].result())
    start = world.clock
    budget = start + (cfg.budget or 40_000)
    world.run(stop=lambda w: watch.all_non_bot(live), budget=budget)
    converged_at = world.clock
    world.run(budget=min(budget, world.clock + 40 * cfg.n))

    final = {p: nodes[p].result() for p in live}
    stuck = [p for p, r in final.items() if r is BOT]
    verdicts = [Verdict("leaves_bot", not stuck, {"stuck": stuck} if stuck else {})]
    bad = [p for p, r in final.items()
           if r is not TRANSIENT_ERROR and not check_def2_consistent(nodes[p].cons.obj)]
    verdicts.append(Verdict("def2_or_error", not bad, {"processes": bad} if bad else {}))
    after = {p: nodes[p].bcc.invocations - before[p] for p in range(cfg.n)}
    over = {p: c for p, c in after.items() if c > cfg.n}
    verdicts.append(Verdict("bc_bound_after_fault", not over, {"invocations": over} if over else {}))
    if cfg.variant == CONCURRENT:
        multi = [p for p in range(cfg.n) if len({s for s in nodes[p].bcc.invocation_steps if s > start}) > 1]
        verdicts.append(Verdict("single_step_submission", not multi, {"processes": multi} if multi else {}))
    extra = {"injected": injected, "steps_to_converge": converged_at - start,
             "results": {p: _show(r) for p, r in final.items()}, "bc_after_fault": after,
             "outcome": "error" if any(r is TRANSIENT_ERROR for r in final.values()) else "decided"}
    return RunReport(cfg.to_dict(), verdicts, _metrics(world, extra), world.trace_hash(),
                     world.trace if keep_trace else None)


def _run_contrast_side(cfg: ScenarioConfig, protocol: str, keep_trace: bool):
    world, nodes, proposed, values, watch = _build_single(cfg, protocol, keep_trace)
    pool = sorted(values.values())
    info = inject_contrast(world, nodes, cfg.recipes[0], pool)
    live = world.never_crashing()
    rounds_cap = MRT_ROUNDS_PER_NODE * cfg.n
    budget = cfg.budget or 60_000

    def stop(w):
        if watch.all_non_bot(live):
            return True
        if protocol == MRT:
            return all(nodes[p].cons.rounds >= rounds_cap for p in live if nodes[p].result() is BOT)
        return False

    world.run(stop=stop, budget=budget)
    final = {p: nodes[p].result() for p in live}
    return world, nodes, final, info


def run_contrast(cfg: ScenarioConfig, keep_trace: bool = False) -> RunReport:
    """Baseline and mv object under the same corruption and the same seed."""
    w_mrt, n_mrt, f_mrt, info = _run_contrast_side(cfg, MRT, keep_trace)
    w_mv, n_mv, f_mv, _ = _run_contrast_side(cfg, MV, keep_trace)
    mrt_live = all(r is not BOT for r in f_mrt.values())
    mv_ok = all(r is not BOT for r in f_mv.values()) and all(
        r is TRANSIENT_ERROR or check_def2_consistent(n_mv[p].cons.obj) for p, r in f_mv.items())
    verdicts = [
        Verdict("mv_pass", mv_ok, {} if mv_ok else {"results": {p: _show(r) for p, r in f_mv.items()}}),
        Verdict("baseline_liveness_failure", not mrt_live,
                {} if not mrt_live else {"results": {p: _show(r) for p, r in f_mrt.items()}}),
    ]
    extra = {"recipe": info["recipe"], "baseline_failed": not mrt_live, "mv_passed": mv_ok,
             "baseline_rounds": {p: n_mrt[p].cons.rounds for p in f_mrt},
             "rounds_cap": MRT_ROUNDS_PER_NODE * cfg.n,
             "mv_results": {p: _show(r) for p, r in f_mv.items()},
             "baseline_steps": w_mrt.clock}
    h = w_mrt.trace_hash() + w_mv.trace_hash()
    return RunReport(cfg.to_dict(), verdicts, _metrics(w_mv, extra), hashlib.sha256(h.encode()).hexdigest(),
                     (w_mrt.trace + w_mv.trace) if keep_trace else None)


# -- total order ------------------------------------------------------------------

class _LegalityWatch:
    """Tracks the last step at which some correct process was not legal.

    Legal means the ring invariants hold at every correct process, no SYNC
    or SYNCACK in flight carries a query number above its owner's, and no
    correct getSeq is more than one above the minimum correct obsS.
    The history of the minimum correct obsS is kept so the caller can tell
    when every correct process had moved past the injected tags that were
    actually reached.  Also tracks the last step with more than two active
    slots and the last step at which the quiescence predicate failed.
    """

    def __init__(self, nodes, world):
        self.nodes = nodes
        self.bad = {p.pid: False for p in nodes}
        self.last_bad = 0
        self.last_over2 = 0
        self.max_active = 0
        self.dirty_sn = True
        self.pred_from: Optional[int] = None
        self.last_pred_false = 0
        self.min_obs: list = []  # (step, min correct obsS) at each change

    def __call__(self, world, ev) -> None:
        pid = _touched(ev)
        if pid is not None:
            node = self.nodes[pid]
            self.bad[pid] = _def4_node(node, M) is not None
            if pid not in world.crashed:
                a = node.active_slots()
                if a > 2:
                    self.last_over2 = world.clock
                self.max_active = max(self.max_active, a)
        if self.dirty_sn:
            self.dirty_sn = any(
                m.sn > self.nodes[m.sender if m.kind == Kind.SYNC else m.dest].sn for m in world.sync_in_flight.values()
            )
        live = [p for p in range(world.n) if p not in world.crashed]
        lo = min(self.nodes[p].obs_s for p in live)
        # nobody may run more than one instance ahead of the slowest process
        spread = max(self.nodes[p].get_seq() for p in live) - lo > 1
        if spread or self.dirty_sn or any(self.bad[p] for p in live):
            self.last_bad = world.clock
        if not self.min_obs or self.min_obs[-1][1] != lo:
            self.min_obs.append((world.clock, lo))
        if self.pred_from is not None and world.clock >= self.pred_from:
            if not check_pred(self.nodes, world.correct()).ok:
                self.last_pred_false = world.clock

    def legal_at(self, tainted) -> tuple:
        """Return (legality step, effective tainted tag).

        The effective tag is the highest tainted tag that the final minimum
        obsS has reached; tags far above it were never used by any instance
        and cannot influence deliveries.  Legality starts once every correct
        obsS stays at or above that tag and the local checks hold.
        """
        final = self.min_obs[-1][1] if self.min_obs else 0
        t_eff = max((t for t in tainted if t <= final), default=-1)
        reach = 0
        for step, lo in self.min_obs:
            if lo < t_eff:
                reach = None
            elif reach is None:
                reach = step
        return max(self.last_bad + 1, reach or 0), t_eff


def _cycles_between(world: World, start: int, end: int) -> int:
    """Cycles needed after ``start`` until ``end``: marks strictly before ``end`` plus the one in progress."""
    if end <= start:
        return 0
    return sum(1 for m in world.cycle_marks if start < m < end) + 1


def _build_total_order(cfg: ScenarioConfig, keep_trace: bool, rsm: bool):
    world = World(cfg.n, cfg.seed, FaultConfig.from_dict(asdict(cfg.faults)), keep_trace)
    cls = RsmNode if rsm else ToUrbNode
    nodes = [cls(i, cfg.n, world, cfg.variant, cfg.delta) for i in range(cfg.n)]
    world.add_processes(nodes)
    sent: dict = {}
    for idx, (step, pid) in enumerate(cfg.broadcasts):
        payload = (f"k{idx % 3}=m{idx}." if rsm else f"m{idx}.{pid}").encode()

        def call(pid=pid, payload=payload):
            txd = nodes[pid].to_broadcast(payload)
            sent[(pid, txd.seq)] = world.clock

        world.at(step, pid, call)
    watch = _LegalityWatch(nodes, world)
    world.observers.append(watch)
    return world, nodes, sent, watch


def _all_delivered(world, nodes, sent, live) -> bool:
    for p in live:
        got = nodes[p].app_urb.consumed
        for (o, s) in sent:
            if o in live and got[o] < s:
                return False
    return True


def run_total_order(cfg: ScenarioConfig, keep_trace: bool = False) -> RunReport:
    rsm = cfg.scenario == "rsm"
    quiet = cfg.scenario == "quiescence"
    world, nodes, sent, watch = _build_total_order(cfg, keep_trace, rsm)
    budget = cfg.budget or 150_000
    injected = None
    inject_step = 0
    if cfg.inject_at is not None:
        world.run(budget=cfg.inject_at)
        injected = inject_to_urb(world, nodes, make_value=rsm_value) if rsm else inject_to_urb(world, nodes)
        world._cycle_done = set()
        inject_step = world.clock
        watch.last_bad = world.clock
    cutoff = max((s for s, _ in cfg.broadcasts), default=0)
    live = world.never_crashing()
    if quiet:
        watch.pred_from = cutoff

    def settled(w):
        return (w.clock > cutoff and not w.timers and _all_delivered(w, nodes, sent, live)
                and w.clock > watch.last_bad and check_pred(nodes, w.correct()).ok)

    while True:
        world.run(stop=settled, budget=budget)
        if watch.pred_from is None:
            watch.pred_from = world.clock
        # keep running for a few more cycles so persistence can be observed;
        # a late relay of a crashed sender's message restarts the wait
        settle_step = world.clock
        target = world.cycles + 4
        world.run(stop=lambda w: w.cycles >= target, budget=budget)
        if world.last_app_ready_step <= settle_step or world.clock >= budget:
            break
    end = world.clock

    verdicts = []
    extra: dict = {"injected": injected, "max_active_slots": watch.max_active}
    legal_at, t_eff = watch.legal_at(world.tainted_tags)
    legal = legal_at <= end
    if cfg.inject_at is not None:
        cyc = _cycles_between(world, inject_step, legal_at)
        extra.update(legal_at=legal_at, cycles_to_legal=cyc, t_eff=t_eff)
        verdicts.append(Verdict("legal_suffix", legal and sum(1 for m in world.cycle_marks if m > legal_at) >= 2,
                                {"legal_at": legal_at, "end": end}))
        verdicts.append(Verdict("cycles_to_legal", legal and cyc <= CYCLE_BOUND, {"cycles": cyc, "bound": CYCLE_BOUND}))
    verdicts.append(Verdict("slot_economy", watch.last_over2 < legal_at, {"last_over_two": watch.last_over2}))

    fresh = {k for k, step in sent.items() if step > legal_at}
    logs = {p: [it for it in nodes[p].delivered_log if (it[0], it[1]) in fresh] for p in live}
    verdicts.append(check_total_order(logs))
    missing = {p: sorted(k for k in fresh if k[0] in live and k not in {(o, s) for o, s, _ in logs[p]}) for p in live}
    missing = {p: m for p, m in missing.items() if m}
    verdicts.append(Verdict("fresh_termination", not missing, {"missing": missing} if missing else {}))
    dup = [p for p in live if len(nodes[p].delivered_log) != len({(o, s) for o, s, _ in nodes[p].delivered_log})]
    verdicts.append(Verdict("to_integrity", not dup, {"processes": dup} if dup else {}))
    verdicts.append(check_pred(nodes, world.correct()))
    extra.update(fresh_messages=len(fresh), delivered={p: len(nodes[p].delivered_log) for p in live},
                 obs_s={p: nodes[p].obs_s for p in live})

    if quiet:
        q = max(cutoff, world.last_app_ready_step)
        pred_at = watch.last_pred_false + 1
        cyc = _cycles_between(world, q, pred_at)
        extra.update(quiet_from=q, pred_at=pred_at, cycles_to_pred=cyc)
        verdicts.append(Verdict("quiescence", cyc <= QUIESCENCE_CYCLES and pred_at <= end,
                                {"cycles": cyc, "bound": QUIESCENCE_CYCLES}))
    if rsm:
        snaps = {p: nodes[p].get_state() for p in live}
        same = len(set(snaps.values())) == 1
        verdicts.append(Verdict("rsm_identical", same, {} if same else {"digests": {p: nodes[p].automaton.digest() for p in live}}))
        want = {}
        for (o, s) in sent:
            if o in live:
                want[o] = max(want.get(o, 0), s)
        short = {p: nodes[p].automaton.applied for p in live
                 if any(nodes[p].automaton.applied[o] < s for o, s in want.items())}
        verdicts.append(Verdict("rsm_applied", not short, {"applied": short} if short else {}))
        extra["snapshot"] = snaps[live[0]].decode("utf-8", "replace")
    return RunReport(cfg.to_dict(), verdicts, _metrics(world, extra), world.trace_hash(),
                     world.trace if keep_trace else None)


def run_scenario(cfg: ScenarioConfig, keep_trace: bool = False) -> RunReport:
    cfg.validate()
    if cfg.scenario in ("mv", "mrt"):
        return run_single(cfg, keep_trace)
    if cfg.scenario == "converge":
        return run_converge(cfg, keep_trace)
    if cfg.scenario == "contrast":
        return run_contrast(cfg, keep_trace)
    return run_total_order(cfg, keep_trace)
