"""Acceptance criteria 1 to 10 at full size.

Every test prints one ``criterion N: PASS|FAIL ...`` line, and the lines are
repeated in the terminal summary.  Campaigns are cached per session, so the
determinism check re-executes each one exactly once more.
"""
import time

import pytest

from oracle import all_vectors, consistent_oracle, k_oracle, result_oracle
from stabcons.bin_consensus import BcState
from stabcons.core_types import BOT, TRANSIENT_ERROR, Decided
from stabcons.invariant_suite import check_def2_consistent
from stabcons.mv_consensus import CONCURRENT, SEQUENTIAL, MvObject, k_macro, result_of
from stabcons.scenarios import CYCLE_BOUND, generate, run_scenario

pytestmark = pytest.mark.acceptance

LINES: dict = {}
_CACHE: dict = {}


def _say(capsys, num, ok, detail):
    line = f"criterion {num}: {'PASS' if ok else 'FAIL'} {detail}"
    LINES[num] = line
    with capsys.disabled():
        print("\n" + line)


def _plan(name):
    """(scenario, n, seed, variant) for every run of a campaign."""
    if name.startswith("def1"):
        v = name.split("/")[1]
        return [("mv", n, s, v) for n in (3, 4, 5) for s in range(500)]
    if name.startswith("converge"):
        v = name.split("/")[1]
        return [("converge", 3 + s % 3, s, v) for s in range(1000)]
    if name == "contrast":
        return [("contrast", 3 + s % 3, s, SEQUENTIAL) for s in range(200)]
    if name == "to_urb":
        return [("to_urb", 3 + s % 3, s, SEQUENTIAL) for s in range(300)]
    if name == "quiescence":
        return [("quiescence", 3 + s % 3, s, SEQUENTIAL) for s in range(100)]
    if name == "rsm":
        return [("rsm", 3, s, SEQUENTIAL) for s in range(100)]
    raise KeyError(name)


CAMPAIGNS = ("def1/" + SEQUENTIAL, "def1/" + CONCURRENT, "converge/" + SEQUENTIAL, "converge/" + CONCURRENT,
             "contrast", "to_urb", "quiescence", "rsm")


def _run(name):
    return [(key, run_scenario(generate(key[0], key[1], key[2], variant=key[3]))) for key in _plan(name)]


def campaign(name):
    if name not in _CACHE:
        t0 = time.perf_counter()
        reports = _run(name)
        _CACHE[name] = (reports, time.perf_counter() - t0)
    return _CACHE[name]


def _failing(reports, *names):
    out = []
    for key, r in reports:
        bad = [v.name for v in r.verdicts if (not names or v.name in names) and not v.ok]
        if bad:
            out.append((key, bad))
    return out


def test_criterion_1_consensus_properties(capsys):
    reports, secs = campaign("def1/" + SEQUENTIAL)
    bad = _failing(reports, "agreement", "validity", "integrity", "termination")
    ok = not bad and secs < 120
    _say(capsys, 1, ok, f"{len(reports) - len(bad)}/{len(reports)} runs, {secs:.1f}s (limit 120s)"
         + (f" first failure {bad[0]}" if bad else ""))
    assert ok


def test_criterion_2_bc_bound(capsys):
    reports, _ = campaign("def1/" + SEQUENTIAL)
    bad = _failing(reports, "bc_bound")
    worst = max(r.metrics["max_bc_invocations"] - key[1] for key, r in reports)
    _say(capsys, 2, not bad, f"{len(reports) - len(bad)}/{len(reports)} runs within n invocations, "
         f"max(invocations - n) = {worst}")
    assert not bad


def test_criterion_3_convergence(capsys):
    reports, _ = campaign("converge/" + SEQUENTIAL)
    bad = _failing(reports)
    recipes = sum("all_false" in r.config["recipes"] for _, r in reports)
    _say(capsys, 3, not bad, f"{len(reports) - len(bad)}/{len(reports)} runs converge "
         f"({recipes} include the all-False recipe)" + (f" first failure {bad[0]}" if bad else ""))
    assert not bad


def test_criterion_4_baseline_contrast(capsys):
    reports, _ = campaign("contrast")
    both = sum(r.ok for _, r in reports)
    mv_fail = sum(not r.verdict("mv_pass").ok for _, r in reports)
    rescued = sum(not r.verdict("baseline_liveness_failure").ok for _, r in reports)
    ok = both >= 0.95 * len(reports)
    _say(capsys, 4, ok, f"baseline stuck and mv passes on {both}/{len(reports)} seeds "
         f"(baseline rescued {rescued}, mv failed {mv_fail}; need >= 95%)")
    assert ok


def test_criterion_5_variant_equivalence(capsys):
    parts = []
    ok = True
    for v in (SEQUENTIAL, CONCURRENT):
        d1, secs = campaign("def1/" + v)
        conv, _ = campaign("converge/" + v)
        bad = _failing(d1) + _failing(conv)
        ok = ok and not bad and secs < 120
        parts.append(f"{v}: {len(d1) + len(conv) - len(bad)}/{len(d1) + len(conv)} ({secs:.1f}s def1)")
    single = _failing(campaign("def1/" + CONCURRENT)[0] + campaign("converge/" + CONCURRENT)[0],
                      "single_step_submission")
    ok = ok and not single
    parts.append(f"single-step submission violations: {len(single)}")
    _say(capsys, 5, ok, "; ".join(parts))
    assert ok


def test_criterion_6_total_order_suite(capsys):
    reports, _ = campaign("to_urb")
    bad = _failing(reports)
    cycles = [r.metrics["cycles_to_legal"] for _, r in reports]
    slots = max(r.metrics["max_active_slots"] for _, r in reports)
    _say(capsys, 6, not bad, f"{len(reports) - len(bad)}/{len(reports)} runs, max cycles to legality "
         f"{max(cycles)} (bound {CYCLE_BOUND}), peak active slots {slots} including the corrupted prefix"
         + (f" first failure {bad[0]}" if bad else ""))
    assert not bad


def test_criterion_7_quiescence(capsys):
    reports, _ = campaign("quiescence")
    bad = _failing(reports)
    cycles = sorted(r.metrics["cycles_to_pred"] for _, r in reports)
    _say(capsys, 7, not bad, f"{len(reports) - len(bad)}/{len(reports)} runs, cycles to pred "
         f"min {cycles[0]} median {cycles[len(cycles) // 2]} max {cycles[-1]} (bound 3)")
    assert not bad


def test_criterion_8_rsm_determinism(capsys):
    reports, _ = campaign("rsm")
    bad = _failing(reports)
    _say(capsys, 8, not bad, f"{len(reports) - len(bad)}/{len(reports)} runs with identical replica snapshots"
         + (f" first failure {bad[0]}" if bad else ""))
    assert not bad


def _entry(s):
    return {"inactive": None, "undecided": BcState(True, None), "false": BcState(False, False),
            "true": BcState(True, True)}[s]


def test_criterion_9_oracle_equivalence(capsys):
    mismatches = 0
    count = 0
    for props in ([b"p0", b"p1", b"p2", b"p3"], [None, b"p1", None, b"p3"], [None] * 4):
        for v in (b"v", None):
            for states in all_vectors(4):
                count += 1
                o = MvObject(v, list(props), [_entry(s) for s in states], None, False, 0)
                want = result_oracle(states, props, v)
                got = result_of(o)
                same = (got == Decided(want[1])) if want[0] == "decided" else \
                    (got is (BOT if want[0] == "bot" else TRANSIENT_ERROR))
                if not (same and k_macro(o) == k_oracle(states)
                        and check_def2_consistent(o) == consistent_oracle(states, props, v)):
                    mismatches += 1
    _say(capsys, 9, not mismatches, f"{count - mismatches}/{count} evaluations match "
         f"(256 vectors x 6 proposal/estimate settings)")
    assert not mismatches


def test_criterion_10_determinism(capsys):
    diffs = []
    total = 0
    for name in CAMPAIGNS:
        first, _ = campaign(name)
        again = _run(name)
        total += len(first)
        diffs += [k for (k, a), (_, b) in zip(first, again) if a.trace_hash != b.trace_hash]
    _say(capsys, 10, not diffs, f"{total - len(diffs)}/{total} re-executed runs reproduce their trace hash"
         + (f" first mismatch {diffs[0]}" if diffs else ""))
    assert not diffs
