"""Deterministic discrete-event world.

One event is processed per step: a protocol activation (one do-forever
iteration), a packet arrival, a binary consensus submission reaching the
ledger, a decision notification, or a scheduled workload call.  Every random
choice comes from the world's seeded generator, so ``(config, seed)`` fixes the
whole trace.
"""
from __future__ import annotations

import hashlib
import json
import logging
import random
from collections import Counter, deque
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional

from .bin_consensus import BcLedger
from .core_types import Kind, Message, decode, encode

log = logging.getLogger(__name__)

EV_ACT, EV_PKT, EV_BC, EV_CALL = range(4)

SYNC_KINDS = (Kind.SYNC, Kind.SYNCACK)


@dataclass
class FaultConfig:
    crashes: dict = field(default_factory=dict)
    drop: float = 0.0
    dup: float = 0.0
    reorder: bool = False
    force_every: int = 4
    detect_delay: int = 0
    channel_capacity: int = 64

    def validate(self, n: int) -> None:
        if len(self.crashes) > (n - 1) // 2:
            raise ValueError(f"{len(self.crashes)} crashes exceed t < n/2 for n={n}")
        for p in self.crashes:
            if not 0 <= int(p) < n:
                raise ValueError(f"crash target {p} outside [0, {n})")
        for name in ("drop", "dup"):
            x = getattr(self, name)
            if not 0.0 <= x <= 1.0:
                raise ValueError(f"{name} probability {x} outside [0, 1]")
        if self.channel_capacity < 1 or self.force_every < 1:
            raise ValueError("channel capacity and force_every must be positive")

    @classmethod
    def from_dict(cls, d: dict) -> "FaultConfig":
        d = dict(d)
        d["crashes"] = {int(k): int(v) for k, v in d.get("crashes", {}).items()}
        return cls(**d)


class _Packet:
    __slots__ = ("msg", "alive")

    def __init__(self, msg: Message):
        self.msg = msg
        self.alive = True


class World:
    def __init__(self, n: int, seed: int, faults: Optional[FaultConfig] = None, keep_trace: bool = False):
        if n < 3:
            raise ValueError("n >= 3 required")
        self.n = n
        self.seed = seed
        self.faults = faults or FaultConfig()
        self.faults.validate(n)
        self.rng = random.Random(seed)
        self.clock = 0
        self.queue: deque = deque()
        self.procs: list = []
        self.crashed: set = set()
        self.crash_step: dict = {}
        self._trusted = frozenset(range(n))
        self.ledger = BcLedger()
        self.in_flight: set = set()
        self.channels: dict = {}
        self.in_transit: Counter = Counter()
        self.send_count: Counter = Counter()
        self.sync_in_flight: dict = {}
        self.timers: list = []
        self.metrics: Counter = Counter()
        self.cycles = 0
        self._cycle_done: set = set()
        self.cycle_marks: list = []
        self.observers: list = []
        self.keep_trace = keep_trace
        self.trace: list = []
        self._hash = hashlib.sha256()
        self.last_app_ready_step = 0
        # ground truth about injected faults, used only by the harness
        self.tainted_tags: set = set()
        # values proposed from queries that saw no injected data, per tag
        self.clean_values: dict = {}
        self.tainted_msgs: set = set()
        self.keepalive: list = []

    # -- setup -------------------------------------------------------------

    def add_processes(self, procs) -> None:
        self.procs = list(procs)
        for p in self.procs:
            self.queue.append((EV_ACT, p.pid))

    def at(self, step: int, pid: int, fn: Callable) -> None:
        """Schedule a workload invocation ``fn()`` by process ``pid``."""
        self.timers.append((step, len(self.timers), pid, fn))
        self.timers.sort(key=lambda t: (t[0], t[1]))

    # -- oracle and transport interface -------------------------------------

    def correct(self) -> list:
        return [i for i in range(self.n) if i not in self.crashed]

    def never_crashing(self) -> list:
        return [i for i in range(self.n) if i not in self.faults.crashes]

    def trusted(self) -> frozenset:
        """Perfect failure detector: exactly the processes that have not crashed."""
        return self._trusted

    def trusted_oracle(self, i: int) -> frozenset:
        return self._trusted

    def _refresh_trusted(self) -> None:
        d = self.faults.detect_delay
        self._trusted = frozenset(
            i for i in range(self.n) if i not in self.crashed or self.clock < self.crash_step[i] + d
        )

    def send(self, msg: Message) -> None:
        src, dst = msg.sender, msg.dest
        if src in self.crashed or not 0 <= dst < self.n or src == dst:
            return
        ch = (src, dst)
        f = self.faults
        self.metrics["packets_sent"] += 1
        if f.drop > 0.0:
            self.send_count[ch] += 1
            forced = f.drop >= 1.0 and self.send_count[ch] % f.force_every == 0
            if not forced and self.rng.random() < f.drop:
                self.metrics["packets_dropped"] += 1
                return
        copies = 2 if (f.dup > 0.0 and self.rng.random() < f.dup) else 1
        if copies == 2:
            self.metrics["packets_duplicated"] += 1
        for _ in range(copies):
            self._put(ch, _Packet(msg))

    def _put(self, ch, pkt: _Packet) -> None:
        q = self.channels.get(ch)
        if q is None:
            q = self.channels[ch] = deque()
        while self.in_transit[ch] >= self.faults.channel_capacity:
            old = q.popleft()
            if old.alive:
                old.alive = False
                self.in_transit[ch] -= 1
                self._untrack(old)
                self.metrics["overflow_drops"] += 1
        q.append(pkt)
        if len(q) > 4 * self.faults.channel_capacity:
            self.channels[ch] = deque(p for p in q if p.alive)
        self.in_transit[ch] += 1
        if pkt.msg.kind in SYNC_KINDS:
            self.sync_in_flight[id(pkt)] = pkt.msg
        self._enqueue((EV_PKT, pkt))

    def _untrack(self, pkt: _Packet) -> None:
        if pkt.msg.kind in SYNC_KINDS:
            self.sync_in_flight.pop(id(pkt), None)

    def _enqueue(self, ev) -> None:
        if self.faults.reorder and self.queue:
            self.queue.insert(self.rng.randrange(len(self.queue) + 1), ev)
        else:
            self.queue.append(ev)

    def in_transit_messages(self):
        for q in self.channels.values():
            for p in q:
                if p.alive:
                    yield p.msg

    def submit_bc(self, pid: int, tag: int, batch) -> None:
        for k, _, _ in batch:
            self.in_flight.add((pid, tag, k))
        self.metrics["bc_submissions"] += 1
        self._enqueue((EV_BC, pid, tag, tuple(batch)))

    def bc_in_flight(self, pid: int, tag: int, k: int) -> bool:
        return (pid, tag, k) in self.in_flight

    def note_urb_delivery(self, pid: int, stream: int, origin: int, seq: int) -> None:
        self.metrics["urb_deliveries"] += 1
        if stream == 1:
            self.last_app_ready_step = self.clock

    def iteration_done(self, pid: int) -> None:
        self._cycle_done.add(pid)
        if all(i in self._cycle_done for i in range(self.n) if i not in self.crashed):
            self.cycles += 1
            self.cycle_marks.append(self.clock)
            self._cycle_done = set()

    def record(self, ev: str, **fields) -> None:
        rec = {"step": self.clock, "ev": ev}
        rec.update(fields)
        line = json.dumps(rec, separators=(",", ":"))
        self._hash.update(line.encode())
        self._hash.update(b"\n")
        if self.keep_trace:
            self.trace.append(line)

    def trace_hash(self) -> str:
        return self._hash.hexdigest()

    # -- fault injection helpers -------------------------------------------

    def inject_packet(self, msg: Message) -> None:
        """Place a message in transit, bypassing the loss lottery."""
        if 0 <= msg.dest < self.n and msg.sender != msg.dest:
            self._put((msg.sender, msg.dest), _Packet(msg))

    def flip_channel_bytes(self, count: int) -> int:
        """Flip one random byte in ``count`` random in-transit packets.

        Packets whose corrupted encoding no longer decodes are dropped.
        Returns the number of packets touched.
        """
        alive = [p for q in self.channels.values() for p in q if p.alive]
        touched = 0
        for pkt in self.rng.sample(alive, min(count, len(alive))):
            raw = bytearray(encode(pkt.msg))
            pos = self.rng.randrange(len(raw))
            raw[pos] ^= 1 << self.rng.randrange(8)
            try:
                m = decode(bytes(raw))
                if (m.sender, m.dest) != (pkt.msg.sender, pkt.msg.dest):
                    raise ValueError("endpoint bytes hit")
                self._untrack(pkt)
                pkt.msg = m
                if m.kind in SYNC_KINDS:
                    self.sync_in_flight[id(pkt)] = m
            except (ValueError, OverflowError):
                pkt.alive = False
                self.in_transit[(pkt.msg.sender, pkt.msg.dest)] -= 1
                self._untrack(pkt)
            touched += 1
        return touched

    # -- execution ---------------------------------------------------------

    def _apply_crashes(self) -> None:
        changed = False
        for pid, at in self.faults.crashes.items():
            if pid not in self.crashed and self.clock >= at:
                self.crashed.add(pid)
                self.crash_step[pid] = self.clock
                changed = True
                self.record("crash", p=pid)
        if changed or (self.faults.detect_delay and self.crashed):
            self._refresh_trusted()

    def step(self) -> None:
        self.clock += 1
        if self.faults.crashes:
            self._apply_crashes()
        if self.timers and self.timers[0][0] <= self.clock:
            _, _, pid, fn = self.timers.pop(0)
            if pid not in self.crashed:
                fn()
            ev = (EV_CALL, pid)
        else:
            ev = self.queue.popleft()
            kind = ev[0]
            if kind == EV_ACT:
                pid = ev[1]
                if pid not in self.crashed:
                    self.procs[pid].activate()
                    self.queue.append(ev)
            elif kind == EV_PKT:
                pkt = ev[1]
                if pkt.alive:
                    pkt.alive = False
                    m = pkt.msg
                    ch = (m.sender, m.dest)
                    self.in_transit[ch] -= 1
                    q = self.channels[ch]
                    while q and not q[0].alive:
                        q.popleft()
                    self._untrack(pkt)
                    if m.dest not in self.crashed:
                        self.metrics["packets_delivered"] += 1
                        self.procs[m.dest].on_packet(m)
            elif kind == EV_BC:
                _, pid, tag, batch = ev
                # the ideal object answers within the same scheduler event
                for k, b, carry in batch:
                    d, c = self.ledger.submit(tag, k, b, carry)
                    self.in_flight.discard((pid, tag, k))
                    if pid not in self.crashed:
                        self.procs[pid].on_bc_decide(tag, k, d, c)
        for obs in self.observers:
            obs(self, ev)

    def run(self, stop: Optional[Callable[["World"], bool]] = None, budget: int = 100_000) -> bool:
        """Step until ``stop(world)`` holds (checked after activations) or the budget runs out.

        Returns True when stopped by the predicate.
        """
        while self.clock < budget:
            if not self.queue and not self.timers:
                return stop is None
            self.step()
            if stop is not None and stop(self):
                return True
        return False

    def config_dict(self) -> dict:
        return {"n": self.n, "seed": self.seed, "faults": asdict(self.faults)}
