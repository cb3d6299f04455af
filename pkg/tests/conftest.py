import pytest

from stabcons.simulator import FaultConfig, World
from stabcons.urb_service import UrbEndpoint


class UrbProc:
    """Minimal process owning one FIFO broadcast endpoint."""

    def __init__(self, pid, n, world):
        self.pid = pid
        self.world = world
        self.log = []
        self.urb = UrbEndpoint(pid, n, world, 0, on_deliver=self._got, fifo=True)

    def _got(self, origin, seq, body, tag):
        self.log.append((origin, seq, body))

    def activate(self):
        self.urb.tick()
        self.world.iteration_done(self.pid)

    def on_packet(self, m):
        self.urb.receive(m)

    def on_bc_decide(self, *a):
        pass


def urb_world(n=3, seed=0, **faults):
    w = World(n, seed, FaultConfig(**faults))
    procs = [UrbProc(i, n, w) for i in range(n)]
    w.add_processes(procs)
    return w, procs


@pytest.fixture
def urb3():
    return urb_world(3)


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance")
    if mod and mod.LINES:
        terminalreporter.section("acceptance criteria")
        for num in sorted(mod.LINES):
            terminalreporter.write_line(mod.LINES[num])
