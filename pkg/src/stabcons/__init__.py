"""Self-stabilizing multivalued consensus, total-order broadcast and state-machine replication,
with a deterministic fault-injection simulator."""
from .core_types import BOT, TRANSIENT_ERROR, Decided, Kind, Message, TxDescriptor, decode, encode, value_equals
from .mv_consensus import CONCURRENT, SEQUENTIAL, MvObject, MvSlot, k_macro, result_of
from .scenarios import RunReport, ScenarioConfig, generate, run_scenario
from .simulator import FaultConfig, World

__all__ = [
    "BOT", "TRANSIENT_ERROR", "Decided", "Kind", "Message", "TxDescriptor", "decode", "encode", "value_equals",
    "CONCURRENT", "SEQUENTIAL", "MvObject", "MvSlot", "k_macro", "result_of",
    "RunReport", "ScenarioConfig", "generate", "run_scenario", "FaultConfig", "World",
]
__version__ = "0.1.0"
