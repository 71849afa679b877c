"""Streaming task farms over wait-free SPSC channels."""
from streamfarm._backend import BACKEND
from streamfarm._sentinels import ABSORB, EMPTY, END, EOS
from streamfarm.arbiter import (
    FirstAvailable, OnDemand, RoundRobin, StrictRoundRobin, UserDefined,
    make_mpmc, make_mpsc, make_spmc,
)
from streamfarm.farm import Farm, FarmConfig, ReorderBuffer, build_farm, run_ordered
from streamfarm.graph import (
    IntegrityError, Network, NetworkError, Node, WatchdogTimeout, source_from,
)
from streamfarm.pool import SlabPool
from streamfarm.spsc import RingBuffer, WordRing

__version__ = "0.1.0"

__all__ = [
    "ABSORB", "BACKEND", "EMPTY", "END", "EOS", "Farm", "FarmConfig", "FirstAvailable",
    "IntegrityError", "Network", "NetworkError", "Node", "OnDemand", "ReorderBuffer",
    "RingBuffer", "RoundRobin", "SlabPool", "StrictRoundRobin", "UserDefined",
    "WatchdogTimeout", "WordRing", "build_farm", "make_mpmc", "make_mpsc", "make_spmc",
    "run_ordered", "source_from",
]
