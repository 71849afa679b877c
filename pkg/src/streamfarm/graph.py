"""Thread-per-node streaming runtime over SPSC channels.

A :class:`Node` runs a read/service/write loop on its own thread. Its
service returns the item to forward, ``ABSORB`` to forward nothing, or (for
sources) ``END`` to finish. The runtime places ``EOS`` on every output once
all inputs have delivered ``EOS``.

    net = Network()
    src = net.add(Node(source_from(range(10)), source=True))
    sq = net.add(Node(lambda x: x * x))
    net.connect(src, sq, capacity=64)
    out = net.outlet(sq)
    net.run()
    print(list(out))
    stats = net.wait()
"""
from __future__ import annotations

import enum
import itertools
import logging
import os
import threading
import time
from dataclasses import dataclass, field

from streamfarm._backend import RingBuffer
from streamfarm._sentinels import ABSORB, EMPTY, END, EOS
from streamfarm.config import RuntimeConfig, yield_cpu

__all__ = [
    "ABSORB", "END", "EOS", "Node", "Network", "NodeStats", "NetworkStats",
    "NetworkError", "WatchdogTimeout", "IntegrityError", "source_from",
]

log = logging.getLogger("streamfarm")


class NetworkError(RuntimeError):
    """Topology or lifecycle misuse."""


class WatchdogTimeout(NetworkError):
    pass


class IntegrityError(RuntimeError):
    """Items lost, duplicated or corrupted in flight."""


class _Aborted(NetworkError):
    """Raised inside blocked channel operations once the network aborts."""


class State(enum.Enum):
    BUILT = "built"
    RUNNING = "running"
    TERMINATED = "terminated"


@dataclass
class NodeStats:
    items_in: int = 0
    items_out: int = 0
    invocations: int = 0


@dataclass
class NetworkStats:
    nodes: dict[str, NodeStats] = field(default_factory=dict)
    seconds: float = 0.0

    def __getitem__(self, name):
        return self.nodes[name]


@dataclass
class Edge:
    id: int
    producer: object
    consumer: object
    ring: object


def source_from(iterable):
    """Wrap an iterable as a source service."""
    it = iter(iterable)

    def service(_):
        return next(it, END)

    return service


class _Context:
    """Per-run shared state: spin budget and abort flag."""

    def __init__(self, spin):
        self.spin = spin
        self.aborted = False

    def push(self, ring, item):
        if ring.push(item):
            return
        spin = self.spin
        bo = 0
        while not ring.push(item):
            if bo < spin:
                bo += 1
            else:
                if self.aborted:
                    raise _Aborted
                bo = 0
                yield_cpu()

    def pop(self, ring):
        item = ring.pop()
        if item is not EMPTY:
            return item
        spin = self.spin
        bo = 0
        while (item := ring.pop()) is EMPTY:
            if bo < spin:
                bo += 1
            else:
                if self.aborted:
                    raise _Aborted
                bo = 0
                yield_cpu()
        return item

    def idle(self, bo):
        if bo < self.spin:
            return bo + 1
        if self.aborted:
            raise _Aborted
        yield_cpu()
        return 0


class Node:
    """One active stage. Subclass and override :meth:`svc`, or pass a service.

    ``svc_init`` runs on the node's thread before the first item and
    ``svc_end`` after the last input ``EOS``, before ``EOS`` is forwarded.
    """

    def __init__(self, service=None, name=None, source=False):
        self.service = service
        self.name = name
        self.source = source
        self.inputs: list = []
        self.outputs: list = []
        self.stats = NodeStats()
        self._rr_out = 0
        self._rr_in = 0
        self._network = None

    def __repr__(self):
        return f"<{type(self).__name__} {self.name}>"

    def svc_init(self):
        pass

    def svc(self, item):
        if self.service is None:
            return item
        return self.service(item)

    def svc_end(self):
        pass

    # routing hooks ------------------------------------------------------

    def select_output(self, item) -> int:
        k = self._rr_out
        self._rr_out = (k + 1) % len(self.outputs)
        return k

    def emit(self, item, ctx):
        """Forward one item downstream (terminal nodes just count it)."""
        self.stats.items_out += 1
        if not self.outputs:
            return
        if len(self.outputs) == 1:
            ctx.push(self.outputs[0], item)
        else:
            ctx.push(self.outputs[self.select_output(item)], item)

    def receive(self, ctx, open_inputs):
        """Next data item from the open inputs, or EOS once all have closed.

        Inputs are scanned round-robin from the one after the last served.
        """
        if len(open_inputs) == 1:
            ring = open_inputs[0]
            item = ctx.pop(ring)
            if item is EOS:
                open_inputs.clear()
            return item
        bo = 0
        while open_inputs:
            n = len(open_inputs)
            start = self._rr_in % n
            for k in range(n):
                idx = (start + k) % n
                item = open_inputs[idx].pop()
                if item is EMPTY:
                    continue
                if item is EOS:
                    del open_inputs[idx]
                    self._rr_in = idx
                    break
                self._rr_in = idx + 1
                return item
            else:
                bo = ctx.idle(bo)
        return EOS

    # main loop ----------------------------------------------------------

    def _loop(self, ctx):
        st = self.stats
        self.svc_init()
        if self.source:
            while True:
                if ctx.aborted:
                    raise _Aborted
                r = self.svc(None)
                st.invocations += 1
                if r is END:
                    break
                if r is not ABSORB:
                    self.emit(r, ctx)
        else:
            open_inputs = list(self.inputs)
            while True:
                item = self.receive(ctx, open_inputs)
                if item is EOS:
                    break
                st.items_in += 1
                r = self.svc(item)
                st.invocations += 1
                if r is not ABSORB and r is not END:
                    self.emit(r, ctx)
        self.svc_end()
        for ring in self.outputs:
            ctx.push(ring, EOS)


class Inlet:
    """Producer endpoint for a thread outside the network."""

    def __init__(self, ring, network):
        self.ring = ring
        self._net = network
        self.closed = False

    def put(self, item):
        if self.closed:
            raise NetworkError("inlet already closed")
        if item is EOS:
            raise ValueError("EOS is placed by close(), not put()")
        try:
            self._net._ctx.push(self.ring, item)
        except _Aborted:
            raise NetworkError("network aborted") from None

    def try_put(self, item) -> bool:
        return self.ring.push(item)

    def close(self):
        if not self.closed:
            self.closed = True
            try:
                self._net._ctx.push(self.ring, EOS)
            except _Aborted:
                raise NetworkError("network aborted") from None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


class Outlet:
    """Consumer endpoint for a thread outside the network."""

    def __init__(self, ring, network):
        self.ring = ring
        self._net = network
        self.done = False

    def get(self):
        """Next item, or EOS once the stream has ended."""
        if self.done:
            return EOS
        try:
            item = self._net._ctx.pop(self.ring)
        except _Aborted:
            raise NetworkError("network aborted") from None
        if item is EOS:
            self.done = True
        return item

    def __iter__(self):
        while (item := self.get()) is not EOS:
            yield item


class Network:
    def __init__(self, config: RuntimeConfig | None = None):
        self.config = config or RuntimeConfig.from_env()
        self.nodes: list[Node] = []
        self.edges: list[Edge] = []
        self.inlets: list[Inlet] = []
        self.outlets: list[Outlet] = []
        self.state = State.BUILT
        self._ctx = _Context(self.config.spin)
        self._threads: list[threading.Thread] = []
        self._errors: list[tuple[Node, BaseException]] = []
        self._t0 = 0.0
        self._names = itertools.count()

    def add(self, node: Node) -> Node:
        self._require(State.BUILT)
        if node._network is not None:
            raise NetworkError(f"{node!r} already belongs to a network")
        if node.name is None:
            node.name = f"{type(node).__name__.lower()}{next(self._names)}"
        node._network = self
        self.nodes.append(node)
        return node

    def connect(self, producer: Node, consumer: Node, capacity: int = 512,
                allow_cycle: bool = False) -> int:
        self._require(State.BUILT)
        for n in (producer, consumer):
            if n._network is not self:
                raise NetworkError(f"{n!r} is not part of this network")
        if not allow_cycle and (producer is consumer or self._reaches(consumer, producer)):
            raise NetworkError(
                f"edge {producer.name}->{consumer.name} closes a cycle; pass allow_cycle=True")
        ring = RingBuffer(capacity)
        producer.outputs.append(ring)
        consumer.inputs.append(ring)
        edge = Edge(len(self.edges), producer, consumer, ring)
        self.edges.append(edge)
        return edge.id

    def inlet(self, consumer: Node, capacity: int = 512) -> Inlet:
        self._require(State.BUILT)
        ring = RingBuffer(capacity)
        consumer.inputs.append(ring)
        end = Inlet(ring, self)
        self.inlets.append(end)
        self.edges.append(Edge(len(self.edges), end, consumer, ring))
        return end

    def outlet(self, producer: Node, capacity: int = 512) -> Outlet:
        self._require(State.BUILT)
        ring = RingBuffer(capacity)
        producer.outputs.append(ring)
        end = Outlet(ring, self)
        self.outlets.append(end)
        self.edges.append(Edge(len(self.edges), producer, end, ring))
        return end

    def _reaches(self, start, goal):
        seen, stack = set(), [start]
        while stack:
            n = stack.pop()
            if n is goal:
                return True
            if id(n) in seen:
                continue
            seen.add(id(n))
            stack.extend(e.consumer for e in self.edges if e.producer is n)
        return False

    def _require(self, state):
        if self.state is not state:
            raise NetworkError(f"network is {self.state.value}, expected {state.value}")

    def audit(self) -> list[str]:
        """Wiring problems that would break the single-producer/single-consumer rule."""
        problems = []
        owners = {}
        for e in self.edges:
            if id(e.ring) in owners:
                problems.append(f"channel {e.id} shared with edge {owners[id(e.ring)]}")
            owners[id(e.ring)] = e.id
        for n in self.nodes:
            for r in n.outputs:
                if sum(r is e.ring and e.producer is n for e in self.edges) != 1:
                    problems.append(f"{n.name} writes an unregistered channel")
            for r in n.inputs:
                if sum(r is e.ring and e.consumer is n for e in self.edges) != 1:
                    problems.append(f"{n.name} reads an unregistered channel")
        writers = [id(r) for n in self.nodes for r in n.outputs] + [id(i.ring) for i in self.inlets]
        readers = [id(r) for n in self.nodes for r in n.inputs] + [id(o.ring) for o in self.outlets]
        if len(writers) != len(set(writers)):
            problems.append("a channel has more than one writer")
        if len(readers) != len(set(readers)):
            problems.append("a channel has more than one reader")
        return problems

    def validate(self):
        if not self.nodes:
            raise NetworkError("empty network")
        for n in self.nodes:
            if n.source and n.inputs:
                raise NetworkError(f"source {n.name} has inputs")
            if not n.source and not n.inputs:
                raise NetworkError(f"{n.name} has no inputs and is not a source")
        problems = self.audit()
        if problems:
            raise NetworkError("; ".join(problems))

    def run(self) -> "Network":
        self._require(State.BUILT)
        self.validate()
        pin = self.config.pin
        self._threads = [
            threading.Thread(target=self._thread_main, args=(n, pin[k % len(pin)] if pin else None),
                             name=f"streamfarm-{n.name}", daemon=True)
            for k, n in enumerate(self.nodes)
        ]
        self.state = State.RUNNING
        self._t0 = time.perf_counter()
        for t in self._threads:
            t.start()
        return self

    def _thread_main(self, node, cpu):
        if cpu is not None and hasattr(os, "sched_setaffinity"):
            os.sched_setaffinity(0, {cpu})
        try:
            node._loop(self._ctx)
        except _Aborted:
            pass
        except BaseException as exc:  # surfaced by wait()
            log.debug("node %s failed: %r", node.name, exc)
            self._errors.append((node, exc))
            self._ctx.aborted = True

    def abort(self):
        """Ask every node blocked on a channel to give up."""
        self._ctx.aborted = True

    def wait(self, timeout: float | None = None) -> NetworkStats:
        """Join all node threads and return per-node statistics.

        Raises :class:`WatchdogTimeout` if threads are still alive after
        ``timeout`` (default: the configured watchdog), and re-raises the
        first exception raised by a node service.
        """
        self._require(State.RUNNING)
        if timeout is None:
            timeout = self.config.watchdog
        deadline = None if timeout is None else time.monotonic() + timeout
        for t in self._threads:
            t.join(None if deadline is None else max(0.0, deadline - time.monotonic()))
        seconds = time.perf_counter() - self._t0
        alive = [t.name for t in self._threads if t.is_alive()]
        if alive:
            self._ctx.aborted = True
            raise WatchdogTimeout(f"watchdog expired after {timeout}s; still running: {alive}")
        self.state = State.TERMINATED
        if self._errors:
            node, exc = self._errors[0]
            raise exc
        return NetworkStats({n.name: n.stats for n in self.nodes}, seconds)

    def run_and_wait(self, timeout=None) -> NetworkStats:
        self.run()
        return self.wait(timeout)
