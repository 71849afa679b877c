"""Multi-producer / multi-consumer queues built from SPSC channels.

An :class:`Emitter` thread is the only reader of its input and the only
writer of its N outputs; a :class:`Collector` is the mirror image. Moving
an item across costs one handle copy and never an atomic read-modify-write.
"""
from __future__ import annotations

from streamfarm._sentinels import EOS
from streamfarm.graph import Network, Node

__all__ = [
    "RoundRobin", "OnDemand", "UserDefined", "FirstAvailable", "StrictRoundRobin",
    "Emitter", "Collector", "SpmcQueue", "MpscQueue", "MpmcQueue",
    "make_spmc", "make_mpsc", "make_mpmc",
]


# scheduling (fan-out) policies


class RoundRobin:
    """Cyclic destination order; waits on the chosen output when it is full."""

    def __init__(self):
        self._next = 0

    def select(self, item, outputs):
        k = self._next
        self._next = (k + 1) % len(outputs)
        return k

    def __repr__(self):
        return "RoundRobin()"


class OnDemand:
    """Send to the least occupied output; ties go to the lowest index."""

    reevaluate = True

    def select(self, item, outputs):
        best, best_occ = 0, outputs[0].approx_len()
        for k in range(1, len(outputs)):
            occ = outputs[k].approx_len()
            if occ < best_occ:
                best, best_occ = k, occ
        return best

    def __repr__(self):
        return "OnDemand()"


class UserDefined:
    """``selector(item, occupancies) -> index``; may keep its own state."""

    reevaluate = True

    def __init__(self, selector):
        self.selector = selector

    def select(self, item, outputs):
        k = self.selector(item, [o.approx_len() for o in outputs])
        if not isinstance(k, int) or not 0 <= k < len(outputs):
            raise ValueError(f"selector returned invalid output index {k!r}")
        return k


# gather (fan-in) policies


class FirstAvailable:
    """Take from the first non-empty input, rotating the scan start."""

    def __repr__(self):
        return "FirstAvailable()"


class StrictRoundRobin:
    """Read inputs in strict cyclic order, skipping closed ones."""

    def __repr__(self):
        return "StrictRoundRobin()"


def _policy(kind, default):
    if kind is None:
        return default()
    if isinstance(kind, str):
        table = {
            "rr": RoundRobin, "roundrobin": RoundRobin, "ondemand": OnDemand,
            "first": FirstAvailable, "firstavailable": FirstAvailable,
            "strict": StrictRoundRobin,
        }
        try:
            return table[kind.lower().replace("_", "").replace("-", "")]()
        except KeyError:
            raise ValueError(f"unknown policy {kind!r}") from None
    return kind


class Emitter(Node):
    """Fan-out mediator: one input side, N SPSC outputs chosen by policy."""

    def __init__(self, service=None, policy=None, name=None, source=False):
        super().__init__(service, name=name, source=source)
        self.policy = _policy(policy, RoundRobin)

    def emit(self, item, ctx):
        outs = self.outputs
        self.stats.items_out += 1
        if not outs:
            return
        if len(outs) == 1:
            ctx.push(outs[0], item)
            return
        policy = self.policy
        if not getattr(policy, "reevaluate", False):
            ctx.push(outs[policy.select(item, outs)], item)
            return
        bo = 0
        while not outs[policy.select(item, outs)].push(item):
            bo = ctx.idle(bo)


class Collector(Node):
    """Fan-in mediator: N SPSC inputs merged by a gather policy."""

    def __init__(self, service=None, gather=None, name=None):
        super().__init__(service, name=name)
        self.gather = _policy(gather, FirstAvailable)

    def receive(self, ctx, open_inputs):
        if not isinstance(self.gather, StrictRoundRobin) or len(open_inputs) <= 1:
            return super().receive(ctx, open_inputs)
        while open_inputs:
            idx = self._rr_in % len(open_inputs)
            item = ctx.pop(open_inputs[idx])
            if item is EOS:
                del open_inputs[idx]
                continue
            self._rr_in = idx + 1
            return item
        return EOS


class _Queue:
    """Shared lifecycle for the composed queues: they own a private network."""

    network: Network

    def start(self):
        self.network.run()
        return self

    def join(self, timeout=None):
        return self.network.wait(timeout)

    def audit(self):
        return self.network.audit()

    def __enter__(self):
        return self.start()

    def __exit__(self, *exc):
        if exc[0] is not None:
            self.network.abort()


class SpmcQueue(_Queue):
    """``input`` is an Inlet for the single producer; ``outputs[i]`` an Outlet per consumer."""

    def __init__(self, n_consumers, capacity, policy=None, config=None):
        if n_consumers < 1:
            raise ValueError("n_consumers must be >= 1")
        self.network = Network(config)
        self.emitter = self.network.add(Emitter(policy=policy, name="emitter"))
        self.policy = self.emitter.policy
        self.input = self.network.inlet(self.emitter, capacity)
        self.outputs = [self.network.outlet(self.emitter, capacity) for _ in range(n_consumers)]


class MpscQueue(_Queue):
    """``inputs[i]`` is an Inlet per producer; ``output`` the consumer's Outlet."""

    def __init__(self, n_producers, capacity, policy=None, config=None):
        if n_producers < 1:
            raise ValueError("n_producers must be >= 1")
        self.network = Network(config)
        self.collector = self.network.add(Collector(gather=policy, name="collector"))
        self.policy = self.collector.gather
        self.inputs = [self.network.inlet(self.collector, capacity) for _ in range(n_producers)]
        self.output = self.network.outlet(self.collector, capacity)


class MpmcQueue(_Queue):
    """Collector feeding an Emitter through one SPSC link."""

    def __init__(self, n_producers, n_consumers, capacity, policy=None, gather=None,
                 config=None):
        if n_producers < 1 or n_consumers < 1:
            raise ValueError("n_producers and n_consumers must be >= 1")
        net = self.network = Network(config)
        self.collector = net.add(Collector(gather=gather, name="collector"))
        self.emitter = net.add(Emitter(policy=policy, name="emitter"))
        self.inputs = [net.inlet(self.collector, capacity) for _ in range(n_producers)]
        net.connect(self.collector, self.emitter, capacity)
        self.outputs = [net.outlet(self.emitter, capacity) for _ in range(n_consumers)]


def make_spmc(n_consumers: int, capacity: int = 512, policy=None, config=None) -> SpmcQueue:
    return SpmcQueue(n_consumers, capacity, policy, config)


def make_mpsc(n_producers: int, capacity: int = 512, policy=None, config=None) -> MpscQueue:
    return MpscQueue(n_producers, capacity, policy, config)


def make_mpmc(n_producers: int, n_consumers: int, capacity: int = 512, policy=None,
              gather=None, config=None) -> MpmcQueue:
    return MpmcQueue(n_producers, n_consumers, capacity, policy, gather, config)
