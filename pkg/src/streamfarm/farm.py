"""Task farm: emitter, N replicated workers, optional collector.

With ``ordered=True`` the emitter tags every task with its emission index
and the collector restores that order with a reorder buffer, so results come
out in input order whatever the scheduling policy.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

from streamfarm._sentinels import ABSORB, END
from streamfarm.arbiter import Collector, Emitter, RoundRobin, _policy
from streamfarm.graph import IntegrityError, Network, Node, source_from

__all__ = ["FarmConfig", "Farm", "ReorderBuffer", "Tagged", "build_farm", "run_ordered"]

log = logging.getLogger("streamfarm")


@dataclass
class FarmConfig:
    n_workers: int = 1
    channel_capacity: int = 512
    policy: object = field(default_factory=RoundRobin)
    ordered: bool = False
    collector_present: bool = True
    gather: object = None
    high_watermark: int | None = None

    def __post_init__(self):
        if self.n_workers < 1:
            raise ValueError("n_workers must be >= 1")
        if self.channel_capacity < 1:
            raise ValueError("channel_capacity must be >= 1")
        if self.ordered and not self.collector_present:
            raise ValueError("an ordered farm needs a collector")
        if self.high_watermark is None:
            self.high_watermark = 4 * self.n_workers * self.channel_capacity


class Tagged:
    """Envelope carrying the emission index; user services never see it."""

    __slots__ = ("seq", "item")

    def __init__(self, seq, item):
        self.seq = seq
        self.item = item

    def __repr__(self):
        return f"Tagged({self.seq}, {self.item!r})"


class ReorderBuffer:
    def __init__(self, high_watermark=None):
        self.next_expected = 0
        self.held = {}
        self.max_held = 0
        self.high_watermark = high_watermark
        self._warned = False

    def insert(self, tag, item):
        """Store one result; return the items now releasable in tag order."""
        if tag < self.next_expected or tag in self.held:
            raise IntegrityError(f"duplicate tag {tag}")
        if tag != self.next_expected:
            self.held[tag] = item
            n = len(self.held)
            if n > self.max_held:
                self.max_held = n
                if self.high_watermark and n > self.high_watermark and not self._warned:
                    self._warned = True
                    log.warning("reorder buffer holds %d items waiting for tag %d; "
                                "a worker may be stuck", n, self.next_expected)
            return []
        ready = [item]
        self.next_expected += 1
        held = self.held
        while self.next_expected in held:
            ready.append(held.pop(self.next_expected))
            self.next_expected += 1
        return ready

    def __len__(self):
        return len(self.held)


class _FarmEmitter(Emitter):
    def __init__(self, service, policy, ordered):
        super().__init__(service, policy=policy, name="emitter", source=True)
        self.ordered = ordered
        self.emitted = 0

    def svc(self, item):
        r = self.service(item)
        if r is END or r is ABSORB:
            return r
        if self.ordered:
            r = Tagged(self.emitted, r)
        self.emitted += 1
        return r


class _FarmWorker(Node):
    def __init__(self, service, ordered, index):
        super().__init__(service, name=f"worker{index}")
        self.ordered = ordered

    def svc(self, item):
        if not self.ordered:
            return self.service(item)
        # forward absorbed tasks as placeholders so the collector sees every tag
        item.item = self.service(item.item)
        return item


class _FarmCollector(Collector):
    def __init__(self, service, gather, ordered, results, watermark):
        super().__init__(service, gather=gather, name="collector")
        self.ordered = ordered
        self.results = results
        self.reorder = ReorderBuffer(watermark) if ordered else None
        self.emitter = None
        self.tags_seen = []

    def _deliver(self, item):
        if item is ABSORB:
            return
        r = item if self.service is None else self.service(item)
        if r is not ABSORB:
            self.results.append(r)

    def svc(self, item):
        if not self.ordered:
            self._deliver(item)
            return ABSORB
        ready = self.reorder.insert(item.seq, item.item)
        first = self.reorder.next_expected - len(ready)
        for k, r in enumerate(ready):
            self.tags_seen.append(first + k)
            self._deliver(r)
        return ABSORB

    def svc_end(self):
        if not self.ordered:
            return
        expected = self.emitter.emitted
        if self.reorder.held or self.reorder.next_expected != expected:
            raise IntegrityError(
                f"tag gap: emitted {expected}, released {self.reorder.next_expected}, "
                f"still held {sorted(self.reorder.held)[:10]}")


class Farm:
    """A built farm. ``results`` fills with collector output as it runs."""

    def __init__(self, network, emitter, workers, collector, cfg):
        self.network = network
        self.emitter = emitter
        self.workers = workers
        self.collector = collector
        self.config = cfg
        self.results = collector.results if collector is not None else []

    def run(self):
        self.network.run()
        return self

    def wait(self, timeout=None):
        return self.network.wait(timeout)

    def run_and_wait(self, timeout=None):
        self.run()
        return self.wait(timeout)


def build_farm(emitter, worker, collector=None, cfg: FarmConfig | None = None,
               config=None) -> Farm:
    """Wire emitter -> workers -> collector over SPSC channels.

    ``emitter`` is a source service (returns ``END`` when done) or any
    iterable. ``worker`` is shared by all replicas, so it must not mutate
    shared state. ``collector`` is called on each result (in tag order when
    ordered); its non-``ABSORB`` returns are appended to ``Farm.results``.
    """
    cfg = cfg or FarmConfig()
    if not callable(emitter):
        emitter = source_from(emitter)
    if not callable(worker):
        raise TypeError("worker service must be callable")
    net = Network(config)
    policy = _policy(cfg.policy, RoundRobin)
    e = net.add(_FarmEmitter(emitter, policy, cfg.ordered))
    workers = [net.add(_FarmWorker(worker, cfg.ordered, k)) for k in range(cfg.n_workers)]
    for w in workers:
        net.connect(e, w, cfg.channel_capacity)
    c = None
    if cfg.collector_present:
        c = net.add(_FarmCollector(collector, cfg.gather, cfg.ordered, [], cfg.high_watermark))
        c.emitter = e
        for w in workers:
            net.connect(w, c, cfg.channel_capacity)
    return Farm(net, e, workers, c, cfg)


def run_ordered(farm: Farm, timeout=None):
    """Run an ordered farm to completion and return its statistics."""
    if not farm.config.ordered:
        raise ValueError("farm was not built with ordered=True")
    return farm.run_and_wait(timeout)
