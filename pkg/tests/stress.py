"""Multi-threaded stress drivers shared by unit and acceptance tests."""
import threading
from collections import Counter

from streamfarm import EOS, SlabPool, make_mpmc
from streamfarm.config import yield_cpu
from streamfarm.spsc import EMPTY, RingBuffer, WordRing


def word_stream(n, capacity, spin=0):
    """Push 1..n through a WordRing from native threads; returns the consumer report."""
    ring = WordRing(capacity)
    out = {}
    tp = threading.Thread(target=lambda: out.setdefault("fulls", ring.produce_sequence(n, spin)))
    tc = threading.Thread(target=lambda: out.setdefault("c", ring.consume_sequence(n, spin)))
    tc.start()
    tp.start()
    tp.join()
    tc.join()
    received, out_of_order, checksum, len_violations = out["c"]
    return dict(received=received, out_of_order=out_of_order, checksum=checksum,
                len_violations=len_violations, fulls=out["fulls"])


def mpmc_tagged(n_producers, n_consumers, n_items, capacity=512):
    """Push (origin, seq) tuples through a composed MPMC queue.

    Returns (per-consumer received lists, queue) after everything has joined.
    """
    q = make_mpmc(n_producers, n_consumers, capacity).start()
    per = [n_items // n_producers + (p < n_items % n_producers) for p in range(n_producers)]
    received = [[] for _ in range(n_consumers)]

    def produce(p):
        inlet = q.inputs[p]
        for s in range(per[p]):
            inlet.put((p, s))
        inlet.close()

    def consume(c):
        out = q.outputs[c]
        got = received[c]
        while (item := out.get()) is not EOS:
            got.append(item)

    threads = [threading.Thread(target=consume, args=(c,)) for c in range(n_consumers)]
    threads += [threading.Thread(target=produce, args=(p,)) for p in range(n_producers)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    q.join()
    return received, per, q


def check_mpmc(received, per):
    """Problems found in an MPMC run: multiset and per-origin order at each consumer."""
    problems = []
    expected = Counter((p, s) for p, n in enumerate(per) for s in range(n))
    got = Counter(x for r in received for x in r)
    if got != expected:
        problems.append(f"multiset differs: {sum((expected - got).values())} missing, "
                        f"{sum((got - expected).values())} extra")
    for c, r in enumerate(received):
        last = {}
        for p, s in r:
            if s <= last.get(p, -1):
                problems.append(f"consumer {c} saw origin {p} out of order")
                break
            last[p] = s
    return problems


def pool_cycles(n_cycles, total_buffers=64, n_releasers=3, debug=False):
    """One acquirer hands buffers to releaser threads that give them back.

    The acquirer never lets in-flight reach total_buffers, so every acquire
    should succeed. Returns the pool after all threads have joined.
    """
    pool = SlabPool(16, total_buffers, n_releasers, debug=debug)
    links = [RingBuffer(total_buffers) for _ in range(n_releasers)]
    mismatched = []

    def acquirer():
        sent = 0
        while sent < n_cycles:
            if pool.in_flight >= total_buffers:
                yield_cpu()
                continue
            buf = pool.acquire()
            if buf is None:
                continue
            buf.view[0] = sent & 0xFF
            link = links[sent % n_releasers]
            while not link.push((sent, buf)):
                yield_cpu()
            sent += 1
        for link in links:
            while not link.push(EOS):
                yield_cpu()

    def releaser(k):
        handle = pool.releaser(k)
        link = links[k]
        while True:
            item = link.pop()
            if item is EMPTY:
                yield_cpu()
                continue
            if item is EOS:
                return
            seq, buf = item
            if buf.view[0] != seq & 0xFF:
                mismatched.append(seq)
            pool.release(handle, buf)

    threads = [threading.Thread(target=acquirer)]
    threads += [threading.Thread(target=releaser, args=(k,)) for k in range(n_releasers)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    pool.mismatched = mismatched
    return pool
