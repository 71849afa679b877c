"""Pure-Python fallback for the compiled core.

Same names and semantics as ``_core``; used when the extension is not built
or when ``STREAMFARM_PURE=1``. Everything here holds the GIL, so it is
correct but gains no parallel speedup for CPU-bound work.
"""
from __future__ import annotations

import os
import threading
import time
from collections import deque

from streamfarm._sentinels import EMPTY

BACKEND = "pure"
CACHE_LINE = 64

_yield = getattr(os, "sched_yield", lambda: time.sleep(0))
_FREE = object()
_EOS_WORD = 1


def _check_capacity(capacity):
    if capacity < 1:
        raise ValueError(f"capacity must be >= 1, got {capacity}")


def _backoff(count, spin):
    if count < spin:
        return count + 1
    _yield()
    return 0


class RingBuffer:
    """Bounded wait-free SPSC queue of object handles (pure-Python twin)."""

    __slots__ = ("capacity", "_slots", "_pwrite", "_pread", "_tail_count", "_head_count")

    def __init__(self, capacity: int):
        _check_capacity(capacity)
        self.capacity = capacity
        self._slots = [_FREE] * capacity
        self._pwrite = 0
        self._pread = 0
        self._tail_count = 0
        self._head_count = 0

    def push(self, item) -> bool:
        i = self._pwrite
        if self._slots[i] is not _FREE:
            return False
        self._slots[i] = item
        self._pwrite = 0 if i + 1 == self.capacity else i + 1
        self._tail_count += 1
        return True

    def pop(self):
        i = self._pread
        item = self._slots[i]
        if item is _FREE:
            return EMPTY
        self._slots[i] = _FREE
        self._pread = 0 if i + 1 == self.capacity else i + 1
        self._head_count += 1
        return item

    def approx_len(self) -> int:
        n = self._tail_count - self._head_count
        return min(max(n, 0), self.capacity)

    __len__ = approx_len

    def __repr__(self):
        return f"RingBuffer(capacity={self.capacity}, len~{self.approx_len()})"


class WordRing(RingBuffer):
    __slots__ = ()

    def push(self, word: int) -> bool:
        if word == 0:
            raise ValueError("0 is the empty marker and cannot be pushed")
        return RingBuffer.push(self, word)

    def pop(self) -> int:
        item = RingBuffer.pop(self)
        return 0 if item is EMPTY else item

    def produce_sequence(self, n, spin=1024):
        fulls = 0
        for k in range(n):
            bo = 0
            while not RingBuffer.push(self, k + 1):
                fulls += 1
                bo = _backoff(bo, spin)
        return fulls

    def consume_sequence(self, n, spin=1024):
        got = bad = checksum = viol = 0
        bo = 0
        while got < n:
            v = RingBuffer.pop(self)
            if v is EMPTY:
                bo = _backoff(bo, spin)
                continue
            bo = 0
            if v - 1 != got:
                bad += 1
            checksum += v - 1
            got += 1
            if (got & 0xFFFF) == 0:
                lo, mid, hi = self.approx_len(), self.approx_len(), self.approx_len()
                if not lo <= mid <= hi <= self.capacity:
                    viol += 1
        return got, bad, checksum, viol


def spin(iters):
    acc = 0
    for k in range(iters):
        acc += k
    return acc


def spin_repeat(iters, reps):
    t0 = time.perf_counter()
    for _ in range(reps):
        spin(iters)
    return time.perf_counter() - t0


_NEG_INF = -(1 << 28)


def sw_score_encoded(query, subject, matrix, stride, gap_open, gap_extend):
    """Affine-gap local alignment score (Gotoh) over residue indices."""
    m, n = len(query), len(subject)
    if m == 0 or n == 0:
        return 0
    hrow = [0] * (n + 1)
    frow = [_NEG_INF] * (n + 1)
    best = 0
    for qi in query:
        mrow = matrix[qi * stride:(qi + 1) * stride]
        diag = 0
        e = _NEG_INF
        h = 0
        for j in range(1, n + 1):
            e = max(e - gap_extend, h - gap_open)
            up = hrow[j]
            f = max(frow[j] - gap_extend, up - gap_open)
            frow[j] = f
            h = max(diag + mrow[subject[j - 1]], e, f, 0)
            diag = up
            hrow[j] = h
            if h > best:
                best = h
    return best


class _Task:
    __slots__ = ("words", "seq")

    def __init__(self):
        self.words = [0] * 10
        self.seq = 0

    def init(self, seq):
        self.seq = seq
        self.words[:] = range(seq, seq + 10)

    def touch(self):
        w = self.words
        for k in range(10):
            w[k] += 1

    def ok(self):
        s = self.seq
        return all(w == s + k + 1 for k, w in enumerate(self.words))


class _TaskPool:
    def __init__(self, total):
        self.stack = [_Task() for _ in range(total)]
        self.returns = RingBuffer(total)

    def acquire(self):
        if not self.stack:
            while (t := self.returns.pop()) is not EMPTY:
                self.stack.append(t)
            if not self.stack:
                return None
        return self.stack.pop()

    def release(self, t):
        return self.returns.push(t)


class _MutexQueue:
    def __init__(self, capacity):
        self._items = deque()
        self._cap = capacity
        self._lock = threading.Lock()
        self._not_empty = threading.Condition(self._lock)
        self._not_full = threading.Condition(self._lock)

    def put(self, v):
        with self._not_full:
            while len(self._items) >= self._cap:
                self._not_full.wait()
            self._items.append(v)
            self._not_empty.notify()

    def get(self):
        with self._not_empty:
            while not self._items:
                self._not_empty.wait()
            v = self._items.popleft()
            self._not_full.notify()
            return v


class NativeFarm:
    """Pure-Python stand-in for the native benchmark farm (same roles)."""

    def __init__(self, n_workers, n_tasks, spin_iters, capacity=512, use_pool=True,
                 mutex=False, ondemand=False, backoff_spin=1024):
        if n_workers < 1:
            raise ValueError("n_workers must be >= 1")
        _check_capacity(capacity)
        self.n_workers = n_workers
        self.n_tasks = n_tasks
        self.spin_iters = spin_iters
        self.use_pool = use_pool
        self.mutex = mutex
        self.ondemand = ondemand
        self.backoff_spin = backoff_spin
        self.collected = 0
        self.corrupted = 0
        self._processed = [0] * n_workers
        if mutex:
            self._mq_in = _MutexQueue(capacity)
            self._mq_out = _MutexQueue(capacity)
        else:
            self._to = [RingBuffer(capacity) for _ in range(n_workers)]
            self._from = [RingBuffer(capacity) for _ in range(n_workers)]
        if use_pool:
            self._pool = _TaskPool(2 * capacity * (n_workers + 1) + n_workers + 4)

    def _push(self, ring, v):
        bo = 0
        while not ring.push(v):
            bo = _backoff(bo, self.backoff_spin)

    def _alloc(self):
        if not self.use_pool:
            return _Task()
        bo = 0
        while (t := self._pool.acquire()) is None:
            bo = _backoff(bo, self.backoff_spin)
        return t

    def emitter(self):
        n = self.n_workers
        for seq in range(self.n_tasks):
            t = self._alloc()
            t.init(seq)
            if self.mutex:
                self._mq_in.put(t)
            elif self.ondemand:
                bo = 0
                while True:
                    occ = [r.approx_len() for r in self._to]
                    if self._to[occ.index(min(occ))].push(t):
                        break
                    bo = _backoff(bo, self.backoff_spin)
            else:
                self._push(self._to[seq % n], t)
        for w in range(n):
            if self.mutex:
                self._mq_in.put(_EOS_WORD)
            else:
                self._push(self._to[w], _EOS_WORD)

    def worker(self, w):
        if not 0 <= w < self.n_workers:
            raise IndexError(w)
        done = 0
        bo = 0
        while True:
            if self.mutex:
                v = self._mq_in.get()
            else:
                v = self._to[w].pop()
                if v is EMPTY:
                    bo = _backoff(bo, self.backoff_spin)
                    continue
                bo = 0
            if v == _EOS_WORD:
                break
            v.touch()
            spin(self.spin_iters)
            done += 1
            if self.mutex:
                self._mq_out.put(v)
            else:
                self._push(self._from[w], v)
        if self.mutex:
            self._mq_out.put(_EOS_WORD)
        else:
            self._push(self._from[w], _EOS_WORD)
        self._processed[w] = done

    def collector(self):
        n = self.n_workers
        closed = [False] * n
        eos = got = bad = 0
        start = 0
        bo = 0
        while eos < n:
            if self.mutex:
                v = self._mq_out.get()
            else:
                v = EMPTY
                for k in range(n):
                    w = (start + k) % n
                    if closed[w]:
                        continue
                    v = self._from[w].pop()
                    if v is not EMPTY:
                        start = (w + 1) % n
                        if v == _EOS_WORD:
                            closed[w] = True
                        break
                if v is EMPTY:
                    bo = _backoff(bo, self.backoff_spin)
                    continue
                bo = 0
            if v == _EOS_WORD:
                eos += 1
                continue
            if not v.ok():
                bad += 1
            got += 1
            if self.use_pool:
                self._push(self._pool.returns, v)
        self.collected = got
        self.corrupted = bad

    def per_worker(self):
        return list(self._processed)


def run_sequential(n_tasks, spin_iters, use_pool=True):
    pool = _TaskPool(4) if use_pool else None
    got = bad = 0
    t0 = time.perf_counter()
    for seq in range(n_tasks):
        t = pool.acquire() if use_pool else _Task()
        t.init(seq)
        t.touch()
        spin(spin_iters)
        if not t.ok():
            bad += 1
        got += 1
        if use_pool:
            pool.release(t)
    return time.perf_counter() - t0, got, bad
