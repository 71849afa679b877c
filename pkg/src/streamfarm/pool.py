"""Fixed-size buffer recycler with one SPSC return channel per releaser.

One thread acquires; each releasing thread owns a :class:`ReleaserHandle`
whose channel carries freed buffers back. Acquire drains the return
channels only when its local free list runs dry (or, with
``background_drain=True``, a drainer thread does it ahead of time).
"""
from __future__ import annotations

import threading
import time

from streamfarm._backend import RingBuffer
from streamfarm._sentinels import EMPTY
from streamfarm.config import default_spin, yield_cpu
from streamfarm.graph import IntegrityError

__all__ = ["SlabPool", "Slab", "ReleaserHandle", "PoolIntegrityError"]


class PoolIntegrityError(IntegrityError):
    pass


class Slab:
    """One buffer of the arena. Identity and memory never change across reuse."""

    __slots__ = ("index", "view", "pool", "owned")

    def __init__(self, index, view, pool):
        self.index = index
        self.view = view
        self.pool = pool
        self.owned = False

    def __repr__(self):
        return f"Slab({self.index})"


class ReleaserHandle:
    __slots__ = ("id", "channel", "released")

    def __init__(self, id, channel):
        self.id = id
        self.channel = channel
        self.released = 0


def _push_wait(ring, item, spin):
    bo = 0
    while not ring.push(item):
        if bo < spin:
            bo += 1
        else:
            bo = 0
            yield_cpu()


class SlabPool:
    def __init__(self, buffer_size: int, total_buffers: int, n_releasers: int,
                 debug: bool = False, background_drain: bool = False, spin: int | None = None):
        if buffer_size < 1 or total_buffers < 1 or n_releasers < 1:
            raise ValueError("buffer_size, total_buffers and n_releasers must be >= 1")
        self.buffer_size = buffer_size
        self.total_buffers = total_buffers
        self.debug = debug
        self.spin = default_spin() if spin is None else spin
        try:
            self._arena = bytearray(buffer_size * total_buffers)
        except MemoryError as exc:
            raise MemoryError(f"cannot allocate {buffer_size}x{total_buffers} arena") from exc
        mv = memoryview(self._arena)
        self.buffers = [Slab(k, mv[k * buffer_size:(k + 1) * buffer_size], self)
                        for k in range(total_buffers)]
        self._free = list(reversed(self.buffers))
        self.handles = [ReleaserHandle(k, RingBuffer(total_buffers)) for k in range(n_releasers)]
        self.acquired = 0
        self.exhausted = 0
        self._staging = None
        self._drainer = None
        self._stop = False
        if background_drain:
            self._staging = RingBuffer(total_buffers)
            self._drainer = threading.Thread(target=self._drain_loop, name="slabpool-drain",
                                             daemon=True)
            self._drainer.start()

    def releaser(self, k: int) -> ReleaserHandle:
        return self.handles[k]

    def acquire(self):
        """A free buffer, or None when every buffer is in flight."""
        free = self._free
        if not free:
            if self._staging is not None:
                self._drain_into(free, [self._staging])
            else:
                self._drain_into(free, [h.channel for h in self.handles])
            if not free:
                self.exhausted += 1
                return None
        buf = free.pop()
        if self.debug:
            if buf.owned:
                raise PoolIntegrityError(f"{buf!r} handed out twice")
            buf.owned = True
        self.acquired += 1
        return buf

    @staticmethod
    def _drain_into(dest, channels):
        for ch in channels:
            while (b := ch.pop()) is not EMPTY:
                dest.append(b)

    def release(self, handle: ReleaserHandle, buf: Slab):
        if self.debug:
            if buf.pool is not self:
                raise PoolIntegrityError(f"{buf!r} does not belong to this pool")
            if not buf.owned:
                raise PoolIntegrityError(f"double release of {buf!r}")
            buf.owned = False
        _push_wait(handle.channel, buf, self.spin)
        # counted only once the buffer is reachable, so in_flight never undercounts
        handle.released += 1

    def _drain_loop(self):
        chans = [h.channel for h in self.handles]
        staging = self._staging
        while not self._stop:
            moved = False
            for ch in chans:
                while (b := ch.pop()) is not EMPTY:
                    _push_wait(staging, b, self.spin)
                    moved = True
            if not moved:
                time.sleep(0.0001)

    def close(self):
        if self._drainer is not None:
            self._stop = True
            self._drainer.join()
            self._drainer = None

    @property
    def released(self) -> int:
        return sum(h.released for h in self.handles)

    @property
    def in_flight(self) -> int:
        return self.acquired - self.released

    def free_count(self) -> int:
        """Free list plus buffers waiting in return channels (exact when quiescent)."""
        n = len(self._free) + sum(h.channel.approx_len() for h in self.handles)
        if self._staging is not None:
            n += self._staging.approx_len()
        return n

    def stats(self) -> dict:
        return {
            "total": self.total_buffers,
            "acquired": self.acquired,
            "released": self.released,
            "in_flight": self.in_flight,
            "free": self.free_count(),
            "exhausted": self.exhausted,
        }

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
