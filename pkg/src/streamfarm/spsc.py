"""Bounded wait-free single-producer/single-consumer ring buffer.

``RingBuffer(capacity)`` carries object handles: ``push`` returns False when
the ring is full and ``pop`` returns :data:`EMPTY` when it is empty. Exactly
one thread may push and one (possibly different) thread may pop.
``WordRing`` is the same channel over non-zero machine words, driven
entirely from native code when the compiled core is present.
"""
from streamfarm._backend import BACKEND, RingBuffer, WordRing
from streamfarm._sentinels import EMPTY

__all__ = ["BACKEND", "EMPTY", "RingBuffer", "WordRing", "new"]


def new(capacity: int) -> RingBuffer:
    return RingBuffer(capacity)
