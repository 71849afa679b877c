"""Marker objects shared by the compiled core and the pure-Python fallback."""


class _Marker:
    __slots__ = ("_name",)

    def __init__(self, name):
        self._name = name

    def __repr__(self):
        return self._name

    def __reduce__(self):
        return self._name


#: returned by ``RingBuffer.pop`` when nothing is queued
EMPTY = _Marker("EMPTY")
#: end-of-stream; placed on channels by the runtime only
EOS = _Marker("EOS")
#: service result: consume the input, forward nothing
ABSORB = _Marker("ABSORB")
#: service result from a source: the stream is exhausted
END = _Marker("END")
