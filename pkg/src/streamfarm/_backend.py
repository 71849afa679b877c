"""Select the compiled core, falling back to pure Python.

Set ``STREAMFARM_PURE=1`` to force the fallback even when the extension is
importable.
"""
import logging
import os

log = logging.getLogger("streamfarm")

if os.environ.get("STREAMFARM_PURE", "") not in ("", "0"):
    from streamfarm import _purecore as impl
else:
    try:
        from streamfarm import _core as impl
    except ImportError:  # extension not built
        log.debug("compiled core unavailable, using pure-Python fallback")
        from streamfarm import _purecore as impl

BACKEND = impl.BACKEND
CACHE_LINE = impl.CACHE_LINE
RingBuffer = impl.RingBuffer
WordRing = impl.WordRing
spin = impl.spin
spin_repeat = impl.spin_repeat
sw_score_encoded = impl.sw_score_encoded
NativeFarm = impl.NativeFarm
run_sequential = impl.run_sequential


def backends():
    """Every importable backend module, compiled first."""
    from streamfarm import _purecore

    mods = []
    try:
        from streamfarm import _core

        mods.append(_core)
    except ImportError:
        pass
    mods.append(_purecore)
    return mods
