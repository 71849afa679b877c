"""Runtime knobs read from the environment.

``STREAMFARM_SPIN``      spin iterations before yielding on Empty/Full
``STREAMFARM_WATCHDOG``  seconds before ``Network.wait`` gives up (unset: never)
``STREAMFARM_PIN``       comma-separated CPU ids assigned to nodes in start order
"""
from __future__ import annotations

import os
import time
from dataclasses import dataclass, field

DEFAULT_SPIN = 1024


def _sleep0():
    time.sleep(0)


# sleep(0) drops the GIL but usually not the CPU, so on a uniprocessor the
# waiting peer only runs after the switch interval; sched_yield gives up both
yield_cpu = getattr(os, "sched_yield", _sleep0)


def available_cpus() -> int:
    try:
        return len(os.sched_getaffinity(0))
    except AttributeError:
        return os.cpu_count() or 1


def default_spin() -> int:
    # a spinning thread cannot be overtaken by its peer on a single CPU
    return DEFAULT_SPIN if available_cpus() > 1 else 0


@dataclass
class RuntimeConfig:
    spin: int = field(default_factory=default_spin)
    watchdog: float | None = None
    pin: list[int] | None = None

    @classmethod
    def from_env(cls, environ=None) -> "RuntimeConfig":
        env = os.environ if environ is None else environ
        cfg = cls()
        if env.get("STREAMFARM_SPIN"):
            cfg.spin = int(env["STREAMFARM_SPIN"])
            if cfg.spin < 0:
                raise ValueError("STREAMFARM_SPIN must be >= 0")
        if env.get("STREAMFARM_WATCHDOG"):
            cfg.watchdog = float(env["STREAMFARM_WATCHDOG"])
        if env.get("STREAMFARM_PIN"):
            cfg.pin = [int(c) for c in env["STREAMFARM_PIN"].split(",") if c.strip()]
        return cfg


def physical_cores() -> int:
    """Distinct physical cores among the CPUs this process may run on."""
    cpus = os.sched_getaffinity(0) if hasattr(os, "sched_getaffinity") else None
    try:
        with open("/proc/cpuinfo") as fh:
            blocks = fh.read().strip().split("\n\n")
    except OSError:
        return available_cpus()
    cores = set()
    for block in blocks:
        info = dict(line.split(":", 1) for line in block.splitlines() if ":" in line)
        info = {k.strip(): v.strip() for k, v in info.items()}
        if "processor" not in info:
            continue
        if cpus is not None and int(info["processor"]) not in cpus:
            continue
        cores.add((info.get("physical id", "0"), info.get("core id", info["processor"])))
    return len(cores) or available_cpus()
