"""Farm communication-overhead micro-benchmark.

A farm filters a stream of 10-word tasks: the emitter allocates each task,
a worker increments every word and then busy-waits for the grain ``Tc``,
and the collector checks the words and frees the task. Sweeping ``Tc`` and
the worker count gives speedup curves for the lock-free engine and for a
mutex/condition-variable queue baseline.

    bench --grains 0.5,5,50 --workers 1,2,4,8 --tasks 100000 --engine both --csv out.csv
"""
from __future__ import annotations

import argparse
import csv
import logging
import statistics
import sys
import threading
import time
from dataclasses import asdict, dataclass

from streamfarm import _backend
from streamfarm._sentinels import ABSORB, END
from streamfarm.config import default_spin, yield_cpu
from streamfarm.farm import FarmConfig, build_farm
from streamfarm.graph import IntegrityError
from streamfarm.pool import SlabPool

log = logging.getLogger("streamfarm")

DEFAULT_GRAINS = (0.5, 5.0, 50.0)
DEFAULT_WORKERS = (1, 2, 4, 8)
CSV_COLUMNS = ("engine", "tc_micros", "n_workers", "n_tasks", "median_seconds", "speedup",
               "tasks_per_second")
EXIT_INTEGRITY = 2
EXIT_CALIBRATION = 3
N_WORDS = 10


class CalibrationError(RuntimeError):
    def __init__(self, target, best_iters, best_micros):
        super().__init__(f"could not calibrate {target} us: best {best_iters} iterations "
                         f"-> {best_micros:.3f} us")
        self.target = target
        self.best_iters = best_iters
        self.best_micros = best_micros


def _per_call_micros(core, iters, trials):
    """Median duration of one ``spin(iters)`` call, in microseconds."""
    reps = 1
    while core.spin_repeat(iters, reps) < 2e-4 and reps < 1 << 20:
        reps *= 2
    samples = [core.spin_repeat(iters, reps) / reps * 1e6 for _ in range(trials)]
    return statistics.median(samples)


def calibrate_spin(target_micros: float, trials: int = 20, tolerance: float | None = None,
                   max_rounds: int = 12, core=None) -> int:
    """Iteration count whose busy loop lasts ``target_micros`` on this host.

    The tolerance defaults to 5%, or 20% below 1 us where timer noise
    dominates. Raises :class:`CalibrationError` if no count lands inside it.
    """
    if target_micros <= 0:
        raise ValueError("target_micros must be > 0")
    core = core or _backend
    if tolerance is None:
        tolerance = 0.05 if target_micros >= 1 else 0.20
    n = 1 << 10
    while True:
        dt = core.spin_repeat(n, 1)
        if dt >= 2e-3 or n >= 1 << 34:
            break
        n *= 2
    rate = n / (dt * 1e6)
    iters = max(1, round(target_micros * rate))
    best = (float("inf"), iters, 0.0)
    for _ in range(max_rounds):
        measured = _per_call_micros(core, iters, trials)
        err = abs(measured - target_micros) / target_micros
        if err < best[0]:
            best = (err, iters, measured)
        if err <= tolerance:
            return iters
        iters = max(1, round(iters * target_micros / measured))
    raise CalibrationError(target_micros, best[1], best[2])


@dataclass
class BenchConfig:
    tc_micros: float
    n_workers: int
    n_tasks: int = 100_000
    channel_capacity: int = 512
    allocator: str = "pool"
    engine: str = "lockfree"
    repetitions: int = 5
    runtime: str = "native"
    backoff_spin: int | None = None

    def __post_init__(self):
        if self.tc_micros < 0:
            raise ValueError("tc_micros must be >= 0")
        if self.n_workers < 0:
            raise ValueError("n_workers must be >= 0")
        if self.repetitions < 1:
            raise ValueError("repetitions must be >= 1")
        if self.allocator not in ("pool", "system"):
            raise ValueError(f"unknown allocator {self.allocator!r}")
        if self.engine not in ("lockfree", "mutex"):
            raise ValueError(f"unknown engine {self.engine!r}")
        if self.runtime not in ("native", "graph"):
            raise ValueError(f"unknown runtime {self.runtime!r}")
        if self.runtime == "graph" and self.engine != "lockfree":
            raise ValueError("the graph runtime only provides the lockfree engine")
        if self.backoff_spin is None:
            self.backoff_spin = default_spin()


@dataclass
class SpeedupRecord:
    engine: str
    tc_micros: float
    n_workers: int
    n_tasks: int
    median_seconds: float
    speedup: float
    tasks_per_second: float

    def row(self):
        return [getattr(self, c) for c in CSV_COLUMNS]


def _check(cfg, collected, corrupted):
    if collected != cfg.n_tasks or corrupted:
        raise IntegrityError(f"{cfg.engine} run with {cfg.n_workers} workers collected "
                             f"{collected}/{cfg.n_tasks} tasks, {corrupted} corrupted")


def _time_native(cfg, iters):
    farm = _backend.NativeFarm(cfg.n_workers, cfg.n_tasks, iters, cfg.channel_capacity,
                               cfg.allocator == "pool", cfg.engine == "mutex", False,
                               cfg.backoff_spin)
    threads = [threading.Thread(target=farm.emitter), threading.Thread(target=farm.collector)]
    threads += [threading.Thread(target=farm.worker, args=(w,)) for w in range(cfg.n_workers)]
    t0 = time.perf_counter()
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    seconds = time.perf_counter() - t0
    _check(cfg, farm.collected, farm.corrupted)
    return seconds


def _time_graph(cfg, iters):
    """Same benchmark on the Python node runtime (farm + slab pool)."""
    spin = _backend.spin
    n_tasks = cfg.n_tasks
    pool = None
    if cfg.allocator == "pool":
        pool = SlabPool(8 * N_WORDS, 2 * cfg.channel_capacity * (cfg.n_workers + 1) + 8, 1)
        handle = pool.releaser(0)
    seq = iter(range(n_tasks))
    state = {"collected": 0, "corrupted": 0}

    def emitter(_):
        s = next(seq, None)
        if s is None:
            return END
        if pool is None:
            words = [0] * N_WORDS
            buf = words
        else:
            while (buf := pool.acquire()) is None:
                yield_cpu()
            words = buf.view.cast("Q")
        for k in range(N_WORDS):
            words[k] = s + k
        return s, buf

    def worker(task):
        s, buf = task
        words = buf if pool is None else buf.view.cast("Q")
        for k in range(N_WORDS):
            words[k] += 1
        spin(iters)
        return task

    def collector(task):
        s, buf = task
        words = buf if pool is None else buf.view.cast("Q")
        if any(words[k] != s + k + 1 for k in range(N_WORDS)):
            state["corrupted"] += 1
        state["collected"] += 1
        if pool is not None:
            pool.release(handle, buf)
        return ABSORB

    farm = build_farm(emitter, worker, collector,
                      FarmConfig(n_workers=cfg.n_workers, channel_capacity=cfg.channel_capacity))
    t0 = time.perf_counter()
    farm.run_and_wait()
    seconds = time.perf_counter() - t0
    _check(cfg, state["collected"], state["corrupted"])
    if pool is not None and pool.in_flight != 0:
        raise IntegrityError(f"pool leaked {pool.in_flight} buffers")
    return seconds


def _time_sequential(cfg, iters):
    seconds, collected, corrupted = _backend.run_sequential(cfg.n_tasks, iters,
                                                            cfg.allocator == "pool")
    _check(cfg, collected, corrupted)
    return seconds


def sequential_seconds(cfg: BenchConfig, iters: int) -> float:
    """Median single-threaded time for the same stream (first rep discarded)."""
    samples = [_time_sequential(cfg, iters) for _ in range(cfg.repetitions + 1)]
    return statistics.median(samples[1:])


def run_bench(cfg: BenchConfig, iters: int | None = None,
              t_seq: float | None = None) -> SpeedupRecord:
    """One configuration: median over ``repetitions`` timed runs after one warm-up."""
    if iters is None:
        iters = calibrate_spin(cfg.tc_micros) if cfg.tc_micros > 0 else 0
    if cfg.n_workers == 0:
        if t_seq is None:
            t_seq = sequential_seconds(cfg, iters)
        median = t_seq
    else:
        timer = _time_native if cfg.runtime == "native" else _time_graph
        if t_seq is None:
            # alternate reference and parallel runs so slow drift hits both alike
            seq, par = [], []
            for _ in range(cfg.repetitions + 1):
                seq.append(_time_sequential(cfg, iters))
                par.append(timer(cfg, iters))
            t_seq = statistics.median(seq[1:])
        else:
            par = [timer(cfg, iters) for _ in range(cfg.repetitions + 1)]
        median = statistics.median(par[1:])
    return SpeedupRecord(cfg.engine, cfg.tc_micros, cfg.n_workers, cfg.n_tasks, median,
                         t_seq / median, cfg.n_tasks / median)


def sweep(grains, workers, engines=("lockfree",), base: BenchConfig | None = None,
          on_record=None) -> list[SpeedupRecord]:
    """Cartesian product engine x grain x workers, in that nesting order."""
    if not grains or not workers or not engines:
        raise ValueError("grains, workers and engines must be non-empty")
    base = base or BenchConfig(tc_micros=0, n_workers=1)
    records = []
    calibrated = {}
    seq_cache = {}
    for engine in engines:
        for tc in grains:
            if tc not in calibrated:
                calibrated[tc] = calibrate_spin(tc) if tc > 0 else 0
            for nw in workers:
                cfg = BenchConfig(**{**asdict(base), "tc_micros": tc, "n_workers": nw,
                                     "engine": engine})
                if tc not in seq_cache:
                    seq_cache[tc] = sequential_seconds(cfg, calibrated[tc])
                rec = run_bench(cfg, calibrated[tc], seq_cache[tc])
                records.append(rec)
                if on_record:
                    on_record(rec)
    return records


def _floats(text):
    return [float(x) for x in text.split(",") if x.strip()]


def _ints(text):
    return [int(x) for x in text.split(",") if x.strip()]


def main(argv=None):
    ap = argparse.ArgumentParser(prog="bench", description=__doc__.splitlines()[0])
    ap.add_argument("--grains", type=_floats, default=list(DEFAULT_GRAINS),
                    help="comma-separated Tc values in microseconds")
    ap.add_argument("--workers", type=_ints, default=list(DEFAULT_WORKERS))
    ap.add_argument("--tasks", type=int, default=100_000)
    ap.add_argument("--engine", choices=["lockfree", "mutex", "both"], default="both")
    ap.add_argument("--alloc", choices=["pool", "system"], default="pool")
    ap.add_argument("--reps", type=int, default=5)
    ap.add_argument("--capacity", type=int, default=512)
    ap.add_argument("--runtime", choices=["native", "graph"], default="native",
                    help="native threads in the compiled core, or the Python node runtime")
    ap.add_argument("--csv", help="write records here (default: stdout)")
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(message)s")

    engines = ["lockfree", "mutex"] if args.engine == "both" else [args.engine]
    base = BenchConfig(tc_micros=0, n_workers=1, n_tasks=args.tasks,
                       channel_capacity=args.capacity, allocator=args.alloc,
                       repetitions=args.reps, runtime=args.runtime)
    out = open(args.csv, "w", newline="") if args.csv else sys.stdout
    writer = csv.writer(out)
    writer.writerow(CSV_COLUMNS)
    log.info("backend=%s", _backend.BACKEND)

    def emit(rec):
        writer.writerow(rec.row())
        out.flush()
        log.info("%-8s tc=%-6g workers=%-2d speedup=%.2f", rec.engine, rec.tc_micros,
                 rec.n_workers, rec.speedup)

    try:
        sweep(args.grains, args.workers, engines, base, emit)
    except CalibrationError as exc:
        out.write(f"# INCOMPLETE: {exc}\n")
        log.error("%s", exc)
        return EXIT_CALIBRATION
    except IntegrityError as exc:
        out.write(f"# INCOMPLETE: {exc}\n")
        log.error("%s", exc)
        return EXIT_INTEGRITY
    finally:
        if out is not sys.stdout:
            out.close()
    return 0


if __name__ == "__main__":
    sys.exit(main())
