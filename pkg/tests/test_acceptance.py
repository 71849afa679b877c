"""Acceptance criteria, one test each.

Every test records a ``C<n> PASS|FAIL|SKIP ...`` line; the lines are printed
together in the terminal summary. Run alone with
``pytest tests/test_acceptance.py -v`` or ``python tests/test_acceptance.py``.
"""
import inspect
import math
import random
import re
import statistics
import sys
import time
from pathlib import Path

import pytest

import streamfarm
from streamfarm import FarmConfig, OnDemand, _backend, bench, build_farm, run_ordered
from streamfarm.bench import BenchConfig, calibrate_spin, run_bench
from streamfarm.config import default_spin, physical_cores
from streamfarm.swfarm import ScoringScheme, Sequence, gcups, main as swfarm_main, sw_score
from oracles import BLOSUM50_ALPHABET, sw_oracle
from stress import check_mpmc, mpmc_tagged, pool_cycles, word_stream

pytestmark = pytest.mark.acceptance

RESULTS = []
SRC = Path(streamfarm.__file__).parent


def report(n, ok, detail):
    status = {True: "PASS", False: "FAIL", None: "SKIP"}[ok]
    line = f"C{n:<2} {status}  {detail}"
    RESULTS.append((n, line))
    print(line)
    return ok


def test_c01_spsc_two_thread_stress():
    n = 10**7
    t0 = time.perf_counter()
    parts, ok = [], True
    for cap in (1, 2, 512):
        t = time.perf_counter()
        r = word_stream(n, cap, default_spin())
        good = (r["received"] == n and r["out_of_order"] == 0
                and r["checksum"] == n * (n - 1) // 2 and r["len_violations"] == 0)
        ok &= good
        parts.append(f"cap={cap}:{'ok' if good else r}({time.perf_counter() - t:.1f}s)")
    total = time.perf_counter() - t0
    ok &= total < 60
    report(1, ok, f"{n} tokens in order, no loss/dup; {' '.join(parts)}; total {total:.1f}s < 60s")
    assert ok


def _no_rmw_on_ring_path():
    header = (SRC / "ffcore.h").read_text()
    ring_part = header.split("/* Bounded blocking MPMC queue")[0]
    if re.search(r"__atomic_(fetch|exchange|compare)|__sync_|cmpxchg|pthread_mutex", ring_part):
        return False
    pyx = (SRC / "_core.pyx").read_text()
    ring_cls = pyx.split("cdef class RingBuffer")[1].split("cdef class WordRing")[0]
    if re.search(r"ff_mqueue|__atomic|__sync_|pthread_mutex|PyThread_\w*lock", ring_cls):
        return False
    from streamfarm import _purecore, arbiter, graph
    funcs = [graph._Context.push, graph._Context.pop, graph._Context.idle, graph.Node.emit,
             graph.Node.receive, graph.Node._loop, graph.Inlet.put, graph.Outlet.get,
             arbiter.Emitter.emit, arbiter.Collector.receive, _purecore.RingBuffer.push,
             _purecore.RingBuffer.pop]
    return not any(re.search(r"Lock|Condition|Semaphore|\.acquire\(", inspect.getsource(f))
                   for f in funcs)


def test_c02_composed_mpmc():
    t0 = time.perf_counter()
    received, per, q = mpmc_tagged(4, 4, 10**6)
    problems = check_mpmc(received, per)
    audit = q.audit()
    no_rmw = _no_rmw_on_ring_path()
    ok = not problems and not audit and no_rmw
    report(2, ok, f"4x4, {sum(per)} items: multiset+per-origin order "
                  f"{'ok' if not problems else problems[:2]}; wiring audit "
                  f"{'clean' if not audit else audit}; no RMW/locks on data path: {no_rmw}; "
                  f"{time.perf_counter() - t0:.1f}s")
    assert ok


def test_c03_ordered_farm_under_skew():
    n = 10**4
    rng = random.Random(1234)
    delays = [rng.uniform(0, 1e-3) for _ in range(n)]

    def work(x):
        time.sleep(delays[x])
        return x

    farm = build_farm(range(n), work, None,
                      FarmConfig(n_workers=8, ordered=True, policy=OnDemand()))
    t0 = time.perf_counter()
    run_ordered(farm, timeout=300)
    tags = farm.collector.tags_seen
    ok = tags == list(range(n)) and farm.results == list(range(n))
    report(3, ok, f"8 workers, {n} tasks, 0-1 ms delays: tag sequence exactly 0..{n - 1}: "
                  f"{tags == list(range(n))}; max held {farm.collector.reorder.max_held}; "
                  f"{time.perf_counter() - t0:.1f}s")
    assert ok


def test_c04_coarse_grain_speedup():
    cores = physical_cores()
    if cores < 6:
        # not evaluable here; record what this host does show
        r = run_bench(BenchConfig(tc_micros=50, n_workers=4, n_tasks=10**4, repetitions=3))
        report(4, None, f"needs >= 6 physical cores, host has {cores}; observed speedup "
                        f"{r.speedup:.2f} with 4 workers at Tc=50us (1e4 tasks) is bounded by "
                        f"the core count, not evaluable against 3.0")
        pytest.skip(f"host has {cores} physical cores; criterion requires >= 6")
    r = run_bench(BenchConfig(tc_micros=50, n_workers=4, n_tasks=10**5, repetitions=5))
    ok = r.speedup >= 3.0
    report(4, ok, f"Tc=50us, 4 workers, 1e5 tasks: speedup {r.speedup:.2f} (>= 3.0), "
                  f"{cores} physical cores")
    assert ok


def test_c05_fine_grain_vs_mutex():
    iters = calibrate_spin(0.5)
    lf, mx = [], []
    for engine, out in (("lockfree", lf), ("mutex", mx)):
        bench._time_native(BenchConfig(0.5, 8, 10**5, engine=engine, repetitions=1), iters)
    for _ in range(5):
        for engine, out in (("lockfree", lf), ("mutex", mx)):
            cfg = BenchConfig(0.5, 8, 10**5, engine=engine, repetitions=1)
            out.append(cfg.n_tasks / bench._time_native(cfg, iters))
    ratios = [a / b for a, b in zip(lf, mx)]
    med = statistics.median(lf) / statistics.median(mx)
    failing = sum(r < 1.5 for r in ratios)
    ok = med >= 1.5 and failing <= 1
    report(5, ok, f"Tc=0.5us, 8 workers: median throughput lockfree {statistics.median(lf):.3g}/s "
                  f"vs mutex {statistics.median(mx):.3g}/s = {med:.2f}x (>= 1.5); per-rep "
                  f"{', '.join(f'{r:.2f}' for r in ratios)}; {failing} rep(s) below (<= 1 allowed)")
    assert ok


def test_c06_grain_monotonicity():
    speedups = []
    for tc in (0.5, 5, 50):
        speedups.append(run_bench(BenchConfig(tc, 4, 10**5, repetitions=5)).speedup)
    ok = speedups[0] <= speedups[1] <= speedups[2]
    report(6, ok, "lockfree speedup at 4 workers for Tc 0.5/5/50 us: "
                  + " <= ".join(f"{s:.3f}" for s in speedups))
    assert ok


def test_c07_pool_integrity():
    t0 = time.perf_counter()
    pool = pool_cycles(10**6, total_buffers=64, n_releasers=3)
    st = pool.stats()
    ok = (st["free"] == pool.total_buffers and st["exhausted"] == 0 and st["in_flight"] == 0
          and st["acquired"] == 10**6 and not pool.mismatched)
    report(7, ok, f"1e6 cycles, 1 acquirer + 3 releasers: free {st['free']}/"
                  f"{pool.total_buffers}, exhausted {st['exhausted']}, in flight "
                  f"{st['in_flight']}; {time.perf_counter() - t0:.1f}s")
    assert ok


def test_c08_smith_waterman_oracle():
    rng = random.Random(2009)
    pairs = [("".join(rng.choices(BLOSUM50_ALPHABET, k=rng.randint(1, 64))),
              "".join(rng.choices(BLOSUM50_ALPHABET, k=rng.randint(1, 64))))
             for _ in range(1000)]
    t0 = time.perf_counter()
    bad = []
    for go, ge in ((10, 2), (5, 2)):
        sc = ScoringScheme.blosum50(go, ge)
        for a, b in pairs:
            if sw_score(Sequence("a", a), Sequence("b", b), sc).score != sw_oracle(a, b, go, ge):
                bad.append((go, ge, a, b))
    secs = time.perf_counter() - t0
    ok = not bad and secs < 30
    report(8, ok, f"1000 pairs x gap 10/2 and 5/2, {_backend.BACKEND} kernel vs general-gap "
                  f"oracle: {len(bad)} mismatches; {secs:.1f}s < 30s")
    assert ok


def test_c09_parallel_determinism(tmp_path, data_dir):
    outputs = {}
    for w in (1, 2, 4, 8):
        out = tmp_path / f"w{w}.tsv"
        rc = swfarm_main(["--query", str(data_dir / "query.fasta"),
                          "--db", str(data_dir / "db500.fasta"), "--workers", str(w),
                          "--out", str(out)])
        assert rc == 0
        outputs[w] = out.read_bytes()
    # the trailer carries wall time and GCUPS, which legitimately differ run to run
    bodies = {w: b.rsplit(b"\n# gcups=", 1)[0] for w, b in outputs.items()}
    n_lines = bodies[1].count(b"\n") + 1
    ok = len(set(bodies.values())) == 1 and n_lines == 500
    report(9, ok, f"500-sequence db, workers 1/2/4/8: score lines byte-identical: "
                  f"{len(set(bodies.values())) == 1} ({n_lines} lines; timing trailer excluded)")
    assert ok


def test_c10_gcups_formula():
    literal = gcups(1000, 10**9, 1.0)
    homog = all(
        math.isclose(gcups(q, d, 2 * t), gcups(q, d, t) / 2, rel_tol=4 * sys.float_info.epsilon)
        for q, d, t in ((1000, 10**9, 1.0), (144, 167_326_533, 3.3), (7, 11, 1e-3),
                        (512, 10**12, 17.25)))
    formula = gcups(144, 167_326_533, 2.0) == 144 * 167_326_533 / (2.0 * 1e9)
    ok = literal == 1.0 and homog and formula
    report(10, ok, f"gcups(1000,1e9,1.0) = {literal!r} (criterion expects 1.0; |Q||D|/(T 1e9) "
                   f"gives 1000 for these inputs, see decisions ledger); homogeneity {homog}; "
                   f"formula {formula}")
    assert homog and formula
    if literal != 1.0:
        pytest.xfail("criterion's literal example disagrees with the GCUPS formula it names")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v", "-p", "no:cacheprovider"]))
