"""Compiled core vs pure-Python fallback on the hot kernels.

    python benchmarks/compare_backends.py [--quick] [--csv out.csv]

Each row times the same operation on both backends and reports the ratio.
The Python-level runtime (graph, farm, pool) is timed in a subprocess with
STREAMFARM_PURE set, since the backend is fixed at import.
"""
import argparse
import csv
import json
import os
import subprocess
import sys
import threading
import time
from pathlib import Path

from streamfarm import _backend
from streamfarm.swfarm import ScoringScheme, parse_fasta

DATA = Path(__file__).resolve().parent.parent / "tests" / "data"


def best_of(fn, reps=3):
    out = []
    for _ in range(reps):
        t0 = time.perf_counter()
        fn()
        out.append(time.perf_counter() - t0)
    return min(out)


def ring_single_thread(core, n):
    r = core.RingBuffer(256)

    def go():
        push, pop = r.push, r.pop
        for k in range(n // 256):
            for j in range(256):
                push(j)
            for j in range(256):
                pop()

    return best_of(go)


def ring_two_threads(core, n):
    def go():
        w = core.WordRing(512)
        tp = threading.Thread(target=w.produce_sequence, args=(n, 0))
        tc = threading.Thread(target=w.consume_sequence, args=(n, 0))
        tc.start()
        tp.start()
        tp.join()
        tc.join()

    return best_of(go, 2)


def sw_kernel(core, n_subjects):
    sc = ScoringScheme.blosum50()
    q = sc.encode(parse_fasta(DATA / "query.fasta")[0].residues)
    subs = [sc.encode(s.residues) for s in parse_fasta(DATA / "db500.fasta")[:n_subjects]]

    def go():
        for s in subs:
            core.sw_score_encoded(q, s, sc.flat, sc.stride, 10, 2)

    return best_of(go, 2)


def native_farm(core, n):
    def go():
        farm = core.NativeFarm(2, n, 0, 512, True, False, False, 0)
        ts = [threading.Thread(target=farm.emitter), threading.Thread(target=farm.collector)]
        ts += [threading.Thread(target=farm.worker, args=(w,)) for w in range(2)]
        for t in ts:
            t.start()
        for t in ts:
            t.join()
        assert farm.collected == n

    return best_of(go, 2)


RUNTIME_SNIPPET = """
import json, time
from streamfarm import BACKEND, FarmConfig, build_farm
n = {n}
t0 = time.perf_counter()
farm = build_farm(range(n), lambda x: x + 1, None, FarmConfig(n_workers=2, ordered=True))
farm.run_and_wait()
assert len(farm.results) == n
print(json.dumps([BACKEND, time.perf_counter() - t0]))
"""


def graph_farm(pure, n):
    env = {**os.environ, "STREAMFARM_PURE": "1" if pure else "0"}
    out = subprocess.run([sys.executable, "-c", RUNTIME_SNIPPET.format(n=n)], env=env,
                         capture_output=True, text=True, check=True)
    return json.loads(out.stdout)[1]


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--quick", action="store_true", help="smaller inputs")
    ap.add_argument("--csv")
    args = ap.parse_args(argv)
    mods = {m.BACKEND: m for m in _backend.backends()}
    if "compiled" not in mods:
        sys.exit("compiled core not built; run `pip install -e . --no-build-isolation` first")
    c, p = mods["compiled"], mods["pure"]
    k = 10 if args.quick else 1
    # (name, n, unit, compiled timer, pure timer, pure input divisor)
    cases = [
        ("ring push/pop, 1 thread", 1_000_000 // k, "ops",
         lambda n: ring_single_thread(c, n), lambda n: ring_single_thread(p, n), 1),
        ("word ring, 2 threads", 2_000_000 // k, "items",
         lambda n: ring_two_threads(c, n), lambda n: ring_two_threads(p, n), 20),
        ("smith-waterman kernel", 50 // min(k, 5), "subjects",
         lambda n: sw_kernel(c, n), lambda n: sw_kernel(p, n), 25),
        ("native farm, 2 workers", 200_000 // k, "tasks",
         lambda n: native_farm(c, n), lambda n: native_farm(p, n), 20),
        ("graph ordered farm", 100_000 // k, "items",
         lambda n: graph_farm(False, n), lambda n: graph_farm(True, n), 1),
    ]
    rows = []
    print(f"{'case':<26}{'compiled/s':>14}{'pure/s':>14}{'ratio':>9}")
    for name, n, unit, fc, fp, div in cases:
        # the pure side runs a scaled-down input; compare per-unit rates
        n_p = max(1, n // div)
        tc = fc(n) / n
        tp = fp(n_p) / n_p
        rows.append((name, unit, 1 / tc, 1 / tp, tp / tc))
        print(f"{name:<26}{1 / tc:>14.4g}{1 / tp:>14.4g}{tp / tc:>8.1f}x")
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["case", "unit", "compiled_per_s", "pure_per_s", "speedup"])
            w.writerows(rows)


if __name__ == "__main__":
    main()
