"""Smith-Waterman database scan as an ordered task farm.

The emitter streams one (query, subject) task per database sequence, workers
compute the affine-gap local alignment score, and the collector writes
``name<TAB>score`` lines in database order followed by a GCUPS trailer.
"""
from __future__ import annotations

import argparse
import logging
import sys
import time
from array import array
from dataclasses import dataclass

from streamfarm._backend import sw_score_encoded
from streamfarm.arbiter import OnDemand, _policy
from streamfarm.blosum import BLOSUM50_TEXT
from streamfarm.farm import FarmConfig, build_farm
from streamfarm.graph import IntegrityError

log = logging.getLogger("streamfarm")

STANDARD_RESIDUES = "ACDEFGHIKLMNPQRSTVWY"


class FastaError(ValueError):
    pass


@dataclass(frozen=True)
class Sequence:
    name: str
    residues: str

    def __len__(self):
        return len(self.residues)


@dataclass(frozen=True)
class ScoreResult:
    name: str
    score: int
    cells: int


@dataclass(frozen=True)
class AlignmentTask:
    query: bytes
    subject: bytes
    name: str


def parse_fasta(path) -> list[Sequence]:
    """Read FASTA records in file order.

    The name is the header text after '>' up to the first whitespace;
    residue lines are concatenated and blank lines skipped.
    """
    seqs = []
    name = None
    chunks: list[str] = []
    header_line = 0

    def flush():
        if name is not None:
            if not chunks:
                raise FastaError(f"{path}:{header_line}: record {name!r} has no residues")
            seqs.append(Sequence(name, "".join(chunks).upper()))

    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            if line.startswith(">"):
                flush()
                fields = line[1:].split()
                if not fields:
                    raise FastaError(f"{path}:{lineno}: empty sequence name")
                name, chunks, header_line = fields[0], [], lineno
            elif line.startswith(";"):
                continue
            else:
                if name is None:
                    raise FastaError(f"{path}:{lineno}: sequence data before any '>' header")
                chunks.append("".join(line.split()))
    flush()
    if not seqs:
        log.warning("%s contains no sequences", path)
    return seqs


class ScoringScheme:
    """Substitution matrix plus affine gap penalties.

    Residues outside the matrix alphabet score ``wildcard`` against
    everything.
    """

    def __init__(self, alphabet: str, rows, gap_open: int = 10, gap_extend: int = 2,
                 wildcard: int = -1):
        if gap_extend < 1 or gap_open < gap_extend:
            raise ValueError("need gap_open >= gap_extend >= 1")
        n = len(alphabet)
        if len(rows) != n or any(len(r) != n for r in rows):
            raise ValueError("matrix must be square over its alphabet")
        for i in range(n):
            for j in range(i):
                if rows[i][j] != rows[j][i]:
                    raise ValueError(f"matrix not symmetric at {alphabet[i]}/{alphabet[j]}")
        self.alphabet = alphabet
        self.rows = [list(r) for r in rows]
        self.gap_open = gap_open
        self.gap_extend = gap_extend
        self.wildcard = wildcard
        self.unknown = n
        self.stride = n + 1
        flat = array("i")
        for r in self.rows:
            flat.extend(r)
            flat.append(wildcard)
        flat.extend([wildcard] * self.stride)
        self.flat = flat
        table = bytearray([self.unknown]) * 256
        for k, ch in enumerate(alphabet):
            table[ord(ch.upper())] = k
            table[ord(ch.lower())] = k
        self._table = bytes(table)

    @classmethod
    def from_text(cls, text, **kw):
        alphabet = None
        rows = []
        for line in text.splitlines():
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            if alphabet is None:
                alphabet = "".join(line.split())
                continue
            parts = line.split()
            if parts[0] != alphabet[len(rows)]:
                raise ValueError(f"row {parts[0]!r} out of order in matrix file")
            rows.append([int(v) for v in parts[1:]])
        if alphabet is None:
            raise ValueError("matrix text has no header row")
        return cls(alphabet, rows, **kw)

    @classmethod
    def blosum50(cls, gap_open=10, gap_extend=2, wildcard=-1):
        return cls.from_text(BLOSUM50_TEXT, gap_open=gap_open, gap_extend=gap_extend,
                             wildcard=wildcard)

    @classmethod
    def load(cls, spec, **kw):
        """``spec`` is ``"blosum50"`` or a path to an NCBI-format matrix."""
        if spec.lower() == "blosum50":
            return cls.from_text(BLOSUM50_TEXT, **kw)
        with open(spec) as fh:
            return cls.from_text(fh.read(), **kw)

    def score(self, a: str, b: str) -> int:
        i, j = self._table[ord(a)], self._table[ord(b)]
        return self.flat[i * self.stride + j]

    def encode(self, residues: str) -> bytes:
        return residues.encode("ascii", "replace").translate(self._table)


def sw_score(q: Sequence, s: Sequence, sc: ScoringScheme) -> ScoreResult:
    score = sw_score_encoded(sc.encode(q.residues), sc.encode(s.residues), sc.flat,
                             sc.stride, sc.gap_open, sc.gap_extend)
    return ScoreResult(s.name, score, len(q) * len(s))


def gcups(q_len, total_db_residues, seconds) -> float:
    """Billions of DP cell updates per second."""
    if seconds <= 0:
        raise ValueError("seconds must be > 0")
    return q_len * total_db_residues / (seconds * 1e9)


@dataclass
class Report:
    lines: list[str]
    seconds: float
    cells: int
    gcups: float

    def body(self) -> str:
        return "".join(line + "\n" for line in self.lines)

    def trailer(self) -> str:
        return f"# gcups={self.gcups:.6f} seconds={self.seconds:.6f} cells={self.cells}\n"

    def text(self) -> str:
        return self.body() + self.trailer()


def run_swfarm(query: Sequence, db: list[Sequence], scheme: ScoringScheme,
               n_workers: int = 1, policy=None, capacity: int = 64) -> Report:
    if n_workers < 1:
        raise ValueError("n_workers must be >= 1")
    q = scheme.encode(query.residues)
    tasks = (AlignmentTask(q, scheme.encode(s.residues), s.name) for s in db)
    flat, stride = scheme.flat, scheme.stride
    go, ge = scheme.gap_open, scheme.gap_extend

    def worker(t):
        score = sw_score_encoded(t.query, t.subject, flat, stride, go, ge)
        return ScoreResult(t.name, score, len(t.query) * len(t.subject))

    def collector(r):
        return f"{r.name}\t{r.score}", r.cells

    cfg = FarmConfig(n_workers=n_workers, channel_capacity=capacity,
                     policy=policy or OnDemand(), ordered=True)
    farm = build_farm(tasks, worker, collector, cfg)
    t0 = time.perf_counter()
    farm.run_and_wait()
    seconds = time.perf_counter() - t0
    if len(farm.results) != len(db):
        raise IntegrityError(f"{len(farm.results)} results for {len(db)} database sequences")
    lines = [line for line, _ in farm.results]
    cells = sum(c for _, c in farm.results)
    total = sum(len(s) for s in db)
    rate = gcups(len(query), total, seconds) if seconds > 0 else 0.0
    return Report(lines, seconds, cells, rate)


def main(argv=None):
    ap = argparse.ArgumentParser(prog="swfarm", description=__doc__.splitlines()[0])
    ap.add_argument("--query", required=True, help="FASTA file; the first record is the query")
    ap.add_argument("--db", required=True, help="FASTA database")
    ap.add_argument("--matrix", default="blosum50", help="blosum50 or an NCBI-format matrix file")
    ap.add_argument("--gap-open", type=int, default=10)
    ap.add_argument("--gap-extend", type=int, default=2)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--policy", default="ondemand", choices=["ondemand", "rr"])
    ap.add_argument("--out", help="output TSV (default: stdout)")
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s")

    try:
        queries = parse_fasta(args.query)
        db = parse_fasta(args.db)
        scheme = ScoringScheme.load(args.matrix, gap_open=args.gap_open,
                                    gap_extend=args.gap_extend)
    except (OSError, ValueError) as exc:
        print(f"swfarm: {exc}", file=sys.stderr)
        return 1
    if not queries:
        print("swfarm: query file has no sequences", file=sys.stderr)
        return 1
    if len(queries) > 1:
        log.warning("using only the first of %d query sequences", len(queries))
    try:
        report = run_swfarm(queries[0], db, scheme, args.workers, _policy(args.policy, OnDemand))
    except IntegrityError as exc:
        print(f"swfarm: {exc}", file=sys.stderr)
        return 2
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(report.text())
    else:
        sys.stdout.write(report.text())
    return 0


if __name__ == "__main__":
    sys.exit(main())
