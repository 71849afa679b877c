"""Regenerate the bundled FASTA fixtures (deterministic)."""
import math
import random
from pathlib import Path

# background amino-acid frequencies, roughly Swiss-Prot
FREQ = {
    "A": 8.25, "R": 5.53, "N": 4.06, "D": 5.45, "C": 1.37, "Q": 3.93, "E": 6.75,
    "G": 7.07, "H": 2.27, "I": 5.96, "L": 9.66, "K": 5.84, "M": 2.42, "F": 3.86,
    "P": 4.70, "S": 6.56, "T": 5.34, "W": 1.08, "Y": 2.92, "V": 6.87,
}


def write(path, records):
    with open(path, "w") as fh:
        for name, seq in records:
            fh.write(f">{name} synthetic\n")
            for k in range(0, len(seq), 60):
                fh.write(seq[k:k + 60] + "\n")


def main():
    rng = random.Random(20091007)
    letters, weights = zip(*FREQ.items())
    here = Path(__file__).parent
    query = "".join(rng.choices(letters, weights, k=144))
    write(here / "query.fasta", [("Q144", query)])
    db = []
    for k in range(500):
        # log-normal lengths with mean ~350, clipped to a test-friendly range
        n = int(min(3000, max(8, rng.lognormvariate(math.log(280), 0.65))))
        db.append((f"S{k:04d}", "".join(rng.choices(letters, weights, k=n))))
    write(here / "db500.fasta", db)
    write(here / "db3.fasta", db[:3])


if __name__ == "__main__":
    main()
