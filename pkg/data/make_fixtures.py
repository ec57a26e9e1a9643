"""Regenerate the CSV fixtures in this directory.

Run from the repository root: ``python3 data/make_fixtures.py``.
"""

from pathlib import Path

import numpy as np

SEED = 20120914
HERE = Path(__file__).resolve().parent


def save(name, M, header=None):
    with open(HERE / name, "w", encoding="utf-8", newline="\n") as fh:
        if header:
            fh.write(",".join(header) + "\n")
        for row in M:
            fh.write(",".join(f"{v:.10g}" for v in row) + "\n")


def main():
    rng = np.random.default_rng(SEED)
    n, p, q = 100, 10, 50
    # null data for the regression test with q1 = 30: X does not depend on Z
    Z = rng.normal(1.0, 0.5, size=(n, q))
    X = rng.standard_normal((n, p))
    save("null_X.csv", X, header=[f"x{j + 1}" for j in range(p)])
    save("null_Z.csv", Z)
    # column 50 duplicates column 1
    Zs = Z.copy()
    Zs[:, -1] = Zs[:, 0]
    save("singular_Z.csv", Zs)
    # six groups of 15 observations in dimension 3 with equal means
    for i in range(6):
        save(f"manova_group{i + 1}.csv", rng.standard_normal((15, 3)))


if __name__ == "__main__":
    main()
