"""Print error curves from a converge CSV as a text table (alpha columns, N rows).

    python3 scripts/plot_convergence.py results/fig2.csv [--beta 1.01]

Plotting is left to external tools; this only pivots the CSV for a quick look.
"""
import argparse
import csv
from collections import defaultdict


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("path")
    parser.add_argument("--beta", type=float, default=None)
    args = parser.parse_args()
    table = defaultdict(dict)
    alphas = []
    with open(args.path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            beta = float(row["beta"])
            if args.beta is not None and beta != args.beta:
                continue
            key = (beta, row["alpha"])
            if key not in alphas:
                alphas.append(key)
            table[int(row["N"])][key] = float(row["err_sup"])
    print("N".rjust(6) + "".join(f"  a={a} b={b}".rjust(20) for b, a in alphas))
    for N in sorted(table):
        cells = "".join(f"{table[N][k]:20.3e}" if k in table[N] else " " * 20 for k in alphas)
        print(f"{N:6d}{cells}")


if __name__ == "__main__":
    main()
