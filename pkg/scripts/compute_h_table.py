"""Recompute the frozen Monte Carlo h values in ``phcq.selection.H_TABLE``.

    python scripts/compute_h_table.py [--reps 4000000]

Prints the Monte Carlo estimate, its standard error and the quadrature
value for every (k, delta, n0) combination, followed by a dict literal to
paste into ``selection.py``.
"""

import argparse

import numpy as np

from phcq.selection import h_monte_carlo, h_quadrature

COMBOS = [(2, 0.05, 10), (3, 0.05, 10), (2, 0.05, 20), (3, 0.05, 20)]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--reps", type=int, default=4_000_000)
    ap.add_argument("--seed", type=int, default=19750101)
    args = ap.parse_args()

    table = {}
    for i, (k, delta, n0) in enumerate(COMBOS):
        rng = np.random.default_rng([args.seed, i])
        h, se = h_monte_carlo(k, delta, n0, reps=args.reps, rng=rng)
        hq = h_quadrature(k, delta, n0)
        print(f"k={k} delta={delta} n0={n0}: mc={h:.4f} (se {se:.4f})  quadrature={hq:.4f}  "
              f"z={(h - hq) / se:+.2f}")
        table[(k, delta, n0)] = round(h, 4)
    print("H_TABLE = {")
    for key, h in table.items():
        print(f"    {key!r}: {h!r},")
    print("}")


if __name__ == "__main__":
    main()
