"""Mesh-consistency table for the exponential-growth system at a long horizon.

Prints final sup norms of U and V for each (d1, d2, beta) and mesh, plus the
norm a discrete eigen-analysis predicts for the least damped Crank-Nicolson
mode, which is what the finer meshes end up showing at large T.

    python3 scripts/long_horizon_table.py --T 100 --n 256 512
"""

import argparse

import numpy as np
from scipy.linalg import eigh

from fracrd.analysis import long_horizon_norms
from fracrd.operator import FracOperator, Mesh1D


def cn_remnant_log10(n, s, d, k, T):
    op = FracOperator.build(Mesh1D(-1.0, 1.0, n), s)
    lam = eigh(op.A, op.M, eigvals_only=True)
    z = k * d * lam
    return round(T / k) * float(np.log10(np.abs((1 - z / 2) / (1 + z / 2))).max())


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--s", type=float, default=0.75)
    ap.add_argument("--T", type=float, default=100.0)
    ap.add_argument("--k", type=float, default=1e-2)
    ap.add_argument("--n", type=int, nargs="+", default=[256, 512])
    args = ap.parse_args()

    params = [(1.0, 2.0, 3.0), (4.0, 3.0, 5.0)]
    print(f"{'d1':>4} {'d2':>4} {'beta':>5} {'n':>5} {'|U|inf':>11} {'|V|inf':>11} "
          f"{'status':>10} {'CN factor':>11}")
    for d1, d2, beta in params:
        for n in args.n:
            u, v, rep = long_horizon_norms(args.s, d1, d2, beta, n, T=args.T, k=args.k)
            rem = cn_remnant_log10(n, args.s, min(d1, d2), args.k, args.T)
            print(f"{d1:>4g} {d2:>4g} {beta:>5g} {n:>5d} {u:>11.3e} {v:>11.3e} "
                  f"{rep.status:>10} {'1e%.0f' % rem:>11}")


if __name__ == "__main__":
    main()
