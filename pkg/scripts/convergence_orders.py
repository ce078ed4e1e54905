"""Manufactured-solution convergence orders for several fractional orders.

    python3 scripts/convergence_orders.py --s 0.25 0.5 0.75 --out out/orders
"""

import argparse
from pathlib import Path

from fracrd import artifacts
from fracrd.analysis import convergence_study


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--s", type=float, nargs="+", default=[0.25, 0.5, 0.75])
    ap.add_argument("--levels", type=int, nargs="+", default=[64, 128, 256, 512],
                    help="1/h values")
    ap.add_argument("--T", type=float, default=1.0)
    ap.add_argument("--out", default="out/orders")
    args = ap.parse_args()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    ladder = [1.0 / m for m in args.levels]
    print(f"{'s':>6} {'slope':>8} {'R^2':>8}  expected")
    for s in args.s:
        fit = convergence_study(s, ladder, T=args.T, k=1e-3 * args.T)
        expected = min(s + 0.5, 1.0)
        print(f"{s:>6g} {fit.fitted_slope:>8.3f} {fit.r_squared:>8.4f}  {expected:g}")
        artifacts.write_convergence(out / f"convergence_s{s:g}.csv", fit)
        artifacts.write_svg(out / f"convergence_s{s:g}.svg", artifacts.convergence_svg(fit))


if __name__ == "__main__":
    main()
