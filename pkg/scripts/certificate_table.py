"""Tabulate the certificate maximum against its small-beta expansions.

    python scripts/certificate_table.py --K 2 --betas 1e-4 1e-5 1e-6 1e-7
"""

import argparse
import math

from blowup_lab.fence import certificate_A
from blowup_lab.model import TheoremParams


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--K", type=float, default=2.0)
    ap.add_argument("--betas", type=float, nargs="+", default=[1e-4, 1e-5, 1e-6, 1e-7, 1e-8])
    args = ap.parse_args()

    print("expansion A: K - 18 K sqrt(b) + 432 K^3 b")
    print("expansion B: K - 18 K^2 sqrt(b) + 432 K^3 b")
    cols = ("beta", "t0", "t_window", "A_max", "rel_err_A", "rel_err_B", "|err_B|/b^1.5")
    print("".join(f"{c:>15}" for c in cols))
    for b in args.betas:
        p = TheoremParams(1.0, args.K, b, math.sqrt(b / (27.0 * args.K)), 0.0, -1.0)
        c = certificate_A(p)
        ea = abs(c.A_max - c.asym_value) / c.A_max
        eb = abs(c.A_max - c.asym_corrected) / c.A_max
        row = (b, c.t0, p.t_window, c.A_max, ea, eb, abs(c.A_max - c.asym_corrected) / b**1.5)
        print("".join(f"{v:>15.6g}" for v in row))


if __name__ == "__main__":
    main()
