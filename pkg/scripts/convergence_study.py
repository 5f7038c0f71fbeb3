"""Grid refinement study: heat-kernel error and pairing-identity residual.

    python scripts/convergence_study.py
"""

import argparse

import numpy as np

from blowup_lab.core import Grid1D, ScalarField, heat_kernel
from blowup_lab.fence import j_identity_residual
from blowup_lab.model import Potential
from blowup_lab.solver import Delta, SimConfig, solve_linearized, solve_nonlinear


def kernel_error(dx, t_end):
    g = Grid1D.from_spacing(-15.0, 15.0, dx)
    w = solve_linearized(Potential.zero(), Delta(0.0), SimConfig(g, t_end=t_end))
    return np.abs(w.final.values - heat_kernel(t_end, g.x, 0.0)).max()


def identity_residual(dx, dt, t_end=2.0):
    f = Potential.gaussian_bump(0.05, 1.0)
    g = Grid1D.from_spacing(-15.0, 15.0, dx)
    cfg = SimConfig(g, t_end=t_end, dt_init=dt)
    w = solve_linearized(f, ScalarField(g, np.exp(-((g.x + 1.0) ** 2) / 0.5)), cfg)
    u, _ = solve_nonlinear(f, ScalarField(g, -0.5 * np.exp(-((g.x - 1.0) ** 2))), cfg)
    return np.abs(j_identity_residual(u, w, t_end).values).max()


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--levels", type=int, default=4)
    ap.add_argument("--t", type=float, default=1.0)
    args = ap.parse_args()

    print(f"heat kernel sup error at t={args.t}")
    prev = None
    for i in range(args.levels):
        dx = 0.08 / 2**i
        e = kernel_error(dx, args.t)
        ratio = "" if prev is None else f"  ratio {prev / e:.3f}"
        print(f"  dx={dx:<8g} err={e:.3e}{ratio}")
        prev = e

    print("pairing identity residual (nonlinear, joint dx/dt halving)")
    prev = None
    for i in range(min(args.levels, 3)):
        dx, dt = 0.1 / 2**i, 0.004 / 2**i
        r = identity_residual(dx, dt)
        ratio = "" if prev is None else f"  ratio {prev / r:.3f}"
        print(f"  dx={dx:<8g} dt={dt:<8g} max|res|={r:.3e}{ratio}")
        prev = r


if __name__ == "__main__":
    main()
