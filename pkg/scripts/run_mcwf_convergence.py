"""Trajectory-count convergence of the MCWF ensemble.

Runs the same Lindblad-type experiment at increasing trajectory counts and
reports the worst z-score against the deterministic number-basis solution.
Statistical errors should shrink like 1/sqrt(n_traj) while z stays O(1).
"""
import argparse
import time

import numpy as np

from qbmsim import (build_coefficient_table, heating_function,
                    integrate_secular, run_ensemble, vacuum_density,
                    vacuum_vector)
from qbmsim.spectral import ReservoirSpec


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--alpha", type=float, default=0.05)
    ap.add_argument("--r", type=float, default=10.0)
    ap.add_argument("--kt", type=float, default=10.0,
                    help="k_B T / hbar in units of omega0")
    ap.add_argument("--periods", type=float, default=2.0)
    ap.add_argument("--counts", type=int, nargs="+",
                    default=[1000, 4000, 16000])
    ap.add_argument("--master-seed", type=int, default=777)
    ap.add_argument("--threads", type=int, default=4)
    ap.add_argument("--dim", type=int, default=64)
    args = ap.parse_args()

    spec = ReservoirSpec.from_kt(omega0=1.0, alpha=args.alpha,
                                 omega_c=args.r, kt=args.kt)
    t_max = args.periods * 2.0 * np.pi
    table = build_coefficient_table(spec, t_max, 1024)
    tg = np.linspace(0.0, t_max, 25)

    states, _ = integrate_secular(vacuum_density(96), table, tg)
    n_ref = heating_function(states)
    psi0 = vacuum_vector(args.dim)

    print(f"{'n_traj':>8} {'max z':>8} {'max sigma':>11} {'seconds':>8}")
    for n_traj in args.counts:
        t0 = time.perf_counter()
        est = run_ensemble(psi0, table, tg, n_traj, args.master_seed,
                           threads=args.threads)
        dt = time.perf_counter() - t0
        z = np.abs(est.n_mean - n_ref) / np.maximum(est.std_err, 1e-300)
        print(f"{n_traj:>8} {np.max(z[1:]):>8.2f} "
              f"{np.max(est.std_err):>11.3e} {dt:>8.1f}")


if __name__ == "__main__":
    main()
