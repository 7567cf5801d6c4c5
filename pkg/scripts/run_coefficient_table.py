"""Dump a coefficient table with its regime diagnostics.

Convenience wrapper around build_coefficient_table for quick parameter
exploration; the CLI `coefficients` subcommand is the reproducible path.
"""
import argparse
from pathlib import Path

import numpy as np

from qbmsim import build_coefficient_table, classify_regime, stationary_rates
from qbmsim.spectral import ReservoirSpec, thermal_occupation


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--omega0", type=float, default=1.0)
    ap.add_argument("--alpha", type=float, default=0.1)
    ap.add_argument("--r", type=float, default=10.0)
    ap.add_argument("--kt", type=float, default=10.0,
                    help="k_B T / hbar in rad/s")
    ap.add_argument("--periods", type=float, default=2.0)
    ap.add_argument("--n-steps", type=int, default=1024)
    ap.add_argument("--out", type=Path, default=Path("coefficients.csv"))
    args = ap.parse_args()

    spec = ReservoirSpec.from_kt(omega0=args.omega0, alpha=args.alpha,
                                 omega_c=args.r * args.omega0, kt=args.kt)
    t_max = args.periods * 2.0 * np.pi / spec.omega0
    table = build_coefficient_table(spec, t_max, args.n_steps)
    table.to_csv(args.out)
    print(f"wrote {args.out} ({len(table.grid)} points, t_max {t_max:g})")

    report = classify_regime(table)
    print(f"regime: {report.classification.value}"
          + ("" if report.first_violation_time is None
             else f" (first violation t = {report.first_violation_time:g})"))
    if spec.alpha > 0.0:
        d_inf, g_inf = stationary_rates(spec)
        target = 2.0 * float(thermal_occupation(spec.omega0, spec.kt)) + 1.0
        print(f"stationary: delta = {d_inf:.6e}, gamma = {g_inf:.6e}")
        if g_inf != 0.0:
            print(f"detailed balance: ratio {d_inf / g_inf:.6f} "
                  f"vs 2 nbar + 1 = {target:.6f}")


if __name__ == "__main__":
    main()
