"""Heating-function comparison across the cutoff ratio.

Reproduces the two qualitative shapes: oscillatory approach (r < 1, the
reservoir responds slower than the system) against monotone relaxation
(r > 1).  Writes one CSV per ratio plus a small JSON index.
"""
import argparse
import json
from pathlib import Path

import numpy as np

from qbmsim import (build_coefficient_table, classify_regime,
                    propagate_secular, vacuum_state)
from qbmsim.spectral import ReservoirSpec


def heating_series(spec, periods, n_steps, n_out):
    t_max = periods * 2.0 * np.pi / spec.omega0
    table = build_coefficient_table(spec, t_max, n_steps)
    tg = np.linspace(0.0, t_max, n_out)
    state0 = vacuum_state()
    n = np.array([propagate_secular(state0, table, float(t)).n_mean
                  for t in tg])
    return table, tg, n


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--omega0", type=float, default=1.0e7,
                    help="system frequency in rad/s")
    ap.add_argument("--alpha", type=float, default=1.0e-4)
    ap.add_argument("--temperature", type=float, default=300.0,
                    help="kelvin")
    ap.add_argument("--ratios", type=float, nargs="+",
                    default=[0.1, 1.0, 10.0])
    ap.add_argument("--periods", type=float, default=2.0)
    ap.add_argument("--n-steps", type=int, default=1024)
    ap.add_argument("--n-out", type=int, default=201)
    ap.add_argument("--out", type=Path, default=Path("out/heating_scan"))
    args = ap.parse_args()

    args.out.mkdir(parents=True, exist_ok=True)
    index = []
    for r in args.ratios:
        spec = ReservoirSpec.from_ratio(omega0=args.omega0,
                                        alpha=args.alpha, r=r,
                                        temperature=args.temperature)
        table, tg, n = heating_series(spec, args.periods, args.n_steps,
                                      args.n_out)
        report = classify_regime(table)
        name = f"heating_r{r:g}.csv"
        np.savetxt(args.out / name, np.column_stack((tg, n)),
                   fmt="%.17g", delimiter=",", header="t,n_mean",
                   comments="")
        rising = bool(np.all(np.diff(n) > -1e-12 * max(n.max(), 1e-30)))
        index.append({"r": r, "file": name,
                      "classification": report.classification.value,
                      "monotone": rising, "final_n": float(n[-1])})
        print(f"r={r:<6g} {report.classification.value:<18} "
              f"monotone={rising} final <n>={n[-1]:.4e}")
    (args.out / "index.json").write_text(
        json.dumps(index, indent=2) + "\n")


if __name__ == "__main__":
    main()
