#!/usr/bin/env python3
"""Damping of the kink collective coordinate vs crystal kinetic energy.

Tracks X(t) of an undriven kink at a ladder of bath temperatures, extracts
the velocity-autocorrelation decay rate g per run and fits the exponent of
g(E_k).  Phonon-scattering theory (and the reference experiment's modelling)
give g ~ E_k^(1/2); expect an exponent near 0.5.
"""

import argparse

import numpy as np

from kinksim.dynamics import LangevinParams, run_trajectory
from kinksim.equilibria import kink_state
from kinksim.kink import fit_damping_exponent, kink_damping_estimate
from kinksim.model import TrapModel

if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--duration-ms", type=float, default=60.0)
    ap.add_argument("--temps-mk", type=float, nargs="+",
                    default=[1.0, 2.0, 4.0, 8.0])
    ap.add_argument("--repeats", type=int, default=4)
    args = ap.parse_args()

    trap = TrapModel.from_frequencies()
    units = trap.units_for()
    kink = kink_state(34, trap)

    e_k_vals, g_vals = [], []
    for t_mk in args.temps_mk:
        gs, eks = [], []
        for rep in range(args.repeats):
            lp = LangevinParams(
                bath_temperature_k=t_mk * 1e-3, seed=args.seed,
                trajectory_index=rep,
            )
            rec = run_trajectory(
                kink.configuration, trap, units, lp,
                duration_s=args.duration_ms * 1e-3, thermalize_s=3e-3,
                observer_stride_s=2e-6, stop_on_escape=False,
            )
            x = rec.kink_x.copy()
            good = np.isfinite(x)
            if good.mean() < 0.9:
                continue
            x[~good] = np.interp(np.flatnonzero(~good), np.flatnonzero(good),
                                 x[good])
            try:
                gs.append(kink_damping_estimate(rec.times, x, min_decay_spans=50))
                eks.append(rec.mean_kinetic())
            except Exception as exc:
                print(f"  T={t_mk} mK rep {rep}: {exc}")
        if gs:
            e_k_vals.append(float(np.mean(eks)))
            g_vals.append(float(np.mean(gs)))
            print(f"T = {t_mk:5.2f} mK: E_k = {e_k_vals[-1]:.4f}, "
                  f"g = {g_vals[-1]:.4f} (x{len(gs)})")

    if len(g_vals) >= 3:
        p = fit_damping_exponent(e_k_vals, g_vals)
        print(f"\nfitted exponent of g(E_k): {p:.3f}  (sqrt law -> 0.5)")
    else:
        print("not enough converged runs for the exponent fit")
