#!/usr/bin/env python3
"""Paper-scale spectroscopy preset: 85 ms drive windows, 100 repetitions.

This is the heavy protocol (hours on a multicore machine); the scaled
10/30 ms preset used by the acceptance suite lives in tests/test_acceptance.py.
Results land in the output directory as scan.csv + resonance_fit.json.
"""

import argparse
import json
import sys
import tempfile
from pathlib import Path

import numpy as np

from kinksim.cli import main as cli_main


def build_config(seed, n_traj):
    return {
        "run": {
            "n_ions": 34,
            "seed": seed,
            "n_trajectories": n_traj,
            "observer_stride_us": 20.0,
            "thermalize_ms": 2.0,
        },
        "drive": {"epsilon": 1.45e-3, "duration_ms": 85.0},
        "sweep": {
            "parameter": "f_d_hz",
            # dense near the expected kink lines, coarse elsewhere
            "values": sorted(set(
                list(np.arange(296e3, 316e3, 2e3))
                + list(np.arange(318e3, 328e3, 3e3))
                + list(np.arange(326e3, 342e3, 1.5e3))
                + [345e3, 350e3]
            )),
        },
    }


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="runs/paper_spectroscopy")
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--trajectories", type=int, default=100)
    ap.add_argument("--workers", type=int, default=None)
    args = ap.parse_args()

    cfg = build_config(args.seed, args.trajectories)
    with tempfile.NamedTemporaryFile("w", suffix=".json", delete=False) as fh:
        json.dump(cfg, fh)
        cfg_path = fh.name
    argv = ["--config", cfg_path, "--out", args.out, "spectroscopy"]
    if args.workers:
        argv = ["--workers", str(args.workers)] + argv
    sys.exit(cli_main(argv))
