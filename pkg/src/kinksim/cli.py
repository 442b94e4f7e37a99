"""Command-line interface: experiment orchestration and result persistence.

Subcommands: relax, modes, spectroscopy, lifetime, directionality, pn.
Every run writes config.json and manifest.json into the output directory
next to the per-command CSV/JSON artifacts.  Ensembles are parallelised over
trajectories with per-trajectory seeding, so results are independent of the
worker count and execution order; per-trajectory outcomes are appended to
results.jsonl, which makes interrupted sweeps resumable.

Exit codes: 0 success, 2 numerical failure, 3 configuration error,
4 insufficient statistics.
"""

from __future__ import annotations

import argparse
import functools
import json
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, replace
from pathlib import Path

import numpy as np
from numpy.random import Generator, Philox, SeedSequence

from . import __version__
from .analysis import (
    calibrate_temperature,
    directionality,
    fit_kramers,
    fit_lifetime,
    fit_lorentzian,
    kramers_lifetime,
    survival_curve,
)
from .config import ExperimentConfig
from .dynamics import run_trajectory, steady_state_energy
from .equilibria import KIND_KINK, KIND_KINK_BAR, kink_state, zigzag_state
from .errors import (
    ConfigurationError,
    EmptyEnsembleError,
    InsufficientDataError,
    KinksimError,
    PoorFitError,
    TooFewEscapesError,
    TooFewPointsError,
)
from .kink import pn_landscape, quadratic_center_residual
from .modes import identify_kink_modes, normal_modes

SYNTHETIC_W_KBTD = 26.5        # ground-truth barrier of the synthetic pipeline
SYNTHETIC_T_SLOPE = 1200.0     # synthetic map T/T_D = 1 + slope * eps
SYNTHETIC_PREFACTOR_MS = 5e-3  # synthetic Kramers prefactor (ms)

#: the driven crystal reaches its nonequilibrium steady state on a
#: millisecond timescale; kinetic-energy averages start here
EK_SETTLE_MS = 3.0


def _fmt(x):
    if isinstance(x, float):
        return f"{x:.10g}"
    return str(x)


def write_csv(path, header, rows):
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


# ---------------------------------------------------------------------------
# trajectory ensemble engine
# ---------------------------------------------------------------------------

@functools.lru_cache(maxsize=8)
def _prepared_state(cfg_json, charge):
    """Relaxed initial configuration (kink of the requested charge, or
    zigzag when charge == 0), cached per worker process."""
    cfg = ExperimentConfig.from_dict(json.loads(cfg_json))
    trap = cfg.trap_model(epsilon=0.0)
    if charge == 0:
        return zigzag_state(cfg.run.n_ions, trap).configuration
    return kink_state(cfg.run.n_ions, trap, charge=charge).configuration


def _run_escape_job(payload):
    """One trajectory: returns the outcome record (worker-side entry point)."""
    cfg = ExperimentConfig.from_dict(json.loads(payload["cfg"]))
    units = cfg.unit_system()
    trap = cfg.trap_model(epsilon=payload["epsilon"], f_d_hz=payload["f_d_hz"])
    initial = _prepared_state(payload["cfg"], payload["charge"])
    langevin = cfg.langevin_params(
        trajectory_index=payload["index"], seed=payload["seed"]
    )
    rec = run_trajectory(
        initial,
        trap,
        units,
        langevin,
        duration_s=payload["duration_ms"] * 1e-3,
        thermalize_s=cfg.run.thermalize_ms * 1e-3,
        ramp_s=cfg.drive.ramp_us * 1e-6,
        observer_stride_s=cfg.run.observer_stride_us * 1e-6,
        escape_dwell_s=cfg.run.escape_dwell_ms * 1e-3,
        stop_on_escape=True,
    )
    # steady-state kinetic energy while the kink is alive: the effective-
    # temperature proxy is taken from the same trajectories as the lifetimes
    settle_t = units.time_from_si(EK_SETTLE_MS * 1e-3)
    sel = (rec.times >= settle_t) & np.isfinite(rec.kink_x)
    out = {
        "f_d_hz": payload["f_d_hz"],
        "epsilon": payload["epsilon"],
        "charge": payload["charge"],
        "index": payload["index"],
        "duration_ms": payload["duration_ms"],
        "escaped": bool(rec.escape.escaped),
        "inconclusive": bool(rec.escape.inconclusive),
        "time_ms": (
            float(rec.escape.time * units.time_unit * 1e3)
            if rec.escape.escaped
            else None
        ),
        "direction": rec.escape.direction,
        "charge_at_escape": rec.escape.charge_at_escape,
        "e_k_mean": float(rec.kinetic[sel].mean()) if sel.sum() >= 10 else None,
        "e_k_frames": int(sel.sum()),
    }
    return out


def _job_key(payload):
    return (
        f"{payload['f_d_hz']:.6f}|{payload['epsilon']:.9g}"
        f"|{payload['charge']}|{payload['index']}"
    )


def run_ensemble(cfg, jobs, workers, jsonl_path=None):
    """Run trajectory jobs (list of payload dicts), resuming from jsonl.

    Results are returned sorted by (f_d, epsilon, charge, index) regardless
    of completion order, so aggregates do not depend on the worker count.
    """
    done = {}
    if jsonl_path and os.path.exists(jsonl_path):
        with open(jsonl_path) as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                rec = json.loads(line)
                done[_job_key(rec)] = rec
    todo = [p for p in jobs if _job_key(p) not in done]
    sink = open(jsonl_path, "a") if jsonl_path else None

    def emit(rec):
        done[_job_key(rec)] = rec
        if sink:
            sink.write(json.dumps(rec, sort_keys=True) + "\n")
            sink.flush()

    try:
        if workers <= 1:
            for payload in todo:
                emit(_run_escape_job(payload))
        else:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                for rec in pool.map(_run_escape_job, todo, chunksize=1):
                    emit(rec)
    finally:
        if sink:
            sink.close()
    ordered = [done[_job_key(p)] for p in jobs]
    return ordered


def _resolve_drive_frequency(cfg):
    """Drive frequency: explicit config value or the strongest kink mode."""
    if cfg.drive.f_d_hz is not None:
        return float(cfg.drive.f_d_hz), None
    trap = cfg.trap_model(epsilon=0.0)
    zz = zigzag_state(cfg.run.n_ions, trap)
    kink = kink_state(cfg.run.n_ions, trap, zigzag=zz)
    szz = normal_modes(zz, trap)
    skk = normal_modes(kink, trap)
    report = identify_kink_modes(skk, szz, kink.configuration, trap)
    if not report.spectroscopy_targets:
        raise ConfigurationError("no kink mode found to auto-fill f_d_hz")
    k = report.spectroscopy_targets[0]
    return float(skk.frequencies_hz[k]), report


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_relax(cfg, outdir, configuration="zigzag"):
    trap = cfg.trap_model(epsilon=0.0)
    units = cfg.unit_system()
    n = cfg.run.n_ions
    if configuration in ("zigzag", "zigzag_bar"):
        result = zigzag_state(n, trap, mirrored=configuration == "zigzag_bar")
    elif configuration in (KIND_KINK, KIND_KINK_BAR):
        charge = 1 if configuration == KIND_KINK else -1
        result = kink_state(n, trap, charge=charge)
    else:
        raise ConfigurationError(f"unknown configuration {configuration!r}")
    pos = result.configuration.positions
    order = np.argsort(pos[:, 0], kind="stable")
    um = units.length_unit * 1e6
    rows = [
        (i, pos[j, 0] * um, pos[j, 1] * um, pos[j, 2] * um)
        for i, j in enumerate(order)
    ]
    write_csv(outdir / "positions.csv", ("ion_index", "x_um", "y_um", "z_um"), rows)
    label = result.label
    write_json(outdir / "classification.json", {
        "kind": label.kind,
        "kink_position_um": (
            None if label.kink_position is None else label.kink_position * um
        ),
        "topological_charge": label.topological_charge,
        "energy": result.energy,
        "energy_kbtd": result.energy / units.kb_td,
        "gradient_norm": result.gradient_norm,
        "n_ions": n,
    })
    return {"kind": label.kind}


def cmd_modes(cfg, outdir, configuration="zigzag"):
    trap = cfg.trap_model(epsilon=0.0)
    units = cfg.unit_system()
    n = cfg.run.n_ions
    zz = zigzag_state(n, trap)
    szz = normal_modes(zz, trap)
    report = None
    if configuration in (KIND_KINK, KIND_KINK_BAR):
        charge = 1 if configuration == KIND_KINK else -1
        kink = kink_state(n, trap, charge=charge, zigzag=zz)
        spectrum = normal_modes(kink, trap)
        report = identify_kink_modes(spectrum, szz, kink.configuration, trap)
        equilibrium = kink.configuration
    elif configuration in ("zigzag", "zigzag_bar"):
        spectrum = szz
        equilibrium = zz.configuration
    else:
        raise ConfigurationError(f"unknown configuration {configuration!r}")

    from .modes import drive_coupling

    rows = []
    for k in range(spectrum.n_modes):
        coup = drive_coupling(spectrum.mode_vector(k), equilibrium, trap)
        rows.append((k, spectrum.frequencies_hz[k], spectrum.ipr[k], coup))
    write_csv(outdir / f"modes_{configuration}.csv",
              ("mode_index", "freq_hz", "ipr_ions", "coupling"), rows)
    if report is not None:
        write_json(outdir / "kink_modes.json", {
            "band_hz": [report.band[0] / (2 * np.pi), report.band[1] / (2 * np.pi)],
            "gapped_mode_indices": report.gapped_mode_indices,
            "kink_mode_indices": report.kink_mode_indices,
            "inband_mode_indices": report.inband_mode_indices,
            "spectroscopy_targets": report.spectroscopy_targets,
            "target_freqs_hz": [
                spectrum.frequencies_hz[k] for k in report.spectroscopy_targets
            ],
            "coupling": {str(k): v for k, v in report.coupling.items()},
            "lowest_kink_mode_hz": (
                None if report.lowest_kink_mode is None
                else report.lowest_kink_mode / (2 * np.pi)
            ),
            "highest_kink_mode_hz": (
                None if report.highest_kink_mode is None
                else report.highest_kink_mode / (2 * np.pi)
            ),
            "shear_mode_index": report.shear_mode_index,
            "shear_chain_correlation": report.shear_chain_correlation,
            "notes": report.notes,
        })
    return {"n_modes": spectrum.n_modes}


def _binomial_err(k, n):
    p = k / n
    return float(2.0 * np.sqrt(max(p * (1 - p), 0.25 / n) / n) / 2.0) or 1.0 / n


def cmd_spectroscopy(cfg, outdir, workers=1, synthetic=False):
    if cfg.sweep is None or cfg.sweep.parameter != "f_d_hz":
        raise ConfigurationError("spectroscopy requires a sweep over f_d_hz")
    freqs = list(cfg.sweep.values)
    n_traj = cfg.run.n_trajectories
    eps = cfg.drive.epsilon
    cfg_json = json.dumps(cfg.to_dict(), sort_keys=True)

    if synthetic:
        # analysis-pipeline mode: binomial draws from a two-line ground truth
        _, report = None, None
        f0, report = _resolve_drive_frequency(replace(cfg, drive=replace(cfg.drive, f_d_hz=None)))
        trap = cfg.trap_model(epsilon=0.0)
        targets = [f0]
        if report is not None and len(report.spectroscopy_targets) > 1:
            kink = kink_state(cfg.run.n_ions, trap)
            skk = normal_modes(kink, trap)
            targets.append(
                float(skk.frequencies_hz[report.spectroscopy_targets[1]])
            )
        else:
            targets.append(f0 * 0.94)
        rng = Generator(Philox(SeedSequence(cfg.run.seed, spawn_key=(999,))))
        width = 4.0e3
        records = []
        for f in freqs:
            p = 0.02 + 0.6 * width**2 / ((f - targets[0]) ** 2 + width**2)
            p += 0.25 * width**2 / ((f - targets[1]) ** 2 + width**2)
            k = int(rng.binomial(n_traj, min(p, 1.0)))
            records.append({"f_d_hz": f, "n": n_traj, "n_escaped": k})
    else:
        jobs = [
            {
                "cfg": cfg_json,
                "f_d_hz": float(f),
                "epsilon": eps,
                "charge": 1,
                "index": i,
                "seed": cfg.run.seed,
                "duration_ms": cfg.drive.duration_ms,
            }
            for f in freqs
            for i in range(n_traj)
        ]
        results = run_ensemble(cfg, jobs, workers, outdir / "results.jsonl")
        records = []
        for f in freqs:
            sel = [r for r in results if r["f_d_hz"] == float(f)]
            k = sum(1 for r in sel if r["escaped"])
            records.append({"f_d_hz": float(f), "n": len(sel), "n_escaped": k})

    rows = []
    probs, errs = [], []
    for rec in records:
        p = rec["n_escaped"] / rec["n"]
        e = _binomial_err(rec["n_escaped"], rec["n"])
        probs.append(p)
        errs.append(e)
        rows.append((rec["f_d_hz"], p, e, rec["n"], rec["n_escaped"]))
    write_csv(outdir / "scan.csv",
              ("f_d_hz", "p_escape", "p_err", "n_traj", "n_escaped"), rows)

    fit_payload = {"n_points": len(freqs)}
    try:
        n_peaks = 2 if len(freqs) >= 16 else 1
        fit = fit_lorentzian(np.array(freqs), np.array(probs), np.array(errs),
                             n_peaks=n_peaks)
        fit_payload["offset"] = fit.offset
        fit_payload["peaks"] = [asdict(p) for p in fit.peaks]
    except KinksimError as exc:
        fit_payload["error"] = str(exc)
    write_json(outdir / "resonance_fit.json", fit_payload)
    return fit_payload


def _synthetic_lifetime_records(cfg, eps_values, window_ms):
    rng = Generator(Philox(SeedSequence(cfg.run.seed, spawn_key=(1234,))))
    records = {}
    for eps in eps_values:
        t_td = 1.0 + SYNTHETIC_T_SLOPE * eps
        tau = kramers_lifetime(SYNTHETIC_W_KBTD, t_td, SYNTHETIC_PREFACTOR_MS)
        draws = rng.exponential(tau, size=cfg.run.n_trajectories)
        recs = []
        for i, t in enumerate(draws):
            escaped = bool(t < window_ms)
            recs.append({
                "epsilon": eps, "index": i, "escaped": escaped,
                "inconclusive": False,
                "time_ms": float(t) if escaped else None,
                "direction": "right" if escaped and i % 2 == 0 else
                             ("left" if escaped else None),
                "duration_ms": window_ms,
            })
        records[eps] = recs
    return records


def cmd_lifetime(cfg, outdir, workers=1, synthetic=False):
    if cfg.sweep is None or cfg.sweep.parameter != "epsilon":
        raise ConfigurationError("lifetime requires a sweep over epsilon")
    eps_values = list(cfg.sweep.values)
    window_ms = cfg.drive.duration_ms
    units = cfg.unit_system()
    n_ions = cfg.run.n_ions

    if synthetic:
        f_d = cfg.drive.f_d_hz or 0.0
        per_eps = _synthetic_lifetime_records(cfg, eps_values, window_ms)
        t_map = None
    else:
        f_d, _ = _resolve_drive_frequency(cfg)
        cfg_json = json.dumps(cfg.to_dict(), sort_keys=True)
        jobs = [
            {
                "cfg": cfg_json,
                "f_d_hz": f_d,
                "epsilon": float(eps),
                "charge": 1,
                "index": i,
                "seed": cfg.run.seed,
                "duration_ms": window_ms,
            }
            for eps in eps_values
            for i in range(cfg.run.n_trajectories)
        ]
        results = run_ensemble(cfg, jobs, workers, outdir / "results.jsonl")
        per_eps = {
            eps: [r for r in results if r["epsilon"] == float(eps)]
            for eps in eps_values
        }
        t_map = None

    lifetimes = {}
    fits_payload = {}
    for eps, recs in per_eps.items():
        durations = np.array([
            r["time_ms"] if r["escaped"] else r["duration_ms"] for r in recs
        ])
        escaped = np.array([r["escaped"] for r in recs], dtype=bool)
        grid = np.linspace(0.0, window_ms, 60)
        curve = survival_curve(durations, escaped, grid)
        write_csv(
            outdir / f"survival_eps_{eps:.6g}.csv",
            ("time_ms", "survival", "err"),
            zip(curve.times, curve.survival, curve.error),
        )
        try:
            fit = fit_lifetime(durations, escaped)
            lifetimes[eps] = fit
            fits_payload[f"{eps:.6g}"] = {
                "tau_ms": fit.tau, "ci68_ms": list(fit.ci68),
                "n_escapes": fit.n_escapes, "n_censored": fit.n_censored,
            }
        except TooFewEscapesError as exc:
            fits_payload[f"{eps:.6g}"] = {"error": str(exc)}
    write_json(outdir / "lifetimes.json", {
        "f_d_hz": f_d, "window_ms": window_ms, "fits": fits_payload,
    })

    if len(lifetimes) < 1:
        raise TooFewEscapesError("no epsilon produced enough escapes")

    kramers_payload = {"synthetic": synthetic}
    if len(lifetimes) >= 3:
        if synthetic:
            t_td = {e: 1.0 + SYNTHETIC_T_SLOPE * e for e in lifetimes}
            kramers_payload["temperature_map"] = {
                "kind": "synthetic", "slope_ttd_per_eps": SYNTHETIC_T_SLOPE,
            }
        else:
            t_td, cal_payload = ensemble_temperatures(
                cfg, f_d, per_eps, units, lifetimes.keys()
            )
            write_json(outdir / "calibration.json", cal_payload)
        kfit = fit_kramers(
            [lifetimes[e].tau for e in sorted(lifetimes)],
            [t_td[e] for e in sorted(lifetimes)],
        )
        kramers_payload.update({
            "w_kbtd": kfit.w_kbtd, "w_err_kbtd": kfit.w_err,
            "prefactor_ms": kfit.prefactor, "r_squared": kfit.r_squared,
            "points": kfit.points,
        })
    else:
        kramers_payload["notice"] = (
            "fewer than 3 epsilon points: Kramers fit skipped"
        )
    write_json(outdir / "kramers.json", kramers_payload)
    return kramers_payload


def ensemble_temperatures(cfg, f_d, per_eps, units, eps_keys):
    """Per-epsilon effective temperatures from the ensemble's own E_k record.

    The driven-steady-state kinetic energy is averaged over the lifetime
    trajectories themselves (frames past the settling time with the kink
    alive), which keeps the temperature proxy aligned with the escape
    statistics.  An undriven steady-state run anchors eps = 0, and a linear
    E_k(eps) map is reported alongside when it fits well.
    """
    n_ions = cfg.run.n_ions
    trap = cfg.trap_model(epsilon=0.0)
    anchor = steady_state_energy(
        trap, units, cfg.langevin_params(trajectory_index=50_000),
        epsilon=0.0, f_d_hz=f_d, settle_s=3e-3, average_s=4e-3,
        initial=_prepared_state(json.dumps(cfg.to_dict(), sort_keys=True), 1),
        n_ions=n_ions, n_trajectories=3,
    )
    samples = {0.0: anchor.e_k}
    for eps in eps_keys:
        vals = [
            r["e_k_mean"] for r in per_eps[eps]
            if r.get("e_k_mean") is not None
        ]
        if vals:
            samples[float(eps)] = float(np.mean(vals))
    t_of = lambda ek: 2.0 * ek / (3.0 * n_ions) / units.kb_td
    t_td = {e: t_of(ek) for e, ek in samples.items() if e != 0.0}
    payload = {
        "f_d_hz": f_d,
        "kind": "in-ensemble",
        "samples": [
            {"epsilon": e, "e_k": ek, "t_td": t_of(ek)}
            for e, ek in sorted(samples.items())
        ],
    }
    try:
        t_map = calibrate_temperature(
            sorted(samples), [samples[e] for e in sorted(samples)],
            n_ions, units.energy_unit,
        )
        payload["linear_map"] = {
            "r_squared": t_map.r_squared,
            "intercept_e_k": t_map.intercept,
            "slope_e_k_per_eps": t_map.slope,
        }
    except (PoorFitError, TooFewPointsError) as exc:
        payload["linear_map"] = {"rejected": str(exc)}
    return t_td, payload


def cmd_directionality(cfg, outdir, workers=1, charges=(1, -1)):
    f_d, _ = _resolve_drive_frequency(cfg)
    eps_values = (
        list(cfg.sweep.values)
        if cfg.sweep is not None and cfg.sweep.parameter == "epsilon"
        else [cfg.drive.epsilon]
    )
    units = cfg.unit_system()
    cfg_json = json.dumps(cfg.to_dict(), sort_keys=True)
    jobs = [
        {
            "cfg": cfg_json,
            "f_d_hz": f_d,
            "epsilon": float(eps),
            "charge": charge,
            "index": i,
            "seed": cfg.run.seed,
            "duration_ms": cfg.drive.duration_ms,
        }
        for eps in eps_values
        for charge in charges
        for i in range(cfg.run.n_trajectories)
    ]
    results = run_ensemble(cfg, jobs, workers, outdir / "results.jsonl")

    payload = {"f_d_hz": f_d, "groups": []}
    for eps in eps_values:
        for charge in charges:
            sel = [
                r for r in results
                if r["epsilon"] == float(eps) and r["charge"] == charge
            ]
            n_r = sum(1 for r in sel if r["escaped"] and r["direction"] == "right")
            n_l = sum(1 for r in sel if r["escaped"] and r["direction"] == "left")
            entry = {
                "epsilon": float(eps), "charge": charge,
                "n_right": n_r, "n_left": n_l,
                "n_trajectories": len(sel),
            }
            try:
                td = directionality(n_r, n_l, charge=charge, epsilon=eps)
                entry["td"] = td.td
                entry["td_err"] = td.error
            except TooFewEscapesError as exc:
                entry["error"] = str(exc)
            payload["groups"].append(entry)

    # per-charge PN barriers for the mechanism cross-check
    payload["pn_barriers"] = {}
    for charge in charges:
        pn = pn_landscape(cfg.trap_model(epsilon=0.0), cfg.run.n_ions, charge=charge)
        payload["pn_barriers"][str(charge)] = {
            "w_left_kbtd": pn.barrier_left / units.kb_td,
            "w_right_kbtd": pn.barrier_right / units.kb_td,
        }
    write_json(outdir / "directionality.json", payload)
    if not any("td" in g for g in payload["groups"]):
        raise TooFewEscapesError("no charge/epsilon group had enough escapes")
    return payload


def cmd_pn(cfg, outdir, charge=1):
    trap = cfg.trap_model(epsilon=0.0)
    units = cfg.unit_system()
    pn = pn_landscape(trap, cfg.run.n_ions, charge=charge)
    um = units.length_unit * 1e6
    write_csv(
        outdir / "pn_landscape.csv",
        ("kink_x_um", "energy_kbtd"),
        zip(pn.kink_x * um, pn.energy / units.kb_td),
    )
    try:
        residual = quadratic_center_residual(pn)
    except InsufficientDataError:
        residual = None
    payload = {
        "charge": charge,
        "w_left_kbtd": pn.barrier_left / units.kb_td,
        "w_right_kbtd": pn.barrier_right / units.kb_td,
        "w_mean_kbtd": pn.mean_barrier / units.kb_td,
        "formation_energy_kbtd": (pn.energy_kink - pn.energy_zigzag) / units.kb_td,
        "quadratic_center_residual": residual,
    }
    write_json(outdir / "pn_barriers.json", payload)
    return payload


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def build_parser():
    parser = argparse.ArgumentParser(
        prog="kinksim",
        description="Driven-damped dynamics of discrete solitons in ion crystals",
    )
    parser.add_argument("--config", type=Path, default=None,
                        help="JSON experiment configuration")
    parser.add_argument("--out", type=Path, default=Path("kinksim-out"),
                        help="output directory")
    parser.add_argument("--seed", type=int, default=None,
                        help="override run.seed")
    parser.add_argument("--workers", type=int, default=os.cpu_count() or 1)
    parser.add_argument("--synthetic", action="store_true",
                        help="analysis-pipeline mode with synthetic inputs")
    sub = parser.add_subparsers(dest="command", required=True)

    p_relax = sub.add_parser("relax", help="relax a configuration to equilibrium")
    p_relax.add_argument("--configuration", default="zigzag",
                         choices=["zigzag", "zigzag_bar", "kink", "kink_bar"])
    p_modes = sub.add_parser("modes", help="normal-mode spectrum and kink modes")
    p_modes.add_argument("--configuration", default="zigzag",
                         choices=["zigzag", "zigzag_bar", "kink", "kink_bar"])
    sub.add_parser("spectroscopy", help="escape probability vs drive frequency")
    sub.add_parser("lifetime", help="survival curves, lifetimes, Kramers barrier")
    p_dir = sub.add_parser("directionality", help="topology-conditioned transport")
    p_dir.add_argument("--charges", default="both", choices=["both", "+1", "-1"])
    p_pn = sub.add_parser("pn", help="Peierls-Nabarro landscape and barriers")
    p_pn.add_argument("--charge", type=int, default=1, choices=[1, -1])
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    t_start = time.time()
    try:
        cfg = (
            ExperimentConfig.load(args.config)
            if args.config is not None
            else ExperimentConfig()
        )
        if args.seed is not None:
            cfg = replace(cfg, run=replace(cfg.run, seed=args.seed))
        outdir = args.out
        outdir.mkdir(parents=True, exist_ok=True)
        write_json(outdir / "config.json", cfg.to_dict())

        if args.command == "relax":
            result = cmd_relax(cfg, outdir, args.configuration)
        elif args.command == "modes":
            result = cmd_modes(cfg, outdir, args.configuration)
        elif args.command == "spectroscopy":
            result = cmd_spectroscopy(cfg, outdir, args.workers, args.synthetic)
        elif args.command == "lifetime":
            result = cmd_lifetime(cfg, outdir, args.workers, args.synthetic)
        elif args.command == "directionality":
            charges = {"both": (1, -1), "+1": (1,), "-1": (-1,)}[args.charges]
            result = cmd_directionality(cfg, outdir, args.workers, charges)
        elif args.command == "pn":
            result = cmd_pn(cfg, outdir, args.charge)
        else:  # pragma: no cover
            raise ConfigurationError(f"unknown command {args.command}")

        write_json(outdir / "manifest.json", {
            "tool_version": __version__,
            "command": args.command,
            "config_digest": cfg.digest(),
            "master_seed": cfg.run.seed,
            "wallclock_s": time.time() - t_start,
            "summary": _jsonable(result),
        })
        return 0
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 3
    except (TooFewEscapesError, TooFewPointsError, InsufficientDataError,
            EmptyEnsembleError) as exc:
        print(f"insufficient statistics: {exc}", file=sys.stderr)
        return 4
    except KinksimError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2


def _jsonable(obj):
    try:
        json.dumps(obj)
        return obj
    except TypeError:
        return str(obj)


if __name__ == "__main__":
    sys.exit(main())
