"""Driven-damped Langevin dynamics of the crystal and steady-state probes.

One trajectory is a deterministic function of (seed, trajectory_index): the
noise comes from a counter-based Philox stream keyed by both, consumed in a
fixed per-step order, so ensembles parallelise with no shared state and any
chunking of the integration reproduces identical numbers.

Time layout of a trajectory: thermalization runs on negative times with the
drive gated off; the drive window starts at t = 0 with a linear amplitude
ramp.  All sampled observables are reported for t >= 0.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.random import Generator, Philox, SeedSequence

from . import kernels
from .errors import (
    ConfigurationError,
    CoulombSingularityError,
    NotSettledError,
    NumericalBlowupError,
)
from .kink import ESCAPE_DWELL_MS, EscapeEvent, detect_escape, observe_kink
from .model import BOLTZMANN, COULOMB_GUARD, CrystalState, TrapModel, UnitSystem

#: timestep rule: at least this many steps per period of the fastest mode
STEPS_PER_FASTEST_PERIOD = 50

#: margin applied to omega_z when no spectrum is available for the dt rule
OMEGA_MAX_MARGIN = 1.2

#: default drive amplitude ramp (avoids switching transients)
DRIVE_RAMP_S = 100e-6

#: default laser-cooling damping of the axial axis, rad/s (gamma/m)
GAMMA_X_DEFAULT = 2.0 * np.pi * 300.0

#: radial cooling fraction: beam tilted < 5 degrees from the axis
RADIAL_GAMMA_RATIO = 0.01


@dataclass(frozen=True)
class LangevinParams:
    """Laser-cooling Langevin parameters and the trajectory's noise identity.

    gamma holds (gamma_x, gamma_y, gamma_z)/m in rad/s; bath_temperature_k
    may be a scalar or per-axis triple in kelvin.  The noise amplitude is
    tied to gamma and T by the fluctuation-dissipation relation inside the
    integrator coefficients, exactly at any dt.
    """

    gamma: tuple[float, float, float] = (
        GAMMA_X_DEFAULT,
        RADIAL_GAMMA_RATIO * GAMMA_X_DEFAULT,
        RADIAL_GAMMA_RATIO * GAMMA_X_DEFAULT,
    )
    bath_temperature_k: float | tuple[float, float, float] = 1.0e-3
    dt: float | None = None  # dimensionless; None -> default_timestep rule
    seed: int = 0
    trajectory_index: int = 0

    def __post_init__(self):
        if any(g < 0 for g in self.gamma):
            raise ConfigurationError("damping rates must be >= 0")

    def temperatures(self):
        t = self.bath_temperature_k
        if np.isscalar(t):
            return (float(t),) * 3
        return tuple(float(v) for v in t)

    def reduced_gamma(self, units: UnitSystem):
        return np.array(self.gamma) / units.omega_ref

    def theta(self, units: UnitSystem):
        """Per-axis k_B T in dimensionless energy units."""
        return np.array([units.temperature_dimless(t) for t in self.temperatures()])

    def ou_coefficients(self, units: UnitSystem, dt):
        """Exact Ornstein-Uhlenbeck update coefficients (c1, c2) per axis."""
        g = self.reduced_gamma(units)
        c1 = np.exp(-g * dt)
        c2 = np.sqrt((1.0 - c1**2) * self.theta(units))
        return c1, c2

    def stream(self):
        """Philox generator for this (seed, trajectory_index)."""
        return Generator(
            Philox(SeedSequence(self.seed, spawn_key=(self.trajectory_index,)))
        )

    def replace_index(self, trajectory_index):
        return LangevinParams(
            gamma=self.gamma,
            bath_temperature_k=self.bath_temperature_k,
            dt=self.dt,
            seed=self.seed,
            trajectory_index=trajectory_index,
        )


def default_timestep(trap: TrapModel, spectrum=None):
    """dt = 2 pi / (STEPS_PER_FASTEST_PERIOD * omega_max), dimensionless.

    omega_max comes from the given ModeSpectrum when available, otherwise
    from omega_z with a margin covering the kink band broadening.
    """
    if spectrum is not None:
        w_max = float(spectrum.frequencies[-1]) / trap.omega[0]
    else:
        w_max = OMEGA_MAX_MARGIN * trap.omega[2] / trap.omega[0]
    return 2.0 * np.pi / (STEPS_PER_FASTEST_PERIOD * w_max)


def maxwell_velocities(n_ions, theta, rng):
    """Thermal velocity draw: per-axis variance k_B T (unit mass)."""
    return rng.standard_normal((n_ions, 3)) * np.sqrt(theta)[None, :]


def advance(state, trap, units, langevin, n_steps, dt, rng=None, ramp_time=0.0,
            noise=None):
    """Integrate n_steps BAOAB steps in place; returns the state.

    noise may be a pre-generated (n_steps, N, 3) standard-normal array (used
    by convergence tests); otherwise it is drawn from rng (zeros when the
    thermostat is off).
    """
    c1, c2 = langevin.ou_coefficients(units, dt)
    if noise is None:
        if rng is not None and np.any(c2 > 0):
            noise = rng.standard_normal((n_steps, state.n_ions, 3))
        else:
            noise = np.zeros((n_steps, state.n_ions, 3))
    force_buf = np.empty_like(state.positions)
    status, t_end = kernels.baoab_chunk(
        state.positions, state.velocities, state.time, dt, trap.reduced(),
        ramp_time, c1, c2, noise, force_buf, COULOMB_GUARD,
    )
    state.time = t_end
    if status == 1:
        raise CoulombSingularityError(f"Coulomb guard hit at t = {t_end:.3f}")
    if status == 2:
        raise NumericalBlowupError(f"state out of bounds at t = {t_end:.3f}")
    return state


def step(state, trap, units, langevin, dt=None, noise=None):
    """Single BAOAB step (convenience wrapper over the chunk kernel)."""
    dt = langevin.dt if dt is None else dt
    if dt is None:
        dt = default_timestep(trap)
    new = state.copy()
    noise_arr = None if noise is None else np.asarray(noise)[None, :, :]
    advance(new, trap, units, langevin, 1, dt, noise=noise_arr)
    return new


@dataclass
class TrajectoryRecord:
    """Sampled observables of one driven trajectory (t >= 0 window)."""

    times: np.ndarray            # dimensionless
    kinetic: np.ndarray          # dimensionless total kinetic energy
    kink_x: np.ndarray           # NaN while the kink is absent
    kink_charge: np.ndarray      # 0 while absent
    confidence: np.ndarray
    zigzag_like: np.ndarray
    final_state: CrystalState
    escape: EscapeEvent
    seed: int
    trajectory_index: int
    dt: float
    stride: float                # dimensionless time between samples
    units: UnitSystem

    @property
    def times_ms(self):
        return self.times * self.units.time_unit * 1e3

    def mean_kinetic(self, t_min=0.0):
        sel = self.times >= t_min
        if not sel.any():
            return float("nan")
        return float(self.kinetic[sel].mean())


def run_trajectory(
    initial: CrystalState,
    trap: TrapModel,
    units: UnitSystem,
    langevin: LangevinParams,
    duration_s,
    thermalize_s=2.0e-3,
    ramp_s=DRIVE_RAMP_S,
    observer_stride_s=10.0e-6,
    escape_dwell_s=ESCAPE_DWELL_MS * 1e-3,
    stop_on_escape=True,
    thermal_velocities=True,
):
    """Thermalize, then drive for duration_s, tracking the kink coordinate.

    The drive (trap.epsilon, trap.omega_d) is active only for t >= 0 with a
    linear amplitude ramp over ramp_s.  Observations are taken every
    observer_stride_s; integration stops early once the kink has been absent
    for escape_dwell_s (if stop_on_escape).
    """
    dt = langevin.dt if langevin.dt is not None else default_timestep(trap)
    rng = langevin.stream()
    state = initial.copy()
    if thermal_velocities:
        state.velocities = maxwell_velocities(
            state.n_ions, langevin.theta(units), rng
        )
    ramp_t = units.time_from_si(ramp_s)

    # thermalization on negative times (drive gated off in the kernel)
    therm_steps = int(round(units.time_from_si(thermalize_s) / dt))
    state.time = -therm_steps * dt
    if therm_steps:
        advance(state, trap, units, langevin, therm_steps, dt, rng=rng,
                ramp_time=ramp_t)
        state.time = 0.0  # cancel roundoff so the drive window starts exactly

    stride_steps = max(1, int(round(units.time_from_si(observer_stride_s) / dt)))
    stride_t = stride_steps * dt
    total_steps = int(round(units.time_from_si(duration_s) / dt))
    n_frames = total_steps // stride_steps
    dwell_frames = max(1, int(np.ceil(units.time_from_si(escape_dwell_s) / stride_t)))
    # a run of dwell_frames + 1 absent frames spans >= dwell_frames * stride
    dwell_t = (dwell_frames - 0.5) * stride_t

    times = np.empty(n_frames + 1)
    kinetic = np.empty(n_frames + 1)
    kink_x = np.empty(n_frames + 1)
    charge = np.zeros(n_frames + 1, dtype=np.int8)
    conf = np.zeros(n_frames + 1)
    zig = np.zeros(n_frames + 1, dtype=bool)
    observations = []

    def record(k):
        obs = observe_kink(state, trap)
        observations.append(obs)
        times[k] = state.time
        kinetic[k] = state.kinetic_energy()
        kink_x[k] = obs.x_coordinate if obs.present else np.nan
        charge[k] = obs.charge if obs.present else 0
        conf[k] = obs.confidence
        zig[k] = obs.zigzag_like
        return obs

    record(0)
    absent_run = 0
    n_rec = 1
    for k in range(1, n_frames + 1):
        advance(state, trap, units, langevin, stride_steps, dt, rng=rng,
                ramp_time=ramp_t)
        obs = record(k)
        n_rec += 1
        absent_run = 0 if obs.present else absent_run + 1
        if stop_on_escape and absent_run >= dwell_frames + 1:
            break

    times = times[:n_rec]
    escape = detect_escape(times, observations, dwell_t)
    return TrajectoryRecord(
        times=times,
        kinetic=kinetic[:n_rec],
        kink_x=kink_x[:n_rec],
        kink_charge=charge[:n_rec],
        confidence=conf[:n_rec],
        zigzag_like=zig[:n_rec],
        final_state=state,
        escape=escape,
        seed=langevin.seed,
        trajectory_index=langevin.trajectory_index,
        dt=dt,
        stride=stride_t,
        units=units,
    )


@dataclass
class SteadyStateResult:
    e_k: float                 # ensemble/time mean kinetic energy, dimensionless
    per_trajectory: list[float] = field(default_factory=list)
    drift: float = 0.0
    n_discarded: int = 0


def steady_state_energy(
    trap: TrapModel,
    units: UnitSystem,
    langevin: LangevinParams,
    epsilon,
    f_d_hz,
    settle_s=5.0e-3,
    average_s=5.0e-3,
    initial: CrystalState | None = None,
    n_ions=34,
    n_trajectories=4,
    max_tries=None,
):
    """Ensemble/time average of E_k in the driven nonequilibrium steady state.

    Averages over n_trajectories that survive (kink intact) through the full
    settle + average window; trajectories that escape earlier are discarded
    and replaced by higher trajectory indices.  Raises NotSettled when E_k
    still trends by more than 5% across the averaging window or too few
    trajectories survive.
    """
    if average_s <= 0 or settle_s < 0:
        raise ConfigurationError("settle/average windows must be positive")
    if initial is None:
        from .equilibria import kink_state

        initial = kink_state(n_ions, trap).configuration
    driven = trap.with_drive(epsilon, f_d_hz)
    duration = settle_s + average_s
    settle_t = units.time_from_si(settle_s)
    max_tries = 4 * n_trajectories if max_tries is None else max_tries

    kept = []
    series = []
    tries = 0
    index = langevin.trajectory_index
    while len(kept) < n_trajectories and tries < max_tries:
        rec = run_trajectory(
            initial,
            driven,
            units,
            langevin.replace_index(index),
            duration_s=duration,
            stop_on_escape=True,
        )
        index += 1
        tries += 1
        if rec.escape.escaped or rec.escape.inconclusive:
            continue
        sel = rec.times >= settle_t
        if sel.sum() < 8:
            continue
        kept.append(float(rec.kinetic[sel].mean()))
        series.append((rec.times[sel], rec.kinetic[sel]))
    if len(kept) < n_trajectories:
        raise NotSettledError(
            f"only {len(kept)}/{n_trajectories} trajectories survived the window"
        )
    # trend test: signed per-trajectory drifts; flag only a significant trend
    drifts = []
    for t, e in series:
        slope = np.polyfit(t, e, 1)[0]
        window = t.max() - t.min()
        drifts.append(slope * window / e.mean())
    drift = float(np.mean(drifts))
    drift_sem = float(np.std(drifts, ddof=1) / np.sqrt(len(drifts)))
    if abs(drift) > 0.05 + 2.0 * drift_sem:
        raise NotSettledError(
            f"E_k trends by {drift:.1%} +- {drift_sem:.1%} over the averaging window"
        )
    return SteadyStateResult(
        e_k=float(np.mean(kept)),
        per_trajectory=kept,
        drift=drift,
        n_discarded=tries - len(kept),
    )


def effective_temperature(e_k, n_ions, units: UnitSystem):
    """T in kelvin from k_B T / 2 = E_k / (3N) (E_k dimensionless)."""
    if e_k < 0:
        raise ConfigurationError("kinetic energy must be >= 0")
    return 2.0 * e_k * units.energy_unit / (3.0 * n_ions * BOLTZMANN)
