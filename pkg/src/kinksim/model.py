"""Physical model: unit system, trap + drive parameters, energies and forces.

All computation inside the package is carried out in dimensionless units tied
to the axial trap frequency omega_ref = omega_x:

* length   l0, with l0^3 = q^2 / (4 pi eps0 m omega_ref^2)
* time     1 / omega_ref
* energy   m omega_ref^2 l0^2

In these units the Coulomb pair energy is 1/r and the axial trap curvature is
exactly 1, so every quantity below is a pure number.  SI enters only at the
configuration boundary (UnitSystem) and when writing report files.

The total potential of N ions at positions r_i = (x_i, y_i, z_i) is

    V = sum_i [ (x_i^2 + wy^2 y_i^2 + wz^2 z_i^2) / 2
                + ax x_i^3 + ay y_i^3 + bx x_i^4 + by y_i^4 + cxy x_i^2 y_i ]
        + sum_{i<j} 1 / |r_i - r_j|
        + eps * kap * sin(wd t) * sum_i (y_i^2 - z_i^2) / 2

with wy, wz, wd the frequencies in units of omega_ref and kap the drive gain
in units of omega_ref^2.  Forces and the Hessian are analytic derivatives of
this expression.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from functools import cached_property

import numpy as np

from .errors import ConfigurationError, CoulombSingularityError, NonFiniteError

# CODATA-2018 constants (SI).  The elementary charge and Boltzmann constant
# are exact by definition since the 2019 redefinition.
ELEMENTARY_CHARGE = 1.602176634e-19  # C
ATOMIC_MASS = 1.66053906660e-27      # kg
EPSILON_0 = 8.8541878128e-12         # F/m
BOLTZMANN = 1.380649e-23             # J/K

DOPPLER_TEMPERATURE = 1.0e-3  # K, natural energy scale k_B * T_D of this problem

#: ions closer than this (in l0) abort the computation: far below any physical
#: separation, it catches integrator blowups before they produce Inf forces.
COULOMB_GUARD = 1e-9


@dataclass(frozen=True)
class UnitSystem:
    """Dimensionless unit system of a single ion species in a harmonic trap.

    Parameters
    ----------
    mass_kg : float
        Ion mass in kg.
    charge_c : float
        Ion charge in C (integer multiple of the elementary charge).
    omega_ref : float
        Axial angular trap frequency omega_x in rad/s; sets the time unit.
    """

    mass_kg: float
    charge_c: float
    omega_ref: float

    def __post_init__(self):
        if self.mass_kg <= 0 or self.charge_c <= 0 or self.omega_ref <= 0:
            raise ConfigurationError("mass, charge and omega_ref must be positive")

    @classmethod
    def from_ion(cls, mass_amu=24.0, charge_e=1.0, f_axial_hz=38.2e3):
        """Construct from atomic units and the axial frequency in Hz."""
        return cls(
            mass_kg=mass_amu * ATOMIC_MASS,
            charge_c=charge_e * ELEMENTARY_CHARGE,
            omega_ref=2.0 * np.pi * f_axial_hz,
        )

    @cached_property
    def length_unit(self):
        """l0 in metres: the scale on which trap and Coulomb forces balance."""
        return (
            self.charge_c**2
            / (4.0 * np.pi * EPSILON_0 * self.mass_kg * self.omega_ref**2)
        ) ** (1.0 / 3.0)

    @cached_property
    def time_unit(self):
        return 1.0 / self.omega_ref

    @cached_property
    def energy_unit(self):
        return self.mass_kg * self.omega_ref**2 * self.length_unit**2

    @cached_property
    def velocity_unit(self):
        return self.length_unit * self.omega_ref

    @cached_property
    def kb_td(self):
        """k_B * (1 mK) in dimensionless energy units."""
        return BOLTZMANN * DOPPLER_TEMPERATURE / self.energy_unit

    # SI <-> dimensionless converters
    def length_to_si(self, x):
        return np.asarray(x) * self.length_unit

    def length_from_si(self, x_m):
        return np.asarray(x_m) / self.length_unit

    def time_to_si(self, t):
        return np.asarray(t) * self.time_unit

    def time_from_si(self, t_s):
        return np.asarray(t_s) / self.time_unit

    def energy_to_si(self, e):
        return np.asarray(e) * self.energy_unit

    def energy_from_si(self, e_j):
        return np.asarray(e_j) / self.energy_unit

    def temperature_dimless(self, t_kelvin):
        """k_B T in dimensionless energy units."""
        return BOLTZMANN * t_kelvin / self.energy_unit


@dataclass(frozen=True)
class TrapModel:
    """Static trap, anharmonic corrections and the parametric radial drive.

    omega holds the three angular frequencies (omega_x, omega_y, omega_z) in
    rad/s with omega_x < omega_y < omega_z (planar zigzag regime).  The
    anharmonic coefficients are dimensionless (l0 units).  epsilon is the
    relative drive depth; kappa the drive gain in rad^2/s^2, defaulting to
    (omega_y^2 + omega_z^2) / 2 so that epsilon remains the single
    experimental knob.
    """

    omega: tuple[float, float, float]
    alpha_x: float = 0.0
    alpha_y: float = 0.0
    beta_x: float = 0.0
    beta_y: float = 0.0
    c_xxy: float = 0.0
    epsilon: float = 0.0
    omega_d: float = 0.0
    kappa: float | None = None

    def __post_init__(self):
        wx, wy, wz = self.omega
        if not (wx > 0 and wx < wy < wz):
            raise ConfigurationError(
                f"planar zigzag regime requires 0 < omega_x < omega_y < omega_z, "
                f"got {self.omega}"
            )
        if self.epsilon < 0:
            raise ConfigurationError("epsilon must be >= 0")
        if not np.isfinite(
            [wx, wy, wz, self.alpha_x, self.alpha_y, self.beta_x, self.beta_y,
             self.c_xxy, self.epsilon, self.omega_d]
        ).all():
            raise ConfigurationError("trap parameters must be finite")

    @classmethod
    def from_frequencies(cls, f_hz=(38.2e3, 232.3e3, 293.0e3), **kwargs):
        """Construct from ordinary frequencies in Hz."""
        omega = tuple(2.0 * np.pi * f for f in f_hz)
        return cls(omega=omega, **kwargs)

    @property
    def kappa_value(self):
        """Drive gain in rad^2/s^2 (default (omega_y^2 + omega_z^2)/2)."""
        if self.kappa is not None:
            return self.kappa
        return 0.5 * (self.omega[1] ** 2 + self.omega[2] ** 2)

    @property
    def drive_amplitude(self):
        """eps * kappa in units of omega_x^2: prefactor of sin(wd t)(y^2-z^2)/2."""
        return self.epsilon * self.kappa_value / self.omega[0] ** 2

    def reduced(self):
        """Pack the dimensionless parameters for the numeric kernels.

        Layout: [wy2, wz2, ax, ay, bx, by, cxy, drive_amp, wd] with
        wy2 = (omega_y/omega_x)^2 etc. and wd = omega_d/omega_x.
        """
        wx = self.omega[0]
        return np.array(
            [
                (self.omega[1] / wx) ** 2,
                (self.omega[2] / wx) ** 2,
                self.alpha_x,
                self.alpha_y,
                self.beta_x,
                self.beta_y,
                self.c_xxy,
                self.drive_amplitude,
                self.omega_d / wx,
            ]
        )

    def with_drive(self, epsilon, f_d_hz):
        """Copy of this trap with the drive set (frequency in Hz)."""
        return replace(self, epsilon=epsilon, omega_d=2.0 * np.pi * f_d_hz)

    def units_for(self, mass_amu=24.0, charge_e=1.0):
        """Unit system anchored to this trap's axial frequency."""
        return UnitSystem.from_ion(mass_amu, charge_e, self.omega[0] / (2.0 * np.pi))


@dataclass
class CrystalState:
    """Dynamical state of N ions: dimensionless positions, velocities, time."""

    positions: np.ndarray   # (N, 3) in l0
    velocities: np.ndarray  # (N, 3) in l0 * omega_ref
    time: float = 0.0       # in 1 / omega_ref

    def __post_init__(self):
        self.positions = np.ascontiguousarray(self.positions, dtype=float)
        self.velocities = np.ascontiguousarray(self.velocities, dtype=float)
        if self.positions.ndim != 2 or self.positions.shape[1] != 3:
            raise ConfigurationError("positions must have shape (N, 3)")
        if self.velocities.shape != self.positions.shape:
            raise ConfigurationError("velocities must match positions")
        if self.positions.shape[0] < 1:
            raise ConfigurationError("need at least one ion")

    @classmethod
    def at_rest(cls, positions, time=0.0):
        positions = np.asarray(positions, dtype=float)
        return cls(positions=positions, velocities=np.zeros_like(positions), time=time)

    @property
    def n_ions(self):
        return self.positions.shape[0]

    def copy(self):
        return CrystalState(self.positions.copy(), self.velocities.copy(), self.time)

    def validate(self):
        """Raise if coordinates are non-finite or ions (nearly) coincide."""
        if not np.isfinite(self.positions).all() or not np.isfinite(self.velocities).all():
            raise NonFiniteError("non-finite coordinates in state")
        if self.n_ions > 1:
            dmin = _min_pair_distance(self.positions)
            if dmin <= COULOMB_GUARD:
                raise CoulombSingularityError(
                    f"minimum ion separation {dmin:.3e} l0 below guard {COULOMB_GUARD}"
                )

    def kinetic_energy(self):
        return 0.5 * float(np.sum(self.velocities**2))


def _min_pair_distance(pos):
    diff = pos[:, None, :] - pos[None, :, :]
    d2 = (diff**2).sum(-1)
    n = len(pos)
    d2[np.arange(n), np.arange(n)] = np.inf
    return float(np.sqrt(d2.min()))


def _check_guard(pos):
    if len(pos) > 1:
        dmin = _min_pair_distance(pos)
        if dmin <= COULOMB_GUARD:
            raise CoulombSingularityError(
                f"minimum ion separation {dmin:.3e} l0 below guard"
            )


def potential_energy(state: CrystalState, trap: TrapModel, t=None):
    """Total dimensionless potential energy at time t (defaults to state.time)."""
    t = state.time if t is None else t
    p = trap.reduced()
    e = batch_potential(state.positions[None, :, :], p, t)[0]
    if not np.isfinite(e):
        raise NonFiniteError("potential energy overflow")
    return float(e)


def forces(state: CrystalState, trap: TrapModel, t=None):
    """Analytic forces -grad V, shape (N, 3)."""
    t = state.time if t is None else t
    p = trap.reduced()
    _, g = batch_potential_gradient(state.positions[None, :, :], p, t)
    f = -g[0]
    if not np.isfinite(f).all():
        raise NonFiniteError("force overflow")
    return f


def batch_potential(positions, params, t=0.0):
    """Potential for a batch of configurations, shape (M, N, 3) -> (M,)."""
    pos = np.asarray(positions, dtype=float)
    x, y, z = pos[..., 0], pos[..., 1], pos[..., 2]
    wy2, wz2, ax, ay, bx, by, cxy, amp, wd = params
    e = (
        0.5 * (x**2 + wy2 * y**2 + wz2 * z**2)
        + ax * x**3 + ay * y**3 + bx * x**4 + by * y**4 + cxy * x**2 * y
    ).sum(-1)
    a_t = amp * np.sin(wd * t)
    if a_t != 0.0:
        e += 0.5 * a_t * (y**2 - z**2).sum(-1)
    n = pos.shape[-2]
    if n > 1:
        diff = pos[..., :, None, :] - pos[..., None, :, :]
        d = np.sqrt((diff**2).sum(-1))
        if (d[..., ~np.eye(n, dtype=bool)] <= COULOMB_GUARD).any():
            raise CoulombSingularityError("pair distance below guard in batch")
        iu = np.triu_indices(n, 1)
        e += (1.0 / d[..., iu[0], iu[1]]).sum(-1)
    return e


def batch_potential_gradient(positions, params, t=0.0):
    """Potential and gradient for a batch: (M, N, 3) -> ((M,), (M, N, 3))."""
    pos = np.asarray(positions, dtype=float)
    x, y, z = pos[..., 0], pos[..., 1], pos[..., 2]
    wy2, wz2, ax, ay, bx, by, cxy, amp, wd = params
    e = (
        0.5 * (x**2 + wy2 * y**2 + wz2 * z**2)
        + ax * x**3 + ay * y**3 + bx * x**4 + by * y**4 + cxy * x**2 * y
    ).sum(-1)
    g = np.empty_like(pos)
    g[..., 0] = x + 3 * ax * x**2 + 4 * bx * x**3 + 2 * cxy * x * y
    g[..., 1] = wy2 * y + 3 * ay * y**2 + 4 * by * y**3 + cxy * x**2
    g[..., 2] = wz2 * z
    a_t = amp * np.sin(wd * t)
    if a_t != 0.0:
        e += 0.5 * a_t * (y**2 - z**2).sum(-1)
        g[..., 1] += a_t * y
        g[..., 2] -= a_t * z
    n = pos.shape[-2]
    if n > 1:
        diff = pos[..., :, None, :] - pos[..., None, :, :]
        d = np.sqrt((diff**2).sum(-1))
        offdiag = ~np.eye(n, dtype=bool)
        if (d[..., offdiag] <= COULOMB_GUARD).any():
            raise CoulombSingularityError("pair distance below guard in batch")
        iu = np.triu_indices(n, 1)
        e += (1.0 / d[..., iu[0], iu[1]]).sum(-1)
        d_safe = np.where(offdiag, d, np.inf)
        g -= (diff / d_safe[..., None] ** 3).sum(-2)
    return e, g


def hessian(state: CrystalState, trap: TrapModel, t=None):
    """Analytic 3N x 3N Hessian of V, ion-major ordering (x0, y0, z0, x1, ...)."""
    t = state.time if t is None else t
    pos = state.positions
    n = len(pos)
    _check_guard(pos)
    p = trap.reduced()
    wy2, wz2, ax, ay, bx, by, cxy, amp, wd = p
    a_t = amp * np.sin(wd * t)
    h = np.zeros((3 * n, 3 * n))
    x, y = pos[:, 0], pos[:, 1]
    dxx = 1.0 + 6 * ax * x + 12 * bx * x**2 + 2 * cxy * y
    dyy = wy2 + 6 * ay * y + 12 * by * y**2 + a_t
    dzz = wz2 - a_t
    dxy = 2 * cxy * x
    for i in range(n):
        h[3 * i, 3 * i] = dxx[i]
        h[3 * i + 1, 3 * i + 1] = dyy[i]
        h[3 * i + 2, 3 * i + 2] = dzz
        h[3 * i, 3 * i + 1] = h[3 * i + 1, 3 * i] = dxy[i]
    eye3 = np.eye(3)
    for i in range(n):
        for j in range(i + 1, n):
            r = pos[i] - pos[j]
            d = np.linalg.norm(r)
            blk = 3.0 * np.outer(r, r) / d**5 - eye3 / d**3
            h[3 * i:3 * i + 3, 3 * i:3 * i + 3] += blk
            h[3 * j:3 * j + 3, 3 * j:3 * j + 3] += blk
            h[3 * i:3 * i + 3, 3 * j:3 * j + 3] -= blk
            h[3 * j:3 * j + 3, 3 * i:3 * i + 3] -= blk
    if not np.isfinite(h).all():
        raise NonFiniteError("Hessian overflow")
    return h
