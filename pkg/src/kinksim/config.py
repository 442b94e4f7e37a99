"""Experiment configuration: strict JSON schema, defaults, digests.

The default configuration reproduces the reference setup: 34 Mg-24 ions,
trap frequencies {38.2, 232.3, 293.0} kHz, Doppler bath at 1 mK with axial
cooling gamma_x/m = 2 pi x 0.3 kHz and weak radial cooling.  Unknown keys
anywhere in the tree are rejected.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .dynamics import LangevinParams
from .errors import ConfigurationError
from .model import TrapModel, UnitSystem


def _from_dict(cls, data, where):
    if not isinstance(data, dict):
        raise ConfigurationError(f"{where}: expected an object")
    known = {f.name for f in fields(cls)}
    unknown = set(data) - known
    if unknown:
        raise ConfigurationError(f"{where}: unknown keys {sorted(unknown)}")
    return cls(**data)


@dataclass(frozen=True)
class UnitsConfig:
    mass_amu: float = 24.0
    charge_e: float = 1.0


@dataclass(frozen=True)
class TrapConfig:
    f_x_hz: float = 38.2e3
    f_y_hz: float = 232.3e3
    f_z_hz: float = 293.0e3
    alpha_x: float = 0.0
    alpha_y: float = 0.0
    beta_x: float = 0.0
    beta_y: float = 0.0
    c_xxy: float = 0.0
    kappa: float | None = None  # rad^2/s^2; None -> (wy^2 + wz^2) / 2


@dataclass(frozen=True)
class LangevinConfig:
    gamma_x_hz: float = 300.0     # gamma_x / m = 2 pi * gamma_x_hz
    radial_ratio: float = 0.01    # gamma_{y,z} = radial_ratio * gamma_x
    temperature_mk: float = 1.0


@dataclass(frozen=True)
class DriveConfig:
    epsilon: float = 0.0
    f_d_hz: float | None = None   # None -> auto-fill from the mode report
    duration_ms: float = 10.0
    ramp_us: float = 100.0


@dataclass(frozen=True)
class RunConfig:
    n_ions: int = 34
    seed: int = 1
    n_trajectories: int = 20
    dt_override: float | None = None      # dimensionless timestep
    observer_stride_us: float = 10.0
    escape_dwell_ms: float = 0.5
    thermalize_ms: float = 2.0


@dataclass(frozen=True)
class SweepConfig:
    parameter: str = ""
    values: tuple = ()

    def __post_init__(self):
        if self.parameter and self.parameter not in ("f_d_hz", "epsilon"):
            raise ConfigurationError(
                f"sweep.parameter must be 'f_d_hz' or 'epsilon', got {self.parameter!r}"
            )
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))


@dataclass(frozen=True)
class ExperimentConfig:
    units: UnitsConfig = field(default_factory=UnitsConfig)
    trap: TrapConfig = field(default_factory=TrapConfig)
    langevin: LangevinConfig = field(default_factory=LangevinConfig)
    drive: DriveConfig = field(default_factory=DriveConfig)
    run: RunConfig = field(default_factory=RunConfig)
    sweep: SweepConfig | None = None

    @classmethod
    def from_dict(cls, data):
        if not isinstance(data, dict):
            raise ConfigurationError("config root: expected an object")
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigurationError(f"config root: unknown keys {sorted(unknown)}")
        kwargs = {}
        for name, sub in (
            ("units", UnitsConfig),
            ("trap", TrapConfig),
            ("langevin", LangevinConfig),
            ("drive", DriveConfig),
            ("run", RunConfig),
        ):
            if name in data:
                kwargs[name] = _from_dict(sub, data[name], name)
        if data.get("sweep") is not None:
            kwargs["sweep"] = _from_dict(SweepConfig, data["sweep"], "sweep")
        cfg = cls(**kwargs)
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            try:
                data = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigurationError(f"invalid JSON in {path}: {exc}") from exc
        return cls.from_dict(data)

    def validate(self):
        if self.run.n_ions < 1:
            raise ConfigurationError("run.n_ions must be >= 1")
        if self.run.n_trajectories < 1:
            raise ConfigurationError("run.n_trajectories must be >= 1")
        if not 0 <= self.drive.epsilon < 1:
            raise ConfigurationError("drive.epsilon must be in [0, 1)")
        if self.langevin.temperature_mk <= 0:
            raise ConfigurationError("langevin.temperature_mk must be > 0")
        self.trap_model()  # frequency-ordering checks

    def to_dict(self):
        d = asdict(self)
        if self.sweep is None:
            d.pop("sweep")
        else:
            d["sweep"]["values"] = list(d["sweep"]["values"])
        return d

    def digest(self):
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()

    # ---- builders -------------------------------------------------------

    def trap_model(self, epsilon=None, f_d_hz=None):
        eps = self.drive.epsilon if epsilon is None else epsilon
        f_d = self.drive.f_d_hz if f_d_hz is None else f_d_hz
        return TrapModel.from_frequencies(
            (self.trap.f_x_hz, self.trap.f_y_hz, self.trap.f_z_hz),
            alpha_x=self.trap.alpha_x,
            alpha_y=self.trap.alpha_y,
            beta_x=self.trap.beta_x,
            beta_y=self.trap.beta_y,
            c_xxy=self.trap.c_xxy,
            kappa=self.trap.kappa,
            epsilon=eps,
            omega_d=2.0 * np.pi * (f_d or 0.0),
        )

    def unit_system(self):
        return UnitSystem.from_ion(
            self.units.mass_amu, self.units.charge_e, self.trap.f_x_hz
        )

    def langevin_params(self, trajectory_index=0, seed=None):
        g_x = 2.0 * np.pi * self.langevin.gamma_x_hz
        g_r = self.langevin.radial_ratio * g_x
        return LangevinParams(
            gamma=(g_x, g_r, g_r),
            bath_temperature_k=self.langevin.temperature_mk * 1e-3,
            dt=self.run.dt_override,
            seed=self.run.seed if seed is None else seed,
            trajectory_index=trajectory_index,
        )
