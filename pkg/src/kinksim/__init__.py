"""Simulation and analysis of discrete solitons (kinks) in trapped-ion
Coulomb crystals: equilibria, normal modes, driven-damped Langevin dynamics,
escape statistics and Peierls-Nabarro landscapes."""

__version__ = "0.1.0"

from .model import CrystalState, TrapModel, UnitSystem  # noqa: F401
