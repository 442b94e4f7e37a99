"""Normal-mode analysis: spectra, localized kink modes, drive couplings.

Mode frequencies are sqrt of the Hessian eigenvalues (unit ion mass in the
dimensionless system) scaled back to rad/s.  Kink modes are recognised by
two filters: frequency outside the zigzag band (with a small relative guard)
and a small inverse participation ratio.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .equilibria import EquilibriumResult, trap_center_y
from .errors import UnstableEquilibriumError
from .model import CrystalState, TrapModel, forces, hessian

#: modes whose weight is spread over at most this many ions count as localized
IPR_LOCALIZED_MAX = 12.0

#: relative guard around the zigzag band for the gap filter
BAND_GUARD = 0.005

#: frequencies closer than this (relative) form one degenerate block
DEGENERACY_RTOL = 1e-8


@dataclass
class ModeSpectrum:
    """Eigenmodes of a stable equilibrium.

    frequencies are in rad/s, ascending.  eigenvectors[:, k] is the unit
    eigenvector of mode k in ion-major coordinate order (x0, y0, z0, x1, ...).
    ipr[k] is the inverse participation ratio in ions: 1 / sum_i w_i^2 with
    w_i the per-ion weight of the mode.
    """

    frequencies: np.ndarray
    eigenvectors: np.ndarray
    ipr: np.ndarray
    omega_ref: float

    @property
    def frequencies_hz(self):
        return self.frequencies / (2.0 * np.pi)

    @property
    def n_modes(self):
        return len(self.frequencies)

    def mode_vector(self, k):
        """Eigenvector of mode k reshaped to (N, 3)."""
        return self.eigenvectors[:, k].reshape(-1, 3)

    def degenerate_blocks(self):
        """Indices grouped into blocks of (numerically) equal frequency."""
        blocks = [[0]]
        f = self.frequencies
        for k in range(1, len(f)):
            ref = max(abs(f[blocks[-1][0]]), abs(f[k]), 1e-300)
            if abs(f[k] - f[blocks[-1][0]]) <= DEGENERACY_RTOL * ref:
                blocks[-1].append(k)
            else:
                blocks.append([k])
        return blocks


def ion_weights(vec):
    """Per-ion weight of a (N, 3) eigenvector; sums to 1 for a unit vector."""
    return (vec**2).sum(axis=1)


def normal_modes(equilibrium, trap: TrapModel):
    """Eigendecomposition of the static Hessian at a relaxed configuration.

    equilibrium may be a CrystalState or an EquilibriumResult.  Raises
    UnstableEquilibrium if an eigenvalue is below -1e-8 (omega_x^2 units);
    tiny negative round-off values are clipped to zero.
    """
    state = (
        equilibrium.configuration
        if isinstance(equilibrium, EquilibriumResult)
        else equilibrium
    )
    static_trap = replace(trap, epsilon=0.0)
    g = forces(state, static_trap, t=0.0)
    gnorm = np.max(np.abs(g))
    if gnorm > 1e-8:
        raise UnstableEquilibriumError(
            f"not an equilibrium: |grad|_inf = {gnorm:.3e} (need < 1e-8)"
        )
    h = hessian(state, static_trap, t=0.0)
    evals, evecs = np.linalg.eigh(h)
    if evals[0] < -1e-8:
        raise UnstableEquilibriumError(f"negative eigenvalue {evals[0]:.3e}")
    evals = np.clip(evals, 0.0, None)
    freqs = np.sqrt(evals) * trap.omega[0]
    n_modes = len(evals)
    ipr = np.empty(n_modes)
    for k in range(n_modes):
        w = ion_weights(evecs[:, k].reshape(-1, 3))
        ipr[k] = 1.0 / float((w**2).sum())
    return ModeSpectrum(
        frequencies=freqs, eigenvectors=evecs, ipr=ipr, omega_ref=trap.omega[0]
    )


def drive_coupling(mode_vec, equilibrium: CrystalState, trap: TrapModel):
    """|e . f| with f the unit-amplitude drive force pattern at equilibrium.

    The drive potential eps*kap*sin(wd t)(y^2 - z^2)/2 exerts, per unit
    eps*sin, the force f_i = (0, -kap y_i, +kap z_i); modes with a large
    projection on f are driven directly and dominate the spectroscopy signal.
    """
    vec = np.asarray(mode_vec)
    if vec.ndim == 1:
        vec = vec.reshape(-1, 3)
    kap = trap.kappa_value / trap.omega[0] ** 2
    pos = equilibrium.positions
    return float(
        kap * abs(np.sum(-vec[:, 1] * pos[:, 1] + vec[:, 2] * pos[:, 2]))
    )


@dataclass
class KinkModeReport:
    """Localized/gapped kink modes and their drive couplings.

    gapped_mode_indices: modes of the kink spectrum outside the zigzag band.
    kink_mode_indices: the subset that is also localized (IPR filter); these
    are the internal kink modes.  inband_mode_indices: modes inside the band
    whose weight is nevertheless concentrated on the kink core (the weaker
    spectroscopy lines live here).  spectroscopy_targets ranks the kink
    modes by drive coupling; the first entry is the expected strongest
    escape resonance.  shear_mode_index marks the low kink mode with
    dominant axial weight (the chain-shear mode); its chain anticorrelation
    is reported alongside.
    """

    gapped_mode_indices: list[int]
    kink_mode_indices: list[int]
    inband_mode_indices: list[int]
    spectroscopy_targets: list[int]
    localization_core: dict[int, list[int]]
    coupling: dict[int, float]
    lowest_kink_mode: float | None
    highest_kink_mode: float | None
    shear_mode_index: int | None = None
    shear_chain_correlation: float | None = None
    band: tuple[float, float] = (0.0, 0.0)
    notes: list[str] = field(default_factory=list)

    @property
    def empty(self):
        return not self.kink_mode_indices


def localization_core(vec, weight_fraction=0.9):
    """Smallest set of ions carrying at least weight_fraction of the mode."""
    w = ion_weights(vec)
    order = np.argsort(w)[::-1]
    cum = np.cumsum(w[order])
    n_core = int(np.searchsorted(cum, weight_fraction) + 1)
    return sorted(int(i) for i in order[:n_core])


def chain_axial_correlation(vec, config: CrystalState, trap: TrapModel, core=None):
    """Pearson correlation of axial components across the two zigzag chains.

    Each core ion in the upper chain is paired with the axially nearest core
    ion of the lower chain; out-of-phase sliding of the chains gives -1.
    Returns nan when fewer than two pairs exist.
    """
    if core is None:
        core = localization_core(vec)
    pos = config.positions
    y_c = trap_center_y(trap)
    upper = [i for i in core if pos[i, 1] > y_c]
    lower = [i for i in core if pos[i, 1] <= y_c]
    pairs = []
    for i in upper:
        if not lower:
            break
        j = min(lower, key=lambda j: abs(pos[j, 0] - pos[i, 0]))
        pairs.append((vec[i, 0], vec[j, 0]))
    if len(pairs) < 2:
        return float("nan")
    a, b = np.array(pairs).T
    if np.std(a) == 0 or np.std(b) == 0:
        return float("nan")
    return float(np.corrcoef(a, b)[0, 1])


def identify_kink_modes(
    kink_spectrum: ModeSpectrum,
    zigzag_spectrum: ModeSpectrum,
    kink_config: CrystalState,
    trap: TrapModel,
    ipr_max=IPR_LOCALIZED_MAX,
):
    """Find the gapped, localized internal modes of a kink configuration.

    Both spectra must come from the same ion number and trap.  Couplings are
    reported per degenerate block (summed in quadrature) so that the result
    is stable under eigenvector rotations inside a block.
    """
    if kink_spectrum.n_modes != zigzag_spectrum.n_modes:
        raise ValueError("spectra have different sizes")
    band = (
        float(zigzag_spectrum.frequencies[0]),
        float(zigzag_spectrum.frequencies[-1]),
    )
    lo = band[0] * (1.0 - BAND_GUARD)
    hi = band[1] * (1.0 + BAND_GUARD)
    f = kink_spectrum.frequencies
    gapped = [k for k in range(len(f)) if f[k] < lo or f[k] > hi]
    notes = []
    kink_modes = [k for k in gapped if kink_spectrum.ipr[k] <= ipr_max]
    if not kink_modes:
        notes.append("no mode passed both the gap and the localization filter")

    blocks = kink_spectrum.degenerate_blocks()
    block_of = {}
    for blk in blocks:
        for k in blk:
            block_of[k] = tuple(blk)

    # in-band modes concentrated on the kink core carry the weaker
    # spectroscopy lines (their zigzag counterparts are extended)
    kink_obs = observe_kink_position(kink_config, trap)
    spacing = _mean_spacing(kink_config)
    inband = []
    if kink_obs is not None:
        for k in range(len(f)):
            if k in gapped or kink_spectrum.ipr[k] > ipr_max + 5:
                continue
            vec = kink_spectrum.mode_vector(k)
            core = localization_core(vec)
            w = ion_weights(vec)
            centroid = float(
                np.sum(w[core] * kink_config.positions[core, 0]) / np.sum(w[core])
            )
            if abs(centroid - kink_obs) <= 2.0 * spacing:
                inband.append(k)

    cores = {}
    coupling = {}
    for k in gapped + inband:
        vec = kink_spectrum.mode_vector(k)
        cores[k] = localization_core(vec)
        blk = block_of[k]
        c2 = sum(
            drive_coupling(kink_spectrum.mode_vector(j), kink_config, trap) ** 2
            for j in blk
        )
        coupling[k] = float(np.sqrt(c2))

    targets = sorted(
        (k for k in set(kink_modes) | set(inband)),
        key=lambda k: -coupling.get(k, 0.0),
    )

    lowest = min((float(f[k]) for k in kink_modes), default=None)
    highest = max((float(f[k]) for k in kink_modes), default=None)

    shear_idx = None
    shear_corr = None
    below = [k for k in kink_modes if f[k] < lo]
    if below:
        def axial_weight(k):
            vec = kink_spectrum.mode_vector(k)
            return float((vec[:, 0] ** 2).sum())

        shear_idx = max(below, key=axial_weight)
        shear_corr = chain_axial_correlation(
            kink_spectrum.mode_vector(shear_idx), kink_config, trap, cores[shear_idx]
        )

    return KinkModeReport(
        gapped_mode_indices=gapped,
        kink_mode_indices=kink_modes,
        inband_mode_indices=inband,
        spectroscopy_targets=targets,
        localization_core=cores,
        coupling=coupling,
        lowest_kink_mode=lowest,
        highest_kink_mode=highest,
        shear_mode_index=shear_idx,
        shear_chain_correlation=shear_corr,
        band=band,
        notes=notes,
    )


def observe_kink_position(config: CrystalState, trap: TrapModel):
    """Kink coordinate of a configuration, or None (avoids a cyclic import)."""
    from .kink import observe_kink

    obs = observe_kink(config, trap)
    return obs.x_coordinate if obs.present else None


def _mean_spacing(config: CrystalState):
    xs = np.sort(config.positions[:, 0])
    return float(np.mean(np.diff(xs))) if len(xs) > 1 else 1.0
