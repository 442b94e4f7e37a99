import numpy as np
import pytest

from kinksim.equilibria import relax, zigzag_state
from kinksim.errors import UnstableEquilibriumError
from kinksim.model import CrystalState, TrapModel, hessian
from kinksim.modes import (
    ModeSpectrum,
    chain_axial_correlation,
    drive_coupling,
    identify_kink_modes,
    localization_core,
    normal_modes,
)

TWO_PI = 2.0 * np.pi


def relaxed(trap, rows):
    return relax(CrystalState.at_rest(np.array(rows, dtype=float)), trap)


class TestNormalModes:
    def test_single_ion_trap_frequencies(self, trap):
        res = relaxed(trap, [[0.1, 0.0, -0.05]])
        spec = normal_modes(res, trap)
        np.testing.assert_allclose(
            np.sort(spec.frequencies), np.sort(trap.omega), rtol=1e-12
        )

    def test_two_ion_analytic_set(self, trap):
        res = relaxed(trap, [[-0.6, 0.01, 0.0], [0.65, 0.0, 0.01]])
        spec = normal_modes(res, trap)
        wx, wy, wz = trap.omega
        expected = np.sort([
            wx, np.sqrt(3) * wx, wy, np.sqrt(wy**2 - wx**2),
            wz, np.sqrt(wz**2 - wx**2),
        ])
        np.testing.assert_allclose(np.sort(spec.frequencies), expected, rtol=1e-8)

    def test_three_ion_axial_modes(self, trap):
        res = relaxed(trap, [[-1.2, 0.0, 0.01], [0.0, 0.01, 0.0], [1.15, 0.0, 0.0]])
        spec = normal_modes(res, trap)
        wx = trap.omega[0]
        targets = np.array([1.0, np.sqrt(3.0), np.sqrt(29.0 / 5.0)]) * wx
        for t in targets:
            assert np.min(np.abs(spec.frequencies - t)) / t < 1e-6

    def test_orthonormality(self, zigzag_spectrum):
        v = zigzag_spectrum.eigenvectors
        assert np.max(np.abs(v.T @ v - np.eye(v.shape[0]))) < 1e-9

    def test_trace_sum_rule(self, trap, zigzag34, zigzag_spectrum):
        h = hessian(zigzag34.configuration, trap, t=0.0)
        lhs = np.sum((zigzag_spectrum.frequencies / trap.omega[0]) ** 2)
        assert lhs == pytest.approx(np.trace(h), rel=1e-9)

    def test_lowest_zigzag_mode_is_axial_com(self, trap, zigzag_spectrum):
        assert zigzag_spectrum.frequencies[0] == pytest.approx(
            trap.omega[0], rel=1e-9
        )

    def test_mirror_spectrum_identical(self, trap, kink34, kink_spectrum):
        pos = kink34.configuration.positions.copy()
        pos[:, 1] *= -1
        mirrored = normal_modes(relax(CrystalState.at_rest(pos), trap), trap)
        np.testing.assert_allclose(
            mirrored.frequencies, kink_spectrum.frequencies, rtol=1e-12, atol=1e-9
        )

    def test_rejects_non_equilibrium(self, trap):
        state = CrystalState.at_rest(np.array([[0.5, 0.2, 0.0], [1.5, -0.2, 0.0]]))
        with pytest.raises(UnstableEquilibriumError):
            normal_modes(state, trap)


class TestDriveCoupling:
    def test_pure_axial_mode_zero(self, trap, zigzag34):
        n = zigzag34.configuration.n_ions
        vec = np.zeros((n, 3))
        vec[:, 0] = 1.0 / np.sqrt(n)
        assert drive_coupling(vec, zigzag34.configuration, trap) == 0.0

    def test_planar_reduction(self, trap, kink34, kink_spectrum):
        # z = 0 everywhere: coupling reduces to kappa * |sum e_y y_eq|
        k = 99
        vec = kink_spectrum.mode_vector(k)
        kap = trap.kappa_value / trap.omega[0] ** 2
        manual = kap * abs(np.sum(vec[:, 1] * kink34.configuration.positions[:, 1]))
        assert drive_coupling(vec, kink34.configuration, trap) == pytest.approx(manual)

    def test_coupling_ranking_of_targets(self, kink_report, kink_spectrum):
        t1, t2 = kink_report.spectroscopy_targets[:2]
        assert kink_report.coupling[t1] > kink_report.coupling[t2]
        # the strongest line sits above the zigzag band, near 330 kHz here
        assert kink_spectrum.frequencies_hz[t1] > kink_report.band[1] / TWO_PI

    def test_degenerate_block_coupling_rotation_invariant(self, trap, zigzag34):
        # rotate a synthetic degenerate pair; the quadrature sum is invariant
        n = zigzag34.configuration.n_ions
        rng = np.random.default_rng(5)
        a = rng.normal(size=(n, 3))
        b = rng.normal(size=(n, 3))
        coup2 = (
            drive_coupling(a, zigzag34.configuration, trap) ** 2
            + drive_coupling(b, zigzag34.configuration, trap) ** 2
        )
        theta = 0.7345
        a2 = np.cos(theta) * a + np.sin(theta) * b
        b2 = -np.sin(theta) * a + np.cos(theta) * b
        coup2_rot = (
            drive_coupling(a2, zigzag34.configuration, trap) ** 2
            + drive_coupling(b2, zigzag34.configuration, trap) ** 2
        )
        assert coup2_rot == pytest.approx(coup2, rel=1e-12)


class TestKinkModeReport:
    def test_zigzag_against_itself_empty(self, trap, zigzag34, zigzag_spectrum):
        rep = identify_kink_modes(
            zigzag_spectrum, zigzag_spectrum, zigzag34.configuration, trap
        )
        assert rep.gapped_mode_indices == []

    def test_gapped_modes_outside_band(self, kink_report, kink_spectrum):
        lo, hi = kink_report.band
        for k in kink_report.gapped_mode_indices:
            f = kink_spectrum.frequencies[k]
            assert f < lo * 0.995 or f > hi * 1.005

    def test_gapped_modes_localized(self, kink_report, kink_spectrum):
        for k in kink_report.kink_mode_indices:
            assert kink_spectrum.ipr[k] <= 12.0

    def test_shear_mode_structure(self, kink_report, kink_spectrum):
        assert kink_report.shear_mode_index is not None
        vec = kink_spectrum.mode_vector(kink_report.shear_mode_index)
        axial_weight = float((vec[:, 0] ** 2).sum())
        assert axial_weight > 0.9
        assert kink_report.shear_chain_correlation < -0.9

    def test_localization_core_size(self, kink_report):
        for k in kink_report.kink_mode_indices:
            assert 1 <= len(kink_report.localization_core[k]) <= 14

    def test_secondary_target_is_inband_here(self, kink_report):
        # this trap's second spectroscopy line lives inside the zigzag band
        t2 = kink_report.spectroscopy_targets[1]
        assert t2 in kink_report.inband_mode_indices

    def test_degenerate_blocks_grouping(self):
        freqs = np.array([1.0, 2.0, 2.0 + 1e-12, 3.0])
        spec = ModeSpectrum(
            frequencies=freqs, eigenvectors=np.eye(4), ipr=np.ones(4), omega_ref=1.0
        )
        blocks = spec.degenerate_blocks()
        assert blocks == [[0], [1, 2], [3]]


def test_chain_anticorrelation_of_shear(trap, kink34, kink_spectrum, kink_report):
    k = kink_report.shear_mode_index
    corr = chain_axial_correlation(
        kink_spectrum.mode_vector(k), kink34.configuration, trap
    )
    assert corr == pytest.approx(-1.0, abs=0.1)


def test_localization_core_is_kink_centered(kink_report, kink34):
    pos = kink34.configuration.positions
    for k in kink_report.kink_mode_indices:
        core = kink_report.localization_core[k]
        centroid = np.mean([pos[i, 0] for i in core])
        assert abs(centroid - kink34.label.kink_position) < 1.5
