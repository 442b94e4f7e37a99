import numpy as np
import pytest

from kinksim.equilibria import (
    KIND_KINK,
    KIND_KINK_BAR,
    KIND_LINEAR,
    KIND_OTHER,
    KIND_ZIGZAG,
    KIND_ZIGZAG_BAR,
    classify,
    formation_energy,
    kink_state,
    relax,
    seed_kink,
    zigzag_state,
)
from kinksim.errors import UnsupportedRegimeError
from kinksim.model import CrystalState, TrapModel

TWO_THIRD = 2.0 ** (1.0 / 3.0)


def mirror_y(state):
    pos = state.positions.copy()
    pos[:, 1] *= -1
    return CrystalState.at_rest(pos)


class TestRelax:
    def test_single_ion_to_origin(self, trap):
        res = relax(CrystalState.at_rest(np.array([[0.4, -0.7, 0.2]])), trap)
        np.testing.assert_allclose(res.positions, 0.0, atol=1e-10)
        assert res.energy == pytest.approx(0.0, abs=1e-12)

    def test_two_ion_spacing(self, trap, rng):
        seed = CrystalState.at_rest(rng.normal(0, 0.5, (2, 3)))
        res = relax(seed, trap)
        d = np.linalg.norm(res.positions[0] - res.positions[1])
        assert d == pytest.approx(TWO_THIRD, abs=1e-8)

    def test_gradient_norm_below_tolerance(self, zigzag34):
        assert zigzag34.gradient_norm < 1e-10

    def test_idempotent(self, trap, zigzag34):
        again = relax(zigzag34.configuration, trap)
        np.testing.assert_allclose(
            again.positions, zigzag34.configuration.positions, atol=1e-10
        )

    def test_zigzag_is_planar(self, zigzag34):
        assert np.max(np.abs(zigzag34.configuration.positions[:, 2])) < 1e-8
        assert zigzag34.label.kind == KIND_ZIGZAG

    def test_minimum_certificate(self, trap, zigzag34, kink34):
        from kinksim.model import hessian

        for eq in (zigzag34, kink34):
            h = hessian(eq.configuration, trap, t=0.0)
            assert np.linalg.eigvalsh(h)[0] > -1e-8


class TestClassify:
    def test_two_ions_linear(self, trap):
        res = relax(CrystalState.at_rest(np.array([[0.4, 0, 0], [-0.5, 0.01, 0]])), trap)
        assert classify(res.configuration, trap).kind == KIND_LINEAR

    def test_zigzag_mirror_flips_label(self, trap, zigzag34):
        mirrored = mirror_y(zigzag34.configuration)
        assert classify(mirrored, trap).kind == KIND_ZIGZAG_BAR

    def test_kink_charge_convention(self, trap, kink34):
        label = kink34.label
        assert label.kind == KIND_KINK
        assert label.topological_charge == 1
        mirrored = classify(mirror_y(kink34.configuration), trap)
        assert mirrored.kind == KIND_KINK_BAR
        assert mirrored.topological_charge == -1
        assert mirrored.kink_position == pytest.approx(label.kink_position, abs=1e-9)

    def test_multiple_sign_changes_reported_other(self, trap, zigzag34):
        pos = zigzag34.configuration.positions.copy()
        order = np.argsort(pos[:, 0])
        # flip two separated interior blocks -> two walls
        pos[order[10:14], 1] *= -1
        label = classify(CrystalState.at_rest(pos), trap)
        assert label.kind == KIND_OTHER
        assert label.n_sign_changes >= 2


class TestKinkConstruction:
    def test_seed_mirror_equality(self, trap, zigzag34):
        plus = seed_kink(34, trap, charge=1, zigzag=zigzag34)
        minus = seed_kink(34, trap, charge=-1, zigzag=zigzag34)
        np.testing.assert_allclose(plus.positions[:, 1], -minus.positions[:, 1])
        np.testing.assert_allclose(plus.positions[:, 0], minus.positions[:, 0])

    def test_centered_kink_near_center(self, trap, zigzag34, kink34):
        spacing = np.mean(np.diff(np.sort(zigzag34.configuration.positions[:, 0])))
        assert abs(kink34.label.kink_position) < 2 * spacing

    def test_edge_seed_relaxes_to_zigzag(self, trap, zigzag34):
        seed = seed_kink(34, trap, charge=1, site_index=33, zigzag=zigzag34)
        res = relax(seed, trap)
        assert res.label.kind in (KIND_ZIGZAG, KIND_ZIGZAG_BAR)

    def test_linear_regime_unsupported(self):
        # 5 ions at these ratios stay linear: no zigzag amplitude to seed
        trap5 = TrapModel.from_frequencies((38.2e3, 232.3e3, 293.0e3))
        with pytest.raises(UnsupportedRegimeError):
            kink_state(5, trap5)

    def test_requested_charge_honoured(self, trap, zigzag34):
        minus = kink_state(34, trap, charge=-1, zigzag=zigzag34)
        assert minus.label.topological_charge == -1


class TestFormationEnergy:
    def test_positive_and_paper_scale(self, trap, units, zigzag34, kink34):
        delta = kink34.energy - zigzag34.energy
        assert delta > 0
        assert 10 < delta / units.kb_td < 100

    def test_charge_degeneracy(self, trap):
        e_plus = formation_energy(trap, 34, charge=1)
        e_minus = formation_energy(trap, 34, charge=-1)
        assert e_plus == pytest.approx(e_minus, abs=1e-9)

    def test_zigzag_degeneracy(self, trap, zigzag34):
        mirrored = zigzag_state(34, trap, mirrored=True)
        assert mirrored.energy == pytest.approx(zigzag34.energy, abs=1e-9)
        assert mirrored.label.kind == KIND_ZIGZAG_BAR
