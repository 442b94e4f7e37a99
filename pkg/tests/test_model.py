import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kinksim.errors import ConfigurationError, CoulombSingularityError
from kinksim.model import (
    CrystalState,
    TrapModel,
    UnitSystem,
    forces,
    hessian,
    potential_energy,
)

TWO_THIRD = 2.0 ** (1.0 / 3.0)


def state_of(*rows):
    return CrystalState.at_rest(np.array(rows, dtype=float))


def random_state(rng, n, spread=2.0, min_dist=0.3):
    while True:
        pos = rng.uniform(-spread, spread, (n, 3))
        diff = pos[:, None] - pos[None, :]
        d = np.sqrt((diff**2).sum(-1)) + np.eye(n) * 1e9
        if d.min() > min_dist:
            return CrystalState.at_rest(pos)


class TestUnitSystem:
    def test_roundtrip_si(self):
        u = UnitSystem.from_ion(24.0, 1.0, 38.2e3)
        for x in (1.0, 3.7e-5, 123.456):
            assert u.length_from_si(u.length_to_si(x)) == pytest.approx(x, rel=1e-12)
            assert u.time_from_si(u.time_to_si(x)) == pytest.approx(x, rel=1e-12)
            assert u.energy_from_si(u.energy_to_si(x)) == pytest.approx(x, rel=1e-12)

    def test_scales_positive(self):
        u = UnitSystem.from_ion()
        assert u.length_unit > 0 and u.time_unit > 0 and u.energy_unit > 0

    def test_reference_values(self):
        # hand-computed for Mg-24 at 38.2 kHz axial
        u = UnitSystem.from_ion(24.0, 1.0, 38.2e3)
        assert u.length_unit == pytest.approx(46.49e-6, rel=1e-3)
        assert u.kb_td == pytest.approx(2.7822e-3, rel=1e-3)

    def test_rejects_nonpositive(self):
        with pytest.raises(ConfigurationError):
            UnitSystem(mass_kg=0.0, charge_c=1.6e-19, omega_ref=1e5)


class TestTrapModel:
    def test_frequency_ordering_enforced(self):
        with pytest.raises(ConfigurationError):
            TrapModel.from_frequencies((100e3, 50e3, 200e3))

    def test_negative_epsilon_rejected(self):
        with pytest.raises(ConfigurationError):
            TrapModel.from_frequencies(epsilon=-0.1)

    def test_default_kappa(self, trap):
        wy, wz = trap.omega[1], trap.omega[2]
        assert trap.kappa_value == pytest.approx(0.5 * (wy**2 + wz**2))


class TestPotential:
    def test_single_ion_origin(self, trap):
        st1 = state_of([0.0, 0.0, 0.0])
        assert potential_energy(st1, trap, t=0.3) == 0.0

    def test_two_ion_closed_form(self, trap):
        for d in (0.8, 1.0, TWO_THIRD, 2.5):
            st2 = state_of([-d / 2, 0, 0], [d / 2, 0, 0])
            assert potential_energy(st2, trap) == pytest.approx(
                d**2 / 4 + 1 / d, rel=1e-12
            )
        # minimum of the two-ion potential at d = 2^(1/3)
        ds = np.linspace(1.1, 1.45, 201)
        vals = [ds[i] ** 2 / 4 + 1 / ds[i] for i in range(len(ds))]
        assert ds[np.argmin(vals)] == pytest.approx(TWO_THIRD, abs=2e-3)

    def test_drive_phase_difference(self, trap):
        driven = trap.with_drive(epsilon=1e-3, f_d_hz=300e3)
        st2 = state_of([0.1, 0.3, -0.2], [0.9, -0.4, 0.25])
        t_quarter = 0.5 * np.pi / (driven.omega_d / driven.omega[0])
        v0 = potential_energy(st2, driven, t=0.0)
        v1 = potential_energy(st2, driven, t=t_quarter)
        y2 = (st2.positions[:, 1] ** 2).sum()
        z2 = (st2.positions[:, 2] ** 2).sum()
        expected = driven.drive_amplitude * 0.5 * (y2 - z2)
        assert v1 - v0 == pytest.approx(expected, rel=1e-12)

    def test_drive_vanishes_for_zero_epsilon(self, trap):
        st2 = state_of([0.1, 0.3, -0.2], [0.9, -0.4, 0.25])
        base = TrapModel.from_frequencies(epsilon=0.0, omega_d=2e5)
        assert potential_energy(st2, base, t=1.234) == potential_energy(
            st2, base, t=0.0
        )

    def test_coulomb_guard(self, trap):
        st2 = state_of([0, 0, 0], [1e-10, 0, 0])
        with pytest.raises(CoulombSingularityError):
            potential_energy(st2, trap)


class TestForces:
    def test_single_ion_origin_zero(self, trap):
        assert np.all(forces(state_of([0, 0, 0]), trap) == 0.0)

    def test_newton_third_law(self, trap):
        st2 = state_of([0.2, 0.1, -0.3], [1.0, -0.2, 0.4])
        f = forces(st2, trap)
        # subtract the single-particle trap force to isolate the pair force
        f_iso = np.array([
            forces(state_of(st2.positions[i]), trap)[0] for i in range(2)
        ])
        coulomb = f - f_iso
        np.testing.assert_allclose(coulomb[0], -coulomb[1], rtol=1e-12, atol=1e-14)

    @pytest.mark.parametrize("n_ions", [2, 5])
    def test_finite_difference_oracle(self, rng, n_ions):
        trap = TrapModel.from_frequencies(
            alpha_x=3e-3, alpha_y=-2e-3, beta_x=1e-3, beta_y=2e-3, c_xxy=1.5e-3,
            epsilon=2e-3, omega_d=2 * np.pi * 300e3,
        )
        t = 0.37
        for _ in range(10):
            state = random_state(rng, n_ions)
            f = forces(state, trap, t=t)
            h = 1e-6
            fd = np.empty_like(f)
            for i in range(n_ions):
                for k in range(3):
                    sp = state.copy()
                    sm = state.copy()
                    sp.positions[i, k] += h
                    sm.positions[i, k] -= h
                    fd[i, k] = -(
                        potential_energy(sp, trap, t) - potential_energy(sm, trap, t)
                    ) / (2 * h)
            scale = max(np.max(np.abs(f)), 1.0)
            assert np.max(np.abs(f - fd)) / scale < 1e-6


class TestHessian:
    def test_single_ion_diagonal(self, trap):
        h = hessian(state_of([0, 0, 0]), trap)
        p = trap.reduced()
        np.testing.assert_allclose(h, np.diag([1.0, p[0], p[1]]), atol=1e-14)

    def test_two_ion_axial_eigenvalues(self, trap):
        d = TWO_THIRD
        st2 = state_of([-d / 2, 0, 0], [d / 2, 0, 0])
        h = hessian(st2, trap)
        axial = h[np.ix_([0, 3], [0, 3])]
        evals = np.sort(np.linalg.eigvalsh(axial))
        np.testing.assert_allclose(evals, [1.0, 3.0], rtol=1e-12)

    def test_symmetry_and_force_consistency(self, rng):
        trap = TrapModel.from_frequencies(alpha_x=1e-3, beta_y=5e-4, c_xxy=2e-3)
        state = random_state(rng, 4)
        h = hessian(state, trap)
        assert np.max(np.abs(h - h.T)) < 1e-12
        step = 1e-6
        n = state.n_ions
        for col in range(3 * n):
            i, k = divmod(col, 3)
            sp = state.copy()
            sm = state.copy()
            sp.positions[i, k] += step
            sm.positions[i, k] -= step
            fd = -(forces(sp, trap) - forces(sm, trap)).ravel() / (2 * step)
            np.testing.assert_allclose(h[:, col], fd, rtol=2e-6, atol=1e-6)


@settings(max_examples=20, deadline=None)
@given(
    mass=st.floats(10.0, 200.0),
    f_x=st.floats(10e3, 100e3),
)
def test_dimensionless_scale_invariance(mass, f_x):
    """Fixed frequency ratios give identical dimensionless two-ion spacing."""
    from kinksim.equilibria import relax

    trap = TrapModel.from_frequencies((f_x, 6.0812 * f_x, 7.6702 * f_x))
    seed = CrystalState.at_rest(np.array([[-0.7, 0.02, 0.0], [0.6, 0.0, 0.01]]))
    result = relax(seed, trap)
    d = np.linalg.norm(result.positions[0] - result.positions[1])
    assert d == pytest.approx(TWO_THIRD, rel=1e-10)
