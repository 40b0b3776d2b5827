import numpy as np
import pytest
from hypothesis import given, strategies as st

from ldechain.cavity import (
    CavityParams,
    dressed_states,
    eps_2minus,
    geometry_to_couplings,
    mixing_angle,
    polariton_block,
    polariton_energy,
    polariton_level,
    resonance_frequency,
    validity_check,
)

positive = st.floats(0.01, 10.0)
detuning = st.floats(-10.0, 10.0)


def params(g, delta, omega=None):
    omega = resonance_frequency(g, delta) if omega is None else omega
    return CavityParams(omega, omega + delta, g)


class TestPolaritons:
    def test_resonant_examples(self):
        p = CavityParams(1.0, 1.0, 1.0)
        assert polariton_energy(p, 1, "-") == pytest.approx(0.0, abs=1e-15)
        assert polariton_energy(p, 2, "-") == pytest.approx(2 - np.sqrt(2), abs=1e-15)
        assert polariton_energy(p, 0) == 0.0

    def test_branch_errors(self):
        p = CavityParams(1.0, 1.0, 1.0)
        with pytest.raises(ValueError):
            polariton_energy(p, 0, "+")
        with pytest.raises(ValueError):
            polariton_energy(p, 1)
        with pytest.raises(ValueError):
            polariton_energy(p, -1)

    def test_g_must_be_positive(self):
        with pytest.raises(ValueError):
            CavityParams(1.0, 1.0, 0.0)

    @given(g=positive, delta=detuning, omega=positive, n=st.integers(1, 20))
    def test_splitting_identity(self, g, delta, omega, n):
        p = params(g, delta, omega)
        split = polariton_energy(p, n, "+") - polariton_energy(p, n, "-")
        assert split == pytest.approx(2 * np.sqrt(n * g**2 + delta**2), abs=1e-12 * max(1, split))
        assert polariton_energy(p, n, "+") >= polariton_energy(p, n, "-")

    def test_mixing_angle_limits(self):
        assert mixing_angle(params(1.0, 1e9), 1) == pytest.approx(0.0, abs=1e-9)
        assert abs(mixing_angle(params(1.0, 0.0), 1)) == pytest.approx(np.pi / 4)
        plus, minus = dressed_states(params(1.0, 0.0), 1)
        assert plus[0] ** 2 == pytest.approx(0.5) and minus[0] ** 2 == pytest.approx(0.5)
        with pytest.raises(ValueError):
            mixing_angle(params(1.0, 0.0), 0)

    @given(g=positive, delta=detuning, omega=positive, n=st.integers(1, 20))
    def test_dressed_states_diagonalize_block(self, g, delta, omega, n):
        p = params(g, delta, omega)
        plus, minus = dressed_states(p, n)
        basis = np.column_stack([plus, minus])
        np.testing.assert_allclose(basis.T @ basis, np.eye(2), atol=1e-12)
        h = polariton_block(p, n)
        scale = max(1.0, np.abs(h).max())
        assert np.abs(h @ plus - polariton_energy(p, n, "+") * plus).max() <= 1e-12 * scale
        assert np.abs(h @ minus - polariton_energy(p, n, "-") * minus).max() <= 1e-12 * scale

    def test_level_record(self):
        lvl = polariton_level(params(1.0, 0.5), 1, "-")
        assert lvl.n == 1 and lvl.branch == "-" and lvl.mixing_angle is not None
        assert polariton_level(params(1.0, 0.5), 0).energy == 0.0


class TestResonance:
    def test_examples(self):
        assert resonance_frequency(1.0, 0.0) == 1.0
        assert resonance_frequency(3.0, 4.0) == 5.0

    def test_round_trip(self, rng):
        for g, delta in zip(rng.uniform(0.01, 5, 100), rng.uniform(-5, 5, 100)):
            p = CavityParams.at_resonance(g, delta)
            assert polariton_energy(p, 1, "-") == pytest.approx(0.0, abs=1e-12)

    @given(g=positive, delta=detuning)
    def test_two_fold_ground_degeneracy(self, g, delta):
        p = CavityParams.at_resonance(g, delta)
        assert abs(polariton_energy(p, 1, "-")) <= 1e-12 * max(1, p.omega)
        assert eps_2minus(p) > 0


class TestValidity:
    def test_passing_example(self):
        r = validity_check(CavityParams.at_resonance(1.0, 0.0), [0.005, 0.01], 0.001)
        assert r.eps2minus == pytest.approx(0.5858, abs=1e-4)
        assert r.coupling_ratio == pytest.approx(0.0171, abs=1e-4)
        assert r.passed

    def test_eps2minus_formula(self, rng):
        for g, delta in zip(rng.uniform(0.1, 3, 20), rng.uniform(-3, 3, 20)):
            p = CavityParams.at_resonance(g, delta)
            expected = 2 * np.hypot(g, delta) - np.sqrt(2 * g**2 + delta**2)
            assert eps_2minus(p) == pytest.approx(expected, abs=1e-12)

    def test_coupling_at_eps_fails(self):
        p = CavityParams.at_resonance(1.0, 0.0)
        r = validity_check(p, [eps_2minus(p)], 0.0)
        assert not r.coupling_ok and not r.passed

    def test_hot_fails(self):
        r = validity_check(CavityParams.at_resonance(1.0, 0.0), [0.001], 0.2)
        assert r.coupling_ok and not r.temperature_ok and not r.passed

    def test_trivial_limit(self):
        r = validity_check(CavityParams.at_resonance(1.0, 0.0), [0.0], 0.0)
        assert r.coupling_ratio == 0 and r.temperature_ratio == 0 and r.passed

    def test_threshold_override(self):
        r = validity_check(CavityParams.at_resonance(1.0, 0.0), [0.01], 0.0, threshold=0.01)
        assert not r.passed

    def test_requires_resonance(self):
        with pytest.raises(ValueError):
            validity_check(CavityParams(2.0, 2.0, 1.0), [0.01], 0.0)


class TestGeometry:
    def test_no_displacement_is_uniform(self):
        geo = geometry_to_couplings(8, 1.0, 0.0, 0.3)
        np.testing.assert_allclose(geo.profile.array, np.ones(7))

    def test_ln2_displacement(self):
        xi = 0.25
        geo = geometry_to_couplings(10, 1.0, xi * np.log(2), xi)
        assert geo.profile.lam == pytest.approx(0.5) and geo.profile.mu == pytest.approx(2.0)
        assert geo.profile.lam * geo.profile.mu == pytest.approx(1.0)
        assert geo.symmetric

    def test_monotone_in_displacement(self):
        shifts = np.linspace(0, 0.9, 10)
        lams = [geometry_to_couplings(8, 1.0, d, 0.3).profile.lam for d in shifts]
        mus = [geometry_to_couplings(8, 1.0, d, 0.3).profile.mu for d in shifts]
        assert np.all(np.diff(lams) < 0) and np.all(np.diff(mus) > 0)

    def test_independent_variant(self):
        xi = 0.2
        d_near = xi * np.log(4.0)
        geo = geometry_to_couplings(12, 1.0, d_near, xi, end_displacement=xi * np.log(2.0))
        assert geo.profile.mu == pytest.approx(4.0)
        assert geo.profile.lam == pytest.approx(0.125)
        assert not geo.symmetric

    def test_bulk_coupling_scales(self):
        geo = geometry_to_couplings(6, 1.0, 0.2, 0.3, bulk_coupling=0.01)
        np.testing.assert_allclose(geo.couplings, 0.01 * geo.profile.array)

    @pytest.mark.parametrize("d", [-0.1, 1.0, 1.5])
    def test_invalid_geometry(self, d):
        with pytest.raises(ValueError):
            geometry_to_couplings(8, 1.0, d, 0.3)

    def test_invalid_decay_length(self):
        with pytest.raises(ValueError):
            geometry_to_couplings(8, 1.0, 0.1, 0.0)
