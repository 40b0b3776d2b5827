import logging

import numpy as np
import pytest

from conftest import dense_gibbs, dense_reduce
from ldechain.chain import correlation_matrix, make_profile, solve
from ldechain.entanglement import (
    InvalidDensityMatrix,
    TwoQubitDensity,
    concurrence,
    end_to_end_rdm,
    fully_entangled_fraction,
    local_magnetization,
    max_fidelity,
    sampled_entangled_fraction,
    string_correlator,
    wootters_concurrence,
    x_state_concurrence,
    zz_correlator,
)

PSI_PLUS = np.array([0, 1, 1, 0]) / np.sqrt(2)
RHO_PSI_PLUS = np.outer(PSI_PLUS, PSI_PLUS)
UPUP = np.diag([1.0, 0, 0, 0])


def G_of(profile, T):
    return correlation_matrix(solve(profile), T)


def dense_pair(profile, T):
    n = profile.n_sites
    return dense_reduce(dense_gibbs(profile.couplings, T), (0, n - 1), n)


def random_x_state(rng):
    d = rng.dirichlet(np.ones(4))
    r23 = np.sqrt(d[1] * d[2]) * rng.uniform(0, 1) * np.exp(2j * np.pi * rng.uniform())
    r14 = np.sqrt(d[0] * d[3]) * rng.uniform(0, 1) * np.exp(2j * np.pi * rng.uniform())
    rho = np.diag(d).astype(complex)
    rho[1, 2], rho[2, 1] = r23, np.conj(r23)
    rho[0, 3], rho[3, 0] = r14, np.conj(r14)
    return rho


class TestCorrelators:
    def test_magnetization_infinite_temperature(self):
        G = G_of(make_profile("lambda_mu", 8, 0.3, 3.0), 1e6)
        assert abs(local_magnetization(G, 0)) <= 1e-6

    def test_two_site_ground_state(self):
        G = G_of(make_profile("uniform", 2), 0.0)
        assert local_magnetization(G, 0) == pytest.approx(0.0, abs=1e-15)
        assert zz_correlator(G, 0, 1) == pytest.approx(-0.25, abs=1e-15)
        assert string_correlator(G) == pytest.approx(0.5, abs=1e-15)

    def test_magnetization_matches_dense_oracle(self):
        p = make_profile("lambda_mu", 10, 0.5, 4.0)
        rho = dense_pair(p, 0.01)
        expected = 0.5 * (rho[0, 0] + rho[1, 1] - rho[2, 2] - rho[3, 3]).real
        assert local_magnetization(G_of(p, 0.01), 0) == pytest.approx(expected, abs=1e-8)

    def test_zz_uncorrelated_limit(self):
        g = np.diag([0.3, 0.8])
        assert zz_correlator(g, 0, 1) == pytest.approx((0.3 - 0.5) * (0.8 - 0.5))

    def test_zz_matches_dense_oracle(self, rng):
        p = make_profile("custom", 8, custom_couplings=rng.uniform(0.1, 2.0, 7))
        rho = dense_pair(p, 0.2)
        expected = 0.25 * (rho[0, 0] - rho[1, 1] - rho[2, 2] + rho[3, 3]).real
        assert zz_correlator(G_of(p, 0.2), 0, 7) == pytest.approx(expected, abs=1e-8)

    def test_zz_rejects_same_site(self):
        with pytest.raises(ValueError):
            zz_correlator(np.eye(3) / 2, 1, 1)

    def test_index_out_of_range(self):
        with pytest.raises(IndexError):
            local_magnetization(np.eye(3) / 2, 3)

    def test_string_infinite_temperature(self):
        G = G_of(make_profile("lambda_mu", 10, 0.3, 3.0), 1e6)
        assert abs(string_correlator(G)) <= 1e-6

    def test_string_matches_dense_oracle(self):
        p = make_profile("lambda_mu", 10, 0.2, 5.0)
        rho = dense_pair(p, 0.0)
        assert string_correlator(G_of(p, 0.0)) == pytest.approx(rho[2, 1], abs=1e-8)

    def test_string_needs_two_sites(self):
        with pytest.raises(ValueError):
            string_correlator(np.array([[0.5]]))


class TestEndToEndRdm:
    def test_two_site_bell_state(self):
        rho = end_to_end_rdm(G_of(make_profile("uniform", 2), 0.0)).rho
        np.testing.assert_allclose(rho, RHO_PSI_PLUS, atol=1e-14)

    def test_three_site_zero_mode_mixture(self):
        # equal mixture of the m=1 and m=2 ground states, recomputed by dense ED
        p = make_profile("uniform", 3)
        expected = 0.25 * np.diag([1.0, 0, 0, 0]) + 0.25 * np.diag([0, 0, 0, 1.0]) + 0.5 * RHO_PSI_PLUS
        np.testing.assert_allclose(dense_pair(p, 0.0), expected, atol=1e-12)
        np.testing.assert_allclose(end_to_end_rdm(G_of(p, 0.0)).rho, expected, atol=1e-12)

    @pytest.mark.parametrize("T", [0.0, 1e-3, 0.1, 2.0])
    def test_valid_state_x_structure(self, T):
        r = end_to_end_rdm(G_of(make_profile("lambda_mu", 14, 0.3, 3.0), T))
        assert np.trace(r.rho).real == pytest.approx(1, abs=1e-10)
        assert np.max(np.abs(r.rho - r.rho.conj().T)) <= 1e-10
        assert np.linalg.eigvalsh(r.rho).min() >= -1e-9
        assert r.is_x_state() and r.rho[0, 3] == 0

    @pytest.mark.parametrize("n,T", [(4, 0.0), (7, 0.05), (10, 0.5)])
    def test_matches_dense_oracle(self, rng, n, T):
        p = make_profile("custom", n, custom_couplings=rng.uniform(0.1, 2.0, n - 1))
        np.testing.assert_allclose(end_to_end_rdm(G_of(p, T)).rho, dense_pair(p, T), atol=1e-8)


class TestTwoQubitDensity:
    def test_rejects_non_hermitian(self):
        bad = RHO_PSI_PLUS.astype(complex)
        bad[0, 1] = 0.1
        with pytest.raises(InvalidDensityMatrix):
            TwoQubitDensity(bad)

    def test_rejects_bad_trace(self):
        with pytest.raises(InvalidDensityMatrix):
            TwoQubitDensity(np.eye(4) / 2)

    def test_rejects_negative(self):
        with pytest.raises(InvalidDensityMatrix):
            TwoQubitDensity(np.diag([0.6, 0.6, -0.1, -0.1]))

    def test_clips_small_negative_with_warning(self, caplog):
        with caplog.at_level(logging.WARNING):
            r = TwoQubitDensity(np.diag([0.5 + 5e-10, 0.5, 0, -5e-10]))
        assert np.linalg.eigvalsh(r.rho).min() >= 0
        assert "clipping" in caplog.text


class TestMeasures:
    def test_concurrence_examples(self):
        assert concurrence(RHO_PSI_PLUS) == pytest.approx(1.0, abs=1e-12)
        assert concurrence(np.eye(4) / 4) == pytest.approx(0.0, abs=1e-12)
        werner = 0.5 * RHO_PSI_PLUS + 0.5 * np.eye(4) / 4
        assert concurrence(werner) == pytest.approx(0.25, abs=1e-12)
        assert wootters_concurrence(werner) == pytest.approx(0.25, abs=1e-10)

    @pytest.mark.parametrize("p", np.linspace(0, 1, 11))
    def test_werner_closed_form(self, p):
        werner = p * RHO_PSI_PLUS + (1 - p) * np.eye(4) / 4
        assert wootters_concurrence(werner) == pytest.approx(max(0, (3 * p - 1) / 2), abs=1e-7)

    def test_x_fast_path_equals_wootters(self, rng):
        worst = 0.0
        for _ in range(10_000):
            rho = random_x_state(rng)
            worst = max(worst, abs(x_state_concurrence(rho) - wootters_concurrence(rho)))
        assert worst <= 1e-10

    def test_general_state_uses_wootters(self, rng):
        a = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
        rho = a @ a.conj().T
        rho /= np.trace(rho)
        assert concurrence(rho) == wootters_concurrence(rho)

    def test_fully_entangled_fraction_examples(self):
        assert fully_entangled_fraction(RHO_PSI_PLUS) == pytest.approx(1.0, abs=1e-12)
        assert fully_entangled_fraction(np.eye(4) / 4) == pytest.approx(0.25, abs=1e-12)
        assert fully_entangled_fraction(UPUP) == pytest.approx(0.5, abs=1e-12)

    def test_max_fidelity_examples(self):
        assert max_fidelity(RHO_PSI_PLUS) == pytest.approx(1.0, abs=1e-12)
        assert max_fidelity(np.eye(4) / 4) == pytest.approx(0.5, abs=1e-12)
        assert max_fidelity(UPUP) == pytest.approx(2 / 3, abs=1e-12)

    @pytest.mark.parametrize("kind", ["x", "general", "chain"])
    def test_magic_basis_dominates_sampling(self, rng, kind):
        if kind == "x":
            rho = random_x_state(rng)
        elif kind == "general":
            a = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
            rho = a @ a.conj().T
            rho /= np.trace(rho)
        else:
            rho = end_to_end_rdm(G_of(make_profile("lambda_mu", 12, 0.3, 4.0), 0.002)).rho
        f = fully_entangled_fraction(rho)
        assert sampled_entangled_fraction(rho, 10_000, rng) <= f + 1e-9
        # 1e4 points on a 3-manifold leave a deficit of order 4e-3 x eigenvalue gap
        sampled = sampled_entangled_fraction(rho, 400_000, rng)
        assert sampled <= f + 1e-9
        assert f - sampled <= 1e-3

    def test_thermal_decay(self):
        p = make_profile("lambda_mu", 16, 0.2, 5.0)
        cs = [concurrence(end_to_end_rdm(G_of(p, T))) for T in (0, 1e-4, 1e-3, 1e-2)]
        assert all(a >= b - 1e-9 for a, b in zip(cs, cs[1:]))
