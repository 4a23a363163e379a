import math

import pytest

from gbattery import gqm
from gbattery.extraction import ergotropy
from gbattery.model import ModelSpec, battery_hamiltonian, spectral_density
from gbattery.oracle import OracleConfig, gamma_tilde, mean_force_cm, stationary_moments


class TestGammaTilde:
    def test_zero_frequency(self):
        spec = ModelSpec()
        assert gamma_tilde(0.0, spec) == pytest.approx(2.0 * spec.gamma)

    def test_at_cutoff(self):
        spec = ModelSpec()  # gamma = 1, omega_d = 4
        assert gamma_tilde(4.0, spec) == pytest.approx(1.0 + 1.0j)

    def test_real_part_matches_spectral_density(self, rng):
        spec = ModelSpec()
        for omega in rng.uniform(0.01, 30.0, size=100):
            lhs = gamma_tilde(omega, spec).real * spec.m0 * omega
            assert lhs == pytest.approx(spectral_density(omega, spec), rel=1e-12)


class TestStationaryMoments:
    def test_weak_coupling_analytic_limit(self):
        spec = ModelSpec(gamma=1e-4)
        moments = stationary_moments(spec)
        nu = 1.0 / math.tanh(10.0)
        assert moments.q2 == pytest.approx(nu / 4.0, rel=1e-3)
        assert moments.p2 == pytest.approx(nu, rel=1e-3)

    def test_tolerance_tightening_within_error_estimate(self):
        spec = ModelSpec()
        coarse = stationary_moments(spec, OracleConfig(rel_tol=1e-8))
        fine = stationary_moments(spec, OracleConfig(rel_tol=5e-9))
        assert abs(coarse.q2 - fine.q2) <= coarse.q2_error + fine.q2_error
        assert abs(coarse.p2 - fine.p2) <= coarse.p2_error + fine.p2_error

    def test_decoupled_rejected(self):
        with pytest.raises(ValueError, match="gamma"):
            stationary_moments(ModelSpec(gamma=0.0, tail_match=False))

    @pytest.mark.parametrize("beta", [0.1, 1.0, 10.0, 500.0])
    @pytest.mark.parametrize("gamma", [0.01, 1.0, 5.0])
    def test_positive_and_finite_across_parameters(self, beta, gamma):
        spec = ModelSpec(beta=beta, gamma=gamma)
        moments = stationary_moments(spec)
        assert 0.0 < moments.q2 < math.inf
        assert 0.0 < moments.p2 < math.inf

    def test_cutoff_sensitivity_within_tail_estimate(self):
        spec = ModelSpec()
        low = stationary_moments(spec, OracleConfig(omega_max_factor=50.0))
        high = stationary_moments(spec, OracleConfig(omega_max_factor=150.0))
        assert abs(low.p2 - high.p2) <= low.p2_error + high.p2_error
        assert abs(low.q2 - high.q2) <= low.q2_error + high.q2_error


class TestMeanForceCM:
    def test_weak_coupling_matches_bare_thermal(self):
        spec = ModelSpec(gamma=1e-4)
        cm = mean_force_cm(spec).cm
        bare = gqm.thermal_cm(battery_hamiltonian(spec), spec.beta)
        assert abs(cm[0, 0] - bare[0, 0]) / bare[0, 0] <= 1e-3
        assert abs(cm[1, 1] - bare[1, 1]) / bare[1, 1] <= 1e-3

    def test_physical(self):
        moments = mean_force_cm(ModelSpec())
        assert gqm.symplectic_eigenvalues(moments.cm)[0] >= 1.0

    def test_reference_state_is_active(self):
        # strong coupling leaves extractable energy in the battery marginal
        moments = mean_force_cm(ModelSpec())
        assert ergotropy(moments.cm, battery_hamiltonian(ModelSpec())) > 1e-3

    def test_off_diagonal_identically_zero(self):
        cm = mean_force_cm(ModelSpec()).cm
        assert cm[0, 1] == 0.0 and cm[1, 0] == 0.0
