import math

import numpy as np
import pytest
from scipy.linalg import expm

from gbattery import gqm
from gbattery.evolution import (
    NormalModeFlow,
    StepperConfig,
    evolve,
    evolve_with_free_bath,
    propagator_const,
    propagator_protocol,
)
from gbattery.model import Protocol, build_hamiltonian

from conftest import random_bona_fide_cm


class TestPropagatorConst:
    def test_zero_time_is_identity(self):
        np.testing.assert_array_equal(propagator_const(np.eye(4), 0.0), np.eye(4))

    def test_free_mode_rotation_closed_form(self):
        # H = I/2 generates the plain phase-space rotation
        h = 0.5 * np.eye(2)
        s = propagator_const(h, math.pi / 2)
        np.testing.assert_allclose(s, [[0.0, 1.0], [-1.0, 0.0]], atol=1e-12)

    def test_one_parameter_group_law(self, rng):
        h_rand = rng.standard_normal((6, 6))
        h = 0.2 * (h_rand @ h_rand.T) + 0.3 * np.eye(6)
        for _ in range(5):
            t1, t2 = rng.uniform(0.0, 2.0, size=2)
            lhs = propagator_const(h, t1) @ propagator_const(h, t2)
            rhs = propagator_const(h, t1 + t2)
            assert np.abs(lhs - rhs).max() <= 1e-9

    def test_negative_time_rejected(self):
        with pytest.raises(ValueError):
            propagator_const(np.eye(2), -1.0)


class TestEvolve:
    def test_identity_transform(self, rng):
        sigma, _ = random_bona_fide_cm(rng, 2)
        np.testing.assert_array_equal(evolve(sigma, np.eye(4)), sigma)

    def test_entropy_preserved(self, rng, small_spec, small_bath):
        h = build_hamiltonian(small_spec, small_bath, 1.0)
        sigma, _ = random_bona_fide_cm(rng, small_spec.n_modes)
        s_mat = propagator_const(h, 2.3)
        before = gqm.von_neumann_entropy(sigma)
        after = gqm.von_neumann_entropy(evolve(sigma, s_mat))
        assert abs(after - before) <= 1e-7 * max(1.0, before)

    def test_thermal_state_stationary(self, small_spec, small_bath):
        h = build_hamiltonian(small_spec, small_bath, 1.0)
        sigma_th = gqm.thermal_cm(h, small_spec.beta)
        moved = evolve(sigma_th, propagator_const(h, 3.7))
        assert np.abs(moved - sigma_th).max() <= 1e-8 * np.abs(sigma_th).max()

    def test_dimension_mismatch(self, rng):
        sigma, _ = random_bona_fide_cm(rng, 2)
        with pytest.raises(ValueError):
            evolve(sigma, np.eye(6))


class TestEvolveWithFreeBath:
    def _split_setup(self, rng):
        h_active_rand = rng.standard_normal((4, 4))
        h_active = 0.2 * (h_active_rand @ h_active_rand.T) + 0.4 * np.eye(4)
        h_free = 0.5 * np.diag([1.8, 0.9])
        sigma, _ = random_bona_fide_cm(rng, 3)
        return h_active, h_free, sigma

    def test_zero_time(self, rng):
        h_active, h_free, sigma = self._split_setup(rng)
        out = evolve_with_free_bath(sigma, h_active, [0, 2], h_free, [1], 0.0)
        np.testing.assert_allclose(out, sigma, atol=1e-14)

    def test_free_block_energy_constant(self, rng):
        h_active, h_free, sigma = self._split_setup(rng)
        for t in (0.5, 1.5, 4.0):
            out = evolve_with_free_bath(sigma, h_active, [0, 2], h_free, [1], t)
            before = gqm.mean_energy(h_free, gqm.sub_block(sigma, [1]))
            after = gqm.mean_energy(h_free, gqm.sub_block(out, [1]))
            assert after == pytest.approx(before, rel=1e-10)

    def test_matches_direct_sum_exponential(self, rng):
        h_active, h_free, sigma = self._split_setup(rng)
        t = 1.3
        # independent route: one exponential of the embedded direct sum
        h_total = np.zeros((6, 6))
        idx_active = [0, 1, 4, 5]
        idx_free = [2, 3]
        h_total[np.ix_(idx_active, idx_active)] = h_active
        h_total[np.ix_(idx_free, idx_free)] = h_free
        expected = evolve(sigma, propagator_const(h_total, t))
        got = evolve_with_free_bath(sigma, h_active, [0, 2], h_free, [1], t)
        assert np.abs(got - expected).max() <= 1e-10

    def test_overlapping_modes_rejected(self, rng):
        h_active, h_free, sigma = self._split_setup(rng)
        with pytest.raises(ValueError):
            evolve_with_free_bath(sigma, h_active, [0, 1], h_free, [1], 1.0)


class TestProtocolPropagator:
    def test_quench_is_identity(self, small_spec, small_bath):
        s = propagator_protocol(small_spec, small_bath, Protocol(0.0))
        np.testing.assert_array_equal(s, np.eye(2 * small_spec.n_modes))

    def test_matches_expm_product_oracle(self, small_spec, small_bath):
        # every factor must be the exact exponential of the instantaneous
        # Hamiltonian; cross-check the whole product against scipy expm
        protocol = Protocol(t_d=0.8, exponent=3)
        steps = 40
        cfg = StepperConfig(dt=protocol.t_d / steps)
        got = propagator_protocol(small_spec, small_bath, protocol, cfg)

        n = small_spec.n_modes
        omega = gqm.symplectic_form(n)
        dt = protocol.t_d / steps
        expected = np.eye(2 * n)
        for i in range(steps):
            lam = (1.0 - (i * dt) / protocol.t_d) ** protocol.exponent
            h_i = build_hamiltonian(small_spec, small_bath, lam)
            expected = expm(2.0 * dt * omega @ h_i) @ expected
        assert np.abs(got - expected).max() <= 1e-11

    def test_symplectic_after_many_steps(self, small_spec, small_bath):
        cfg = StepperConfig(dt=1e-3)
        s = propagator_protocol(small_spec, small_bath, Protocol(2.0), cfg)
        assert gqm.symplecticity_defect(s) <= 1e-8

    def test_step_halving_refinement_converges(self, small_spec, small_bath):
        cfg = StepperConfig(dt=0.05, refine=True, work_tol=1e-5)
        s = propagator_protocol(small_spec, small_bath, Protocol(1.5), cfg)
        assert gqm.symplecticity_defect(s) <= 1e-8

    def test_work_error_decreases_with_halving(self, small_spec, small_bath):
        # first-order product formula: the disconnect-work error must drop
        # by at least 2x per step halving in the asymptotic regime
        protocol = Protocol(t_d=1.5)
        h_full = build_hamiltonian(small_spec, small_bath, 1.0)
        h_dec = build_hamiltonian(small_spec, small_bath, 0.0)
        sigma_th = gqm.thermal_cm(h_full, small_spec.beta)
        e_th = gqm.mean_energy(h_full, sigma_th)

        def work(dt):
            s = propagator_protocol(small_spec, small_bath, protocol, StepperConfig(dt=dt))
            return gqm.mean_energy(h_dec, evolve(sigma_th, s)) - e_th

        w1, w2, w3 = work(8e-3), work(4e-3), work(2e-3)
        err1, err2 = abs(w1 - w2), abs(w2 - w3)
        assert err1 >= 2.0 * err2


class TestNormalModeFlow:
    def test_propagator_matches_expm(self, small_spec, small_bath):
        flow = NormalModeFlow.from_model(small_spec, small_bath, 1.0)
        h = build_hamiltonian(small_spec, small_bath, 1.0)
        for t in (0.3, 2.0, 17.0):
            direct = propagator_const(h, t)
            assert np.abs(flow.propagator(t) - direct).max() <= 1e-11 * max(1.0, t)

    def test_thermal_cm_matches_generic_route(self, small_spec, small_bath):
        flow = NormalModeFlow.from_model(small_spec, small_bath, 1.0)
        h = build_hamiltonian(small_spec, small_bath, 1.0)
        generic = gqm.thermal_cm(h, small_spec.beta)
        fast = flow.thermal_cm(small_spec.beta)
        assert np.abs(fast - generic).max() <= 1e-9 * np.abs(generic).max()

    def test_battery_blocks_match_full_evolution(self, small_spec, small_bath, rng):
        flow = NormalModeFlow.from_model(small_spec, small_bath, 1.0)
        sigma, _ = random_bona_fide_cm(rng, small_spec.n_modes)
        times = np.array([0.0, 0.7, 3.1])
        blocks = flow.battery_blocks(sigma, times)
        for i, t in enumerate(times):
            full = evolve(sigma, flow.propagator(t))
            np.testing.assert_allclose(blocks[i], full[:2, :2], atol=1e-10)

    def test_window_average_matches_dense_trapezoid(self, small_spec, small_bath, rng):
        flow = NormalModeFlow.from_model(small_spec, small_bath, 1.0)
        sigma, _ = random_bona_fide_cm(rng, small_spec.n_modes)
        t0, t1 = 4.0, 7.0
        avg = flow.window_average(sigma, t0, t1)
        times = np.linspace(t0, t1, 4001)
        blocks = flow.battery_blocks(sigma, times)
        dense = np.trapezoid(blocks, times, axis=0) / (t1 - t0)
        np.testing.assert_allclose(avg.battery_block(), dense, atol=5e-7)

    def test_window_average_bath_pieces_match_dense(self, small_spec, small_bath, rng):
        flow = NormalModeFlow.from_model(small_spec, small_bath, 1.0)
        sigma, _ = random_bona_fide_cm(rng, small_spec.n_modes)
        t0, t1 = 2.0, 5.0
        avg = flow.window_average(sigma, t0, t1)
        times = np.linspace(t0, t1, 3001)
        qvar = np.empty((len(times), small_spec.n_modes))
        row = np.empty((len(times), small_spec.n_modes))
        for i, t in enumerate(times):
            full = evolve(sigma, flow.propagator(t))
            qvar[i] = np.diag(full)[0::2]
            row[i] = full[0, 0::2]
        qvar_mean = np.trapezoid(qvar, times, axis=0) / (t1 - t0)
        row_mean = np.trapezoid(row, times, axis=0) / (t1 - t0)
        np.testing.assert_allclose(avg.position_variances(), qvar_mean, atol=2e-5)
        np.testing.assert_allclose(avg.battery_position_row(), row_mean, atol=2e-5)

    def test_dephased_average_is_long_window_limit(self, small_spec, small_bath, rng):
        flow = NormalModeFlow.from_model(small_spec, small_bath, 1.0)
        sigma, _ = random_bona_fide_cm(rng, small_spec.n_modes)
        inf_avg = flow.dephased_average(sigma).battery_block()
        long_avg = flow.window_average(sigma, 0.0, 40000.0).battery_block()
        np.testing.assert_allclose(long_avg, inf_avg, atol=2e-3)

    def test_thermal_state_is_fixed_point_of_averaging(self, small_spec, small_bath):
        flow = NormalModeFlow.from_model(small_spec, small_bath, 1.0)
        sigma_th = flow.thermal_cm(small_spec.beta)
        avg = flow.window_average(sigma_th, 3.0, 9.0)
        np.testing.assert_allclose(avg.battery_block(), sigma_th[:2, :2], atol=1e-12)


class TestStepperConfig:
    def test_rejects_bad_values(self):
        with pytest.raises(ValueError):
            StepperConfig(dt=0.0)
        with pytest.raises(ValueError):
            StepperConfig(sympl_tol=-1.0)
