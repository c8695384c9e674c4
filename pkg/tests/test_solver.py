"""Accelerated primal-dual solver, proximal maps and the energy functional."""

import csv
import math

import numpy as np
import pytest

from tdvid import ops
from tdvid.solver import (
    NumericalError,
    SolverConfig,
    energy,
    prox_dual,
    prox_primal,
    solve_accelerated_pd,
)
from tdvid.volume import DimensionError


def rng_for(seed):
    return np.random.Generator(np.random.Philox(key=seed))


def k_pair(w):
    return (lambda u: ops.apply_K(u, w)), (lambda y: ops.apply_K_adjoint(y, w))


class TestSolverConfig:
    def test_defaults(self):
        cfg = SolverConfig()
        assert cfg.l_sq == 24.0 and cfg.tol == 1e-4 and cfg.maxiter == 1000

    @pytest.mark.parametrize("kw", [{"l_sq": 0.0}, {"tol": 0.0}, {"maxiter": 0}])
    def test_validation(self, kw):
        with pytest.raises(ValueError):
            SolverConfig(**kw)


class TestProxDual:
    def test_inside_ball_unchanged(self):
        y = np.full((2, 2, 2, 6), 0.5 / math.sqrt(6.0))
        np.testing.assert_allclose(prox_dual(y), y, rtol=1e-14)

    def test_outside_ball_projected(self):
        y = np.zeros((1, 1, 1, 6))
        y[0, 0, 0, 0] = 2.0
        out = prox_dual(y)
        assert np.linalg.norm(out[0, 0, 0]) == pytest.approx(1.0)
        assert out[0, 0, 0, 0] == pytest.approx(1.0)

    def test_idempotent(self):
        y = rng_for(1).standard_normal((3, 4, 2, 6)) * 3.0
        once = prox_dual(y)
        np.testing.assert_allclose(prox_dual(once), once, rtol=1e-14)

    def test_feasible_everywhere(self):
        y = rng_for(2).standard_normal((5, 5, 5, 6)) * 10.0
        norms = np.linalg.norm(prox_dual(y), axis=-1)
        assert norms.max() <= 1.0 + 1e-12


class TestProxPrimal:
    def test_tiny_step_limit(self):
        u = np.zeros((2, 2, 2))
        f = np.ones((2, 2, 2))
        out = prox_primal(u, 1e-12, 1.0, f)
        assert np.max(np.abs(out - u)) <= 1e-9

    def test_halfway_point(self):
        u = np.zeros((2, 2, 2))
        f = np.ones((2, 2, 2))
        np.testing.assert_allclose(prox_primal(u, 1.0, 1.0, f), 0.5)

    def test_fixed_point_at_data(self):
        f = rng_for(3).standard_normal((3, 3, 3))
        np.testing.assert_allclose(prox_primal(f, 0.37, 4.2, f), f, rtol=1e-14)

    def test_validation(self):
        with pytest.raises(ValueError):
            prox_primal(np.zeros((2, 2, 2)), 0.0, 1.0, np.zeros((2, 2, 2)))
        with pytest.raises(DimensionError):
            prox_primal(np.zeros((2, 2, 2)), 1.0, 1.0, np.zeros((2, 2, 3)))


class TestEnergy:
    def test_zero_at_constant_data(self):
        f = np.full((3, 3, 3), 5.0)
        w = ops.identity_weight_field((2, 2, 2))
        K, _ = k_pair(w)
        assert energy(f, f, K, 2.0) == pytest.approx(0.0, abs=1e-12)

    def test_pure_fidelity_value(self):
        u = np.full((3, 4, 5), 1.0)
        f = np.full((3, 4, 5), 2.0)
        w = ops.identity_weight_field((2, 3, 4))
        K, _ = k_pair(w)
        # constant offset: TV term 0, fidelity (eta/2) * count * 1
        assert energy(u, f, K, 2.0) == pytest.approx(3 * 4 * 5)

    def test_weak_duality_at_solver_dual(self):
        # primal energy >= the dual value implied by the final feasible y:
        # max_y <Ku, y> - eta/2 ||div-term||... spot check via the saddle form
        rng = rng_for(4)
        f = rng.uniform(0, 10, (6, 6, 4))
        w = ops.random_weight_field((5, 5, 3), rng)
        K, Kt = k_pair(w)
        eta = 1.0
        u, _ = solve_accelerated_pd(K, Kt, f, f, eta, SolverConfig(tol=1e-8, maxiter=20000))
        # dual objective g(y) = min_u <u, K*y> + eta/2||u-f||^2
        #                      = <f, K*y> - ||K*y||^2/(2 eta), for feasible y
        y = prox_dual(K(u) * 1e12)  # feasible y aligned with Ku
        kty = Kt(y)
        dual = float(np.vdot(f, kty)) - float(np.sum(kty * kty)) / (2 * eta)
        assert energy(u, f, K, eta) >= dual - 1e-6


class TestSolve:
    def test_constant_data_is_fixed_point(self):
        f = np.full((4, 4, 4), 3.3)
        w = ops.identity_weight_field((3, 3, 3))
        K, Kt = k_pair(w)
        u, rep = solve_accelerated_pd(K, Kt, f, f, 5.0, SolverConfig(tol=1e-6))
        np.testing.assert_allclose(u, 3.3, atol=1e-8)
        assert rep.converged

    def test_large_eta_recovers_data(self):
        f = rng_for(5).uniform(0, 255, (6, 6, 4))
        w = ops.identity_weight_field((5, 5, 3))
        K, Kt = k_pair(w)
        u, _ = solve_accelerated_pd(K, Kt, f, f, 1e6, SolverConfig(tol=1e-9, maxiter=5000))
        assert np.max(np.abs(u - f)) <= 1e-3

    def test_energy_never_worse_than_data(self):
        rng = rng_for(6)
        for seed in range(3):
            f = rng.uniform(0, 255, (6, 5, 4))
            w = ops.random_weight_field((5, 4, 3), rng)
            K, Kt = k_pair(w)
            eta = 0.5 + seed
            u, _ = solve_accelerated_pd(K, Kt, f, f, eta, SolverConfig(tol=1e-6, maxiter=5000))
            assert energy(u, f, K, eta) <= energy(f, f, K, eta) + 1e-9

    def test_matches_long_run_reference(self):
        rng = rng_for(7)
        f = rng.uniform(0, 10, (8, 8, 4))
        w = ops.identity_weight_field((7, 7, 3))
        K, Kt = k_pair(w)
        ref, _ = solve_accelerated_pd(K, Kt, f, f, 1.0, SolverConfig(tol=1e-10, maxiter=100000))
        u, _ = solve_accelerated_pd(K, Kt, f, f, 1.0, SolverConfig(tol=1e-8, maxiter=100000))
        e_ref = energy(ref, f, K, 1.0)
        assert abs(energy(u, f, K, 1.0) - e_ref) / e_ref <= 1e-6

    def test_shift_equivariance(self):
        rng = rng_for(8)
        f = rng.uniform(0, 255, (6, 6, 4))
        w = ops.random_weight_field((5, 5, 3), rng)
        K, Kt = k_pair(w)
        cfg = SolverConfig(tol=1e-9, maxiter=20000)
        u1, _ = solve_accelerated_pd(K, Kt, f, f, 2.0, cfg)
        u2, _ = solve_accelerated_pd(K, Kt, f + 40.0, f + 40.0, 2.0, cfg)
        assert np.max(np.abs(u2 - (u1 + 40.0))) <= 1e-6

    def test_acceleration_beats_fixed_steps(self):
        # acceleration front-loads progress; on this instance it is still
        # ahead of the theta=1 fixed-step iteration at n = 200
        rng = rng_for(9)
        f = rng.uniform(0, 1, (16, 16, 8))
        w = ops.identity_weight_field((15, 15, 7))
        K, Kt = k_pair(w)
        eta = 2.0
        ref, rep = solve_accelerated_pd(
            K, Kt, f, f, eta, SolverConfig(tol=1e-13, maxiter=200000), accelerated=False
        )
        assert rep.converged
        cfg200 = SolverConfig(tol=1e-300, maxiter=200)
        acc, _ = solve_accelerated_pd(K, Kt, f, f, eta, cfg200, accelerated=True)
        plain, _ = solve_accelerated_pd(K, Kt, f, f, eta, cfg200, accelerated=False)
        assert np.linalg.norm(acc - ref) < np.linalg.norm(plain - ref)

    def test_step_product_invariant_and_monotone_steps(self):
        # the theta update preserves tau*sigma while shrinking tau and
        # growing sigma; replay the update rule for 100 iterations
        l_sq = 24.0
        tau = sigma = 1.0 / math.sqrt(l_sq)
        gamma = 2.0
        prod0 = tau * sigma
        prev_tau = tau
        for _ in range(100):
            theta = 1.0 / math.sqrt(1.0 + 2.0 * gamma * tau)
            tau *= theta
            sigma /= theta
            assert tau * sigma == pytest.approx(prod0, rel=1e-12)
            assert tau < prev_tau
            prev_tau = tau

    def test_dual_feasibility_throughout(self):
        # wrap prox application: feasibility of y is implied by the residual
        # path; verify via a short solve whose final dual we can reconstruct
        rng = rng_for(11)
        f = rng.uniform(0, 255, (6, 6, 4))
        w = ops.random_weight_field((5, 5, 3), rng)
        K, Kt = k_pair(w)
        seen = []

        def Kt_spy(y):
            seen.append(np.linalg.norm(y, axis=-1).max())
            return Kt(y)

        solve_accelerated_pd(K, Kt_spy, f, f, 1.0, SolverConfig(tol=1e-6, maxiter=300))
        assert max(seen) <= 1.0 + 1e-12

    def test_nan_detection_names_iteration(self):
        f = np.zeros((3, 3, 3))
        w = ops.identity_weight_field((2, 2, 2))
        K, _ = k_pair(w)

        def bad_adjoint(y):
            out = np.zeros((3, 3, 3))
            out[0, 0, 0] = np.nan
            return out

        with pytest.raises(NumericalError, match="iteration 1"):
            solve_accelerated_pd(K, bad_adjoint, f, f, 1.0, SolverConfig())

    def test_trace_csv(self, tmp_path):
        f = rng_for(12).uniform(0, 10, (4, 4, 4))
        w = ops.identity_weight_field((3, 3, 3))
        K, Kt = k_pair(w)
        path = tmp_path / "trace.csv"
        _, rep = solve_accelerated_pd(
            K, Kt, f, f, 1.0, SolverConfig(tol=1e-6, maxiter=500), trace_path=path
        )
        with open(path) as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["iteration", "residual", "energy"]
        assert len(rows) - 1 == rep.iterations
        residuals = [float(r[1]) for r in rows[1:]]
        assert all(math.isfinite(r) for r in residuals)
        assert residuals[-1] < residuals[0]

    def test_report_consistency(self):
        f = rng_for(13).uniform(0, 10, (4, 4, 4))
        w = ops.identity_weight_field((3, 3, 3))
        K, Kt = k_pair(w)
        _, rep = solve_accelerated_pd(K, Kt, f, f, 1.0, SolverConfig(tol=1e-6, maxiter=2000))
        assert rep.converged == (rep.final_residual <= 1e-6)
        assert rep.iterations <= 2000

    def test_shape_mismatch(self):
        w = ops.identity_weight_field((2, 2, 2))
        K, Kt = k_pair(w)
        with pytest.raises(DimensionError):
            solve_accelerated_pd(K, Kt, np.zeros((3, 3, 3)), np.zeros((3, 3, 4)), 1.0)

    def test_eta_validated(self):
        w = ops.identity_weight_field((2, 2, 2))
        K, Kt = k_pair(w)
        with pytest.raises(ValueError):
            solve_accelerated_pd(K, Kt, np.zeros((3, 3, 3)), np.zeros((3, 3, 3)), 0.0)
