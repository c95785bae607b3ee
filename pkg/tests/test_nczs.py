import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from darbouxlax import nczs
from darbouxlax.errors import ShapeError
from darbouxlax.suites import convergence_order, deriv_y_sample, top_initial

seeds = st.integers(0, 2**32 - 1)


def rc(rng, m):
    return nczs.random_complex(rng, m)


class TestSymPoly:
    def test_first(self, rng):
        H, u = rc(rng, 3), rc(rng, 3)
        np.testing.assert_allclose(nczs.sym_poly(H, u, 1), H @ u + u @ H)

    def test_second(self, rng):
        H, u = rc(rng, 3), rc(rng, 3)
        np.testing.assert_allclose(nczs.sym_poly(H, u, 2), H @ H @ u + H @ u @ H + u @ H @ H, rtol=1e-14)

    @pytest.mark.parametrize("n", [1, 2, 5])
    def test_identity_weight(self, rng, n):
        u = rc(rng, 4)
        np.testing.assert_allclose(nczs.sym_poly(np.eye(4), u, n), (n + 1) * u)

    def test_errors(self, rng):
        with pytest.raises(ValueError):
            nczs.sym_poly(np.eye(2), rc(rng, 2), 0)
        with pytest.raises(ShapeError):
            nczs.sym_poly(np.eye(2), rc(rng, 3), 1)


class TestCovariance:
    def test_linear_pair(self, rng):
        H = rc(rng, 3)
        model = nczs.CovariantModel.linear_pair(H)
        np.testing.assert_allclose(model.Y, H @ H)
        for _ in range(20):
            assert nczs.relative_covariance_residual(model, rc(rng, 3), rc(rng, 3)) <= 1e-14

    def test_zero_sigma(self, rng):
        H = rc(rng, 3)
        model = nczs.CovariantModel.sym_poly(H, 3, Y=rc(rng, 3))
        assert np.abs(nczs.covariance_residual(model, rc(rng, 3), np.zeros((3, 3)))).max() == 0.0

    def test_wrong_power_detected(self, rng):
        H = rc(rng, 3)
        wrong = nczs.CovariantModel.sym_poly(H, 3, Y=np.linalg.matrix_power(H, 3))
        assert nczs.relative_covariance_residual(wrong, rc(rng, 3), rc(rng, 3)) >= 1e-3

    @given(st.integers(2, 4), st.integers(1, 5), seeds)
    @settings(max_examples=60, deadline=None)
    def test_symmetric_polynomials(self, m, n, seed):
        rng = np.random.default_rng(seed)
        model = nczs.CovariantModel.sym_poly(rc(rng, m), n)
        assert nczs.relative_covariance_residual(model, rc(rng, m), rc(rng, m)) <= 1e-12

    @given(st.lists(st.floats(-2, 2), min_size=1, max_size=4), seeds)
    @settings(max_examples=40, deadline=None)
    def test_combinations(self, beta, seed):
        rng = np.random.default_rng(seed)
        model = nczs.CovariantModel.combination(rc(rng, 3), beta)
        assert nczs.relative_covariance_residual(model, rc(rng, 3), rc(rng, 3)) <= 1e-12

    def test_scalar_case_collapses(self, rng):
        model = nczs.CovariantModel.sym_poly(rc(rng, 1), 4)
        assert np.abs(nczs.covariance_residual(model, rc(rng, 1), rc(rng, 1))).max() <= 1e-12


class TestComboCheck:
    def test_single_weight(self, rng):
        rep = nczs.combo_covariance_check([1.0], rc(rng, 3), 20, rng)
        assert rep.passed

    def test_two_weights(self, rng):
        rep = nczs.combo_covariance_check([1.0, 2.0], rc(rng, 4), 100, rng)
        assert rep.max_relative <= 1e-12

    def test_worked_example(self, rng):
        rep = nczs.combo_covariance_check([1.0], rc(rng, 3), 20, rng, alpha=1.0, comb_beta=1.0)
        assert rep.comb_example <= 1e-12

    def test_worked_example_coupling(self, rng):
        beta = 1.7
        ok = nczs.combo_covariance_check([1.0], rc(rng, 3), 10, rng, alpha=beta ** (2 / 3), comb_beta=beta)
        bad = nczs.combo_covariance_check([1.0], rc(rng, 3), 10, rng, alpha=beta, comb_beta=beta)
        assert ok.comb_example <= 1e-12
        assert bad.comb_example >= 1e-3


class TestConstraints:
    def test_first_row_vanishes_for_equal_matrices(self, rng):
        H = rc(rng, 3)
        r = nczs.constraint_residuals(rc(rng, 3), H, H, *(rc(rng, 3) for _ in range(3)))
        assert np.abs(r[1]).max() <= 1e-12

    def test_diagonal_data(self, rng):
        u, H, J = (np.diag(rng.normal(size=3)) for _ in range(3))
        z = np.zeros((3, 3))
        for r in nczs.constraint_residuals(u, H, J, z, z, z):
            assert np.abs(r).max() <= 1e-14

    def test_second_row_reduces_when_commuting(self, rng):
        H = np.diag(rng.normal(size=3))
        J = np.diag(rng.normal(size=3))
        r = nczs.constraint_residuals(rc(rng, 3), H, J, *(rc(rng, 3) for _ in range(3)))
        np.testing.assert_allclose(r[0], r[1], atol=1e-13)

    def test_third_row_collapse(self, rng):
        args = [rc(rng, 3) for _ in range(6)]
        np.testing.assert_allclose(nczs.constraint_residuals(*args)[2], nczs.kk_row3_uncollapsed(*args), atol=1e-12)

    def test_heredity(self, rng):
        H = rc(rng, 3)
        u, s = rc(rng, 3), rc(rng, 3)
        ut = nczs.zs_dt_potential(u, H, s)
        z = np.zeros((3, 3))
        assert np.abs(nczs.constraint_residuals(ut, H, H, z, z, z)[1]).max() <= 1e-12

    def test_euler_trajectory(self, rng):
        s0 = top_initial(rng, 3)
        traj = nczs.euler_integrate(s0, 1.0, 1e-3)
        i = len(traj) // 2
        z = np.zeros((3, 3))
        gman = nczs.constraint_residuals(traj[i].u, s0.J, s0.J, z, z, deriv_y_sample(traj, i))[2]
        assert np.abs(gman).max() <= 1e-7

    def test_gman2_variants(self, rng):
        u, J, ux, uy = (rc(rng, 3) for _ in range(4))
        v = nczs.gman2_variants(u, J, ux, uy)
        assert set(v) == {"repeated", "symmetric"}
        np.testing.assert_allclose(v["repeated"] - v["symmetric"], J @ J @ ux - ux @ J @ J, atol=1e-12)
        # literal H = J in the general residual gives the repeated reading
        z = np.zeros((3, 3))
        gm = nczs.constraint_residuals(u, J, J, ux, z, uy)[2]
        np.testing.assert_allclose(gm, v["repeated"], atol=1e-12)


class TestPotentialTransform:
    def test_commuting_sigma(self, rng):
        u = rc(rng, 3)
        J = np.diag([1.0, 2.0, 3.0])
        np.testing.assert_array_equal(nczs.zs_dt_potential(u, J, np.diag(rng.normal(size=3))), u)

    def test_hand_example(self):
        r = nczs.zs_dt_potential(np.zeros((2, 2)), np.diag([1.0, 2.0]), [[0.0, 1.0], [0.0, 0.0]])
        np.testing.assert_array_equal(r, [[0.0, -1.0], [0.0, 0.0]])


class TestTop:
    def test_rhs_fixed_points(self, rng):
        J = np.diag([1.0, 2.0, 3.0])
        assert np.abs(nczs.euler_rhs(nczs.TopState(J @ J + 2 * J, J))).max() == 0.0
        assert np.abs(nczs.euler_rhs(nczs.TopState(np.diag(rng.normal(size=3)), J))).max() == 0.0

    def test_rhs_involution(self):
        s = nczs.TopState([[0.0, 1.0], [1.0, 0.0]], np.diag([1.0, 2.0]))
        assert np.abs(nczs.euler_rhs(s)).max() == 0.0

    def test_constant_trajectory(self):
        J = np.diag([1.0, 2.0])
        traj = nczs.euler_integrate(nczs.TopState(np.diag([0.5, -1.0]), J), 1.0, 0.1)
        assert len(traj) == 11 and traj[-1].y == 1.0
        assert all(np.abs(s.u - traj[0].u).max() == 0.0 for s in traj)

    def test_step_validation(self):
        s = nczs.TopState(np.eye(2), np.eye(2))
        with pytest.raises(ValueError):
            nczs.euler_integrate(s, 1.0, 0.0)
        with pytest.raises(ValueError):
            nczs.euler_integrate(s, 0.0, 0.1)

    def test_trace_powers(self):
        u = np.diag([1.0, 2.0])
        np.testing.assert_allclose(nczs.trace_powers(u), [3.0, 5.0])

    @given(seeds)
    @settings(max_examples=5, deadline=None)
    def test_isospectral(self, seed):
        s0 = top_initial(np.random.default_rng(seed), 3)
        traj = nczs.euler_integrate(s0, 3.0, 1e-3)
        assert nczs.trace_drift(traj) <= 1e-8
        assert nczs.eigenvalue_drift(traj) <= 1e-7

    def test_convergence_order(self, rng):
        assert abs(convergence_order(top_initial(rng, 3)) - 4.0) <= 0.2

    def test_pair_along_trajectory(self, rng):
        from darbouxlax.diffop import zs_compat_residual
        traj = nczs.euler_integrate(top_initial(rng, 3), 1.0, 1e-3)
        ys = np.array([s.y for s in traj])
        worst = max(float(np.abs(r(0.0, 0.0, ys)).max()) for r in zs_compat_residual(nczs.top_pair(traj)))
        assert worst <= 1e-7


class TestDirectional:
    def test_linear_map_exact(self, rng):
        H, u, h = rc(rng, 3), rc(rng, 3), rc(rng, 3)
        F = lambda v: H @ v + v @ H
        for eps in (1e-2, 1.0):
            np.testing.assert_allclose(nczs.frechet_directional(F, u, h, eps), H @ h + h @ H, atol=1e-12)

    def test_square(self, rng):
        u = rc(rng, 3)
        eps = 1e-6
        r = nczs.frechet_directional(lambda v: v @ v, u, np.eye(3), eps)
        np.testing.assert_allclose(r, 2 * u + eps * np.eye(3), atol=1e-8)
        assert np.abs(r - 2 * u).max() <= 1e-5

    def test_second_symmetric_polynomial(self, rng):
        H, u, h = rc(rng, 3), rc(rng, 3), rc(rng, 3)
        r = nczs.frechet_directional(lambda v: nczs.sym_poly(H, v, 2), u, h, 0.5)
        np.testing.assert_allclose(r, H @ H @ h + H @ h @ H + h @ H @ H, atol=1e-12)

    @pytest.mark.parametrize("kind", ["left", "right", "both", "two-sided"])
    def test_classification(self, rng, kind):
        H = rc(rng, 3)
        F = {"left": lambda v: H @ v, "right": lambda v: v @ H,
             "both": lambda v: 2.5 * v, "two-sided": lambda v: H @ v + v @ H}[kind]
        assert nczs.classify_linear_map(F, 3, rng) == kind
