import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import expsum_strategy, sup
from darbouxlax.diffop import (
    DiffOperator,
    ZSPair,
    apply,
    commutator_op,
    compose,
    d,
    lax_compat_residual,
    multiplication,
    zs_compat_residual,
)
from darbouxlax.errors import ShapeError
from darbouxlax.field import AnalyticField, ExpSum, constant, coordinate, deriv_t, exp_term, zeros


def _zero_op(L, x=np.linspace(-1, 1, 7)):
    return max(L.coefficient_norms(x)) if L.coeffs else 0.0


def _op_strategy(dim=2, max_degree=2):
    return st.lists(expsum_strategy(dim, 2), min_size=1, max_size=max_degree + 1).map(
        lambda cs: DiffOperator(cs, dim))


class TestApply:
    def test_derivative(self):
        x = np.linspace(-1, 1, 5)
        r = apply(d(), exp_term(1.0, 3.0))
        np.testing.assert_allclose(r(x)[:, 0, 0], 3 * np.exp(3 * x))

    def test_identity(self):
        psi = ExpSum(2, [(np.array([[1, 2], [3, 4]]), 0.3)])
        assert sup(apply(DiffOperator([1.0], 2), psi) - psi) == 0.0

    def test_cubic_symbol(self):
        L = DiffOperator([0.0, -0.75, 0.0, 1.0])
        x = np.linspace(-1, 1, 5)
        np.testing.assert_allclose(L(exp_term(1.0, 1.0))(x)[:, 0, 0], 0.25 * np.exp(x), rtol=1e-14)

    def test_dim_mismatch(self):
        with pytest.raises(ShapeError):
            apply(d(2), exp_term(1.0, 1.0))

    @given(_op_strategy(), expsum_strategy(2), expsum_strategy(2))
    @settings(max_examples=25, deadline=None)
    def test_linear_in_operand(self, L, f, g):
        assert sup(L(f + 2.0 * g) - L(f) - 2.0 * L(g)) <= 1e-10


class TestCompose:
    def test_leibniz_base(self):
        b = exp_term(2.0, 0.5)
        C = compose(d(), multiplication(b))
        assert C.degree == 1
        assert sup(C.coeffs[0] - 0.5 * b) <= 1e-15
        assert sup(C.coeffs[1] - b) == 0.0

    def test_right_identity(self, rng):
        L = DiffOperator([exp_term(rng.normal(size=(2, 2)), 0.2), constant(np.eye(2)), exp_term(1.0, -0.1, dim=2)])
        C = compose(L, DiffOperator([1.0], 2))
        for a, b in zip(C.coeffs, L.coeffs):
            assert sup(a - b) == 0.0

    def test_second_derivative_times_x(self):
        C = compose(DiffOperator([0.0, 0.0, 1.0]), multiplication(coordinate("x")))
        x = np.linspace(-2, 2, 5)
        assert sup(C.coeffs[0], x) == 0.0
        assert sup(C.coeffs[1] - 2.0, x) == 0.0
        assert sup(C.coeffs[2] - coordinate("x"), x) == 0.0

    def test_second_derivative_times_x_analytic(self):
        xf = AnalyticField(lambda x, t, y, nx, nt, ny: x if nx == 0 else (np.ones_like(x) if nx == 1 else 0 * x))
        C = compose(DiffOperator([0.0, 0.0, 1.0]), multiplication(xf))
        x = np.linspace(-2, 2, 5)
        np.testing.assert_allclose(C.coeffs[1](x)[:, 0, 0], 2.0)
        np.testing.assert_allclose(C.coeffs[2](x)[:, 0, 0], x)

    @given(_op_strategy(), _op_strategy(), expsum_strategy(2))
    @settings(max_examples=25, deadline=None)
    def test_apply_of_composition(self, L, M, psi):
        assert sup(apply(compose(L, M), psi) - apply(L, apply(M, psi))) <= 1e-10

    @given(_op_strategy(), _op_strategy())
    @settings(max_examples=25, deadline=None)
    def test_degree_additive(self, L, M):
        assert compose(L, M).degree == L.degree + M.degree

    def test_json_roundtrip(self, rng):
        L = DiffOperator([exp_term(rng.normal(size=(2, 2)), 0.2), constant(np.eye(2))])
        M = DiffOperator.from_json(L.to_json())
        for a, b in zip(L.coeffs, M.coeffs):
            assert sup(a - b) == 0.0


class TestCommutator:
    def test_self(self):
        L = DiffOperator([exp_term(1.0, 0.3), 1.0])
        assert _zero_op(commutator_op(L, L)) == 0.0

    def test_constant_scalars(self):
        assert _zero_op(commutator_op(DiffOperator([2.0, 0.0, 3.0]), DiffOperator([1.0, -1.0]))) == 0.0

    def test_canonical(self):
        C = commutator_op(d(), multiplication(coordinate("x")))
        assert C.degree == 0
        assert sup(C.coeffs[0] - 1.0, np.linspace(-3, 3, 7)) == 0.0

    @given(_op_strategy(2, 1), _op_strategy(2, 1), _op_strategy(2, 1))
    @settings(max_examples=20, deadline=None)
    def test_jacobi(self, A, B, C):
        J = (commutator_op(A, commutator_op(B, C)) + commutator_op(B, commutator_op(C, A))
             + commutator_op(C, commutator_op(A, B)))
        assert max(sup(c) for c in J.coeffs) <= 1e-10


class TestLaxCompat:
    def test_commuting_constants(self):
        L = DiffOperator([0.0, 2.0, -1.0, 1.0])
        A = DiffOperator([0.0, 0.5, 3.0])
        assert all(sup(r) == 0.0 for r in lax_compat_residual(L, A))

    def test_leading_residual_forces_constant_b3(self):
        b3 = exp_term(1.0, 0.4)
        L = DiffOperator([0.0, 0.0, 0.0, b3])
        A = DiffOperator([0.0, 0.0, 2.0])
        r = lax_compat_residual(L, A)[0]
        x = np.linspace(-1, 1, 5)
        np.testing.assert_allclose(r(x)[:, 0, 0], 2 * 2.0 * 0.4 * np.exp(0.4 * x))

    def test_degree_mismatch(self):
        with pytest.raises(ShapeError):
            lax_compat_residual(DiffOperator([0.0, 1.0]), DiffOperator([0.0, 0.0, 1.0]))

    def test_matches_operator_commutator(self, rng):
        # scalar coefficients: residual k is the d^k coefficient of L_t - [A, L]
        cs = [exp_term(rng.normal(), rng.uniform(-1, 1), rng.uniform(-1, 1)) for _ in range(7)]
        L = DiffOperator([cs[0], cs[1], cs[2], cs[5]])
        A = DiffOperator([cs[3], cs[4], cs[6]])
        res = lax_compat_residual(L, A)
        comm = commutator_op(A, L)
        assert sup(res[0] - comm.coeffs[4]) <= 1e-10
        for k in range(4):
            assert sup(res[4 - k] - (deriv_t(L.coeffs[k]) - comm.coeffs[k])) <= 1e-10


class TestZSCompat:
    def test_equal_constant_leading(self, rng):
        J = constant(rng.normal(size=(3, 3)))
        r = zs_compat_residual(ZSPair(zeros(3), J, zeros(3), J))
        assert all(sup(v) == 0.0 for v in r)

    def test_constant_leading_reduction(self, rng):
        a1, b1 = constant(np.diag([1.0, 2.0])), constant(np.diag([1.0, 4.0]))
        a0, b0 = (constant(rng.normal(size=(2, 2))) for _ in range(2))
        r1, r2, _ = zs_compat_residual(ZSPair(a0, a1, b0, b1))
        assert sup(r1) == 0.0
        A0, B0, A1, B1 = (c.constant_value() for c in (a0, b0, a1, b1))
        expected = A0 @ B1 - B1 @ A0 + A1 @ B0 - B0 @ A1
        np.testing.assert_allclose(r2(0.0), expected, atol=1e-14)

    def test_mixed_dims(self):
        with pytest.raises(ShapeError):
            ZSPair(zeros(2), zeros(2), zeros(3), zeros(2))
