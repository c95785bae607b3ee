"""Jointly covariant third/second order scalar Lax pair (generalized Boussinesq).

Spectral problem ``b3 psi''' + b2 psi'' + b(w) psi' + G(w) psi = lam psi`` and
evolution ``psi_t = a2 psi'' + a1 psi' + w psi`` sharing one potential ``w``.
The DT image ``w[1] = w + a1' + 2 a2 sigma'`` is compatible with the DT images
of ``b`` and ``G`` when

    b(w) = 3 b3 w / (2 a2) + alpha
    G(w) = b3 [3/(4 a2) w_x + 3/(4 a2^2) (D^-1 w_t - a1 w) - 3 a2_t/(4 a2^3) D^-1 w]
           + (b2 / a2) w

with ``D^-1`` vanishing at ``x0``. The constant of integration does not cancel
under dressing: it shifts the spectral parameter by ``3 b3 sigma_t(x0)/(2 a2)``,
so ``x0`` must sit where the dressing data are stationary (a soliton tail).
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field as dc_field
from typing import Sequence

import numpy as np

from .darboux import DressingSigma, dt_wavefunction, sigma_from, transform_coeffs_order2
from .diffop import DiffOperator
from .errors import ConstraintError, ShapeError
from .field import (
    ExpSum,
    MatrixField,
    add,
    antideriv_x,
    as_field,
    deriv_t,
    deriv_x,
    exp_term,
    inverse,
    mul,
    zeros,
)

DEFAULT_CHECK_X = np.linspace(-5.0, 5.0, 11)
DEFAULT_CHECK_T = np.linspace(0.0, 1.0, 5)
DEFAULT_COV_X = np.linspace(-10.0, 10.0, 200)
DEFAULT_COV_T = np.linspace(0.0, 1.0, 50)


@dataclass(frozen=True)
class BqParams:
    """Pair parameters. Function-valued entries accept numbers or scalar fields."""

    b3: complex = 1.0
    a2: MatrixField | complex = 1.0
    a1: MatrixField | complex = 0.0
    alpha: MatrixField | complex = 0.0
    b2: MatrixField | complex = 0.0
    lam: complex = 0.0
    x0: float = -80.0

    def __post_init__(self):
        for name in ("a2", "a1", "alpha", "b2"):
            object.__setattr__(self, name, as_field(getattr(self, name), 1))
        if self.b3 == 0:
            raise ConstraintError("b3 must be non-zero")

    def value(self, name: str) -> complex:
        """Numeric value of a constant function-valued parameter."""
        f = getattr(self, name)
        if not (isinstance(f, ExpSum) and f.is_constant):
            raise ConstraintError(f"parameter {name} is not constant")
        return complex(f.constant_value()[0, 0])


@dataclass(frozen=True)
class BqPair:
    L: DiffOperator
    A: DiffOperator
    w: MatrixField
    params: BqParams


def _require_scalar(*fields: MatrixField):
    for f in fields:
        if f.dim != 1:
            raise ShapeError("the Boussinesq construction is scalar (dim 1)")


def constraint_residuals(p: BqParams, x=DEFAULT_CHECK_X, t=DEFAULT_CHECK_T) -> dict[str, float]:
    """Sup-norms of the parameter constraints on the sample grid."""
    X, T = np.meshgrid(np.asarray(x, float), np.asarray(t, float), indexing="ij")
    a1p = deriv_x(p.a1)
    ratio = (3.0 * p.b3 / 2.0) * inverse(p.a2)
    checks = {
        "a2_x": deriv_x(p.a2),
        "b2_x": deriv_x(p.b2),
        "alpha_x": deriv_x(p.alpha),
        "cc11_b2": deriv_x(p.b2) - mul(a1p, ratio),
        "burgers_a1": deriv_t(p.a1) + mul(p.a2, deriv_x(p.a1, 2)) + mul(p.a1, a1p),
    }
    return {name: float(np.max(np.abs(f(X, T)))) for name, f in checks.items()}


def check_constraints(p: BqParams, x=DEFAULT_CHECK_X, t=DEFAULT_CHECK_T, tol: float = 1e-10) -> None:
    res = constraint_residuals(p, x, t)
    failing = {k: v for k, v in res.items() if not v <= tol}
    if failing:
        listing = ", ".join(f"{k}={v:.3g}" for k, v in sorted(failing.items()))
        raise ConstraintError(f"covariance constraints violated: {listing}")


def b_coefficient(w: MatrixField, p: BqParams) -> MatrixField:
    """``b(w) = 3 b3 w / (2 a2) + alpha``."""
    return mul((1.5 * p.b3) * inverse(p.a2), w) + p.alpha


def lower_coefficient(w: MatrixField, p: BqParams) -> MatrixField:
    """Covariant ``G(w)``; see the module docstring."""
    _require_scalar(w)
    inv_a2 = inverse(p.a2)
    inv_a2_sq = mul(inv_a2, inv_a2)
    g = mul((0.75 * p.b3) * inv_a2, deriv_x(w))
    g = g + mul((0.75 * p.b3) * inv_a2_sq, antideriv_x(deriv_t(w), p.x0) - mul(p.a1, w))
    a2_t = deriv_t(p.a2)
    if not a2_t.is_zero:
        g = g - mul((0.75 * p.b3) * mul(a2_t, mul(inv_a2_sq, inv_a2)), antideriv_x(w, p.x0))
    if not p.b2.is_zero:
        g = g + mul(mul(p.b2, inv_a2), w)
    return g


def lower_coefficient_printed(w: MatrixField, p: BqParams) -> MatrixField:
    """``G`` with the weights ``3 b3/(2 a2)``, ``3 b3 a1'/(2 a2^2)``, ``3 b3/(2 a2^2)``.

    Kept for comparison only: this variant is not covariant under dressing.
    """
    _require_scalar(w)
    inv_a2 = inverse(p.a2)
    inv_a2_sq = mul(inv_a2, inv_a2)
    g = mul((1.5 * p.b3) * inv_a2, deriv_x(w))
    a1p = deriv_x(p.a1)
    if not a1p.is_zero:
        g = g + mul((1.5 * p.b3) * mul(a1p, inv_a2_sq), antideriv_x(w, p.x0))
    return g + mul((1.5 * p.b3) * inv_a2_sq, antideriv_x(deriv_t(w), p.x0))


def g_weights(p: BqParams) -> dict[str, complex]:
    """Coefficients of G on ``w_x``, ``D^-1 w_t``, ``w`` for constant parameters."""
    a2, a1, b2 = p.value("a2"), p.value("a1"), p.value("b2")
    return {
        "w_x": 0.75 * p.b3 / a2,
        "inv_w_t": 0.75 * p.b3 / a2**2,
        "w": -0.75 * p.b3 * a1 / a2**2 + b2 / a2,
    }


def build_pair(w: MatrixField, p: BqParams, check: bool = True,
               x=DEFAULT_CHECK_X, t=DEFAULT_CHECK_T) -> BqPair:
    """Assemble ``L = b3 d^3 + b2 d^2 + b(w) d + G(w)`` and ``A = a2 d^2 + a1 d + w``."""
    w = as_field(w, 1)
    _require_scalar(w)
    if check:
        check_constraints(p, x, t)
    L = DiffOperator([lower_coefficient(w, p), b_coefficient(w, p), p.b2, p.b3], 1)
    A = DiffOperator([w, p.a1, p.a2], 1)
    return BqPair(L, A, w, p)


# -- zero-seed solitons ------------------------------------------------------


def seed_eigenvalue(p: BqParams, k: complex) -> complex:
    """``lam = b3 k^3 + b2 k^2 + alpha k`` for ``e^{kx}`` in the zero-potential pair."""
    return p.b3 * k**3 + p.value("b2") * k**2 + p.value("alpha") * k


def seed_frequency(p: BqParams, k: complex) -> complex:
    return p.value("a2") * k**2 + p.value("a1") * k


def seed_wavefunction(p: BqParams, k: complex, c: complex = 1.0) -> ExpSum:
    """``c exp(kx + omega t)`` with ``omega = a2 k^2 + a1 k`` (constant parameters)."""
    return exp_term(c, k, seed_frequency(p, k))


def partner_wavenumbers(p: BqParams, k: complex) -> list[complex]:
    """Other roots ``q`` of ``seed_eigenvalue(q) = seed_eigenvalue(k)``."""
    lam = seed_eigenvalue(p, k)
    roots = np.roots([p.b3, p.value("b2"), p.value("alpha"), -lam])
    roots = sorted(roots, key=lambda q: abs(q - k))[1:]
    return [complex(q) for q in roots]


def dress_potential(phi: MatrixField, p: BqParams) -> MatrixField:
    """``w_s = a1' + 2 a2 (ln phi)_xx`` for the zero seed.

    Built as ``2 a2 sigma'`` with ``sigma = phi'/phi``, which equals
    ``(phi'' phi - phi'^2) / phi^2`` and keeps an exact x-antiderivative.
    """
    _require_scalar(phi)
    s = sigma_from(phi)
    w, _, _ = transform_coeffs_order2(zeros(1), p.a1, p.a2, s)
    return w


@dataclass(frozen=True)
class CovarianceReport:
    spectral: float
    evolution: float

    def max(self) -> float:
        return max(self.spectral, self.evolution)


def pair_covariance_residual(pair: BqPair, phi: MatrixField, psi: MatrixField,
                             x=DEFAULT_COV_X, t=DEFAULT_COV_T,
                             potential_shift: float = 0.0) -> CovarianceReport:
    """Dress ``pair`` with ``phi`` and test the image of ``psi`` against the new pair.

    ``psi`` must solve the undressed pair with eigenvalue ``pair.params.lam``.
    Returns sup-norms over the ``x`` by ``t`` grid of ``(L[1] - lam) psi[1]``
    and ``psi[1]_t - A[1] psi[1]``. ``potential_shift`` adds a constant to
    ``w[1]`` (a sensitivity probe).
    """
    p = pair.params
    _require_scalar(phi, psi)
    s = sigma_from(phi)
    psi1 = dt_wavefunction(psi, s)
    w1, _, _ = transform_coeffs_order2(pair.w, p.a1, p.a2, s)
    if potential_shift:
        w1 = w1 + potential_shift
    dressed = build_pair(w1, p, check=False)
    X, T = np.meshgrid(np.asarray(x, float), np.asarray(t, float), indexing="ij")
    spectral = dressed.L(psi1) - mul(p.lam, psi1)
    evolution = deriv_t(psi1) - dressed.A(psi1)
    return CovarianceReport(
        spectral=float(np.max(np.abs(spectral(X, T)))),
        evolution=float(np.max(np.abs(evolution(X, T)))),
    )


# -- dressing chain -----------------------------------------------------------


def chain_step(w_n: MatrixField, sigma_n: DressingSigma, p: BqParams) -> MatrixField:
    """``w_{n+1} = w_n + 2 a2 sigma_n' + a1'``."""
    return w_n + mul(2.0 * p.a2, deriv_x(sigma_n.sigma)) + deriv_x(p.a1)


def _evolution_flux(s: MatrixField, p: BqParams) -> MatrixField:
    return mul(p.a2, mul(s, s) + deriv_x(s)) + mul(p.a1, s)


def chain_residual_evolution(sigma_n: DressingSigma, sigma_np1: DressingSigma,
                             p: BqParams) -> MatrixField:
    """Chain equation from eliminating ``w`` between the evolution Miura map and the step.

    For ``a2 = 1, a1 = 0`` this is
    ``s1_t - s0_t - (s1^2 + s1')' + (s0^2 - s0')'``.
    """
    s0, s1 = sigma_n.sigma, sigma_np1.sigma
    return (deriv_t(s1) - deriv_x(_evolution_flux(s1, p))
            - deriv_t(s0) + deriv_x(_evolution_flux(s0, p))
            - mul(2.0 * p.a2, deriv_x(s0, 2)) - deriv_x(p.a1, 2))


def chain_residual_evolution_printed(sigma_n: DressingSigma, sigma_np1: DressingSigma) -> MatrixField:
    """The fixed-coefficient form ``s1_t - s0_t - (s1^2 + s1')' + (s0^2 - s0')'``."""
    s0, s1 = sigma_n.sigma, sigma_np1.sigma
    return (deriv_t(s1) - deriv_t(s0) - deriv_x(mul(s1, s1) + deriv_x(s1))
            + deriv_x(mul(s0, s0) - deriv_x(s0)))


def chain_residual_spectral(sigma_n: DressingSigma, w_n: MatrixField, p: BqParams,
                            c_n: complex) -> MatrixField:
    """``b3 B3 + b2 B2 + b(w_n) sigma + G(w_n) - c_n``, zero on the chain."""
    s = sigma_n.sigma
    s1 = deriv_x(s)
    b3_bell = deriv_x(s, 2) + 3.0 * mul(s, s1) + mul(s, mul(s, s))
    out = mul(p.b3, b3_bell) + mul(p.b2, s1 + mul(s, s))
    out = out + mul(b_coefficient(w_n, p), s) + lower_coefficient(w_n, p)
    return out - c_n


@dataclass
class DressingChain:
    """Levels of iterated dressing.

    ``potentials[n]`` is ``w_n``; ``sigmas[n]`` dresses level ``n`` into
    ``n + 1`` and is built from ``wavefunctions[n]``, the n-th seed carried
    through ``n`` dressings, whose eigenvalue is ``eigenvalues[n]``.
    """

    potentials: list[MatrixField] = dc_field(default_factory=list)
    sigmas: list[DressingSigma] = dc_field(default_factory=list)
    wavefunctions: list[MatrixField] = dc_field(default_factory=list)
    eigenvalues: list[complex] = dc_field(default_factory=list)

    @property
    def depth(self) -> int:
        return len(self.sigmas)


def dressing_chain(seeds: Sequence[tuple[MatrixField, complex]], p: BqParams,
                   w0: MatrixField | None = None) -> DressingChain:
    """Iterate the DT with ``seeds = [(phi_j, lam_j), ...]`` solving the level-0 pair."""
    w = zeros(1) if w0 is None else as_field(w0, 1)
    chain = DressingChain(potentials=[w])
    pending = [phi for phi, _ in seeds]
    for n, (_, lam) in enumerate(seeds):
        phi_n = pending[n]
        s = sigma_from(phi_n)
        chain.sigmas.append(s)
        chain.wavefunctions.append(phi_n)
        chain.eigenvalues.append(lam)
        w = chain_step(w, s, p)
        chain.potentials.append(w)
        pending = pending[:n + 1] + [dt_wavefunction(f, s) for f in pending[n + 1:]]
    return chain


def wronskian(funcs: Sequence[MatrixField]) -> MatrixField:
    """Wronskian determinant of scalar fields, expanded over permutations."""
    _require_scalar(*funcs)
    n = len(funcs)
    rows = [[deriv_x(f, i) for f in funcs] for i in range(n)]
    total = zeros(1)
    for perm in itertools.permutations(range(n)):
        sign = _perm_sign(perm)
        term = as_field(float(sign), 1)
        for i, j in enumerate(perm):
            term = mul(term, rows[i][j])
        total = add(total, term)
    return total


def _perm_sign(perm) -> int:
    sign = 1
    seen = list(perm)
    for i in range(len(seen)):
        while seen[i] != i:
            j = seen[i]
            seen[i], seen[j] = seen[j], seen[i]
            sign = -sign
    return sign


def crum_potential(seed_functions: Sequence[MatrixField], p: BqParams,
                   w0: MatrixField | None = None) -> MatrixField:
    """n-fold dressing in one step: ``w0 + 2 a2 (ln W)_xx + n a1'``."""
    n = len(seed_functions)
    w = dress_potential(wronskian(seed_functions), p)
    w = w + mul(float(n - 1), deriv_x(p.a1))
    return w if w0 is None else w + w0
