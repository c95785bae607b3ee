"""Classic Darboux transformation, differential Bell polynomials and the Miura identity.

With ``sigma = phi_x phi^-1`` the Bell polynomials satisfy ``d^n phi = B_n phi``
and are generated by ``B_{n+1} = B_n' + B_n sigma`` (coefficient acting from
the left). ``r = sum a_n B_n`` then obeys ``sigma_t = r' + [r, sigma]``
whenever ``phi_t = L phi``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .diffop import DiffOperator
from .errors import DegeneracyError
from .field import ExpSum, MatrixField, add, as_field, commutator, deriv_t, deriv_x, identity, inverse, mul, zeros


@dataclass(frozen=True)
class DressingSigma:
    """``sigma = phi_x phi^-1`` together with the wavefunction it came from."""

    sigma: MatrixField
    source: MatrixField | None = None

    @property
    def dim(self) -> int:
        return self.sigma.dim


def sigma_from(phi: MatrixField) -> DressingSigma:
    """Build ``sigma = phi_x phi^-1``.

    Singular ``phi`` is detected lazily: evaluating sigma at a point where
    ``phi`` is not invertible raises :class:`SingularityError` naming it.
    """
    return DressingSigma(mul(deriv_x(phi), inverse(phi)), phi)


def dt_wavefunction(psi: MatrixField, s: DressingSigma) -> MatrixField:
    """``psi[1] = psi' - sigma psi``; exactly zero when ``psi`` is the dressing function."""
    if psi is s.source:
        return zeros(psi.dim)
    return deriv_x(psi) - mul(s.sigma, psi)


def bell_polys(s: DressingSigma, n: int) -> list[MatrixField]:
    """``[B_0, ..., B_n]`` for the given sigma."""
    if n < 0:
        raise ValueError("n must be non-negative")
    out = [identity(s.dim)]
    for _ in range(n):
        b = out[-1]
        out.append(add(deriv_x(b), mul(b, s.sigma)))
    return out


def bell_poly(s: DressingSigma, n: int) -> MatrixField:
    return bell_polys(s, n)[-1]


def miura_r(L: DiffOperator, s: DressingSigma) -> MatrixField:
    """``r = sum_k a_k B_k(sigma)``."""
    bells = bell_polys(s, L.degree)
    r = mul(L.coeffs[0], bells[0])
    for a, b in zip(L.coeffs[1:], bells[1:]):
        r = add(r, mul(a, b))
    return r


def miura_residual(L: DiffOperator, phi: MatrixField) -> MatrixField:
    """``sigma_t - r' - [r, sigma]``; vanishes iff ``phi_t = L phi``."""
    s = sigma_from(phi)
    r = miura_r(L, s)
    return deriv_t(s.sigma) - deriv_x(r) - commutator(r, s.sigma)


def transform_coeffs_order3(b0, b1, b2, b3, s: DressingSigma):
    """DT images of third-order coefficients, returned as ``(b0, b1, b2, b3)``.

    ``b0[1] = b0 + b1' + sigma b2' + 3 b3 (sigma sigma' + sigma'')``; the
    product ordering is the commutative one, so for matrix data the result is
    only covariant when ``sigma`` commutes with its derivative.
    """
    dim = s.dim
    b0, b1, b2, b3 = (as_field(c, dim) for c in (b0, b1, b2, b3))
    sg = s.sigma
    sg1 = deriv_x(sg)
    b2n = b2 + deriv_x(b3)
    b1n = b1 + deriv_x(b2) + 3.0 * mul(b3, sg1)
    b0n = (b0 + deriv_x(b1) + mul(sg, deriv_x(b2))
           + 3.0 * mul(b3, mul(sg, sg1) + deriv_x(sg, 2)))
    return b0n, b1n, b2n, b3


def transform_coeffs_order2(a0, a1, a2, s: DressingSigma):
    """DT images ``(a0, a1, a2)`` of a second-order evolution operator.

    ``a0[1] = a0 + a1' + 2 a2 sigma' + sigma a2'``, ``a1[1] = a1 + a2'``.
    """
    dim = s.dim
    a0, a1, a2 = (as_field(c, dim) for c in (a0, a1, a2))
    sg = s.sigma
    a2p = deriv_x(a2)
    a0n = a0 + deriv_x(a1) + 2.0 * mul(a2, deriv_x(sg)) + mul(sg, a2p)
    return a0n, a1 + a2p, a2


def transformed_operator(L: DiffOperator, s: DressingSigma) -> DiffOperator:
    """Apply the order-2 or order-3 coefficient rules to a whole operator."""
    if L.degree == 2:
        return DiffOperator(list(transform_coeffs_order2(*L.coeffs, s)), L.dim)
    if L.degree == 3:
        return DiffOperator(list(transform_coeffs_order3(*L.coeffs, s)), L.dim)
    raise ValueError(f"coefficient rules exist for degrees 2 and 3, not {L.degree}")


def constant_coeff_solution(coeffs, ks, amplitudes) -> ExpSum:
    """Exact exp-sum solution of ``psi_t = L psi`` for constant matrix coefficients.

    ``L = sum_n coeffs[n] d^n``. Each column block ``e^{kx} e^{M(k) t} B`` with
    ``M(k) = sum_n coeffs[n] k^n`` is expanded over the eigenbasis of ``M(k)``,
    so ``M(k)`` must be diagonalizable.
    """
    coeffs = [np.atleast_2d(np.asarray(c, dtype=complex)) for c in coeffs]
    m = max(c.shape[0] for c in coeffs)
    coeffs = [c * np.eye(m) if c.shape == (1, 1) else c for c in coeffs]
    terms = []
    for k, B in zip(ks, amplitudes):
        B = np.asarray(B, dtype=complex).reshape(m, m)
        M = sum(c * k**n for n, c in enumerate(coeffs))
        mu, V = np.linalg.eig(M)
        if np.linalg.cond(V) > 1e10:
            raise DegeneracyError(f"M(k) is not diagonalizable at k={k}")
        Vinv_B = np.linalg.solve(V, B)
        for i in range(m):
            terms.append((np.outer(V[:, i], Vinv_B[i]), k, mu[i]))
    return ExpSum(m, terms)
