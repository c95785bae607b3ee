"""Polynomials in d/dx with matrix-field coefficients, and compatibility residuals."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ShapeError
from .field import (
    ExpSum,
    MatrixField,
    add,
    as_field,
    deriv_t,
    deriv_x,
    deriv_y,
    mul,
    zeros,
)


class DiffOperator:
    """``L = sum_k a_k d^k`` with ``coeffs = [a_0, ..., a_n]``.

    Numbers are accepted as coefficients and read as multiples of the
    identity. ``L(psi)`` applies the operator, ``L @ M`` composes.
    """

    def __init__(self, coeffs: Sequence, dim: int | None = None):
        if not coeffs:
            raise ShapeError("an operator needs at least one coefficient")
        if dim is None:
            dims = {c.dim for c in coeffs if isinstance(c, MatrixField)}
            if len(dims) > 1:
                raise ShapeError(f"coefficients have mixed dims {sorted(dims)}")
            dim = dims.pop() if dims else 1
        self.coeffs = tuple(as_field(c, dim) for c in coeffs)
        self.dim = dim

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def __repr__(self):
        return f"DiffOperator(degree={self.degree}, dim={self.dim})"

    def __call__(self, psi: MatrixField) -> MatrixField:
        return apply(self, psi)

    def __matmul__(self, other: "DiffOperator") -> "DiffOperator":
        return compose(self, other)

    def __add__(self, other: "DiffOperator") -> "DiffOperator":
        n = max(len(self.coeffs), len(other.coeffs))
        a = self.coeffs + (zeros(self.dim),) * (n - len(self.coeffs))
        b = other.coeffs + (zeros(self.dim),) * (n - len(other.coeffs))
        return DiffOperator([add(p, q) for p, q in zip(a, b)], self.dim)

    def __neg__(self) -> "DiffOperator":
        return DiffOperator([mul(-1.0, c) for c in self.coeffs], self.dim)

    def __sub__(self, other: "DiffOperator") -> "DiffOperator":
        return self + (-other)

    def trimmed(self) -> "DiffOperator":
        """Drop leading coefficients that are structurally zero."""
        coeffs = list(self.coeffs)
        while len(coeffs) > 1 and coeffs[-1].is_zero:
            coeffs.pop()
        return DiffOperator(coeffs, self.dim)

    def coefficient_norms(self, x, t=0.0, y=0.0) -> list[float]:
        return [float(np.max(np.abs(c(x, t, y)))) for c in self.coeffs]

    def to_json(self, **kwargs) -> str:
        """JSON list of ExpSum coefficient documents, lowest order first."""
        docs = []
        for c in self.coeffs:
            if not isinstance(c, ExpSum):
                raise TypeError("only operators with ExpSum coefficients serialize")
            docs.append(c.to_dict())
        return json.dumps(docs, **kwargs)

    @classmethod
    def from_json(cls, text: str) -> "DiffOperator":
        return cls([ExpSum.from_dict(d) for d in json.loads(text)])


def multiplication(b) -> DiffOperator:
    """Zeroth-order operator ``psi -> b psi``."""
    return DiffOperator([b])


def d(dim: int = 1) -> DiffOperator:
    """The bare derivative ``d/dx``."""
    return DiffOperator([0.0, 1.0], dim)


def apply(L: DiffOperator, psi: MatrixField) -> MatrixField:
    if psi.dim != L.dim:
        raise ShapeError(f"operator dim {L.dim} vs operand dim {psi.dim}")
    out = zeros(L.dim)
    for k, a in enumerate(L.coeffs):
        out = add(out, mul(a, deriv_x(psi, k)))
    return out


def compose(L: DiffOperator, M: DiffOperator) -> DiffOperator:
    """``L o M`` via ``d^i b = sum_l C(i,l) b^(l) d^(i-l)``."""
    if L.dim != M.dim:
        raise ShapeError(f"operator dims differ: {L.dim} vs {M.dim}")
    out = [zeros(L.dim) for _ in range(L.degree + M.degree + 1)]
    for i, a in enumerate(L.coeffs):
        if a.is_zero:
            continue
        for j, b in enumerate(M.coeffs):
            if b.is_zero:
                continue
            for l in range(i + 1):
                term = mul(a, deriv_x(b, l))
                out[i + j - l] = add(out[i + j - l], mul(float(math.comb(i, l)), term))
    return DiffOperator(out, L.dim)


def commutator_op(L: DiffOperator, M: DiffOperator) -> DiffOperator:
    if L is M:
        return DiffOperator([zeros(L.dim)], L.dim)
    return (compose(L, M) - compose(M, L)).trimmed()


def lax_compat_residual(L: DiffOperator, A: DiffOperator) -> list[MatrixField]:
    """Five residuals of ``L_t = [A, L]`` for degree-3 ``L`` and degree-2 ``A``.

    Written in the commutative-coefficient form, one per power of d from
    four down to zero; all vanish iff the pair is compatible.
    """
    if L.degree != 3 or A.degree != 2:
        raise ShapeError(f"need deg L = 3 and deg A = 2, got {L.degree} and {A.degree}")
    b0, b1, b2, b3 = L.coeffs
    a0, a1, a2 = A.coeffs
    D = deriv_x

    def lin(*terms):
        out = zeros(L.dim)
        for c, f, g in terms:
            out = add(out, mul(float(c), mul(f, g)))
        return out

    r4 = lin((2, a2, D(b3)), (-3, b3, D(a2)))
    r3 = deriv_t(b3) - lin(
        (1, a2, D(b3, 2)), (2, a2, D(b2)), (1, a1, D(b3)),
        (-3, b3, D(a2, 2)), (-3, b3, D(a1)), (-2, b2, D(a2)),
    )
    r2 = deriv_t(b2) - lin(
        (1, a2, D(b2, 2)), (2, a2, D(b1)), (1, a1, D(b2)), (-1, b3, D(a2, 3)),
        (-1, b2, D(a2, 2)), (-1, b1, D(a2)), (-3, b3, D(a1, 2)), (-2, b2, D(a1)),
        (-3, b3, D(a0)),
    )
    r1 = deriv_t(b1) - lin(
        (1, a2, D(b1, 2)), (1, a1, D(b1)), (-1, b3, D(a1, 3)), (-1, b2, D(a1, 2)),
        (-1, b1, D(a1)), (-3, b3, D(a0, 2)), (-2, b2, D(a0)), (2, a2, D(b0)),
    )
    r0 = deriv_t(b0) - lin(
        (1, a1, D(b0)), (-1, b1, D(a0)), (1, a2, D(b0, 2)), (-1, b2, D(a0, 2)),
        (-1, b3, D(a0, 3)),
    )
    return [r4, r3, r2, r1, r0]


@dataclass(frozen=True)
class ZSPair:
    """First-order pair ``psi_t = (a0 + a1 D) psi``, ``psi_y = (b0 + b1 D) psi``."""

    a0: MatrixField
    a1: MatrixField
    b0: MatrixField
    b1: MatrixField

    def __post_init__(self):
        dims = {f.dim for f in (self.a0, self.a1, self.b0, self.b1)}
        if len(dims) != 1:
            raise ShapeError(f"ZS pair coefficients have mixed dims {sorted(dims)}")


def _comm(f, g):
    return mul(f, g) - mul(g, f)


def zs_compat_residual(p: ZSPair) -> tuple[MatrixField, MatrixField, MatrixField]:
    """Coefficients of d^2, d^1, d^0 in ``A_y - B_t + [A, B]``."""
    D = deriv_x
    r1 = _comm(p.b1, p.a1)
    r2 = (deriv_y(p.a1) - deriv_t(p.b1) + _comm(p.a0, p.b1) + _comm(p.a1, p.b0)
          + mul(p.a1, D(p.b1)) - mul(p.b1, D(p.a1)))
    r3 = (deriv_y(p.a0) - deriv_t(p.b0) + _comm(p.a0, p.b0)
          + mul(p.a1, D(p.b0)) - mul(p.b1, D(p.a0)))
    return r1, r2, r3
