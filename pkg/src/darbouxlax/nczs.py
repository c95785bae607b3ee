"""Non-Abelian Zakharov-Shabat covariance for matrix (point) potentials.

Spectral/evolution pair ``psi_t = (J' + u D) psi``, ``psi_y = (Y + F(u) D) psi``
with ``u -> u + [J, sigma]`` under the DT. Joint covariance asks that the same
``F`` survive: ``F(u) + [Y, sigma] = F(u + [J, sigma])``.
"""
from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .diffop import ZSPair
from .errors import ShapeError
from .field import GridField, constant

Matrix = np.ndarray


def _mats(*ms) -> list[Matrix]:
    out = [np.asarray(m, dtype=complex) for m in ms]
    shape = out[0].shape
    if len(shape) != 2 or shape[0] != shape[1]:
        raise ShapeError(f"expected square matrices, got shape {shape}")
    for m in out[1:]:
        if m.shape != shape:
            raise ShapeError(f"shape mismatch: {shape} vs {m.shape}")
    return out


def comm(a: Matrix, b: Matrix) -> Matrix:
    return a @ b - b @ a


def anticomm(a: Matrix, b: Matrix) -> Matrix:
    return a @ b + b @ a


def sym_poly(H, u, n: int) -> Matrix:
    """``P_n(H, u) = sum_{p=0}^{n} H^{n-p} u H^p``."""
    H, u = _mats(H, u)
    if n < 1:
        raise ValueError("n must be a positive integer")
    powers = [np.eye(len(H), dtype=complex)]
    for _ in range(n):
        powers.append(powers[-1] @ H)
    return sum(powers[n - p] @ u @ powers[p] for p in range(n + 1))


@dataclass(frozen=True)
class CovariantModel:
    """``F`` together with the pair's ``J`` and ``Y``.

    ``weights[n-1]`` multiplies ``P_n(H, u)``; ``Hu + uH`` is ``weights=[1]``.
    """

    H: Matrix
    J: Matrix
    Y: Matrix
    weights: tuple = (1.0,)

    def F(self, u) -> Matrix:
        (u,) = _mats(u)
        return sum(b * sym_poly(self.H, u, n) for n, b in enumerate(self.weights, start=1) if b != 0)

    @classmethod
    def linear_pair(cls, H) -> "CovariantModel":
        """``F(u) = Hu + uH`` with ``Y = H^2``, ``J = H``."""
        return cls.sym_poly(H, 1)

    @classmethod
    def sym_poly(cls, H, n: int, Y=None) -> "CovariantModel":
        """``F = P_n(H, .)``; ``Y`` defaults to the covariant ``H^{n+1}``."""
        (H,) = _mats(H)
        Y = np.linalg.matrix_power(H, n + 1) if Y is None else _mats(Y, H)[0]
        return cls(H, H, Y, tuple([0.0] * (n - 1) + [1.0]))

    @classmethod
    def combination(cls, H, beta: Sequence[complex], Y=None) -> "CovariantModel":
        """``F = sum beta_n P_n``; ``Y`` defaults to ``sum beta_n H^{n+1}``."""
        (H,) = _mats(H)
        if Y is None:
            Y = sum(b * np.linalg.matrix_power(H, n + 1) for n, b in enumerate(beta, start=1))
        return cls(H, H, _mats(Y, H)[0], tuple(complex(b) for b in beta))

    @classmethod
    def comb_example(cls, H, alpha: complex, beta: complex) -> "CovariantModel":
        """``f = Hu + uH + S^2 u + S u S + u S^2`` with ``S = beta H`` and ``Y = H^2 + alpha^3 H^3``.

        Covariant exactly when ``alpha^3 = beta^2``.
        """
        (H,) = _mats(H)
        Y = H @ H + alpha**3 * (H @ H @ H)
        return cls(H, H, Y, (1.0, beta**2))


def covariance_residual(model: CovariantModel, u, sigma) -> Matrix:
    """``F(u) + [Y, sigma] - F(u + [J, sigma])``."""
    u, sigma = _mats(u, sigma)
    _mats(u, model.H)
    return model.F(u) + comm(model.Y, sigma) - model.F(u + comm(model.J, sigma))


def relative_covariance_residual(model: CovariantModel, u, sigma) -> float:
    """Max-entry residual divided by the size of the terms that should cancel."""
    r = covariance_residual(model, u, sigma)
    scale = max(np.abs(model.F(u)).max(), np.abs(comm(model.Y, sigma)).max(),
                np.abs(model.F(u + comm(model.J, sigma))).max(), np.finfo(float).tiny)
    return float(np.abs(r).max() / scale)


def random_complex(rng: np.random.Generator, dim: int) -> Matrix:
    return rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))


def random_hermitian(rng: np.random.Generator, dim: int) -> Matrix:
    a = random_complex(rng, dim)
    return (a + a.conj().T) / 2


@dataclass
class ComboReport:
    trials: int
    max_relative: float
    comb_example: float
    tol: float

    @property
    def passed(self) -> bool:
        return self.max_relative <= self.tol and self.comb_example <= self.tol


def combo_covariance_check(beta: Sequence[complex], H, trials: int = 100,
                           rng: np.random.Generator | None = None, tol: float = 1e-12,
                           alpha: complex = 1.0, comb_beta: complex = 1.0) -> ComboReport:
    """Random-trial covariance of ``sum beta_n P_n`` plus the two-term worked example."""
    rng = np.random.default_rng(0) if rng is None else rng
    (H,) = _mats(H)
    m = len(H)
    model = CovariantModel.combination(H, beta)
    example = CovariantModel.comb_example(H, alpha, comb_beta)
    worst = worst_ex = 0.0
    for _ in range(trials):
        u, s = random_complex(rng, m), random_complex(rng, m)
        worst = max(worst, relative_covariance_residual(model, u, s))
        worst_ex = max(worst_ex, relative_covariance_residual(example, u, s))
    return ComboReport(trials, worst, worst_ex, tol)


# -- compatibility constraints for F = Hu + uH --------------------------------


def constraint_residuals(u, H, J, u_x, u_t, u_y) -> list[Matrix]:
    """Residuals of the pair's compatibility conditions for ``Y = H^2``.

    Returns ``[row2, eq_row1, gman]``:

    * ``row2 = [J,u]H + {u, [J,H]} + [u,H]J`` (general ``J``, ``H``),
    * ``eq_row1 = [J,u]H + [u,H]J`` (the ``[H,J] = 0`` reduction),
    * ``gman = u_y - {H,u}_t + [u^2,H] + JHu_x + Ju_xH + HJu_x``.
    """
    u, H, J, u_x, u_t, u_y = _mats(u, H, J, u_x, u_t, u_y)
    row2 = comm(J, u) @ H + anticomm(u, comm(J, H)) + comm(u, H) @ J
    eq1 = comm(J, u) @ H + comm(u, H) @ J
    gman = (u_y - anticomm(H, u_t) + comm(u @ u, H)
            + J @ H @ u_x + J @ u_x @ H + H @ J @ u_x)
    return [row2, eq1, gman]


def kk_row3_uncollapsed(u, H, J, u_x, u_t, u_y) -> Matrix:
    """Third compatibility row with ``[u,H]u + u[u,H]`` left unexpanded."""
    u, H, J, u_x, u_t, u_y = _mats(u, H, J, u_x, u_t, u_y)
    return (u_y - H @ u_t - u_t @ H + comm(u, H) @ u + u @ comm(u, H)
            + J @ H @ u_x + J @ u_x @ H + H @ J @ u_x)


def gman2_variants(u, J, u_x, u_y) -> dict[str, Matrix]:
    """t-independent reduction at ``H = J``, in two readings of the ``u_x`` terms.

    ``"repeated"`` keeps ``J^2 u_x`` twice (what ``H = J`` gives literally);
    ``"symmetric"`` uses ``P_2(J, u_x) = J^2 u_x + J u_x J + u_x J^2``.
    """
    u, J, u_x, u_y = _mats(u, J, u_x, u_y)
    base = u_y + comm(u @ u, J)
    return {
        "repeated": base + J @ J @ u_x + J @ u_x @ J + J @ J @ u_x,
        "symmetric": base + sym_poly(J, u_x, 2),
    }


def zs_dt_potential(u, J, sigma) -> Matrix:
    """``u + [J, sigma]``."""
    u, J, sigma = _mats(u, J, sigma)
    return u + comm(J, sigma)


# -- Euler / Manakov top -------------------------------------------------------


@dataclass
class TopState:
    u: Matrix
    J: Matrix
    y: float = 0.0
    traces: np.ndarray = dc_field(default=None, repr=False)

    def __post_init__(self):
        self.u, self.J = _mats(self.u, self.J)
        if self.traces is None:
            self.traces = trace_powers(self.u)


def trace_powers(u: Matrix) -> np.ndarray:
    """``[tr u, tr u^2, ..., tr u^m]``."""
    out, p = [], np.eye(len(u), dtype=complex)
    for _ in range(len(u)):
        p = p @ u
        out.append(np.trace(p))
    return np.array(out)


def euler_rhs(s: TopState) -> Matrix:
    """``du/dy = [J, u^2]``."""
    return _rhs(s.u, s.J)


def _rhs(u, J):
    return comm(J, u @ u)


def euler_integrate(s0: TopState, y_end: float, h: float) -> list[TopState]:
    """Classical RK4 with fixed step ``h`` (the last step is shortened to land on ``y_end``)."""
    if not h > 0:
        raise ValueError("step must be positive")
    if not y_end > s0.y:
        raise ValueError("y_end must exceed the initial y")
    n = int(np.ceil((y_end - s0.y) / h - 1e-9))
    ys = s0.y + h * np.arange(n + 1, dtype=float)
    ys[-1] = y_end
    J, u = s0.J, s0.u
    traj = [s0]
    for i in range(n):
        dy = ys[i + 1] - ys[i]
        k1 = _rhs(u, J)
        k2 = _rhs(u + 0.5 * dy * k1, J)
        k3 = _rhs(u + 0.5 * dy * k2, J)
        k4 = _rhs(u + dy * k3, J)
        u = u + dy / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        traj.append(TopState(u, J, float(ys[i + 1])))
    return traj


def trace_drift(traj: Sequence[TopState]) -> float:
    t0 = traj[0].traces
    return float(max(np.abs(s.traces - t0).max() for s in traj))


def eigenvalue_drift(traj: Sequence[TopState]) -> float:
    """Max change of the eigenvalues, matched to the initial ones by assignment."""
    e0 = np.linalg.eigvals(traj[0].u)
    worst = 0.0
    for s in traj:
        e = np.linalg.eigvals(s.u)
        cost = np.abs(e0[:, None] - e[None, :])
        rows, cols = linear_sum_assignment(cost)
        worst = max(worst, float(cost[rows, cols].max()))
    return worst


def top_pair(traj: Sequence[TopState]) -> ZSPair:
    """Manakov pair along a uniform trajectory: ``a1 = J``, ``a0 = u``, ``b1 = J^2``, ``b0 = Ju + uJ``.

    ``u`` becomes a grid field in ``y`` (independent of ``x``, ``t``); its
    ``y``-derivative is taken by finite differences, so the residual also
    measures the integrator's consistency.
    """
    ys = np.array([s.y for s in traj])
    J = traj[0].J
    us = np.stack([s.u for s in traj])[None, None]
    bs = np.stack([anticomm(J, s.u) for s in traj])[None, None]
    return ZSPair(
        a0=GridField(us, [0.0], [0.0], ys),
        a1=constant(J),
        b0=GridField(bs, [0.0], [0.0], ys),
        b1=constant(J @ J),
    )


# -- directional derivatives ---------------------------------------------------


def frechet_directional(F: Callable[[Matrix], Matrix], u, hdir, eps: float = 1e-6) -> Matrix:
    """One-sided difference ``(F(u + eps h) - F(u)) / eps``."""
    u, hdir = _mats(u, hdir)
    return (np.asarray(F(u + eps * hdir)) - np.asarray(F(u))) / eps


def classify_linear_map(F: Callable[[Matrix], Matrix], dim: int,
                        rng: np.random.Generator | None = None, tol: float = 1e-10) -> str:
    """Whether linear ``F`` acts as ``L h`` ("left"), ``h R`` ("right"), both, or neither.

    Candidates ``L``, ``R`` are read off basis directions and then tested on
    random ones. Returns one of ``"left"``, ``"right"``, ``"both"``, ``"two-sided"``.
    """
    rng = np.random.default_rng(0) if rng is None else rng
    E = np.zeros((dim, dim), dtype=complex)
    L = np.zeros((dim, dim), dtype=complex)
    R = np.zeros((dim, dim), dtype=complex)
    for i in range(dim):
        E[:] = 0
        E[i, 0] = 1.0
        L[:, i] = np.asarray(F(E.copy()))[:, 0]  # L E_i0 has column 0 equal to L[:, i]
        E[:] = 0
        E[0, i] = 1.0
        R[i, :] = np.asarray(F(E.copy()))[0, :]  # E_0i R has row 0 equal to R[i, :]
    left = right = True
    for _ in range(3):
        h = random_complex(rng, dim)
        Fh = np.asarray(F(h))
        scale = max(np.abs(Fh).max(), 1.0)
        left &= np.abs(Fh - L @ h).max() <= tol * scale
        right &= np.abs(Fh - h @ R).max() <= tol * scale
    if left and right:
        return "both"
    return "left" if left else "right" if right else "two-sided"
