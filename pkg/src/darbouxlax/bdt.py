"""Binary Darboux transformation for the density-matrix Lax pair.

Row solutions obey ``z <chi| = <chi|(rho - nu H)`` and ``chi_t = (i/nu) chi h(rho)``;
column solutions obey ``(rho - mu H)|phi> = z |phi>`` and ``phi_t = -(i/mu) h(rho) phi``.
Both are compatible with the flow ``rho_t = -i [H, h(rho)]``. Dressing with the
projector ``P = |phi><chi| / <chi|phi>`` maps a third row solution ``<psi|`` at
``lam`` to ``<psi|(1 + c P)`` with ``c = (nu - mu)/(mu - lam)``, and
``rho -> T rho T^-1`` with ``T = 1 + ((mu - nu)/nu) P``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
import scipy.linalg as sla

from .errors import DegeneracyError, DomainError, ShapeError
from .field import fd_weights

Matrix = np.ndarray


class MatrixFunction:
    """``h`` applied to a matrix: a polynomial, the inverse, or ``XA + AX``."""

    def __init__(self, fn: Callable[[Matrix], Matrix], kind: str, label: str):
        self._fn = fn
        self.kind = kind
        self.label = label

    def __call__(self, X: Matrix) -> Matrix:
        return self._fn(np.asarray(X, dtype=complex))

    def __repr__(self):
        return f"MatrixFunction({self.label})"

    @property
    def is_spectral(self) -> bool:
        """True when ``h(X)`` is a function of ``X`` alone, hence commutes with it."""
        return self.kind != "sandwich"

    @classmethod
    def polynomial(cls, coeffs: Sequence[complex]) -> "MatrixFunction":
        """``sum_k coeffs[k] X^k`` evaluated by Horner's rule."""
        coeffs = [complex(c) for c in coeffs]
        if not coeffs:
            raise ValueError("polynomial needs at least one coefficient")

        def fn(X):
            out = coeffs[-1] * np.eye(len(X), dtype=complex)
            for c in reversed(coeffs[:-1]):
                out = out @ X + c * np.eye(len(X))
            return out

        return cls(fn, "polynomial", "poly" + str([c.real if c.imag == 0 else c for c in coeffs]))

    @classmethod
    def inverse(cls) -> "MatrixFunction":
        return cls(np.linalg.inv, "inverse", "inverse")

    @classmethod
    def sandwich(cls, A: Matrix) -> "MatrixFunction":
        """``XA + AX``; does not commute with ``X`` unless ``[A, X] = 0``."""
        A = np.asarray(A, dtype=complex)
        return cls(lambda X: X @ A + A @ X, "sandwich", "XA+AX")


def _comm(a, b):
    return a @ b - b @ a


def left_eigvec(A: Matrix, index: int = 0) -> tuple[complex, np.ndarray]:
    """Eigenvalue ``z`` and row vector ``v`` with ``v A = z v``, eigenvalues sorted."""
    w, vl = sla.eig(A, left=True, right=False)
    order = np.lexsort((w.imag, w.real))
    _check_eigvecs(vl, w)
    k = order[index]
    return complex(w[k]), vl[:, k].conj()


def right_eigvec(A: Matrix, index: int = 0) -> tuple[complex, np.ndarray]:
    """Eigenvalue ``z`` and column vector ``v`` with ``A v = z v``, eigenvalues sorted."""
    w, vr = sla.eig(A)
    order = np.lexsort((w.imag, w.real))
    _check_eigvecs(vr, w)
    k = order[index]
    return complex(w[k]), vr[:, k]


def _check_eigvecs(V, w, cond_limit=1e10):
    if not np.isfinite(np.linalg.cond(V)) or np.linalg.cond(V) > cond_limit:
        raise DegeneracyError(f"defective matrix: eigenvector basis is singular (eigenvalues {w})")


@dataclass(frozen=True)
class BdtScene:
    rho0: Matrix
    H: Matrix
    h: MatrixFunction
    lam: complex
    mu: complex
    nu: complex
    chi_index: int = 0
    phi_index: int = 0
    psi_index: int = 0

    def __post_init__(self):
        rho0 = np.asarray(self.rho0, dtype=complex)
        H = np.asarray(self.H, dtype=complex)
        if rho0.ndim != 2 or rho0.shape[0] != rho0.shape[1] or H.shape != rho0.shape:
            raise ShapeError(f"rho0 {rho0.shape} and H {H.shape} must be equal square matrices")
        object.__setattr__(self, "rho0", rho0)
        object.__setattr__(self, "H", H)
        for name in ("lam", "mu", "nu"):
            if getattr(self, name) == 0:
                raise DomainError(f"spectral parameter {name} must be non-zero")
        if self.lam == self.mu or self.lam == self.nu:
            raise DomainError("lam must differ from mu and nu")
        if self.h.is_spectral:
            hr = self.h(rho0)
            err = np.abs(_comm(hr, rho0)).max()
            if err > 1e-12 * max(1.0, np.abs(hr).max() * np.abs(rho0).max()):
                raise DomainError(f"h(rho) does not commute with rho ({err:.3g})")

    @property
    def dim(self) -> int:
        return len(self.rho0)


def projector(phi, chi) -> Matrix:
    """``P = |phi> <chi|phi>^-1 <chi|``."""
    phi = np.asarray(phi, dtype=complex).ravel()
    chi = np.asarray(chi, dtype=complex).ravel()
    if phi.shape != chi.shape:
        raise ShapeError(f"vector lengths differ: {phi.shape} vs {chi.shape}")
    pairing = chi @ phi
    if abs(pairing) <= 1e-14 * np.linalg.norm(phi) * np.linalg.norm(chi):
        raise DegeneracyError("<chi|phi> vanishes; projector undefined")
    return np.outer(phi, chi) / pairing


@dataclass(frozen=True)
class ProjectorDressing:
    P: Matrix
    T: Matrix
    T_inv: Matrix
    c: complex

    @classmethod
    def build(cls, phi, chi, lam, mu, nu) -> "ProjectorDressing":
        P = projector(phi, chi)
        eye = np.eye(len(P))
        return cls(P, eye + (mu - nu) / nu * P, eye + (nu - mu) / mu * P, (nu - mu) / (mu - lam))

    def idempotence_error(self) -> float:
        return float(np.abs(self.P @ self.P - self.P).max())

    def inverse_error(self) -> float:
        return float(np.abs(self.T @ self.T_inv - np.eye(len(self.T))).max())


@dataclass
class BdtTrajectory:
    scene: BdtScene
    ts: np.ndarray
    rho: np.ndarray  # (N, m, m)
    chi: np.ndarray  # (N, m) row solutions at nu
    phi: np.ndarray  # (N, m) column solutions at mu
    psi: np.ndarray  # (N, m) row solutions at lam
    z_nu: complex
    z_mu: complex
    z_lam: complex

    def index_of(self, t: float) -> int:
        i = int(round((t - self.ts[0]) / (self.ts[1] - self.ts[0])))
        if i < 0 or i >= len(self.ts) or abs(self.ts[i] - t) > 1e-9 * max(1.0, abs(t)):
            raise DomainError(f"t={t} is not a trajectory sample")
        return i


def initial_data(scene: BdtScene):
    """Eigen-initialization: ``chi`` left of ``rho0 - nu H``, ``phi`` right of ``rho0 - mu H``,
    ``psi`` left of ``rho0 - lam H``."""
    z_nu, chi = left_eigvec(scene.rho0 - scene.nu * scene.H, scene.chi_index)
    z_mu, phi = right_eigvec(scene.rho0 - scene.mu * scene.H, scene.phi_index)
    z_lam, psi = left_eigvec(scene.rho0 - scene.lam * scene.H, scene.psi_index)
    return (z_nu, chi), (z_mu, phi), (z_lam, psi)


def flow_integrate(scene: BdtScene, t_end: float, h_step: float) -> BdtTrajectory:
    """RK4 co-integration of ``rho``, ``chi``, ``phi``, ``psi`` with a fixed step."""
    if not h_step > 0 or not t_end > 0:
        raise DomainError("t_end and h_step must be positive")
    n = int(round(t_end / h_step))
    if abs(n * h_step - t_end) > 1e-9 * t_end:
        raise DomainError("t_end must be a multiple of h_step")
    (z_nu, chi), (z_mu, phi), (z_lam, psi) = initial_data(scene)
    H, h = scene.H, scene.h
    lam, mu, nu = scene.lam, scene.mu, scene.nu

    def rhs(state):
        r, c, p, q = state
        hr = h(r)
        return (-1j * _comm(H, hr), (1j / nu) * (c @ hr), (-1j / mu) * (hr @ p), (1j / lam) * (q @ hr))

    state = (scene.rho0.copy(), chi, phi, psi)
    out = [state]
    for _ in range(n):
        k1 = rhs(state)
        k2 = rhs(tuple(a + 0.5 * h_step * b for a, b in zip(state, k1)))
        k3 = rhs(tuple(a + 0.5 * h_step * b for a, b in zip(state, k2)))
        k4 = rhs(tuple(a + h_step * b for a, b in zip(state, k3)))
        state = tuple(a + h_step / 6.0 * (b + 2 * c + 2 * d + e)
                      for a, b, c, d, e in zip(state, k1, k2, k3, k4))
        out.append(state)
    rho, chi_t, phi_t, psi_t = (np.stack(arr) for arr in zip(*out))
    return BdtTrajectory(scene, h_step * np.arange(n + 1), rho, chi_t, phi_t, psi_t, z_nu, z_mu, z_lam)


@dataclass(frozen=True)
class Dressed:
    psi1: np.ndarray
    rho1: Matrix
    h1: Matrix
    dressing: ProjectorDressing


def dress_index(traj: BdtTrajectory, i: int) -> Dressed:
    s = traj.scene
    try:
        D = ProjectorDressing.build(traj.phi[i], traj.chi[i], s.lam, s.mu, s.nu)
    except DegeneracyError as exc:
        raise DegeneracyError(f"{exc} at t={traj.ts[i]:.6g}") from None
    psi1 = traj.psi[i] @ (np.eye(s.dim) + D.c * D.P)
    rho1 = D.T @ traj.rho[i] @ D.T_inv
    h1 = D.T @ s.h(traj.rho[i]) @ D.T_inv
    return Dressed(psi1, rho1, h1, D)


def dress(scene: BdtScene, traj: BdtTrajectory, t: float) -> Dressed:
    """``psi1 = psi (1 + c P)``, ``rho1 = T rho T^-1``, ``h1 = T h(rho) T^-1`` at sample time ``t``."""
    if traj.scene is not scene:
        raise ValueError("trajectory was integrated for a different scene")
    return dress_index(traj, traj.index_of(t))


def persistence(traj: BdtTrajectory) -> dict[str, np.ndarray]:
    """Spectral relations of the three solutions at every sample."""
    s = traj.scene
    H = s.H
    r = traj.rho
    return {
        "chi": np.linalg.norm(traj.z_nu * traj.chi - np.einsum("ni,nij->nj", traj.chi, r - s.nu * H), axis=1),
        "phi": np.linalg.norm(traj.z_mu * traj.phi - np.einsum("nij,nj->ni", r - s.mu * H, traj.phi), axis=1),
        "psi": np.linalg.norm(traj.z_lam * traj.psi - np.einsum("ni,nij->nj", traj.psi, r - s.lam * H), axis=1),
    }


def isospectral_drift(traj: BdtTrajectory) -> float:
    """Max drift of ``tr rho^k``, ``k = 1..m``."""
    m = traj.scene.dim
    base = None
    worst = 0.0
    for r in traj.rho:
        p = np.eye(m)
        tr = []
        for _ in range(m):
            p = p @ r
            tr.append(np.trace(p))
        tr = np.array(tr)
        base = tr if base is None else base
        worst = max(worst, float(np.abs(tr - base).max()))
    return worst


def _fd4(values: np.ndarray, i: int, dt: float) -> np.ndarray:
    w = fd_weights([-2, -1, 0, 1, 2], 1) / dt
    return sum(wk * values[i + k - 2] for k, wk in enumerate(w))


def dressed_residuals(traj: BdtTrajectory) -> dict[str, np.ndarray]:
    """Per-sample checks on interior samples (the time derivative needs two neighbours).

    * ``spectral``: ``|z_lam psi1 - psi1 (rho1 - lam H)|``
    * ``evolution``: ``|-i psi1_t - (1/lam) psi1 h1|`` with a 4th-order difference
    * ``idempotence``, ``inverse``: ``P^2 - P`` and ``T T^-1 - 1`` from the closed-form inverse
    * ``h_conjugation``: ``T h(rho) T^-1 - h(rho1)``
    * ``pairing_rate``: ``d/dt <chi|phi> - i (1/nu - 1/mu) <chi|h|phi>``
    """
    s = traj.scene
    dt = traj.ts[1] - traj.ts[0]
    dressed = [dress_index(traj, i) for i in range(len(traj.ts))]
    psi1 = np.stack([d.psi1 for d in dressed])
    pairing = np.einsum("ni,ni->n", traj.chi, traj.phi)
    rows = {k: [] for k in ("spectral", "evolution", "idempotence", "inverse", "h_conjugation", "pairing_rate")}
    for i in range(2, len(traj.ts) - 2):
        d = dressed[i]
        rows["spectral"].append(np.linalg.norm(traj.z_lam * d.psi1 - d.psi1 @ (d.rho1 - s.lam * s.H)))
        rows["evolution"].append(np.linalg.norm(-1j * _fd4(psi1, i, dt) - d.psi1 @ d.h1 / s.lam))
        rows["idempotence"].append(d.dressing.idempotence_error())
        rows["inverse"].append(d.dressing.inverse_error())
        rows["h_conjugation"].append(float(np.abs(d.h1 - s.h(d.rho1)).max()))
        rate = 1j * (1 / s.nu - 1 / s.mu) * (traj.chi[i] @ s.h(traj.rho[i]) @ traj.phi[i])
        rows["pairing_rate"].append(abs(_fd4(pairing, i, dt) - rate))
    return {k: np.asarray(v, dtype=float) for k, v in rows.items()}


def best_pairing_indices(rho0: Matrix, H: Matrix, mu: complex, nu: complex) -> tuple[int, int]:
    """Eigenvector indices ``(chi, phi)`` maximizing the normalized ``|<chi|phi>|``."""
    m = len(rho0)
    best, score = (0, 0), -1.0
    for i in range(m):
        _, chi = left_eigvec(rho0 - nu * H, i)
        for j in range(m):
            _, phi = right_eigvec(rho0 - mu * H, j)
            v = abs(chi @ phi) / (np.linalg.norm(chi) * np.linalg.norm(phi))
            if v > score:
                best, score = (i, j), v
    return best


def random_scene(rng: np.random.Generator, dim: int = 3, h: MatrixFunction | None = None,
                 lam: complex = 0.7, mu: complex = 1.3, nu: complex = -0.9) -> BdtScene:
    """Random Hermitian ``rho0`` and ``H`` of unit spectral norm.

    The dressing eigenvectors are the pair with the best-conditioned
    ``<chi|phi>``, which keeps the projector away from its pole.
    """
    def herm():
        a = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
        a = (a + a.conj().T) / 2
        return a / np.linalg.norm(a, 2)
    h = MatrixFunction.polynomial([0, 0, 1]) if h is None else h
    rho0, H = herm(), herm()
    i, j = best_pairing_indices(rho0, H, mu, nu)
    return BdtScene(rho0, H, h, lam, mu, nu, chi_index=i, phi_index=j)
