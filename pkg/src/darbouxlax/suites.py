"""Named numerical checks, grouped into suites for the command line and tests."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import bdt, boussinesq as bq, nczs
from .darboux import (
    bell_polys,
    constant_coeff_solution,
    dt_wavefunction,
    miura_residual,
    sigma_from,
    transformed_operator,
)
from .diffop import DiffOperator, lax_compat_residual, zs_compat_residual
from .field import ExpSum, constant, deriv_t, deriv_x, mul, zeros


@dataclass(frozen=True)
class Check:
    """``kind`` is ``"le"`` (value <= tol), ``"ge"`` (value >= tol) or ``"report"``."""

    name: str
    value: float
    tol: float | None
    kind: str = "le"

    @property
    def passed(self) -> bool:
        if self.kind == "report":
            return True
        v = self.value
        if not math.isfinite(v):
            return False
        return v <= self.tol if self.kind == "le" else v >= self.tol

    def to_dict(self) -> dict:
        return {"name": self.name, "residual": self.value, "tolerance": self.tol,
                "comparison": self.kind, "passed": self.passed}


def _sup(f, X, T=0.0, Y=0.0) -> float:
    return float(np.max(np.abs(f(X, T, Y))))


def random_phi(rng: np.random.Generator, m: int) -> ExpSum:
    """Invertible random matrix exp-sum: identity-led term plus small perturbations."""
    terms = [(np.eye(m), rng.uniform(-1, 1), rng.uniform(-1, 1))]
    for _ in range(m + 1):
        C = rng.normal(size=(m, m)) + 1j * rng.normal(size=(m, m))
        C *= 0.25 / np.linalg.norm(C, 2) / (m + 1) / np.e
        terms.append((C, rng.uniform(-1, 1), rng.uniform(-1, 1)))
    return ExpSum(m, terms)


# -- darboux -------------------------------------------------------------------


def suite_dt(rng: np.random.Generator, tols: dict) -> list[Check]:
    x = np.linspace(-1.0, 1.0, 11)
    X, T = np.meshgrid(x, np.linspace(-1.0, 1.0, 5), indexing="ij")
    out = []
    for m in (1, 2, 3, 4):
        phi = random_phi(rng, m)
        bells = bell_polys(sigma_from(phi), 6)
        worst = max(_sup(deriv_x(phi, n) - mul(b, phi), X, T) for n, b in enumerate(bells))
        out.append(Check(f"dt.bell.dim{m}", worst, tols.get("bell", 1e-10)))

        cs = [0.5 * rng.normal(size=(m, m)) for _ in range(3)]
        ks = rng.uniform(-1, 1, size=m + 1)
        Bs = [np.eye(m)] + [0.2 / (m + 1) * rng.normal(size=(m, m)) for _ in range(m)]
        sol = constant_coeff_solution(cs, ks, Bs)
        L = DiffOperator([constant(c) for c in cs])
        Xh, Th = np.meshgrid(x, np.linspace(0.0, 0.5, 5), indexing="ij")
        out.append(Check(f"dt.miura.dim{m}", _sup(miura_residual(L, sol), Xh, Th), tols.get("miura", 1e-10)))

    # scalar collapse of B_3 on 10^3 points
    phi = random_phi(rng, 1)
    s = sigma_from(phi).sigma
    X3, T3 = np.meshgrid(np.linspace(-1, 1, 100), np.linspace(-1, 1, 10), indexing="ij")
    b3 = bell_polys(sigma_from(phi), 3)[3]
    closed = deriv_x(s, 2) + 3.0 * mul(s, deriv_x(s)) + mul(s, mul(s, s))
    out.append(Check("dt.abelian_b3", _sup(b3 - closed, X3, T3), tols.get("abelian", 1e-12)))

    # kernel: the dressing function itself is annihilated
    phi = random_phi(rng, 2)
    copy = ExpSum(2, phi.terms)
    out.append(Check("dt.kernel", _sup(dt_wavefunction(copy, sigma_from(phi)), X, T), tols.get("kernel", 1e-10)))

    # order-2 covariance with scalar a2, a1 and a matrix potential
    m = 2
    W = 0.5 * rng.normal(size=(m, m))
    cs = [W, 0.3 * np.eye(m), np.eye(m)]
    phi = constant_coeff_solution(cs, [0.4, -0.3], [np.eye(m), 0.1 * rng.normal(size=(m, m))])
    psi = constant_coeff_solution(cs, [0.9, -0.7], [rng.normal(size=(m, m)), rng.normal(size=(m, m))])
    A = DiffOperator([constant(c) for c in cs])
    s = sigma_from(phi)
    psi1 = dt_wavefunction(psi, s)
    A1 = transformed_operator(A, s)
    Xh, Th = np.meshgrid(x, np.linspace(0.0, 0.5, 5), indexing="ij")
    out.append(Check("dt.order2_covariance", _sup(deriv_t(psi1) - A1(psi1), Xh, Th), tols.get("dt_cov", 1e-10)))
    return out


# -- boussinesq -------------------------------------------------------------------

SOLITON = dict(alpha=-0.75, a2=1.0, a1=0.0, k=math.sqrt(3.0) / 2.0)
CHAIN = dict(alpha=-1.0, ks=(0.85, 1.0, 1.15), partners=(0.25, 0.0, -0.665), signs=(1.0, -1.0, 1.0))


def soliton_setup():
    p = bq.BqParams(alpha=SOLITON["alpha"], a2=SOLITON["a2"], a1=SOLITON["a1"])
    k = SOLITON["k"]
    phi = bq.seed_wavefunction(p, 0.0) + bq.seed_wavefunction(p, k)
    return p, k, phi


def chain_seeds(depth: int = 3):
    """Positive two-exponential seeds with pairwise-distinct eigenvalues and regular Wronskians."""
    if not 1 <= depth <= len(CHAIN["ks"]):
        raise ValueError(f"chain depth must be between 1 and {len(CHAIN['ks'])}")
    p = bq.BqParams(alpha=CHAIN["alpha"])
    seeds = []
    for k, guess, c in list(zip(CHAIN["ks"], CHAIN["partners"], CHAIN["signs"]))[:depth]:
        q = min(bq.partner_wavenumbers(p, k), key=lambda z: abs(z - guess)).real
        seeds.append((bq.seed_wavefunction(p, k) + bq.seed_wavefunction(p, q, c), bq.seed_eigenvalue(p, k)))
    return p, seeds


def suite_bq(rng: np.random.Generator, tols: dict) -> list[Check]:
    out = []
    p, k, phi = soliton_setup()
    x, t = bq.DEFAULT_COV_X, bq.DEFAULT_COV_T
    X, T = np.meshgrid(x, t, indexing="ij")
    # psi: a second solution with a random eigenvalue, as two exponentials sharing it
    kk = float(rng.uniform(0.3, 0.8))
    lam = bq.seed_eigenvalue(p, kk)
    psi = bq.seed_wavefunction(p, kk) + bq.seed_wavefunction(p, bq.partner_wavenumbers(p, kk)[0], 0.5)
    pl = bq.BqParams(alpha=p.alpha, a2=p.a2, a1=p.a1, lam=lam, x0=p.x0)
    pair = bq.build_pair(zeros(1), pl)
    rep = bq.pair_covariance_residual(pair, phi, psi, x, t)
    tol = tols.get("covariance", 1e-8)
    out.append(Check("bq.covariance.spectral", rep.spectral, tol))
    out.append(Check("bq.covariance.evolution", rep.evolution, tol))
    kern = bq.pair_covariance_residual(pair, phi, phi, x, t)
    out.append(Check("bq.covariance.kernel", kern.max(), 0.0))
    shifted = bq.pair_covariance_residual(pair, phi, psi, x, t, potential_shift=0.1)
    out.append(Check("bq.covariance.shift_detected", shifted.spectral, 1e-3, "ge"))

    w = bq.dress_potential(phi, p)
    peak = float(np.real(w(0.0, 0.0)[0, 0]))
    out.append(Check("bq.soliton.peak", abs(peak - k**2 / 2), tols.get("peak", 1e-10)))
    out.append(Check("bq.soliton.grid_max", abs(_sup(w, X, T) - k**2 / 2), 1e-3))

    dressed = bq.build_pair(w, p)
    lax = max(_sup(r, X, T) for r in lax_compat_residual(dressed.L, dressed.A))
    out.append(Check("bq.lax_compat", lax, tols.get("lax", 1e-8)))

    printed = bq.BqPair(
        DiffOperator([bq.lower_coefficient_printed(w, p), *dressed.L.coeffs[1:]], 1),
        dressed.A, w, p)
    lax_printed = max(_sup(r, X, T) for r in lax_compat_residual(printed.L, printed.A))
    out.append(Check("bq.lax_compat_printed_G", lax_printed, None, "report"))

    out.extend(chain_checks(tols))
    return out


def chain_checks(tols: dict, depth: int = 3) -> list[Check]:
    p, seeds = chain_seeds(depth)
    X, T = np.meshgrid(np.linspace(-10, 10, 101), np.linspace(0, 1, 11), indexing="ij")
    ch = bq.dressing_chain(seeds, p)
    tol = tols.get("chain", 1e-8)
    out = []
    for n in range(depth):
        r = bq.chain_residual_spectral(ch.sigmas[n], ch.potentials[n], p, ch.eigenvalues[n])
        out.append(Check(f"bq.chain.spectral.level{n}", _sup(r, X, T), tol))
    for n in range(depth - 1):
        r = bq.chain_residual_evolution(ch.sigmas[n], ch.sigmas[n + 1], p)
        out.append(Check(f"bq.chain.evolution.level{n}", _sup(r, X, T), tol))
        rp = bq.chain_residual_evolution_printed(ch.sigmas[n], ch.sigmas[n + 1])
        out.append(Check(f"bq.chain.evolution_printed.level{n}", _sup(rp, X, T), None, "report"))
    for n in range(2, depth + 1):
        direct = bq.crum_potential([f for f, _ in seeds[:n]], p)
        out.append(Check(f"bq.chain.crum{n}", _sup(ch.potentials[n] - direct, X, T), tol))
    return out


# -- nczs ------------------------------------------------------------------------


def suite_zs(rng: np.random.Generator, tols: dict) -> list[Check]:
    out = []
    tol = tols.get("covariance_rel", 1e-12)
    for m in (2, 3, 4):
        worst = 0.0
        for n in range(1, 6):
            for _ in range(100):
                H, u, s = (nczs.random_complex(rng, m) for _ in range(3))
                worst = max(worst, nczs.relative_covariance_residual(nczs.CovariantModel.sym_poly(H, n), u, s))
        out.append(Check(f"zs.covariance.dim{m}", worst, tol))
    rep = nczs.combo_covariance_check([1.0, 2.0, 0.5], nczs.random_complex(rng, 4), 100, rng, tol)
    out.append(Check("zs.combination", rep.max_relative, tol))
    out.append(Check("zs.comb_example", rep.comb_example, tol))

    hits = 0
    for _ in range(100):
        H = nczs.random_complex(rng, 3)
        wrong = nczs.CovariantModel.sym_poly(H, 3, Y=np.linalg.matrix_power(H, 3))
        hits += nczs.relative_covariance_residual(wrong, nczs.random_complex(rng, 3), nczs.random_complex(rng, 3)) >= 1e-3
    out.append(Check("zs.negative_control_hits", float(hits), 99.0, "ge"))

    # heredity of the constraint at J = H, and the collapsed third row
    H, u, s, ux, ut, uy = (nczs.random_complex(rng, 3) for _ in range(6))
    u_tilde = nczs.zs_dt_potential(u, H, s)
    eq1 = max(float(np.abs(nczs.constraint_residuals(v, H, H, ux, ut, uy)[1]).max()) for v in (u, u_tilde))
    out.append(Check("zs.eq_row1_identity", eq1, 1e-12))
    J = nczs.random_complex(rng, 3)
    collapsed = nczs.constraint_residuals(u, H, J, ux, ut, uy)[2]
    out.append(Check("zs.kk_row3_collapse",
                     float(np.abs(collapsed - nczs.kk_row3_uncollapsed(u, H, J, ux, ut, uy)).max()), 1e-12))
    lin = nczs.frechet_directional(lambda v: H @ v + v @ H, u, s, 1e-3)
    out.append(Check("zs.frechet_linear", float(np.abs(lin - (H @ s + s @ H)).max()), 1e-10))
    kind = nczs.classify_linear_map(lambda v: H @ v + v @ H, 3, rng)
    out.append(Check("zs.frechet_two_sided", 0.0 if kind == "two-sided" else 1.0, 0.0))

    out.extend(top_checks(rng, tols))
    return out


def top_initial(rng: np.random.Generator, dim: int = 3) -> nczs.TopState:
    """Skew-Hermitian ``u0`` (a rigid body) and ``J = diag(1..dim)``."""
    u0 = 1j * nczs.random_hermitian(rng, dim)
    return nczs.TopState(u0, np.diag(np.arange(1.0, dim + 1)))


def convergence_order(s0: nczs.TopState, y_end: float = 2.0, h: float = 0.02) -> float:
    """``log2(e(h) / e(h/2))`` with errors against an ``h/8`` reference."""
    def end(step):
        return nczs.euler_integrate(s0, y_end, step)[-1].u
    ref = end(h / 8)
    e1 = np.abs(end(h) - ref).max()
    e2 = np.abs(end(h / 2) - ref).max()
    return float(np.log2(e1 / e2))


def top_checks(rng: np.random.Generator, tols: dict) -> list[Check]:
    s0 = top_initial(rng, 3)
    traj = nczs.euler_integrate(s0, 10.0, 1e-3)
    out = [
        Check("zs.euler.trace_drift", nczs.trace_drift(traj), tols.get("trace_drift", 1e-8)),
        Check("zs.euler.eig_drift", nczs.eigenvalue_drift(traj), tols.get("eig_drift", 1e-7)),
        Check("zs.euler.order_error", abs(convergence_order(s0) - 4.0), 0.2),
    ]
    pair = nczs.top_pair(traj)
    ys = np.array([s.y for s in traj])
    zs = max(_sup(r, 0.0, 0.0, ys) for r in zs_compat_residual(pair))
    out.append(Check("zs.euler.zs_compat", zs, tols.get("zs_compat", 1e-7)))

    # the x,t-independent reduction of the general equation at H = J
    i = len(traj) // 2
    J = s0.J
    z = np.zeros_like(J)
    u_y = deriv_y_sample(traj, i)
    gman = nczs.constraint_residuals(traj[i].u, J, J, z, z, u_y)[2]
    out.append(Check("zs.gman_euler", float(np.abs(gman).max()), 1e-7))
    variants = nczs.gman2_variants(traj[i].u, J, nczs.random_complex(rng, 3), u_y)
    for name, val in sorted(variants.items()):
        out.append(Check(f"zs.gman2.{name}", float(np.abs(val).max()), None, "report"))
    return out


def deriv_y_sample(traj, i: int) -> np.ndarray:
    """Fourth-order central difference of ``u`` at trajectory sample ``i``."""
    h = traj[1].y - traj[0].y
    u = [traj[j].u for j in range(i - 2, i + 3)]
    return (u[0] - 8 * u[1] + 8 * u[3] - u[4]) / (12 * h)


# -- bdt ---------------------------------------------------------------------------


def suite_bdt(rng: np.random.Generator, tols: dict, t_end: float = 5.0, h_step: float = 1e-3) -> list[Check]:
    out = []
    for label, coeffs in (("rho2", [0, 0, 1]), ("rho3", [0, 0, 0, 1])):
        scene = bdt.random_scene(rng, 3, bdt.MatrixFunction.polynomial(coeffs))
        out.extend(bdt_checks(scene, t_end, h_step, tols, f"bdt.{label}"))
    scene = bdt.random_scene(rng, 3, mu=1.1, nu=1.1)
    traj = bdt.flow_integrate(scene, 0.1, 1e-3)
    worst = 0.0
    for i in range(len(traj.ts)):
        d = bdt.dress_index(traj, i)
        worst = max(worst, float(np.abs(d.dressing.T - np.eye(3)).max()),
                    float(np.abs(d.rho1 - traj.rho[i]).max()), float(np.abs(d.psi1 - traj.psi[i]).max()))
    out.append(Check("bdt.identity_mu_eq_nu", worst, tols.get("identity", 1e-12)))
    A = nczs.random_hermitian(rng, 3)
    A /= np.linalg.norm(A, 2)
    sand = bdt.random_scene(rng, 3, bdt.MatrixFunction.sandwich(A))
    res = bdt.dressed_residuals(bdt.flow_integrate(sand, 1.0, 1e-3))
    out.append(Check("bdt.sandwich.spectral", float(res["spectral"].max()), None, "report"))
    out.append(Check("bdt.sandwich.evolution", float(res["evolution"].max()), None, "report"))
    return out


def bdt_checks(scene, t_end, h_step, tols, prefix) -> list[Check]:
    traj = bdt.flow_integrate(scene, t_end, h_step)
    pers = max(float(v.max()) for v in bdt.persistence(traj).values())
    res = bdt.dressed_residuals(traj)
    cov = tols.get("bdt_covariance", 1e-6)
    return [
        Check(f"{prefix}.persistence", pers, tols.get("persistence", 1e-7)),
        Check(f"{prefix}.isospectral", bdt.isospectral_drift(traj), 1e-8),
        Check(f"{prefix}.idempotence", float(res["idempotence"].max()), 1e-12),
        Check(f"{prefix}.inverse", float(res["inverse"].max()), 1e-12),
        Check(f"{prefix}.h_conjugation", float(res["h_conjugation"].max()), 1e-10),
        Check(f"{prefix}.spectral", float(res["spectral"].max()), cov),
        Check(f"{prefix}.evolution", float(res["evolution"].max()), cov),
        Check(f"{prefix}.pairing_rate", float(res["pairing_rate"].max()), 1e-8),
    ]


SUITES: dict[str, Callable] = {
    "verify-dt": suite_dt,
    "verify-bq": suite_bq,
    "verify-zs": suite_zs,
    "bdt": suite_bdt,
}
