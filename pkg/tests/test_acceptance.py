"""Acceptance criteria, one test each; every test prints a single PASS/FAIL line."""
import subprocess
import sys
import time

import numpy as np
import pytest

from darbouxlax import boussinesq as bq, suites
from darbouxlax.darboux import bell_polys, sigma_from
from darbouxlax.diffop import lax_compat_residual, zs_compat_residual
from darbouxlax.field import deriv_x, mul, zeros
from darbouxlax import nczs


@pytest.fixture
def announce(capsys):
    def emit(number, title, checks, elapsed=None, limit=None):
        failed = [c for c in checks if not c.passed]
        slow = limit is not None and elapsed > limit
        ok = not failed and not slow
        parts = [f"{len(checks)} checks"]
        parts += [f"{c.name} {c.value:.2e} ({'<=' if c.kind == 'le' else '>='} {c.tol:g})" for c in checks]
        if elapsed is not None:
            parts.append(f"{elapsed:.2f}s" + (f" (limit {limit:g}s)" if limit else ""))
        if failed:
            parts.append("failing: " + ", ".join(c.name for c in failed))
        with capsys.disabled():
            print(f"\ncriterion {number} [{title}]: {'PASS' if ok else 'FAIL'} - {'; '.join(parts)}")
        assert not failed, failed
        assert not slow, f"took {elapsed:.2f}s, limit {limit}s"
    return emit


def _timed(fn, *args):
    t0 = time.perf_counter()
    out = fn(*args)
    return out, time.perf_counter() - t0


def test_criterion_1_bell_miura(announce):
    checks, elapsed = _timed(suites.suite_dt, np.random.default_rng(1), {})
    picked = [c for c in checks if c.name.startswith(("dt.bell", "dt.miura"))]
    assert len(picked) == 8
    announce(1, "Bell/Miura", picked, elapsed, 5.0)


def test_criterion_2_abelian_collapse(announce):
    X, T = np.meshgrid(np.linspace(-1, 1, 100), np.linspace(-1, 1, 10), indexing="ij")
    assert X.size == 1000
    rng = np.random.default_rng(2)
    checks = []
    for trial in range(5):
        s = sigma_from(suites.random_phi(rng, 1))
        g = s.sigma
        closed = deriv_x(g, 2) + 3.0 * mul(g, deriv_x(g)) + mul(g, mul(g, g))
        diff = float(np.abs((bell_polys(s, 3)[3] - closed)(X, T)).max())
        checks.append(suites.Check(f"abelian_b3.trial{trial}", diff, 1e-12))
    announce(2, "Abelian collapse", checks)


def _covariance_checks():
    p, k, phi = suites.soliton_setup()
    assert (p.value("alpha"), p.value("a2"), p.value("a1")) == (-0.75, 1.0, 0.0)
    x, t = np.linspace(-10, 10, 200), np.linspace(0, 1, 50)
    kk = 0.55
    lam = bq.seed_eigenvalue(p, kk)
    psi = bq.seed_wavefunction(p, kk) + bq.seed_wavefunction(p, bq.partner_wavenumbers(p, kk)[0], 0.5)
    pair = bq.build_pair(zeros(1), bq.BqParams(alpha=-0.75, lam=lam))
    rep = bq.pair_covariance_residual(pair, phi, psi, x, t)
    w = bq.dress_potential(phi, p)
    peak = abs(float(np.real(w(0.0, 0.0)[0, 0])) - k**2 / 2)
    return [
        suites.Check("covariance.spectral", rep.spectral, 1e-8),
        suites.Check("covariance.evolution", rep.evolution, 1e-8),
        suites.Check("soliton.peak", peak, 1e-10),
    ]


def test_criterion_3_boussinesq_covariance(announce):
    checks, elapsed = _timed(_covariance_checks)
    announce(3, "Boussinesq covariance", checks, elapsed, 10.0)


def test_criterion_4_dressing_chain(announce):
    checks = suites.chain_checks({}, depth=3)
    asserted = [c for c in checks if c.kind != "report"]
    names = {c.name for c in asserted}
    assert {"bq.chain.spectral.level2", "bq.chain.evolution.level1", "bq.chain.crum2"} <= names
    announce(4, "Dressing chain", asserted)


def test_criterion_5_compatibility(announce):
    p, k, phi = suites.soliton_setup()
    pair = bq.build_pair(bq.dress_potential(phi, p), p)
    X, T = np.meshgrid(np.linspace(-10, 10, 200), np.linspace(0, 1, 50), indexing="ij")
    lax = max(float(np.abs(r(X, T)).max()) for r in lax_compat_residual(pair.L, pair.A))
    traj = nczs.euler_integrate(suites.top_initial(np.random.default_rng(5), 3), 10.0, 1e-3)
    ys = np.array([s.y for s in traj])
    zs = max(float(np.abs(r(0.0, 0.0, ys)).max()) for r in zs_compat_residual(nczs.top_pair(traj)))
    announce(5, "Compatibility residuals",
             [suites.Check("lax_compat", lax, 1e-8), suites.Check("zs_compat", zs, 1e-7)])


def test_criterion_6_covariant_polynomials(announce):
    checks = suites.suite_zs(np.random.default_rng(6), {})
    picked = [c for c in checks if c.name.startswith(("zs.covariance", "zs.combination", "zs.negative"))]
    assert len(picked) == 5
    announce(6, "Covariant polynomial identities", picked)


def test_criterion_7_euler_top(announce):
    s0 = suites.top_initial(np.random.default_rng(7), 3)
    traj = nczs.euler_integrate(s0, 10.0, 1e-3)
    order = suites.convergence_order(s0)
    announce(7, "Euler top", [
        suites.Check("trace_drift", nczs.trace_drift(traj), 1e-8),
        suites.Check("eig_drift", nczs.eigenvalue_drift(traj), 1e-7),
        suites.Check("order_error", abs(order - 4.0), 0.2),
    ])


def test_criterion_8_binary_dt(announce):
    from darbouxlax import bdt
    rng = np.random.default_rng(8)
    scene = bdt.random_scene(rng, 3, bdt.MatrixFunction.polynomial([0, 0, 1]))
    assert np.allclose(scene.rho0, scene.rho0.conj().T) and np.allclose(scene.H, scene.H.conj().T)
    checks = suites.bdt_checks(scene, 5.0, 1e-3, {}, "rho2")
    checks = [c for c in checks if not c.name.endswith(("isospectral", "h_conjugation", "pairing_rate"))]
    ident = [c for c in suites.suite_bdt(rng, {}, t_end=0.1) if c.name == "bdt.identity_mu_eq_nu"]
    announce(8, "Binary DT", checks + ident)


def test_criterion_9_determinism(announce, tmp_path):
    cmd = [sys.executable, "-m", "darbouxlax.cli", "verify-all", "--seed", "42"]
    runs = [subprocess.run(cmd, capture_output=True, check=False) for _ in range(2)]
    same = runs[0].stdout == runs[1].stdout and len(runs[0].stdout) > 0
    announce(9, "Determinism", [
        suites.Check("byte_identical", 0.0 if same else 1.0, 0.0),
        suites.Check("exit_status", float(runs[0].returncode), 0.0),
    ])
