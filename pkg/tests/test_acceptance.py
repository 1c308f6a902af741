"""The ten acceptance criteria, each at its stated tolerance.

Every test records one PASS/FAIL line, repeated in the terminal summary.
"""

from __future__ import annotations

import itertools
import math
import time

import numpy as np
import pytest

from kawarada.analysis import frozen_norm_ratios, perturbation_constant, rate_study
from kawarada.config import load_config, make_solver, study_factory
from kawarada.errors import QuenchReached
from kawarada.expm import make_propagators, pade11_apply, phi_minus_identity_weighted, strang_apply
from kawarada.grid import MeshMapping, build_mesh2d
from kawarada.operators import assemble, solve_with_M
from kawarada.problems import ManufacturedSolution, manufactured_factory, sigma_values
from kawarada.reaction import ReactionField, sample_eps
from kawarada.stepper import KawaradaSolver, SchemeParams

from oracles import dense_pade, dense_split

pytestmark = pytest.mark.slow

T_Q_EXAMPLE1 = 0.519715480937553
SHIFT_TARGET = (-0.1515, -0.1515)


@pytest.fixture(scope="module")
def example1():
    cfg = load_config("example1.cfg")
    solver = make_solver(cfg)
    start = time.perf_counter()
    rep = solver.run()
    return solver, rep, time.perf_counter() - start


@pytest.fixture(scope="module")
def example1_study():
    cfg = load_config("example1.cfg")
    return rate_study(study_factory(cfg), cfg.sample_times)


def test_c01_example1_quench_time(example1, verdict):
    solver, rep, elapsed = example1
    q = rep.quench
    center = q is not None and q.location == (0.0, 0.0)
    err = abs(q.t_q - T_Q_EXAMPLE1) if q else math.inf
    ok = center and err <= 0.01 and elapsed < 300
    verdict(1, ok, f"T_q={q.t_q if q else None!r} at {q.location if q else None}, |err|={err:.2e} <= 0.01, "
                   f"runtime {elapsed:.1f}s")


def test_c02_explosive_derivative(example1, verdict):
    _, rep, _ = example1
    ut = np.array([s.max_ut for s in rep.steps])
    last = ut[-1]
    growing = bool(np.all(np.diff(ut[-20:]) > 0))
    verdict(2, last > 1e2 and growing,
            f"max u_t at last accepted step {last:.1f} > 100, increasing over final 20 steps: {growing}")


def test_c03_spatial_order(example1_study, verdict):
    means = example1_study.mean_rate("space")
    spectral = [example1_study.surface(t, "space").spectral for t in example1_study.sample_times]
    ok = all(1.8 <= p <= 2.1 for p in means + spectral)
    verdict(3, ok, f"mean p_PW^h={np.round(means, 4).tolist()}, p_2^h={np.round(spectral, 4).tolist()} in [1.8, 2.1]")


def test_c04_temporal_order(example1_study, verdict):
    means = example1_study.mean_rate("time")
    ok = all(0.85 <= q <= 1.05 for q in means)
    verdict(4, ok, f"mean q_PW^tau={np.round(means, 4).tolist()} in [0.85, 1.05]")


def test_c05_example2_shift(verdict):
    cfg = load_config("example2.cfg")
    found = []
    for seed in range(5):
        q = make_solver(cfg.with_overrides(seed=seed)).run().quench
        found.append((seed, q.t_q if q else math.nan, q.location if q else (math.nan, math.nan)))
    dist = [max(abs(x - SHIFT_TARGET[0]), abs(y - SHIFT_TARGET[1])) for _, _, (x, y) in found]
    tq = [t for _, t, _ in found]
    ok = all(d <= 0.1 for d in dist) and all(0.78 <= t <= 0.90 for t in tq)
    verdict(5, ok, f"T_q={np.round(tq, 4).tolist()} in [0.78, 0.90]; location {found[0][2]}, "
                   f"max-norm distance {max(dist):.3f} <= 0.1")


def test_c06_example2_spatial_order(verdict):
    cfg = load_config("example2.cfg")
    study = rate_study(study_factory(cfg), cfg.sample_times)
    means = study.mean_rate("space")
    verdict(6, all(0.9 <= p <= 1.4 for p in means), f"mean p_PW^h={np.round(means, 4).tolist()} in [0.9, 1.4]")


def _premise_states(mesh, sig, eps, rng, count):
    """Random positive states with ``M v + g(v) > 0``, drawn at several amplitudes."""
    op = assemble(mesh, sig)
    field = ReactionField(eps, sig, "eps")
    out = []
    while len(out) < count:
        amp = 10.0 ** rng.uniform(-4, -0.3)
        v = amp * rng.uniform(1e-3, 1.0, mesh.size)
        if np.all(op.matvec(v) + field.g(v) > 0):
            out.append(v)
    return out


def test_c07_positivity_and_monotonicity(verdict):
    rng = np.random.default_rng(2024)
    steps = runs = violations = 0
    for n, kind in itertools.product((1, 3, 4), ("one", "example2")):
        mesh = build_mesh2d(n, n, MeshMapping("clustered", s=-0.5), a=2.0, b=2.0)
        sig = sigma_values(mesh, kind)
        eps = sample_eps(int(rng.integers(1 << 31)), 0.98, 1.02, mesh.size)
        for v0 in _premise_states(mesh, sig, eps, rng, 50):
            s = KawaradaSolver(mesh, sig, ReactionField(eps, sig, "eps"), v0, SchemeParams())
            state = s.initial_state()
            runs += 1
            try:
                for _ in range(5000):
                    tau = min(s.adapt_tau(state), s.tau_cap)
                    new, _ = s.step(state, tau)
                    steps += 1
                    if not (np.all(new.v > 0) and np.min(new.v - state.v) >= -1e-12):
                        violations += 1
                    state = new
            except QuenchReached:
                pass
    verdict(7, violations == 0, f"{runs} runs, {steps} accepted steps, {violations} violations of v>0, v_k+1>=v_k")


def _rel(a, b):
    return float(np.abs(a - b).max() / max(np.abs(b).max(), 1e-300))


def test_c08_oracle_equivalence(verdict):
    rng = np.random.default_rng(8)
    worst, cases = 0.0, 0
    mappings = [MeshMapping("uniform"), MeshMapping("sine"), MeshMapping("clustered", s=-0.5, center=-0.1515)]
    for nx, ny, mapping, kind in itertools.product(range(1, 5), range(1, 5), mappings, ("one", "example2")):
        mesh = build_mesh2d(nx, ny, mapping, a=2.0, b=2.0)
        sig = sigma_values(mesh, kind)
        op = assemble(mesh, sig)
        Mx, My = dense_split(mesh.mx.nodes, mesh.my.nodes, sig, 2.0, 2.0)
        M = Mx + My
        v = rng.standard_normal(mesh.size)
        errs = [_rel(op.matvec(v), M @ v), _rel(solve_with_M(op, v), np.linalg.solve(M, v))]
        for tau in (1e-3, 0.05):
            Px, Py = dense_pade(Mx, tau / 4), dense_pade(My, tau / 2)
            Phi = Px @ Py @ Px
            props = make_propagators(op, tau)
            errs += [
                _rel(pade11_apply(op.Mx, tau, v), dense_pade(Mx, tau / 2) @ v),
                _rel(pade11_apply(op.My, tau, v), dense_pade(My, tau / 2) @ v),
                _rel(strang_apply(*props, v), Phi @ v),
                _rel(phi_minus_identity_weighted(op, props, v), np.linalg.solve(M, Phi @ v - v)),
            ]
        worst = max(worst, max(errs))
        cases += 1
    verdict(8, worst <= 1e-8, f"{cases} grid/sigma cases up to 4x4, worst relative error {worst:.2e} <= 1e-8")


def test_c09_stability_bounds(verdict):
    rng = np.random.default_rng(9)
    mesh = build_mesh2d(4, 4, a=2.0, b=2.0)
    sig = sigma_values(mesh, "example2")
    bound = math.sqrt(sig.max() / sig.min())
    worst = 0.0
    for tau in (1e-3, 0.05):
        for _ in range(5):
            worst = max(worst, frozen_norm_ratios(mesh, sig, rng.standard_normal(mesh.size), tau, 1000).max())
    cfg = load_config("example1.cfg").with_overrides(nx=15, ny=15)
    pert = perturbation_constant(lambda: make_solver(cfg))
    ok = worst <= bound and math.isfinite(pert.constant)
    verdict(9, ok, f"frozen max ||v_k||/||v_0||={worst:.4f} <= sqrt(kappa)={bound:.4f} over 1000 steps; "
                   f"perturbation constant C={pert.constant:.4g} up to 0.99 T_q={pert.t_end:.4f} ({pert.steps} steps)")


def test_c10_theta_order_gap(verdict):
    mesh = build_mesh2d(7, 7, a=1.0, b=1.0)
    rates = {}
    for theta in (0.5, 0.0):
        params = SchemeParams(theta=theta, tau0=0.05, t_max=2.0)
        study = rate_study(manufactured_factory(mesh, ManufacturedSolution("quadratic"), params), [0.5])
        rates[theta] = study.mean_rate("time")[0]
    gap = rates[0.5] - rates[0.0]
    verdict(10, gap >= 0.7, f"temporal rate theta=1/2: {rates[0.5]:.4f}, theta=0: {rates[0.0]:.4f}, gap {gap:.4f} >= 0.7")
