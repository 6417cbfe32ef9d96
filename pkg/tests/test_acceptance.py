"""Acceptance suite: one test per criterion, each printing a verdict line.

Run with `pytest tests/test_acceptance.py -s` to see the per-criterion
summary.  Criterion 4's large-tau clause is expected to fail: the
relaxed system keeps its nonlocal reaction terms inside the relaxation
bracket, so modes that annihilate the bracket grow at the unrelaxed
infection rate (dispersion root s ~ S*K(0) - m, about 9 per unit time
at the benchmark scales) for every tau, and any double-precision seed
at the far boundary regrows past the threshold before the final time.
The assertion is kept as stated rather than weakened.
"""

import dataclasses
import json

import numpy as np
import pytest

from epiwave import (
    SolverConfig,
    build_mesh,
    diff_norms,
    run_parabolic,
    run_relaxed,
)
from epiwave.birth import make_compatible
from epiwave.fields import age_integral
from epiwave.io_cli import RunConfig, parse_config_dict, serialize_config
from epiwave.mesh import characteristic_cells, characteristic_ids, space_weights
from epiwave.operators import attach_tilde, lambda_op, neumann_matrix
from epiwave.parabolic_model import derived_initial_slope
from epiwave.reference import (
    damped_mode_solution,
    heat_mode_decay,
    renewal_reference,
)
from epiwave.study import energy_diff, fit_rate, tau_sweep
from epiwave.svir import I as I_COMP
from epiwave.svir import SvirParams, build_svir

from conftest import eigenmode_problem, renewal_problem


def _report(criterion, ok, detail):
    print(f"{'PASS' if ok else 'FAIL'} {criterion}: {detail}")
    return ok


@pytest.fixture(scope="module")
def crit1_sweep(desk_mesh, solver_cfg, svir_baseline, svir_floor):
    taus = [1e-4, 3e-4, 1e-3, 3e-3, 1e-2]
    return tau_sweep(
        SvirParams(),
        taus,
        solver_cfg,
        desk_mesh,
        baseline=svir_baseline,
        floor=svir_floor[0],
    )


def test_criterion_1_convergence_rate(crit1_sweep):
    rate = crit1_sweep.fitted_rate
    ok = 0.8 <= rate <= 1.2
    _report(
        "criterion-1 (sup-norm rate, benchmark config)",
        ok,
        f"fitted rate {rate:.4f} over taus {crit1_sweep.taus}, "
        f"diffs {['%.3e' % d for d in crit1_sweep.sup_diffs]}",
    )
    assert ok


def test_criterion_2_compatibility_ordering(desk_mesh, solver_cfg, svir_baseline):
    taus = [1e-3, 3e-3, 1e-2, 3e-2, 1e-1]
    base_spec = build_svir(SvirParams(), desk_mesh)

    # mismatched: zero initial slope, q2 = 0 with the g1 trace omitted
    laws_a = make_compatible(
        base_spec.births.beta0, base_spec.linear, 1.0, 0.0, desk_mesh
    )
    spec_a = dataclasses.replace(
        base_spec,
        births=laws_a,
        kernels=attach_tilde(base_spec.kernels, laws_a.beta0, desk_mesh),
        y1=np.zeros_like(base_spec.y0),
    )

    # fully compatible: derived slope plus the first-order tables
    laws_b = make_compatible(
        base_spec.births.beta0, base_spec.linear, 1.0, 1.0, desk_mesh
    )
    spec_b = dataclasses.replace(
        base_spec,
        births=laws_b,
        kernels=attach_tilde(base_spec.kernels, laws_b.beta0, desk_mesh),
    )
    spec_b = dataclasses.replace(
        spec_b, y1=derived_initial_slope(spec_b, desk_mesh)
    )

    rates = {}
    for name, spec in (("mismatched", spec_a), ("compatible", spec_b)):
        diffs = []
        for tau in taus:
            run = run_relaxed(
                dataclasses.replace(spec, tau=tau), solver_cfg, desk_mesh
            )
            rep = diff_norms(run, svir_baseline, desk_mesh)
            diffs.append(energy_diff(rep, tau))
        rates[name], _, _ = fit_rate(taus, diffs)
    ok = rates["mismatched"] >= 0.4 and (
        rates["compatible"] - rates["mismatched"] >= 0.2
    )
    _report(
        "criterion-2 (energy-rate ordering)",
        ok,
        f"mismatched {rates['mismatched']:.3f} (>= 0.4), "
        f"compatible {rates['compatible']:.3f} "
        f"(gap {rates['compatible'] - rates['mismatched']:.3f} >= 0.2)",
    )
    assert ok


def test_criterion_3_tau_to_zero_consistency(
    desk_mesh, solver_cfg, svir_baseline, svir_floor
):
    run = run_relaxed(build_svir(SvirParams(tau=1e-8), desk_mesh), solver_cfg, desk_mesh)
    rep = diff_norms(run, svir_baseline, desk_mesh)
    floor = svir_floor[0]
    ok = rep.sup_abs <= 10.0 * floor
    _report(
        "criterion-3 (tau -> 0 consistency)",
        ok,
        f"sup diff {rep.sup_abs:.3e} vs 10 x floor {10 * floor:.3e}",
    )
    assert ok


def test_criterion_4_finite_propagation_speed():
    m = build_mesh(5.0, 1.0, 20, 21)
    cfg = SolverConfig(store_every=20)
    r0 = run_parabolic(build_svir(SvirParams(tau=0.0), m), cfg, m)
    r100 = run_relaxed(build_svir(SvirParams(tau=100.0), m), cfg, m)
    thr = 1e-6 * float(np.max(age_integral(r0[0].values, m)[I_COMP]))

    series0 = [float(age_integral(sl.values, m)[I_COMP][0]) for sl in r0]
    series100 = [float(age_integral(sl.values, m)[I_COMP][0]) for sl in r100]
    first_step_exceeds = series0[1] > thr
    _report(
        "criterion-4a (parabolic infinite speed)",
        first_step_exceeds,
        f"tau=0 infectives at x=0, first stored step: {series0[1]:.3e} > {thr:.3e}",
    )
    never_exceeds = all(v <= thr for v in series100)
    _report(
        "criterion-4b (tau=100 stays at floor)",
        never_exceeds,
        f"tau=100 infectives at x=0 per stored time: "
        f"{['%.3e' % v for v in series100]} vs threshold {thr:.3e}",
    )
    assert first_step_exceeds
    # Known defect at these parameter scales: the nonlocal reaction sits
    # inside the relaxation bracket, so its growth is not damped by tau
    # and far-field seeds regrow past the threshold before T=5.  The
    # assertion is kept as stated (module docstring has the analysis).
    assert never_exceeds


def test_criterion_5_heat_eigenmode_oracle():
    sigma = 0.1

    def err(na, nx):
        m = build_mesh(0.5, 1.0, na, nx)
        spec, mode = eigenmode_problem(m, 0.0, sigma=sigma)
        run = run_parabolic(spec, SolverConfig(), m)
        exact = heat_mode_decay(sigma, 0.5)
        return float(np.max(np.abs(run[-1].values - exact * mode))) / exact

    e1, e2 = err(40, 41), err(80, 81)
    ok = e1 < 0.05 and e1 / e2 >= 1.8
    _report(
        "criterion-5 (heat eigenmode)",
        ok,
        f"rel err {e1:.4f} (< 0.05), halving ratio {e1 / e2:.2f} (>= 1.8)",
    )
    assert ok


def test_criterion_6_telegrapher_eigenmode_oracle():
    sigma, tau = 0.1, 0.1
    q, qp = damped_mode_solution(tau, sigma * np.pi**2, 0.5)

    def err(na, nx):
        m = build_mesh(0.5, 1.0, na, nx)
        spec, mode = eigenmode_problem(
            m, tau, sigma=sigma, boundary="ode", qfun=q, qpfun=qp
        )
        run = run_relaxed(spec, SolverConfig(), m)
        ref = float(q(0.5))
        return float(np.max(np.abs(run[-1].values - ref * mode))) / abs(ref)

    e1 = err(40, 41)
    ok = e1 < 0.05
    _report(
        "criterion-6 (damped-wave eigenmode vs ODE oracle)",
        ok,
        f"rel err {e1:.4f} (< 0.05)",
    )
    assert ok


def test_criterion_7_renewal_oracle():
    mu = 0.3
    beta_fn = lambda a: 1.2 + 0.0 * np.asarray(a)
    y0_fn = lambda a: 1.0 + 0.5 * np.cos(np.pi * np.asarray(a))
    _, _, total_ref = renewal_reference(beta_fn, mu, y0_fn, 1.0, 1.0, n_fine=2560)

    def err(na):
        m = build_mesh(1.0, 1.0, na, 3)
        run = run_parabolic(renewal_problem(m, mu, beta_fn, y0_fn), SolverConfig(), m)
        b = np.array([sl.values[0, 0, 0] for sl in run])
        tw = np.full(len(b), m.dt)
        tw[0] = tw[-1] = 0.5 * m.dt
        return abs(float(np.dot(tw, b)) - total_ref) / total_ref

    e1, e2 = err(20), err(40)
    ok = e1 / e2 >= 1.8
    _report(
        "criterion-7 (renewal oracle, first order in da)",
        ok,
        f"rel errs {e1:.4e} -> {e2:.4e}, ratio {e1 / e2:.2f} (>= 1.8)",
    )
    assert ok


def test_criterion_8_invariant_suites(desk_mesh, solver_cfg):
    results = {}

    # operators bilinearity
    from epiwave.operators import KernelSet, KernelTerm

    m = build_mesh(1.0, 1.0, 4, 5)
    rng = np.random.default_rng(0)
    A, X = m.na + 1, m.nx
    k = KernelSet(
        n=2,
        terms=[
            KernelTerm(h, i, j, 1.0, rng.normal(size=(A, X, A, X)))
            for h in range(2)
            for i in range(2)
            for j in range(2)
        ],
    )
    w1 = rng.normal(size=(2, A, X))
    w2 = rng.normal(size=(2, A, X))
    lhs = lambda_op(k, 2.0 * w1 - 3.0 * w2, m)
    rhs = 2.0 * lambda_op(k, w1, m) - 3.0 * lambda_op(k, w2, m)
    results["bilinearity"] = np.allclose(lhs, rhs, rtol=1e-10, atol=1e-10)

    # Neumann summation by parts
    lap = neumann_matrix(desk_mesh)
    w = space_weights(desk_mesh)
    wa = w[:, None] * lap
    results["summation-by-parts"] = bool(
        np.allclose(wa, wa.T, atol=1e-12)
        and np.allclose(lap @ np.ones(desk_mesh.nx), 0.0, atol=1e-9)
    )

    # mesh partition property
    seen = set()
    ok_part = True
    for t0 in characteristic_ids(m):
        for cell in characteristic_cells(m, t0):
            ok_part &= cell not in seen
            seen.add(cell)
    results["mesh-partition"] = ok_part and len(seen) == (m.nt + 1) * (m.na + 1)

    # Picard contraction on the criterion-1 configuration (tau = 1e-2)
    run = run_relaxed(
        build_svir(SvirParams(tau=1e-2), desk_mesh), solver_cfg, desk_mesh
    )
    contraction_ok = True
    for updates in run.picard_updates:
        floor = 1e-12 * max(updates)
        for a, b in zip(updates[1:], updates[2:]):
            if a > floor and b > floor:
                contraction_ok &= b < a
    results["picard-contraction"] = contraction_ok

    # config round-trip
    cfg = RunConfig()
    cfg.study.taus = [1e-4, 3e-4]
    results["config-round-trip"] = (
        parse_config_dict(json.loads(serialize_config(cfg))) == cfg
    )

    # determinism: identical inputs give bit-identical runs
    m2 = build_mesh(0.5, 1.0, 6, 7)
    ra = run_relaxed(build_svir(SvirParams(tau=0.05, total_S0=100.0), m2), SolverConfig(), m2)
    rb = run_relaxed(build_svir(SvirParams(tau=0.05, total_S0=100.0), m2), SolverConfig(), m2)
    results["determinism"] = all(
        np.array_equal(a.values, b.values) and np.array_equal(a.slope, b.slope)
        for a, b in zip(ra, rb)
    )

    ok = all(results.values())
    _report("criterion-8 (invariant suites)", ok, str(results))
    assert ok
