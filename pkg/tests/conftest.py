"""Shared fixtures and problem builders for the test suite."""

import numpy as np
import pytest

from epiwave import (
    BirthLaws,
    KernelSet,
    LinearPart,
    ModelSpec,
    SolverConfig,
    build_mesh,
    run_parabolic,
)
from epiwave.reference import heat_mode_decay
from epiwave.study import refinement_floor
from epiwave.svir import SvirParams, build_svir


def scalar_blank(m, sigma=0.1, mu=0.0):
    """One-compartment LinearPart with constant coefficients."""
    A, X = m.na + 1, m.nx
    return LinearPart(
        L=np.broadcast_to(mu * np.eye(1), (A, X, 1, 1)).copy(),
        L_a=np.zeros((A, X, 1, 1)),
        sigma=np.full((A, 1), sigma),
    )


def zero_birth_laws(m, n=1, g0=None, g1=None):
    shape = (m.na + 1, m.nx, n, n)
    return BirthLaws(
        beta0=np.zeros(shape),
        beta1=np.zeros(shape),
        betaL=np.zeros(shape),
        beta_grad=np.zeros(shape),
        g0=g0,
        g1=g1,
    )


def eigenmode_problem(m, tau, sigma=0.1, boundary="exact", qfun=None, qpfun=None):
    """cos(pi x) Neumann mode problem with exact boundary feeds.

    boundary="exact" feeds the analytic heat amplitude; otherwise qfun /
    qpfun supply the amplitude and its derivative (damped-wave case).
    """
    A, X = m.na + 1, m.nx
    mode = np.cos(np.pi * m.xs())
    times = m.times()
    if boundary == "exact":
        amp = heat_mode_decay(sigma, times)
        damp = None
    else:
        amp = qfun(times)
        damp = qpfun(times)
    g0 = (amp[:, None] * mode)[:, None, :]
    g1 = None if damp is None else (damp[:, None] * mode)[:, None, :]
    spec = ModelSpec(
        n=1,
        linear=scalar_blank(m, sigma=sigma),
        kernels=KernelSet.empty(1),
        births=zero_birth_laws(m, g0=g0, g1=g1),
        y0=np.broadcast_to(mode, (1, A, X)).copy(),
        tau=tau,
    )
    return spec, mode


def renewal_problem(m, mu, beta_fn, y0_fn):
    """Age-only single-compartment renewal configuration (sigma = 0)."""
    A, X = m.na + 1, m.nx
    laws = zero_birth_laws(m)
    laws.beta0 = np.broadcast_to(
        beta_fn(m.ages())[:, None, None, None], (A, X, 1, 1)
    ).copy()
    return ModelSpec(
        n=1,
        linear=scalar_blank(m, sigma=0.0, mu=mu),
        kernels=KernelSet.empty(1),
        births=laws,
        y0=np.broadcast_to(y0_fn(m.ages())[None, :, None], (1, A, X)).copy(),
    )


@pytest.fixture(scope="session")
def desk_mesh():
    return build_mesh(1.0, 1.0, 20, 21)


@pytest.fixture(scope="session")
def solver_cfg():
    return SolverConfig()


@pytest.fixture(scope="session")
def svir_baseline(desk_mesh, solver_cfg):
    """Parabolic tau=0 benchmark run on the desk mesh, every step stored."""
    spec = build_svir(SvirParams(tau=0.0), desk_mesh)
    return run_parabolic(spec, solver_cfg, desk_mesh)


@pytest.fixture(scope="session")
def svir_floor(desk_mesh, solver_cfg):
    """(sup, energy) refinement floor between na=20 and na=40 runs."""
    return refinement_floor(SvirParams(), solver_cfg, desk_mesh)


@pytest.fixture(scope="session")
def small_mesh():
    return build_mesh(0.5, 1.0, 10, 11)
