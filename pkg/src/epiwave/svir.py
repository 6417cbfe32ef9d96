"""Four-compartment SVIR model factory.

Compartment layout: S = 0 (susceptible), V = 1 (vaccinated), I = 2
(infective), R = 3 (removed).  The defaults form the benchmark
configuration used by the acceptance experiments; the infection
pressure acts through a spatial tent kernel on the infective
compartment, with susceptibles, vaccinated (leakage phi1) and removed
(reinfection phi2) as targets.
"""

from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np

from .birth import BirthLaws
from .errors import InvalidParam
from .mesh import Mesh
from .operators import KernelSet, KernelTerm, LinearPart, attach_tilde
from .relaxed_model import ModelSpec

S, V, I, R = 0, 1, 2, 3
COMPARTMENTS = ("S", "V", "I", "R")


def default_mortality(a):
    return np.exp(-a) * a**5


def default_mortality_da(a):
    return np.exp(-a) * (5.0 * a**4 - a**5)


def default_fertility(a, a_max: float = 1.0):
    return (6.78 / a_max) * a**2 * (a_max - a) * (1.0 + np.sin(np.pi * a / a_max))


def tent_kernel(x, xi, reach: float = 0.1):
    return np.maximum(reach - np.abs(x - xi), 0.0)


def sigma_susceptible(a):
    return 0.1 * np.exp(-0.1 * a)


def sigma_infective(a):
    return 0.05 * np.exp(-0.1 * a)


@dataclass
class SvirParams:
    """Benchmark parameter set; scalar rates plus age/space profiles.

    alpha is carried for completeness of the parameter record, but no
    model equation consumes it.
    """

    c: float = 0.18564
    phi1: float = 0.0052
    phi2: float = 0.00062
    delta_d: float = 0.0018
    gamma: float = 0.278574
    total_S0: float = 1000.0
    I0: float = 10.0
    tau: float = 0.0
    alpha: float = 500.0  # listed but unused
    mu: Callable = default_mortality
    mu_da: Optional[Callable] = default_mortality_da
    beta: Callable = default_fertility
    lambda_kernel: Callable = tent_kernel
    sigma_S: Callable = sigma_susceptible
    sigma_V: Callable = sigma_susceptible
    sigma_I: Callable = sigma_infective
    sigma_R: Callable = sigma_susceptible

    def validate(self) -> None:
        for name in ("c", "delta_d", "gamma", "total_S0", "I0"):
            if getattr(self, name) < 0:
                raise InvalidParam(f"{name} must be nonnegative")
        for name in ("phi1", "phi2"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise InvalidParam(f"{name}={v} outside [0, 1]")
        if self.tau < 0:
            raise InvalidParam("tau must be nonnegative")


def boundary_bump(m: Mesh) -> np.ndarray:
    """Hat profile on the last two grid cells with unit space integral.

    A surface concentration at x = 1 has no grid meaning; this ramp is
    its narrowest trapezoid-exact stand-in.
    """
    psi = np.zeros(m.nx)
    psi[-2] = 0.5 / m.dx
    psi[-1] = 1.0 / m.dx
    return psi


def _routing_matrix(mode: str) -> np.ndarray:
    if mode == "susceptible":
        r = np.zeros((4, 4))
        r[S, :] = 1.0
    elif mode == "identity":
        r = np.eye(4)
    elif mode == "none":
        r = np.zeros((4, 4))
    else:
        raise InvalidParam(f"unknown routing mode {mode!r}")
    return r


def build_svir(p: SvirParams, m: Mesh, routing: str = "susceptible") -> ModelSpec:
    """Assemble the SVIR ModelSpec on a mesh.

    Initial state: total_S0 susceptibles uniform over age and space, I0
    infectives uniform over age concentrated at the x = 1 boundary,
    initial slope zero, fertility applied at both birth orders
    (beta1 = beta0 = beta) with newborns routed into S by default.
    """
    p.validate()
    A, X = m.na + 1, m.nx
    ages = m.ages()
    xs = m.xs()

    mu = p.mu(ages)
    if p.mu_da is not None:
        mu_da = p.mu_da(ages)
    else:
        mu_da = np.gradient(mu, m.da, edge_order=2)

    L = np.zeros((A, X, 4, 4))
    L_a = np.zeros((A, X, 4, 4))
    for h in range(4):
        L[:, :, h, h] = mu[:, None]
        L_a[:, :, h, h] = mu_da[:, None]
    L[:, :, S, V] += -p.c
    L[:, :, V, V] += p.c
    L[:, :, I, I] += p.delta_d + p.gamma
    L[:, :, R, I] += -p.gamma

    sigma = np.stack(
        [p.sigma_S(ages), p.sigma_V(ages), p.sigma_I(ages), p.sigma_R(ages)],
        axis=1,
    )
    linear = LinearPart(L=L, L_a=L_a, sigma=sigma)

    lam_x = p.lambda_kernel(xs[:, None], xs[None, :])  # (X, X)
    base = np.broadcast_to(lam_x[None, :, None, :], (A, X, A, X))
    couplings = [
        (S, S, I, 1.0),
        (V, V, I, p.phi1),
        (I, S, I, -1.0),
        (I, V, I, -p.phi1),
        (I, R, I, -p.phi2),
        (R, R, I, p.phi2),
    ]
    kernels = KernelSet(
        n=4, terms=[KernelTerm(h, i, j, w, base) for h, i, j, w in couplings]
    )

    beta_age = p.beta(ages, m.a_max)
    route = _routing_matrix(routing)
    beta_tab = np.broadcast_to(
        beta_age[:, None, None, None] * route[None, None, :, :], (A, X, 4, 4)
    ).copy()
    births = BirthLaws(
        beta0=beta_tab.copy(),
        beta1=beta_tab.copy(),
        betaL=np.zeros_like(beta_tab),
        beta_grad=np.zeros_like(beta_tab),
    )
    kernels = attach_tilde(kernels, births.beta0, m)

    y0 = np.zeros((4, A, X))
    y0[S] = p.total_S0 / m.a_max
    y0[I] = (p.I0 / m.a_max) * boundary_bump(m)[None, :]

    return ModelSpec(
        n=4,
        linear=linear,
        kernels=kernels,
        births=births,
        y0=y0,
        y1=np.zeros_like(y0),
        f=None,
        tau=p.tau,
    )


def newborn_routing(spec: ModelSpec, m: Mesh, mode: str = "susceptible") -> ModelSpec:
    """Return a copy of an SVIR spec with the birth target switched.

    "susceptible" (default) sends births computed from the weighted
    total population into S; "identity" makes each compartment birth
    into itself; "none" disables births.  The tilde kernels are rebuilt
    because they depend on beta0.
    """
    route = _routing_matrix(mode)
    # beta0 rows share one age profile; recover it from the table.
    old = spec.births.beta0
    profile = np.max(np.abs(old), axis=(1, 2, 3))
    beta_tab = np.broadcast_to(
        profile[:, None, None, None] * route[None, None, :, :], old.shape
    ).copy()
    births = BirthLaws(
        beta0=beta_tab.copy(),
        beta1=beta_tab.copy(),
        betaL=np.zeros_like(beta_tab),
        beta_grad=np.zeros_like(beta_tab),
        g0=spec.births.g0,
        g1=spec.births.g1,
    )
    kernels = KernelSet(n=spec.kernels.n, terms=list(spec.kernels.terms))
    kernels = attach_tilde(kernels, births.beta0, m)
    return replace(spec, births=births, kernels=kernels)
