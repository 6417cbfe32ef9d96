"""Independent reference solutions used to validate the solvers.

Each routine computes its answer by a route that shares nothing with
the production stepper: closed forms, high-accuracy ODE integration, or
fine-grid integral-equation marching with exact survival factors.
"""

from typing import Callable, Tuple

import numpy as np
from scipy.integrate import solve_ivp


def heat_mode_decay(sigma: float, t) -> np.ndarray:
    """Amplitude of the cos(pi x) Neumann mode under pure diffusion."""
    return np.exp(-sigma * np.pi**2 * np.asarray(t, dtype=float))


def damped_mode_solution(
    tau: float,
    rate: float,
    t_end: float,
    q0: float = 1.0,
    p0: float = 0.0,
):
    """High-accuracy solution of tau q'' + q' + rate q = 0.

    Returns callables (q, qprime) valid on [0, t_end].
    """

    def rhs(_t, y):
        return [y[1], -(y[1] + rate * y[0]) / tau]

    sol = solve_ivp(
        rhs,
        (0.0, t_end),
        [q0, p0],
        method="DOP853",
        rtol=1e-12,
        atol=1e-14,
        dense_output=True,
    )

    def q(t):
        return sol.sol(np.asarray(t, dtype=float))[0]

    def qprime(t):
        return sol.sol(np.asarray(t, dtype=float))[1]

    return q, qprime


def renewal_reference(
    beta_fn: Callable,
    mu: float,
    y0_fn: Callable,
    a_max: float,
    t_end: float,
    n_fine: int = 1280,
) -> Tuple[np.ndarray, np.ndarray, float]:
    """Fine-grid march of the age-only renewal equation.

    Solves B(t) = int_0^min(t, a_max) beta(a) e^(-mu a) B(t - a) da
                + e^(-mu t) int_t^a_max beta(a) y0(a - t) da
    with trapezoid quadrature on a grid of n_fine age steps, handling
    the a = 0 self-weight exactly.  Returns (times, B, total births),
    the total integrated over [0, t_end].
    """
    h = a_max / n_fine
    nt = int(round(t_end / h))
    ages = np.arange(n_fine + 1) * h
    wts = np.full(n_fine + 1, h)
    wts[0] = wts[-1] = 0.5 * h
    beta = beta_fn(ages)
    surv = np.exp(-mu * ages)

    B = np.zeros(nt + 1)
    B[0] = float(np.dot(wts, beta * y0_fn(ages)))
    hist_coef = wts * beta * surv  # weight of B(t - a) at lag a
    for k in range(1, nt + 1):
        t = k * h
        j = min(k, n_fine)
        acc = float(np.dot(hist_coef[1 : j + 1], B[k - 1 :: -1][:j]))
        if k < n_fine:
            cohort = y0_fn(ages[k + 1 :] - t)
            acc += np.exp(-mu * t) * float(
                np.dot(wts[k + 1 :] * beta[k + 1 :], cohort)
            )
        B[k] = acc / (1.0 - wts[0] * beta[0])
    times = np.arange(nt + 1) * h
    tw = np.full(nt + 1, h)
    tw[0] = tw[-1] = 0.5 * h
    total = float(np.dot(tw, B))
    return times, B, total
