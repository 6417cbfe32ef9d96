"""Per-time-slice state storage and the discrete norms used everywhere.

A state slice holds the compartment densities y(a, x) together with the
transport derivative dy = (d/dt + d/da) y on the same nodes.  Norms are
trapezoid quadratures of the L2(age x space) and L2(age, H1(space))
integrands; the spatial derivative uses central differences with
second-order one-sided stencils at the boundary.
"""

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import LengthMismatch, ShapeMismatch
from .mesh import Mesh, age_weights, space_weights


@dataclass
class StateField:
    """Compartment densities and their transport derivative on one slice.

    values and slope are (n, na+1, nx) arrays; slope may be None when a
    caller only needs the zeroth-order state.
    """

    values: np.ndarray
    slope: Optional[np.ndarray] = None

    @property
    def n(self) -> int:
        return self.values.shape[0]

    def copy(self) -> "StateField":
        return StateField(
            self.values.copy(),
            None if self.slope is None else self.slope.copy(),
        )

    def check_shape(self, m: Mesh) -> None:
        want = (self.values.shape[0], m.na + 1, m.nx)
        if self.values.shape != want:
            raise ShapeMismatch(f"values shape {self.values.shape} != {want}")
        if self.slope is not None and self.slope.shape != want:
            raise ShapeMismatch(f"slope shape {self.slope.shape} != {want}")


def state_zeros(n: int, m: Mesh, with_slope: bool = True) -> StateField:
    shape = (n, m.na + 1, m.nx)
    return StateField(
        np.zeros(shape), np.zeros(shape) if with_slope else None
    )


@dataclass
class NormReport:
    """Norm summary of a run difference.

    l2_H / h1_V integrate the slice norms over time; sup_t_V and
    sup_t_H_slope are the C([0,T]) norms of the values (in H1) and of
    the slopes (in L2); sup_abs is the plain max over all grid points.
    """

    l2_H: float = 0.0
    h1_V: float = 0.0
    sup_t_V: float = 0.0
    sup_t_H_slope: float = 0.0
    sup_abs: float = 0.0


def _values_of(f) -> np.ndarray:
    return f.values if isinstance(f, StateField) else np.asarray(f)


def norm_H(f, m: Mesh) -> float:
    """Discrete L2 norm over (age, space), summed over compartments."""
    v = _values_of(f)
    if v.shape[-2:] != (m.na + 1, m.nx):
        raise ShapeMismatch(f"field shape {v.shape} does not match mesh")
    wa = age_weights(m)
    wx = space_weights(m)
    return float(np.sqrt(np.einsum("iax,a,x->", v * v, wa, wx)))


def space_gradient(v: np.ndarray, m: Mesh) -> np.ndarray:
    """d/dx along the last axis; one-sided second order at the ends."""
    return np.gradient(v, m.dx, axis=-1, edge_order=2)


def norm_V(f, m: Mesh) -> float:
    """Discrete L2(age, H1(space)) norm."""
    v = _values_of(f)
    if v.shape[-1] != m.nx or m.nx < 3:
        raise ShapeMismatch("need nx >= 3 matching the mesh")
    if v.shape[-2:] != (m.na + 1, m.nx):
        raise ShapeMismatch(f"field shape {v.shape} does not match mesh")
    g = space_gradient(v, m)
    wa = age_weights(m)
    wx = space_weights(m)
    return float(np.sqrt(np.einsum("iax,a,x->", v * v + g * g, wa, wx)))


def age_integral(values: np.ndarray, m: Mesh) -> np.ndarray:
    """Trapezoid integral over age: (n, na+1, nx) -> (n, nx)."""
    return np.einsum("iax,a->ix", values, age_weights(m))


def diff_norms(
    run_a: Sequence[StateField], run_b: Sequence[StateField], m: Mesh
) -> NormReport:
    """Norms of the slice-wise difference between two stored runs.

    Both runs must hold the same number of slices with equal shapes and
    populated slopes.  Time integrals use trapezoid weights over the
    stored slices, assuming uniform spacing.
    """
    if len(run_a) != len(run_b):
        raise LengthMismatch(f"runs of length {len(run_a)} vs {len(run_b)}")
    if len(run_a) == 0:
        return NormReport()
    sup_v = 0.0
    sup_h = 0.0
    sup_abs = 0.0
    h_sq = []
    v_sq = []
    for sa, sb in zip(run_a, run_b):
        if sa.values.shape != sb.values.shape:
            raise ShapeMismatch("slice shapes differ between runs")
        dv = sa.values - sb.values
        nv = norm_V(dv, m)
        nh = norm_H(dv, m)
        sup_v = max(sup_v, nv)
        sup_abs = max(sup_abs, float(np.max(np.abs(dv))))
        v_sq.append(nv * nv)
        h_sq.append(nh * nh)
        if sa.slope is not None and sb.slope is not None:
            sup_h = max(sup_h, norm_H(sa.slope - sb.slope, m))
    # Uniform trapezoid in time over the stored span.
    k = len(run_a)
    if k > 1:
        wt = np.full(k, m.t_max / (k - 1))
        wt[0] = wt[-1] = 0.5 * wt[0]
    else:
        wt = np.array([1.0])
    return NormReport(
        l2_H=float(np.sqrt(np.dot(wt, h_sq))),
        h1_V=float(np.sqrt(np.dot(wt, v_sq))),
        sup_t_V=sup_v,
        sup_t_H_slope=sup_h,
        sup_abs=sup_abs,
    )
