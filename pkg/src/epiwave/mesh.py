"""Discrete (t, a, x) grid with characteristic-aligned time and age steps.

The transport operator d/dt + d/da becomes an exact shift along grid
diagonals because the time step always equals the age step.  Every grid
node (i, j) then lies on exactly one diagonal, identified by the signed
offset t0 = i - j.
"""

from dataclasses import dataclass

import numpy as np

from .errors import InvalidSize, NonCommensurate, OutOfRange

#: Relative slack for the "t_max is a multiple of da" check.
_ROUND_TOL = 1e-9


@dataclass(frozen=True)
class Mesh:
    """Uniform grid on [0, t_max] x [0, a_max] x [0, 1].

    dt == da always holds; dx = 1/(nx-1) on the unit space interval.
    Instances are immutable and safe to share between workers.
    """

    t_max: float
    a_max: float
    nt: int
    na: int
    nx: int
    dt: float
    da: float
    dx: float

    def times(self) -> np.ndarray:
        return np.arange(self.nt + 1) * self.dt

    def ages(self) -> np.ndarray:
        return np.arange(self.na + 1) * self.da

    def xs(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.nx)


def build_mesh(t_max: float, a_max: float, na: int, nx: int) -> Mesh:
    """Build a mesh with dt = da = a_max/na and nt = t_max/dt.

    Raises InvalidSize for counts below the minima and NonCommensurate
    when t_max is not an integer multiple of the age step (up to one
    rounding unit).
    """
    if t_max <= 0 or a_max <= 0:
        raise InvalidSize("t_max and a_max must be positive")
    if na < 2:
        raise InvalidSize(f"na={na}, need at least 2 age steps")
    if nx < 3:
        raise InvalidSize(f"nx={nx}, need at least 3 space nodes")
    da = a_max / na
    ratio = t_max / da
    nt = int(round(ratio))
    if nt < 1 or abs(ratio - nt) > _ROUND_TOL * max(1.0, abs(ratio)):
        raise NonCommensurate(
            f"t_max={t_max} is not an integer multiple of da={da}"
        )
    return Mesh(
        t_max=t_max,
        a_max=a_max,
        nt=nt,
        na=na,
        nx=nx,
        dt=da,
        da=da,
        dx=1.0 / (nx - 1),
    )


def characteristic_ids(m: Mesh) -> range:
    """All diagonal offsets t0 covering the grid, from -na to nt."""
    return range(-m.na, m.nt + 1)


def characteristic_cells(m: Mesh, t0_index: int) -> list:
    """Lattice points of the diagonal through (t0, 0), clipped to the grid.

    For t0_index >= 0 the diagonal starts at (t, a) = (t0, 0) and is fed
    by births; for t0_index < 0 it starts at (0, -t0) and is fed by the
    initial data.  Returned as (t_index, a_index) pairs with consecutive
    entries differing by (+1, +1).
    """
    if not -m.na <= t0_index <= m.nt:
        raise OutOfRange(f"t0_index={t0_index} outside [-{m.na}, {m.nt}]")
    h_lo = max(-t0_index, 0)
    h_hi = min(m.nt - t0_index, m.na)
    return [(t0_index + h, h) for h in range(h_lo, h_hi + 1)]


def age_weights(m: Mesh) -> np.ndarray:
    """Trapezoid quadrature weights over the age nodes."""
    w = np.full(m.na + 1, m.da)
    w[0] = w[-1] = 0.5 * m.da
    return w


def space_weights(m: Mesh) -> np.ndarray:
    """Trapezoid quadrature weights over the space nodes."""
    w = np.full(m.nx, m.dx)
    w[0] = w[-1] = 0.5 * m.dx
    return w
