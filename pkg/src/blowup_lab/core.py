"""Grids, nodal fields, trapezoid quadrature, norms and the heat kernel.

Everything here is a pure function of its inputs. Fields are frozen
snapshots whose value arrays are marked read-only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.special

INF = math.inf  # sentinel for the sup norm in ``norm_lp``


class NumericalInvariantError(RuntimeError):
    """A numerical invariant (finiteness, sign, ordering) was violated."""


@dataclass(frozen=True)
class Grid1D:
    x_min: float
    x_max: float
    n_points: int

    def __post_init__(self):
        if not (math.isfinite(self.x_min) and math.isfinite(self.x_max)):
            raise ValueError("grid bounds must be finite")
        if not self.x_min < self.x_max:
            raise ValueError(f"x_min={self.x_min} must be < x_max={self.x_max}")
        if int(self.n_points) != self.n_points or self.n_points < 3:
            raise ValueError(f"n_points must be an integer >= 3, got {self.n_points}")
        object.__setattr__(self, "n_points", int(self.n_points))

    @classmethod
    def from_spacing(cls, x_min: float, x_max: float, dx: float) -> "Grid1D":
        """Grid with spacing as close to ``dx`` as fits ``[x_min, x_max]``."""
        n = int(round((x_max - x_min) / dx)) + 1
        return cls(x_min, x_max, n)

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / (self.n_points - 1)

    @property
    def x(self) -> np.ndarray:
        # x_min + i*dx per node; no cumulative summation
        nodes = self.x_min + np.arange(self.n_points) * self.dx
        nodes.flags.writeable = False
        return nodes

    def weights(self) -> np.ndarray:
        """Composite trapezoid weights."""
        w = np.full(self.n_points, self.dx)
        w[0] = w[-1] = 0.5 * self.dx
        return w


@dataclass(frozen=True, eq=False)
class ScalarField:
    grid: Grid1D
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        vals = np.array(self.values, dtype=float, copy=True)
        if vals.shape != (self.grid.n_points,):
            raise ValueError(
                f"field has shape {vals.shape}, grid expects ({self.grid.n_points},)"
            )
        if not np.all(np.isfinite(vals)):
            raise NumericalInvariantError("field contains non-finite values")
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)

    @classmethod
    def from_function(cls, grid: Grid1D, fn) -> "ScalarField":
        return cls(grid, np.asarray(fn(grid.x), dtype=float) * np.ones(grid.n_points))

    def __mul__(self, other):
        if isinstance(other, ScalarField):
            _require_same_grid(self, other)
            return ScalarField(self.grid, self.values * other.values)
        return ScalarField(self.grid, self.values * float(other))

    __rmul__ = __mul__

    def __add__(self, other):
        _require_same_grid(self, other)
        return ScalarField(self.grid, self.values + other.values)

    def __neg__(self):
        return ScalarField(self.grid, -self.values)


@dataclass(frozen=True, eq=False)
class TimeSeries:
    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        t = np.array(self.times, dtype=float, copy=True)
        v = np.array(self.values, dtype=float, copy=True)
        if t.ndim != 1 or t.shape != v.shape:
            raise ValueError("times and values must be 1-D arrays of equal length")
        if t.size > 1 and not np.all(np.diff(t) > 0):
            raise ValueError("times must be strictly increasing")
        t.flags.writeable = False
        v.flags.writeable = False
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", v)

    def __len__(self):
        return self.times.size

    def at(self, t: float) -> float:
        """Linear interpolation; raises outside the sampled range."""
        lo, hi = self.times[0], self.times[-1]
        slack = 1e-12 * max(1.0, abs(hi))
        if t < lo - slack or t > hi + slack:
            raise ValueError(f"t={t} outside sampled range [{lo}, {hi}]")
        return float(np.interp(t, self.times, self.values))


def _require_same_grid(a: ScalarField, b: ScalarField):
    if a.grid != b.grid:
        raise ValueError(f"grid mismatch: {a.grid} vs {b.grid}")


def _check_finite(field: ScalarField):
    # ScalarField already guarantees this; arrays built by hand may not
    if not np.all(np.isfinite(field.values)):
        raise ValueError("field contains non-finite values")


def integrate(field: ScalarField) -> float:
    """Composite trapezoid value of the field over the grid interval."""
    _check_finite(field)
    return float(np.dot(field.grid.weights(), field.values))


def norm_lp(field: ScalarField, p: float) -> float:
    """L^p norm; ``p = INF`` gives the max norm."""
    if not p >= 1:
        raise ValueError(f"norm exponent p must be >= 1, got {p}")
    _check_finite(field)
    a = np.abs(field.values)
    if p == INF:
        return float(a.max())
    if p == 1:
        return float(np.dot(field.grid.weights(), a))
    # scale out the max to keep |u|^p representable for large p
    m = a.max()
    if m == 0.0:
        return 0.0
    return float(m * np.dot(field.grid.weights(), (a / m) ** p) ** (1.0 / p))


def erf(x):
    """Error function (scalar or array)."""
    out = scipy.special.erf(x)
    return float(out) if np.ndim(out) == 0 else out


def erfc(x):
    out = scipy.special.erfc(x)
    return float(out) if np.ndim(out) == 0 else out


def heat_kernel(t: float, x, x0):
    """Fundamental solution ``(4 pi t)^(-1/2) exp(-(x - x0)^2 / 4t)``."""
    if not t > 0:
        raise ValueError(f"heat kernel needs t > 0, got {t}")
    d = np.asarray(x, dtype=float) - np.asarray(x0, dtype=float)
    out = np.exp(-d * d / (4.0 * t)) / math.sqrt(4.0 * math.pi * t)
    return float(out) if out.ndim == 0 else out
