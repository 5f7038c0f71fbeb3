"""Pairing functional, fence inequalities and the blow-up certificate.

``J(s) = <w(t - s), u(s)>`` pairs the nonlinear solution with the
time-reversed linearized solution. Its derivative only sees the
nonlinearity, which turns blow-up of ``u`` into an ordinary differential
inequality for J.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import ScalarField, TimeSeries, heat_kernel, integrate
from .model import Potential, TheoremParams
from .solver import Trajectory

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class FenceResult:
    t: float
    lhs: float
    rhs: float

    @property
    def satisfied(self) -> bool:
        return bool(self.lhs <= self.rhs + 1e-12)


@dataclass(frozen=True)
class CertificateResult:
    params: TheoremParams
    t0: float
    A_max: float
    asym_value: float
    asym_corrected: float
    within_window: bool

    @property
    def passes(self) -> bool:
        return bool(self.A_max > 1.0 and self.within_window)


def pairing_J(v: ScalarField, u: ScalarField) -> float:
    if v.grid != u.grid:
        raise ValueError("pairing needs fields on the same grid")
    return integrate(v * u)


def _cumtrapz(t, y):
    out = np.zeros_like(t)
    out[1:] = np.cumsum(0.5 * (y[1:] + y[:-1]) * np.diff(t))
    return out


def j_identity_residual(u_traj: Trajectory, w_traj: Trajectory, t: float) -> TimeSeries:
    """Residual of ``J(s) - J(0) = -int_0^s <v, |u|^k> dr`` on ``[0, t]``.

    ``v(s) = w(t - s)``; the time integral is a trapezoid rule over the
    stored u snapshot times. For a linear ``u_traj`` the right side is 0.
    """
    if u_traj.grid != w_traj.grid:
        raise ValueError("u and w trajectories live on different grids")
    slack = 1e-12 * max(1.0, t)
    if t > u_traj.times[-1] + slack or t > w_traj.times[-1] + slack:
        raise ValueError(f"t={t} exceeds a trajectory's time range")
    if u_traj.times[0] > slack or w_traj.times[0] > slack:
        raise ValueError("both trajectories must start at t = 0")
    s = u_traj.times[u_traj.times <= t + slack]
    J = np.empty(s.size)
    g = np.zeros(s.size)
    for i, si in enumerate(s):
        v = w_traj.field_at(max(t - si, 0.0))
        u = u_traj.field_at(si)
        J[i] = pairing_J(v, u)
        if u_traj.nonlinear:
            g[i] = -integrate(ScalarField(u.grid, v.values * np.abs(u.values) ** u_traj.degree))
    return TimeSeries(s, (J - J[0]) - _cumtrapz(s, g))


def pairing_series(u_traj: Trajectory, w_traj: Trajectory, t: float) -> TimeSeries:
    """``J(s)`` on the u snapshot times in ``[0, t]``."""
    s = u_traj.times[u_traj.times <= t + 1e-12 * max(1.0, t)]
    return TimeSeries(s, [pairing_J(w_traj.field_at(max(t - si, 0.0)), u_traj.field_at(si)) for si in s])


def _inverse_mass_integral(norm1: TimeSeries, t: float) -> float:
    # [0, first sample] is filled with the first sample's value
    ts, vs = norm1.times, norm1.values
    if t < ts[0]:
        return t / vs[0]
    t = min(t, ts[-1])
    keep = ts < t
    tt = np.append(ts[keep], t)
    yy = np.append(1.0 / vs[keep], 1.0 / norm1.at(t))
    return ts[0] / vs[0] + float(np.trapezoid(yy, tt))


def fence_check(w_traj: Trajectory, h: ScalarField, t: float) -> FenceResult:
    """``-int w(t) h dx <= (int_0^t ds / |w(s)|_1)^(-1)``."""
    if np.any(h.values > 0):
        raise ValueError("fence inequality needs h <= 0")
    lhs = -pairing_J(w_traj.field_at(t), h)
    rhs = 1.0 / _inverse_mass_integral(w_traj.norm_1, t)
    return FenceResult(float(t), float(lhs), float(rhs))


def constant_ic_margin(epsilon: float, w_norm1: TimeSeries, t: float) -> float:
    """``epsilon * int_0^t |w(t)|_1 / |w(s)|_1 ds``; above 1 certifies blow-up by t."""
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    return epsilon * w_norm1.at(t) * _inverse_mass_integral(w_norm1, t)


def margin_crossing_time(epsilon: float, w_norm1: TimeSeries) -> float | None:
    """First sampled-time crossing of margin 1, linearly interpolated."""
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    ts, vs = w_norm1.times, w_norm1.values
    m = epsilon * vs * (ts[0] / vs[0] + _cumtrapz(ts, 1.0 / vs))
    above = np.flatnonzero(m > 1.0)
    if above.size == 0:
        return None
    b = int(above[0])
    if b == 0:
        return float(ts[0])
    a = b - 1
    return float(ts[a] + (1.0 - m[a]) / (m[b] - m[a]) * (ts[b] - ts[a]))


def poly_decay_bound(epsilon: float, alpha: float) -> float:
    """Blow-up deadline ``(alpha + 1)/epsilon`` when ``|w(t)|_1 ~ t^-alpha``."""
    if not epsilon > 0 or not alpha >= 0:
        raise ValueError("need epsilon > 0 and alpha >= 0")
    return (alpha + 1.0) / epsilon


def certificate_curve(params: TheoremParams, t):
    """``A(t) = -2 b^(5/2) t^2 - 2 b^(3/2) t^(3/2) / sqrt(27 K) + b t``."""
    b, K = params.beta, params.K
    t = np.asarray(t, dtype=float)
    out = -2.0 * b**2.5 * t * t - 2.0 * b**1.5 * t**1.5 / math.sqrt(27.0 * K) + b * t
    return float(out) if out.ndim == 0 else out


def _certificate_slope(params: TheoremParams, t: float) -> float:
    b, K = params.beta, params.K
    return -4.0 * b**2.5 * t - 3.0 * b**1.5 * math.sqrt(t) / math.sqrt(27.0 * K) + b


def _golden_section(fn, lo, hi, iters=60):
    x1 = hi - GOLDEN * (hi - lo)
    x2 = lo + GOLDEN * (hi - lo)
    f1, f2 = fn(x1), fn(x2)
    for _ in range(iters):
        if f1 < f2:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + GOLDEN * (hi - lo)
            f2 = fn(x2)
        else:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - GOLDEN * (hi - lo)
            f1 = fn(x1)
    return lo, hi


def certificate_A(params: TheoremParams) -> CertificateResult:
    """Maximise A on ``(0, 1/(4 gamma^2)]``.

    Golden-section search narrows the bracket; bisection on the (strictly
    decreasing) derivative then pins the maximiser to rounding.
    """
    window = params.t_window
    lo, hi = _golden_section(lambda s: certificate_curve(params, s), 0.0, window)
    lo, hi = max(0.0, lo - (hi - lo)), min(window, hi + (hi - lo))
    if _certificate_slope(params, hi) >= 0:
        t0 = hi
    else:
        if _certificate_slope(params, lo) <= 0:
            lo = 0.0
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if mid in (lo, hi):
                break
            if _certificate_slope(params, mid) > 0:
                lo = mid
            else:
                hi = mid
        t0 = 0.5 * (lo + hi)
    b, K = params.beta, params.K
    return CertificateResult(
        params=params,
        t0=t0,
        A_max=certificate_curve(params, t0),
        asym_value=K - 18.0 * K * math.sqrt(b) + 432.0 * K**3 * b,
        asym_corrected=K - 18.0 * K**2 * math.sqrt(b) + 432.0 * K**3 * b,
        within_window=bool(0.0 < t0 < window),
    )


def kernel_source_integral(f: Potential, x0: float, t: float, n_time: int = 2001, n_space: int = 2001) -> float:
    """``int_0^t int f(x) G(s, x, x0) dx ds`` by nested trapezoid rules.

    The inner integral runs over the overlap of the kernel's effective
    support with f's. The outer one is a trapezoid rule on a geometric grid over
    ``[1e-12 t, t]`` (resolving the late turn-on of a distant source), plus
    ``f(x0) * 1e-12 t`` for the initial sliver.
    """
    if not t > 0:
        raise ValueError("t must be positive")
    if f.sup_norm == 0.0:
        return 0.0
    log_s = np.linspace(math.log(t) - 12.0 * math.log(10.0), math.log(t), n_time)
    s = np.exp(log_s)
    inner = np.empty_like(s)
    R = f.support_radius()
    for i, si in enumerate(s):
        reach = 18.0 * math.sqrt(si)  # kernel below exp(-81) of its peak beyond this
        a, b = max(x0 - reach, -R), min(x0 + reach, R)
        if a >= b:
            inner[i] = 0.0
            continue
        xs = np.linspace(a, b, n_space)
        inner[i] = float(np.trapezoid(f(xs) * heat_kernel(si, xs, x0), xs))
    return float(f(x0)) * s[0] + float(np.trapezoid(inner, s))


def kernel_tail_bound(f: Potential, params: TheoremParams, t: float) -> FenceResult:
    """Compare the source integral with ``gamma sqrt(t)`` inside the window."""
    if not 0 < t < params.t_window:
        raise ValueError(f"t={t} outside the window (0, {params.t_window})")
    lhs = kernel_source_integral(f, params.x0, t)
    return FenceResult(float(t), float(lhs), params.gamma * math.sqrt(t))


def lower_bound_chain(f: Potential, params: TheoremParams, t: float, kernel_integral: float | None = None) -> float:
    """Lower bound ``beta - mu t - 2 beta I(t)`` for ``int w(t) (-h) dx``.

    ``I(t)`` is the source integral unless ``kernel_integral`` overrides it.
    """
    if not 0 < t < params.t_window:
        raise ValueError(f"t={t} outside the window (0, {params.t_window})")
    if kernel_integral is None:
        kernel_integral = kernel_source_integral(f, params.x0, t)
    b = params.beta
    return b - params.mu * t - 2.0 * b * kernel_integral
