"""Coefficient f, Gaussian initial data, and the constant-selection procedure.

The selection procedure turns a target size ``epsilon`` and a ratio
``K > 1`` into the bundle (beta, gamma, x1, x0) that makes the blow-up
certificate work for a decaying coefficient f.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .core import INF, Grid1D, ScalarField, erfc, norm_lp

BETA_FRACTION = 0.9  # beta is this fraction of its admissible upper bound
TAIL_MARGIN = 0.9  # x0 tail condition is solved at 90% of its bound


class DecayRequiredError(ValueError):
    """The coefficient does not decay, so no admissible x0 exists."""


@dataclass(frozen=True)
class Potential:
    """Nonnegative coefficient ``f``.

    kind is one of ``gaussian_bump`` (``amplitude * exp(-(x/width)^2)``),
    ``constant`` (``amplitude`` everywhere) or ``zero``.
    """

    kind: str = "zero"
    amplitude: float = 0.0
    width: float = 1.0

    def __post_init__(self):
        if self.kind not in ("gaussian_bump", "constant", "zero"):
            raise ValueError(f"unknown potential kind {self.kind!r}")
        if self.kind == "gaussian_bump" and not (self.amplitude > 0 and self.width > 0):
            raise ValueError("gaussian_bump needs amplitude > 0 and width > 0")
        if self.kind == "constant" and not self.amplitude >= 0:
            raise ValueError("constant potential must be >= 0")

    @classmethod
    def gaussian_bump(cls, a: float, b: float) -> "Potential":
        return cls("gaussian_bump", float(a), float(b))

    @classmethod
    def constant(cls, c: float) -> "Potential":
        return cls("constant", float(c))

    @classmethod
    def zero(cls) -> "Potential":
        return cls("zero")

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "gaussian_bump":
            out = self.amplitude * np.exp(-((x / self.width) ** 2))
        elif self.kind == "constant":
            out = np.full_like(x, self.amplitude)
        else:
            out = np.zeros_like(x)
        return float(out) if out.ndim == 0 else out

    @property
    def sup_norm(self) -> float:
        return 0.0 if self.kind == "zero" else self.amplitude

    @property
    def derivative_bounds(self) -> tuple[float, float]:
        """Closed-form ``(sup |f'|, sup |f''|)``."""
        if self.kind != "gaussian_bump":
            return 0.0, 0.0
        a, b = self.amplitude, self.width
        return a * math.sqrt(2.0) / b * math.exp(-0.5), 2.0 * a / b**2

    @property
    def decays(self) -> bool:
        return self.kind != "constant" or self.amplitude == 0.0

    def support_radius(self, rel: float = 1e-17) -> float:
        """Radius beyond which ``f < rel * sup f``; infinite for constants."""
        if self.kind == "zero":
            return 0.0
        if self.kind == "constant":
            return INF
        return self.width * math.sqrt(math.log(1.0 / rel))


def eval_potential(f: Potential, x):
    return f(x)


@dataclass(frozen=True)
class GaussianIC:
    """``h(x) = -beta * exp(-beta^(3/2) (x - x0)^2)``."""

    beta: float
    x0: float = 0.0

    def __call__(self, x):
        s = np.asarray(x, dtype=float) - self.x0
        out = -self.beta * np.exp(-(self.beta**1.5) * s * s)
        return float(out) if out.ndim == 0 else out

    @property
    def sup_norm(self) -> float:
        return self.beta

    @property
    def mu(self) -> float:
        """sup |h''|, attained at the centre."""
        return 2.0 * self.beta**2.5

    @property
    def length_scale(self) -> float:
        return self.beta ** -0.75

    def grid(self, half_width: float = 12.0, n_points: int = 4001) -> Grid1D:
        """Grid centred on x0 spanning ``half_width`` length scales each way."""
        r = half_width * self.length_scale
        return Grid1D(self.x0 - r, self.x0 + r, n_points)

    def to_field(self, grid: Grid1D | None = None) -> ScalarField:
        grid = grid or self.grid()
        return ScalarField(grid, self(grid.x))


def make_gaussian_ic(beta: float, x0: float = 0.0) -> GaussianIC:
    if not beta > 0:
        raise ValueError(f"beta must be positive, got {beta}")
    return GaussianIC(float(beta), float(x0))


def find_x1(f: Potential, gamma: float, tol: float = 1e-12) -> float:
    """Largest x1 with ``f(x) <= gamma`` for every ``x < x1``.

    Returns ``INF`` when gamma dominates f everywhere.
    """
    if not gamma > 0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    if gamma >= f.sup_norm:
        return INF
    if f.kind == "constant":
        raise DecayRequiredError(f"constant f={f.amplitude} > gamma on the whole line")
    # gaussian_bump: f increases on (-inf, 0]; bisect the left tail
    hi = 0.0
    lo = -f.width
    while f(lo) > gamma:
        lo *= 2.0
    while hi - lo > tol * max(1.0, abs(lo)):
        mid = 0.5 * (lo + hi)
        if f(mid) <= gamma:
            lo = mid
        else:
            hi = mid
    return lo


def tail_lhs(f: Potential, x1: float, x0: float, t):
    """``sqrt(t) * |f|_inf * (1 - erf((x1 - x0) / (2 sqrt t)))``."""
    t = np.asarray(t, dtype=float)
    return np.sqrt(t) * f.sup_norm * erfc((x1 - x0) / (2.0 * np.sqrt(t)))


def find_x0(f: Potential, gamma: float, x1: float) -> float:
    """Pick ``x0 < x1`` so the kernel tail beyond x1 stays below gamma.

    The tail term grows with t, so the condition is imposed at the window
    end ``t = 1/(4 gamma^2)``, where it reads
    ``erfc((x1 - x0) gamma) < 2 gamma^2 / |f|_inf``; we solve it with a
    10% margin. Any smaller x0 also works.
    """
    if not gamma > 0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    if not f.decays:
        raise DecayRequiredError("decay of f required: constant positive f admits no x0")
    if not math.isfinite(x1):
        return 0.0
    if f.sup_norm == 0.0:
        return x1 - 1.0
    target = TAIL_MARGIN * 2.0 * gamma**2 / f.sup_norm
    if target >= 1.0:
        # erfc(z) <= 1 for z >= 0: any separation works
        return x1 - 1.0
    hi = 1.0
    while erfc(hi) > target:
        hi *= 2.0
    z = brentq(lambda z: erfc(z) - target, 0.0, hi, xtol=1e-14, rtol=1e-14)
    return x1 - z / gamma


@dataclass(frozen=True)
class TheoremParams:
    epsilon: float
    K: float
    beta: float
    gamma: float
    x1: float
    x0: float

    @property
    def t_window(self) -> float:
        return 1.0 / (4.0 * self.gamma**2)

    @property
    def mu(self) -> float:
        return 2.0 * self.beta**2.5

    @property
    def initial_condition(self) -> GaussianIC:
        return GaussianIC(self.beta, self.x0)

    def validate(self, f: Potential, n_samples: int = 2001) -> list[str]:
        """Names of violated invariants (empty when all hold)."""
        bad = []
        bound = min(self.epsilon, self.epsilon**4 / (16.0 * math.pi**2))
        if not (0 < self.beta < bound):
            bad.append(f"beta={self.beta} not in (0, {bound})")
        if not self.K > 1:
            bad.append(f"K={self.K} must exceed 1")
        if not math.isclose(self.beta / (27.0 * self.gamma**2), self.K, rel_tol=1e-12):
            bad.append("beta/(27 gamma^2) != K")
        if math.isfinite(self.x1):
            span = max(10.0, 50.0 * f.width if f.kind == "gaussian_bump" else 10.0)
            xs = np.linspace(self.x1 - span, self.x1, n_samples)
            if np.any(f(xs) > self.gamma * (1 + 1e-12)):
                bad.append("f(x) > gamma for some sampled x < x1")
            ts = self.t_window * np.logspace(-8, 0, n_samples, endpoint=False)
            if np.any(tail_lhs(f, self.x1, self.x0, ts) >= self.gamma):
                bad.append("kernel tail condition fails for some sampled t in the window")
        if not self.x0 < self.x1:
            bad.append("x0 must be < x1")
        return bad


def initial_norms(ic: GaussianIC, ps=(1.0, 2.0, INF)) -> dict[float, float]:
    """Numerically evaluated L^p norms of the initial data."""
    fld = ic.to_field()
    return {p: norm_lp(fld, p) for p in ps}


def select_parameters(epsilon: float, K: float, f: Potential) -> TheoremParams:
    """Run the constant-selection procedure for ``(epsilon, K, f)``."""
    if not epsilon > 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    if not K > 1:
        raise ValueError(f"K must exceed 1, got {K}")
    if not f.decays:
        raise DecayRequiredError("decay of f required")
    beta = BETA_FRACTION * min(epsilon, epsilon**4 / (16.0 * math.pi**2))
    gamma = math.sqrt(beta / (27.0 * K))
    x1 = find_x1(f, gamma)
    x0 = find_x0(f, gamma, x1)
    params = TheoremParams(epsilon, K, beta, gamma, x1, x0)
    bad = params.validate(f)
    if bad:
        raise ValueError("parameter selection failed: " + "; ".join(bad))
    norms = initial_norms(params.initial_condition)
    too_big = {p: v for p, v in norms.items() if not v < epsilon}
    if too_big:
        raise ValueError(f"initial data not small enough: {too_big}")
    return params
