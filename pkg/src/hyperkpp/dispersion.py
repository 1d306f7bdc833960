"""Closed-form speeds, decay rates and regimes for the hyperbolic KPP model."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import bisect

from .growth import GrowthFunction

CRITICAL_TOL = 1e-12
DEGENERATE_TOL = 1e-14


class Regime(enum.Enum):
    PARABOLIC = "parabolic"
    CRITICAL = "critical"
    HYPERBOLIC = "hyperbolic"


class RegimeError(ValueError):
    """Operation called outside the regime where it is defined."""


class DegenerateQuadraticError(ValueError):
    """The characteristic quadratic has a vanishing leading coefficient."""


class WeightSingularityError(ValueError):
    """The critical-regime weight slope diverges at the front edge."""


def classify(epsilon: float, g: GrowthFunction, critical: bool = False) -> Regime:
    """Regime from the sign of eps^2 F'(0) - 1.

    ``critical=True`` forces the critical regime, for callers that pass
    eps = 1/sqrt(F'(0)) symbolically.
    """
    if not epsilon > 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    if critical:
        return Regime.CRITICAL
    m = epsilon**2 * g.fprime0 - 1.0
    if abs(m) < CRITICAL_TOL:
        return Regime.CRITICAL
    return Regime.PARABOLIC if m < 0 else Regime.HYPERBOLIC


def minimal_speed(epsilon: float, g: GrowthFunction) -> float:
    r = classify(epsilon, g)
    if r is Regime.PARABOLIC:
        f0 = g.fprime0
        return 2.0 * math.sqrt(f0) / (1.0 + epsilon**2 * f0)
    return 1.0 / epsilon


def _sorted(roots):
    return tuple(sorted(roots, key=lambda z: (z.real, z.imag)))


def solve_quadratic(a: float, b: float, c: float, disc: float | None = None):
    """Roots of a x^2 + b x + c, computed without cancellation.

    ``disc`` may be supplied in a factored form that is more accurate than
    b^2 - 4ac. A discriminant within roundoff of zero gives a double root.
    """
    if abs(a) < DEGENERATE_TOL:
        raise DegenerateQuadraticError(f"leading coefficient {a!r} vanishes")
    if disc is None:
        disc = b * b - 4.0 * a * c
    scale = max(b * b, abs(4.0 * a * c), 1e-300)
    if abs(disc) <= 64 * np.finfo(float).eps * scale:
        disc = 0.0
    if disc < 0:
        re = -b / (2.0 * a)
        im = math.sqrt(-disc) / (2.0 * abs(a))
        return _sorted([complex(re, -im), complex(re, im)])
    sq = math.sqrt(disc)
    q = -0.5 * (b + math.copysign(sq, b)) if b != 0 else -0.5 * sq
    if q == 0.0:
        return (0j, 0j)
    r1 = q / a
    r2 = c / q if disc > 0 else r1
    return _sorted([complex(r1), complex(r2)])


def discriminant_zero(epsilon: float, s: float, g: GrowthFunction) -> float:
    """(eps^2 F'(0) + 1)^2 s^2 - 4 F'(0); negative means oscillatory tails."""
    f0 = g.fprime0
    return (epsilon**2 * f0 + 1.0) ** 2 * s**2 - 4.0 * f0


def char_roots_zero(epsilon: float, s: float, g: GrowthFunction):
    """Roots of the linearization at rho = 0:

    (eps^2 s^2 - 1) L^2 + (1 - eps^2 F'(0)) s L - F'(0) = 0.
    """
    f0 = g.fprime0
    a = epsilon**2 * s**2 - 1.0
    b = (1.0 - epsilon**2 * f0) * s
    disc = discriminant_zero(epsilon, s, g)
    # roundoff relative to the two terms, not to b^2 - 4ac which is tiny near eps s = 1
    if abs(disc) <= 64 * np.finfo(float).eps * 4.0 * f0:
        disc = 0.0
    return solve_quadratic(a, b, -f0, disc=disc)


def char_roots_one(epsilon: float, s: float, g: GrowthFunction):
    """Roots of the linearization at rho = 1 (always real)."""
    f1 = g.fprime1
    a = epsilon**2 * s**2 - 1.0
    b = -(1.0 - epsilon**2 * f1) * s
    disc = (epsilon**2 * f1 + 1.0) ** 2 * s**2 - 4.0 * f1
    return solve_quadratic(a, b, -f1, disc=disc)


def theta(epsilon: float, g: GrowthFunction, critical: bool = False) -> float:
    """Jump height of the sonic front: the root in (0, 1) of eps^2 F - rho."""
    r = classify(epsilon, g, critical=critical)
    if r is Regime.PARABOLIC:
        raise RegimeError("theta is only defined for eps^2 F'(0) >= 1")
    if r is Regime.CRITICAL:
        return 0.0

    def G(rho):
        return epsilon**2 * float(g.f(np.float64(rho))) - rho

    root = bisect(G, 1e-12, 1.0 - 1e-12, xtol=1e-16, rtol=4 * np.finfo(float).eps, maxiter=200)
    assert abs(G(root)) < 1e-13, G(root)
    return float(root)


def supersonic_rate(epsilon: float, s: float, g: GrowthFunction) -> float:
    """Slope of the unstable direction P = L v leaving (0, 0) when s > 1/eps."""
    if not s * epsilon > 1.0:
        raise ValueError("supersonic rate needs s > 1/eps")
    roots = char_roots_zero(epsilon, s, g)
    return max(r.real for r in roots)


def _smallest_positive(roots):
    pos = [r.real for r in roots if abs(r.imag) == 0.0 and r.real > 0]
    return min(pos) if pos else None


@dataclass(frozen=True)
class WaveParameters:
    epsilon: float
    s: float
    regime: Regime
    s_star: float
    lam: float | None
    lam_prime: float | None
    theta: float
    k_super: float | None

    @property
    def subsonic(self) -> bool:
        return self.epsilon * self.s < 1.0

    @property
    def sonic(self) -> bool:
        return abs(self.epsilon * self.s - 1.0) < DEGENERATE_TOL

    @property
    def minimal(self) -> bool:
        return abs(self.s - self.s_star) <= 1e-12 * max(1.0, self.s_star)


def wave_parameters(
    epsilon: float, g: GrowthFunction, s: float | None = None, critical: bool = False
) -> WaveParameters:
    """Bundle the derived quantities for (eps, s); ``s`` defaults to s*(eps)."""
    regime = classify(epsilon, g, critical=critical)
    s_star = 1.0 / epsilon if critical else minimal_speed(epsilon, g)
    if s is None:
        s = s_star
    if s < 0:
        raise ValueError("speed must be nonnegative")
    f0, f1 = g.fprime0, g.fprime1
    es = epsilon**2 * s**2 - 1.0
    if abs(es) < DEGENERATE_TOL:
        # Sonic speed: the quadratics collapse to linear equations.
        lin = f0 / ((1.0 - epsilon**2 * f0) * s) if abs(1.0 - epsilon**2 * f0) > CRITICAL_TOL else -1.0
        lam = lin if lin > 0 else None
        lam_prime = -f1 / ((1.0 - epsilon**2 * f1) * s)
        k = None
    else:
        lam = _smallest_positive(char_roots_zero(epsilon, s, g))
        lam_prime = _smallest_positive(char_roots_one(epsilon, s, g))
        k = epsilon**2 * s / es if es > 0 else None
    th = 0.0 if regime is Regime.PARABOLIC else theta(epsilon, g, critical=critical)
    return WaveParameters(epsilon, float(s), regime, s_star, lam, lam_prime, th, k)


def weight_slope(nu, params: WaveParameters, g: GrowthFunction):
    """Slope of the stability weight phi as a function of the profile value.

    Parabolic: s (1 - eps^2 F'(nu)) / (2 (1 - eps^2 s^2)).
    Critical/hyperbolic: eps F'(nu) / (1 - eps^2 F'(nu)).
    """
    eps, s = params.epsilon, params.s
    nu = np.asarray(nu, dtype=float)
    fp = g.df(nu)
    if params.regime is Regime.PARABOLIC:
        if not params.subsonic:
            raise RegimeError("parabolic weight needs a subsonic speed")
        out = s * (1.0 - eps**2 * fp) / (2.0 * (1.0 - eps**2 * s**2))
    else:
        den = 1.0 - eps**2 * fp
        if np.any(den <= 1e-12):
            raise WeightSingularityError("weight slope diverges where eps^2 F'(nu) -> 1")
        out = eps * fp / den
    return float(out) if out.ndim == 0 else out
