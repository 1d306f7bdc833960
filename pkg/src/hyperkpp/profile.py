"""Traveling-front profiles in every regime of the hyperbolic KPP model.

Smooth fronts are built from the phase-plane reduction p(nu) = -nu'(z): the
heteroclinic orbit is integrated between the two equilibria starting on the
linearized eigendirection, then nu(z) is recovered by integrating
nu' = -p(nu) away from the half level. Sonic fronts solve first-order ODEs
directly.
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.integrate import solve_ivp
from scipy.special import expit, logit

from .dispersion import (
    Regime,
    RegimeError,
    WaveParameters,
    char_roots_zero,
    discriminant_zero,
    supersonic_rate,
    wave_parameters,
)
from .growth import GrowthFunction


NEAR_ONE = 1e-8


class FrontKind(enum.Enum):
    SMOOTH_PARABOLIC = "smooth_parabolic"
    WEAK_SONIC = "weak_sonic"
    DISCONTINUOUS_HYPERBOLIC = "discontinuous_hyperbolic"
    CONTINUOUS_CRITICAL = "continuous_critical"
    SMOOTH_SUPERSONIC = "smooth_supersonic"


class ShiftConvention(enum.Enum):
    HALF_LEVEL_AT_ORIGIN = "half_level_at_origin"
    JUMP_AT_ORIGIN = "jump_at_origin"


class NoFrontError(ValueError):
    """No monotone front exists: the tail at +infinity would oscillate."""

    def __init__(self, message, discriminant=None, roots=None):
        super().__init__(message)
        self.discriminant = discriminant
        self.roots = roots


class IntegrationError(RuntimeError):
    pass


class TrappingError(IntegrationError):
    """The supersonic orbit left its trapping region."""


@dataclass(frozen=True)
class ProfileOptions:
    dz: float = 0.005
    tol_end: float = 1e-6
    delta0: float = 1e-6
    rtol: float = 1e-12
    atol: float = 1e-15
    # The sampled window always covers this range, extended if the tails need more.
    z_range: tuple[float, float] | None = None
    trap_tol: float = 1e-8
    # Smooth constructors warn when the sampled profile misses the ODE by more.
    residual_tol: float | None = 1e-6


@dataclass(frozen=True)
class PhaseOrbit:
    v: np.ndarray
    p: np.ndarray
    lam: float
    k: float | None = None

    def upper_bound(self, g: GrowthFunction) -> np.ndarray:
        bound = self.lam * self.v
        if self.k is not None:
            bound = np.minimum(bound, self.k * g.f(self.v))
        return bound


@dataclass(frozen=True)
class FrontProfile:
    kind: FrontKind
    params: WaveParameters
    z: np.ndarray
    nu: np.ndarray
    dnu: np.ndarray
    shift_convention: ShiftConvention
    jump_location: float | None = None
    slope: Callable[[np.ndarray], np.ndarray] = field(repr=False, default=None)
    _dense: Callable[[np.ndarray], np.ndarray] = field(repr=False, default=None)

    @property
    def dz(self) -> float:
        return float(self.z[1] - self.z[0])

    def __call__(self, z):
        """Profile value at arbitrary abscissae (clamped outside the window)."""
        return self._dense(np.asarray(z, dtype=float))

    def derivative(self, z):
        """nu'(z) from the profile ODE; zero beyond a jump."""
        z = np.asarray(z, dtype=float)
        out = self.slope(self(z))
        if self.jump_location is not None:
            out = np.where(z > self.jump_location, 0.0, out)
        return out

    def half_level(self) -> float:
        if self.shift_convention is ShiftConvention.HALF_LEVEL_AT_ORIGIN:
            return 0.0
        from .diagnostics import front_position

        return front_position(self.z, self.nu, 0.5)


def _grid(lo: float, hi: float, dz: float) -> np.ndarray:
    i0 = math.floor(lo / dz + 1e-9)
    i1 = math.ceil(hi / dz - 1e-9)
    return np.arange(i0, i1 + 1) * dz


def _integrate_z(rhs, nu_start, direction, stop_level, z_need, opts):
    """Integrate nu' = rhs(nu) from z = 0 until nu passes ``stop_level``
    and |z| >= |z_need|.

    The state is logit(nu) so that both tails keep relative accuracy. Near
    nu = 1 the growth term loses its relative precision, so the integration
    stops at 1 - NEAR_ONE and logit(nu) is continued linearly (exponential
    approach to 1). Returns a dense callable z -> nu and the end abscissa.
    """

    def fun(z, y):
        nu = expit(y[0])
        return [float(rhs(nu)) / (nu * expit(-y[0]))]

    y_stop = logit(stop_level)
    if direction > 0:
        def event(z, y):
            return max(y[0] - y_stop, z_need - z)
    else:
        def event(z, y):
            return max(y_stop - y[0], z - z_need)
    event.terminal = True
    events = [event]
    if stop_level > 0.5:
        y_cap = logit(1.0 - NEAR_ONE)

        def cap(z, y):
            return y[0] - y_cap
        cap.terminal = True
        cap.direction = 1
        events.append(cap)

    span = 1e4 if direction > 0 else -1e4
    sol = solve_ivp(fun, (0.0, span), [logit(nu_start)], method="DOP853", rtol=opts.rtol,
                    atol=opts.atol, dense_output=True, events=events)
    if sol.status != 1:
        raise IntegrationError(f"profile integration did not reach the tail: {sol.message}")
    dense = sol.sol
    z_end = float(sol.t[-1])
    capped = len(events) > 1 and len(sol.t_events[1]) > 0
    if not capped:
        return (lambda z: expit(dense(z)[0])), z_end

    y_end = float(sol.y[0, -1])
    rate = fun(z_end, [y_end])[0]

    def extended(z):
        z = np.asarray(z, dtype=float)
        beyond = (z - z_end) * direction > 0
        y = np.where(beyond, y_end + rate * (z - z_end), dense(np.where(beyond, z_end, z))[0])
        return expit(y)

    reach = z_need if (z_need - z_end) * direction > 0 else z_end
    return extended, float(reach)


def _two_sided(rhs, opts, z_lo_need=0.0, z_hi_need=0.0):
    """Integrate nu' = rhs(nu) both ways from nu(0) = 1/2."""
    fwd, z_hi = _integrate_z(rhs, 0.5, +1, opts.tol_end / 2, z_hi_need, opts)
    bwd, z_lo = _integrate_z(rhs, 0.5, -1, 1.0 - opts.tol_end / 2, z_lo_need, opts)

    def dense(z):
        z = np.asarray(z, dtype=float)
        zc = np.clip(z, z_lo, z_hi)
        out = np.empty_like(zc)
        pos = zc >= 0
        if np.any(pos):
            out[pos] = fwd(zc[pos])
        if np.any(~pos):
            out[~pos] = bwd(zc[~pos])
        return out

    return dense, z_lo, z_hi


def _needs(opts):
    if opts.z_range is None:
        return 0.0, 0.0
    return min(opts.z_range[0], 0.0), max(opts.z_range[1], 0.0)


def _smooth_profile(kind, params, p_of_nu, opts, g=None) -> FrontProfile:
    def rhs(nu):
        return -p_of_nu(nu)

    lo_need, hi_need = _needs(opts)
    dense, z_lo, z_hi = _two_sided(rhs, opts, lo_need, hi_need)
    z = _grid(z_lo, z_hi, opts.dz)
    z = z[(z >= z_lo - 1e-12) & (z <= z_hi + 1e-12)]
    nu = dense(z)
    nu[np.argmin(np.abs(z))] = 0.5
    nu = np.clip(nu, 0.0, 1.0)
    slope = lambda v: -p_of_nu(np.asarray(v, dtype=float))  # noqa: E731
    prof = FrontProfile(kind=kind, params=params, z=z, nu=nu, dnu=slope(nu),
                        shift_convention=ShiftConvention.HALF_LEVEL_AT_ORIGIN,
                        slope=slope, _dense=dense)
    if opts.residual_tol is not None and g is not None and kind is FrontKind.SMOOTH_PARABOLIC:
        r = residual(prof, g)
        if r > opts.residual_tol:
            warnings.warn(f"profile residual {r:.3g} exceeds {opts.residual_tol:.3g}; "
                          "reduce dz", stacklevel=3)
    return prof


def _phase_interpolant(sol, v_lo, v_hi, slope_lo, slope_hi):
    """p(nu) from a phase-plane OdeSolution, extended linearly to 0 at both ends."""

    def p(nu):
        nu = np.asarray(nu, dtype=float)
        scalar = nu.ndim == 0
        nu = np.atleast_1d(nu)
        out = np.empty_like(nu)
        mid = (nu >= v_lo) & (nu <= v_hi)
        if np.any(mid):
            out[mid] = sol(nu[mid])[0]
        lo = nu < v_lo
        out[lo] = slope_lo * np.maximum(nu[lo], 0.0)
        hi = nu > v_hi
        out[hi] = slope_hi * np.maximum(1.0 - nu[hi], 0.0)
        return float(out[0]) if scalar else out

    return p


def check_front_exists(params: WaveParameters, g: GrowthFunction) -> None:
    """Raise NoFrontError when the linearization at 0 has no nonnegative real root."""
    eps, s = params.epsilon, params.s
    if eps * s == 1.0:
        return
    disc = discriminant_zero(eps, s, g)
    roots = char_roots_zero(eps, s, g)
    if any(abs(r.imag) > 0 for r in roots):
        raise NoFrontError(
            f"no monotone front at s={s} < s*={params.s_star}: complex tail rates {roots}",
            discriminant=disc, roots=roots)
    if not any(r.real >= 0 for r in roots):
        raise NoFrontError(f"no nonnegative tail rate at s={s}", discriminant=disc, roots=roots)


def build_parabolic(params: WaveParameters, g: GrowthFunction,
                    opts: ProfileOptions = ProfileOptions()) -> FrontProfile:
    """Smooth subsonic front, s*(eps) <= s < 1/eps, in the parabolic regime."""
    eps, s = params.epsilon, params.s
    if params.regime is not Regime.PARABOLIC:
        raise RegimeError("build_parabolic needs eps^2 F'(0) < 1")
    if not eps * s < 1.0:
        raise RegimeError(f"build_parabolic needs s < 1/eps, got s={s}")
    check_front_exists(params, g)
    if s < params.s_star * (1 - 1e-12):
        raise NoFrontError(f"s={s} below s*={params.s_star}")

    a = 1.0 - eps**2 * s**2
    d0 = opts.delta0

    def dp(nu, y):
        p = y[0]
        return [((1.0 - eps**2 * g.df(nu)) * s * p - g.f(nu)) / (a * p)]

    def hit_zero(nu, y):
        return y[0] - 1e-3 * d0 * params.lam_prime * min(nu, 1.0)
    hit_zero.terminal = True

    sol = solve_ivp(dp, (1.0 - d0, d0), [params.lam_prime * d0], method="DOP853",
                    rtol=opts.rtol, atol=1e-20, dense_output=True, events=hit_zero)
    if sol.status != 0:
        raise NoFrontError(f"phase-plane orbit reached p = 0 at nu = {sol.t[-1]:.6g}")
    p_end = float(sol.y[0, -1])
    p_of_nu = _phase_interpolant(sol.sol, d0, 1.0 - d0, p_end / d0, params.lam_prime)
    return _smooth_profile(FrontKind.SMOOTH_PARABOLIC, params, p_of_nu, opts, g)


def build_weak_sonic(params: WaveParameters, g: GrowthFunction,
                     opts: ProfileOptions = ProfileOptions()) -> FrontProfile:
    """Limit front at s = 1/eps in the parabolic regime: -(1 - eps^2 F'(nu)) s nu' = F(nu)."""
    eps = params.epsilon
    if params.regime is not Regime.PARABOLIC or not params.sonic:
        raise RegimeError("weak sonic front needs the parabolic regime and s = 1/eps")

    def p_of_nu(nu):
        nu = np.asarray(nu, dtype=float)
        return eps * g.f(nu) / (1.0 - eps**2 * g.df(nu))

    return _smooth_profile(FrontKind.WEAK_SONIC, params, p_of_nu, opts)


def build_supersonic(params: WaveParameters, g: GrowthFunction,
                     opts: ProfileOptions = ProfileOptions()):
    """Smooth front for s > 1/eps, via the time-reversed phase plane (V, V' = P).

    Returns the profile and the phase orbit P(v).
    """
    eps, s = params.epsilon, params.s
    if not eps * s > 1.0:
        raise RegimeError(f"supersonic front needs s > 1/eps, got s={s}")
    lam = supersonic_rate(eps, s, g)
    k = eps**2 * s / (eps**2 * s**2 - 1.0)
    d0 = opts.delta0
    c = eps**2 * s**2 - 1.0

    def dP(v, y):
        return [((eps**2 * g.df(v) - 1.0) * s + g.f(v) / y[0]) / c]

    def hit_zero(v, y):
        return y[0]
    hit_zero.terminal = True

    sol = solve_ivp(dP, (d0, 1.0 - d0), [lam * d0], method="DOP853", rtol=opts.rtol,
                    atol=1e-20, dense_output=True, events=hit_zero)
    if sol.status != 0:
        raise IntegrationError(f"supersonic orbit reached P = 0 at v = {sol.t[-1]:.6g}")
    orbit = PhaseOrbit(v=sol.t.copy(), p=sol.y[0].copy(), lam=lam, k=k)
    excess = orbit.p - orbit.upper_bound(g)
    if np.any(orbit.p < -opts.trap_tol) or np.max(excess) > opts.trap_tol:
        raise TrappingError(f"orbit left the trapping region by {np.max(excess):.3g}")

    slope_hi = float(orbit.p[-1]) / d0
    p_of_nu = _phase_interpolant(sol.sol, d0, 1.0 - d0, lam, slope_hi)
    profile = _smooth_profile(FrontKind.SMOOTH_SUPERSONIC, params, p_of_nu, opts)
    return profile, orbit


def build_hyperbolic(params: WaveParameters, g: GrowthFunction,
                     opts: ProfileOptions = ProfileOptions()) -> FrontProfile:
    """Sonic front s = 1/eps when eps^2 F'(0) >= 1.

    Solves nu' = eps F(nu) / (eps^2 F'(nu) - 1) from (1 + theta)/2 until nu
    reaches theta, places that point at z = 0 and extends by 0 ahead. The
    front jumps from theta to 0 when eps^2 F'(0) > 1 and is continuous in
    the critical case theta = 0.
    """
    eps = params.epsilon
    if params.regime is Regime.PARABOLIC:
        raise RegimeError("build_hyperbolic needs eps^2 F'(0) >= 1")
    if not params.sonic:
        raise RegimeError(f"sonic front needs s = 1/eps, got s={params.s}")
    th = params.theta
    critical = params.regime is Regime.CRITICAL
    edge_slope = g.fprime0 / (eps * g.fsecond0)

    def slope(nu):
        nu = np.asarray(nu, dtype=float)
        den = eps**2 * g.df(nu) - 1.0
        with np.errstate(divide="ignore", invalid="ignore"):
            out = eps * g.f(nu) / den
        if critical:
            out = np.where(np.abs(den) < 1e-300, edge_slope, out)
        return out

    def fun(z, y):
        return [float(slope(y[0]))]

    def reach(z, y):
        return y[0] - th
    reach.terminal = True
    reach.direction = -1

    start = 0.5 * (1.0 + th)
    fwd = solve_ivp(fun, (0.0, 1e4), [start], method="DOP853", rtol=opts.rtol,
                    atol=opts.atol, dense_output=True, events=reach)
    if fwd.status != 1 or len(fwd.t_events[0]) == 0:
        raise IntegrationError("failed to locate the jump of the sonic front")
    z0 = float(fwd.t_events[0][0])

    lo_need, hi_need = _needs(opts)
    bwd, z_lo = _integrate_z(slope, start, -1, 1.0 - opts.tol_end / 2, lo_need + z0, opts)
    z_lo -= z0
    z_hi = max(hi_need, 10 * opts.dz)

    def dense(z):
        z = np.asarray(z, dtype=float)
        zc = np.maximum(z, z_lo) + z0
        out = np.zeros_like(zc)
        left = z < 0
        back = left & (zc < 0)
        front = left & (zc >= 0)
        if np.any(back):
            out[back] = bwd(zc[back])
        if np.any(front):
            out[front] = fwd.sol(zc[front])[0]
        out[z == 0] = th
        return np.clip(out, 0.0, 1.0)

    z = _grid(z_lo, z_hi, opts.dz)
    z = z[z >= z_lo - 1e-12]
    nu = dense(z)
    dnu = np.where(z <= 0, slope(nu), 0.0)
    if critical:
        dnu[z == 0] = edge_slope
    kind = FrontKind.CONTINUOUS_CRITICAL if critical else FrontKind.DISCONTINUOUS_HYPERBOLIC
    return FrontProfile(kind=kind, params=params, z=z, nu=nu, dnu=dnu,
                        shift_convention=ShiftConvention.JUMP_AT_ORIGIN, jump_location=0.0,
                        slope=slope, _dense=dense)


def build_minimal(epsilon: float, g: GrowthFunction, opts: ProfileOptions = ProfileOptions(),
                  critical: bool = False) -> FrontProfile:
    """Minimal-speed front for the regime of ``epsilon``."""
    params = wave_parameters(epsilon, g, critical=critical)
    if params.regime is Regime.PARABOLIC:
        return build_parabolic(params, g, opts)
    return build_hyperbolic(params, g, opts)


def build(params: WaveParameters, g: GrowthFunction, opts: ProfileOptions = ProfileOptions()):
    """Dispatch on (regime, speed) to the matching constructor."""
    es = params.epsilon * params.s
    if es > 1.0 and not params.sonic:
        return build_supersonic(params, g, opts)[0]
    if params.sonic:
        if params.regime is Regime.PARABOLIC:
            return build_weak_sonic(params, g, opts)
        return build_hyperbolic(params, g, opts)
    if params.regime is not Regime.PARABOLIC:
        check_front_exists(params, g)
        raise NoFrontError(f"no front below s*={params.s_star} in the {params.regime.value} regime")
    return build_parabolic(params, g, opts)


def residual(profile: FrontProfile, g: GrowthFunction) -> float:
    """Max |(eps^2 s^2 - 1) nu'' - (1 - eps^2 F'(nu)) s nu' - F(nu)| by central differences.

    Discontinuous profiles are checked on the smooth piece only.
    """
    eps, s = profile.params.epsilon, profile.params.s
    z, nu = profile.z, profile.nu
    h = profile.dz
    mask = np.ones_like(z, dtype=bool)
    if profile.jump_location is not None:
        mask = z < profile.jump_location - 2 * h
    idx = np.nonzero(mask[1:-1] & mask[2:] & mask[:-2])[0] + 1
    if idx.size < 100:
        warnings.warn(f"only {idx.size} interior samples; residual is unreliable", stacklevel=2)
    if idx.size == 0:
        return 0.0
    d1 = (nu[idx + 1] - nu[idx - 1]) / (2 * h)
    d2 = (nu[idx + 1] - 2 * nu[idx] + nu[idx - 1]) / h**2
    n = nu[idx]
    r = (eps**2 * s**2 - 1.0) * d2 - (1.0 - eps**2 * g.df(n)) * s * d1 - g.f(n)
    return float(np.max(np.abs(r)))


def tail_rate(profile: FrontProfile, lo: float = 1e-5, hi: float = 1e-3) -> float:
    """Measured exponential decay rate of nu where lo < nu < hi (log-slope fit)."""
    m = (profile.nu > lo) & (profile.nu < hi)
    if profile.jump_location is not None:
        m &= profile.z < profile.jump_location
    if m.sum() < 3:
        raise ValueError("tail window too short")
    return float(-np.polyfit(profile.z[m], np.log(profile.nu[m]), 1)[0])
