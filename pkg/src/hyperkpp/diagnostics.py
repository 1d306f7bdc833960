"""Front tracking, profile comparison and weighted energies of perturbations."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp, trapezoid
from scipy.stats import linregress

from .dispersion import Regime, RegimeError, WaveParameters, weight_slope
from .growth import GrowthFunction


class NoCrossingError(ValueError):
    """The field never falls through the requested level."""


class InsufficientSnapshotsError(ValueError):
    pass


def front_position(x, rho, level: float = 0.5) -> float:
    """Leftmost downward crossing of ``level``, by linear interpolation between cells."""
    x = np.asarray(x, dtype=float)
    rho = np.asarray(rho, dtype=float)
    if x.shape != rho.shape or x.size < 2:
        raise ValueError("x and rho must be matching arrays with at least two samples")
    if not rho[0] >= level:
        raise NoCrossingError(f"field starts below level {level}")
    below = np.nonzero(rho[1:] < level)[0]
    if below.size == 0:
        raise NoCrossingError(f"field never drops below level {level}")
    i = below[0]
    r0, r1 = rho[i], rho[i + 1]
    return float(x[i] + (r0 - level) / (r0 - r1) * (x[i + 1] - x[i]))


@dataclass(frozen=True)
class SpeedEstimate:
    level: float
    times: np.ndarray
    positions: np.ndarray
    speed: float
    r_squared: float
    window: tuple[float, float]
    log_coefficient: float | None = None


def estimate_speed(snapshots, level: float = 0.5, discard_fraction: float = 0.5,
                   log_correction: bool = False) -> SpeedEstimate:
    """Least-squares speed of the level crossing over the late part of a run.

    ``snapshots`` is a sequence of (t, x, rho). The first ``discard_fraction``
    of the time range is dropped. With ``log_correction`` the fit is
    x = s t + c log t + b, which absorbs the logarithmic lag of pulled fronts.
    """
    if not 0 <= discard_fraction < 1:
        raise ValueError("discard_fraction must lie in [0, 1)")
    snaps = list(snapshots)
    if not snaps:
        raise InsufficientSnapshotsError("no snapshots")
    t_all = np.array([s[0] for s in snaps], dtype=float)
    t_cut = t_all.min() + discard_fraction * (t_all.max() - t_all.min())
    kept = [s for s in snaps if s[0] >= t_cut]
    if len(kept) < 5:
        raise InsufficientSnapshotsError(f"need >= 5 snapshots after discarding, have {len(kept)}")
    t = np.array([s[0] for s in kept], dtype=float)
    pos = np.array([front_position(s[1], s[2], level) for s in kept])
    window = (float(t[0]), float(t[-1]))
    if not log_correction:
        fit = linregress(t, pos)
        r2 = float(fit.rvalue**2) if np.isfinite(fit.rvalue) else 1.0
        return SpeedEstimate(level, t, pos, float(fit.slope), r2, window)
    if np.any(t <= 0):
        raise ValueError("log-corrected fit needs positive times")
    design = np.column_stack([t, np.log(t), np.ones_like(t)])
    coef, *_ = np.linalg.lstsq(design, pos, rcond=None)
    resid = pos - design @ coef
    ss_tot = float(np.sum((pos - pos.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    return SpeedEstimate(level, t, pos, float(coef[0]), max(r2, 0.0), window, float(coef[1]))


def _profile_window(profile):
    hi = np.inf if profile.jump_location is not None else profile.z[-1]
    return profile.z[0], hi


def compare_profile(x, rho, profile):
    """Align ``rho`` with ``profile`` at the half level; return (shift, L-inf, L2) errors."""
    x = np.asarray(x, dtype=float)
    rho = np.asarray(rho, dtype=float)
    shift = front_position(x, rho, 0.5) - profile.half_level()
    zlo, zhi = _profile_window(profile)
    m = (x - shift >= zlo) & (x - shift <= zhi)
    if m.sum() < 2:
        raise ValueError("profile and field do not overlap")
    err = rho[m] - profile(x[m] - shift)
    return float(shift), float(np.max(np.abs(err))), float(np.sqrt(trapezoid(err**2, x[m])))


def jump_sharpness(x, rho, theta: float):
    """Cells over which rho falls from 0.9 theta to 0.1 theta, and rho just behind the fall."""
    rho = np.asarray(rho, dtype=float)
    if not theta > 0:
        raise ValueError("theta must be positive")
    hi = np.nonzero(rho >= 0.9 * theta)[0]
    if hi.size == 0:
        raise NoCrossingError("field never reaches 0.9 theta")
    i_hi = hi[-1]
    lo = np.nonzero(rho[i_hi:] <= 0.1 * theta)[0]
    if lo.size == 0:
        raise NoCrossingError("field never falls below 0.1 theta ahead of the front")
    return int(lo[0]), float(rho[i_hi])


def weight_phi(profile, g: GrowthFunction, z, z_ref: float = 0.0):
    """Stability weight phi(z) with phi(z_ref) = 0.

    phi' is the weight slope evaluated along the profile, integrated with an
    adaptive Runge-Kutta method on the dense profile. In the critical regime
    the slope blows up at the front edge, and abscissae at or beyond it raise.
    """
    params = profile.params
    z = np.asarray(z, dtype=float)
    if params.regime is not Regime.PARABOLIC and profile.jump_location is not None:
        edge = profile.jump_location
        if params.regime is Regime.CRITICAL:
            if np.any(z >= edge) or z_ref >= edge:
                raise RegimeError("critical weight diverges at the front edge; truncate the grid")
        elif np.any(z > edge) or z_ref > edge:
            raise RegimeError("hyperbolic weight is defined on the support of the front only")

    def rhs(t, y):
        return [weight_slope(float(profile(t)), params, g)]

    out = np.zeros_like(z)
    for side in (z > z_ref, z < z_ref):
        if not np.any(side):
            continue
        pts = z[side]
        far = pts.max() if pts.max() > z_ref else pts.min()
        sol = solve_ivp(rhs, (z_ref, far), [0.0], method="DOP853", rtol=1e-12, atol=1e-13,
                        dense_output=True)
        if not sol.success:
            raise RuntimeError(f"weight integration failed: {sol.message}")
        out[side] = sol.sol(pts)[0]
    return out


def lyapunov_energy(z, u, v, profile=None, params: WaveParameters | None = None,
                    g: GrowthFunction | None = None, phi=None, z_ref: float = 0.0) -> float:
    """1/2 int (u^2 + v^2) e^{2 phi} dz by the trapezoid rule.

    ``phi`` may be passed precomputed (array on ``z``, or 0 to drop the weight);
    otherwise it comes from :func:`weight_phi`.
    """
    z = np.asarray(z, dtype=float)
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if phi is None:
        if profile is None or g is None:
            raise ValueError("need a profile and growth function to build the weight")
        if params is not None and params is not profile.params:
            raise ValueError("params must be the profile's own parameters")
        phi = weight_phi(profile, g, z, z_ref)
    w2 = np.exp(2.0 * np.asarray(phi, dtype=float)) * np.ones_like(z)
    return float(0.5 * trapezoid((u**2 + v**2) * w2, z))


@dataclass(frozen=True)
class EnergyReport:
    t: float
    lyapunov: float
    e1u: float
    e2u: float
    e1w: float
    e2w: float
    q1u: float
    q2u: float
    q1w: float
    q2w: float
    e_combined: float
    deltas: tuple[float, float, float]
    z0: float
    tail_term: float


@dataclass(frozen=True)
class EnergyWeights:
    """Coefficient fields of the energy functionals on a fixed grid."""

    z: np.ndarray
    nu: np.ndarray
    dnu: np.ndarray
    phi: np.ndarray
    dphi: np.ndarray
    a1: np.ndarray
    a2: np.ndarray
    da1: np.ndarray
    a3: np.ndarray
    a4: np.ndarray
    a5: np.ndarray
    a6: np.ndarray
    a7: np.ndarray
    fp: np.ndarray
    z0: float
    deltas: tuple[float, float, float]


def energy_weights(z, profile, g: GrowthFunction, z0: float | None = None) -> EnergyWeights:
    """Evaluate A1..A7, phi and the constants delta, delta', delta'' on ``z``.

    nu' and nu'' come from the profile equation. When ``z0`` is None it is the
    largest grid point with min(A6, A7) > 0 everywhere to its left; phi is
    normalized to vanish there.
    """
    params = profile.params
    if params.regime is not Regime.PARABOLIC:
        raise RegimeError("the energy functionals are defined in the parabolic regime only")
    if not params.minimal:
        raise ValueError("energy functionals need the minimal-speed front")
    eps, s = params.epsilon, params.s
    z = np.asarray(z, dtype=float)
    nu = profile(z)
    dnu = profile.derivative(z)
    fp, fpp = g.df(nu), g.d2f(nu) * np.ones_like(z)
    f0 = g.fprime0
    b = 1.0 - eps**2 * s**2
    d2nu = ((1.0 - eps**2 * fp) * s * dnu + g.f(nu)) / (eps**2 * s**2 - 1.0)

    dphi = np.asarray(weight_slope(nu, params, g)) * np.ones_like(z)
    d2phi = -s * eps**2 * fpp * dnu / (2.0 * b)
    a1 = s * eps**2 * fpp * dnu - fp
    a2 = 0.5 * s * eps**2 * fpp * dnu - fp
    da1 = s * eps**2 * (np.gradient(fpp, z) * dnu + fpp * d2nu) - fpp * dnu
    a3 = 2.0 * eps**2 * s * dphi + 1.0 - eps**2 * fp
    a4 = -s * (1.0 - eps**2 * fp) - 2.0 * (eps**2 * s**2 - 1.0) * dphi
    a5 = (s * (1.0 - eps**2 * fp) * dphi + (eps**2 * s**2 - 1.0) * (-d2phi + dphi**2)
          + eps**2 * s * fpp * dnu - fp)
    delta = (1.0 - eps**2 * f0) / (2.0 * eps**2)
    a6 = 0.5 * a1 + delta * (1.0 - eps**2 * f0) / 4.0
    a7 = 0.5 * s * da1 + delta * a2

    if z0 is None:
        bad = np.nonzero(np.minimum(a6, a7) <= 0)[0]
        if bad.size == 0:
            z0 = float(z[-1])
        elif bad[0] == 0:
            raise ValueError("min(A6, A7) is not positive at the left end of the grid")
        else:
            z0 = float(z[bad[0] - 1])
    phi = weight_phi(profile, g, z, z_ref=z0)

    delta_p = delta * b / (1.0 + eps**2 * s**2)
    ahead = z > z0
    if np.any(ahead):
        e2 = np.exp(-2.0 * phi[ahead])
        n6 = np.max(np.abs(a6[ahead] * e2))
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.abs(a7[ahead] * e2 / a5[ahead])
        ratio = ratio[np.isfinite(ratio)]
        n7 = np.max(ratio) if ratio.size else 0.0
        cands = []
        if n6 > 0:
            cands.append((1.0 - eps**2 * f0) / 4.0 / n6)
        if n7 > 0:
            cands.append(1.0 / n7)
        delta_pp = 0.5 * delta_p * min(cands) if cands else 0.5 * delta_p
    else:
        delta_pp = 0.5 * delta_p
    return EnergyWeights(z, nu, dnu, phi, dphi, a1, a2, da1, a3, a4, a5, a6, a7, fp, z0,
                         (delta, delta_p, delta_pp))


def energy_suite(z, u_prev, u_curr, dt: float, profile, params: WaveParameters | None,
                 g: GrowthFunction, z0: float | None = None, t: float = 0.0,
                 v_curr=None, weights: EnergyWeights | None = None) -> EnergyReport:
    """Energies and dissipations of a perturbation between two moving-frame snapshots.

    The moving-frame time derivative is the difference quotient of the two
    snapshots; every other term uses their average, so the report refers to
    the midpoint time. ``weights`` may be reused across calls on one grid.
    """
    if params is not None and params.regime is not Regime.PARABOLIC:
        raise RegimeError("the energy functionals are defined in the parabolic regime only")
    if not dt > 0:
        raise ValueError("dt must be positive")
    if weights is None:
        weights = energy_weights(z, profile, g, z0)
    wt = weights
    z = wt.z
    eps, s = profile.params.epsilon, profile.params.s
    b = 1.0 - eps**2 * s**2
    u0 = np.asarray(u_prev, dtype=float)
    u1 = np.asarray(u_curr, dtype=float)
    u = 0.5 * (u0 + u1)
    ut = (u1 - u0) / dt
    uz = np.gradient(u, z)
    lab = ut - s * uz
    ephi = np.exp(wt.phi)
    w = ephi * u
    wt_t = ephi * ut
    wz = np.gradient(w, z)

    def integ(f):
        return float(trapezoid(f, z))

    e1u = integ(0.5 * eps**2 * lab**2 + 0.5 * uz**2 + 0.5 * wt.a1 * u**2)
    e2u = integ(eps**2 * u * lab + 0.5 * (1.0 - eps**2 * wt.fp) * u**2)
    q1u = integ((1.0 - eps**2 * wt.fp) * lab**2 + 0.5 * s * wt.da1 * u**2)
    q2u = integ(-eps**2 * lab**2 + uz**2 + wt.a2 * u**2)
    e1w = integ(0.5 * eps**2 * wt_t**2 + 0.5 * b * wz**2 + 0.5 * wt.a5 * w**2)
    e2w = integ(eps**2 * w * wt_t + 0.5 * wt.a3 * w**2)
    da4 = np.gradient(wt.a4, z)
    q1w = integ(wt.a3 * wt_t**2 + wt.a4 * wt_t * wz)
    q2w = integ(-eps**2 * wt_t**2 + b * wz**2 + 2.0 * eps**2 * s * wt_t * wz
                + (wt.a5 - 0.5 * da4) * w**2)
    delta, delta_p, delta_pp = wt.deltas
    e_comb = e1w + delta_p * e2w + delta_pp * (e1u + delta * e2u)
    ahead = z > wt.z0
    tail = float(trapezoid(np.exp(-wt.phi[ahead]) * w[ahead] ** 2, z[ahead])) if ahead.sum() > 1 else 0.0
    if v_curr is not None:
        lyap = float(0.5 * trapezoid((u1**2 + np.asarray(v_curr, dtype=float) ** 2)
                                     * np.exp(2.0 * wt.phi), z))
    else:
        lyap = float(0.5 * trapezoid(u1**2 * np.exp(2.0 * wt.phi), z))
    return EnergyReport(float(t), lyap, e1u, e2u, e1w, e2w, q1u, q2u, q1w, q2w, e_comb,
                        (delta, delta_p, delta_pp), wt.z0, tail)


def gap_function(nu, params: WaveParameters, g: GrowthFunction):
    """Dissipation weight A(z) of the parabolic Lyapunov identity, as a function of nu."""
    if params.regime is not Regime.PARABOLIC:
        raise RegimeError("gap function is defined in the parabolic regime")
    eps, s = params.epsilon, params.s
    fp = g.df(np.asarray(nu, dtype=float))
    dphi = weight_slope(nu, params, g)
    a = 2.0 * s * dphi - fp + eps**-2
    root = np.sqrt((fp + eps**-2) ** 2 + 4.0 * eps**-2 * dphi**2)
    return 0.5 * (a - root)


def weight_discriminant(nu, params: WaveParameters, g: GrowthFunction):
    """Discriminant of the Lyapunov quadratic form for the chosen weight slope."""
    eps, s = params.epsilon, params.s
    fp = g.df(np.asarray(nu, dtype=float))
    dphi = weight_slope(nu, params, g)
    return 4.0 / eps**2 * ((1.0 - eps**2 * s**2) * dphi**2 - s * (1.0 - eps**2 * fp) * dphi + fp)


def gaussian_perturbation(z, center: float, amplitude: float = 0.01, width: float = 2.0,
                          cutoff: float = 6.0, upper: float | None = None):
    """Gaussian bump truncated at ``cutoff`` widths, and to z < ``upper`` when given."""
    z = np.asarray(z, dtype=float)
    if not width > 0:
        raise ValueError("width must be positive")
    bump = amplitude * np.exp(-0.5 * ((z - center) / width) ** 2)
    keep = np.abs(z - center) <= cutoff * width
    if upper is not None:
        keep &= z < upper
    return np.where(keep, bump, 0.0)


def reference_point(profile) -> float:
    """Where the weight is normalized by default: the half level of a continuous front,
    the midpoint between theta and 1 for a front with a jump."""
    if profile.params.regime is Regime.PARABOLIC:
        return profile.half_level()
    level = 0.5 * (1.0 + profile.params.theta)
    return front_position(profile.z, profile.nu, level)


def max_relative_growth(t, values) -> float:
    """Largest (E(t_{k+1}) - E(t_k)) / |E(t_k)| / (t_{k+1} - t_k) over consecutive samples."""
    t = np.asarray(t, dtype=float)
    e = np.asarray(values, dtype=float)
    if t.size < 2:
        return float("-inf")
    den = np.abs(e[:-1]) * np.diff(t)
    with np.errstate(divide="ignore", invalid="ignore"):
        rate = np.where(den > 0, np.diff(e) / den, np.where(np.diff(e) > 0, np.inf, 0.0))
    return float(np.max(rate))


@dataclass(frozen=True)
class LyapunovSeries:
    t: np.ndarray
    lyapunov: np.ndarray
    z: np.ndarray
    phi: np.ndarray


def linear_lyapunov_series(profile, g: GrowthFunction, grid, u0, v0=None, t_end: float = 20.0,
                           snapshot_every: float = 0.5, cfl_fraction: float = 0.9,
                           z_ref: float | None = None) -> LyapunovSeries:
    """Weighted energy of the linearized evolution, sampled every ``snapshot_every``."""
    from .solver import linearized_run

    z = grid.centers
    if z_ref is None:
        z_ref = reference_point(profile)
    phi = weight_phi(profile, g, z, z_ref)
    if v0 is None:
        v0 = np.zeros_like(z)
    ts, ls = [], []

    def obs(frame):
        ts.append(frame.t)
        ls.append(lyapunov_energy(z, frame.u, frame.v, phi=phi))

    linearized_run(profile, profile.params.epsilon, g, u0, v0, t_end, grid, cfl_fraction,
                   observer=obs, snapshot_every=snapshot_every)
    return LyapunovSeries(np.array(ts), np.array(ls), z, phi)


@dataclass(frozen=True)
class EnergySeries:
    reports: list
    sup_norm: np.ndarray
    sup_times: np.ndarray

    @property
    def t(self) -> np.ndarray:
        return np.array([r.t for r in self.reports])

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.reports])


def nonlinear_energy_series(profile, g: GrowthFunction, grid, u0, t_end: float = 40.0,
                            snapshot_every: float = 0.5, cfl_fraction: float = 0.9) -> EnergySeries:
    """Energies of a density perturbation of the front under the full kinetic scheme.

    The perturbed front and the unperturbed one are advanced side by side in
    the frame moving at the front speed; their difference is the
    perturbation, so the scheme's own discrete front cancels out.
    """
    from .solver import KineticState, current, density, front_state, max_stable_dt, step

    params = profile.params
    if params.regime is not Regime.PARABOLIC:
        raise RegimeError("the energy functionals are defined in the parabolic regime only")
    eps, s = params.epsilon, params.s
    z = grid.centers
    u0 = np.asarray(u0(z) if callable(u0) else u0, dtype=float)
    weights = energy_weights(z, profile, g)
    ref = front_state(profile, grid, g)
    per = KineticState(grid, 0.0, ref.f_plus + 0.5 * u0, ref.f_minus + 0.5 * u0)
    n = max(1, int(np.ceil(t_end / (cfl_fraction * max_stable_dt(grid, eps, s)))))
    dt = t_end / n
    every = max(1, int(round(snapshot_every / dt)))
    reports, sups, sup_t = [], [], []
    prev = None
    for k in range(n + 1):
        u = density(per) - density(ref)
        sups.append(float(np.max(np.abs(u))))
        sup_t.append(k * dt)
        if prev is not None and (k % every == 0 or k == n):
            v = current(per) - current(ref)
            reports.append(energy_suite(z, prev, u, dt, profile, params, g, t=(k - 0.5) * dt,
                                        v_curr=v, weights=weights))
        prev = u
        if k < n:
            ref = step(ref, eps, g, dt, frame_speed=s)
            per = step(per, eps, g, dt, frame_speed=s)
    return EnergySeries(reports, np.array(sups), np.array(sup_t))
