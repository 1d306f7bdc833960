"""Flux-limited finite-volume solver for the two-velocity kinetic system.

The right-movers f+ and left-movers f- travel at +1/eps and -1/eps, relax
towards each other at rate eps^-2 and each receive half of the reaction.
Transport is a MUSCL upwind update with minmod slopes; relaxation and
reaction are explicit Euler terms evaluated on the old state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from .growth import GrowthFunction


class CFLError(ValueError):
    """Time step violates the transport stability bound."""


@dataclass(frozen=True)
class GridSpec:
    """Uniform cell-centered grid on (a, b)."""

    a: float
    b: float
    n_cells: int

    def __post_init__(self):
        if not self.b > self.a:
            raise ValueError(f"grid needs b > a, got ({self.a}, {self.b})")
        if int(self.n_cells) != self.n_cells or self.n_cells < 1:
            raise ValueError(f"n_cells must be a positive integer, got {self.n_cells}")

    @classmethod
    def from_dx(cls, a: float, b: float, dx: float) -> "GridSpec":
        n = round((b - a) / dx)
        if n < 1 or abs(n * dx - (b - a)) > 1e-9 * (b - a):
            raise ValueError(f"dx={dx} does not divide ({a}, {b})")
        return cls(float(a), float(b), int(n))

    @property
    def dx(self) -> float:
        return (self.b - self.a) / self.n_cells

    @property
    def centers(self) -> np.ndarray:
        return self.a + (np.arange(self.n_cells) + 0.5) * self.dx


@dataclass(frozen=True)
class KineticState:
    grid: GridSpec
    t: float
    f_plus: np.ndarray
    f_minus: np.ndarray


def density(state: KineticState) -> np.ndarray:
    return state.f_plus + state.f_minus


def current(state: KineticState) -> np.ndarray:
    return state.f_plus - state.f_minus


def from_density(grid: GridSpec, rho, j, t: float = 0.0) -> KineticState:
    rho = np.asarray(rho, dtype=float)
    j = np.asarray(j, dtype=float)
    return KineticState(grid, float(t), 0.5 * (rho + j), 0.5 * (rho - j))


def minmod(p, q):
    """Zero on sign disagreement (zero counts as disagreement), else the smaller slope."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    out = np.where(p * q > 0, np.sign(p) * np.minimum(np.abs(p), np.abs(q)), 0.0)
    return float(out) if out.ndim == 0 else out


def init_step_state(grid: GridSpec, epsilon: float) -> KineticState:
    """f+ = 1 behind the origin, 0 ahead; f- = 0."""
    if not grid.a < 0 < grid.b:
        raise ValueError("step initial data needs a < 0 < b")
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    x = grid.centers
    return KineticState(grid, 0.0, np.where(x < 0, 1.0, 0.0), np.zeros_like(x))


def advect(f: np.ndarray, c: float, dt: float, dx: float, left: float, right: float) -> np.ndarray:
    """One MUSCL upwind step of f_t + c f_x = 0.

    ``left``/``right`` are inflow ghost values; the outflow side copies the
    last cell. Slopes are minmod of adjacent differences, zero in the ghost
    cells. The interface value carries the (1 - cfl) factor of the
    Lax-Wendroff-type time-centered reconstruction.
    """
    if c == 0.0:
        return f.copy()
    if c < 0:
        return advect(f[::-1], -c, dt, dx, right, left)[::-1]
    cfl = c * dt / dx
    ext = np.empty(f.size + 2)
    ext[0] = left
    ext[1:-1] = f
    ext[-1] = f[-1]
    d = np.diff(ext)
    slope = np.zeros_like(ext)
    slope[1:-1] = minmod(d[:-1], d[1:])
    face = ext + 0.5 * (1.0 - cfl) * slope
    return f - cfl * (face[1:-1] - face[:-2])


def max_stable_dt(grid: GridSpec, epsilon: float, frame_speed: float = 0.0) -> float:
    """Largest admissible dt (exclusive): dx over the fastest characteristic speed."""
    c = max(abs(1.0 / epsilon - frame_speed), abs(1.0 / epsilon + frame_speed))
    return grid.dx / c


def step(
    state: KineticState,
    epsilon: float,
    g: GrowthFunction,
    dt: float,
    inflow: tuple[float, float] = (0.5, 0.0),
    relaxation: bool = True,
    reaction: bool = True,
    frame_speed: float = 0.0,
) -> KineticState:
    """One explicit step of the kinetic scheme.

    ``inflow`` gives the Dirichlet values f+(a) and f-(b). ``frame_speed``
    solves in coordinates moving at that speed (transport speeds become
    +-1/eps - frame_speed). ``relaxation`` and ``reaction`` switch the
    source terms off for transport-only checks.
    """
    limit = max_stable_dt(state.grid, epsilon, frame_speed)
    if not (dt > 0 and dt < limit):
        raise CFLError(f"dt={dt} violates 0 < dt < {limit}")
    dx = state.grid.dx
    fp, fm = state.f_plus, state.f_minus
    new_p = advect(fp, 1.0 / epsilon - frame_speed, dt, dx, inflow[0], fp[-1])
    new_m = advect(fm, -1.0 / epsilon - frame_speed, dt, dx, fm[0], inflow[1])
    if relaxation:
        r = dt / (2.0 * epsilon**2) * (fm - fp)
        new_p += r
        new_m -= r
    if reaction:
        src = 0.5 * dt * g.f(fp + fm)
        new_p += src
        new_m += src
    return KineticState(state.grid, state.t + dt, new_p, new_m)


def _schedule(t0: float, t_end: float, dt: float, snapshot_every: float | None):
    """Step end times t0 + k dt, with a final partial step landing on t_end.

    A step is flagged as a snapshot when it is the first to reach a multiple
    of ``snapshot_every`` past t0, or when it ends at t_end.
    """
    tol = 1e-12 * max(1.0, abs(t_end))
    n_full = max(0, math.ceil((t_end - t0) / dt - 1e-9) - 1) if t_end > t0 + tol else 0
    times = [t0 + k * dt for k in range(1, n_full + 1)]
    if t_end > t0 + tol:
        times.append(t_end)
    snap = []
    next_mark = 1
    for t in times:
        flag = t == t_end
        if snapshot_every is not None and t >= t0 + next_mark * snapshot_every - 1e-9 * dt:
            flag = True
            next_mark = math.floor((t - t0) / snapshot_every + 1e-9) + 1
        snap.append(flag)
    return times, snap


def run(
    state: KineticState,
    epsilon: float,
    g: GrowthFunction,
    t_end: float,
    cfl_fraction: float = 0.9,
    observer: Callable[[float, KineticState], None] | None = None,
    snapshot_every: float | None = None,
    **step_kwargs,
) -> KineticState:
    """Advance to ``t_end`` with dt = cfl_fraction * (stable dt) and a final partial step.

    ``observer(t, state)`` is called at the start, after the first step to
    reach each multiple of ``snapshot_every`` and at t_end; without
    ``snapshot_every`` it is called after every step.
    """
    if t_end < state.t:
        raise ValueError(f"t_end={t_end} precedes state time {state.t}")
    if not 0 < cfl_fraction < 1:
        raise ValueError("cfl_fraction must lie in (0, 1)")
    if snapshot_every is not None and not snapshot_every > 0:
        raise ValueError("snapshot_every must be positive")
    dt = cfl_fraction * max_stable_dt(state.grid, epsilon, step_kwargs.get("frame_speed", 0.0))
    if observer is not None:
        observer(state.t, state)
    times, snap = _schedule(state.t, t_end, dt, snapshot_every)
    for t_next, is_snap in zip(times, snap):
        state = replace(step(state, epsilon, g, t_next - state.t, **step_kwargs), t=t_next)
        if observer is not None and (is_snap or snapshot_every is None):
            observer(state.t, state)
    return state


def front_state(profile, grid: GridSpec, g: GrowthFunction, t: float = 0.0) -> KineticState:
    """Kinetic state of a traveling front sampled at the cell centers.

    The current comes from the profile equation: j = eps (eps^2 s F(nu) + (eps^2 s^2 - 1) nu').
    """
    eps, s = profile.params.epsilon, profile.params.s
    x = grid.centers
    nu = profile(x)
    j = eps * (eps**2 * s * g.f(nu) + (eps**2 * s**2 - 1.0) * profile.derivative(x))
    return from_density(grid, nu, j, t)


@dataclass(frozen=True)
class LinearizedFrame:
    """Fields of the perturbation (u, v) around a front, in the moving frame."""

    t: float
    z: np.ndarray
    u: np.ndarray
    v: np.ndarray


def linearized_run(
    profile,
    epsilon: float,
    g: GrowthFunction,
    u0,
    v0,
    t_end: float,
    grid: GridSpec,
    cfl_fraction: float = 0.9,
    observer: Callable[[LinearizedFrame], None] | None = None,
    snapshot_every: float | None = None,
    sources: bool = True,
) -> LinearizedFrame:
    """Evolve the linearization around ``profile`` in the frame moving at its speed.

    (u, v) are split into g+- = (u +- v)/2, advected at -s +- 1/eps with the
    same limited upwind update and zero inflow. The coefficient F'(nu) is
    frozen per cell. ``u0``/``v0`` may be arrays on ``grid`` or callables of z.
    """
    params = profile.params
    if not params.minimal:
        raise ValueError("linearized_run needs the minimal-speed front")
    if abs(params.epsilon - epsilon) > 1e-14:
        raise ValueError("profile was built for a different epsilon")
    s = params.s
    z = grid.centers
    u = np.asarray(u0(z) if callable(u0) else u0, dtype=float).copy()
    v = np.asarray(v0(z) if callable(v0) else v0, dtype=float).copy()
    if u.shape != z.shape or v.shape != z.shape:
        raise ValueError("perturbation fields must match the grid")
    fprime = g.df(profile(z))
    state = KineticState(grid, 0.0, 0.5 * (u + v), 0.5 * (u - v))
    inv = 1.0 / epsilon**2

    def step_lin(st: KineticState, dt: float) -> KineticState:
        limit = max_stable_dt(grid, epsilon, s)
        if not (dt > 0 and dt < limit):
            raise CFLError(f"dt={dt} violates 0 < dt < {limit}")
        gp, gm = st.f_plus, st.f_minus
        new_p = advect(gp, 1.0 / epsilon - s, dt, grid.dx, 0.0, 0.0)
        new_m = advect(gm, -1.0 / epsilon - s, dt, grid.dx, 0.0, 0.0)
        if sources:
            uu, vv = gp + gm, gp - gm
            new_p += 0.5 * dt * (fprime * uu - inv * vv)
            new_m += 0.5 * dt * (fprime * uu + inv * vv)
        return KineticState(grid, st.t + dt, new_p, new_m)

    def frame(st):
        return LinearizedFrame(st.t, z, st.f_plus + st.f_minus, st.f_plus - st.f_minus)

    if t_end < 0:
        raise ValueError("t_end must be nonnegative")
    if snapshot_every is not None and not snapshot_every > 0:
        raise ValueError("snapshot_every must be positive")
    dt = cfl_fraction * max_stable_dt(grid, epsilon, s)
    if observer is not None:
        observer(frame(state))
    times, snap = _schedule(0.0, t_end, dt, snapshot_every)
    for t_next, is_snap in zip(times, snap):
        state = replace(step_lin(state, t_next - state.t), t=t_next)
        if observer is not None and (is_snap or snapshot_every is None):
            observer(frame(state))
    return frame(state)
