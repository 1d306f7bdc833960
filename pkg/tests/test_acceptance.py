"""Acceptance suite: each test checks one criterion at its stated tolerance and
prints a PASS/FAIL line (collected again in the terminal summary)."""

import math

import numpy as np

from conftest import record
from hyperkpp.diagnostics import (
    compare_profile,
    estimate_speed,
    front_position,
    gaussian_perturbation,
    jump_sharpness,
    linear_lyapunov_series,
    max_relative_growth,
    nonlinear_energy_series,
    reference_point,
)
from hyperkpp.dispersion import (
    char_roots_one,
    char_roots_zero,
    discriminant_zero,
    minimal_speed,
    wave_parameters,
)
from hyperkpp.growth import logistic
from hyperkpp.profile import (
    NoFrontError,
    ProfileOptions,
    build_hyperbolic,
    build_minimal,
    build_parabolic,
    build_supersonic,
    residual,
)
from hyperkpp.solver import GridSpec, density, init_step_state, run

G = logistic(1.0)
SLACK = 1e-3  # allowed relative energy growth per unit time


def step_run(eps, t_end, dx=0.05, a=-30.0, b=120.0):
    grid = GridSpec.from_dx(a, b, dx)
    snaps = []
    final = run(init_step_state(grid, eps), eps, G, t_end, cfl_fraction=0.9,
                observer=lambda t, s: snaps.append((t, grid.centers, density(s).copy())),
                snapshot_every=0.5)
    lo = min(float(r.min()) for _, _, r in snaps)
    hi = max(float(r.max()) for _, _, r in snaps)
    return grid, snaps, density(final), (lo, hi)


def test_c01_minimal_speed_parabolic():
    _, snaps, _, (lo, hi) = step_run(0.5, 60.0)
    fit = estimate_speed(snaps, 0.5, 0.5)
    rel = abs(fit.speed - 1.6) / 1.6
    ok = rel <= 0.03 and lo >= -1e-12 and hi <= 1 + 1e-12
    record("C1 minimal speed eps=0.5", ok,
           f"speed {fit.speed:.5f} vs 1.6 (rel {rel:.4f} <= 0.03); rho in [{lo:.2e}, {hi:.6f}]")
    assert ok


def test_c02_critical_speed_and_profile(critical_front):
    grid, snaps, rho, _ = step_run(1.0, 60.0)
    fit = estimate_speed(snaps, 0.5, 0.5)
    rel = abs(fit.speed - 1.0)
    x = grid.centers
    exact_half = 2.0 * math.log(0.5)
    _, linf, _ = compare_profile(x, rho, critical_front)
    # the closed form, evaluated directly as an independent check of the constructed profile
    shift = front_position(x, rho, 0.5) - exact_half
    linf_closed = float(np.max(np.abs(rho - np.clip(1 - np.exp((x - shift) / 2), 0, 1))[x - shift > -30]))
    ok = rel <= 0.03 and linf < 0.05 and linf_closed < 0.05
    record("C2 critical eps=1", ok,
           f"speed {fit.speed:.5f} (rel {rel:.4f} <= 0.03); Linf {linf:.4f} / closed form "
           f"{linf_closed:.4f} < 0.05")
    assert ok


def test_c03_hyperbolic_speed_and_jump():
    grid, snaps, rho, (lo, hi) = step_run(2.0, 120.0)
    fit = estimate_speed(snaps, 0.5, 0.5)
    rel = abs(fit.speed - 0.5) / 0.5
    th = wave_parameters(2.0, G).theta
    width, back = jump_sharpness(grid.centers, rho, th)
    ok = rel <= 0.05 and width <= 6 and 0.6 <= back <= 0.9
    record("C3 hyperbolic eps=2", ok,
           f"speed {fit.speed:.5f} (rel {rel:.4f} <= 0.05); width {width} cells <= 6; "
           f"back {back:.4f} in [0.6, 0.9] (theta {th})")
    assert ok


def test_c04_dispersion_exactness():
    worst_res = worst_vieta = worst_disc = 0.0
    count = 0
    for eps in np.linspace(0.1, 0.9, 10):
        s_star = minimal_speed(eps, G)
        worst_disc = max(worst_disc, abs(discriminant_zero(eps, s_star, G)))
        for s in np.linspace(s_star, 0.98 / eps, 5):
            count += 1
            a, f0 = eps**2 * s**2 - 1, G.fprime0
            for b, c, roots in (((1 - eps**2 * f0) * s, -f0, char_roots_zero(eps, s, G)),
                                (-(1 - eps**2 * G.fprime1) * s, -G.fprime1, char_roots_one(eps, s, G))):
                scale = max(abs(a), abs(b), abs(c))
                for lam in roots:
                    worst_res = max(worst_res, abs(a * lam**2 + b * lam + c) / (scale * max(1, abs(lam)) ** 2))
                worst_vieta = max(worst_vieta,
                                  abs(sum(roots) + b / a) / max(1.0, abs(b / a)),
                                  abs(roots[0] * roots[1] - c / a) / max(1.0, abs(c / a)))
    ok = count == 50 and worst_res < 1e-10 and worst_disc < 1e-9 and worst_vieta < 1e-10
    record("C4 dispersion exactness", ok,
           f"{count} pairs; residual {worst_res:.1e}, |disc(s*)| {worst_disc:.1e}, Vieta {worst_vieta:.1e}")
    assert ok


def test_c05_hyperbolic_profile_oracle():
    eps = 2.0
    prof = build_hyperbolic(wave_parameters(eps, G), G)
    th = 0.75

    def lhs(nu):
        return (eps**2 - 1) * np.log(nu) + (eps**2 + 1) * np.log1p(-nu)

    m = (prof.z < 0) & (prof.nu < 1 - 1e-6)
    err = float(np.max(np.abs(lhs(prof.nu[m]) - lhs(th) - eps * prof.z[m])))
    left = float(prof(np.array([-1e-12]))[0])
    ok = err < 1e-6 and abs(left - th) <= 1e-8
    record("C5 hyperbolic profile", ok,
           f"implicit relation error {err:.1e} < 1e-6; left limit {left:.12f} vs 0.75")
    assert ok


def test_c06_parabolic_self_consistency():
    cases = [(0.5, 1.6), (0.5, 1.8), (0.2, 2.0 / 1.04)]
    details, ok = [], True
    for eps, s in cases:
        prof = build_parabolic(wave_parameters(eps, G, s), G)
        res = residual(prof, G)
        mono = bool(np.all(np.diff(prof.nu) <= 0))
        good = res < 1e-6 and mono
        if prof.params.minimal:
            floor = float(np.min(prof.dnu + prof.params.lam * prof.nu))
            good &= floor >= -1e-8
            details.append(f"({eps}, {s:.4f}) res {res:.1e} min(nu'+lam nu) {floor:.1e}")
        else:
            details.append(f"({eps}, {s:.4f}) res {res:.1e}")
        ok &= good
    record("C6 parabolic profiles", ok, "; ".join(details) + "; monotone")
    assert ok


def test_c07_supersonic_trapping():
    prof, orbit = build_supersonic(wave_parameters(math.sqrt(2.0), G, 1.0), G)
    excess = float(np.max(orbit.p - orbit.upper_bound(G)))
    lowest = float(np.min(orbit.p))
    end = abs(float(orbit.p[-1]))
    ok = lowest >= 0 and excess <= 1e-8 and end < 1e-6 and abs(orbit.k - 2.0) < 1e-12
    record("C7 supersonic trapping", ok,
           f"min P {lowest:.2e} >= 0; max excess {excess:.1e} <= 1e-8; |P(1-d0)| {end:.1e} < 1e-6")
    assert ok


def test_c08_no_front_below_minimal_speed():
    checked, ok = 0, True
    for eps in (0.2, 0.5, 0.8):
        s_star = minimal_speed(eps, G)
        for k in range(1, 21):
            s = s_star * k / 21
            complex_roots = all(abs(r.imag) > 0 for r in char_roots_zero(eps, s, G))
            try:
                build_parabolic(wave_parameters(eps, G, s), G)
                raised = False
            except NoFrontError:
                raised = True
            ok &= complex_roots and raised
            checked += 1
    record("C8 no front below s*", ok, f"{checked} (eps, s) pairs: complex roots and NoFrontError")
    assert ok


def test_c09_lyapunov_monotone():
    grid = GridSpec.from_dx(-40.0, 40.0, 0.0125)
    prof = build_minimal(0.5, G, ProfileOptions(z_range=(grid.a, grid.b)))
    u0 = gaussian_perturbation(grid.centers, reference_point(prof), 0.01, 2.0)
    par = linear_lyapunov_series(prof, G, grid, u0, t_end=20.0, snapshot_every=0.5)
    g_par = max_relative_growth(par.t, par.lyapunov)

    hgrid = GridSpec.from_dx(-60.0, 0.0, 0.025)
    hprof = build_minimal(2.0, G, ProfileOptions(z_range=(hgrid.a, hgrid.b)))
    hu0 = gaussian_perturbation(hgrid.centers, reference_point(hprof), 0.01, 2.0, upper=0.0)
    hyp = linear_lyapunov_series(hprof, G, hgrid, hu0, t_end=20.0, snapshot_every=0.5)
    g_hyp = max_relative_growth(hyp.t, hyp.lyapunov)
    ok = g_par <= SLACK and g_hyp <= SLACK
    record("C9 Lyapunov monotone", ok,
           f"max relative growth/unit time eps=0.5 {g_par:+.2e}, eps=2 {g_hyp:+.2e} (<= {SLACK})")
    assert ok


def test_c10_nonlinear_energy():
    grid = GridSpec.from_dx(-40.0, 40.0, 0.0125)
    prof = build_minimal(0.5, G, ProfileOptions(z_range=(grid.a, grid.b)))
    u0 = gaussian_perturbation(grid.centers, 0.0, 0.01, 2.0)
    series = nonlinear_energy_series(prof, G, grid, u0, t_end=40.0, snapshot_every=0.5)
    growth = max_relative_growth(series.t, series.column("e_combined"))
    sup = float(series.sup_norm.max())
    first = series.reports[0]
    ok = growth <= SLACK and sup < 0.05 and series.t[-1] > 39.0
    record("C10 combined energy", ok,
           f"max relative growth/unit time {growth:+.2e} (<= {SLACK}); sup|u| {sup:.4f} < 0.05; "
           f"z0 {first.z0:.3f}, deltas {tuple(round(float(d), 4) for d in first.deltas)}")
    assert ok


def test_c11_scheme_verification():
    from test_solver import transport_orders

    orders = transport_orders()
    plain, corrected = [], []
    for dx in (0.1, 0.05, 0.025):
        _, snaps, _, _ = step_run(0.5, 60.0, dx=dx)
        plain.append(abs(estimate_speed(snaps).speed - 1.6))
        corrected.append(abs(estimate_speed(snaps, log_correction=True).speed - 1.6))
    decreasing = corrected[0] > corrected[1] > corrected[2]
    ok = bool(np.all(orders >= 1.5)) and decreasing
    record("C11 scheme verification", ok,
           f"transport orders {np.round(orders, 3).tolist()} >= 1.5; speed error (log-corrected fit) "
           f"{[round(e, 4) for e in corrected]} strictly decreasing; plain fit "
           f"{[round(e, 4) for e in plain]}")
    assert ok
