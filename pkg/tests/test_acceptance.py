"""Acceptance gate: one test per criterion, each reporting a single PASS/FAIL line."""

import dataclasses

import numpy as np
import pytest

from combwg.bloch import BlochSolver, crossing_gap, fourier_for, mode_field
from combwg.dispersion import fit_dispersion_exponent, scaling_exponent
from combwg.emission import beta_factor, effective_area, gamma_1d, position_scan
from combwg.geometry import GeometryParams
from combwg.greens import mirror_rate_closed_form, normalized_decay_rate, solve_dipole, vacuum_problem
from combwg.trap import AtomSpec, casimir_polder, compose_trap, find_minima, stark_potential, trap_grid

from conftest import BUILD_SECONDS, TUNED_PERIOD, quartic_params, symmetric_params
from test_bloch import _slab, _slab_oracle, _uniform
from test_greens import CELL, LAM

ATOM = AtomSpec.rubidium()
RESULTS: list[str] = []


def record(n: int, ok: bool, detail: str) -> None:
    line = f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    RESULTS.append(line)
    print(line)


def test_criterion_01_symmetric_comb_is_quadratic(symmetric_red_band):
    p = fit_dispersion_exponent(symmetric_red_band).exponent
    dt = BUILD_SECONDS["symmetric"]
    ok = abs(p - 2.0) <= 0.2 and dt <= 600
    record(1, ok, f"p = {p:.3f} (target 2.0 ± 0.2), band solved in {dt:.0f} s")
    assert abs(p - 2.0) <= 0.2
    assert dt <= 600


def test_criterion_02_flat_band_is_quartic(quartic_band):
    p = fit_dispersion_exponent(quartic_band).exponent
    dt = BUILD_SECONDS["quartic"]
    ok = abs(p - 4.0) <= 0.3 and dt <= 600
    record(2, ok, f"p = {p:.3f} (target 4.0 ± 0.3), band solved in {dt:.0f} s")
    assert abs(p - 4.0) <= 0.3
    assert dt <= 600


def test_criterion_03_group_index_scaling(quartic_band, symmetric_red_band):
    sq = scaling_exponent(quartic_band)
    ss = scaling_exponent(symmetric_red_band)
    ok = abs(sq + 0.75) <= 0.05 and abs(ss + 0.5) <= 0.05
    record(3, ok, f"slopes {sq:.3f} (target -0.75 ± 0.05) and {ss:.3f} (target -0.50 ± 0.05)")
    assert sq == pytest.approx(-0.75, abs=0.05)
    assert ss == pytest.approx(-0.5, abs=0.05)


def test_criterion_04_selection_rules(settings):
    sym = GeometryParams.from_reduced(H=2.0, w=0.5, etch_fraction=0.25, kind="rectangular-symmetric")
    rect = GeometryParams.from_reduced(H=2.0, w=0.5, etch_fraction=0.5)
    sine = GeometryParams.from_reduced(H=2.0, w=0.5, etch_fraction=0.5, kind="sinusoidal-asymmetric")
    bracket = (0.3, 0.48)
    k_sym, g_sym = crossing_gap(fourier_for(sym, settings), (1, 0), (0.33, 0.42), ("symmetric", "antisymmetric"))
    k_rect, g_rect = crossing_gap(fourier_for(rect, settings), (1, 2), bracket)
    k_sine, g_sine = crossing_gap(fourier_for(sine, settings), (1, 2), bracket)
    margin = 0.01
    interior = all(bracket[0] + margin < k < bracket[1] - margin for k in (k_rect, k_sine))
    # the eigen-solve residual bound sets the frequency resolution of a crossing
    tol = 1e-8
    ok = g_sym < tol and interior and g_rect > 100 * tol and g_sine > 100 * tol and g_sine < g_rect
    record(
        4, ok,
        f"symmetric crossing gap {g_sym:.1e} at k~ {k_sym:.4f}; avoided gaps rectangular {g_rect:.4f} "
        f"at k~ {k_rect:.3f}, sinusoidal {g_sine:.4f} at k~ {k_sine:.3f}",
    )
    assert g_sym < tol
    assert interior
    assert min(g_rect, g_sine) > 100 * tol
    assert g_sine < g_rect


def test_criterion_05_casimir_polder_values():
    u10, u100 = float(casimir_polder(10.0, ATOM)), float(casimir_polder(100.0, ATOM))
    ok = abs(u10 / -67.0 - 1) <= 1e-12 and abs(u100 / -6.7e-2 - 1) <= 1e-12
    record(5, ok, f"U(10 nm) = {u10!r} mK, U(100 nm) = {u100!r} mK")
    assert u10 == pytest.approx(-67.0, rel=1e-12)
    assert u100 == pytest.approx(-6.7e-2, rel=1e-12)


def test_criterion_06_beta_arithmetic():
    b = beta_factor(10.0, 1.3)
    ok = abs(b - 0.885) <= 1e-3
    record(6, ok, f"beta(10, 1.3) = {b:.5f} (target 0.885 ± 0.001)")
    assert b == pytest.approx(0.885, abs=1e-3)


def test_criterion_07_solver_oracles():
    # homogeneous medium: folded light cone
    hom = _uniform(1.7)
    hom_err = 0.0
    for k in (0.0, 0.13, 0.37, 0.5):
        got = BlochSolver(hom).frequencies(k, 10)
        mz, mx = np.arange(-4, 5)[:, None], np.arange(-12, 13)[None, :]
        exact = np.sort((np.hypot(k + mz, mx / hom.S) / 1.7).ravel())[:10]
        hom_err = max(hom_err, float(np.max(np.abs(got - exact) / np.maximum(exact, 1e-300) * (exact > 0))))

    # dielectric slab: fundamental band against the transcendental equation
    slab, f = _slab()
    slab_err = max(abs(BlochSolver(f).frequencies(k, 1)[0] / _slab_oracle(k, slab.n, slab.H) - 1) for k in (0.3, 0.45))

    # vacuum: rate against a reference box of a different size, and power against k/16
    lam, cell = LAM, CELL
    ref = solve_dipole(vacuum_problem(lam, 3 * lam, cell))
    vac = normalized_decay_rate(vacuum_problem(lam, 2 * lam, cell), vacuum=ref).rate
    analytic = ref.source_power() / (2 * np.pi / lam / 16)

    # perfect mirror: image-dipole closed form
    prob = vacuum_problem(lam, 2 * lam, cell)
    mirror_err = 0.0
    for m, ori, name in ((8, (1.0, 0.0), "normal"), (13, (0.0, 1.0), "parallel")):
        d = (m + 0.5) * cell if name == "normal" else m * cell
        base = dataclasses.replace(prob, orientation=ori)
        x0 = -d + 0.5 * cell
        nx = int(round((prob.x0 + prob.dx * (prob.nx - 1) - x0) / cell)) + 1
        mirrored = dataclasses.replace(base, x0=x0, nx=nx, source=(0.0, base.source[1]), pml=(prob.pml[0], prob.pml[1], 0, prob.pml[3]))
        rate = normalized_decay_rate(mirrored, vacuum=solve_dipole(base)).rate
        mirror_err = max(mirror_err, abs(rate / float(mirror_rate_closed_form(d, lam, name)) - 1))

    ok = hom_err <= 1e-6 and slab_err <= 5e-3 and abs(vac - 1) <= 0.05 and abs(analytic - 1) <= 0.05 and mirror_err <= 0.05
    record(
        7, ok,
        f"homogeneous {hom_err:.1e}, slab {slab_err:.2%}, vacuum rate {vac:.4f} "
        f"(power over k/16 {analytic:.4f}), mirror {mirror_err:.2%}",
    )
    assert hom_err <= 1e-6
    assert slab_err <= 5e-3
    assert vac == pytest.approx(1.0, abs=0.05)
    assert analytic == pytest.approx(1.0, abs=0.05)
    assert mirror_err <= 0.05


@pytest.fixture(scope="module")
def trap_fields(trap_modes):
    red, blue = trap_modes
    z, x = trap_grid(quartic_params(TUNED_PERIOD), reach=500.0, step=5.0, nz=48)
    return mode_field(red, grid=(z, x)), mode_field(blue, grid=(z, x))


def test_criterion_08_two_colour_trap(trap_fields):
    fr, fb = trap_fields
    a = TUNED_PERIOD
    ub = stark_potential(fb, 1.0, ATOM, 719.4)
    minima = []
    for pr in (1.0, 0.9, 0.8, 0.7, 0.6):
        total = compose_trap([stark_potential(fr, pr, ATOM, 837.0), ub], ATOM)
        minima.append(find_minima(total, exclusion=20.0, atom=ATOM).minima[0])
    d = np.array([m.d for m in minima])
    depth = np.array([m.depth for m in minima])
    zs = np.array([m.z for m in minima])
    finite = np.all((d > 20.0) & (d < 500.0))
    in_range = np.all((np.abs(depth) >= 0.1) & (np.abs(depth) <= 10.0))
    at_zero = np.all(np.abs((zs + a / 2) % a - a / 2) < 1e-6 * a)
    trend = np.all(np.diff(d) > 0) and np.all(np.diff(np.abs(depth)) < 0)
    ok = bool(finite and in_range and at_zero and trend)
    record(
        8, ok,
        "P_r 1.0 -> 0.6 mW: d " + " ".join(f"{v:.1f}" for v in d) + " nm, depth "
        + " ".join(f"{v:.2f}" for v in depth) + f" mK, max |z| {np.max(np.abs(zs)):.1e} nm",
    )
    assert finite and in_range and at_zero
    assert np.all(np.diff(d) > 0)
    assert np.all(np.diff(np.abs(depth)) < 0)


def test_criterion_09_emission_trends(slow_field):
    a = slow_field.params.a
    d_values = [100.0, 150.0, 200.0, 250.0, 300.0, 400.0, 450.0, 500.0]
    vac = position_scan(slow_field, "d", d_values, method="vacuum-approx")
    g = np.array([r.gamma_1d for r in vac])
    monotone = np.all(np.diff(g) < 0)
    far = [400.0, 450.0, 500.0]
    ldos = position_scan(slow_field, "d", far, method="ldos-2d")
    betas = {
        "vacuum-approx": np.array([r.beta for r in vac if r.d >= 400.0]),
        "ldos-2d": np.array([r.beta for r in ldos]),
    }
    # "tends to zero": decreasing beyond 400 nm and below 5 % at the edge of the air region
    vanishes = all(np.all(np.diff(b) < 0) and b[-1] < 0.05 for b in betas.values())

    z = np.linspace(0.0, 2 * a, 33)
    r = position_scan(slow_field, "z", z, method="vacuum-approx", d=100.0)
    gz = np.array([x.gamma_1d for x in r])
    periodic = np.allclose(gz[:16], gz[16:32], rtol=1e-10) and gz[0] == pytest.approx(gz[32], rel=1e-10)
    ex, _, _ = slow_field.at(np.full(z.size, slow_field.params.sidewall_x - 100.0), z)
    peaks_match = int(np.argmax(gz[:16])) == int(np.argmax(np.abs(ex[:16])))
    ok = bool(monotone and vanishes and periodic and peaks_match)
    record(
        9, ok,
        "Γ1D(d) " + " ".join(f"{v:.3g}" for v in g)
        + "; β(400, 450, 500) vacuum-approx " + " ".join(f"{v:.3f}" for v in betas["vacuum-approx"])
        + ", ldos-2d " + " ".join(f"{v:.3f}" for v in betas["ldos-2d"])
        + f"; z-peak at {z[int(np.argmax(gz[:16]))]:.1f} nm",
    )
    assert monotone
    assert vanishes
    assert periodic
    assert peaks_match


def test_criterion_10_invariances(slow_field, rng, settings):
    r0 = (slow_field.params.sidewall_x - 150.0, 40.0)
    worst_rescale = 0.0
    u_ref = stark_potential(slow_field, 1.0, ATOM, 837.0).U
    for _ in range(5):
        f = 10 ** rng.uniform(-3, 3) * np.exp(1j * rng.uniform(0, 2 * np.pi))
        s = slow_field.scaled(f)
        for a_val, b_val in (
            (effective_area(s, r0), effective_area(slow_field, r0)),
            (gamma_1d(s, 30.0, r0), gamma_1d(slow_field, 30.0, r0)),
        ):
            worst_rescale = max(worst_rescale, abs(a_val / b_val - 1))
        u = stark_potential(s, 1.0, ATOM, 837.0).U
        worst_rescale = max(worst_rescale, float(np.max(np.abs(u - u_ref)) / np.max(np.abs(u_ref))))

    eps = fourier_for(quartic_params(), settings)
    solver = BlochSolver(eps)
    recip = 0.0
    for k in (0.13, 0.37, 0.46):
        wp, wm = solver.frequencies(k, 3), solver.frequencies(-k, 3)
        recip = max(recip, float(np.max(np.abs(wp / wm - 1))))

    scaled = BlochSolver(fourier_for(quartic_params(TUNED_PERIOD), settings))
    scale_err = 0.0
    for k in (0.2, 0.45):
        w1 = solver.frequencies(k, 3)
        w2 = scaled.frequencies(k, 3)
        scale_err = max(scale_err, float(np.max(np.abs(w2 / w1 - 1))))

    lin = 0.0
    for p in (0.3, 2.7):
        u = stark_potential(slow_field, p, ATOM, 837.0).U
        lin = max(lin, float(np.max(np.abs(u - p * u_ref)) / np.max(np.abs(p * u_ref))))

    ok = worst_rescale <= 1e-10 and recip <= 1e-8 and scale_err <= 1e-10 and lin <= 1e-12
    record(10, ok, f"rescale {worst_rescale:.1e}, reciprocity {recip:.1e}, scale {scale_err:.1e}, linearity {lin:.1e}")
    assert worst_rescale <= 1e-10
    assert recip <= 1e-8
    assert scale_err <= 1e-10
    assert lin <= 1e-12
