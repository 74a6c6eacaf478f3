import dataclasses

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from combwg import constants as const
from combwg.bloch import mode_field, solve_at_k
from combwg.geometry import GeometryParams, PermittivityMap, analytic_fourier, fourier_coefficients
from combwg.trap import (
    AtomSpec,
    GridMismatchError,
    NoMinimumFoundError,
    NonPositiveDistanceError,
    PolarizabilityTableGapError,
    PotentialMap,
    TrapConfig,
    TrapError,
    ZeroGroupVelocityError,
    casimir_polder,
    compose_trap,
    find_minima,
    power_normalize,
    stark_potential,
    trap_grid,
)

ATOM = AtomSpec.rubidium()


def _two_line_polarizability(lam_nm):
    """Independent D1 + D2 oscillator sum (no core term) in C m²/V."""
    c, eps0 = const.C, const.EPS0
    w = 2 * np.pi * c / (lam_nm * 1e-9)
    total = 0.0
    for line, gamma, weight in ((794.979, 2 * np.pi * 5.746e6, 1), (780.241, 2 * np.pi * 6.065e6, 2)):
        wi = 2 * np.pi * c / (line * 1e-9)
        total += 2 * np.pi * eps0 * c**3 * weight * gamma / (wi**2 * (wi**2 - w**2))
    return total


@pytest.fixture(scope="module")
def slab_field():
    """Fundamental mode of a 532 nm slab; its evanescent tail stands in for a guided trap beam."""
    p = GeometryParams.from_reduced(H=2.0, w=0.5, etch_fraction=0.0, a=266.0)
    m = solve_at_k(analytic_fourier(p, (2, 60)), 2 * np.pi * 0.42 / p.a, 1)[0]
    z, x = trap_grid(p, reach=500.0, step=10.0, nz=8)
    return mode_field(m, grid=(z, x))


@pytest.mark.parametrize("lam", [700.0, 719.4, 837.0, 900.0])
def test_polarizability_matches_oscillator_sum(lam):
    assert ATOM.polarizability(lam) == pytest.approx(_two_line_polarizability(lam), rel=1e-3)


def test_polarizability_near_known_far_detuned_value():
    # about 687 atomic units at 1064 nm including the core; the table omits the core
    assert ATOM.polarizability(1064.0) / const.AU_POLARIZABILITY == pytest.approx(687.0, rel=3e-2)


def test_polarizability_signs_and_gap():
    assert ATOM.polarizability(837.0) > 0
    assert ATOM.polarizability(719.4) < 0
    with pytest.raises(PolarizabilityTableGapError):
        ATOM.polarizability(780.0)
    with pytest.raises(PolarizabilityTableGapError):
        ATOM.polarizability(500.0)


def test_trap_config_validation():
    TrapConfig(837.0, 719.4, 1.0, 1.0).validate(ATOM)
    with pytest.raises(TrapError):
        TrapConfig(719.4, 837.0, 1.0, 1.0).validate(ATOM)
    with pytest.raises(TrapError):
        TrapConfig(837.0, 719.4, -1.0, 1.0).validate(ATOM)
    with pytest.raises(TrapError):
        AtomSpec(780.0, ATOM.table, c3=0.0)


def test_casimir_polder_values():
    assert casimir_polder(100.0) == pytest.approx(-const.RB_C3_MK_NM3 / 1e6, rel=1e-15)
    assert casimir_polder(200.0) == pytest.approx(casimir_polder(100.0) / 8, rel=1e-15)
    assert casimir_polder(50.0, c3=1.0) == pytest.approx(-1.0 / 125000.0)
    with pytest.raises(NonPositiveDistanceError):
        casimir_polder(np.array([10.0, 0.0]))


def test_casimir_polder_is_weak_beyond_160_nm():
    d = np.linspace(160.0, 500.0, 50)
    assert np.all(np.abs(casimir_polder(d, ATOM)) < 0.02)


@settings(max_examples=30, deadline=None)
@given(st.floats(1.0, 1000.0), st.floats(1.01, 5.0))
def test_casimir_polder_cubic_scaling(d, f):
    assert casimir_polder(f * d) == pytest.approx(casimir_polder(d) / f**3, rel=1e-12)


def test_trap_grid_stays_inside_padding():
    p = GeometryParams.from_reduced(H=2.0, w=0.372, etch_fraction=0.8, a=266.0)
    z, x = trap_grid(p)
    assert z[0] == 0 and z[-1] < p.a
    assert np.all(x < p.sidewall_x) and p.sidewall_x - x.min() == pytest.approx(500.0)
    with pytest.raises(TrapError):
        trap_grid(p, reach=600.0)


def test_plane_wave_light_shift_matches_intensity_formula():
    """In vacuum P = ½ c ε0 |E|² S t, so U = -α P / (2 c ε0 S t)."""
    p = GeometryParams.from_reduced(H=2.0, w=0.5, etch_fraction=0.0, n=1.0, a=300.0)
    pm = PermittivityMap(eps=np.ones((32, 192)), dz=p.a / 32, dx=p.S / 192, params=p, subpixel=True)
    m = solve_at_k(fourier_coefficients(pm, (2, 8)), 2 * np.pi * 0.2 / p.a, 1)[0]
    fld = mode_field(m, grid=16)
    power = 2.0  # mW
    U = stark_potential(fld, power, ATOM, 837.0).U
    area = p.S * const.NM * fld.thickness * const.NM
    expected = const.joule_to_mk(-ATOM.polarizability(837.0) * power * const.MW / (2 * const.C * const.EPS0 * area))
    assert np.allclose(U, expected, rtol=1e-10)


def test_power_normalization(slab_field):
    scaled = power_normalize(slab_field, 3.5)
    assert scaled.power == pytest.approx(3.5e-3, rel=1e-12)
    assert power_normalize(slab_field, 0.0).power == 0.0
    with pytest.raises(TrapError):
        power_normalize(slab_field, -1.0)
    frozen = dataclasses.replace(slab_field, mode=dataclasses.replace(slab_field.mode, group_velocity_reduced=0.0))
    with pytest.raises(ZeroGroupVelocityError):
        power_normalize(frozen, 1.0)


@settings(max_examples=10, deadline=None)
@given(st.floats(0.01, 10.0), st.floats(1.1, 4.0))
def test_light_shift_is_linear_in_power(slab_field, p, f):
    u1 = stark_potential(slab_field, p, ATOM, 837.0).U
    u2 = stark_potential(slab_field, f * p, ATOM, 837.0).U
    assert np.allclose(u2, f * u1, rtol=1e-12, atol=0)


def test_light_shift_ignores_field_phase(slab_field):
    u1 = stark_potential(slab_field, 1.0, ATOM, 837.0).U
    u2 = stark_potential(slab_field.scaled(np.exp(0.7j) * 3.0), 1.0, ATOM, 837.0).U
    assert np.allclose(u1, u2, rtol=1e-12)


def test_red_light_alone_pulls_atoms_to_the_wall(slab_field):
    pm = stark_potential(slab_field, 1.0, ATOM, 837.0)
    assert np.all(pm.U[pm.air] <= 0)
    # rises monotonically away from the wall until Gibbs ripple of the truncated series takes over
    near = np.argsort(pm.distance)[: int(np.sum(pm.distance <= 350.0))]
    assert np.all(np.diff(pm.U[0][near]) > 0)
    # only ripple-sized dimples remain far from the wall
    wall = pm.U[0][near[0]]
    for m in find_minima(compose_trap([pm], ATOM)).minima:
        assert m.d > 350.0 and abs(m.depth) < 1e-2 * abs(wall)


def test_blue_light_alone_repels(slab_field):
    pm = stark_potential(slab_field, 1.0, ATOM, 719.4)
    assert pm.component == "blue"
    assert np.all(pm.U[pm.air] >= 0)


def test_compose_adds_casimir_polder_in_air(slab_field):
    red = stark_potential(slab_field, 1.0, ATOM, 837.0)
    total = compose_trap([red], ATOM)
    d = np.broadcast_to(red.distance[None, :], red.U.shape)
    expected = red.U + np.where(red.air, -ATOM.c3 / d**3, 0.0)
    assert np.allclose(total.U, expected, rtol=1e-14)
    assert total.component == "red+cp"


def test_compose_rejects_mismatched_grids(slab_field):
    red = stark_potential(slab_field, 1.0, ATOM, 837.0)
    other = dataclasses.replace(red, x=red.x + 1.0)
    with pytest.raises(GridMismatchError):
        compose_trap([red, other])
    with pytest.raises(TrapError):
        compose_trap([])


def _gaussian_well(d0, z0, depth, sx, sz, step=2.0, nz=64):
    p = GeometryParams.from_reduced(H=2.0, w=0.372, etch_fraction=0.8, a=266.0)
    z = np.arange(nz) * p.a / nz
    x = p.sidewall_x - step * np.arange(int(520 / step), 0, -1)
    d = p.sidewall_x - x
    dz = (z - z0 + 0.5 * p.a) % p.a - 0.5 * p.a
    U = -depth * np.exp(-((d[None, :] - d0) ** 2) / (2 * sx**2) - dz[:, None] ** 2 / (2 * sz**2))
    air = np.ones_like(U, dtype=bool)
    return PotentialMap(z=z, x=x, U=U, component="synthetic", air=air, params=p)


def test_gaussian_well_is_recovered():
    d0, z0, depth, sx, sz = 173.3, 11.0, 1.7, 40.0, 60.0
    rep = find_minima(_gaussian_well(d0, z0, depth, sx, sz))
    m = rep.minima[0]
    assert m.d == pytest.approx(d0, abs=0.2)
    assert m.z == pytest.approx(z0, abs=0.5)
    assert m.depth == pytest.approx(-depth, rel=1e-3)
    k_si = depth * const.KB * const.MK / (np.array([sx, sz]) * const.NM) ** 2
    nu = np.sqrt(k_si / const.RB87_MASS) / (2 * np.pi)
    assert np.allclose(m.frequencies, nu, rtol=2e-2)
    assert m.barrier_surface == pytest.approx(depth, rel=1e-2)


def test_minimum_near_zone_boundary_is_wrapped():
    m = find_minima(_gaussian_well(200.0, -20.0, 1.0, 40.0, 60.0)).minima[0]
    assert m.z == pytest.approx(-20.0, abs=0.5)


def test_exclusion_hides_close_minima():
    pmap = _gaussian_well(60.0, 0.0, 1.0, 10.0, 60.0)
    assert find_minima(pmap).minima[0].d == pytest.approx(60.0, abs=0.2)
    with pytest.raises(NoMinimumFoundError):
        find_minima(pmap, exclusion=100.0)


def test_map_must_reach_500_nm():
    pmap = _gaussian_well(200.0, 0.0, 1.0, 40.0, 60.0)
    short = dataclasses.replace(pmap, x=pmap.x[100:], U=pmap.U[:, 100:], air=pmap.air[:, 100:])
    with pytest.raises(TrapError):
        find_minima(short)


def test_potential_csv(tmp_path):
    pmap = _gaussian_well(200.0, 0.0, 1.0, 40.0, 60.0, step=20.0, nz=8)
    path = tmp_path / "u.csv"
    pmap.to_csv(path)
    lines = path.read_text().splitlines()
    assert lines[1] == "z_nm,x_nm,d_nm,U_mK"
    assert len(lines) == 2 + pmap.U.size
