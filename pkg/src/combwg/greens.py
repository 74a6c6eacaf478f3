"""Dipole emission rates from a 2D TM finite-difference frequency-domain solve.

The unknown is ``H_y`` on grid nodes ``(z_i, x_j)``; ``E_x`` lives on
``(z_i + dz/2, x_j)`` and ``E_z`` on ``(z_i, x_j + dx/2)``.  With
``exp(-iωt)`` time dependence the discrete equation is

    Dz_b εx⁻¹ Dz_f H + Dx_b εz⁻¹ Dx_f H + k0² H = -Dz_b εx⁻¹ Jx + Dx_b εz⁻¹ Jz

with stretched-coordinate absorbing layers folded into the difference
operators.  Outside the domain ``H = 0`` on the high-index sides and
``E = 0`` (tangential) on the low-index sides, so a perfect electric mirror
is obtained by switching the absorbing layer off on a low side.

The decay rate relative to vacuum is the ratio of radiated powers for the
same source on the same grid.  Lengths are in nm.
"""

from __future__ import annotations

import dataclasses
import math
from collections.abc import Callable, Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import constants as const
from .geometry import GeometryParams

__all__ = [
    "FdfdProblem",
    "FieldSolution",
    "LdosResult",
    "solve_dipole",
    "normalized_decay_rate",
    "convergence_scan",
    "comb_problem",
    "vacuum_problem",
    "mirror_rate_closed_form",
]


class SingularSystemError(RuntimeError):
    pass


class NonConvergedError(RuntimeError):
    pass


class InvalidProblemError(ValueError):
    pass


RESIDUAL_TOL = 1e-8


@dataclasses.dataclass(frozen=True, eq=False)
class FdfdProblem:
    """A dipole in a 2D permittivity distribution.

    ``eps_func(x, z)`` gives ε at arbitrary points (vectorized).  The grid has
    ``nz x nx`` nodes starting at ``(z0, x0)`` with spacings ``dz, dx``.
    ``pml`` holds absorbing-layer thicknesses in cells for the sides
    ``(z_low, z_high, x_low, x_high)``; zero on a low side gives a perfect
    electric mirror half a cell outside the first node.
    """

    eps_func: Callable
    wavelength: float
    z0: float
    x0: float
    dz: float
    dx: float
    nz: int
    nx: int
    source: tuple[float, float]  # (x, z) of the dipole
    orientation: tuple[float, float] = (1.0, 0.0)  # (e_x, e_z)
    pml: tuple[int, int, int, int] = (40, 40, 40, 40)
    pml_strength: float | None = None
    amplitude: complex = 1.0
    subsamples: int = 4
    n_max: float = 1.0
    label: str = ""

    @property
    def k0(self) -> float:
        return 2 * np.pi / self.wavelength

    def source_indices(self) -> dict:
        """Grid indices of the E_x and E_z points nearest the dipole."""
        x, z = self.source
        ix_node = int(round((x - self.x0) / self.dx))
        iz_half = int(round((z - self.z0) / self.dz - 0.5))
        iz_node = int(round((z - self.z0) / self.dz))
        ix_half = int(round((x - self.x0) / self.dx - 0.5))
        return {"ex": (iz_half, ix_node), "ez": (iz_node, ix_half)}

    def validate(self) -> None:
        problems = []
        cells_per_lambda = self.wavelength / (self.n_max * max(self.dx, self.dz))
        if cells_per_lambda < 20:
            problems.append(f"only {cells_per_lambda:.1f} cells per material wavelength (need 20)")
        for side, n in zip(("z_low", "z_high", "x_low", "x_high"), self.pml):
            h = self.dz if side.startswith("z") else self.dx
            if n and n * h < self.wavelength * (1 - 1e-9):
                problems.append(f"absorbing layer on {side} thinner than one wavelength")
        x, z = self.source
        if np.asarray(self.eps_func(np.array([x]), np.array([z]))).ravel()[0] != 1.0:
            problems.append("dipole must sit in air")
        idx = self.source_indices()
        for key, (i, j) in idx.items():
            if not (self.pml[0] < i < self.nz - self.pml[1] - 1 and self.pml[2] < j < self.nx - self.pml[3] - 1):
                problems.append("dipole must lie inside the absorbing-layer-free region")
                break
        if problems:
            raise InvalidProblemError("; ".join(problems))

    def with_eps(self, eps_func: Callable, n_max: float = 1.0, label: str = "") -> "FdfdProblem":
        return dataclasses.replace(self, eps_func=eps_func, n_max=n_max, label=label)


@dataclasses.dataclass(frozen=True, eq=False)
class FieldSolution:
    problem: FdfdProblem
    H: np.ndarray  # (nz, nx) at nodes
    Ex: np.ndarray  # (nz, nx) at (z + dz/2, x)
    Ez: np.ndarray  # (nz, nx) at (z, x + dx/2)
    Jx: np.ndarray
    Jz: np.ndarray
    residual: float

    @property
    def z(self) -> np.ndarray:
        p = self.problem
        return p.z0 + p.dz * np.arange(p.nz)

    @property
    def x(self) -> np.ndarray:
        p = self.problem
        return p.x0 + p.dx * np.arange(p.nx)

    def source_power(self) -> float:
        """-½ Re ∫ J*·E dA (per unit length along y)."""
        p = self.problem
        cell = p.dx * p.dz
        return float(-0.5 * np.real(np.sum(np.conj(self.Jx) * self.Ex) + np.sum(np.conj(self.Jz) * self.Ez)) * cell)

    def box_flux(self, margin: int = 3) -> float:
        """Outgoing Poynting flux through a node box ``margin`` cells around the source.

        The face pairing follows the discrete summation-by-parts identity of
        the Yee scheme, so in a lossless region it equals :meth:`source_power`
        to round-off.
        """
        p = self.problem
        (iz_h, ix_n), (iz_n, ix_h) = p.source_indices()["ex"], p.source_indices()["ez"]
        i0 = min(iz_h, iz_n) - margin
        i1 = max(iz_h + 1, iz_n) + margin
        j0 = min(ix_n, ix_h) - margin
        j1 = max(ix_n, ix_h + 1) + margin
        H, Ex, Ez = self.H, self.Ex, self.Ez
        top = np.sum(np.real(Ex[i1, j0 : j1 + 1] * np.conj(H[i1, j0 : j1 + 1])))
        bottom = np.sum(np.real(Ex[i0 - 1, j0 : j1 + 1] * np.conj(H[i0, j0 : j1 + 1])))
        right = np.sum(np.real(Ez[i0 : i1 + 1, j1] * np.conj(H[i0 : i1 + 1, j1])))
        left = np.sum(np.real(Ez[i0 : i1 + 1, j0 - 1] * np.conj(H[i0 : i1 + 1, j0])))
        return float(0.5 * ((top - bottom) * p.dx - (right - left) * p.dz))


@dataclasses.dataclass(frozen=True)
class LdosResult:
    rate: float  # Γ_tot / Γ0
    vacuum_power: float
    power: float
    residual: float
    n_periods: int | None = None
    flux_rate: float | None = None


def _stretch(n_cells: int, total: int, strength: float, low: bool, high: bool, shift: float):
    """Complex stretch factors s = 1 + i σ(ρ) at positions index + shift."""
    pos = np.arange(total) + shift
    s = np.ones(total, dtype=complex)
    lo_n, hi_n = n_cells
    if low and lo_n:
        rho = np.clip((lo_n - pos) / lo_n, 0, None)
        s += 1j * strength * rho**2
    if high and hi_n:
        edge = total - 1 - hi_n
        rho = np.clip((pos - edge) / hi_n, 0, None)
        s += 1j * strength * rho**2
    return s


def _derivatives(n: int, h: float):
    """Forward (node -> half) and backward (half -> node) differences."""
    ones = np.ones(n)
    fwd = sp.diags([-ones, ones[:-1]], [0, 1], shape=(n, n), format="csr") / h
    bwd = sp.diags([ones, -ones[:-1]], [0, -1], shape=(n, n), format="csr") / h
    return fwd, bwd


def _averaged_inverse_eps(problem: FdfdProblem, zs: np.ndarray, xs: np.ndarray) -> np.ndarray:
    """Cell average of 1/ε around each staggered point (subsampled)."""
    m = problem.subsamples
    offs = (np.arange(m) + 0.5) / m - 0.5
    acc = np.zeros((zs.size, xs.size))
    for oz in offs:
        for ox in offs:
            Z = (zs + oz * problem.dz)[:, None]
            X = (xs + ox * problem.dx)[None, :]
            acc += 1.0 / np.broadcast_to(problem.eps_func(X, Z), acc.shape)
    return acc / (m * m)


def _pml_strength(problem: FdfdProblem, cells: int, h: float) -> float:
    if problem.pml_strength is not None:
        return problem.pml_strength
    # round-trip reflection ~1e-8 for a quadratic profile: exp(-2 k α L / 3)
    L = max(cells, 1) * h
    return -3.0 * math.log(1e-8) / (2.0 * problem.k0 * L)


def solve_dipole(problem: FdfdProblem) -> FieldSolution:
    """Direct sparse solve for ``H_y`` driven by the dipole current."""
    problem.validate()
    p = problem
    nz, nx = p.nz, p.nx
    z = p.z0 + p.dz * np.arange(nz)
    x = p.x0 + p.dx * np.arange(nx)
    iex = 1.0 / 1.0 * _averaged_inverse_eps(p, z + 0.5 * p.dz, x)
    iez = _averaged_inverse_eps(p, z, x + 0.5 * p.dx)

    az = _pml_strength(p, max(p.pml[0], p.pml[1]), p.dz)
    ax = _pml_strength(p, max(p.pml[2], p.pml[3]), p.dx)
    sz_node = _stretch(p.pml[:2], nz, az, True, True, 0.0)
    sz_half = _stretch(p.pml[:2], nz, az, True, True, 0.5)
    sx_node = _stretch(p.pml[2:], nx, ax, True, True, 0.0)
    sx_half = _stretch(p.pml[2:], nx, ax, True, True, 0.5)

    fz, bz = _derivatives(nz, p.dz)
    fx, bx = _derivatives(nx, p.dx)
    Iz, Ix = sp.identity(nz, format="csr"), sp.identity(nx, format="csr")
    Dz_f = sp.kron(sp.diags(1 / sz_half) @ fz, Ix, format="csr")
    Dz_b = sp.kron(sp.diags(1 / sz_node) @ bz, Ix, format="csr")
    Dx_f = sp.kron(Iz, sp.diags(1 / sx_half) @ fx, format="csr")
    Dx_b = sp.kron(Iz, sp.diags(1 / sx_node) @ bx, format="csr")
    Ex_inv = sp.diags(iex.ravel())
    Ez_inv = sp.diags(iez.ravel())
    A = Dz_b @ Ex_inv @ Dz_f + Dx_b @ Ez_inv @ Dx_f + p.k0**2 * sp.identity(nz * nx)

    Jx = np.zeros((nz, nx), dtype=complex)
    Jz = np.zeros((nz, nx), dtype=complex)
    ex, ez = p.orientation
    norm = math.hypot(ex, ez)
    idx = p.source_indices()
    cell = p.dx * p.dz
    Jx[idx["ex"]] = p.amplitude * ex / norm / cell
    Jz[idx["ez"]] = p.amplitude * ez / norm / cell
    b = -Dz_b @ (Ex_inv @ Jx.ravel()) + Dx_b @ (Ez_inv @ Jz.ravel())

    A = A.tocsc()
    try:
        H = spla.spsolve(A, b)
    except RuntimeError as exc:  # pragma: no cover - factorization failure
        raise SingularSystemError(str(exc)) from exc
    if not np.all(np.isfinite(H)):
        raise SingularSystemError("non-finite solution")
    resid = float(np.linalg.norm(A @ H - b) / max(np.linalg.norm(b), 1e-300))
    if resid > RESIDUAL_TOL:
        raise NonConvergedError(f"residual {resid:.2e} above {RESIDUAL_TOL:g}")

    # E from the discrete curl; units absorb 1/(iωε0) so E_x = (Dz H + Jx)/(i k0 ε)
    Ex = (iex.ravel() * (Dz_f @ H + Jx.ravel())) / (1j * p.k0)
    Ez = (iez.ravel() * (Jz.ravel() - Dx_f @ H)) / (1j * p.k0)
    return FieldSolution(
        problem=p, H=H.reshape(nz, nx), Ex=Ex.reshape(nz, nx), Ez=Ez.reshape(nz, nx),
        Jx=Jx, Jz=Jz, residual=resid,
    )


def _air(x, z):
    return np.ones(np.broadcast(x, z).shape)


def normalized_decay_rate(problem: FdfdProblem, vacuum: FieldSolution | None = None) -> LdosResult:
    """Γ_tot/Γ0 as radiated power in the structure over that in vacuum on the same grid."""
    sol = solve_dipole(problem)
    if vacuum is None:
        vacuum = solve_dipole(problem.with_eps(_air, label="vacuum"))
    p_vac = vacuum.source_power()
    p = sol.source_power()
    if p_vac <= 0:
        raise NonConvergedError("non-positive vacuum power")
    try:
        flux = sol.box_flux() / vacuum.box_flux()
    except IndexError:
        flux = None
    return LdosResult(
        rate=p / p_vac, vacuum_power=p_vac, power=p, residual=max(sol.residual, vacuum.residual), flux_rate=flux
    )


def vacuum_problem(wavelength: float, size: float, cell: float, pml_wavelengths: float = 1.0, **kw) -> FdfdProblem:
    """Square vacuum domain of side ``size`` (excluding absorbers), dipole at the centre."""
    n_pml = int(math.ceil(pml_wavelengths * wavelength / cell))
    n_in = int(math.ceil(size / cell))
    n = n_in + 2 * n_pml + 1
    origin = -cell * (n // 2)
    return FdfdProblem(
        eps_func=_air, wavelength=wavelength, z0=origin, x0=origin, dz=cell, dx=cell, nz=n, nx=n,
        source=(0.0, 0.5 * cell), pml=(n_pml,) * 4, **kw,
    )


def mirror_rate_closed_form(distance, wavelength: float, orientation: str = "parallel"):
    """Γ/Γ0 of a 2D in-plane line dipole a distance ``distance`` from a perfect conductor.

    ``parallel``: dipole along the mirror surface (image dipole reversed).
    ``normal``: dipole along the surface normal (image dipole in phase).
    """
    from scipy.special import j0, j1

    u = 2 * (2 * np.pi / wavelength) * np.asarray(distance, dtype=float)
    if orientation == "parallel":
        return 1 - 2 * j0(u) + 2 * j1(u) / u
    return 1 + 2 * j1(u) / u


# ---------------------------------------------------------------------------
# Finite comb
# ---------------------------------------------------------------------------


def _finite_comb_eps(params: GeometryParams, n_periods: int, z_start: float):
    eps_m = params.eps_material
    z_end = z_start + n_periods * params.a

    def eps(x, z):
        x, z = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(z, dtype=float))
        inside = params.inside(x, z) & (z >= z_start) & (z < z_end)
        return np.where(inside, eps_m, 1.0)

    return eps


def comb_problem(
    params: GeometryParams,
    n_periods: int,
    wavelength: float,
    distance: float,
    z_in_cell: float = 0.0,
    orientation=(1.0, 0.0),
    cell: float | None = None,
    pml_wavelengths: float = 1.0,
    air_margin: float | None = None,
    termination_shift: float = 0.0,
) -> FdfdProblem:
    """Dipole facing the flat sidewall of an ``n_periods`` comb segment.

    The atom sits a perpendicular ``distance`` from the sidewall at
    ``z_in_cell`` within the central period (0 is between two teeth).  The
    segment ends are moved by ``termination_shift`` (length) to probe
    termination artifacts.  ``cell`` defaults to the largest spacing that
    keeps 20 cells per wavelength inside the dielectric.
    """
    if n_periods < 1:
        raise InvalidProblemError("need at least one period")
    if cell is None:
        cell = wavelength / (params.n * 20.0) * 0.999
    margin = air_margin if air_margin is not None else 0.75 * wavelength
    a = params.a
    # atom at the origin of z-half / x-node lattice
    x_atom = params.sidewall_x - distance
    z_centre_cell = (n_periods // 2) * a
    z_atom = z_centre_cell + z_in_cell
    z_start = termination_shift
    zlo = min(z_start, 0.0) - margin
    zhi = max(z_start + n_periods * a, n_periods * a) + margin
    xlo = min(x_atom, -0.5 * params.H) - margin
    xhi = 0.5 * params.H + margin
    n_pml = int(math.ceil(pml_wavelengths * wavelength / cell))
    iz_lo = int(math.floor((zlo - z_atom) / cell)) - n_pml
    iz_hi = int(math.ceil((zhi - z_atom) / cell)) + n_pml
    ix_lo = int(math.floor((xlo - x_atom) / cell)) - n_pml
    ix_hi = int(math.ceil((xhi - x_atom) / cell)) + n_pml
    z0 = z_atom - 0.5 * cell + iz_lo * cell
    x0 = x_atom + ix_lo * cell
    return FdfdProblem(
        eps_func=_finite_comb_eps(params, n_periods, z_start),
        wavelength=wavelength,
        z0=z0,
        x0=x0,
        dz=cell,
        dx=cell,
        nz=iz_hi - iz_lo + 1,
        nx=ix_hi - ix_lo + 1,
        source=(x_atom, z_atom),
        orientation=tuple(orientation),
        pml=(n_pml,) * 4,
        n_max=params.n,
        label=f"comb N={n_periods}",
    )


@dataclasses.dataclass(frozen=True)
class ScanRow:
    n_periods: int
    wavelength: float
    shift: float
    rate: float
    residual: float


@dataclasses.dataclass(frozen=True)
class ConvergenceTable:
    rows: tuple
    median: float
    spread: float  # (max - min) / median

    def by_periods(self) -> dict:
        out = {}
        for r in self.rows:
            out.setdefault(r.n_periods, []).append(r.rate)
        return {n: (float(np.median(v)), float((max(v) - min(v)) / np.median(v))) for n, v in out.items()}


def convergence_scan(
    build: Callable[..., FdfdProblem],
    n_periods: Sequence[int],
    wavelengths: Sequence[float],
    shifts: Sequence[float] = (0.0,),
) -> ConvergenceTable:
    """Γ_tot/Γ0 over segment lengths, frequencies and terminations.

    ``build(n_periods=..., wavelength=..., termination_shift=...)`` must
    return a problem.  The median over all rows is the reported estimator;
    ``spread`` quantifies the Fabry-Perot artifacts of the finite segment.
    """
    if min(n_periods) < 4:
        raise InvalidProblemError("convergence scans need at least 4 periods")
    rows = []
    for n in n_periods:
        for lam in wavelengths:
            for s in shifts:
                prob = build(n_periods=n, wavelength=lam, termination_shift=s)
                res = normalized_decay_rate(prob)
                rows.append(ScanRow(int(n), float(lam), float(s), res.rate, res.residual))
    rates = np.array([r.rate for r in rows])
    med = float(np.median(rates))
    return ConvergenceTable(tuple(rows), med, float((rates.max() - rates.min()) / med))
