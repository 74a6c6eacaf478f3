"""TM Bloch modes of a periodic waveguide by plane-wave expansion.

The magnetic field ``H_y`` is expanded as

    H_y(x, z) = sum_{mz, mx} h[mz, mx] exp(i 2π ((k~ + mz) z / a + mx x / S))

with ``k~ = k a / 2π``.  In reduced units the master equation becomes the
Hermitian eigenproblem ``Θ h = ω~² h`` (``ω~ = ω a / 2π c``) with

    Θ = (k~ + mz)(k~ + mz') η_xx + (mx a/S)(mx' a/S) η_zz,

where ``η_xx`` and ``η_zz`` are the inverse-permittivity operators from
:class:`combwg.geometry.EpsFourier`.  Everything downstream (group velocity,
fields, parity) works from the coefficient vector.

Lengths follow the geometry (nanometres by convention); physical
frequencies are derived from that assumption.
"""

from __future__ import annotations

import dataclasses
import functools
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import scipy.linalg as sla
import scipy.optimize as sopt
import scipy.sparse.linalg as spla

from . import constants as const
from .geometry import Corrugation, EpsFourier, GeometryParams

__all__ = [
    "BlochMode",
    "Band",
    "ModeField",
    "BlochSolver",
    "solve_at_k",
    "band_diagram",
    "mode_field",
    "classify_parity",
    "crossing_gap",
    "reduced_k",
    "energy_per_cell",
    "field_coefficients",
    "mode_at_frequency",
    "SolverSettings",
    "edge_band",
    "fourier_for",
]

DENSE_LIMIT = 4000
RESIDUAL_TOL = 1e-8
OVERLAP_THRESHOLD = 0.8


class EigensolverError(RuntimeError):
    pass


class NonConvergedError(EigensolverError):
    pass


class AmbiguousParityError(ValueError):
    pass


def reduced_k(k: float, a: float) -> float:
    """Wavevector (rad/length) in units of 2π/a."""
    return k * a / (2 * np.pi)


def omega_from_reduced(omega_reduced, a_nm: float):
    """Angular frequency (rad/s) for a reduced frequency, period in nm."""
    return np.asarray(omega_reduced) * 2 * np.pi * const.C / (a_nm * const.NM)


@dataclasses.dataclass(frozen=True, eq=False)
class BlochMode:
    """One eigenmode at a single Bloch wavevector.

    ``coefficients`` are normalized so that ``sum |h|² = 1``, which makes the
    cell-averaged energy density ``(ε|E|² + |H|²)/2`` equal to one in solver
    units (H in its own unit, E in units of the vacuum impedance times H).
    """

    k: float
    omega: float
    k_reduced: float
    omega_reduced: float
    coefficients: np.ndarray = dataclasses.field(repr=False)
    band_index: int
    below_light_line: bool
    group_velocity_reduced: float
    fourier: EpsFourier = dataclasses.field(repr=False)

    @property
    def group_index(self) -> float:
        v = self.group_velocity_reduced
        return np.inf if v == 0 else 1.0 / abs(v)

    @property
    def wavelength(self) -> float:
        """Vacuum wavelength in the geometry's length unit."""
        return self.fourier.a / self.omega_reduced


@dataclasses.dataclass(frozen=True, eq=False)
class Band:
    """A tracked ω(k) curve (reduced units) with its modes."""

    k_reduced: np.ndarray
    omega_reduced: np.ndarray
    modes: tuple
    index: int
    a: float
    parity: str = "none"
    ambiguous: tuple = ()
    min_overlap: float = 1.0

    @property
    def light_line(self) -> np.ndarray:
        return np.abs(self.k_reduced)

    @property
    def below_light_line(self) -> np.ndarray:
        return self.omega_reduced < self.light_line

    @property
    def group_velocity_reduced(self) -> np.ndarray:
        return np.array([m.group_velocity_reduced for m in self.modes])

    @property
    def k(self) -> np.ndarray:
        return 2 * np.pi * self.k_reduced / self.a


class BlochSolver:
    """Reusable eigensolver for one :class:`EpsFourier`."""

    def __init__(self, fourier: EpsFourier, dense_limit: int = DENSE_LIMIT, residual_tol: float = RESIDUAL_TOL):
        self.fourier = fourier
        self.dense_limit = dense_limit
        self.residual_tol = residual_tol
        Mz, Mx = fourier.cutoffs
        mz, mx = np.meshgrid(np.arange(-Mz, Mz + 1), np.arange(-Mx, Mx + 1), indexing="ij")
        self.mz = mz.ravel().astype(float)
        self.mx = mx.ravel().astype(float)
        self.gx = self.mx * fourier.a / fourier.S

    @functools.cached_property
    def _eta(self):
        return self.fourier.eta

    @functools.cached_property
    def _transverse(self):
        exx, ezz = self._eta
        return np.outer(self.gx, self.gx) * ezz

    def operator(self, k_red: float) -> np.ndarray:
        exx = self._eta[0]
        qz = k_red + self.mz
        return np.outer(qz, qz) * exx + self._transverse

    def _parity_basis(self, parity: str) -> np.ndarray:
        """Orthonormal columns spanning mx-even or mx-odd coefficient vectors."""
        Mz, Mx = self.fourier.cutoffs
        nx = 2 * Mx + 1
        cols = []
        s = 1.0 if parity == "symmetric" else -1.0
        for iz in range(2 * Mz + 1):
            base = iz * nx
            if parity == "symmetric":
                v = np.zeros(self.mz.size)
                v[base + Mx] = 1.0
                cols.append(v)
            for m in range(1, Mx + 1):
                v = np.zeros(self.mz.size)
                v[base + Mx + m] = 1 / np.sqrt(2)
                v[base + Mx - m] = s / np.sqrt(2)
                cols.append(v)
        return np.array(cols).T

    def _check_parity(self, parity: str) -> None:
        if parity not in ("symmetric", "antisymmetric"):
            raise ValueError(f"parity must be 'symmetric' or 'antisymmetric', got {parity!r}")
        p = self.fourier.params
        if p is not None and p.kind != Corrugation.RECTANGULAR_SYMMETRIC and p.h_etched > 0:
            raise ValueError("parity sectors need a comb that is mirror symmetric about its mid-line")

    @functools.lru_cache(maxsize=2)
    def _basis(self, parity):
        return self._parity_basis(parity)

    def eigen(self, k_red: float, n_bands: int, parity: str | None = None):
        """Lowest ``n_bands`` eigenpairs ``(ω~², h)`` of Θ at ``k_red``."""
        if n_bands < 1:
            raise ValueError("n_bands must be >= 1")
        theta = self.operator(k_red)
        basis = None
        if parity is not None:
            self._check_parity(parity)
            basis = self._basis(parity)
            theta = basis.T @ theta @ basis
        n = theta.shape[0]
        n_bands = min(n_bands, n)
        try:
            if n <= self.dense_limit:
                vals, vecs = sla.eigh(theta, subset_by_index=[0, n_bands - 1], driver="evr")
            else:
                vals, vecs = spla.eigsh(theta, k=n_bands, sigma=-1e-6, which="LM")
                order = np.argsort(vals)
                vals, vecs = vals[order], vecs[:, order]
        except (np.linalg.LinAlgError, spla.ArpackError) as exc:
            raise EigensolverError(str(exc)) from exc
        res = np.linalg.norm(theta @ vecs - vecs * vals, axis=0) / max(np.linalg.norm(theta), 1e-300)
        if np.any(res > self.residual_tol):
            raise NonConvergedError(f"eigen residual {res.max():.3e} above {self.residual_tol:g}")
        if basis is not None:
            vecs = basis @ vecs
        return np.clip(vals, 0.0, None), vecs

    def group_velocity(self, k_red: float, omega_red: float, h: np.ndarray) -> float:
        """dω~/dk~ from the Hellmann-Feynman derivative of Θ."""
        if omega_red <= 0:
            return 0.0
        exx = self._eta[0]
        qz = k_red + self.mz
        dtheta = (qz[:, None] + qz[None, :]) * exx
        return float(np.real(h.conj() @ dtheta @ h) / (2 * omega_red))

    def modes(self, k_red: float, n_bands: int, parity: str | None = None) -> list[BlochMode]:
        vals, vecs = self.eigen(k_red, n_bands, parity)
        a = self.fourier.a
        out = []
        for i, lam in enumerate(vals):
            h = vecs[:, i] / np.linalg.norm(vecs[:, i])
            w = float(np.sqrt(lam))
            out.append(
                BlochMode(
                    k=2 * np.pi * k_red / a,
                    omega=float(omega_from_reduced(w, a)),
                    k_reduced=float(k_red),
                    omega_reduced=w,
                    coefficients=h,
                    band_index=i,
                    below_light_line=bool(w < abs(k_red)),
                    group_velocity_reduced=self.group_velocity(k_red, w, h),
                    fourier=self.fourier,
                )
            )
        return out

    def frequencies(self, k_red: float, n_bands: int, parity: str | None = None) -> np.ndarray:
        return np.sqrt(self.eigen(k_red, n_bands, parity)[0])


@functools.lru_cache(maxsize=8)
def _solver_for(fourier: EpsFourier) -> BlochSolver:
    return BlochSolver(fourier)


def solve_at_k(eps: EpsFourier, k: float, n_bands: int, parity: str | None = None) -> list[BlochMode]:
    """Lowest ``n_bands`` TM modes at Bloch wavevector ``k`` (rad/length), ascending."""
    return _solver_for(eps).modes(reduced_k(k, eps.a), n_bands, parity)


def _coefficient_parity(h: np.ndarray, cutoffs) -> float:
    """<h | mirror h> for the x -> -x reflection (real for symmetric cells)."""
    Mz, Mx = cutoffs
    H = h.reshape(2 * Mz + 1, 2 * Mx + 1)
    return float(np.real(np.vdot(H, H[:, ::-1])) / np.vdot(H, H).real)


def band_diagram(
    eps: EpsFourier,
    k_grid,
    n_bands: int,
    guard_bands: int = 4,
    overlap_threshold: float = OVERLAP_THRESHOLD,
    workers: int = 1,
    reduced: bool = False,
) -> list[Band]:
    """Solve every k point and connect modes into bands by maximal overlap.

    ``k_grid`` is in rad/length unless ``reduced`` (then in units of 2π/a).
    Extra ``guard_bands`` are solved so that bands entering from above can
    be followed.  Low-overlap links are recorded in ``Band.ambiguous``.
    """
    a = eps.a
    kr = np.asarray(k_grid, dtype=float)
    if not reduced:
        kr = kr * a / (2 * np.pi)
    if kr.size < 16:
        raise ValueError("band diagram needs at least 16 k points")
    if np.any(np.diff(kr) <= 0) or kr[0] < -1e-12 or kr[-1] > 0.5 + 1e-12:
        raise ValueError("k grid must be strictly increasing inside [0, π/a]")
    solver = _solver_for(eps)
    n_solve = n_bands + guard_bands
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            per_k = list(pool.map(lambda q: solver.modes(q, n_solve), kr))
    else:
        per_k = [solver.modes(q, n_solve) for q in kr]

    # follow each starting band by assignment on |overlap|, ties -> smallest |Δω|
    order = [list(range(n_solve))]
    overlaps = [np.ones(n_solve)]
    for i in range(1, kr.size):
        prev = per_k[i - 1]
        cur = per_k[i]
        A = np.array([m.coefficients for m in prev])
        B = np.array([m.coefficients for m in cur])
        ov = np.abs(A.conj() @ B.T)
        dw = np.abs(np.subtract.outer([m.omega_reduced for m in prev], [m.omega_reduced for m in cur]))
        cost = -np.round(ov, 6) + 1e-9 * dw / max(dw.max(), 1e-300)
        rows, cols = sopt.linear_sum_assignment(cost)
        link = dict(zip(rows, cols))
        order.append([link[j] for j in order[-1]])
        overlaps.append(np.array([ov[j, link[j]] for j in order[-2]]))

    symmetric = eps.params is not None and eps.params.symmetric
    bands = []
    for b in range(n_bands):
        idx = [order[i][b] for i in range(kr.size)]
        modes = tuple(per_k[i][j] for i, j in enumerate(idx))
        ovs = np.array([overlaps[i][b] for i in range(kr.size)])
        amb = tuple(int(i) for i in np.nonzero(ovs < overlap_threshold)[0])
        parity = "none"
        if symmetric:
            vals = [_coefficient_parity(m.coefficients, eps.cutoffs) for m in modes]
            if all(v > 0.9 for v in vals):
                parity = "symmetric"
            elif all(v < -0.9 for v in vals):
                parity = "antisymmetric"
        bands.append(
            Band(
                k_reduced=kr.copy(),
                omega_reduced=np.array([m.omega_reduced for m in modes]),
                modes=modes,
                index=b,
                a=a,
                parity=parity,
                ambiguous=amb,
                min_overlap=float(ovs.min()),
            )
        )
    return bands


# ---------------------------------------------------------------------------
# Fields
# ---------------------------------------------------------------------------


@dataclasses.dataclass(frozen=True, eq=False)
class ModeField:
    """Complex TM fields of one mode on a ``(z, x)`` grid.

    ``Hy`` is in A/m and ``Ex``, ``Ez`` in V/m for the current ``amplitude``
    (coefficient multiplier).  ``energy_per_cell`` is the time-averaged
    electromagnetic energy of one period (J) assuming the 2D field is
    uniform over ``thickness`` (nm).  ``power`` is ``v_g`` times the energy
    per unit length.
    """

    z: np.ndarray
    x: np.ndarray
    Ex: np.ndarray
    Ez: np.ndarray
    Hy: np.ndarray
    eps: np.ndarray
    mode: BlochMode
    amplitude: complex
    energy_per_cell: float
    thickness: float
    bloch_residual: float

    @property
    def group_index(self) -> float:
        return self.mode.group_index

    @property
    def power(self) -> float:
        """Guided power (W) carried by the mode at this amplitude."""
        v = abs(self.mode.group_velocity_reduced) * const.C
        return v * self.energy_per_cell / (self.mode.fourier.a * const.NM)

    @property
    def params(self) -> GeometryParams:
        return self.mode.fourier.params

    def scaled(self, factor: complex) -> "ModeField":
        f = complex(factor)
        return dataclasses.replace(
            self,
            Ex=self.Ex * f,
            Ez=self.Ez * f,
            Hy=self.Hy * f,
            amplitude=self.amplitude * f,
            energy_per_cell=self.energy_per_cell * abs(f) ** 2,
        )

    def at(self, x, z) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(Ex, Ez, Hy) at arbitrary points, evaluated from the plane-wave sum."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        z = np.atleast_1d(np.asarray(z, dtype=float))
        x, z = np.broadcast_arrays(x, z)
        hy, ex, ez = _fields_at_points(self.mode, x.ravel(), z.ravel())
        f = self.amplitude
        shape = x.shape
        return (ex * f).reshape(shape), (ez * f).reshape(shape), (hy * f).reshape(shape)

    def intensity_at(self, x, z) -> np.ndarray:
        ex, ez, _ = self.at(x, z)
        return np.abs(ex) ** 2 + np.abs(ez) ** 2

    def intensity(self) -> np.ndarray:
        return np.abs(self.Ex) ** 2 + np.abs(self.Ez) ** 2


def _sums(mode: BlochMode, x, z, coeff_sets):
    """Plane-wave sums on a tensor grid, one per coefficient vector."""
    f = mode.fourier
    Mz, Mx = f.cutoffs
    kz = mode.k_reduced + np.arange(-Mz, Mz + 1)
    ez = np.exp(2j * np.pi * np.outer(z, kz) / f.a)
    ex = np.exp(2j * np.pi * np.outer(np.arange(-Mx, Mx + 1), x) / f.S)
    return [ez @ c.reshape(2 * Mz + 1, 2 * Mx + 1) @ ex for c in coeff_sets]


def field_coefficients(mode: BlochMode):
    """Plane-wave coefficients of (H_y, E_x / Z0, E_z / Z0).

    E follows from D = i curl H / ω through the same factorized inverse
    permittivity operators as the eigenproblem, so the electric energy and
    the Poynting flux stay consistent with the eigenvalue.
    """
    solver = _solver_for(mode.fourier)
    exx, ezz = solver._eta
    h = mode.coefficients
    w = mode.omega_reduced
    dx_ = (mode.k_reduced + solver.mz) * h / w
    dz_ = -solver.gx * h / w
    return h, exx @ dx_, ezz @ dz_


def _fields_at_points(mode: BlochMode, x, z):
    f = mode.fourier
    Mz, Mx = f.cutoffs
    mz, mx = np.meshgrid(np.arange(-Mz, Mz + 1), np.arange(-Mx, Mx + 1), indexing="ij")
    phase = np.exp(2j * np.pi * (np.outer(z, mode.k_reduced + mz.ravel()) / f.a + np.outer(x, mx.ravel()) / f.S))
    h, cx, cz = field_coefficients(mode)
    return phase @ h, const.Z0 * (phase @ cx), const.Z0 * (phase @ cz)


def _local_eps(fourier: EpsFourier, x, z):
    if fourier.params is None:
        raise ValueError("field evaluation needs the geometry behind the Fourier data")
    return fourier.params.eps_at(x, z)


def mode_field(mode: BlochMode, grid=64, thickness: float = const.MEMBRANE_THICKNESS_NM) -> ModeField:
    """Reconstruct ``H_y`` and ``E`` on a grid.

    ``grid`` is either the number of cells per period (square cells spanning
    the whole supercell) or an explicit ``(z, x)`` pair of coordinate arrays.
    The amplitude is the solver normalization; use
    :func:`combwg.trap.power_normalize` for a physical power.
    """
    f = mode.fourier
    if isinstance(grid, (int, np.integer)):
        nz = int(grid)
        dz = f.a / nz
        nx = int(round(f.S / dz))
        z = (np.arange(nz) + 0.5) * dz
        x = -0.5 * f.S + (np.arange(nx) + 0.5) * (f.S / nx)
    else:
        z, x = (np.asarray(g, dtype=float) for g in grid)
    coeffs = field_coefficients(mode)
    hy, ex, ez = _sums(mode, x, z, coeffs)
    ex, ez = const.Z0 * ex, const.Z0 * ez
    eps = _local_eps(f, x[None, :], z[:, None])

    # Bloch check: H_y one period further along must pick up exp(i k a)
    probe = x[:: max(1, x.size // 16)]
    h0 = _sums(mode, probe, np.array([z[0]]), coeffs[:1])[0]
    h1 = _sums(mode, probe, np.array([z[0] + f.a]), coeffs[:1])[0]
    resid = float(
        np.abs(h1 - h0 * np.exp(2j * np.pi * mode.k_reduced)).max() / max(np.abs(h0).max(), 1e-300)
    )
    return ModeField(
        z=z, x=x, Ex=ex, Ez=ez, Hy=hy, eps=eps, mode=mode, amplitude=1.0 + 0j,
        energy_per_cell=energy_per_cell(mode, thickness), thickness=thickness, bloch_residual=resid,
    )


def energy_per_cell(mode: BlochMode, thickness: float = const.MEMBRANE_THICKNESS_NM) -> float:
    """Time-averaged energy of one period (J) at solver amplitude.

    The magnetic part follows from Parseval; the electric part equals it
    because the coefficients solve the eigenproblem.
    """
    f = mode.fourier
    area = f.a * f.S * const.NM**2
    return 0.5 * const.MU0 * area * thickness * const.NM * float(np.vdot(mode.coefficients, mode.coefficients).real)


def classify_parity(field: ModeField, geometry: GeometryParams, threshold: float = 0.9) -> str:
    """``symmetric`` / ``antisymmetric`` for mirror-symmetric combs, else ``none``.

    Uses the normalized overlap of ``H_y(x)`` with ``H_y(-x)``; the grid must
    be symmetric about ``x = 0``.
    """
    if geometry.kind is not Corrugation.RECTANGULAR_SYMMETRIC:
        return "none"
    if not np.allclose(field.x, -field.x[::-1], atol=1e-9 * geometry.S):
        raise ValueError("parity needs an x grid symmetric about the mid-line")
    H = field.Hy
    ov = np.real(np.vdot(H, H[:, ::-1])) / np.vdot(H, H).real
    if ov > threshold:
        return "symmetric"
    if ov < -threshold:
        return "antisymmetric"
    raise AmbiguousParityError(f"parity overlap {ov:.3f} is below {threshold}")


def crossing_gap(
    eps: EpsFourier,
    band_pair: tuple[int, int],
    k_bracket: tuple[float, float],
    parities: tuple[str | None, str | None] = (None, None),
    n_bands: int | None = None,
    xtol: float = 1e-10,
) -> tuple[float, float]:
    """Smallest separation of two bands inside ``k_bracket`` (reduced k).

    With ``parities`` given, each band index is counted inside its own
    parity sector, which lets a true crossing be located by bisection on the
    frequency difference.  Returns ``(k_reduced, |Δω~|)``.
    """
    solver = _solver_for(eps)
    n = (max(band_pair) + 1) if n_bands is None else n_bands
    i, j = band_pair
    pi, pj = parities

    def diff(kr):
        wi = solver.frequencies(kr, n, pi)[i]
        wj = solver.frequencies(kr, n, pj)[j]
        return wj - wi

    lo, hi = k_bracket
    if pi is not None and pj is not None and pi != pj and np.sign(diff(lo)) != np.sign(diff(hi)):
        kc = sopt.brentq(diff, lo, hi, xtol=xtol, rtol=4 * np.finfo(float).eps)
        return float(kc), float(abs(diff(kc)))
    res = sopt.minimize_scalar(lambda q: abs(diff(q)), bounds=(lo, hi), method="bounded", options={"xatol": 1e-7})
    return float(res.x), float(res.fun)


def mode_at_frequency(
    eps: EpsFourier,
    band_index: int,
    omega_reduced: float,
    k_bracket: tuple[float, float] = (0.0, 0.5),
    n_bands: int | None = None,
) -> BlochMode:
    """Mode of the ``band_index``-th lowest band whose frequency is ``omega_reduced``.

    The band must be monotone over ``k_bracket`` (reduced k) and contain the
    frequency; the wavevector is found by root bracketing.
    """
    solver = _solver_for(eps)
    n = band_index + 1 if n_bands is None else n_bands
    f = lambda q: solver.frequencies(q, n)[band_index] - omega_reduced
    lo, hi = k_bracket
    f_lo, f_hi = f(lo), f(hi)
    if np.sign(f_lo) == np.sign(f_hi):
        raise ValueError(
            f"ω~ = {omega_reduced:.6g} is outside band {band_index} over k~ in [{lo}, {hi}]"
        )
    kq = sopt.brentq(f, lo, hi, xtol=1e-13)
    return solver.modes(kq, n)[band_index]


@dataclasses.dataclass(frozen=True)
class SolverSettings:
    """Plane-wave cutoffs and edge sampling shared by the pipelines.

    The default cutoffs pair with the default supercell (``S = 3 H``); scale
    ``Mx`` with ``S`` to keep the transverse resolution.
    """

    cutoffs: tuple[int, int] = (9, 40)
    sinusoid_slices: int = 128
    rule: str = "li"
    edge_span: tuple[float, float] = (0.004, 0.2)  # Δk~ sampled towards the edge
    edge_points: int = 24
    overlap_threshold: float = OVERLAP_THRESHOLD

    def scaled(self, factor: float) -> "SolverSettings":
        mz, mx = self.cutoffs
        return dataclasses.replace(self, cutoffs=(max(2, int(round(mz * factor))), max(4, int(round(mx * factor)))))

    def edge_grid(self) -> np.ndarray:
        """Reduced k samples clustered geometrically towards k = π/a."""
        dk = np.geomspace(self.edge_span[0], self.edge_span[1], self.edge_points)
        return np.concatenate([0.5 - dk[::-1], [0.5]])


def fourier_for(params: GeometryParams, settings: SolverSettings) -> EpsFourier:
    from .geometry import analytic_fourier

    return analytic_fourier(params, settings.cutoffs, rule=settings.rule, sinusoid_slices=settings.sinusoid_slices)


def edge_band(eps: EpsFourier, band_index: int, settings: SolverSettings | None = None, guard_bands: int = 3) -> Band:
    """Band that is the ``band_index``-th lowest at k = π/a, sampled densely towards it."""
    settings = settings or SolverSettings()
    bands = band_diagram(
        eps, settings.edge_grid(), band_index + 1 + guard_bands, guard_bands=1,
        overlap_threshold=settings.overlap_threshold, reduced=True,
    )
    for b in bands:
        if b.modes[-1].band_index == band_index:
            return b
    raise EigensolverError(f"no tracked band ends at index {band_index}")
