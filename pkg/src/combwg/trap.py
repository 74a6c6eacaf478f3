"""Two-color dipole trap next to the flat sidewall of a comb waveguide.

Guided-mode fields are scaled to a physical power, turned into scalar light
shifts ``U = -Re(α) |E|² / 4`` (``E`` the complex amplitude), combined with
the planar Casimir-Polder attraction ``-C3/d³`` and searched for minima.
Potentials are expressed as temperatures in millikelvin; positions in nm.
"""

from __future__ import annotations

import csv
import dataclasses
import json
from importlib import resources
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy import interpolate

from . import constants as const
from .bloch import ModeField
from .geometry import GeometryParams

__all__ = [
    "AtomSpec",
    "TrapConfig",
    "PotentialMap",
    "TrapMinimum",
    "TrapReport",
    "stark_potential",
    "power_normalize",
    "casimir_polder",
    "compose_trap",
    "find_minima",
    "trap_grid",
]


class TrapError(ValueError):
    pass


class PolarizabilityTableGapError(TrapError):
    pass


class ZeroGroupVelocityError(TrapError):
    pass


class NonPositiveDistanceError(TrapError):
    pass


class GridMismatchError(TrapError):
    pass


class NoMinimumFoundError(TrapError):
    pass


def _load_table(path=None) -> np.ndarray:
    if path is None:
        text = resources.files("combwg").joinpath("data/rb_ground_polarizability.csv").read_text(encoding="utf-8")
    else:
        text = Path(path).read_text(encoding="utf-8")
    rows = [ln for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
    data = [tuple(map(float, r.split(","))) for r in rows if not r[0].isalpha()]
    return np.array(data)


@dataclasses.dataclass(frozen=True, eq=False)
class AtomSpec:
    """Transition wavelength, ground-state polarizability table and C3.

    The table is split into blocks wherever the wavelength step jumps; the
    polarizability is interpolated (cubic) only inside a block.
    """

    transition_wavelength: float
    table: np.ndarray  # columns: wavelength nm, α (C m² / V)
    c3: float = const.RB_C3_MK_NM3  # mK nm³
    mass: float = const.RB87_MASS

    def __post_init__(self):
        if not self.c3 > 0:
            raise TrapError("C3 must be positive")
        t = np.asarray(self.table, dtype=float)
        t = t[np.argsort(t[:, 0])]
        object.__setattr__(self, "table", t)
        steps = np.diff(t[:, 0])
        breaks = np.nonzero(steps > 2.5 * np.median(steps))[0]
        blocks = np.split(np.arange(t.shape[0]), breaks + 1)
        splines = []
        for b in blocks:
            lam, alpha = t[b, 0], t[b, 1]
            fn = interpolate.CubicSpline(lam, alpha) if b.size >= 4 else interpolate.interp1d(lam, alpha)
            splines.append((lam[0], lam[-1], fn))
        object.__setattr__(self, "_blocks", splines)

    @classmethod
    def rubidium(cls, table_path=None) -> "AtomSpec":
        return cls(const.RB_D2_WAVELENGTH_NM, _load_table(table_path))

    def polarizability(self, wavelength: float) -> float:
        for lo, hi, fn in self._blocks:
            if lo <= wavelength <= hi:
                return float(fn(wavelength))
        raise PolarizabilityTableGapError(f"no polarizability data at {wavelength} nm")


@dataclasses.dataclass(frozen=True)
class TrapConfig:
    red_wavelength: float
    blue_wavelength: float
    red_power: float  # mW
    blue_power: float  # mW
    red_band: int = 0
    blue_band: int = 0

    def validate(self, atom: AtomSpec) -> None:
        if not self.blue_wavelength < atom.transition_wavelength < self.red_wavelength:
            raise TrapError("need blue wavelength < transition < red wavelength")
        if self.red_power < 0 or self.blue_power < 0:
            raise TrapError("powers must be non-negative")
        if atom.polarizability(self.red_wavelength) <= 0:
            raise TrapError("red-detuned polarizability must be positive")
        if atom.polarizability(self.blue_wavelength) >= 0:
            raise TrapError("blue-detuned polarizability must be negative")


@dataclasses.dataclass(frozen=True, eq=False)
class PotentialMap:
    """U(x, z) in mK on a ``(z, x)`` grid.  ``air`` marks points outside the dielectric."""

    z: np.ndarray
    x: np.ndarray
    U: np.ndarray
    component: str
    air: np.ndarray
    params: GeometryParams

    def same_grid(self, other: "PotentialMap") -> bool:
        return (
            self.U.shape == other.U.shape
            and np.array_equal(self.z, other.z)
            and np.array_equal(self.x, other.x)
        )

    @property
    def distance(self) -> np.ndarray:
        """Perpendicular distance of each column from the flat sidewall (nm)."""
        return self.params.sidewall_x - self.x

    def to_csv(self, path) -> None:
        with Path(path).open("w", newline="", encoding="utf-8") as fh:
            fh.write(f"# potential component {self.component} (mK)\n")
            w = csv.writer(fh)
            w.writerow(["z_nm", "x_nm", "d_nm", "U_mK"])
            for i, z in enumerate(self.z):
                for j, x in enumerate(self.x):
                    w.writerow([f"{z:.6f}", f"{x:.6f}", f"{self.params.sidewall_x - x:.6f}", f"{self.U[i, j]:.10g}"])


def trap_grid(params: GeometryParams, reach: float = 500.0, step: float = 5.0, nz: int = 48):
    """(z, x) coordinates spanning one period and the back-side air up to ``reach`` nm.

    The reach must stay inside the air padding of the supercell, beyond
    which the field belongs to the neighbouring periodic image.
    """
    padding = 0.5 * (params.S - params.H)
    if reach > padding + 1e-9:
        raise TrapError(f"reach {reach} nm exceeds the supercell air padding {padding:.1f} nm")
    z = np.arange(nz) * params.a / nz
    x_side = params.sidewall_x
    n = int(np.ceil(reach / step))
    x = x_side - step * np.arange(n, 0, -1)
    return z, x


def power_normalize(field: ModeField, target_power: float) -> ModeField:
    """Scale the field so that it carries ``target_power`` mW.

    Power is ``v_g`` times the energy per unit length, the 2D field being
    spread uniformly over the membrane thickness stored on the field.
    """
    if target_power < 0:
        raise TrapError("power must be non-negative")
    p = field.power
    if not p > 0 or field.mode.group_velocity_reduced == 0:
        raise ZeroGroupVelocityError("mode carries no power (zero group velocity)")
    return field.scaled(np.sqrt(target_power * const.MW / p))


def _air_mask(params: GeometryParams, x, z) -> np.ndarray:
    return ~params.inside(x[None, :], z[:, None])


def stark_potential(field: ModeField, power: float, atom: AtomSpec, wavelength: float) -> PotentialMap:
    """Scalar light shift of a mode carrying ``power`` mW at ``wavelength`` nm."""
    alpha = atom.polarizability(wavelength)
    scaled = power_normalize(field, power)
    U = const.joule_to_mk(-0.25 * alpha * scaled.intensity())
    comp = "red" if alpha > 0 else "blue"
    params = field.params
    return PotentialMap(z=field.z, x=field.x, U=U, component=comp, air=_air_mask(params, field.x, field.z), params=params)


def casimir_polder(d, atom: AtomSpec | None = None, c3: float | None = None):
    """-C3/d³ in mK for distance ``d`` in nm (planar surface)."""
    d = np.asarray(d, dtype=float)
    if np.any(d <= 0):
        raise NonPositiveDistanceError("Casimir-Polder distance must be positive")
    c = c3 if c3 is not None else (atom.c3 if atom is not None else const.RB_C3_MK_NM3)
    out = -c / d**3
    return float(out) if out.ndim == 0 else out


def casimir_polder_map(like: PotentialMap, atom: AtomSpec) -> PotentialMap:
    """CP term on the grid of ``like``; NaN where undefined (in or beyond the structure)."""
    d = np.broadcast_to(like.distance[None, :], like.U.shape)
    U = np.full(like.U.shape, np.nan)
    ok = like.air & (d > 0)
    U[ok] = casimir_polder(d[ok], atom)
    return dataclasses.replace(like, U=U, component="cp")


def compose_trap(components: Sequence[PotentialMap], atom: AtomSpec | None = None) -> PotentialMap:
    """Pointwise sum of potential maps, plus Casimir-Polder when ``atom`` is given.

    CP enters only at air points behind the flat sidewall, using the
    perpendicular distance to it.
    """
    if not components:
        raise TrapError("nothing to compose")
    first = components[0]
    for c in components[1:]:
        if not first.same_grid(c):
            raise GridMismatchError("potential maps live on different grids")
    total = np.zeros_like(first.U, dtype=float)
    for c in components:
        total = total + np.nan_to_num(c.U, nan=0.0) if c.component == "cp" else total + c.U
    names = [c.component for c in components]
    if atom is not None:
        cp = casimir_polder_map(first, atom)
        total = total + np.nan_to_num(cp.U, nan=0.0)
        names.append("cp")
    return dataclasses.replace(first, U=total, component="+".join(names))


@dataclasses.dataclass(frozen=True)
class TrapMinimum:
    d: float  # nm from the sidewall
    z: float  # nm, modulo a
    depth: float  # mK, potential at the minimum (zero far from the guide)
    barrier_surface: float  # mK above the minimum on the way to the wall
    barrier_z: float  # mK above the minimum along z
    frequencies: tuple  # (ν_x, ν_z) Hz


@dataclasses.dataclass(frozen=True)
class TrapReport:
    minima: tuple
    reference: float  # U at the far edge of the map (mK)
    y_profile: str = "not computed (2D model)"

    def to_json(self) -> str:
        return json.dumps(
            {
                "reference_mK": self.reference,
                "y_profile": self.y_profile,
                "minima": [dataclasses.asdict(m) for m in self.minima],
            },
            indent=2,
        )


def _quadratic_vertex(f_m, f_0, f_p):
    den = f_m - 2 * f_0 + f_p
    if den <= 0:
        return 0.0, f_0, 0.0
    off = 0.5 * (f_m - f_p) / den
    return off, f_0 - 0.25 * (f_m - f_p) * off, den


def find_minima(pmap: PotentialMap, exclusion: float = 0.0, atom: AtomSpec | None = None) -> TrapReport:
    """Local minima of the potential in the air behind the sidewall.

    Minima closer than ``exclusion`` (nm) to the wall are ignored.  Each is
    refined by a parabola through its neighbours along x and along z
    (periodic).  Depth is the potential value at the minimum; ``z`` is
    reported in (-a/2, a/2].
    """
    p = pmap.params
    if pmap.z.size < 3 or (pmap.z[-1] - pmap.z[0]) + (pmap.z[1] - pmap.z[0]) < p.a * (1 - 1e-9):
        raise TrapError("potential map must cover a full period in z")
    d = pmap.distance
    if d.max() < 500.0 - 1e-6:
        raise TrapError("potential map must reach 500 nm from the sidewall")
    U = pmap.U
    far = int(np.argmax(d))
    ref = float(np.nanmean(U[:, far]))
    mass = atom.mass if atom is not None else const.RB87_MASS
    dz = pmap.z[1] - pmap.z[0]
    dx = abs(pmap.x[1] - pmap.x[0])
    nz, nx = U.shape
    found = []
    for i in range(nz):
        for j in range(1, nx - 1):
            if not (pmap.air[i, j] and d[j] > max(exclusion, 0.0) and d[j] < d.max()):
                continue
            c = U[i, j]
            nb = U[[(i - 1) % nz, i, (i + 1) % nz]][:, j - 1 : j + 2]
            if not np.isfinite(nb).all() or c > nb.min() or np.sum(nb == c) > 1:
                continue
            ox, ux, cx = _quadratic_vertex(U[i, j - 1], c, U[i, j + 1])
            oz, uz, cz = _quadratic_vertex(U[(i - 1) % nz, j], c, U[(i + 1) % nz, j])
            x_min = pmap.x[j] + ox * (pmap.x[1] - pmap.x[0])
            z_min = (pmap.z[i] + oz * dz) % p.a
            if z_min > 0.5 * p.a:
                z_min -= p.a
            u_min = min(ux, uz)
            # barrier towards the wall: highest point between minimum and the wall (same z row)
            towards = [jj for jj in range(nx) if d[jj] < d[j] and pmap.air[i, jj] and d[jj] > 0]
            barrier_s = float(np.max(U[i, towards]) - u_min) if towards else 0.0
            barrier_z = float(np.max(U[:, j]) - u_min)
            k_to_si = const.KB * const.MK / const.NM**2
            nu = tuple(
                float(np.sqrt(max(curv, 0.0) / h**2 * k_to_si / mass) / (2 * np.pi)) for curv, h in ((cx, dx), (cz, dz))
            )
            found.append(
                TrapMinimum(
                    d=float(p.sidewall_x - x_min),
                    z=float(z_min),
                    depth=float(u_min),
                    barrier_surface=barrier_s,
                    barrier_z=barrier_z,
                    frequencies=nu,
                )
            )
    if not found:
        raise NoMinimumFoundError("no local minimum in the air region")
    found.sort(key=lambda m: m.depth)
    return TrapReport(minima=tuple(found), reference=ref)
