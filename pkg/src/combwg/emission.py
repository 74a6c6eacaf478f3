"""Decay rates of an atom next to the comb: guided-mode rate, total rate,
rate into everything else and the β factor.

The guided rate uses the mode-overlap expression

    Γ1D/Γ0 = n_g σ a ε0 |e·E*(r0)|² / (2 ∭cell ε|E|² dV),   σ = 3λ²/2π,

with the cell integral built from the 2D field spread over the membrane
thickness.  Equivalently ``Γ1D/Γ0 = n_g σ / (2 A_eff)``.

Two estimators for the non-guided rate Γ' are offered:

``vacuum-approx``
    Γ' = Γ0.
``ldos-2d``
    Γ' from finite-structure frequency-domain solves: the 2D total rate,
    relative to the 2D vacuum rate, with the frequency pushed a little into
    the band gap next to the slow-mode edge.  There the guided channel is
    closed and what remains is the emission into the radiation continuum,
    which varies slowly with frequency.  Γ1D itself is always the value
    above, so the two estimators only differ in Γ' and Γ_tot.
"""

from __future__ import annotations

import csv
import dataclasses
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import constants as const
from .bloch import ModeField
from . import greens

__all__ = [
    "EmissionReport",
    "effective_area",
    "gamma_1d",
    "gamma_1d_overlap",
    "beta_factor",
    "position_scan",
    "LdosEstimator",
    "write_scan_csv",
]

METHODS = ("vacuum-approx", "ldos-2d")
ZERO_FIELD = 1e-10


class EmissionError(ValueError):
    pass


class ZeroFieldError(EmissionError):
    pass


@dataclasses.dataclass(frozen=True)
class EmissionReport:
    d: float  # nm from the flat sidewall
    z: float  # nm within the period
    gamma_1d: float
    gamma_tot: float
    gamma_prime: float
    beta: float
    a_eff: float  # nm²
    n_g: float
    method: str


def _unit(orientation) -> np.ndarray:
    e = np.asarray(orientation, dtype=float)
    n = np.linalg.norm(e)
    if n == 0:
        raise EmissionError("orientation must be non-zero")
    return e / n


def _projected(field: ModeField, r0, orientation) -> complex:
    """e·E(r0) for r0 = (x, z) in nm, orientation (e_x, e_z)."""
    x, z = r0
    ex, ez, _ = field.at(x, z)
    e = _unit(orientation)
    return complex(e[0] * ex.ravel()[0] + e[1] * ez.ravel()[0])


def _cell_integral(field: ModeField) -> float:
    """∭cell ε0 ε |E|² dV in SI, equal to twice the time-averaged cell energy."""
    return 2.0 * field.energy_per_cell


def effective_area(field: ModeField, r0, orientation=(1.0, 0.0)) -> float:
    """A_eff (nm²) at ``r0 = (x, z)``."""
    proj = _projected(field, r0, orientation)
    # relative to the strongest sampled field, so round-off counts as zero
    peak = np.sqrt(np.max(np.abs(field.Ex) ** 2 + np.abs(field.Ez) ** 2))
    if abs(proj) <= ZERO_FIELD * peak:
        raise ZeroFieldError("field component vanishes at the atom position")
    a = field.mode.fourier.a * const.NM
    area = _cell_integral(field) / (a * const.EPS0 * abs(proj) ** 2)
    return area / const.NM**2


def _wavelength_m(field: ModeField) -> float:
    return field.mode.wavelength * const.NM


def gamma_1d(field: ModeField, n_g: float, r0, orientation=(1.0, 0.0)) -> float:
    """Γ1D/Γ0 = n_g σ / (2 A_eff), forward plus backward."""
    sigma = 3 * _wavelength_m(field) ** 2 / (2 * np.pi)
    return n_g * sigma / (2 * effective_area(field, r0, orientation) * const.NM**2)


def gamma_1d_overlap(field: ModeField, n_g: float, r0, orientation=(1.0, 0.0)) -> float:
    """Same rate evaluated directly from the overlap expression."""
    sigma = 3 * _wavelength_m(field) ** 2 / (2 * np.pi)
    a = field.mode.fourier.a * const.NM
    proj = _projected(field, r0, orientation)
    return n_g * sigma * a * const.EPS0 * abs(proj) ** 2 / (2 * _cell_integral(field))


def beta_factor(gamma_1d: float, gamma_prime: float) -> float:
    """β = Γ1D / (Γ1D + Γ')."""
    if gamma_1d < 0 or gamma_prime < 0:
        raise EmissionError("rates must be non-negative")
    total = gamma_1d + gamma_prime
    if total == 0:
        raise EmissionError("both rates are zero")
    return gamma_1d / total


@dataclasses.dataclass(frozen=True)
class LdosEstimator:
    """Median 2D radiative rate over finite segments and terminations.

    ``gap_detuning`` is the relative frequency shift into the band gap.
    """

    n_periods: Sequence[int] = (8, 12, 16)
    termination_shifts: Sequence[float] = (0.0, 0.5)  # in units of a
    gap_detuning: float = 0.02
    cell: float | None = None

    def __post_init__(self):
        if not self.n_periods or not self.termination_shifts:
            raise EmissionError("need at least one segment length and one termination")
        if not 0 < self.gap_detuning < 0.5:
            raise EmissionError("gap_detuning must lie in (0, 0.5)")

    def rates(self, params, wavelength: float, d: float, z: float, orientation, gap_above: bool = True) -> np.ndarray:
        lam = wavelength / (1 + self.gap_detuning) if gap_above else wavelength / (1 - self.gap_detuning)
        out = []
        for n in self.n_periods:
            for s in self.termination_shifts:
                prob = greens.comb_problem(
                    params, n, lam, d, z_in_cell=z, orientation=orientation,
                    cell=self.cell, termination_shift=s * params.a,
                )
                out.append(greens.normalized_decay_rate(prob).rate)
        return np.array(out)

    def radiative_rate(self, params, wavelength: float, d: float, z: float, orientation, gap_above: bool = True) -> float:
        return float(np.median(self.rates(params, wavelength, d, z, orientation, gap_above)))


def position_scan(
    field: ModeField,
    axis: str,
    values: Sequence[float],
    method: str = "ldos-2d",
    d: float = 100.0,
    z: float = 0.0,
    orientation=(1.0, 0.0),
    n_g: float | None = None,
    ldos: LdosEstimator | None = None,
) -> list[EmissionReport]:
    """Rates along ``axis`` ('d' distance from the sidewall, or 'z' along the
    guide) with the other coordinate held at ``d`` / ``z`` (nm)."""
    if method not in METHODS:
        raise EmissionError(f"unknown method {method!r}; choose from {METHODS}")
    if axis not in ("d", "z"):
        raise EmissionError("axis must be 'd' or 'z'")
    params = field.params
    ng = field.group_index if n_g is None else n_g
    ldos = ldos or LdosEstimator()
    # rising band towards the zone edge: the edge is a maximum and the gap lies above it
    gap_above = field.mode.group_velocity_reduced >= 0
    out = []
    for v in values:
        dd, zz = (v, z) if axis == "d" else (d, v)
        r0 = (params.sidewall_x - dd, zz)
        g1 = gamma_1d(field, ng, r0, orientation)
        if method == "vacuum-approx":
            gp = 1.0
        else:
            gp = ldos.radiative_rate(params, field.mode.wavelength, dd, zz % params.a, orientation, gap_above)
        out.append(
            EmissionReport(
                d=float(dd), z=float(zz), gamma_1d=g1, gamma_tot=g1 + gp, gamma_prime=gp,
                beta=beta_factor(g1, gp), a_eff=effective_area(field, r0, orientation), n_g=float(ng), method=method,
            )
        )
    return out


def write_scan_csv(reports: Sequence[EmissionReport], path) -> Path:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        fh.write("# rates normalized by the vacuum rate\n")
        w = csv.writer(fh)
        w.writerow(["d_nm", "z_nm", "gamma_1d", "gamma_tot", "gamma_prime", "beta", "a_eff_nm2", "n_g", "method"])
        for r in reports:
            w.writerow([f"{r.d:.6g}", f"{r.z:.6g}", f"{r.gamma_1d:.10g}", f"{r.gamma_tot:.10g}",
                        f"{r.gamma_prime:.10g}", f"{r.beta:.10g}", f"{r.a_eff:.10g}", f"{r.n_g:.10g}", r.method])
    return path
