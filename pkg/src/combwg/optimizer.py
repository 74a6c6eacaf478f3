"""Design search for flat (quartic) band edges and period tuning.

The score of a design is ``w_p |p - p*| - w_m log10(m_eff)``, where ``p`` is
the fitted edge exponent and ``m_eff`` the reduced photon mass at the outer
end of the fit window.  Searches run on reduced cutoffs and the final point
is re-evaluated at full resolution.
"""

from __future__ import annotations

import dataclasses
import json
import math
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy import optimize

from . import dispersion
from .bloch import SolverSettings, edge_band, fourier_for, mode_at_frequency
from .geometry import GeometryError, GeometryParams

__all__ = [
    "DesignObjective",
    "Evaluation",
    "DesignResult",
    "evaluate_design",
    "flat_band_search",
    "tune_period",
]


class InfeasibleStartError(ValueError):
    pass


class TargetOutsideBandError(ValueError):
    pass


@dataclasses.dataclass(frozen=True)
class DesignObjective:
    target_exponent: float = 4.0
    exponent_weight: float = 1.0
    mass_weight: float = 0.1
    band_index: int = 1
    window: tuple[float, float] = dispersion.DEFAULT_WINDOW
    fill_bounds: tuple[float, float] = (0.0, 1.0)
    min_feature: float = 0.0  # in units of a

    def __post_init__(self):
        if self.exponent_weight < 0 or self.mass_weight < 0:
            raise ValueError("weights must be non-negative")
        if self.exponent_weight == 0 and self.mass_weight == 0:
            raise ValueError("at least one weight must be positive")

    def violations(self, params: GeometryParams) -> list[str]:
        out = []
        f = params.fill_fraction()
        if not self.fill_bounds[0] <= f <= self.fill_bounds[1]:
            out.append(f"matter fraction {f:.3f} outside {self.fill_bounds}")
        m = self.min_feature * params.a
        if m > 0:
            feats = {"tooth width": params.w, "gap width": params.a - params.w,
                     "tooth depth": params.h_etched, "backbone": params.H - params.h_etched}
            for name, v in feats.items():
                if 0 < v < m:
                    out.append(f"{name} {v / params.a:.3f}a below minimum feature")
        return out


@dataclasses.dataclass(frozen=True)
class Evaluation:
    params: GeometryParams
    score: float
    exponent: float | None
    m_eff: float | None
    diagnostic: str = ""

    def to_json(self) -> str:
        return json.dumps(
            {
                "w_over_a": self.params.w / self.params.a,
                "etch_over_H": self.params.h_etched / self.params.H,
                "score": None if not math.isfinite(self.score) else self.score,
                "p": self.exponent,
                "m_eff": self.m_eff,
                "diagnostic": self.diagnostic,
            },
            sort_keys=True,
        )


def evaluate_design(
    params: GeometryParams, objective: DesignObjective | None = None, settings: SolverSettings | None = None
) -> Evaluation:
    """Score one geometry; pipeline failures score +inf with the reason attached."""
    objective = objective or DesignObjective()
    settings = settings or SolverSettings()
    bad = objective.violations(params)
    if bad:
        return Evaluation(params, math.inf, None, None, "; ".join(bad))
    try:
        band = edge_band(fourier_for(params, settings), objective.band_index, settings)
        fit = dispersion.fit_dispersion_exponent(band, objective.window)
        e = dispersion._edge(band)
        k_out = e.k - objective.window[1] * dispersion.ZONE_EDGE
        lam = 1.0 / float(e.curve(k_out)) * band.a
        m = dispersion.effective_mass(band, lam, edge=e, reduced=True)
    except (dispersion.DispersionError, RuntimeError, GeometryError, ValueError) as exc:
        return Evaluation(params, math.inf, None, None, f"{type(exc).__name__}: {exc}")
    score = objective.exponent_weight * abs(fit.exponent - objective.target_exponent)
    score -= objective.mass_weight * math.log10(m)
    return Evaluation(params, float(score), fit.exponent, float(m))


@dataclasses.dataclass(frozen=True)
class DesignResult:
    best: GeometryParams
    best_evaluation: Evaluation
    final_evaluation: Evaluation | None
    evaluations: int
    trace: tuple

    def write_trace(self, path) -> Path:
        path = Path(path)
        path.write_text("".join(ev.to_json() + "\n" for ev in self.trace), encoding="utf-8")
        return path


def flat_band_search(
    start: GeometryParams,
    bounds: Sequence[tuple[float, float]] = ((0.2, 0.6), (0.1, 0.9)),
    objective: DesignObjective | None = None,
    budget: int = 40,
    settings: SolverSettings | None = None,
    search_scale: float = 0.5,
    verify: bool = True,
) -> DesignResult:
    """Nelder-Mead over (w/a, H_etched/H) inside ``bounds``.

    Runs at ``search_scale`` times the cutoffs of ``settings``; the best point
    is re-scored at full cutoffs when ``verify``.  Exhausting ``budget``
    evaluations is the normal way to stop.
    """
    objective = objective or DesignObjective()
    settings = settings or SolverSettings()
    fast = settings.scaled(search_scale)
    x0 = np.array([start.w / start.a, start.h_etched / start.H])
    lo = np.array([b[0] for b in bounds])
    hi = np.array([b[1] for b in bounds])
    if np.any(x0 < lo) or np.any(x0 > hi) or objective.violations(start):
        raise InfeasibleStartError("start point violates bounds or constraints")
    if budget == 0:
        return DesignResult(start, Evaluation(start, math.nan, None, None, "no evaluations"), None, 0, ())
    if budget < 20:
        raise ValueError("a search needs a budget of at least 20 evaluations")

    def make(x):
        return dataclasses.replace(start, w=float(x[0]) * start.a, h_etched=float(x[1]) * start.H)

    trace: list[Evaluation] = []
    cache: dict[tuple, float] = {}

    def f(x):
        x = np.clip(x, lo, hi)
        key = tuple(np.round(x, 12))
        if key in cache:
            return cache[key]
        if len(trace) >= budget:
            return math.inf
        try:
            params = make(x)
        except GeometryError as exc:
            ev = Evaluation(start, math.inf, None, None, str(exc))
        else:
            ev = evaluate_design(params, objective, fast)
        trace.append(ev)
        cache[key] = ev.score
        return ev.score

    f(x0)
    if not math.isfinite(trace[0].score):
        raise InfeasibleStartError(f"start point cannot be evaluated: {trace[0].diagnostic}")
    step = 0.1 * (hi - lo)
    simplex = np.array([x0, np.clip(x0 + [step[0], 0], lo, hi), np.clip(x0 + [0, step[1]], lo, hi)])
    optimize.minimize(
        f, x0, method="Nelder-Mead", bounds=list(zip(lo, hi)),
        options={"maxfev": budget, "initial_simplex": simplex, "xatol": 1e-4, "fatol": 1e-4},
    )
    best = min(trace, key=lambda ev: ev.score)
    final = evaluate_design(best.params, objective, settings) if verify else None
    return DesignResult(best.params, best, final, len(trace), tuple(trace))


def tune_period(
    params: GeometryParams,
    wavelength: float,
    n_g_target: float,
    band_index: int = 1,
    settings: SolverSettings | None = None,
) -> tuple[GeometryParams, float]:
    """Rescale the geometry so the point of the band with ``n_g_target`` sits at ``wavelength``.

    Returns the scaled geometry and the group index actually obtained at
    ``wavelength`` after re-solving the scaled structure.
    """
    settings = settings or SolverSettings()
    band = edge_band(fourier_for(params, settings), band_index, settings)
    e = dispersion._edge(band)
    try:
        dl = dispersion.detuning_at_group_index(band, n_g_target, edge=e)
    except dispersion.TargetUnreachableError as exc:
        raise TargetOutsideBandError(str(exc)) from exc
    sign = 1.0 if e.kind == "max" else -1.0
    lam_over_a = (e.wavelength * band.a + sign * dl) / band.a
    scaled = params.scaled(wavelength / lam_over_a)
    eps = fourier_for(scaled, settings)
    k_far = dispersion._branch_end(e)
    mode = mode_at_frequency(eps, band_index, scaled.a / wavelength, k_bracket=tuple(sorted((k_far, e.k))))
    return scaled, mode.group_index
