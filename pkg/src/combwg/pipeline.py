"""Task implementations behind ``combwg run``.

Every task takes the run configuration and an output directory, writes its
artifacts through a :class:`Recorder` and returns a small JSON-able summary.
Artifacts contain no timestamps, so identical inputs give identical bytes.
"""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Callable

import numpy as np

from . import dispersion, emission, io, optimizer, trap
from .bloch import band_diagram, crossing_gap, edge_band, fourier_for, mode_at_frequency, mode_field
from .config import RunConfig

__all__ = ["Recorder", "TASK_FUNCTIONS", "run_task"]


class Recorder:
    """Collects the paths a task writes, so partial output survives a failure."""

    def __init__(self, root: Path):
        self.root = Path(root)
        self.files: list[Path] = []

    def path(self, name: str) -> Path:
        p = self.root / name
        p.parent.mkdir(parents=True, exist_ok=True)
        return p

    def add(self, *paths: Path) -> None:
        for p in paths:
            p = Path(p)
            if p not in self.files:
                self.files.append(p)

    def json(self, name: str, obj) -> Path:
        p = self.path(name)
        p.write_text(json.dumps(obj, indent=2, sort_keys=True, allow_nan=True) + "\n", encoding="utf-8")
        self.add(p)
        return p


def _settings(cfg: RunConfig, scale: float):
    return cfg.settings if scale == 1.0 else cfg.settings.scaled(scale)


def task_bands(cfg: RunConfig, rec: Recorder, scale: float = 1.0) -> dict:
    sec = cfg.sections["bands"]
    settings = _settings(cfg, scale)
    eps = fourier_for(cfg.geometry, settings)
    k = np.linspace(0.0, 0.5, int(sec["k_points"]))
    bands = band_diagram(eps, k, int(sec["n_bands"]), overlap_threshold=settings.overlap_threshold, reduced=True)
    rows = []
    for b in bands:
        for kr, m in zip(b.k_reduced, b.modes):
            rows.append((b.index, kr, m.omega_reduced, m.below_light_line, b.parity))
    rec.add(io.write_csv(
        rec.path("bands.csv"), ("band", "k_reduced", "omega_reduced", "below_light_line", "parity"), rows,
        comments=[f"geometry {json.dumps(cfg.geometry.as_dict(), sort_keys=True)}", f"cutoffs {list(settings.cutoffs)}",
                  "k in units of 2pi/a, omega in units of 2pi c/a"],
    ))
    summary = {"n_bands": len(bands), "ambiguous": {b.index: list(b.ambiguous) for b in bands if b.ambiguous}}
    gaps = sec.get("gaps") or []
    if gaps:
        grow = []
        for g in gaps:
            pair = tuple(int(v) for v in g["bands"])
            par = tuple(g.get("parities") or (None, None))
            kc, dw = crossing_gap(eps, pair, tuple(float(v) for v in g["k"]), parities=par)
            grow.append((pair[0], pair[1], par[0] or "", par[1] or "", kc, dw))
        rec.add(io.write_csv(rec.path("gaps.csv"), ("band_i", "band_j", "parity_i", "parity_j", "k_reduced", "gap_reduced"), grow))
        summary["gaps"] = [{"bands": [r[0], r[1]], "k": r[4], "gap": r[5]} for r in grow]
    return summary


def task_dispersion(cfg: RunConfig, rec: Recorder, scale: float = 1.0) -> dict:
    sec = cfg.sections["dispersion"]
    settings = _settings(cfg, scale)
    eps = fourier_for(cfg.geometry, settings)
    out = {}
    for b in sec["bands"]:
        band = edge_band(eps, int(b), settings)
        rec.add(io.write_csv(
            rec.path(f"edge_band{b}.csv"), ("k_reduced", "omega_reduced", "below_light_line"),
            [(m.k_reduced, m.omega_reduced, m.below_light_line) for m in band.modes],
        ))
        summ = dispersion.summarize(band, tuple(sec["window"]), tuple(sec["n_g_targets"]))
        rec.add(*summ.write(rec.root, stem=f"dispersion_band{b}"))
        out[str(b)] = {"exponent": summ.exponent, "scaling": summ.scaling, "omega_edge": summ.omega_edge}
    return out


def _mode(cfg, eps, band, wavelength, k):
    return mode_at_frequency(eps, int(band), cfg.geometry.a / float(wavelength), k_bracket=tuple(float(v) for v in k))


def task_trap(cfg: RunConfig, rec: Recorder, scale: float = 1.0) -> dict:
    sec = cfg.sections["trap"]
    atom = trap.AtomSpec.rubidium()
    tc = trap.TrapConfig(
        red_wavelength=float(sec["red_wavelength"]), blue_wavelength=float(sec["blue_wavelength"]),
        red_power=float(sec["red_powers"][0]), blue_power=float(sec["blue_power"]),
        red_band=int(sec["red_band"]), blue_band=int(sec["blue_band"]),
    )
    tc.validate(atom)
    eps = fourier_for(cfg.geometry, _settings(cfg, scale))
    red = _mode(cfg, eps, tc.red_band, tc.red_wavelength, sec["red_k"])
    blue = _mode(cfg, eps, tc.blue_band, tc.blue_wavelength, sec["blue_k"])
    z, x = trap.trap_grid(cfg.geometry, reach=float(sec["reach"]), step=float(sec["step"]) / max(scale, 1.0), nz=int(sec["nz"]))
    fr, fb = mode_field(red, grid=(z, x)), mode_field(blue, grid=(z, x))
    rec.add(io.field_to_grid(fr, rec.path("field_red.cwg")), io.field_to_grid(fb, rec.path("field_blue.cwg")))
    ub = trap.stark_potential(fb, tc.blue_power, atom, tc.blue_wavelength)
    rows, reports = [], []
    for i, pr in enumerate(sec["red_powers"]):
        ur = trap.stark_potential(fr, float(pr), atom, tc.red_wavelength)
        total = trap.compose_trap([ur, ub], atom)
        if i == 0:
            p = rec.path("potential_0.csv")
            total.to_csv(p)
            rec.add(p)
        rec.add(io.potential_to_grid(total, rec.path(f"potential_{i}.cwg")))
        try:
            rep = trap.find_minima(total, exclusion=float(sec["exclusion"]), atom=atom)
        except trap.NoMinimumFoundError:
            rows.append((pr, tc.blue_power, math.nan, math.nan, math.nan, math.nan))
            reports.append({"red_power": pr, "minima": []})
            continue
        m = rep.minima[0]
        rows.append((pr, tc.blue_power, m.d, m.z, m.depth, m.barrier_surface))
        reports.append({"red_power": pr, **json.loads(rep.to_json())})
    rec.add(io.write_csv(rec.path("trap_scan.csv"), ("red_power_mW", "blue_power_mW", "d_nm", "z_nm", "depth_mK", "barrier_mK"),
                         rows, comments=["depth relative to zero far from the guide"]))
    rec.json("trap_report.json", {
        "red": {"wavelength": tc.red_wavelength, "k_reduced": red.k_reduced, "n_g": red.group_index},
        "blue": {"wavelength": tc.blue_wavelength, "k_reduced": blue.k_reduced, "n_g": blue.group_index},
        "scan": reports,
    })
    return {"minima": [{"red_power": r[0], "d": r[2], "depth": r[4]} for r in rows]}


def task_emission(cfg: RunConfig, rec: Recorder, scale: float = 1.0) -> dict:
    sec = cfg.sections["emission"]
    eps = fourier_for(cfg.geometry, _settings(cfg, scale))
    mode = _mode(cfg, eps, sec["band"], sec["wavelength"], sec["k"])
    field = mode_field(mode, grid=max(16, int(round(32 * scale))))
    rec.add(io.field_to_grid(field, rec.path("field_slow.cwg")))
    cell = None
    if scale > 1.0:
        cell = float(sec["wavelength"]) / (cfg.geometry.n * 20) * 0.999 / scale
    est = emission.LdosEstimator(
        n_periods=tuple(int(n) for n in sec["n_periods"]),
        termination_shifts=tuple(float(s) for s in sec["termination_shifts"]),
        gap_detuning=float(sec["gap_detuning"]), cell=cell,
    )
    out = {"n_g": mode.group_index, "k_reduced": mode.k_reduced}
    for method in sec["methods"]:
        for axis, values in (("d", sec["d_values"]), ("z", sec["z_values"])):
            if not values:
                continue
            reps = emission.position_scan(
                field, axis, [float(v) for v in values], method=method, d=float(sec["d"]), z=float(sec["z"]),
                orientation=tuple(sec["orientation"]), ldos=est,
            )
            rec.add(emission.write_scan_csv(reps, rec.path(f"emission_{method}_{axis}.csv")))
            out[f"{method}_{axis}"] = [{"pos": r.d if axis == "d" else r.z, "gamma_1d": r.gamma_1d, "beta": r.beta} for r in reps]
    return out


def task_optimize(cfg: RunConfig, rec: Recorder, scale: float = 1.0) -> dict:
    sec = cfg.sections["optimize"]
    objective = optimizer.DesignObjective(
        target_exponent=float(sec["target_exponent"]), exponent_weight=float(sec["exponent_weight"]),
        mass_weight=float(sec["mass_weight"]), band_index=int(sec["band"]), window=tuple(sec["window"]),
    )
    res = optimizer.flat_band_search(
        cfg.geometry, bounds=tuple(tuple(b) for b in sec["bounds"]), objective=objective, budget=int(sec["budget"]),
        settings=_settings(cfg, scale), search_scale=float(sec["search_scale"]), verify=bool(sec["verify"]),
    )
    p = rec.path("optimize_trace.jsonl")
    res.write_trace(p)
    rec.add(p)
    best = res.final_evaluation or res.best_evaluation
    summary = {
        "evaluations": res.evaluations,
        "w_over_a": res.best.w / res.best.a,
        "etch_over_H": res.best.h_etched / res.best.H,
        "search": json.loads(res.best_evaluation.to_json()),
        "verified": None if res.final_evaluation is None else json.loads(res.final_evaluation.to_json()),
    }
    rec.json("optimize_result.json", summary)
    return {"score": best.score if math.isfinite(best.score) else None, "w_over_a": summary["w_over_a"],
            "etch_over_H": summary["etch_over_H"]}


TASK_FUNCTIONS: dict[str, Callable] = {
    "bands": task_bands,
    "dispersion": task_dispersion,
    "trap": task_trap,
    "emission": task_emission,
    "optimize": task_optimize,
}


def run_task(name: str, cfg: RunConfig, rec: Recorder, scale: float = 1.0) -> dict:
    return TASK_FUNCTIONS[name](cfg, rec, scale)
