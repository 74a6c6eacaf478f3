"""Band-edge analysis: edge location, group index, photon effective mass,
edge power law and the fabrication-tolerance figures of merit.

All routines work in reduced units: ``k~ = k a / 2π`` and ``ω~ = ω a / 2π c``
so that ``n_g = 1 / |dω~/dk~|`` and the vacuum wavelength is ``λ = a / ω~``.
Wavelengths passed in or returned are in the band's length unit (``band.a``).

Derivatives come from a single interpolating spline through the samples
(mirrored about a zone-boundary edge so that the evenness of ω(k) is built
in).  A quintic spline is used; it reproduces polynomials up to degree five
exactly, so closed-form test bands are recovered to round-off.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import warnings
from pathlib import Path

import numpy as np
from scipy import interpolate, optimize, stats

__all__ = [
    "BandSamples",
    "DispersionSummary",
    "band_edge",
    "group_index",
    "effective_mass",
    "fit_dispersion_exponent",
    "detuning_at_group_index",
    "scaling_exponent",
    "summarize",
    "DEFAULT_WINDOW",
]

DEFAULT_WINDOW = (0.01, 0.1)  # Δk range in units of π/a
ZONE_EDGE = 0.5
NOISE_FLOOR = 1e-13
BRANCH_RIPPLE = 1e-6


class DispersionError(ValueError):
    pass


class NoExtremumError(DispersionError):
    pass


class InsufficientSamplesError(DispersionError):
    pass


class TargetUnreachableError(DispersionError):
    pass


class InflectionPointError(DispersionError):
    pass


class InsufficientRangeError(DispersionError):
    pass


@dataclasses.dataclass(frozen=True)
class BandSamples:
    """Bare (k~, ω~) samples; anything exposing these two arrays is accepted."""

    k_reduced: np.ndarray
    omega_reduced: np.ndarray
    a: float = 1.0
    below_light_line: np.ndarray | None = None


def _guided_block(band):
    """Contiguous run of below-light-line samples that contains the upper k end."""
    k = np.asarray(band.k_reduced, dtype=float)
    w = np.asarray(band.omega_reduced, dtype=float)
    mask = getattr(band, "below_light_line", None)
    if mask is None:
        return k, w
    mask = np.asarray(mask, dtype=bool)
    if mask.all() or not mask.any():
        return k, w
    last = np.nonzero(mask)[0][-1]
    first = last
    while first > 0 and mask[first - 1]:
        first -= 1
    return k[first : last + 1], w[first : last + 1]


class _Curve:
    """Spline through the samples, mirrored about k~ = 0 or 1/2 when sampled there."""

    def __init__(self, band, degree: int = 5):
        k, w = _guided_block(band)
        if np.any(np.diff(k) <= 0):
            raise DispersionError("k samples must be strictly increasing")
        self.k_min, self.k_max = float(k[0]), float(k[-1])
        self.samples = (k, w)
        kk, ww = k, w
        tol = 1e-12
        if abs(k[-1] - ZONE_EDGE) < tol:
            kk = np.concatenate([kk, 2 * ZONE_EDGE - kk[-2::-1]])
            ww = np.concatenate([ww, ww[-2::-1]])
        if abs(k[0]) < tol:
            kk = np.concatenate([-kk[:0:-1], kk])
            ww = np.concatenate([ww[:0:-1], ww])
        if kk.size <= degree:
            raise InsufficientSamplesError(f"need more than {degree} samples for the spline")
        self.spline = interpolate.make_interp_spline(kk, ww, k=degree)
        self.d1 = self.spline.derivative(1)
        self.d2 = self.spline.derivative(2)

    def __call__(self, k):
        return self.spline(k)


@dataclasses.dataclass(frozen=True)
class Edge:
    omega: float
    k: float
    kind: str  # "max" or "min"
    curve: _Curve = dataclasses.field(repr=False, compare=False)

    @property
    def wavelength(self) -> float:
        return 1.0 / self.omega


def _edge(band, edge=None) -> Edge:
    if isinstance(edge, Edge):
        return edge
    curve = _Curve(band)
    if edge is not None:
        w_e, k_e = edge
        k, w = curve.samples
        near = np.argsort(np.abs(k - k_e))[1:5]
        kind = "max" if np.mean(w[near]) < w_e else "min"
        return Edge(float(w_e), float(k_e), kind, curve)
    return _locate_edge(curve)


def _locate_edge(curve: _Curve) -> Edge:
    k, w = curve.samples
    slopes = np.abs(curve.d1(k))
    i = int(np.argmin(slopes))
    half_step = 0.5 * np.min(np.diff(k))
    # local polynomial (degree 4) around the flattest sample
    lo, hi = max(0, i - 4), min(k.size, i + 5)
    kk, ww = k[lo:hi], w[lo:hi]
    if abs(k[i] - ZONE_EDGE) < half_step or abs(k[i]) < half_step:
        k_e = ZONE_EDGE if abs(k[i] - ZONE_EDGE) < half_step else 0.0
    else:
        if kk.size < 5:
            raise NoExtremumError("too few samples around the flattest point")
        poly = np.polynomial.Polynomial.fit(kk, ww, 4)
        roots = poly.deriv().roots()
        roots = roots[np.isreal(roots)].real
        roots = roots[(roots >= kk[0]) & (roots <= kk[-1])]
        if roots.size == 0:
            raise NoExtremumError("no stationary point near the flattest sample")
        k_e = float(roots[np.argmin(np.abs(roots - k[i]))])
        if abs(k_e - ZONE_EDGE) < half_step:
            k_e = ZONE_EDGE
    # k_e must really be an extremum: slope changes sign through it
    if 0.0 < k_e < ZONE_EDGE:
        eps = half_step
        if np.sign(curve.d1(k_e - eps)) == np.sign(curve.d1(k_e + eps)):
            raise NoExtremumError("flattest point is not an extremum")
    # kind from the nearby samples; the curvature alone vanishes at a quartic edge
    w_e = float(curve(k_e))
    near = np.argsort(np.abs(k - k_e))[1:5]
    kind = "max" if np.mean(w[near]) < w_e else "min"
    return Edge(float(curve(k_e)), float(k_e), kind, curve)


def band_edge(band) -> tuple[float, float]:
    """(ω~_e, k~_e) of the band extremum; k~_e snaps to 1/2 (k = π/a) at the zone edge."""
    e = _edge(band)
    return e.omega, e.k


def _side(edge: Edge) -> float:
    """-1 when the analysed branch lies at k~ below the edge, +1 otherwise."""
    return 1.0 if edge.k <= edge.curve.k_min + 1e-12 else -1.0


def _k_at_omega(edge: Edge, omega: float) -> float:
    """Point on the monotone branch next to the edge where ω~(k~) = omega."""
    curve = edge.curve
    k_far = _branch_end(edge)
    f = lambda q: float(curve(q)) - omega
    if abs(f(edge.k)) <= 4 * np.finfo(float).eps * edge.omega:
        return edge.k
    if np.sign(f(k_far)) == np.sign(f(edge.k)):
        raise TargetUnreachableError(f"ω~ = {omega:.6g} lies outside the branch span")
    lo, hi = sorted((k_far, edge.k))
    return optimize.brentq(f, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps)


def _branch_end(edge: Edge) -> float:
    """Far end of the monotone run of samples that ends at the edge."""
    k, w = edge.curve.samples
    side = _side(edge)
    order = np.argsort(side * (k - edge.k))
    order = order[side * (k[order] - edge.k) >= 0]
    ks, ws = k[order], w[order]
    # walking away from a maximum ω must fall, away from a minimum it must rise
    sign = -1.0 if edge.kind == "max" else 1.0
    # reversals below this size are plane-wave truncation ripple next to the zone edge
    tol = BRANCH_RIPPLE * abs(edge.omega)
    end = ks[0]
    for i in range(1, ks.size):
        if sign * (ws[i] - ws[i - 1]) <= 0 and abs(ws[i] - ws[i - 1]) > tol:
            break
        end = ks[i]
    return float(end)


def _wavelength_to_omega(band, wavelength: float) -> float:
    a = getattr(band, "a", 1.0)
    return a / wavelength


def group_index(band, wavelength: float, edge=None, check: bool = True) -> float:
    """n_g = c / (dω/dk) at vacuum wavelength ``wavelength`` (band length unit).

    Returns ``inf`` exactly at the edge.  With ``check`` the spline value is
    compared with a centred difference of the nearest raw samples and a
    warning is emitted above 2 % disagreement.
    """
    e = _edge(band, edge)
    omega = _wavelength_to_omega(band, wavelength)
    kq = _k_at_omega(e, omega)
    slope = float(e.curve.d1(kq))
    if kq == e.k or slope == 0.0:
        return float("inf")
    ng = 1.0 / abs(slope)
    if check:
        k, w = e.curve.samples
        j = int(np.clip(np.searchsorted(k, kq), 1, k.size - 2))
        h1, h2 = k[j] - k[j - 1], k[j + 1] - k[j]
        fd = (-h2 / (h1 * (h1 + h2))) * w[j - 1] + ((h2 - h1) / (h1 * h2)) * w[j] + (h1 / (h2 * (h1 + h2))) * w[j + 1]
        sp = float(e.curve.d1(k[j]))
        if sp != 0 and abs(fd - sp) > 0.02 * abs(sp):
            warnings.warn(f"spline slope {sp:.4g} differs from finite difference {fd:.4g} near k~ = {k[j]:.4g}", stacklevel=2)
    return ng


def effective_mass(band, wavelength: float, edge=None, reduced: bool = False) -> float:
    """Photon effective mass at ``wavelength``.

    Band units: ``1/|d²ω~/dk~²|`` with the sign fixed by the edge kind, so a
    parabolic edge ``ω~_e ∓ Δk~²/(2m)`` gives ``+m``.  With ``reduced`` the
    value is multiplied by ``c²/ω_e`` in physical terms, which becomes
    ``1/(|ω~''| ω~_e)``.
    """
    e = _edge(band, edge)
    kq = _k_at_omega(e, _wavelength_to_omega(band, wavelength))
    curv = float(e.curve.d2(kq))
    sign = -1.0 if e.kind == "max" else 1.0
    if curv == 0.0 or sign * curv < 0:
        raise InflectionPointError(f"curvature {curv:.3g} has the wrong sign for a {e.kind} edge")
    m = 1.0 / (sign * curv)
    return m / e.omega if reduced else m


@dataclasses.dataclass(frozen=True)
class ExponentFit:
    exponent: float
    coefficient: float
    confidence: float
    n_samples: int


def fit_dispersion_exponent(band, window=DEFAULT_WINDOW, edge=None, noise_floor: float = NOISE_FLOOR) -> ExponentFit:
    """Least-squares slope of log|Δω| against log Δk on the raw samples.

    ``window`` is the Δk range in units of π/a.  ``confidence`` is the 95 %
    half-width of the slope.  ``coefficient`` is ``A`` in
    ``|Δω~| = A |Δk~|^p``.
    """
    e = _edge(band, edge)
    k, w = e.curve.samples
    dk = np.abs(k - e.k)
    lo, hi = window[0] * ZONE_EDGE, window[1] * ZONE_EDGE
    dw = np.abs(w - e.omega)
    sel = (dk >= lo * (1 - 1e-9)) & (dk <= hi * (1 + 1e-9)) & (dw > noise_floor * max(e.omega, 1e-300))
    if sel.sum() < 8:
        raise InsufficientSamplesError(f"{int(sel.sum())} samples in the fit window, need 8")
    res = stats.linregress(np.log(dk[sel]), np.log(dw[sel]))
    tval = stats.t.ppf(0.975, sel.sum() - 2)
    return ExponentFit(float(res.slope), float(np.exp(res.intercept)), float(tval * res.stderr), int(sel.sum()))


def detuning_at_group_index(band, n_g_target: float, edge=None) -> float:
    """|λ − λ_e| (band length unit) at which n_g reaches ``n_g_target``."""
    e = _edge(band, edge)
    a = getattr(band, "a", 1.0)
    k_far = _branch_end(e)
    ng = lambda q: 1.0 / max(abs(float(e.curve.d1(q))), 1e-300)
    if ng(k_far) > n_g_target:
        raise TargetUnreachableError(f"n_g is already {ng(k_far):.3g} at the far end of the branch")
    k_hi = e.k + _side(e) * 1e-12
    if ng(k_hi) < n_g_target:
        raise TargetUnreachableError(f"n_g never reaches {n_g_target}")
    lo, hi = sorted((k_far, k_hi))
    kq = optimize.brentq(lambda q: ng(q) - n_g_target, lo, hi, xtol=1e-15)
    return float(a * abs(1.0 / float(e.curve(kq)) - 1.0 / e.omega))


def _detuning_at_k(e: Edge, kq: float, a: float) -> float:
    return float(a * abs(1.0 / float(e.curve(kq)) - 1.0 / e.omega))


def scaling_exponent(band, window=DEFAULT_WINDOW, edge=None, n_points: int = 12) -> float:
    """Slope s of log n_g against log Δλ over the decade of Δλ ending at the
    detuning reached at the outer end of ``window``."""
    e = _edge(band, edge)
    a = getattr(band, "a", 1.0)
    dk_max = window[1] * ZONE_EDGE
    if abs(_branch_end(e) - e.k) < dk_max - 1e-12:
        raise InsufficientRangeError("band branch is shorter than the fit window")
    dl_hi = _detuning_at_k(e, e.k + _side(e) * dk_max, a)
    if dl_hi == 0:
        raise InsufficientRangeError("no detuning across the window")
    dls = np.geomspace(dl_hi / 10, dl_hi, n_points)
    ngs = []
    for dl in dls:
        lam = a / e.omega + (dl if e.kind == "max" else -dl)
        ngs.append(group_index(band, lam, edge=e, check=False))
    return float(np.polyfit(np.log(dls), np.log(ngs), 1)[0])


@dataclasses.dataclass(frozen=True)
class DispersionSummary:
    omega_edge: float
    k_edge: float
    wavelength_edge: float
    edge_kind: str
    exponent: float
    exponent_confidence: float
    coefficient: float
    scaling: float | None
    n_g_table: np.ndarray  # columns λ, n_g
    m_eff_table: np.ndarray  # columns Δλ, m_eff (reduced)
    detuning_table: np.ndarray  # columns n_g, Δλ
    window: tuple

    def to_json(self) -> dict:
        return {
            "omega_edge_reduced": self.omega_edge,
            "k_edge_reduced": self.k_edge,
            "wavelength_edge": self.wavelength_edge,
            "edge_kind": self.edge_kind,
            "exponent": self.exponent,
            "exponent_confidence": self.exponent_confidence,
            "coefficient": self.coefficient,
            "scaling_exponent": self.scaling,
            "window_pi_over_a": list(self.window),
        }

    def write(self, directory: str | Path, stem: str = "dispersion") -> list[Path]:
        """CSV tables plus a JSON sidecar with the fit metadata."""
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        paths = []
        for name, header, table in (
            ("ng", ("wavelength", "n_g"), self.n_g_table),
            ("meff", ("detuning", "m_eff_reduced"), self.m_eff_table),
            ("detuning", ("n_g", "detuning"), self.detuning_table),
        ):
            path = directory / f"{stem}_{name}.csv"
            with path.open("w", newline="", encoding="utf-8") as fh:
                fh.write(f"# band edge wavelength {self.wavelength_edge:.10g}\n")
                wr = csv.writer(fh)
                wr.writerow(header)
                for row in table:
                    wr.writerow([f"{v:.10g}" for v in row])
            paths.append(path)
        side = directory / f"{stem}_fit.json"
        side.write_text(json.dumps(self.to_json(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
        paths.append(side)
        return paths


def summarize(band, window=DEFAULT_WINDOW, n_g_targets=(10, 20, 30, 50, 75, 100)) -> DispersionSummary:
    e = _edge(band)
    a = getattr(band, "a", 1.0)
    fit = fit_dispersion_exponent(band, window, edge=e)
    try:
        s = scaling_exponent(band, window, edge=e)
    except DispersionError:
        s = None
    k_far = _branch_end(e)
    ks = np.linspace(k_far, e.k, 41)[1:-1]
    lams = a / e.curve(ks)
    ngs = 1.0 / np.abs(e.curve.d1(ks))
    dls = np.abs(lams - a / e.omega)
    sign = -1.0 if e.kind == "max" else 1.0
    curv = sign * e.curve.d2(ks)
    with np.errstate(divide="ignore"):
        meff = np.where(curv > 0, 1.0 / (curv * e.omega), np.nan)
    det = []
    for t in n_g_targets:
        try:
            det.append((t, detuning_at_group_index(band, t, edge=e)))
        except DispersionError:
            pass
    return DispersionSummary(
        omega_edge=e.omega,
        k_edge=e.k,
        wavelength_edge=a / e.omega,
        edge_kind=e.kind,
        exponent=fit.exponent,
        exponent_confidence=fit.confidence,
        coefficient=fit.coefficient,
        scaling=s,
        n_g_table=np.column_stack([lams, ngs]),
        m_eff_table=np.column_stack([dls, meff]),
        detuning_table=np.array(det).reshape(-1, 2),
        window=tuple(window),
    )
