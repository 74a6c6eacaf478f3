"""Regenerate the default Rb ground-state scalar polarizability table.

Two-level sum over the D1 and D2 lines.  Writes
src/combwg/data/rb_ground_polarizability.csv (wavelength in nm, SI units).
"""

from pathlib import Path

import numpy as np

from combwg import constants as const

# upper-state lifetimes (s)
D1_LIFETIME = 27.70e-9
D2_LIFETIME = 26.24e-9

LINES = [
    # (wavelength nm, Einstein A, (2J'+1)/(2J+1))
    (const.RB_D1_WAVELENGTH_NM, 1 / D1_LIFETIME, 1.0),
    (const.RB_D2_WAVELENGTH_NM, 1 / D2_LIFETIME, 2.0),
]

BLOCKS = [(600.0, 775.0), (800.0, 1100.0)]
STEP = 0.5


def polarizability(wavelength_nm):
    w = 2 * np.pi * const.C / (np.asarray(wavelength_nm) * const.NM)
    alpha = np.zeros_like(w)
    for lam, A, g in LINES:
        wk = 2 * np.pi * const.C / (lam * const.NM)
        alpha += 2 * np.pi * const.EPS0 * const.C**3 * g * A / (wk**2 * (wk**2 - w**2))
    return alpha


def main():
    out = Path(__file__).resolve().parents[1] / "src" / "combwg" / "data" / "rb_ground_polarizability.csv"
    with out.open("w", encoding="utf-8") as fh:
        fh.write("# Rb 5S1/2 scalar polarizability, D1+D2 sum over states\n")
        fh.write("# blocks are separated by a gap around the D lines; values are not interpolated across it\n")
        fh.write("wavelength_nm,alpha_si\n")
        for lo, hi in BLOCKS:
            lams = np.arange(lo, hi + STEP / 2, STEP)
            for lam, a in zip(lams, polarizability(lams)):
                fh.write(f"{lam:.2f},{a:.9e}\n")
    print(f"wrote {out}")
    for lam in (736.0, 837.0):
        print(lam, polarizability(lam), polarizability(lam) / const.AU_POLARIZABILITY, "a.u.")


if __name__ == "__main__":
    main()
