"""Physical constants (CODATA 2018 via scipy) and unit helpers.

Every other module takes its constants from here.
"""

from scipy import constants as _c

C = _c.c
EPS0 = _c.epsilon_0
MU0 = _c.mu_0
HBAR = _c.hbar
KB = _c.k
Z0 = MU0 * C

NM = 1e-9
MW = 1e-3
MK = 1e-3

# atomic unit of electric polarizability (C m^2 / V)
AU_POLARIZABILITY = _c.physical_constants["atomic unit of electric polarizability"][0]

# Rb 5S1/2 -> 5P3/2 transition used throughout
RB_D2_WAVELENGTH_NM = 780.241209686
RB_D1_WAVELENGTH_NM = 794.978851156

# Default membrane thickness for the 2D -> 3D power/area bridge
MEMBRANE_THICKNESS_NM = 150.0


def joule_to_mk(energy_j):
    """Energy (J) expressed as a temperature in millikelvin."""
    return energy_j / KB / MK

AMU = _c.physical_constants["atomic mass constant"][0]
RB87_MASS = 86.909180527 * AMU

# Casimir-Polder coefficient of Rb at a dielectric surface (mK nm^3)
RB_C3_MK_NM3 = 6.7e4
