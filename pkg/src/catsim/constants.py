"""Physical constants and apparatus defaults.

Constants come from CODATA 2018 via :mod:`scipy.constants`. Frequencies
stored here are angular (rad/s).
"""

import math

from scipy import constants as _c

HBAR = _c.hbar
AMU = _c.atomic_mass

#: Atomic mass of 111Cd in unified atomic mass units.
CD111_MASS_AMU = 110.9041838
CD111_MASS = CD111_MASS_AMU * AMU

TWO_PI = 2.0 * math.pi

# Trap and qubit defaults for the single-ion apparatus.
OMEGA_Z = TWO_PI * 3.55e6
OMEGA_HF = TWO_PI * 14.53e9
NBAR_DOPPLER = 6.0
NBAR_SIDEBAND = 0.05
HEATING_RATE = 0.2e3  # quanta per second (0.2 per ms)

# Documentation-only values; no implemented formula consumes them.
OMEGA_X = TWO_PI * 8.0e6
OMEGA_Y = TWO_PI * 9.0e6
RAMAN_DETUNING = TWO_PI * 220e9
LINEWIDTH = TWO_PI * 47e6
WAVELENGTH = 214.5e-9

# Interferometry timing.
PI_HALF_TIME = 13e-6
SHOT_PERIOD = 2e-3  # ~200 ms per 100-shot point
STARK_SHIFT = TWO_PI * 20e3
