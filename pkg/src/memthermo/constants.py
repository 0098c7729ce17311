"""Physical constants and global operating bounds.

Temperatures are kelvin, resistances ohm, energies eV, voltages volt
throughout the package.
"""

# Boltzmann constant in eV/K. Fixed; never a configuration knob.
K_B_EV = 8.617333262e-5

# Reference temperature: all device state is expressed as resistance at
# this temperature under the standard read-out voltage.
T_REF = 300.0

# Chamber operating window.
T_MIN = 300.0
T_MAX = 360.0

# Standard (non-perturbing) read-out amplitude.
V_READ = 0.2

# Hard resistance bounds. They bracket the observed 8 kOhm - 3 MOhm device
# range with margin and keep interpolation tables and root finds bounded.
R_FLOOR = 1e3
R_CEILING = 30e6
