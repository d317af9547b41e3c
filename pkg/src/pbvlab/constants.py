"""Physical constants used throughout, in the package's working units.

Energies are eV, lengths nm, times ns, temperatures K unless noted.
"""

# eV <-> nm conversion: lambda[nm] = EV_NM / E[eV]
EV_NM = 1239.842

# Boltzmann constant, eV/K
KB_EV_PER_K = 8.617333e-5

# speed of light, nm*THz (= nm/ns * 1e-3 ...): c = 299792.458 nm*THz
C_NM_THZ = 299792.458

# Planck constant, eV/THz (h*1 THz in eV)
H_EV_PER_THZ = 4.135667696e-3

# Bohr radius, nm
A0_NM = 0.0529177

# Coulomb constant e^2/(4 pi eps0), eV*nm
E2_EV_NM = 1.4399645
