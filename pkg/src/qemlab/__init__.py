"""Quantum error mitigation laboratory on simulated noisy backends.

Modules
-------
pauli      symbolic Pauli algebra and a small dense oracle
hcl        bundled 3-qubit molecular Hamiltonian, symmetries, reference data
circuits   gate IR, ansatz/GHZ/noise-amplification/purification builders
noisy_sim  density-matrix and trajectory execution engines
mitigation estimators: raw, readout inversion, symmetry filtering,
           zero-noise extrapolation, dual-state purification, tomography
stats      shot planning, bootstrap resampling, normality diagnostics
harness    experiment drivers and report writing (CLI in qemlab.cli)
"""

__version__ = "0.1.0"
