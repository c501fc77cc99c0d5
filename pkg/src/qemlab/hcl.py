"""Bundled HCl problem data: Hamiltonian, symmetries, reference values.

The 3-qubit Hamiltonian is a frozen-core STO-3G HCl operator reduced by
tapering plus a contextual-subspace projection; it ships as a versioned JSON
data file. The reduction maps 18 electrons in 20 spin orbitals down to a
3-qubit register, leaving one effective particle, which is why the reduced
number operator carries a large identity offset.
"""

from __future__ import annotations

from importlib import resources

from .pauli import PauliString, PauliSum, load_hamiltonian

__all__ = [
    "hamiltonian",
    "REFERENCE_ENERGY",
    "REDUCTION_ERROR_HA",
    "OPTIMAL_ANGLES",
    "number_operator",
    "spin_z_operator",
    "symmetry_operators",
    "tapering_generators",
    "N_ELECTRONS",
    "ALLOWED_SPIN_VALUES",
]

# FCI ground-state energy of the full 20-qubit problem, hartree. The 3-qubit
# reduction introduces a known truncation error against this value.
REFERENCE_ENERGY = -455.157
REDUCTION_ERROR_HA = 0.837e-3

# Hardware-calibrated optimum of the 6-parameter ansatz (native rotation
# frame, see circuits.build_ansatz).
OPTIMAL_ANGLES = (
    -0.06492667,
    2.89836152,
    0.26373807,
    -0.06709062,
    0.01006833,
    -0.26585046,
)

N_ELECTRONS = 18
# Singlet configuration: the only admissible spin projection is zero.
ALLOWED_SPIN_VALUES = (0.0,)


def hamiltonian() -> PauliSum:
    """Load the bundled 3-qubit HCl Hamiltonian."""
    with resources.as_file(resources.files("qemlab.data") / "hcl_3q.json") as p:
        return load_hamiltonian(p)


def number_operator() -> PauliSum:
    """Particle-number operator projected into the 3-qubit subspace.

    Eigenvalue on a valid physical state equals the electron count (18);
    seventeen particles sit in the projected-out sector, hence the identity
    offset.
    """
    return PauliSum.from_terms(
        [
            ("III", 17.0),
            ("IIZ", -1.0),
            ("IZI", -0.5),
            ("IZZ", -0.5),
            ("ZII", -0.5),
            ("ZIZ", -0.5),
        ]
    )


def spin_z_operator() -> PauliSum:
    """Spin-projection operator in the 3-qubit subspace."""
    return PauliSum.from_terms(
        [
            ("IZI", 0.25),
            ("IZZ", 0.25),
            ("ZII", -0.25),
            ("ZIZ", -0.25),
        ]
    )


def symmetry_operators() -> tuple[tuple[PauliSum, frozenset[float]], ...]:
    """(operator, allowed eigenvalues) pairs used for outcome post-selection."""
    return (
        (number_operator(), frozenset({float(N_ELECTRONS)})),
        (spin_z_operator(), frozenset(ALLOWED_SPIN_VALUES)),
    )


def tapering_generators() -> tuple[PauliString, ...]:
    """Z2 symmetry generators of the full 20-qubit problem.

    Spin-up/down parities on the alternating orbital layout plus the two
    point-group symmetries. All four are diagonal strings and pairwise
    commute.
    """
    return (
        PauliString("ZIZIZIZIZIZIZIZIZIZI"),
        PauliString("IZIZIZIZIZIZIZIZIZIZ"),
        PauliString("IIIIIIIIZZIIIIIIZZII"),
        PauliString("IIIIIIZZZZIIIIZZZZII"),
    )
