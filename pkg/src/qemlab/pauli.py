"""Pauli string algebra and a small dense-matrix oracle.

Strings are labels over {I, X, Y, Z}. Character 0 acts on qubit 0, which is
also the most significant bit of computational-basis indices, so the dense
matrix of a label is the Kronecker product of its characters read left to
right. Everything here is exact symbolic algebra except the ``to_dense`` /
``ground_state`` / ``expectation`` oracle, which is deliberately naive and
guarded to small qubit counts.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "PauliString",
    "PauliSum",
    "commutes",
    "commutes_with_sum",
    "to_dense",
    "ground_state",
    "expectation",
    "load_hamiltonian",
    "dump_hamiltonian",
]

_VALID = frozenset("IXYZ")

# Single-qubit products a*b -> (result letter, power of i in the phase).
_MUL = {
    ("I", "I"): ("I", 0), ("I", "X"): ("X", 0), ("I", "Y"): ("Y", 0), ("I", "Z"): ("Z", 0),
    ("X", "I"): ("X", 0), ("Y", "I"): ("Y", 0), ("Z", "I"): ("Z", 0),
    ("X", "X"): ("I", 0), ("Y", "Y"): ("I", 0), ("Z", "Z"): ("I", 0),
    ("X", "Y"): ("Z", 1), ("Y", "X"): ("Z", 3),
    ("Y", "Z"): ("X", 1), ("Z", "Y"): ("X", 3),
    ("Z", "X"): ("Y", 1), ("X", "Z"): ("Y", 3),
}

_PAULI_MATS = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}

DENSE_QUBIT_LIMIT = 12


@dataclass(frozen=True)
class PauliString:
    """An n-qubit Pauli operator with unit coefficient.

    Parameters
    ----------
    label:
        String over I/X/Y/Z; ``label[k]`` acts on qubit k.
    """

    label: str

    def __post_init__(self) -> None:
        bad = set(self.label) - _VALID
        if bad:
            raise ValueError(f"invalid characters in Pauli label: {sorted(bad)!r}")
        if not self.label:
            raise ValueError("empty Pauli label")

    @property
    def n_qubits(self) -> int:
        return len(self.label)

    @cached_property
    def support(self) -> tuple[int, ...]:
        """Qubits on which the operator acts nontrivially."""
        return tuple(k for k, c in enumerate(self.label) if c != "I")

    @property
    def weight(self) -> int:
        return len(self.support)

    @property
    def is_identity(self) -> bool:
        return not self.support

    @property
    def is_diagonal(self) -> bool:
        """True when the operator is diagonal in the computational basis."""
        return all(c in "IZ" for c in self.label)

    def mul(self, other: "PauliString") -> tuple[int, "PauliString"]:
        """Return (k, R) with self * other = i**k * R."""
        _check_lengths(self, other)
        phase = 0
        out = []
        for a, b in zip(self.label, other.label):
            c, k = _MUL[(a, b)]
            out.append(c)
            phase += k
        return phase % 4, PauliString("".join(out))

    def sign_on(self, bits: str) -> int:
        """Eigenvalue sign of an outcome string measured in this operator's basis.

        ``bits[k]`` is the outcome of qubit k after the basis change that
        diagonalises this operator; qubits outside the support are ignored.
        """
        if len(bits) != self.n_qubits:
            raise ValueError("bitstring length does not match qubit count")
        s = 1
        for k in self.support:
            s = -s if bits[k] == "1" else s
        return s

    def __str__(self) -> str:
        return self.label


@dataclass(frozen=True)
class PauliSum:
    """Real linear combination of Pauli strings on a fixed register.

    Terms are stored in insertion order; labels are unique.
    """

    n_qubits: int
    terms: tuple[tuple[PauliString, float], ...]

    def __post_init__(self) -> None:
        seen = set()
        for p, c in self.terms:
            if p.n_qubits != self.n_qubits:
                raise ValueError(
                    f"term {p.label} has {p.n_qubits} qubits, sum has {self.n_qubits}"
                )
            if p.label in seen:
                raise ValueError(f"duplicate term {p.label}")
            if not np.isfinite(c):
                raise ValueError(f"non-finite coefficient for {p.label}")
            seen.add(p.label)

    @classmethod
    def from_terms(cls, pairs: Iterable[tuple[str | PauliString, float]]) -> "PauliSum":
        terms = []
        n = None
        for p, c in pairs:
            ps = p if isinstance(p, PauliString) else PauliString(p)
            if n is None:
                n = ps.n_qubits
            terms.append((ps, float(c)))
        if n is None:
            raise ValueError("empty term list")
        return cls(n_qubits=n, terms=tuple(terms))

    def coeff(self, label: str) -> float:
        for p, c in self.terms:
            if p.label == label:
                return c
        return 0.0

    @property
    def identity_coeff(self) -> float:
        return self.coeff("I" * self.n_qubits)

    def non_identity_terms(self) -> tuple[tuple[PauliString, float], ...]:
        return tuple((p, c) for p, c in self.terms if not p.is_identity)

    @property
    def is_diagonal(self) -> bool:
        return all(p.is_diagonal for p, _ in self.terms)

    def diag_value(self, bits: str) -> float:
        """Evaluate a computational-basis-diagonal sum on one bitstring."""
        if not self.is_diagonal:
            raise ValueError("sum contains off-diagonal terms")
        return sum(c * p.sign_on(bits) for p, c in self.terms)

    def __len__(self) -> int:
        return len(self.terms)


def _check_lengths(p: PauliString, q: PauliString) -> None:
    if p.n_qubits != q.n_qubits:
        raise ValueError(
            f"inconsistent lengths: {p.label} ({p.n_qubits}) vs {q.label} ({q.n_qubits})"
        )


def commutes(p: PauliString, q: PauliString) -> bool:
    """True when [P, Q] = 0.

    Two Pauli strings commute iff they anticommute on an even number of
    qubit positions.

    >>> commutes(PauliString("XZI"), PauliString("ZXI"))
    True
    >>> commutes(PauliString("XII"), PauliString("ZII"))
    False
    """
    _check_lengths(p, q)
    odd = 0
    for a, b in zip(p.label, q.label):
        if a != "I" and b != "I" and a != b:
            odd ^= 1
    return odd == 0


def commutes_with_sum(a: PauliSum, b: PauliSum, tol: float = 1e-12) -> bool:
    """True when [A, B] = 0 up to coefficient cancellation.

    The commutator is accumulated symbolically: anticommuting term pairs
    contribute 2 c_a c_b i**k R and cancelling contributions are detected by
    coefficient magnitude relative to the input scale.
    """
    acc: dict[str, complex] = {}
    for p, ca in a.terms:
        for q, cb in b.terms:
            if commutes(p, q):
                continue
            k, r = p.mul(q)
            acc[r.label] = acc.get(r.label, 0j) + 2.0 * ca * cb * (1j**k)
    if not acc:
        return True
    scale = max(
        (abs(ca * cb) for _, ca in a.terms for _, cb in b.terms), default=1.0
    )
    scale = max(scale, 1.0)
    return max(abs(v) for v in acc.values()) <= tol * scale


def _dense_string(p: PauliString) -> np.ndarray:
    m = _PAULI_MATS[p.label[0]]
    for c in p.label[1:]:
        m = np.kron(m, _PAULI_MATS[c])
    return m


def to_dense(op: PauliString | PauliSum) -> np.ndarray:
    """Dense 2^n x 2^n matrix of a string or sum. Guarded to small n."""
    n = op.n_qubits
    if n > DENSE_QUBIT_LIMIT:
        raise ValueError(f"dense oracle limited to {DENSE_QUBIT_LIMIT} qubits, got {n}")
    if isinstance(op, PauliString):
        return _dense_string(op)
    out = np.zeros((2**n, 2**n), dtype=complex)
    for p, c in op.terms:
        out += c * _dense_string(p)
    return out


def ground_state(op: PauliSum | np.ndarray) -> tuple[float, np.ndarray]:
    """Lowest eigenvalue and eigenvector of a Hermitian operator.

    Returns the eigenvector with a real, nonnegative entry of largest
    magnitude so that the phase convention is reproducible.
    """
    h = to_dense(op) if isinstance(op, PauliSum) else np.asarray(op)
    vals, vecs = np.linalg.eigh(h)
    vec = vecs[:, 0]
    k = int(np.argmax(np.abs(vec)))
    phase = vec[k] / abs(vec[k])
    vec = vec / phase
    return float(vals[0]), vec


def expectation(op: PauliString | PauliSum, state: np.ndarray) -> float:
    """<psi| op |psi> for a normalised pure state."""
    state = np.asarray(state, dtype=complex)
    m = to_dense(op)
    val = np.vdot(state, m @ state)
    return float(val.real)


def load_hamiltonian(path) -> PauliSum:
    """Read a Pauli-sum JSON file.

    Expected schema: ``{"n_qubits": int, "terms": [{"pauli": str,
    "coeff": float}, ...]}``. Extra top-level keys (version, description)
    are ignored. Labels are validated for length and character set.
    """
    with open(path) as f:
        doc = json.load(f)
    return _sum_from_doc(doc)


def _sum_from_doc(doc: dict) -> PauliSum:
    try:
        n = int(doc["n_qubits"])
        raw = doc["terms"]
    except KeyError as e:
        raise ValueError(f"hamiltonian file missing key {e}") from e
    terms = []
    for entry in raw:
        label = entry["pauli"]
        coeff = float(entry["coeff"])
        if len(label) != n:
            raise ValueError(
                f"inconsistent lengths: term {label!r} on a {n}-qubit register"
            )
        terms.append((PauliString(label), coeff))
    return PauliSum(n_qubits=n, terms=tuple(terms))


def dump_hamiltonian(h: PauliSum, path) -> None:
    doc = {
        "n_qubits": h.n_qubits,
        "terms": [{"pauli": p.label, "coeff": c} for p, c in h.terms],
    }
    with open(path, "w") as f:
        json.dump(doc, f, indent=2, sort_keys=True)
        f.write("\n")
