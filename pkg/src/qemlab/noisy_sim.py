"""Noisy circuit execution: density-matrix engine plus a trajectory sampler.

The density engine evolves the full 2^n x 2^n state under per-gate
depolarizing (and optional amplitude-damping) channels and samples measured
bitstrings with classical readout flips. It is exact but guarded to ten
qubits. The trajectory engine handles larger registers (GHZ chains) by
Monte-Carlo insertion of Pauli errors; for Clifford circuits the errors are
propagated symplectically to the end of the circuit, which makes 2^15 shots
on 21 qubits cheap. Both engines implement the same noise semantics: with
probability p after each gate, a uniformly random non-identity Pauli acts on
that gate's qubits; readout flips each measured bit independently.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .circuits import Circuit, Gate, decompose_swaps

__all__ = [
    "NoiseModel",
    "MeasurementSet",
    "DensityMatrix",
    "run_density",
    "evolve_density",
    "sample_from_density",
    "run_trajectories",
    "ghz_fidelity",
    "statevector",
    "unitary",
    "gate_matrix",
    "derive_rng",
    "DENSITY_QUBIT_LIMIT",
]

DENSITY_QUBIT_LIMIT = 10

_SQ = 1 / math.sqrt(2)
_H = np.array([[_SQ, _SQ], [_SQ, -_SQ]], dtype=complex)
_S = np.diag([1, 1j]).astype(complex)
_X = np.array([[0, 1], [1, 0]], dtype=complex)
_SX = 0.5 * np.array([[1 + 1j, 1 - 1j], [1 - 1j, 1 + 1j]], dtype=complex)
_CNOT = np.array(
    [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex
)
_SWAP = np.array(
    [[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=complex
)

_PAULI_1Q = {
    "X": _X,
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.diag([1, -1]).astype(complex),
}

_CLIFFORD_KINDS = frozenset(
    {"H", "S", "Sdg", "X", "SqrtX", "SqrtXdg", "CNOT", "SWAP", "Barrier"}
)


def gate_matrix(g: Gate) -> np.ndarray:
    """Dense unitary of a single gate (identity-free, on its own qubits)."""
    k = g.kind
    if k == "H":
        return _H
    if k == "S":
        return _S
    if k == "Sdg":
        return _S.conj()
    if k == "X":
        return _X
    if k == "SqrtX":
        return _SX
    if k == "SqrtXdg":
        return _SX.conj().T
    if k == "Rz":
        return np.diag([np.exp(-0.5j * g.angle), np.exp(0.5j * g.angle)])
    if k == "Ry":
        c, s = math.cos(g.angle / 2), math.sin(g.angle / 2)
        return np.array([[c, -s], [s, c]], dtype=complex)
    if k == "CNOT":
        return _CNOT
    if k == "SWAP":
        return _SWAP
    if k == "CPhase":
        return np.diag([1, 1, 1, np.exp(1j * g.angle)]).astype(complex)
    raise ValueError(f"no matrix for gate kind {k!r}")


def derive_rng(seed, *tags) -> np.random.Generator:
    """Independent RNG stream named by hashable tags.

    The stream is a deterministic function of (seed, tags): tags are hashed
    into SeedSequence entropy, so per-term/per-basis/per-lambda streams never
    collide and never depend on execution order.
    """
    text = "\x1f".join(str(t) for t in tags)
    digest = hashlib.sha256(text.encode()).digest()
    words = [int.from_bytes(digest[i : i + 4], "little") for i in range(0, 16, 4)]
    if seed is None:
        root = 0
    elif isinstance(seed, (int, np.integer)):
        root = int(seed)
    elif isinstance(seed, np.random.Generator):
        # a Generator repr is not unique, so hashing it would silently
        # collapse distinct streams into one
        raise TypeError("derive_rng needs a hashable seed, not a Generator")
    else:
        root = int.from_bytes(
            hashlib.sha256(repr(seed).encode()).digest()[:4], "little"
        )
    return np.random.default_rng(np.random.SeedSequence([root, *words]))


@dataclass(frozen=True)
class NoiseModel:
    """Stochastic error model attached to circuit execution.

    p_dep_1q / p_dep_2q: depolarizing probability after each one-qubit gate
    and each CNOT (a SWAP costs three CNOTs' worth). readout_flip: scalar or
    per-qubit bit-flip probability applied classically to sampled outcomes.
    t1_us enables amplitude damping in the density engine, with per-gate
    durations in nanoseconds taken from gate_ns (falling back to 35 ns for
    one-qubit gates and 400 ns for two-qubit gates).
    """

    p_dep_1q: float = 0.0
    p_dep_2q: float = 0.0
    readout_flip: float | tuple[float, ...] = 0.0
    t1_us: float | None = None
    gate_ns: tuple[tuple[str, float], ...] = ()

    def __post_init__(self) -> None:
        if isinstance(self.readout_flip, (list, np.ndarray)):
            object.__setattr__(
                self, "readout_flip", tuple(float(p) for p in self.readout_flip)
            )
        if isinstance(self.gate_ns, dict):
            object.__setattr__(self, "gate_ns", tuple(sorted(self.gate_ns.items())))
        flips = (
            self.readout_flip
            if isinstance(self.readout_flip, tuple)
            else (self.readout_flip,)
        )
        for p in (self.p_dep_1q, self.p_dep_2q, *flips):
            if not (0.0 <= p <= 1.0):
                raise ValueError(f"probability {p} outside [0, 1]")
        if self.t1_us is not None and self.t1_us <= 0:
            raise ValueError("T1 must be positive")

    @classmethod
    def noiseless(cls) -> "NoiseModel":
        return cls()

    @classmethod
    def falcon_like(cls, t1_us: float | None = None) -> "NoiseModel":
        """Error rates rounded from a representative 27-qubit device."""
        return cls(
            p_dep_1q=2.2e-4, p_dep_2q=7e-3, readout_flip=1.4e-2, t1_us=t1_us
        )

    @property
    def is_noiseless(self) -> bool:
        flips = (
            self.readout_flip
            if isinstance(self.readout_flip, tuple)
            else (self.readout_flip,)
        )
        return (
            self.p_dep_1q == 0.0
            and self.p_dep_2q == 0.0
            and self.t1_us is None
            and all(f == 0.0 for f in flips)
        )

    def readout_p(self, qubit: int) -> float:
        if isinstance(self.readout_flip, tuple):
            if qubit >= len(self.readout_flip):
                raise ValueError(f"no readout error entry for qubit {qubit}")
            return self.readout_flip[qubit]
        return float(self.readout_flip)

    def duration_ns(self, g: Gate) -> float:
        table = dict(self.gate_ns)
        if g.kind in table:
            return table[g.kind]
        return 400.0 if len(g.qubits) == 2 else 35.0

    def to_json(self) -> str:
        doc = {
            "p_dep_1q": self.p_dep_1q,
            "p_dep_2q": self.p_dep_2q,
            "readout_flip": list(self.readout_flip)
            if isinstance(self.readout_flip, tuple)
            else self.readout_flip,
            "t1_us": self.t1_us,
            "gate_ns": dict(self.gate_ns),
        }
        return json.dumps(doc, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "NoiseModel":
        doc = json.loads(text)
        flip = doc.get("readout_flip", 0.0)
        return cls(
            p_dep_1q=doc.get("p_dep_1q", 0.0),
            p_dep_2q=doc.get("p_dep_2q", 0.0),
            readout_flip=tuple(flip) if isinstance(flip, list) else flip,
            t1_us=doc.get("t1_us"),
            gate_ns=tuple(sorted(doc.get("gate_ns", {}).items())),
        )


@dataclass(frozen=True)
class MeasurementSet:
    """Counted measurement outcomes over the measured qubits."""

    n_qubits: int
    counts: dict[str, int]
    shots: int

    def __post_init__(self) -> None:
        total = 0
        for b, c in self.counts.items():
            if len(b) != self.n_qubits or set(b) - {"0", "1"}:
                raise ValueError(f"malformed bitstring key {b!r}")
            if c < 0:
                raise ValueError("negative count")
            total += c
        if total != self.shots:
            raise ValueError(f"counts sum {total} != shots {self.shots}")

    def frequency(self, bits: str) -> float:
        if self.shots == 0:
            raise ValueError("empty measurement set")
        return self.counts.get(bits, 0) / self.shots

    def distribution(self) -> dict[str, float]:
        if self.shots == 0:
            raise ValueError("empty measurement set")
        return {b: c / self.shots for b, c in self.counts.items()}

    def merge(self, other: "MeasurementSet") -> "MeasurementSet":
        if other.n_qubits != self.n_qubits:
            raise ValueError("qubit count mismatch in merge")
        counts = dict(self.counts)
        for b, c in other.counts.items():
            counts[b] = counts.get(b, 0) + c
        return MeasurementSet(self.n_qubits, counts, self.shots + other.shots)

    __add__ = merge

    def to_json(self) -> str:
        return json.dumps(
            {"n_qubits": self.n_qubits, "shots": self.shots, "counts": self.counts},
            indent=2,
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, text: str) -> "MeasurementSet":
        doc = json.loads(text)
        return cls(
            n_qubits=int(doc["n_qubits"]),
            counts={str(k): int(v) for k, v in doc["counts"].items()},
            shots=int(doc["shots"]),
        )

    def to_csv(self) -> str:
        lines = ["bitstring,count"]
        for b in sorted(self.counts):
            lines.append(f"{b},{self.counts[b]}")
        return "\n".join(lines) + "\n"


@dataclass
class DensityMatrix:
    """Dense mixed state with physicality checks."""

    matrix: np.ndarray

    @property
    def n_qubits(self) -> int:
        return int(round(math.log2(self.matrix.shape[0])))

    def validate(self, atol: float = 1e-10) -> None:
        m = self.matrix
        if abs(np.trace(m) - 1.0) > atol:
            raise ValueError(f"trace deviates from 1 by {abs(np.trace(m)-1.0):.2e}")
        if np.max(np.abs(m - m.conj().T)) > atol:
            raise ValueError("density matrix not Hermitian")
        ev = np.linalg.eigvalsh(m)
        if ev.min() < -atol:
            raise ValueError(f"negative eigenvalue {ev.min():.2e}")

    def probabilities(self) -> np.ndarray:
        p = np.real(np.diag(self.matrix)).copy()
        p[p < 0] = 0.0
        s = p.sum()
        if not (0.99 < s < 1.01):
            raise ValueError(f"diagonal mass {s} far from 1")
        return p / s


# ---------------------------------------------------------------------------
# Dense helpers


def _apply_unitary_vec(psi: np.ndarray, u: np.ndarray, qubits: tuple[int, ...], n: int):
    """Apply a small unitary to chosen qubits of a statevector tensor."""
    k = len(qubits)
    ut = u.reshape((2,) * (2 * k))
    psi = np.tensordot(ut, psi, axes=(list(range(k, 2 * k)), list(qubits)))
    return np.moveaxis(psi, list(range(k)), list(qubits))


def statevector(c: Circuit, init: np.ndarray | None = None) -> np.ndarray:
    """Noiseless final state of a circuit, as a flat 2^n vector."""
    n = c.n_qubits
    if init is None:
        psi = np.zeros((2,) * n, dtype=complex)
        psi[(0,) * n] = 1.0
    else:
        psi = np.asarray(init, dtype=complex).reshape((2,) * n).copy()
    for g in c.gates:
        if g.kind == "Barrier":
            continue
        psi = _apply_unitary_vec(psi, gate_matrix(g), g.qubits, n)
    return psi.reshape(-1)

def unitary(c: Circuit) -> np.ndarray:
    """Dense unitary of a circuit (small registers only)."""
    n = c.n_qubits
    if n > DENSITY_QUBIT_LIMIT:
        raise ValueError(f"unitary oracle limited to {DENSITY_QUBIT_LIMIT} qubits")
    u = np.eye(2**n, dtype=complex)
    cols = []
    for j in range(2**n):
        cols.append(statevector(c, init=u[:, j]))
    return np.stack(cols, axis=1)


def _apply_unitary_rho(rho: np.ndarray, u: np.ndarray, qubits, n: int) -> np.ndarray:
    k = len(qubits)
    ut = u.reshape((2,) * (2 * k))
    row_axes = list(qubits)
    col_axes = [n + q for q in qubits]
    rho = np.tensordot(ut, rho, axes=(list(range(k, 2 * k)), row_axes))
    rho = np.moveaxis(rho, list(range(k)), row_axes)
    rho = np.tensordot(ut.conj(), rho, axes=(list(range(k, 2 * k)), col_axes))
    return np.moveaxis(rho, list(range(k)), col_axes)


def _twirl(rho: np.ndarray, qubits, n: int) -> np.ndarray:
    """Replace the state on `qubits` with the maximally mixed state."""
    out = rho
    for q in qubits:
        traced = np.trace(out, axis1=q, axis2=n + q)
        out = np.multiply.outer(np.eye(2, dtype=complex) / 2.0, traced)
        # outer placed the new axes in front: row axis 0 -> q, col axis 1 -> n+q
        out = np.moveaxis(out, (0, 1), (q, n + q))
    return out


def _depolarize(rho: np.ndarray, p: float, qubits, n: int) -> np.ndarray:
    """Uniform stochastic-Pauli channel on k qubits.

    (1-p) rho + p/(4^k - 1) sum_{P != I} P rho P, expressed through the
    twirl identity sum_P P rho P = 4^k T(rho).
    """
    if p == 0.0:
        return rho
    k = len(qubits)
    d2 = 4**k
    f = p * d2 / (d2 - 1)
    return (1.0 - f) * rho + f * _twirl(rho, qubits, n)


def _damp(rho: np.ndarray, gamma: float, qubits, n: int) -> np.ndarray:
    if gamma <= 0.0:
        return rho
    k0 = np.array([[1, 0], [0, math.sqrt(1 - gamma)]], dtype=complex)
    k1 = np.array([[0, math.sqrt(gamma)], [0, 0]], dtype=complex)
    for q in qubits:
        a = _apply_unitary_rho(rho, k0, (q,), n)
        b = _apply_unitary_rho(rho, k1, (q,), n)
        rho = a + b
    return rho


def _expanded_gates(c: Circuit, noise: NoiseModel) -> tuple[Gate, ...]:
    # SWAPs cost three CNOTs once noise is attached; stay atomic otherwise.
    if noise.is_noiseless:
        return c.gates
    return decompose_swaps(c).gates


def evolve_density(
    c: Circuit, noise: NoiseModel, validate: bool = False
) -> DensityMatrix:
    """Run the gate+channel sequence and return the final mixed state."""
    n = c.n_qubits
    if n > DENSITY_QUBIT_LIMIT:
        raise ValueError(
            f"density engine limited to {DENSITY_QUBIT_LIMIT} qubits, got {n}"
        )
    rho = np.zeros((2,) * (2 * n), dtype=complex)
    rho[(0,) * (2 * n)] = 1.0
    for g in _expanded_gates(c, noise):
        if g.kind == "Barrier":
            continue
        rho = _apply_unitary_rho(rho, gate_matrix(g), g.qubits, n)
        p = noise.p_dep_2q if len(g.qubits) == 2 else noise.p_dep_1q
        rho = _depolarize(rho, p, g.qubits, n)
        if noise.t1_us is not None:
            gamma = 1.0 - math.exp(-noise.duration_ns(g) * 1e-3 / noise.t1_us)
            rho = _damp(rho, gamma, g.qubits, n)
        if validate:
            DensityMatrix(rho.reshape(2**n, 2**n)).validate(atol=1e-9)
    return DensityMatrix(rho.reshape(2**n, 2**n))


def _basis_rotation_gates(basis: str, measured: Sequence[int]) -> list[Gate]:
    gates: list[Gate] = []
    mset = set(measured)
    for q, ch in enumerate(basis):
        if q not in mset and ch in "XY":
            raise ValueError(f"basis rotation requested on unmeasured qubit {q}")
        if ch == "X":
            gates.append(Gate("H", (q,)))
        elif ch == "Y":
            gates += [Gate("Sdg", (q,)), Gate("H", (q,))]
        elif ch not in "IZ":
            raise ValueError(f"invalid basis character {ch!r}")
    return gates


def _flip_and_count(
    samples: np.ndarray, n: int, measured: Sequence[int], noise: NoiseModel, rng
) -> MeasurementSet:
    """Apply classical readout flips, marginalise, and tally."""
    shots = samples.shape[0]
    for q in measured:
        pq = noise.readout_p(q)
        if pq > 0.0:
            flips = rng.random(shots) < pq
            samples = samples ^ (flips.astype(np.int64) << (n - 1 - q))
    # pack measured bits, in measured order, into small integers
    packed = np.zeros(shots, dtype=np.int64)
    for pos, q in enumerate(measured):
        bit = (samples >> (n - 1 - q)) & 1
        packed |= bit << (len(measured) - 1 - pos)
    vals, cnt = np.unique(packed, return_counts=True)
    width = len(measured)
    counts = {format(int(v), f"0{width}b"): int(k) for v, k in zip(vals, cnt)}
    return MeasurementSet(n_qubits=width, counts=counts, shots=int(shots))


def sample_from_density(
    rho: DensityMatrix,
    noise: NoiseModel,
    shots: int,
    seed,
    basis: str | None = None,
    measured_qubits: Sequence[int] | None = None,
) -> MeasurementSet:
    """Sample bitstrings from a prepared state.

    Pre-measurement basis rotations (X -> H, Y -> Sdg,H) are applied
    noiselessly; they define the measurement rather than extend the circuit.
    """
    n = rho.n_qubits
    measured = tuple(measured_qubits) if measured_qubits else tuple(range(n))
    mat = rho.matrix.reshape((2,) * (2 * n))
    if basis is not None:
        if len(basis) != n:
            raise ValueError(f"basis length {len(basis)} != {n} qubits")
        for g in _basis_rotation_gates(basis, measured):
            mat = _apply_unitary_rho(mat, gate_matrix(g), g.qubits, n)
    probs = DensityMatrix(mat.reshape(2**n, 2**n)).probabilities()
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    edges = np.cumsum(probs)
    edges[-1] = 1.0
    samples = np.searchsorted(edges, rng.random(int(shots)), side="right")
    return _flip_and_count(samples.astype(np.int64), n, measured, noise, rng)


def run_density(
    c: Circuit,
    noise: NoiseModel,
    shots: int,
    seed,
    basis: str | None = None,
    validate: bool = False,
) -> MeasurementSet:
    """Evolve under noise, then measure. Deterministic for a given seed."""
    rho = evolve_density(c, noise, validate=validate)
    return sample_from_density(
        rho, noise, shots, seed, basis=basis, measured_qubits=c.measured_qubits
    )


# ---------------------------------------------------------------------------
# Trajectory engine

# Symplectic conjugation rules sending (x, z) bit pairs through a Clifford.
# Only the X component of the propagated error affects measured bitstrings.


def _propagate_mask(x: int, z: int, gates: Sequence[Gate], start: int, n: int):
    for g in gates[start:]:
        k = g.kind
        if k == "Barrier":
            continue
        if k == "CNOT":
            c, t = g.qubits
            bc, bt = n - 1 - c, n - 1 - t
            if (x >> bc) & 1:
                x ^= 1 << bt
            if (z >> bt) & 1:
                z ^= 1 << bc
        elif k == "SWAP":
            i, j = g.qubits
            bi, bj = n - 1 - i, n - 1 - j
            for m in ("x", "z"):
                v = x if m == "x" else z
                vi, vj = (v >> bi) & 1, (v >> bj) & 1
                if vi != vj:
                    v ^= (1 << bi) | (1 << bj)
                if m == "x":
                    x = v
                else:
                    z = v
        elif k == "H":
            b = n - 1 - g.qubits[0]
            xb, zb = (x >> b) & 1, (z >> b) & 1
            if xb != zb:
                x ^= 1 << b
                z ^= 1 << b
        elif k in ("S", "Sdg"):
            b = n - 1 - g.qubits[0]
            if (x >> b) & 1:
                z ^= 1 << b
        elif k in ("SqrtX", "SqrtXdg"):
            b = n - 1 - g.qubits[0]
            if (z >> b) & 1:
                x ^= 1 << b
        elif k == "X":
            pass
        else:  # pragma: no cover - guarded by caller
            raise ValueError(f"non-Clifford gate {k} in propagation")
    return x, z


_PAULI_BITS_1Q = ((1, 0), (1, 1), (0, 1))  # X, Y, Z


def _pauli_bits_2q(idx: int) -> tuple[int, int, int, int]:
    # idx in 1..15 over (I,X,Y,Z) x (I,X,Y,Z) skipping II
    a, b = divmod(idx, 4)
    table = ((0, 0), (1, 0), (1, 1), (0, 1))
    xa, za = table[a]
    xb, zb = table[b]
    return xa, za, xb, zb


def run_trajectories(
    c: Circuit, noise: NoiseModel, shots: int, seed
) -> MeasurementSet:
    """Monte-Carlo Pauli-error sampler, distribution-equivalent to the
    density engine for stochastic noise. Amplitude damping is not
    representable here and raises."""
    if noise.t1_us is not None:
        raise ValueError("trajectory engine does not support amplitude damping")
    n = c.n_qubits
    shots = int(shots)
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    gates = [g for g in _expanded_gates(c, noise)]
    noisy_sites = [
        (i, noise.p_dep_2q if len(g.qubits) == 2 else noise.p_dep_1q)
        for i, g in enumerate(gates)
        if g.kind != "Barrier"
        and (noise.p_dep_2q if len(g.qubits) == 2 else noise.p_dep_1q) > 0.0
    ]
    is_clifford = all(g.kind in _CLIFFORD_KINDS for g in gates)
    if is_clifford:
        psi = statevector(Circuit(n, tuple(gates)))
        probs = np.abs(psi) ** 2
        probs /= probs.sum()
        edges = np.cumsum(probs)
        edges[-1] = 1.0
        base = np.searchsorted(edges, rng.random(shots), side="right").astype(np.int64)
        xmask = np.zeros(shots, dtype=np.int64)
        for i, p in noisy_sites:
            hits = np.nonzero(rng.random(shots) < p)[0]
            if hits.size == 0:
                continue
            g = gates[i]
            if len(g.qubits) == 1:
                picks = rng.integers(0, 3, hits.size)
            else:
                picks = rng.integers(1, 16, hits.size)
            for shot, pick in zip(hits, picks):
                x = z = 0
                if len(g.qubits) == 1:
                    xb, zb = _PAULI_BITS_1Q[pick]
                    b = n - 1 - g.qubits[0]
                    x |= xb << b
                    z |= zb << b
                else:
                    xa, za, xb, zb = _pauli_bits_2q(int(pick))
                    ba, bb = n - 1 - g.qubits[0], n - 1 - g.qubits[1]
                    x |= (xa << ba) | (xb << bb)
                    z |= (za << ba) | (zb << bb)
                x, _ = _propagate_mask(x, z, gates, i + 1, n)
                xmask[shot] ^= x
        samples = base ^ xmask
        return _flip_and_count(samples, n, c.measured_qubits, noise, rng)

    # General path: group shots by their sampled error configuration and run
    # one statevector per distinct configuration.
    configs: dict[tuple, int] = {}
    per_shot: list[list[tuple[int, int]]] = [[] for _ in range(shots)]
    for i, p in noisy_sites:
        hits = np.nonzero(rng.random(shots) < p)[0]
        g = gates[i]
        if len(g.qubits) == 1:
            picks = rng.integers(0, 3, hits.size)
        else:
            picks = rng.integers(1, 16, hits.size)
        for shot, pick in zip(hits, picks):
            per_shot[shot].append((i, int(pick)))
    for shot in range(shots):
        key = tuple(per_shot[shot])
        configs[key] = configs.get(key, 0) + 1
    out: MeasurementSet | None = None
    for key, count in sorted(configs.items()):
        inject: dict[int, list[Gate]] = {}
        for gate_idx, pick in key:
            g = gates[gate_idx]
            extra: list[Gate] = []
            if len(g.qubits) == 1:
                xb, zb = _PAULI_BITS_1Q[pick]
                extra += _pauli_as_gates(xb, zb, g.qubits[0])
            else:
                xa, za, xb, zb = _pauli_bits_2q(pick)
                extra += _pauli_as_gates(xa, za, g.qubits[0])
                extra += _pauli_as_gates(xb, zb, g.qubits[1])
            inject.setdefault(gate_idx, []).append(extra)
        seq: list[Gate] = []
        for i, g in enumerate(gates):
            seq.append(g)
            for extra in inject.get(i, ()):
                seq += extra
        psi = statevector(Circuit(n, tuple(seq)))
        probs = np.abs(psi) ** 2
        probs /= probs.sum()
        edges = np.cumsum(probs)
        edges[-1] = 1.0
        samples = np.searchsorted(edges, rng.random(count), side="right")
        m = _flip_and_count(
            samples.astype(np.int64), n, c.measured_qubits, noise, rng
        )
        out = m if out is None else out.merge(m)
    assert out is not None
    return out


def _pauli_as_gates(x: int, z: int, q: int) -> list[Gate]:
    # Injected error Paulis in terms of native gates; Rz(pi) is Z and the
    # pair (Rz(pi), X) is Y, both up to a global phase that sampling cannot
    # see.
    out: list[Gate] = []
    if z:
        out.append(Gate("Rz", (q,), math.pi))
    if x:
        out.append(Gate("X", (q,)))
    return out


def ghz_fidelity(m: MeasurementSet) -> float:
    """Fidelity lower-bound estimate from the two pole populations."""
    if m.shots == 0:
        raise ValueError("empty measurement set")
    p0 = m.frequency("0" * m.n_qubits)
    p1 = m.frequency("1" * m.n_qubits)
    return 0.5 * (math.sqrt(p0) + math.sqrt(p1)) ** 2
