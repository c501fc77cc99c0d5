"""Gate-level circuit IR and the circuit constructions used by the lab.

Builders are pure functions returning immutable ``Circuit`` values. The gate
set is the native-ish basis {CNOT, Rz, X, SqrtX} plus the Cliffords and
rotations needed by the protocols (H, S/Sdg, Ry, CPhase, SWAP). ``Sdg`` and
``SqrtXdg`` are included so that circuit inversion is exact gate-for-gate.
Barriers are no-ops kept for readability of emitted circuits.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

from .pauli import PauliString

__all__ = [
    "Gate",
    "Circuit",
    "CouplingMap",
    "build_ansatz",
    "build_ghz",
    "amplify_noise",
    "build_dsp_circuit",
    "basis_change_gates",
    "decompose_swaps",
]

GATE_ARITY = {
    "H": 1,
    "S": 1,
    "Sdg": 1,
    "X": 1,
    "SqrtX": 1,
    "SqrtXdg": 1,
    "Rz": 1,
    "Ry": 1,
    "CNOT": 2,
    "CPhase": 2,
    "SWAP": 2,
}
PARAMETRIC = frozenset({"Rz", "Ry", "CPhase"})

_INVERSE_KIND = {
    "H": "H",
    "X": "X",
    "S": "Sdg",
    "Sdg": "S",
    "SqrtX": "SqrtXdg",
    "SqrtXdg": "SqrtX",
    "CNOT": "CNOT",
    "SWAP": "SWAP",
    "Barrier": "Barrier",
}


@dataclass(frozen=True)
class Gate:
    kind: str
    qubits: tuple[int, ...]
    angle: float | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "qubits", tuple(self.qubits))
        if self.kind == "Barrier":
            if len(set(self.qubits)) != len(self.qubits):
                raise ValueError("repeated qubit in barrier")
            return
        if self.kind not in GATE_ARITY:
            raise ValueError(f"unknown gate kind {self.kind!r}")
        if len(self.qubits) != GATE_ARITY[self.kind]:
            raise ValueError(f"{self.kind} takes {GATE_ARITY[self.kind]} qubits")
        if len(set(self.qubits)) != len(self.qubits):
            raise ValueError(f"repeated qubit in {self.kind}")
        if (self.angle is not None) != (self.kind in PARAMETRIC):
            raise ValueError(f"angle mismatch for {self.kind}")

    def inverse(self) -> "Gate":
        if self.kind in PARAMETRIC:
            return replace(self, angle=-self.angle)
        return replace(self, kind=_INVERSE_KIND[self.kind])

    def relabel(self, mapping: dict[int, int]) -> "Gate":
        return replace(self, qubits=tuple(mapping.get(q, q) for q in self.qubits))


def _g(kind: str, *qubits: int, angle: float | None = None) -> Gate:
    return Gate(kind, tuple(qubits), angle)


@dataclass(frozen=True)
class Circuit:
    """Ordered gate list on a fixed register.

    ``measured_qubits`` records which qubits a sampler should read out;
    default is the full register.
    """

    n_qubits: int
    gates: tuple[Gate, ...]
    measured_qubits: tuple[int, ...] = field(default=())

    def __post_init__(self) -> None:
        object.__setattr__(self, "gates", tuple(self.gates))
        if not self.measured_qubits:
            object.__setattr__(self, "measured_qubits", tuple(range(self.n_qubits)))
        else:
            object.__setattr__(self, "measured_qubits", tuple(self.measured_qubits))
        for g in self.gates:
            if any(q >= self.n_qubits or q < 0 for q in g.qubits):
                raise ValueError(f"gate {g.kind} addresses qubit outside register")
        if any(q >= self.n_qubits or q < 0 for q in self.measured_qubits):
            raise ValueError("measured qubit outside register")

    def count(self, kind: str) -> int:
        return sum(1 for g in self.gates if g.kind == kind)

    def gate_counts(self) -> dict[str, int]:
        out: dict[str, int] = {}
        for g in self.gates:
            out[g.kind] = out.get(g.kind, 0) + 1
        return out

    def inverse(self) -> "Circuit":
        inv = tuple(g.inverse() for g in reversed(self.gates))
        return replace(self, gates=inv)

    def to_dict(self) -> dict:
        gates = []
        for g in self.gates:
            entry: dict = {"kind": g.kind, "qubits": list(g.qubits)}
            if g.angle is not None:
                entry["angle"] = g.angle
            gates.append(entry)
        return {
            "n_qubits": self.n_qubits,
            "gates": gates,
            "measured_qubits": list(self.measured_qubits),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "Circuit":
        gates = tuple(
            Gate(e["kind"], tuple(e["qubits"]), e.get("angle")) for e in doc["gates"]
        )
        return cls(
            n_qubits=int(doc["n_qubits"]),
            gates=gates,
            measured_qubits=tuple(doc.get("measured_qubits", ())),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


@dataclass(frozen=True)
class CouplingMap:
    """Undirected connectivity constraint. Absent map means all-to-all."""

    n_qubits: int
    edges: frozenset[tuple[int, int]]

    def __post_init__(self) -> None:
        norm = set()
        for i, j in self.edges:
            if i == j:
                raise ValueError("self-loop in coupling map")
            if not (0 <= i < self.n_qubits and 0 <= j < self.n_qubits):
                raise ValueError("edge outside register")
            norm.add((min(i, j), max(i, j)))
        object.__setattr__(self, "edges", frozenset(norm))

    @classmethod
    def from_pairs(cls, n_qubits: int, pairs: Iterable[Sequence[int]]) -> "CouplingMap":
        return cls(n_qubits, frozenset((p[0], p[1]) for p in pairs))

    @classmethod
    def dsp_cluster(cls) -> "CouplingMap":
        """Effective readout cluster for the 3-qubit problem plus ancilla.

        Star around the hub qubit 2: system wires 0 and 1 hang off the hub,
        the ancilla (wire 3) is reachable only through it. This is the
        logical shape of the five-qubit heavy-hex cluster used on hardware,
        with the spare fifth qubit dropped.
        """
        return cls.from_pairs(4, [(0, 2), (1, 2), (2, 3)])

    def adjacent(self, i: int, j: int) -> bool:
        return (min(i, j), max(i, j)) in self.edges

    def neighbors(self, q: int) -> tuple[int, ...]:
        out = set()
        for i, j in self.edges:
            if i == q:
                out.add(j)
            elif j == q:
                out.add(i)
        return tuple(sorted(out))


def build_ansatz(params: Sequence[float], native: bool = False) -> Circuit:
    """Six-parameter hardware-efficient ansatz on 3 qubits.

    Structure: a rotation layer on every wire, CNOT(1 -> 2), CNOT(2 -> 0),
    then a second rotation layer. In native mode each rotation is the
    calibrated block SqrtX . Rz(theta) . SqrtX; the default mode emits the
    algebraically identical plain-Ry circuit (the native block equals
    X . Ry(theta), and the X frames are absorbed into the |000> input),
    which keeps the entangler count at exactly 2 CNOTs with 6 Ry gates.

    Angle arguments always refer to the native frame, so the same parameter
    vector prepares the same state in both modes.
    """
    t = [float(x) for x in params]
    if len(t) != 6:
        raise ValueError(f"ansatz takes 6 angles, got {len(t)}")
    from math import pi

    gates: list[Gate] = []
    # (wire, first-layer angle, second-layer angle)
    layout = [(2, t[0], t[3]), (1, t[1], t[4]), (0, t[2], t[5])]
    if native:
        for w, a, _ in layout:
            gates += [_g("SqrtX", w), _g("Rz", w, angle=a), _g("SqrtX", w)]
        gates += [_g("CNOT", 1, 2), _g("CNOT", 2, 0)]
        for w, _, a in layout:
            gates += [_g("SqrtX", w), _g("Rz", w, angle=a), _g("SqrtX", w)]
    else:
        # Frame absorption: X.Ry(a) = Ry(pi - a).Z, and the Z frames commute
        # back through the CNOT pair onto |0> inputs where they vanish.
        first = {2: pi - t[0], 1: t[1] - pi, 0: t[2] - pi}
        second = {2: pi - t[3], 1: pi - t[4], 0: pi - t[5]}
        for w, _, _ in layout:
            gates.append(_g("Ry", w, angle=first[w]))
        gates += [_g("CNOT", 1, 2), _g("CNOT", 2, 0)]
        for w, _, _ in layout:
            gates.append(_g("Ry", w, angle=second[w]))
    return Circuit(n_qubits=3, gates=tuple(gates))


def build_ghz(n: int) -> Circuit:
    """Hadamard plus a CNOT chain: n gates preparing an n-qubit GHZ state."""
    if n < 1:
        raise ValueError("GHZ needs at least one qubit")
    gates = [_g("H", 0)] + [_g("CNOT", k, k + 1) for k in range(n - 1)]
    return Circuit(n_qubits=n, gates=tuple(gates))


def _cphase_block(theta: float, ctrl: int, tgt: int) -> list[Gate]:
    # CPhase(theta) up to global phase: Rz(theta/2) on control, then the
    # two-CNOT echo with Rz(-theta/2), Rz(theta/2) on target.
    return [
        _g("Rz", ctrl, angle=theta / 2),
        _g("CNOT", ctrl, tgt),
        _g("Rz", tgt, angle=-theta / 2),
        _g("CNOT", ctrl, tgt),
        _g("Rz", tgt, angle=theta / 2),
    ]


def amplify_noise(c: Circuit, lam: int) -> Circuit:
    """Root-product rewrite: each CNOT becomes 2*lam CNOTs.

    CNOT = H(t) . CZ . H(t) and CZ = CPhase(pi/lam)**lam; every CPhase is
    eagerly transpiled to the Rz/CNOT echo so emitted gate counts are
    deterministic (2*lam CNOT, 3*lam Rz, 2 H per original CNOT). All other
    gates pass through untouched. The rewrite is unitarily exact up to
    global phase, including at lam = 1, which is the reference point of a
    noise-scaling series.
    """
    lam = int(lam)
    if lam < 1:
        raise ValueError("amplification factor must be a positive integer")
    from math import pi

    gates: list[Gate] = []
    for g in c.gates:
        if g.kind != "CNOT":
            gates.append(g)
            continue
        ctrl, tgt = g.qubits
        gates.append(_g("H", tgt))
        for _ in range(lam):
            gates += _cphase_block(pi / lam, ctrl, tgt)
        gates.append(_g("H", tgt))
    return replace(c, gates=tuple(gates))


def decompose_swaps(c: Circuit) -> Circuit:
    """Rewrite each SWAP as its 3-CNOT realisation."""
    gates: list[Gate] = []
    for g in c.gates:
        if g.kind == "SWAP":
            i, j = g.qubits
            gates += [_g("CNOT", i, j), _g("CNOT", j, i), _g("CNOT", i, j)]
        else:
            gates.append(g)
    return replace(c, gates=tuple(gates))


def basis_change_gates(p: PauliString) -> list[Gate]:
    """Gates B with B P B+ diagonal (+Z on every support qubit).

    X needs H; Y needs Sdg then H (so the conjugation lands on +Z, not -Z);
    I and Z need nothing.
    """
    gates: list[Gate] = []
    for q, ch in enumerate(p.label):
        if ch == "X":
            gates.append(_g("H", q))
        elif ch == "Y":
            gates += [_g("Sdg", q), _g("H", q)]
    return gates


def _direct_readout(support: tuple[int, ...], anc: int) -> list[Gate]:
    return [_g("CNOT", q, anc) for q in support]


def _star_readout(
    support: tuple[int, ...], hub: int, anc: int, coupling: CouplingMap
) -> tuple[list[Gate], dict[int, int]]:
    """Parity readout onto the ancilla through a star hub.

    Returns (gates, wire relabeling for the uncompute suffix). Sources fold
    into the hub, the hub talks to the ancilla, then sources unfold; the
    mirrored cascade leaves the system state untouched. When the hub is not
    in the support, one SWAP moves a support bit onto the hub and the suffix
    is relabeled by that transposition instead of swapping back.
    """
    support_set = set(support)
    if len(support) == 1:
        # Zero-cost logical re-embedding of the ancilla next to the one
        # support qubit; costs nothing on hardware, so no SWAP here.
        return [_g("CNOT", support[0], anc)], {}
    if hub in support_set:
        sources = sorted(support_set - {hub})
        perm: dict[int, int] = {}
        swap_gates: list[Gate] = []
    else:
        moved = min(support_set)
        if not coupling.adjacent(moved, hub):
            raise ValueError(
                f"readout not realizable: qubit {moved} cannot reach hub {hub}"
            )
        sources = sorted(support_set - {moved})
        perm = {moved: hub, hub: moved}
        swap_gates = [_g("SWAP", moved, hub)]
    for s in sources:
        if not coupling.adjacent(s, hub):
            raise ValueError(
                f"readout not realizable: qubit {s} not adjacent to hub {hub}"
            )
    gates = list(swap_gates)
    gates += [_g("CNOT", s, hub) for s in sources]
    gates.append(_g("CNOT", hub, anc))
    gates += [_g("CNOT", s, hub) for s in reversed(sources)]
    return gates, perm


def build_dsp_circuit(
    u: Circuit, p: PauliString, coupling: CouplingMap | None = None
) -> Circuit:
    """Prepare-readout-invert circuit for dual-state purification.

    Applies u, the basis change for p, parity CNOTs from the support of p
    onto a fresh ancilla (last wire), then the inverted basis change and
    inverted u. Post-selecting the system on all zeros leaves the ancilla
    in a state whose Z expectation is 2<P>/(1+<P>^2).

    With a coupling map, readout is direct when every support qubit touches
    the ancilla; on the star-shaped readout cluster the parity is routed
    through the hub with a mirrored cascade, inserting at most one SWAP
    (whose effect is folded into the uncompute wire labels rather than
    swapped back). Anything else raises.
    """
    if p.is_identity:
        raise ValueError("dual-state readout of the identity is undefined")
    if p.n_qubits != u.n_qubits:
        raise ValueError("operator and circuit qubit counts differ")
    n = u.n_qubits
    anc = n
    support = p.support

    prefix = list(u.gates) + basis_change_gates(p)

    perm: dict[int, int] = {}
    if coupling is None:
        readout = _direct_readout(support, anc)
    else:
        if coupling.n_qubits != n + 1:
            raise ValueError("coupling map must cover system plus ancilla")
        if all(coupling.adjacent(q, anc) for q in support):
            readout = _direct_readout(support, anc)
        else:
            hubs = coupling.neighbors(anc)
            if len(hubs) != 1:
                raise ValueError("readout not realizable on this coupling map")
            readout, perm = _star_readout(support, hubs[0], anc, coupling)

    inverse_prefix = [g.inverse() for g in reversed(prefix)]
    if perm:
        inverse_prefix = [g.relabel(perm) for g in inverse_prefix]

    gates = (
        prefix
        + [_g("Barrier", *range(n + 1))]
        + readout
        + [_g("Barrier", *range(n + 1))]
        + inverse_prefix
    )
    return Circuit(n_qubits=n + 1, gates=tuple(gates))
