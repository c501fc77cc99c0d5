"""Pauli algebra: products, commutation, dense oracle, file round-trips."""

import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qemlab import hcl
from qemlab.pauli import (
    PauliString,
    PauliSum,
    commutes,
    commutes_with_sum,
    dump_hamiltonian,
    expectation,
    ground_state,
    load_hamiltonian,
    to_dense,
)

_PAULI_MATS = {
    "I": np.eye(2),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


def _kron(label):
    m = np.array([[1.0]])
    for c in label:
        m = np.kron(m, _PAULI_MATS[c])
    return m


def test_label_validation():
    with pytest.raises(ValueError):
        PauliString("XQZ")
    with pytest.raises(ValueError):
        PauliString("")


def test_support_and_flags():
    p = PauliString("IXZY")
    assert p.support == (1, 2, 3)
    assert p.weight == 3
    assert not p.is_identity
    assert not p.is_diagonal
    assert PauliString("IZZI").is_diagonal
    assert PauliString("IIII").is_identity


labels = st.text(alphabet="IXYZ", min_size=1, max_size=6)


@given(labels, labels)
@settings(max_examples=200, deadline=None)
def test_mul_matches_dense(a, b):
    if len(a) != len(b):
        b = (b * len(a))[: len(a)]
    p, q = PauliString(a), PauliString(b)
    phase_power, r = p.mul(q)
    lhs = _kron(a) @ _kron(b)
    rhs = (1j**phase_power) * _kron(r.label)
    assert np.allclose(lhs, rhs)


@given(labels, labels)
@settings(max_examples=200, deadline=None)
def test_commutes_matches_dense(a, b):
    if len(a) != len(b):
        b = (b * len(a))[: len(a)]
    ma, mb = _kron(a), _kron(b)
    dense_commute = np.allclose(ma @ mb, mb @ ma)
    assert commutes(PauliString(a), PauliString(b)) == dense_commute


def test_sign_on_diagonal_strings():
    p = PauliString("ZIZ")
    assert p.sign_on("000") == 1
    assert p.sign_on("100") == -1
    assert p.sign_on("101") == 1
    assert p.sign_on("001") == -1


def test_sum_rejects_duplicate_labels():
    with pytest.raises(ValueError):
        PauliSum.from_terms([("XX", 1.0), ("XX", 0.5)])


def test_sum_coeff_lookup():
    s = PauliSum.from_terms([("XX", 1.0), ("ZZ", -1.0)])
    assert s.coeff("XX") == pytest.approx(1.0)
    assert s.coeff("ZZ") == pytest.approx(-1.0)
    assert s.coeff("YY") == 0.0


def test_to_dense_matches_kron(hamiltonian):
    dense = to_dense(hamiltonian)
    manual = sum(c * _kron(p.label) for p, c in hamiltonian.terms)
    assert np.allclose(dense, manual)


def test_ground_state_is_eigenpair(hamiltonian):
    e, v = ground_state(hamiltonian)
    hv = to_dense(hamiltonian) @ v
    assert np.allclose(hv, e * v, atol=1e-9)
    assert expectation(hamiltonian, v) == pytest.approx(e, abs=1e-9)


def test_expectation_of_string():
    v = np.zeros(4)
    v[0] = 1.0  # |00>
    assert expectation(PauliString("ZZ"), v) == pytest.approx(1.0)
    assert expectation(PauliString("XX"), v) == pytest.approx(0.0)


def test_tapering_generators_pairwise_commute():
    gens = hcl.tapering_generators()
    assert len(gens) == 4
    assert all(g.n_qubits == 20 for g in gens)
    for a, b in itertools.combinations(gens, 2):
        assert commutes(a, b)


def test_reduced_symmetries_commute_with_hamiltonian(hamiltonian):
    for op, _ in hcl.symmetry_operators():
        assert op.is_diagonal
        assert commutes_with_sum(op, hamiltonian)


def test_number_operator_eigenvalues():
    n_op = hcl.number_operator()
    vals = sorted({round(n_op.diag_value(format(i, "03b")), 6) for i in range(8)})
    assert float(hcl.N_ELECTRONS) in vals


def test_hamiltonian_file_round_trip(tmp_path, hamiltonian):
    path = tmp_path / "h.json"
    dump_hamiltonian(hamiltonian, path)
    back = load_hamiltonian(path)
    assert back.n_qubits == hamiltonian.n_qubits
    for p, c in hamiltonian.terms:
        assert back.coeff(p.label) == pytest.approx(c)


def test_load_rejects_inconsistent_lengths(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{"n_qubits": 3, "terms": [{"pauli": "ZZ", "coeff": 1.0}]}')
    with pytest.raises(ValueError):
        load_hamiltonian(path)
