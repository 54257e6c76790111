import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rckit.circuit import Cycle, Gate, cycle_unitary
from rckit.pauli import (
    PAULI_MATRICES,
    PauliString,
    UnsupportedConjugationError,
    all_paulis,
    clifford_conjugate,
    inverse_walsh_hadamard,
    pauli_basis,
    pauli_labels,
    pauli_mul,
    ptm_from_kraus,
    ptm_of_unitary,
    walsh_hadamard,
    walsh_hadamard_matrix,
)

labels = st.integers(1, 4).flatmap(lambda n: st.text("IXYZ", min_size=n, max_size=n))
signs = st.sampled_from(["", "-", "i", "-i"])


def dense(label: str) -> np.ndarray:
    out = np.array([[1.0 + 0j]])
    for c in label:
        out = np.kron(out, PAULI_MATRICES[c])
    return out


def test_encoding_and_ordering():
    assert pauli_labels(1) == ["I", "X", "Y", "Z"]
    assert pauli_labels(2)[:5] == ["II", "IX", "IY", "IZ", "XI"]
    p = PauliString.from_label("Y")
    assert (p.x, p.z) == ((1,), (1,))
    assert PauliString.from_label("XZ").index == 1 * 4 + 3
    assert PauliString.from_index(7, 2).label == "XZ"


def test_label_parsing():
    assert PauliString.from_label("-iXZ").k == 3
    assert str(PauliString.from_label("+iY")) == "+iY"
    with pytest.raises(ValueError):
        PauliString.from_label("XQ")
    with pytest.raises(ValueError):
        PauliString.from_index(16, 2)


@given(labels, labels.map(len), signs, signs)
def test_mul_matches_dense(a, n, sa, sb):
    b = ("IXYZ" * n)[::-1][: len(a)]
    pa, pb = PauliString.from_label(sa + a), PauliString.from_label(sb + b)
    prod = pauli_mul(pa, pb)
    np.testing.assert_allclose(prod.to_matrix(), pa.to_matrix() @ pb.to_matrix(), atol=1e-12)


@given(labels)
def test_commutation_matches_dense(a):
    b = "".join(reversed(a))
    pa, pb = PauliString.from_label(a), PauliString.from_label(b)
    ma, mb = pa.to_matrix(), pb.to_matrix()
    assert pa.commutes(pb) == np.allclose(ma @ mb, mb @ ma)


def test_mul_dimension_mismatch():
    with pytest.raises(ValueError, match="dimension"):
        pauli_mul(PauliString.from_label("X"), PauliString.from_label("XX"))


def test_weight_and_support():
    p = PauliString.from_label("IXIZ")
    assert p.weight == 2
    assert p.support == (1, 3)


CLIFFORD_GATES = [
    Gate("H", (0,)), Gate("S", (0,)), Gate("Sdg", (0,)),
    Gate("X", (0,)), Gate("Y", (0,)), Gate("Z", (0,)),
    Gate("CX", (0, 1)), Gate("CX", (1, 0)), Gate("CY", (0, 1)), Gate("CZ", (1, 0)),
]


@pytest.mark.parametrize("gate", CLIFFORD_GATES, ids=str)
@pytest.mark.parametrize("label", ["".join(t) for t in itertools.product("IXYZ", repeat=2)])
def test_conjugation_matches_dense(gate, label):
    used = set(gate.qubits)
    gates = [gate] + [Gate("I", (q,)) for q in range(2) if q not in used]
    cyc = Cycle("hard", tuple(gates))
    u = cycle_unitary(cyc, 2)
    p = PauliString.from_label(label)
    got = clifford_conjugate(cyc, p)
    np.testing.assert_allclose(got.to_matrix(), u @ p.to_matrix() @ u.conj().T, atol=1e-12)
    assert got.is_hermitian()


def test_sign_tracking_matters():
    # H X H = Z but H Y H = -Y; dropping signs gets the second one wrong
    cyc = Cycle("hard", (Gate("H", (0,)),))
    y = PauliString.from_label("Y")
    assert clifford_conjugate(cyc, y).k == 2
    assert clifford_conjugate(cyc, y, track_sign=False).k == 0


def test_conjugation_rejects_non_clifford():
    with pytest.raises(UnsupportedConjugationError):
        clifford_conjugate(Cycle("hard", (Gate("T", (0,)),)), PauliString.from_label("X"))


@pytest.mark.parametrize("n", [1, 2, 3])
def test_wht_matches_brute_force(n):
    rng = np.random.default_rng(n)
    c = rng.dirichlet(np.ones(4**n))
    ps = all_paulis(n)
    brute = np.array([sum(c[j] * (1 if ps[j].commutes(Q) else -1) for j in range(4**n)) for Q in ps])
    np.testing.assert_allclose(walsh_hadamard(c), brute, atol=1e-14)
    np.testing.assert_allclose(walsh_hadamard_matrix(n) @ c, brute, atol=1e-14)


@settings(max_examples=50)
@given(st.integers(1, 3), st.integers(0, 2**32 - 1))
def test_wht_roundtrip(n, seed):
    c = np.random.default_rng(seed).normal(size=4**n)
    np.testing.assert_allclose(inverse_walsh_hadamard(walsh_hadamard(c)), c, atol=1e-12)


def test_wht_batched_and_bad_length():
    c = np.random.default_rng(0).random((5, 16))
    np.testing.assert_allclose(walsh_hadamard(c)[2], walsh_hadamard(c[2]))
    with pytest.raises(ValueError, match="power of 4"):
        walsh_hadamard(np.ones(8))


def test_ptm_of_pauli_channel_is_diagonal_wht():
    q = np.array([0.9, 0.05, 0.03, 0.02])
    kraus = [np.sqrt(qi) * PAULI_MATRICES[c] for qi, c in zip(q, "IXYZ")]
    np.testing.assert_allclose(ptm_from_kraus(kraus), np.diag(walsh_hadamard(q)), atol=1e-14)


def test_ptm_of_unitary_is_orthogonal():
    u = cycle_unitary(Cycle("hard", (Gate("CX", (0, 1)),)), 2)
    r = ptm_of_unitary(u)
    np.testing.assert_allclose(r @ r.T, np.eye(16), atol=1e-12)
    with pytest.raises(ValueError):
        ptm_of_unitary(np.ones((2, 2)))


def test_pauli_basis_matches_labels():
    basis = pauli_basis(2)
    for m, lab in zip(basis, pauli_labels(2)):
        np.testing.assert_allclose(m, dense(lab))
