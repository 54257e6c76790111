"""Pauli-string algebra, Clifford conjugation, Pauli transfer matrices and the
Walsh-Hadamard map between Pauli error probabilities and Pauli eigenvalues.

Conventions used throughout the package:

* A qubit's Pauli label is encoded by two bits ``(x, z)``: ``(0,0)=I``,
  ``(1,0)=X``, ``(1,1)=Y``, ``(0,1)=Z``.  ``Y`` is the Hermitian Pauli, not
  ``XZ``.
* Pauli index order is lexicographic in the per-qubit labels ``I<X<Y<Z`` with
  qubit 0 the most significant digit, so ``index("XZ") = 1*4 + 3``.
* Qubit 0 is also the most significant bit of computational basis states and
  the leftmost factor of every Kronecker product.
"""

from __future__ import annotations

import functools
import itertools
from dataclasses import dataclass
from typing import Iterable

import numpy as np

LABELS = "IXYZ"

_LABEL_TO_BITS = {"I": (0, 0), "X": (1, 0), "Y": (1, 1), "Z": (0, 1)}
_BITS_TO_LABEL = {v: k for k, v in _LABEL_TO_BITS.items()}

PAULI_MATRICES = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}

_PHASES = (1, 1j, -1, -1j)


class UnsupportedConjugationError(ValueError):
    """Raised when a cycle contains a gate outside the Clifford tableau rules."""


def _g(x1: int, z1: int, x2: int, z2: int) -> int:
    # Exponent of i picked up when multiplying single-qubit Paulis (x1,z1)*(x2,z2).
    if x1 == 0 and z1 == 0:
        return 0
    if x1 == 1 and z1 == 1:
        return z2 - x2
    if x1 == 1:
        return z2 * (2 * x2 - 1)
    return x2 * (1 - 2 * z2)


@dataclass(frozen=True)
class PauliString:
    """Signed n-qubit Pauli operator ``i**k * P_0 (x) ... (x) P_{n-1}``."""

    x: tuple[int, ...]
    z: tuple[int, ...]
    k: int = 0

    def __post_init__(self):
        if len(self.x) != len(self.z):
            raise ValueError("x and z bit vectors must have equal length")
        object.__setattr__(self, "x", tuple(int(b) & 1 for b in self.x))
        object.__setattr__(self, "z", tuple(int(b) & 1 for b in self.z))
        object.__setattr__(self, "k", int(self.k) % 4)

    @property
    def n(self) -> int:
        return len(self.x)

    @property
    def phase(self) -> complex:
        return _PHASES[self.k]

    @classmethod
    def identity(cls, n: int) -> "PauliString":
        return cls((0,) * n, (0,) * n, 0)

    @classmethod
    def from_label(cls, label: str) -> "PauliString":
        """Parse labels such as ``"XZ"``, ``"-IY"``, ``"+iZZ"`` or ``"-iX"``."""
        k = 0
        body = label.strip()
        if body.startswith("+"):
            body = body[1:]
        elif body.startswith("-"):
            k = 2
            body = body[1:]
        if body.startswith("i"):
            k += 1
            body = body[1:]
        try:
            bits = [_LABEL_TO_BITS[c] for c in body.upper()]
        except KeyError as exc:
            raise ValueError(f"invalid Pauli label {label!r}") from exc
        return cls(tuple(b[0] for b in bits), tuple(b[1] for b in bits), k)

    @classmethod
    def from_index(cls, index: int, n: int) -> "PauliString":
        if not 0 <= index < 4**n:
            raise ValueError(f"Pauli index {index} out of range for n={n}")
        digits = []
        for _ in range(n):
            digits.append(index % 4)
            index //= 4
        return cls.from_label("".join(LABELS[d] for d in reversed(digits)))

    @property
    def label(self) -> str:
        """Unsigned label, e.g. ``"XIZ"``."""
        return "".join(_BITS_TO_LABEL[(a, b)] for a, b in zip(self.x, self.z))

    @property
    def index(self) -> int:
        idx = 0
        for c in self.label:
            idx = 4 * idx + LABELS.index(c)
        return idx

    @property
    def weight(self) -> int:
        return sum(1 for a, b in zip(self.x, self.z) if a or b)

    @property
    def support(self) -> tuple[int, ...]:
        return tuple(i for i, (a, b) in enumerate(zip(self.x, self.z)) if a or b)

    def unsigned(self) -> "PauliString":
        return PauliString(self.x, self.z, 0)

    def is_hermitian(self) -> bool:
        return self.k in (0, 2)

    def __str__(self) -> str:
        return ("+", "+i", "-", "-i")[self.k] + self.label

    def __repr__(self) -> str:
        return f"PauliString({str(self)!r})"

    def __mul__(self, other: "PauliString") -> "PauliString":
        return pauli_mul(self, other)

    def commutes(self, other: "PauliString") -> bool:
        return symplectic_product(self, other) == 0

    def to_matrix(self) -> np.ndarray:
        out = np.array([[1.0 + 0j]])
        for c in self.label:
            out = np.kron(out, PAULI_MATRICES[c])
        return self.phase * out


def pauli_mul(a: PauliString, b: PauliString) -> PauliString:
    """Signed product ``a * b``."""
    if a.n != b.n:
        raise ValueError(f"dimension mismatch: {a.n} vs {b.n} qubits")
    k = a.k + b.k
    for x1, z1, x2, z2 in zip(a.x, a.z, b.x, b.z):
        k += _g(x1, z1, x2, z2)
    x = tuple(p ^ q for p, q in zip(a.x, b.x))
    z = tuple(p ^ q for p, q in zip(a.z, b.z))
    return PauliString(x, z, k)


def symplectic_product(a: PauliString, b: PauliString) -> int:
    """0 if ``a`` and ``b`` commute, 1 if they anticommute."""
    s = 0
    for x1, z1, x2, z2 in zip(a.x, a.z, b.x, b.z):
        s ^= (x1 & z2) ^ (z1 & x2)
    return s


def all_paulis(n: int) -> list[PauliString]:
    """All 4**n unsigned Paulis in index order."""
    return [PauliString.from_label("".join(t)) for t in itertools.product(LABELS, repeat=n)]


def pauli_labels(n: int) -> list[str]:
    return ["".join(t) for t in itertools.product(LABELS, repeat=n)]


@functools.lru_cache(maxsize=None)
def pauli_basis(n: int) -> np.ndarray:
    """Stack of the 4**n Pauli matrices, shape ``(4**n, 2**n, 2**n)``, index order."""
    mats = [PAULI_MATRICES[c] for c in LABELS]
    basis = np.ones((1, 1, 1), dtype=complex)
    for _ in range(n):
        basis = np.einsum("aij,bkl->abikjl", basis, np.array(mats)).reshape(
            basis.shape[0] * 4, basis.shape[1] * 2, basis.shape[2] * 2
        )
    basis.setflags(write=False)
    return basis


# --- Clifford tableau rules -------------------------------------------------
#
# Each rule maps a signed Pauli (as mutable lists x, z and a sign bit r) to
# G P G^dagger for one gate.  Phase k of the input is carried unchanged except
# for sign flips (k += 2).

def _h(x, z, r, q):
    r ^= x[q] & z[q]
    x[q], z[q] = z[q], x[q]
    return r


def _s(x, z, r, q):
    r ^= x[q] & z[q]
    z[q] ^= x[q]
    return r


def _sdg(x, z, r, q):
    r ^= x[q] & (1 - z[q])
    z[q] ^= x[q]
    return r


def _px(x, z, r, q):
    return r ^ z[q]


def _py(x, z, r, q):
    return r ^ x[q] ^ z[q]


def _pz(x, z, r, q):
    return r ^ x[q]


def _cx(x, z, r, c, t):
    r ^= x[c] & z[t] & (x[t] ^ z[c] ^ 1)
    x[t] ^= x[c]
    z[c] ^= z[t]
    return r


def _cz(x, z, r, c, t):
    r = _h(x, z, r, t)
    r = _cx(x, z, r, c, t)
    return _h(x, z, r, t)


def _cy(x, z, r, c, t):
    # CY = S_t CX Sdg_t, so conjugate by Sdg first.
    r = _sdg(x, z, r, t)
    r = _cx(x, z, r, c, t)
    return _s(x, z, r, t)


_ONE_QUBIT_RULES = {
    "I": lambda x, z, r, q: r,
    "X": _px,
    "Y": _py,
    "Z": _pz,
    "H": _h,
    "S": _s,
    "Sdg": _sdg,
}
_TWO_QUBIT_RULES = {"CX": _cx, "CY": _cy, "CZ": _cz}

CLIFFORD_GATE_NAMES = frozenset(_ONE_QUBIT_RULES) | frozenset(_TWO_QUBIT_RULES)


def _gates_of(cycle) -> Iterable:
    return cycle.gates if hasattr(cycle, "gates") else cycle


def is_clifford_cycle(cycle) -> bool:
    return all(g.name in CLIFFORD_GATE_NAMES for g in _gates_of(cycle))


def clifford_conjugate(cycle, p: PauliString, *, track_sign: bool = True) -> PauliString:
    """Return ``G p G^dagger`` for a Clifford cycle ``G``.

    ``cycle`` is a :class:`~rckit.circuit.Cycle` or any iterable of gates with
    ``name`` and ``qubits``.  ``track_sign=False`` drops the sign bookkeeping and
    exists only to demonstrate that the signs matter.
    """
    gates = list(_gates_of(cycle))
    n = getattr(cycle, "n", None)
    if n is not None and n != p.n:
        raise ValueError(f"dimension mismatch: cycle on {n} qubits, Pauli on {p.n}")
    x, z, r = list(p.x), list(p.z), 0
    for g in gates:
        if g.name in _ONE_QUBIT_RULES:
            r = _ONE_QUBIT_RULES[g.name](x, z, r, g.qubits[0])
        elif g.name in _TWO_QUBIT_RULES:
            r = _TWO_QUBIT_RULES[g.name](x, z, r, g.qubits[0], g.qubits[1])
        else:
            raise UnsupportedConjugationError(f"gate {g.name} is not a supported Clifford")
    k = p.k + (2 * r if track_sign else 0)
    return PauliString(tuple(x), tuple(z), k)


# --- Walsh-Hadamard transform ------------------------------------------------

# Row Q, column P: +1 if the single-qubit labels commute.
_W1 = np.array(
    [
        [1, 1, 1, 1],
        [1, 1, -1, -1],
        [1, -1, 1, -1],
        [1, -1, -1, 1],
    ],
    dtype=float,
)


def _num_qubits_from_length(length: int) -> int:
    n = 0
    size = 1
    while size < length:
        size *= 4
        n += 1
    if size != length:
        raise ValueError(f"length {length} is not a power of 4")
    return n


def _apply_w(v: np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    n = _num_qubits_from_length(v.shape[-1])
    lead = v.shape[:-1]
    t = v.reshape(lead + (4,) * n)
    for axis in range(n):
        t = np.moveaxis(np.tensordot(t, _W1, axes=([len(lead) + axis], [1])), -1, len(lead) + axis)
    return t.reshape(lead + (4**n,))


def walsh_hadamard(c) -> np.ndarray:
    """Pauli eigenvalues ``p_Q = sum_P c_P (-1)^<P,Q>`` from error probabilities.

    Works on the last axis, so a batch of vectors can be transformed at once.
    """
    return _apply_w(c)


def inverse_walsh_hadamard(p) -> np.ndarray:
    """Error probabilities from Pauli eigenvalues; exact inverse of :func:`walsh_hadamard`."""
    p = np.asarray(p, dtype=float)
    return _apply_w(p) / p.shape[-1]


def walsh_hadamard_matrix(n: int) -> np.ndarray:
    out = np.ones((1, 1))
    for _ in range(n):
        out = np.kron(out, _W1)
    return out


# --- Pauli transfer matrices --------------------------------------------------

def ptm_from_kraus(kraus: Iterable[np.ndarray]) -> np.ndarray:
    """Real PTM ``R_QP = Tr[Q E(P)] / d`` in the normalized Pauli basis."""
    kraus = [np.asarray(k, dtype=complex) for k in kraus]
    d = kraus[0].shape[0]
    n = _num_qubits_from_length(d * d)
    basis = pauli_basis(n)
    image = np.zeros_like(basis)
    for k in kraus:
        image += k @ basis @ k.conj().T
    ptm = np.einsum("qij,pji->qp", basis, image) / d
    return ptm.real


def ptm_of_unitary(u, atol: float = 1e-10) -> np.ndarray:
    u = np.asarray(u, dtype=complex)
    d = u.shape[0]
    if u.shape != (d, d) or not np.allclose(u @ u.conj().T, np.eye(d), atol=atol):
        raise ValueError("input is not a unitary matrix")
    return ptm_from_kraus([u])


def pauli_channel_ptm(c) -> np.ndarray:
    return np.diag(walsh_hadamard(c))
