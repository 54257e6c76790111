"""Circuit data model (alternating easy/hard cycles), unitaries, generators for
QFT and random circuits, and single-qubit gate folding."""

from __future__ import annotations

import functools
import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .pauli import CLIFFORD_GATE_NAMES

ONE_QUBIT_GATES = frozenset(
    {"I", "X", "Y", "Z", "H", "S", "Sdg", "T", "X45", "Y45", "Z45", "U3"}
)
TWO_QUBIT_GATES = frozenset({"CX", "CY", "CZ"})
HARD_1Q_GATES = ("X45", "Y45", "T")
HARD_2Q_GATES = ("CX", "CY", "CZ")
MAX_DENSE_QUBITS = 6


class CircuitError(ValueError):
    pass


def rx(theta: float) -> np.ndarray:
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    return np.array([[c, -1j * s], [-1j * s, c]])


def ry(theta: float) -> np.ndarray:
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    return np.array([[c, -s], [s, c]], dtype=complex)


def rz(theta: float) -> np.ndarray:
    return np.diag([np.exp(-0.5j * theta), np.exp(0.5j * theta)])


def u3(theta: float, phi: float, lam: float) -> np.ndarray:
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    return np.array(
        [
            [c, -np.exp(1j * lam) * s],
            [np.exp(1j * phi) * s, np.exp(1j * (phi + lam)) * c],
        ]
    )


_SQ2 = 1 / math.sqrt(2)
_FIXED = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]]),
    "Z": np.diag([1.0 + 0j, -1.0]),
    "H": np.array([[_SQ2, _SQ2], [_SQ2, -_SQ2]], dtype=complex),
    "S": np.diag([1, 1j]),
    "Sdg": np.diag([1, -1j]),
    "T": np.diag([1, np.exp(0.25j * math.pi)]),
    "X45": rx(math.pi / 4),
    "Y45": ry(math.pi / 4),
    "Z45": rz(math.pi / 4),
    "CX": np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex),
    "CY": np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, -1j], [0, 0, 1j, 0]]),
    "CZ": np.diag([1, 1, 1, -1]).astype(complex),
}
for _m in _FIXED.values():
    _m.setflags(write=False)


@dataclass(frozen=True)
class Gate:
    name: str
    qubits: tuple[int, ...]
    params: tuple[float, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "qubits", tuple(int(q) for q in self.qubits))
        object.__setattr__(self, "params", tuple(float(p) for p in self.params))
        if self.name in ONE_QUBIT_GATES:
            if len(self.qubits) != 1:
                raise CircuitError(f"{self.name} acts on exactly one qubit")
        elif self.name in TWO_QUBIT_GATES:
            if len(self.qubits) != 2 or self.qubits[0] == self.qubits[1]:
                raise CircuitError(f"{self.name} acts on two distinct qubits")
        else:
            raise CircuitError(f"unknown gate {self.name!r}")
        if self.name == "U3" and len(self.params) != 3:
            raise CircuitError("U3 takes three angles")

    @property
    def matrix(self) -> np.ndarray:
        if self.name == "U3":
            return u3(*self.params)
        return _FIXED[self.name]

    @property
    def is_clifford(self) -> bool:
        return self.name in CLIFFORD_GATE_NAMES

    def to_dict(self) -> dict:
        return {"name": self.name, "qubits": list(self.qubits), "params": list(self.params)}

    @classmethod
    def from_dict(cls, d: Mapping) -> "Gate":
        return cls(d["name"], tuple(d["qubits"]), tuple(d.get("params", ())))

    def __str__(self) -> str:
        q = ",".join(map(str, self.qubits))
        if self.params:
            return f"{self.name}({','.join(f'{p:.6g}' for p in self.params)})[{q}]"
        return f"{self.name}[{q}]"


@dataclass(frozen=True)
class Cycle:
    kind: str
    gates: tuple[Gate, ...]

    def __post_init__(self):
        if self.kind not in ("easy", "hard"):
            raise CircuitError(f"cycle kind must be 'easy' or 'hard', got {self.kind!r}")
        gates = tuple(sorted(self.gates, key=lambda g: g.qubits))
        object.__setattr__(self, "gates", gates)
        seen: set[int] = set()
        for g in gates:
            if seen.intersection(g.qubits):
                raise CircuitError("gates in a cycle must act on disjoint qubits")
            seen.update(g.qubits)
        if self.kind == "easy" and any(len(g.qubits) != 1 for g in gates):
            raise CircuitError("easy cycles contain only single-qubit gates")
        if self.kind == "hard":
            n2 = sum(1 for g in gates if len(g.qubits) == 2)
            if n2 > 1:
                raise CircuitError("hard cycles contain at most one two-qubit gate")

    @property
    def qubits(self) -> tuple[int, ...]:
        return tuple(sorted(q for g in self.gates for q in g.qubits))

    @property
    def two_qubit_gate(self) -> Gate | None:
        for g in self.gates:
            if len(g.qubits) == 2:
                return g
        return None

    @property
    def signature(self) -> str:
        """Canonical key used by noise models, e.g. ``"CX(1,0)|I(2)|I(3)"``."""
        return "|".join(f"{g.name}({','.join(map(str, g.qubits))})" for g in self.gates)

    def gate_on(self, q: int) -> Gate:
        for g in self.gates:
            if q in g.qubits:
                return g
        raise KeyError(q)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "gates": [g.to_dict() for g in self.gates]}

    @classmethod
    def from_dict(cls, d: Mapping) -> "Cycle":
        return cls(d["kind"], tuple(Gate.from_dict(g) for g in d["gates"]))


def easy_cycle(n: int, gates: Iterable[Gate] = ()) -> Cycle:
    """Easy cycle padding idle qubits with explicit identities."""
    gates = list(gates)
    used = {q for g in gates for q in g.qubits}
    gates += [Gate("I", (q,)) for q in range(n) if q not in used]
    return Cycle("easy", tuple(gates))


def hard_cycle(n: int, gates: Iterable[Gate] = ()) -> Cycle:
    gates = list(gates)
    used = {q for g in gates for q in g.qubits}
    gates += [Gate("I", (q,)) for q in range(n) if q not in used]
    return Cycle("hard", tuple(gates))


@dataclass(frozen=True)
class Circuit:
    n: int
    cycles: tuple[Cycle, ...]
    _unitary_cache: dict = field(default_factory=dict, compare=False, repr=False, hash=False)

    def __post_init__(self):
        object.__setattr__(self, "cycles", tuple(self.cycles))
        if self.n < 1:
            raise CircuitError("circuits need at least one qubit")
        if not self.cycles or len(self.cycles) % 2 == 0:
            raise CircuitError("circuits alternate easy/hard and start and end with easy")
        for i, c in enumerate(self.cycles):
            expected = "easy" if i % 2 == 0 else "hard"
            if c.kind != expected:
                raise CircuitError(f"cycle {i} should be {expected}, got {c.kind}")
            if c.qubits != tuple(range(self.n)):
                raise CircuitError(f"cycle {i} does not cover qubits 0..{self.n - 1}")

    @property
    def K(self) -> int:
        return len(self.cycles) // 2

    @property
    def easy_cycles(self) -> tuple[Cycle, ...]:
        return self.cycles[::2]

    @property
    def hard_cycles(self) -> tuple[Cycle, ...]:
        return self.cycles[1::2]

    def with_cycles(self, cycles: Sequence[Cycle]) -> "Circuit":
        return Circuit(self.n, tuple(cycles))

    def to_dict(self) -> dict:
        return {"n": self.n, "cycles": [c.to_dict() for c in self.cycles]}

    @classmethod
    def from_dict(cls, d: Mapping) -> "Circuit":
        return cls(int(d["n"]), tuple(Cycle.from_dict(c) for c in d["cycles"]))

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)

    @classmethod
    def from_json(cls, text: str) -> "Circuit":
        return cls.from_dict(json.loads(text))

    def __str__(self) -> str:
        lines = [f"Circuit(n={self.n}, K={self.K})"]
        for i, c in enumerate(self.cycles):
            lines.append(f"  {i:3d} {c.kind:4s} " + " ".join(str(g) for g in c.gates))
        return "\n".join(lines)


# --- unitaries ---------------------------------------------------------------

def apply_matrix(tensor: np.ndarray, mat: np.ndarray, qubits: Sequence[int]) -> np.ndarray:
    """Apply ``mat`` to the leading qubit axes ``qubits`` of ``tensor``.

    ``tensor`` has shape ``(2,)*n + rest``; qubit ``q`` lives on axis ``q``.
    """
    k = len(qubits)
    m = mat.reshape((2,) * (2 * k))
    out = np.tensordot(m, tensor, axes=(list(range(k, 2 * k)), list(qubits)))
    return np.moveaxis(out, list(range(k)), list(qubits))


def cycle_unitary(cycle: Cycle, n: int) -> np.ndarray:
    gates = cycle.gates
    if all(len(g.qubits) == 1 for g in gates) and [g.qubits[0] for g in gates] == list(range(n)):
        out = gates[0].matrix
        for g in gates[1:]:
            out = np.kron(out, g.matrix)
        return np.array(out, dtype=complex)
    t = np.eye(2**n, dtype=complex).reshape((2,) * n + (2**n,))
    for g in gates:
        if g.name != "I":
            t = apply_matrix(t, g.matrix, g.qubits)
    return t.reshape(2**n, 2**n)


def circuit_unitary(c: Circuit) -> np.ndarray:
    """Product of cycle unitaries, earliest cycle applied first."""
    if c.n > MAX_DENSE_QUBITS:
        raise CircuitError(f"dense unitaries limited to {MAX_DENSE_QUBITS} qubits")
    if "u" not in c._unitary_cache:
        u = np.eye(2**c.n, dtype=complex)
        for cyc in c.cycles:
            u = cycle_unitary(cyc, c.n) @ u
        c._unitary_cache["u"] = u
    return c._unitary_cache["u"]


# --- single-qubit folding ------------------------------------------------------

def zyz_angles(u: np.ndarray) -> tuple[float, float, float]:
    """Angles ``(theta, phi, lam)`` with ``u == e^{i a} U3(theta, phi, lam)``."""
    u = np.asarray(u, dtype=complex)
    det = np.linalg.det(u)
    su = u / np.sqrt(det)
    theta = 2 * math.atan2(abs(su[1, 0]), abs(su[0, 0]))
    if abs(su[0, 0]) < 1e-12:
        # pure flip: phi + lam is free, choose lam = 0
        return theta, float(2 * np.angle(su[1, 0])), 0.0
    if abs(su[1, 0]) < 1e-12:
        return 0.0, 0.0, float(2 * np.angle(su[1, 1]))
    a = np.angle(su[1, 1])  # (phi + lam) / 2
    b = np.angle(su[1, 0])  # (phi - lam) / 2
    return theta, float(a + b), float(a - b)


def unitary_to_gate(u: np.ndarray, qubit: int, atol: float = 1e-12) -> Gate:
    """Fold an arbitrary single-qubit unitary into one gate (``I`` when trivial)."""
    theta, phi, lam = zyz_angles(u)
    g = Gate("U3", (qubit,), (theta, phi, lam))
    if abs(abs(np.trace(u)) - 2) < atol:
        return Gate("I", (qubit,))
    return g


def recompile_cycle_pair(
    easy: Cycle,
    before: Mapping[int, np.ndarray] | None = None,
    after: Mapping[int, np.ndarray] | None = None,
) -> Cycle:
    """Fold per-qubit corrections into an easy cycle: ``after @ gate @ before``.

    Every qubit ends up carrying a single ``U3`` (or ``I``); depth is unchanged.
    """
    if easy.kind != "easy":
        raise CircuitError("only easy cycles can absorb corrections")
    before = before or {}
    after = after or {}
    gates = []
    for g in easy.gates:
        q = g.qubits[0]
        m = g.matrix
        if q in before:
            m = m @ np.asarray(before[q])
        if q in after:
            m = np.asarray(after[q]) @ m
        gates.append(unitary_to_gate(m, q))
    return Cycle("easy", tuple(gates))


# --- single-qubit Clifford group ---------------------------------------------

@functools.lru_cache(maxsize=None)
def clifford_group_1q() -> tuple[tuple[str, ...], ...]:
    """The 24 single-qubit Cliffords as H/S words, in breadth-first order."""
    def key(m):
        idx = np.argmax(np.abs(m.ravel()) > 1e-9)
        ph = m.ravel()[idx] / abs(m.ravel()[idx])
        return tuple(np.round((m / ph).ravel(), 8))

    words: list[tuple[str, ...]] = [()]
    seen = {key(np.eye(2))}
    frontier = [((), np.eye(2, dtype=complex))]
    while frontier:
        nxt = []
        for word, m in frontier:
            for g in ("H", "S"):
                m2 = _FIXED[g] @ m
                k = key(m2)
                if k not in seen:
                    seen.add(k)
                    words.append(word + (g,))
                    nxt.append((word + (g,), m2))
        frontier = nxt
    assert len(words) == 24
    return tuple(words)


def clifford_1q_matrix(index: int) -> np.ndarray:
    m = np.eye(2, dtype=complex)
    for g in clifford_group_1q()[index]:
        m = _FIXED[g] @ m
    return m


def clifford_1q_gate(index: int, qubit: int) -> Gate:
    word = clifford_group_1q()[index]
    if len(word) == 0:
        return Gate("I", (qubit,))
    if len(word) == 1:
        return Gate(word[0], (qubit,))
    return Gate("U3", (qubit,), zyz_angles(clifford_1q_matrix(index)))


# --- generators --------------------------------------------------------------

def sample_random_circuit(n: int, K: int, mode: str, rng: np.random.Generator) -> Circuit:
    """Random circuit of ``K`` hard cycles.

    ``multiqubit``: easy gates uniform over C1 + {X45, Y45, T}; each hard cycle is
    one of CX/CY/CZ on a uniformly chosen nearest-neighbour pair (random
    orientation) with identities elsewhere.  ``singlequbit``: easy gates from C1,
    hard gates per qubit from {X45, Y45, T}.
    """
    if K < 1:
        raise CircuitError("K must be at least 1")
    if mode not in ("multiqubit", "singlequbit"):
        raise CircuitError(f"unknown mode {mode!r}")
    if mode == "multiqubit" and n < 2:
        raise CircuitError("multiqubit mode needs at least two qubits")

    def easy() -> Cycle:
        gates = []
        for q in range(n):
            if mode == "singlequbit":
                gates.append(clifford_1q_gate(int(rng.integers(24)), q))
            else:
                j = int(rng.integers(24 + 3))
                if j < 24:
                    gates.append(clifford_1q_gate(j, q))
                else:
                    gates.append(Gate(("X45", "Y45", "T")[j - 24], (q,)))
        return Cycle("easy", tuple(gates))

    def hard() -> Cycle:
        if mode == "singlequbit":
            return Cycle(
                "hard", tuple(Gate(HARD_1Q_GATES[int(rng.integers(3))], (q,)) for q in range(n))
            )
        name = HARD_2Q_GATES[int(rng.integers(3))]
        a = int(rng.integers(n - 1))
        pair = (a, a + 1) if rng.integers(2) == 0 else (a + 1, a)
        return hard_cycle(n, [Gate(name, pair)])

    cycles = [easy()]
    for _ in range(K):
        cycles.append(hard())
        cycles.append(easy())
    return Circuit(n, tuple(cycles))


def structure_gates(n: int, ops: Iterable[Gate]) -> Circuit:
    """Pack a time-ordered gate list into alternating easy/hard form.

    Single-qubit gates accumulate into the pending easy cycle (folded per
    qubit); each two-qubit gate becomes its own hard cycle.
    """
    pending = {q: np.eye(2, dtype=complex) for q in range(n)}
    cycles: list[Cycle] = []

    def flush() -> Cycle:
        return Cycle("easy", tuple(unitary_to_gate(pending[q], q) for q in range(n)))

    for g in ops:
        if len(g.qubits) == 1:
            q = g.qubits[0]
            pending[q] = g.matrix @ pending[q]
        else:
            cycles.append(flush())
            pending = {q: np.eye(2, dtype=complex) for q in range(n)}
            cycles.append(hard_cycle(n, [g]))
    cycles.append(flush())
    return Circuit(n, tuple(cycles))


def _cp_swap_ops(a: int, b: int, theta: float) -> list[Gate]:
    # controlled-phase(theta) followed by SWAP in three CNOTs (global phase dropped)
    return [
        Gate("CX", (a, b)),
        Gate("CX", (b, a)),
        Gate("U3", (b,), (0.0, 0.0, -theta / 2)),
        Gate("CX", (a, b)),
        Gate("U3", (a,), (0.0, 0.0, theta / 2)),
        Gate("U3", (b,), (0.0, 0.0, theta / 2)),
    ]


def build_qft(n: int, native: bool = True) -> Circuit:
    """QFT on a linear chain, equal to the DFT matrix (qubit 0 most significant).

    Each controlled phase is fused with a nearest-neighbour SWAP (three CNOTs);
    the swap network's qubit reversal cancels the textbook output reversal, so no
    relabeling remains.  With ``native`` every CNOT is oriented high -> low.
    """
    if not 1 <= n <= 5:
        raise CircuitError("QFT supported for 1 <= n <= 5")
    ops: list[Gate] = []
    for j in range(n):
        # logical qubit j sits on physical 0 before its Hadamard
        ops.append(Gate("H", (0,)))
        for k in range(j + 1, n):
            p = k - j - 1
            ops.extend(_cp_swap_ops(p, p + 1, math.pi / 2 ** (k - j)))
    circ = structure_gates(n, ops)
    return to_native_cx(circ) if native else circ


def dft_matrix(n: int) -> np.ndarray:
    d = 2**n
    j = np.arange(d)
    return np.exp(2j * np.pi * np.outer(j, j) / d) / math.sqrt(d)


# --- native two-qubit gate pass -------------------------------------------------

_H = _FIXED["H"]
_S = _FIXED["S"]
_SDG = _FIXED["Sdg"]
_I2 = _FIXED["I"]


def _native_decomposition(g: Gate) -> tuple[dict, dict]:
    """Single-qubit (pre, post) unitaries with ``g = post . CX(hi, lo) . pre``."""
    c, t = g.qubits
    pre = {c: _I2, t: _I2}
    post = {c: _I2, t: _I2}
    if g.name == "CY":
        pre[t], post[t] = _SDG, _S
    elif g.name == "CZ":
        pre[t], post[t] = _H, _H
    if c < t:
        # reverse orientation: CX(c,t) = (H x H) CX(t,c) (H x H)
        for q in (c, t):
            pre[q] = _H @ pre[q]
            post[q] = post[q] @ _H
    return pre, post


def to_native_cx(circ: Circuit) -> Circuit:
    """Rewrite every CX/CY/CZ as ``CX(high, low)`` plus single-qubit gates folded
    into the neighbouring easy cycles.  Depth and unitary are preserved."""
    cycles = list(circ.cycles)
    for i in range(1, len(cycles), 2):
        g = cycles[i].two_qubit_gate
        if g is None or (g.name == "CX" and g.qubits[0] > g.qubits[1]):
            continue
        pre, post = _native_decomposition(g)
        hi, lo = max(g.qubits), min(g.qubits)
        cycles[i - 1] = recompile_cycle_pair(cycles[i - 1], after=pre)
        cycles[i + 1] = recompile_cycle_pair(cycles[i + 1], before=post)
        cycles[i] = hard_cycle(circ.n, [Gate("CX", (hi, lo))])
    return Circuit(circ.n, tuple(cycles))


def prepend_state_prep(circ: Circuit, unitaries: Mapping[int, np.ndarray]) -> Circuit:
    """Fold per-qubit state-preparation unitaries into the first easy cycle."""
    cycles = list(circ.cycles)
    cycles[0] = recompile_cycle_pair(cycles[0], before=unitaries)
    return Circuit(circ.n, tuple(cycles))


def haar_random_su2(rng: np.random.Generator) -> np.ndarray:
    """Haar-random single-qubit unitary via the Euler-angle measure."""
    alpha, gamma = rng.uniform(0, 2 * math.pi, size=2)
    beta = math.acos(1 - 2 * rng.uniform())
    return rz(alpha) @ ry(beta) @ rz(gamma)
