"""Randomized compiling: Pauli twirls around hard cycles, folded into easy cycles."""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .circuit import Circuit, CircuitError, circuit_unitary, recompile_cycle_pair
from .pauli import (
    PAULI_MATRICES,
    PauliString,
    clifford_conjugate,
    is_clifford_cycle,
)


class UnsupportedHardCycleError(CircuitError):
    pass


@dataclass(frozen=True)
class RandomizedCircuit:
    base: Circuit
    twirls: tuple[PauliString, ...]
    compiled: Circuit

    @property
    def twirl_labels(self) -> list[str]:
        return [t.label for t in self.twirls]


def _per_qubit(p: PauliString) -> dict[int, np.ndarray]:
    mats = {q: PAULI_MATRICES[c] for q, c in enumerate(p.label)}
    # fold the overall phase into qubit 0 so the product is exact
    mats[0] = p.phase * mats[0]
    return mats


def correction_for(cycle, twirl: PauliString, *, track_sign: bool = True) -> dict[int, np.ndarray]:
    """Per-qubit unitaries of ``G T^dagger G^dagger`` for hard cycle ``G``."""
    if is_clifford_cycle(cycle):
        # twirls are Hermitian Paulis, so T^dagger = T
        return _per_qubit(clifford_conjugate(cycle, twirl, track_sign=track_sign))
    if cycle.two_qubit_gate is not None:
        raise UnsupportedHardCycleError(
            f"hard cycle {cycle.signature} is neither Clifford nor a product of 1q gates"
        )
    out = {}
    for g in cycle.gates:
        q = g.qubits[0]
        m = g.matrix
        out[q] = m @ PAULI_MATRICES[twirl.label[q]] @ m.conj().T
    return out


def randomize_with_twirls(
    c: Circuit, twirls: tuple[PauliString, ...], *, track_sign: bool = True
) -> RandomizedCircuit:
    """Compile a given twirl list (one unsigned Pauli per hard cycle)."""
    if len(twirls) != c.K:
        raise ValueError(f"need {c.K} twirls, got {len(twirls)}")
    cycles = list(c.cycles)
    prev_correction: dict[int, np.ndarray] = {}
    for k in range(c.K + 1):
        easy_idx = 2 * k
        after = _per_qubit(twirls[k]) if k < c.K else {}
        cycles[easy_idx] = recompile_cycle_pair(c.cycles[easy_idx], before=prev_correction, after=after)
        if k < c.K:
            prev_correction = correction_for(c.cycles[easy_idx + 1], twirls[k], track_sign=track_sign)
    return RandomizedCircuit(c, tuple(twirls), Circuit(c.n, tuple(cycles)))


def random_pauli(n: int, rng: np.random.Generator) -> PauliString:
    return PauliString.from_label("".join("IXYZ"[i] for i in rng.integers(4, size=n)))


def randomize(c: Circuit, rng: np.random.Generator) -> RandomizedCircuit:
    """One logically equivalent randomization with uniform n-qubit Pauli twirls."""
    twirls = tuple(random_pauli(c.n, rng) for _ in range(c.K))
    return randomize_with_twirls(c, twirls)


def randomize_batch(c: Circuit, N: int, seed: int) -> list[RandomizedCircuit]:
    """``N`` independent randomizations; index ``i`` uses the stream ``(seed, i)``."""
    if N < 1:
        raise ValueError("N must be at least 1")
    return [randomize(c, np.random.default_rng([seed, i])) for i in range(N)]


def all_twirl_sets(c: Circuit):
    """Iterate over every twirl assignment (4**(n*K) of them)."""
    paulis = [PauliString.from_label("".join(t)) for t in itertools.product("IXYZ", repeat=c.n)]
    return itertools.product(paulis, repeat=c.K)


def verify_equivalence(a: Circuit, b: Circuit, atol: float = 1e-9) -> tuple[bool, float]:
    """Compare unitaries up to a global phase taken from the largest entry."""
    if a.n != b.n:
        raise ValueError(f"dimension mismatch: {a.n} vs {b.n} qubits")
    ua, ub = circuit_unitary(a), circuit_unitary(b)
    idx = np.unravel_index(np.argmax(np.abs(ua)), ua.shape)
    if abs(ub[idx]) < 1e-12:
        return False, float(np.max(np.abs(ua - ub)))
    phase = ua[idx] / ub[idx]
    phase /= abs(phase)
    dev = float(np.max(np.abs(ua - phase * ub)))
    return dev < atol, dev
