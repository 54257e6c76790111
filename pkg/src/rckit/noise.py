"""Channels, cycle-keyed noise models and exact density-matrix simulation."""

from __future__ import annotations

import functools
import json
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy.linalg import expm

from .circuit import Circuit, Cycle, cycle_unitary
from .pauli import pauli_basis, walsh_hadamard

MAX_SIM_QUBITS = 5


class MissingCycleRuleError(KeyError):
    pass


class Channel:
    """CPTP map on ``n_body`` qubits, stored as a row-major Liouville superoperator.

    ``vec(A rho B) = (A kron B^T) vec(rho)`` with row-major ``vec``; a Kraus set
    ``{K_i}`` gives ``sum_i K_i kron conj(K_i)``.
    """

    def __init__(self, superop: np.ndarray, kraus: Sequence[np.ndarray] | None = None):
        superop = np.asarray(superop, dtype=complex)
        d2 = superop.shape[0]
        d = int(round(np.sqrt(d2)))
        if superop.shape != (d2, d2) or d * d != d2 or d & (d - 1):
            raise ValueError("superoperator must be 4**n x 4**n")
        self.superop = superop
        self.superop.setflags(write=False)
        self.dim = d
        self.n_body = d.bit_length() - 1
        self._kraus = None if kraus is None else [np.asarray(k, dtype=complex) for k in kraus]

    @classmethod
    def from_kraus(cls, kraus: Iterable[np.ndarray]) -> "Channel":
        kraus = [np.asarray(k, dtype=complex) for k in kraus]
        s = sum(np.kron(k, k.conj()) for k in kraus)
        return cls(s, kraus)

    @classmethod
    def from_unitary(cls, u: np.ndarray) -> "Channel":
        return cls.from_kraus([u])

    @classmethod
    def from_ptm(cls, ptm: np.ndarray) -> "Channel":
        ptm = np.asarray(ptm, dtype=float)
        n = (ptm.shape[0].bit_length() - 1) // 2
        basis = pauli_basis(n)
        d = 2**n
        vecs = basis.reshape(len(basis), -1)
        # superop = sum_{Q,P} R_QP |Q>><<P| / d
        s = vecs.T @ ptm @ vecs.conj() / d
        return cls(s)

    @classmethod
    def identity(cls, n_body: int) -> "Channel":
        return cls(np.eye(4**n_body, dtype=complex), [np.eye(2**n_body)])

    @property
    def kraus(self) -> list[np.ndarray]:
        if self._kraus is None:
            w, v = np.linalg.eigh(self.choi())
            ks = []
            for val, vec in zip(w, v.T):
                if val > 1e-14:
                    # Choi column index (i, r) holds K[r, i]
                    ks.append(np.sqrt(val) * vec.reshape(self.dim, self.dim).T)
            self._kraus = ks
        return self._kraus

    @functools.cached_property
    def ptm(self) -> np.ndarray:
        basis = pauli_basis(self.n_body)
        vecs = basis.reshape(len(basis), -1)
        images = vecs @ self.superop.T  # row P = vec(E(P))
        return (vecs.conj() @ images.T).real / self.dim

    def choi(self) -> np.ndarray:
        """Choi matrix ``sum_ij |i><j| (x) E(|i><j|)``."""
        d = self.dim
        s = self.superop.reshape(d, d, d, d)  # [r', c', r, c]
        return s.transpose(2, 0, 3, 1).reshape(d * d, d * d)

    def apply(self, rho: np.ndarray) -> np.ndarray:
        return (self.superop @ np.asarray(rho).reshape(-1)).reshape(self.dim, self.dim)

    def compose(self, first: "Channel") -> "Channel":
        """``self`` applied after ``first``."""
        return Channel(self.superop @ first.superop)

    def tensor(self, other: "Channel") -> "Channel":
        d1, d2 = self.dim, other.dim
        s = np.einsum("abcd,efgh->aebfcgdh", self.superop.reshape(d1, d1, d1, d1),
                      other.superop.reshape(d2, d2, d2, d2))
        return Channel(s.reshape((d1 * d2) ** 2, (d1 * d2) ** 2))

    def twirled(self) -> "Channel":
        """Pauli twirl: keep only the PTM diagonal."""
        return make_pauli_channel_from_eigenvalues(np.diag(self.ptm))

    def is_cptp(self, atol: float = 1e-10) -> bool:
        tp = np.abs(self.ptm[0] - np.eye(4**self.n_body)[0]).max() < atol
        cp = np.linalg.eigvalsh(self.choi()).min() > -atol
        return bool(tp and cp)

    def __repr__(self) -> str:
        return f"Channel(n_body={self.n_body})"


def _check_simplex(q: np.ndarray, atol: float = 1e-9) -> None:
    if np.any(q < -atol):
        raise ValueError("Pauli probabilities must be nonnegative")
    if abs(q.sum() - 1) > atol:
        raise ValueError(f"Pauli probabilities must sum to 1, got {q.sum():.12g}")


def make_pauli_channel(q) -> Channel:
    """Pauli channel ``rho -> sum_i q_i P_i rho P_i`` (Kraus ``sqrt(q_i) P_i``)."""
    q = np.asarray(q, dtype=float)
    _check_simplex(q)
    n = (q.size.bit_length() - 1) // 2
    basis = pauli_basis(n)
    kraus = [np.sqrt(max(qi, 0.0)) * basis[i] for i, qi in enumerate(q) if qi > 0]
    return Channel.from_kraus(kraus)


def make_pauli_channel_from_eigenvalues(p) -> Channel:
    return Channel.from_ptm(np.diag(np.asarray(p, dtype=float)))


def coherent_unitary(h) -> np.ndarray:
    """``exp(-i sum_i h_i P_i)`` over the non-identity Paulis in index order."""
    h = np.asarray(h, dtype=float)
    n = ((h.size + 1).bit_length() - 1) // 2
    if 4**n - 1 != h.size:
        raise ValueError("h must have length 4**n - 1")
    if not np.all(np.isfinite(h)):
        raise ValueError("h must be finite")
    gen = np.tensordot(h, pauli_basis(n)[1:], axes=1)
    return expm(-1j * gen)


def make_coherent(h) -> Channel:
    return Channel.from_unitary(coherent_unitary(h))


def compose_sqh(q, h) -> Channel:
    """``S(q, h) = U_h o K_q``: a Pauli channel followed by a coherent rotation."""
    q = np.asarray(q, dtype=float)
    h = np.asarray(h, dtype=float)
    if q.size != h.size + 1:
        raise ValueError("q and h act on different numbers of qubits")
    u = coherent_unitary(h)
    k = make_pauli_channel(q)
    return Channel.from_kraus([u @ kk for kk in k.kraus])


def unitarity(ch: Channel) -> float:
    """Normalized squared Frobenius norm of the unital PTM block."""
    block = ch.ptm[1:, 1:]
    return float(np.sum(block**2) / (4**ch.n_body - 1))


def process_fidelity(ch: Channel) -> float:
    return float(np.trace(ch.ptm) / 4**ch.n_body)


# --- noise models --------------------------------------------------------------

@dataclass
class Body:
    qubits: tuple[int, ...]
    channel: Channel
    q: np.ndarray | None = None
    h: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    @classmethod
    def from_qh(cls, qubits, q, h=None, meta=None) -> "Body":
        q = np.asarray(q, dtype=float)
        h = np.zeros(q.size - 1) if h is None else np.asarray(h, dtype=float)
        return cls(tuple(qubits), compose_sqh(q, h), q, h, dict(meta or {}))

    def to_dict(self) -> dict:
        if self.q is None:
            raise ValueError("only (q, h) bodies are serializable")
        d = {"qubits": list(self.qubits), "q": self.q.tolist(), "h": self.h.tolist()}
        d.update(self.meta)
        return d

    @classmethod
    def from_dict(cls, d: Mapping) -> "Body":
        meta = {k: v for k, v in d.items() if k not in ("qubits", "q", "h")}
        return cls.from_qh(d["qubits"], d["q"], d.get("h"), meta)


class NoiseModel:
    """Hard-cycle signature -> per-body channels, plus readout confusion.

    ``default_bodies`` (single-qubit bodies) apply to unseen signatures; with
    ``ideal_default=True`` unseen signatures are noiseless instead.
    """

    def __init__(
        self,
        rules: Mapping[str, Sequence[Body]] | None = None,
        default_bodies: Sequence[Body] | None = None,
        readout: Sequence[tuple[float, float]] | None = None,
        ideal_default: bool = False,
    ):
        self.rules = {k: list(v) for k, v in (rules or {}).items()}
        self.default_bodies = None if default_bodies is None else list(default_bodies)
        self.readout = None if readout is None else [tuple(map(float, r)) for r in readout]
        self.ideal_default = ideal_default
        for r in self.readout or []:
            if not all(0.0 <= p <= 1.0 for p in r):
                raise ValueError("readout probabilities must lie in [0, 1]")
        self._cache: dict = {}

    @classmethod
    def ideal(cls) -> "NoiseModel":
        return cls(ideal_default=True)

    def bodies_for(self, cycle: Cycle, n: int) -> list[Body]:
        sig = cycle.signature
        if sig in self.rules:
            bodies = self.rules[sig]
        elif self.default_bodies is not None:
            bodies = [b for b in self.default_bodies if b.qubits[0] < n]
        elif self.ideal_default:
            return []
        else:
            raise MissingCycleRuleError(f"no noise rule for hard cycle {sig}")
        covered = sorted(q for b in bodies for q in b.qubits)
        if covered != list(range(n)):
            raise ValueError(f"bodies for {sig} must cover qubits 0..{n - 1} disjointly")
        return bodies

    def cycle_channel(self, cycle: Cycle, n: int) -> Channel:
        """Full n-qubit noise channel of a hard cycle (tensor product of bodies)."""
        bodies = self.bodies_for(cycle, n)
        rho_axes = _body_ops(bodies, n)
        d = 2**n
        basis = np.eye(d * d, dtype=complex).reshape((d * d,) + (2,) * (2 * n))
        out = basis
        for axes, op in rho_axes:
            out = _apply_superop(out, op, axes, offset=1)
        return Channel(out.reshape(d * d, d * d).T)

    def twirled(self) -> "NoiseModel":
        """Same model with every body channel replaced by its Pauli twirl."""
        def tw(bodies):
            return [Body(b.qubits, b.channel.twirled(), meta=dict(b.meta)) for b in bodies]

        return NoiseModel(
            {k: tw(v) for k, v in self.rules.items()},
            None if self.default_bodies is None else tw(self.default_bodies),
            self.readout,
            self.ideal_default,
        )

    def _ops(self, cycle: Cycle, n: int):
        key = (cycle.signature, n)
        if key not in self._cache:
            self._cache[key] = _body_ops(self.bodies_for(cycle, n), n)
        return self._cache[key]

    def to_dict(self) -> dict:
        d = {
            "cycles": [
                {"signature": sig, "bodies": [b.to_dict() for b in bodies]}
                for sig, bodies in self.rules.items()
            ]
        }
        if self.default_bodies is not None:
            d["default_bodies"] = [b.to_dict() for b in self.default_bodies]
        if self.readout is not None:
            d["readout"] = [{"p00": a, "p11": b} for a, b in self.readout]
        return d

    @classmethod
    def from_dict(cls, d: Mapping) -> "NoiseModel":
        rules = {c["signature"]: [Body.from_dict(b) for b in c["bodies"]] for c in d.get("cycles", [])}
        default = d.get("default_bodies")
        readout = d.get("readout")
        return cls(
            rules,
            None if default is None else [Body.from_dict(b) for b in default],
            None if readout is None else [(r["p00"], r["p11"]) for r in readout],
        )

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)

    @classmethod
    def from_json(cls, text: str) -> "NoiseModel":
        return cls.from_dict(json.loads(text))

    @classmethod
    def load(cls, path) -> "NoiseModel":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def _body_ops(bodies: Sequence[Body], n: int):
    ops = []
    for b in bodies:
        k = len(b.qubits)
        if np.allclose(b.channel.superop, np.eye(4**k), atol=1e-15):
            continue
        axes = list(b.qubits) + [n + q for q in b.qubits]
        ops.append((axes, b.channel.superop.reshape((2,) * (4 * k))))
    return ops


def _apply_superop(rho_t: np.ndarray, op: np.ndarray, axes: list[int], offset: int = 0) -> np.ndarray:
    k2 = len(axes)
    src = [offset + a for a in axes]
    out = np.tensordot(op, rho_t, axes=(list(range(k2, 2 * k2)), src))
    return np.moveaxis(out, list(range(k2)), src)


# --- simulation -------------------------------------------------------------------

def zero_state(n: int) -> np.ndarray:
    rho = np.zeros((2**n, 2**n), dtype=complex)
    rho[0, 0] = 1
    return rho


def simulate(c: Circuit, nm: NoiseModel, rho0: np.ndarray | None = None) -> np.ndarray:
    """Exact density matrix: easy cycles ideal, hard cycles followed by their noise."""
    n = c.n
    if n > MAX_SIM_QUBITS:
        raise ValueError(f"simulation limited to {MAX_SIM_QUBITS} qubits")
    d = 2**n
    rho = zero_state(n) if rho0 is None else np.array(rho0, dtype=complex)
    for cyc in c.cycles:
        u = cycle_unitary(cyc, n)
        rho = u @ rho @ u.conj().T
        if cyc.kind == "hard":
            ops = nm._ops(cyc, n)
            if ops:
                t = rho.reshape((2,) * (2 * n))
                for axes, op in ops:
                    t = _apply_superop(t, op, axes)
                rho = t.reshape(d, d)
    return rho


# --- distributions ----------------------------------------------------------------

@dataclass
class Distribution:
    """Outcome distribution over ``2**n`` bitstrings (qubit 0 is the leftmost bit).

    Exactly one of ``probs`` (floats summing to one) or ``counts`` (integers) is set.
    """

    n: int
    probs: np.ndarray | None = None
    counts: np.ndarray | None = None

    def __post_init__(self):
        if (self.probs is None) == (self.counts is None):
            raise ValueError("give exactly one of probs or counts")
        if self.probs is not None:
            self.probs = np.asarray(self.probs, dtype=float)
            if self.probs.shape != (2**self.n,):
                raise ValueError("probability vector has the wrong length")
            if abs(self.probs.sum() - 1) > 1e-10:
                raise ValueError("probabilities must sum to 1")
        else:
            self.counts = np.asarray(self.counts, dtype=np.int64)
            if self.counts.shape != (2**self.n,):
                raise ValueError("count vector has the wrong length")
            if np.any(self.counts < 0):
                raise ValueError("counts must be nonnegative")

    @property
    def shots(self) -> int | None:
        return None if self.counts is None else int(self.counts.sum())

    def p(self) -> np.ndarray:
        """Normalized probabilities."""
        if self.probs is not None:
            return self.probs
        return self.counts / self.counts.sum()

    def bitstrings(self) -> list[str]:
        return [format(i, f"0{self.n}b") for i in range(2**self.n)]

    def to_dict(self) -> dict:
        vals = self.probs if self.probs is not None else self.counts
        key = "probs" if self.probs is not None else "counts"
        return {
            "n": self.n,
            key: {b: (float(v) if key == "probs" else int(v)) for b, v in zip(self.bitstrings(), vals) if v},
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "Distribution":
        n = int(d["n"])
        if "probs" in d:
            arr = np.zeros(2**n)
            for b, v in d["probs"].items():
                arr[int(b, 2)] = v
            return cls(n, probs=arr)
        arr = np.zeros(2**n, dtype=np.int64)
        for b, v in d["counts"].items():
            arr[int(b, 2)] = v
        return cls(n, counts=arr)

    @classmethod
    def uniform(cls, n: int) -> "Distribution":
        return cls(n, probs=np.full(2**n, 2.0**-n))


def confusion_matrix(p00: float, p11: float) -> np.ndarray:
    return np.array([[p00, 1 - p11], [1 - p00, p11]])


def measure_distribution(rho: np.ndarray, readout: Sequence[tuple[float, float]] | None = None) -> Distribution:
    """Computational-basis outcome probabilities after per-qubit readout confusion."""
    p = np.clip(np.real(np.diag(rho)), 0.0, None)
    p = p / p.sum()
    n = p.size.bit_length() - 1
    if readout is not None:
        if len(readout) < n:
            raise ValueError("readout model has fewer qubits than the state")
        t = p.reshape((2,) * n)
        for q in range(n):
            p00, p11 = readout[q]
            if not (0 <= p00 <= 1 and 0 <= p11 <= 1):
                raise ValueError("readout probabilities must lie in [0, 1]")
            t = np.moveaxis(np.tensordot(confusion_matrix(p00, p11), t, axes=([1], [q])), 0, q)
        p = t.reshape(-1)
    return Distribution(n, probs=p / p.sum())


def sample_counts(d: Distribution, shots: int, rng: np.random.Generator) -> Distribution:
    if shots <= 0:
        raise ValueError("shots must be positive")
    return Distribution(d.n, counts=rng.multinomial(shots, d.p()))


def union_counts(dists: Sequence[Distribution]) -> Distribution:
    if not dists:
        raise ValueError("nothing to combine")
    n = dists[0].n
    if any(d.n != n for d in dists):
        raise ValueError("distributions act on different numbers of qubits")
    return Distribution(n, counts=sum(d.counts for d in dists))


def subsample_counts(d: Distribution, shots: int, rng: np.random.Generator) -> Distribution:
    """Keep ``shots`` of the recorded shots, discarding the rest uniformly at random."""
    if shots > d.shots:
        raise ValueError("cannot keep more shots than recorded")
    return Distribution(d.n, counts=rng.multivariate_hypergeometric(d.counts, shots))


def pauli_product_distribution(n: int, bodies: Sequence[tuple[Sequence[int], np.ndarray]]) -> np.ndarray:
    """Joint Pauli probabilities of independent bodies (disjoint, covering 0..n-1)."""
    covered = sorted(q for qs, _ in bodies for q in qs)
    if covered != list(range(n)):
        raise ValueError("bodies must cover every qubit exactly once")
    t = np.ones(())
    axes: list[int] = []
    for qs, q in bodies:
        t = np.multiply.outer(t, np.asarray(q, dtype=float).reshape((4,) * len(qs)))
        axes += list(qs)
    return np.transpose(t, np.argsort(axes)).reshape(-1)
