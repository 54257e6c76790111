"""Distances, fidelities, tomography and the statistics used to score experiments."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import stats

from .noise import Channel, Distribution, measure_distribution

_H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
_SDG = np.diag([1, -1j])

# maps the +1 eigenvector of the named Pauli to |0>
BASIS_ROTATIONS = {"X": _H, "Y": _H @ _SDG, "Z": np.eye(2, dtype=complex)}


def _as_probs(d) -> np.ndarray:
    if isinstance(d, Distribution):
        return d.p()
    p = np.asarray(d, dtype=float)
    return p / p.sum()


def tvd(p, q) -> float:
    """Total variation distance; counts are normalized first."""
    if isinstance(p, Distribution) and isinstance(q, Distribution) and p.n != q.n:
        raise ValueError(f"distributions on {p.n} and {q.n} qubits")
    a, b = _as_probs(p), _as_probs(q)
    if a.shape != b.shape:
        raise ValueError("distributions have different sizes")
    return float(0.5 * np.abs(a - b).sum())


def uniformity_distance(p_ideal) -> float:
    a = _as_probs(p_ideal)
    return tvd(a, np.full(a.size, 1.0 / a.size))


def _check_hermitian(m: np.ndarray, atol: float = 1e-10) -> np.ndarray:
    m = np.asarray(m, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1] or not np.allclose(m, m.conj().T, atol=atol):
        raise ValueError("expected a Hermitian matrix")
    return m


def trace_distance(rho: np.ndarray, sigma: np.ndarray) -> float:
    diff = _check_hermitian(rho) - _check_hermitian(sigma)
    return float(0.5 * np.abs(np.linalg.eigvalsh(diff)).sum())


def state_fidelity(rho: np.ndarray, psi: np.ndarray) -> float:
    """``<psi|rho|psi>`` for a pure target."""
    psi = np.asarray(psi, dtype=complex).reshape(-1)
    return float(np.real(psi.conj() @ _check_hermitian(rho) @ psi))


def purity(rho: np.ndarray) -> float:
    rho = _check_hermitian(rho)
    return float(np.real(np.trace(rho @ rho)))


def bloch_vector(rho: np.ndarray) -> np.ndarray:
    rho = _check_hermitian(rho)
    if rho.shape != (2, 2):
        raise ValueError("Bloch vectors are single-qubit only")
    return np.array([2 * rho[0, 1].real, -2 * rho[0, 1].imag, (rho[0, 0] - rho[1, 1]).real])


def state_from_bloch(r) -> np.ndarray:
    x, y, z = r
    return 0.5 * np.array([[1 + z, x - 1j * y], [x + 1j * y, 1 - z]])


@dataclass(frozen=True)
class BlochState:
    r: np.ndarray
    source: tuple[float, float, float]
    fidelity: float | None = None

    @property
    def purity(self) -> float:
        return float((1 + self.r @ self.r) / 2)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.r))

    def projection(self, ideal_r) -> float:
        """Component of ``r`` along the ideal direction; equals ``norm`` iff co-linear."""
        u = np.asarray(ideal_r, dtype=float)
        return float(self.r @ u / np.linalg.norm(u))


def _expectation(counts) -> float:
    if isinstance(counts, Distribution):
        if counts.n != 1:
            raise ValueError("tomography counts must be single-qubit")
        c = counts.counts if counts.counts is not None else counts.probs
    else:
        c = np.asarray(counts, dtype=float)
    total = float(np.sum(c))
    if total <= 0:
        raise ValueError("empty counts")
    return float((c[0] - c[1]) / total)


def bloch_from_tomography(counts_x, counts_y, counts_z, ideal_r=None) -> BlochState:
    """Bloch vector from X/Y/Z-basis counts (outcome 0 is the +1 eigenvalue).

    With ``ideal_r`` (a pure target's Bloch vector) the fidelity ``(1 + r . r_ideal)/2``
    is included.
    """
    src = (_expectation(counts_x), _expectation(counts_y), _expectation(counts_z))
    r = np.array(src)
    fid = None if ideal_r is None else float((1 + r @ np.asarray(ideal_r, dtype=float)) / 2)
    return BlochState(r, src, fid)


def process_to_average_infidelity(e_f: float, d: int) -> float:
    return e_f * d / (d + 1)


def average_to_process_infidelity(r: float, d: int) -> float:
    return r * (d + 1) / d


def process_infidelity(ch: Channel) -> float:
    return float(1 - np.trace(ch.ptm) / 4**ch.n_body)


def avg_gate_infidelity(ch: Channel) -> float:
    """Average gate infidelity of an error channel relative to the identity."""
    return process_to_average_infidelity(process_infidelity(ch), 2**ch.n_body)


def product_state(labels: str) -> np.ndarray:
    """State vector of a product of single-qubit states from ``01+-rl``."""
    vecs = {
        "0": [1, 0],
        "1": [0, 1],
        "+": [1, 1],
        "-": [1, -1],
        "r": [1, 1j],
        "l": [1, -1j],
    }
    out = np.array([1.0 + 0j])
    for c in labels:
        v = np.array(vecs[c], dtype=complex)
        out = np.kron(out, v / np.linalg.norm(v))
    return out


def pauli_basis_distribution(rho: np.ndarray, basis: str) -> np.ndarray:
    """Outcome probabilities when each qubit is measured in the given X/Y/Z basis."""
    v = np.array([[1.0 + 0j]])
    for b in basis:
        v = np.kron(v, BASIS_ROTATIONS[b])
    return measure_distribution(v @ rho @ v.conj().T).probs


@dataclass(frozen=True)
class WorstCase:
    value: float
    state: np.ndarray
    basis: str


def worst_case_tvd(ch: Channel, n_probe_states: int = 64, seed: int = 0) -> WorstCase:
    """Largest outcome TVD between ideal and noisy states over sampled probes.

    Probes are every product of Pauli eigenstates plus ``n_probe_states`` Haar-random
    pure states; each is measured in every product Pauli basis.
    """
    n = ch.n_body
    if n > 2:
        raise ValueError("worst_case_tvd supports one- and two-qubit channels")
    rng = np.random.default_rng(seed)
    states = [product_state("".join(s)) for s in itertools.product("01+-rl", repeat=n)]
    d = 2**n
    for _ in range(n_probe_states):
        z = rng.normal(size=d) + 1j * rng.normal(size=d)
        states.append(z / np.linalg.norm(z))
    bases = ["".join(b) for b in itertools.product("XYZ", repeat=n)]
    best = WorstCase(-1.0, states[0], bases[0])
    for psi in states:
        rho = np.outer(psi, psi.conj())
        out = ch.apply(rho)
        for b in bases:
            val = tvd(pauli_basis_distribution(rho, b), pauli_basis_distribution(out, b))
            if val > best.value:
                best = WorstCase(val, psi, b)
    return best


def loglog_slope(xs, ys) -> float:
    """Least-squares slope of ``log y`` against ``log x``."""
    return float(np.polyfit(np.log(xs), np.log(ys), 1)[0])


def pearson_r(xs, ys) -> float:
    xs, ys = np.asarray(xs, dtype=float), np.asarray(ys, dtype=float)
    if xs.size < 3 or xs.size != ys.size:
        raise ValueError("need at least three paired points")
    if np.std(xs) == 0 or np.std(ys) == 0:
        raise ValueError("zero variance")
    return float(np.corrcoef(xs, ys)[0, 1])


def normal_overlap(mu1: float, s1: float, mu2: float, s2: float) -> float:
    """Integral of the pointwise minimum of two normal densities."""
    if s1 <= 0 or s2 <= 0:
        raise ValueError("standard deviations must be positive")
    if np.isclose(s1, s2):
        if np.isclose(mu1, mu2):
            return 1.0
        crossings = [(mu1 + mu2) / 2]
    else:
        # equate log-densities: a x^2 + b x + c = 0
        a = 1 / (2 * s2**2) - 1 / (2 * s1**2)
        b = mu1 / s1**2 - mu2 / s2**2
        c = mu2**2 / (2 * s2**2) - mu1**2 / (2 * s1**2) + np.log(s2 / s1)
        crossings = sorted(np.roots([a, b, c]).real)
    edges = [-np.inf, *crossings, np.inf]
    n1, n2 = stats.norm(mu1, s1), stats.norm(mu2, s2)
    total = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        if np.isinf(lo) and np.isinf(hi):
            mid = 0.0
        elif np.isinf(lo):
            mid = hi - 1.0
        elif np.isinf(hi):
            mid = lo + 1.0
        else:
            mid = (lo + hi) / 2
        lower = n1 if n1.logpdf(mid) < n2.logpdf(mid) else n2
        total += lower.cdf(hi) - lower.cdf(lo)
    return float(total)


def overlapping_index(sample_a, sample_b) -> float:
    """Overlap of normal densities fitted to two samples."""
    a, b = np.asarray(sample_a, dtype=float), np.asarray(sample_b, dtype=float)
    if a.size < 3 or b.size < 3:
        raise ValueError("need at least three points per sample")
    sa, sb = a.std(ddof=1), b.std(ddof=1)
    if sa == 0 or sb == 0:
        raise ValueError("zero variance")
    return normal_overlap(a.mean(), sa, b.mean(), sb)


def spearman_r(xs, ys) -> float:
    return float(stats.spearmanr(xs, ys).statistic)


def expectation_error_bound_check(p, q, observable: Sequence[float]) -> bool:
    """``|<A>_p - <A>_q| <= 2 tvd(p, q) ||A||`` for an observable diagonal in the outcome basis."""
    a = np.asarray(observable, dtype=float)
    pp, qq = _as_probs(p), _as_probs(q)
    lhs = abs(a @ pp - a @ qq)
    return bool(lhs <= 2 * tvd(pp, qq) * np.abs(a).max() + 1e-12)
