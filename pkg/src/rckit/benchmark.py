"""Cycle benchmarking and Pauli error reconstruction on top of the simulator.

Sequences interleave the cycle of interest with random Pauli cycles. For a Clifford
cycle ``G`` the decay of a basis ``B`` only reveals the product of eigenvalues along
the orbit of ``B`` under ``G``, so lengths must be multiples of the cycle's order; the
fitted per-step ``p`` is then the geometric mean over the orbit.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import OptimizeWarning, curve_fit

from .circuit import Circuit, Cycle, easy_cycle, recompile_cycle_pair
from .metrics import BASIS_ROTATIONS
from .noise import NoiseModel, measure_distribution, simulate
from .pauli import (
    PAULI_MATRICES,
    PauliString,
    all_paulis,
    clifford_conjugate,
    inverse_walsh_hadamard,
    is_clifford_cycle,
    pauli_labels,
)
from .rc import random_pauli


class FitDegenerateError(ValueError):
    pass


class MissingBasisError(ValueError):
    pass


def cycle_order(cycle: Cycle, n: int, max_order: int = 24) -> int:
    """Smallest L with ``G^L P G^-L = +-P`` for every Pauli ``P``."""
    gens = [PauliString.from_label("I" * q + c + "I" * (n - q - 1)) for q in range(n) for c in "XZ"]
    cur = list(gens)
    for L in range(1, max_order + 1):
        cur = [clifford_conjugate(cycle, p) for p in cur]
        if all(a.label == b.label for a, b in zip(cur, gens)):
            return L
    raise ValueError("cycle order exceeds the search limit")


@dataclass(frozen=True)
class CBConfig:
    cycle: Cycle
    lengths: tuple[int, ...] = (2, 8, 24)
    randomizations_per_length: int = 10
    shots_per_circuit: int | None = None
    bases: tuple[PauliString, ...] | None = None

    def __post_init__(self):
        if self.cycle.kind != "hard":
            raise ValueError("cycle benchmarking needs a hard cycle")
        if not is_clifford_cycle(self.cycle):
            raise ValueError("cycle benchmarking needs a Clifford cycle")
        if len(set(self.lengths)) < 2 or min(self.lengths) < 1:
            raise ValueError("need at least two distinct positive lengths")
        if self.randomizations_per_length < 1:
            raise ValueError("randomizations_per_length must be positive")
        if self.shots_per_circuit is not None and self.shots_per_circuit < 1:
            raise ValueError("shots_per_circuit must be positive")
        order = cycle_order(self.cycle, self.n)
        if any(m % order for m in self.lengths):
            raise ValueError(f"lengths must be multiples of the cycle order {order}")
        for b in self.basis_list:
            if b.weight == 0:
                raise ValueError("the identity is not a valid CB basis")

    @property
    def n(self) -> int:
        return len(self.cycle.qubits)

    @property
    def basis_list(self) -> tuple[PauliString, ...]:
        if self.bases is not None:
            return tuple(self.bases)
        return tuple(all_paulis(self.n)[1:])


@dataclass(frozen=True)
class CBSequence:
    circuit: Circuit
    basis: PauliString
    m: int
    sign: int
    support: tuple[int, ...]


def _sequence(cycle: Cycle, n: int, basis: PauliString, m: int, rng) -> CBSequence:
    prep = {q: BASIS_ROTATIONS[c].conj().T for q, c in enumerate(basis.label) if c != "I"}
    cur = basis
    cycles = []
    for k in range(m):
        p = random_pauli(n, rng)
        pm = {q: PAULI_MATRICES[c] for q, c in enumerate(p.label)}
        before = prep if k == 0 else None
        cycles.append(recompile_cycle_pair(easy_cycle(n), before=before, after=pm))
        cycles.append(cycle)
        if not cur.commutes(p):
            cur = PauliString(cur.x, cur.z, (cur.k + 2) % 4)
        cur = clifford_conjugate(cycle, cur)
    meas = {q: BASIS_ROTATIONS[c] for q, c in enumerate(cur.label) if c != "I"}
    cycles.append(recompile_cycle_pair(easy_cycle(n), after=meas))
    sign = 1 if cur.k == 0 else -1
    return CBSequence(Circuit(n, tuple(cycles)), basis, m, sign, cur.support)


def generate_cb_sequences(cfg: CBConfig, rng: np.random.Generator) -> list[CBSequence]:
    """All (basis, length, randomization) sequences, basis-major."""
    out = []
    for b in cfg.basis_list:
        for m in cfg.lengths:
            for _ in range(cfg.randomizations_per_length):
                out.append(_sequence(cfg.cycle, cfg.n, b, m, rng))
    return out


def _parity_signs(n: int, support: Sequence[int]) -> np.ndarray:
    idx = np.arange(2**n)
    par = np.zeros(2**n, dtype=int)
    for q in support:
        par ^= (idx >> (n - 1 - q)) & 1
    return 1 - 2 * par


def fit_exponential(ms, means) -> tuple[float, float, np.ndarray]:
    """Fit ``A p^m`` by nonlinear least squares; returns ``(A, p, covariance)``."""
    ms = np.asarray(ms, dtype=float)
    means = np.asarray(means, dtype=float)
    if len(np.unique(ms)) < 2:
        raise ValueError("need at least two distinct lengths")
    if np.all(np.abs(means) < 1e-15):
        raise FitDegenerateError("all decay means are zero")
    # log-linear start on |mean|; alternating signs across odd/even lengths mean p < 0
    logs = np.log(np.clip(np.abs(means), 1e-12, None))
    slope = np.polyfit(ms, logs, 1)[0]
    p0 = float(np.clip(np.exp(slope), 1e-6, 1 - 1e-12))
    signs = np.sign(means) * (-1.0) ** ms
    if np.all(signs == signs[0]) and not np.all(np.sign(means) == np.sign(means[0])):
        p0 = -p0
    i = int(np.argmax(np.abs(means)))
    a0 = float(np.clip(means[i] / p0 ** ms[i], -2, 2))

    def model(m, a, p):
        return a * np.sign(p) ** m * np.abs(p) ** m

    try:
        with warnings.catch_warnings():
            # noiseless or exactly fitted data leave the covariance undefined (inf)
            warnings.simplefilter("ignore", OptimizeWarning)
            popt, pcov = curve_fit(
                model, ms, means, p0=(a0, p0), bounds=([-2.0, -1.0], [2.0, 1.0]),
                xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=10000,
            )
    except RuntimeError as exc:  # pragma: no cover - scipy only raises on nfev exhaustion
        raise FitDegenerateError(str(exc)) from exc
    return float(popt[0]), float(popt[1]), pcov


def _loglinear_p(ms: np.ndarray, means: np.ndarray) -> np.ndarray:
    """Vectorized log-linear decay estimate over the last axis (bootstrap statistic)."""
    y = np.log(np.clip(means, 1e-9, None))
    x = ms - ms.mean()
    slope = (y * x).sum(-1) / (x**2).sum()
    return np.clip(np.exp(slope), 0.0, 1.0)


@dataclass
class PauliDecay:
    basis: PauliString
    lengths: np.ndarray
    means: np.ndarray
    A: float
    p: float
    cov: np.ndarray
    samples: np.ndarray | None = None  # (len(lengths), randomizations)

    def to_dict(self) -> dict:
        d = {
            "basis": self.basis.label,
            "lengths": self.lengths.tolist(),
            "means": self.means.tolist(),
            "A": self.A,
            "p": self.p,
            "cov": np.nan_to_num(self.cov, posinf=1e300).tolist(),
        }
        if self.samples is not None:
            d["samples"] = self.samples.tolist()
        return d

    @classmethod
    def from_dict(cls, d) -> "PauliDecay":
        s = d.get("samples")
        return cls(
            PauliString.from_label(d["basis"]),
            np.asarray(d["lengths"], dtype=float),
            np.asarray(d["means"], dtype=float),
            float(d["A"]),
            float(d["p"]),
            np.asarray(d["cov"], dtype=float),
            None if s is None else np.asarray(s, dtype=float),
        )


def bootstrap_ci(samples, statistic=np.mean, resamples: int = 1000, rng=None, level: float = 0.95, axis: int = -1):
    """Percentile bootstrap over the resampling ``axis``; returns ``(low, high)``.

    ``statistic`` must accept an array and an ``axis`` keyword.
    """
    samples = np.asarray(samples, dtype=float)
    rng = np.random.default_rng(0) if rng is None else rng
    samples = np.moveaxis(samples, axis, -1)
    k = samples.shape[-1]
    if k == 0:
        raise ValueError("no samples")
    idx = rng.integers(k, size=(resamples, k))
    boot = statistic(samples[..., idx], axis=-1)  # (..., resamples)
    alpha = (1 - level) / 2
    lo, hi = np.quantile(boot, [alpha, 1 - alpha], axis=-1)
    return lo, hi


def process_infidelity_from_eigenvalues(p_nonidentity) -> float:
    p = np.asarray(p_nonidentity, dtype=float)
    return float(1 - (1 + p.sum()) / (p.size + 1))


@dataclass
class CBResult:
    n: int
    signature: str
    decays: list[PauliDecay]
    e_f: float
    e_f_ci: tuple[float, float] | None = None
    analytic_e_f: float | None = None
    config: dict = field(default_factory=dict)

    def eigenvalues(self) -> np.ndarray:
        """Full PTM-diagonal estimate indexed by Pauli index (identity fixed at 1)."""
        p = np.full(4**self.n, np.nan)
        p[0] = 1.0
        for d in self.decays:
            p[d.basis.index] = d.p
        return p

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "signature": self.signature,
            "e_f": self.e_f,
            "e_f_ci": None if self.e_f_ci is None else list(self.e_f_ci),
            "analytic_e_f": self.analytic_e_f,
            "config": self.config,
            "decays": [d.to_dict() for d in self.decays],
        }

    @classmethod
    def from_dict(cls, d) -> "CBResult":
        ci = d.get("e_f_ci")
        return cls(
            int(d["n"]),
            d["signature"],
            [PauliDecay.from_dict(x) for x in d["decays"]],
            float(d["e_f"]),
            None if ci is None else tuple(ci),
            d.get("analytic_e_f"),
            dict(d.get("config", {})),
        )


def run_cb(
    cfg: CBConfig,
    nm: NoiseModel,
    rng: np.random.Generator,
    *,
    exact_twirl: bool = False,
    resamples: int = 1000,
) -> CBResult:
    """Simulate cycle benchmarking and fit one decay per basis.

    ``shots_per_circuit=None`` uses exact outcome probabilities. ``exact_twirl`` replaces
    every noise channel by its Pauli twirl, which is the exact infinite-randomization
    average; each sequence then gives the same expectation, so one per length is run.
    """
    n = cfg.n
    model = nm.twirled() if exact_twirl else nm
    reps = 1 if exact_twirl and cfg.shots_per_circuit is None else cfg.randomizations_per_length
    run_cfg = CBConfig(cfg.cycle, cfg.lengths, reps, cfg.shots_per_circuit, cfg.bases)
    seqs = generate_cb_sequences(run_cfg, rng)
    ms = np.asarray(cfg.lengths, dtype=float)
    values = np.empty(len(seqs))
    for i, s in enumerate(seqs):
        dist = measure_distribution(simulate(s.circuit, model), model.readout)
        if cfg.shots_per_circuit is not None:
            probs = rng.multinomial(cfg.shots_per_circuit, dist.probs) / cfg.shots_per_circuit
        else:
            probs = dist.probs
        values[i] = s.sign * float(_parity_signs(n, s.support) @ probs)
    values = values.reshape(len(run_cfg.basis_list), len(ms), reps)

    decays = []
    for b, samples in zip(run_cfg.basis_list, values):
        means = samples.mean(-1)
        a, p, cov = fit_exponential(ms, means)
        decays.append(PauliDecay(b, ms, means, a, p, cov, samples))
    e_f = process_infidelity_from_eigenvalues([d.p for d in decays])
    ci = None
    if reps > 1 and len(decays) == 4**n - 1:
        ci = _bootstrap_ef(ms, values, resamples, rng, n, e_f)
    analytic = _analytic_e_f(nm, cfg.cycle, n)
    config = {
        "signature": cfg.cycle.signature,
        "lengths": list(cfg.lengths),
        "randomizations_per_length": reps,
        "shots_per_circuit": cfg.shots_per_circuit,
        "exact_twirl": exact_twirl,
    }
    return CBResult(n, cfg.cycle.signature, decays, e_f, ci, analytic, config)


def _bootstrap_eigenvalues(ms, values, resamples, rng) -> np.ndarray:
    """Bootstrap eigenvalue draws, shape ``(bases, resamples)``, resampling randomizations."""
    reps = values.shape[-1]
    idx = rng.integers(reps, size=(resamples, reps))
    boot = values[..., idx].mean(-1)  # (bases, lengths, resamples)
    return _loglinear_p(ms, np.moveaxis(boot, 1, -1))


def _bootstrap_ef(ms, values, resamples, rng, n, point) -> tuple[float, float]:
    # the bootstrap statistic is the log-linear fit; shift its spread onto the point estimate
    p = _bootstrap_eigenvalues(ms, values, resamples, rng)
    ef = 1 - (1 + p.sum(0)) / 4**n
    ref = 1 - (1 + _loglinear_p(ms, values.mean(-1)).sum()) / 4**n
    lo, hi = np.quantile(ef - ref + point, [0.025, 0.975])
    return float(lo), float(hi)


def _analytic_e_f(nm: NoiseModel, cycle: Cycle, n: int) -> float:
    ptm = nm.cycle_channel(cycle, n).ptm
    return float(1 - np.trace(ptm) / 4**n)


# --- error reconstruction -----------------------------------------------------------

@dataclass
class CERResult:
    n: int
    signature: str
    c: np.ndarray
    raw: np.ndarray
    clipped_mass: float
    boot: np.ndarray | None = None  # (resamples, 4**n) bootstrap draws of c

    @property
    def e_f(self) -> float:
        return float(1 - self.c[0])

    def _reduce(self, c: np.ndarray, qubits: Sequence[int]) -> np.ndarray:
        lead = c.shape[:-1]
        t = c.reshape(lead + (4,) * self.n)
        keep = tuple(len(lead) + q for q in range(self.n) if q not in qubits)
        sub = t.sum(axis=keep) if keep else t
        # remaining axes are in ascending qubit order; reorder to the requested order
        perm = [len(lead) + int(i) for i in np.argsort(np.argsort(qubits))]
        sub = np.transpose(sub, list(range(len(lead))) + perm)
        return sub.reshape(lead + (-1,))

    def marginal_distribution(self, qubits: Sequence[int]) -> np.ndarray:
        """Pauli probabilities reduced to ``qubits`` (indexed in the given qubit order)."""
        return self._reduce(self.c, qubits)

    def marginal(self, label: str, qubits: Sequence[int]) -> float:
        """Total probability of Paulis acting as ``label`` on ``qubits``."""
        if len(label) != len(qubits):
            raise ValueError("label and qubit list differ in length")
        return float(self.marginal_distribution(qubits)[PauliString.from_label(label).index])

    def ci(self, label: str, qubits: Sequence[int], level: float = 0.95) -> tuple[float, float] | None:
        if self.boot is None:
            return None
        draws = self._reduce(self.boot, qubits)[:, PauliString.from_label(label).index]
        alpha = (1 - level) / 2
        lo, hi = np.quantile(draws, [alpha, 1 - alpha])
        return float(lo), float(hi)

    def marginal_rows(self, pairs: Sequence[tuple[int, int]] | None = None) -> list[dict]:
        """Single-qubit X/Y/Z rates per qubit, then all two-qubit labels per pair."""
        if pairs is None:
            pairs = [(q, q + 1) for q in range(self.n - 1)]
        rows = []
        for qs in [(q,) for q in range(self.n)] + [tuple(p) for p in pairs]:
            for lab in pauli_labels(len(qs))[1:]:
                row = {"error_label": lab, "qubits": list(qs), "rate": self.marginal(lab, qs)}
                bounds = self.ci(lab, qs)
                if bounds is not None:
                    row["ci_low"], row["ci_high"] = bounds
                rows.append(row)
        return rows

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "signature": self.signature,
            "e_f": self.e_f,
            "clipped_mass": self.clipped_mass,
            "c": {lab: float(v) for lab, v in zip(pauli_labels(self.n), self.c)},
            "marginals": self.marginal_rows(),
        }

    @classmethod
    def from_dict(cls, d) -> "CERResult":
        n = int(d["n"])
        c = np.array([d["c"][lab] for lab in pauli_labels(n)], dtype=float)
        return cls(n, d["signature"], c, c.copy(), float(d.get("clipped_mass", 0.0)))


def clip_and_renormalize(raw: np.ndarray) -> tuple[np.ndarray, float]:
    clipped = np.clip(raw, 0.0, None)
    mass = float(clipped.sum() - raw.sum())
    return clipped / clipped.sum(), mass


def reconstruct_error_rates(result: CBResult, *, resamples: int = 1000, rng=None) -> CERResult:
    """Invert measured eigenvalues to Pauli error probabilities.

    Negative entries are clipped to zero and the rest renormalized; the clipped mass is
    kept on the result. With per-randomization samples a percentile bootstrap gives
    95% intervals for every entry and marginal.
    """
    n = result.n
    p = result.eigenvalues()
    missing = [lab for lab, v in zip(pauli_labels(n), p) if np.isnan(v)]
    if missing:
        raise MissingBasisError(f"missing decays for bases {missing[:5]}")
    raw = inverse_walsh_hadamard(p)
    c, mass = clip_and_renormalize(raw)
    out = CERResult(n, result.signature, c, raw, mass)
    samples = [d.samples for d in result.decays]
    if all(s is not None and s.shape[-1] > 1 for s in samples):
        rng = np.random.default_rng(0) if rng is None else rng
        order = np.argsort([d.basis.index for d in result.decays])
        values = np.stack([samples[i] for i in order])
        ms = result.decays[0].lengths
        pb = _bootstrap_eigenvalues(ms, values, resamples, rng)
        pb = pb - _loglinear_p(ms, values.mean(-1))[:, None] + p[1:, None]
        pfull = np.vstack([np.ones((1, resamples)), pb])
        cb = inverse_walsh_hadamard(pfull.T)  # (resamples, 4^n)
        cb = np.clip(cb, 0.0, None)
        cb /= cb.sum(-1, keepdims=True)
        out.boot = cb
    return out


def cer_json(results: Sequence[CERResult]) -> str:
    return json.dumps({"cycles": [r.to_dict() for r in results]}, indent=2)


def load_cer(path) -> list[CERResult]:
    with open(path) as fh:
        data = json.load(fh)
    return [CERResult.from_dict(d) for d in data["cycles"]]


def default_lengths(e_f: float, order: int = 1) -> tuple[int, ...]:
    """Lengths spanning roughly ``p^m`` in [0.2, 0.9] for a per-step infidelity ``e_f``."""
    e_f = max(e_f, 1e-4)
    lo = max(1, int(round(-math.log(0.9) / e_f)))
    hi = max(lo + 1, int(round(-math.log(0.2) / e_f)))
    mid = int(round(math.sqrt(lo * hi)))
    ms = sorted({-(-m // order) * order for m in (lo, mid, hi)})
    while len(ms) < 2:
        ms.append(ms[-1] + order)
    return tuple(ms)
