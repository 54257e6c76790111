"""Fit per-body S(q, h) channels to a target PTM diagonal and unitarity."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.optimize import least_squares, minimize
from scipy.special import softmax

from .benchmark import CERResult
from .noise import Body, NoiseModel, coherent_unitary, compose_sqh, unitarity
from .pauli import inverse_walsh_hadamard, pauli_basis, walsh_hadamard

SUCCESS_THRESHOLD = 1e-10


class FitFailedError(RuntimeError):
    def __init__(self, message: str, best: "FitResult | None" = None):
        super().__init__(message)
        self.best = best


@dataclass(frozen=True)
class FitTarget:
    """Target PTM diagonal ``f`` scaled by ``s0``; unitarity set by ``s1``.

    The unitarity target uses the mean of the scaled diagonal ``d``, so ``s1 = 0`` and
    ``s1 = 1`` stay the stochastic and unitary ends for any ``s0``. ``u`` overrides the
    unitarity target when given (used to refit a known channel).
    """

    f: np.ndarray
    s0: float = 1.0
    s1: float = 0.0
    u: float | None = None

    def __post_init__(self):
        f = np.asarray(self.f, dtype=float)
        object.__setattr__(self, "f", f)
        n = (f.size.bit_length() - 1) // 2
        if 4**n != f.size or n not in (1, 2):
            raise ValueError("f must have length 4 or 16")
        if abs(f[0] - 1) > 1e-9:
            raise ValueError("f[identity] must be 1")
        if np.any(np.abs(f) > 1 + 1e-9):
            raise ValueError("f entries must lie in [-1, 1]")
        if not (0 <= self.s0 <= 1 and 0 <= self.s1 <= 1):
            raise ValueError("s0 and s1 must lie in [0, 1]")

    @property
    def n_body(self) -> int:
        return (self.f.size.bit_length() - 1) // 2

    @property
    def d(self) -> np.ndarray:
        return 1 - self.s0 * (1 - self.f)

    @property
    def u_target(self) -> float:
        if self.u is not None:
            return float(self.u)
        dbar = self.d.mean()
        return float(1 - (1 - self.s1) * (1 - dbar**2))


@dataclass
class FitResult:
    q: np.ndarray
    h: np.ndarray
    residual: float
    iterations: int
    d: np.ndarray
    u: float
    target: FitTarget

    @property
    def channel(self):
        return compose_sqh(self.q, self.h)


def _diag_unitary_ptm(h: np.ndarray, basis: np.ndarray) -> np.ndarray:
    u = coherent_unitary(h)
    conj = u @ basis @ u.conj().T
    return np.einsum("pij,pji->p", basis, conj).real / basis.shape[1]


def forward(q: np.ndarray, h: np.ndarray) -> tuple[np.ndarray, float]:
    """PTM diagonal and unitarity of ``S(q, h)``.

    Unitary post-composition leaves unitarity unchanged, so ``u`` is the mean squared
    Pauli eigenvalue of ``K_q`` and the diagonal is ``diag(PTM(U_h)) * W q``.
    """
    n = (q.size.bit_length() - 1) // 2
    w = walsh_hadamard(q)
    d = _diag_unitary_ptm(h, pauli_basis(n)) * w
    u = float(np.mean(w[1:] ** 2))
    return d, u


def _residuals(x: np.ndarray, target: FitTarget, d_t: np.ndarray, u_t: float) -> np.ndarray:
    m = target.f.size
    q = softmax(x[:m])
    d, u = forward(q, x[m:])
    return np.append(d[1:] - d_t[1:], u - u_t)


def _start(target: FitTarget, rng: np.random.Generator) -> np.ndarray:
    m = target.f.size
    # Pauli channel that reproduces d; the optimizer then trades depolarization for rotation
    q0 = np.clip(inverse_walsh_hadamard(target.d), 1e-6, None)
    q0 /= q0.sum()
    logits = np.log(q0) + rng.normal(0, 0.5, m)
    h0 = rng.normal(0, 0.05, m - 1)
    return np.concatenate([logits, h0])


def fit_channel(target: FitTarget, *, starts: int = 8, seed: int | Sequence[int] = 0) -> FitResult:
    """Multistart quasi-Newton fit (numeric gradients), polished by least squares.

    Stops early on success, or once two starts reproduce the same failing residual.
    """
    d_t, u_t = target.d, target.u_target
    m = target.f.size
    best: FitResult | None = None
    finals: list[float] = []
    for k in range(starts):
        rng = np.random.default_rng([*np.atleast_1d(seed).tolist(), k])
        x0 = _start(target, rng)

        def obj(x):
            r = _residuals(x, target, d_t, u_t)
            return float(r @ r)

        res = minimize(obj, x0, method="BFGS", jac="3-point", options={"gtol": 1e-12, "maxiter": 5000})
        its = int(res.nit)
        x = res.x
        if res.fun >= SUCCESS_THRESHOLD * 1e-2:
            pol = least_squares(_residuals, x, args=(target, d_t, u_t), xtol=1e-15, ftol=1e-15, gtol=1e-15,
                                max_nfev=3000)
            x = pol.x
            its += int(pol.nfev)
        q = softmax(x[:m])
        h = x[m:]
        d, u = forward(q, h)
        r = float(np.sum((d - d_t) ** 2) + (u - u_t) ** 2)
        cand = FitResult(q, h, r, its, d, u, target)
        if best is None or r < best.residual:
            best = cand
        if best.residual < SUCCESS_THRESHOLD * 1e-4:
            break
        # two starts landing on the same nonzero optimum: the target is infeasible
        if any(abs(r - f) < 0.1 * r for f in finals) and r >= SUCCESS_THRESHOLD:
            break
        finals.append(r)
    if best.residual >= SUCCESS_THRESHOLD:
        raise FitFailedError(f"fit residual {best.residual:.3e} above threshold", best)
    return best


# --- model construction ------------------------------------------------------------

_GATE_RE = re.compile(r"([A-Za-z0-9]+)\(([\d,]+)\)")


def parse_signature(sig: str) -> list[tuple[str, tuple[int, ...]]]:
    out = []
    for part in sig.split("|"):
        m = _GATE_RE.fullmatch(part.strip())
        if m is None:
            raise ValueError(f"malformed cycle signature {sig!r}")
        out.append((m.group(1), tuple(int(v) for v in m.group(2).split(","))))
    return out


def body_partition(sig: str) -> list[tuple[int, ...]]:
    """The two-qubit pair (ascending) if any, then one body per spectator qubit."""
    bodies = []
    for name, qs in parse_signature(sig):
        bodies.append(tuple(sorted(qs)))
    return sorted(bodies, key=lambda b: (-len(b), b))


def body_target(cer: CERResult, qubits: Sequence[int], s0: float, s1: float) -> FitTarget:
    f = walsh_hadamard(cer.marginal_distribution(qubits))
    return FitTarget(np.clip(f, -1, 1), s0, s1)


def build_noise_model(
    cers: Sequence[CERResult],
    *,
    s0_1q: float = 1.0,
    s0_2q: float = 1.0,
    s1_1q: float = 0.7,
    s1_2q: float = 0.9,
    readout: Sequence[tuple[float, float]] | None = None,
    default_signature: str | None = None,
    pauli_only: bool = False,
    seed: int = 0,
) -> NoiseModel:
    """Fit one body per gate of each cycle; ``pauli_only`` takes q from the CER directly.

    Single-qubit bodies of ``default_signature`` become the fallback for unseen cycles.
    """
    rules: dict[str, list[Body]] = {}
    for i, cer in enumerate(cers):
        bodies = []
        for j, qs in enumerate(body_partition(cer.signature)):
            two = len(qs) == 2
            s0, s1 = (s0_2q, s1_2q) if two else (s0_1q, s1_1q)
            if pauli_only:
                c = cer.marginal_distribution(qs)
                # s0 scales the error part of a Pauli channel linearly
                q = s0 * c
                q[0] += 1 - q.sum()
                bodies.append(Body.from_qh(qs, q, None, {"kind": "pauli"}))
                continue
            target = body_target(cer, qs, s0, s1)
            fit = fit_channel(target, seed=(seed, i, j))
            meta = {"residual": fit.residual, "s0": s0, "s1": s1, "f": target.f.tolist()}
            bodies.append(Body.from_qh(qs, fit.q, fit.h, meta))
        rules[cer.signature] = bodies
    default = None
    if default_signature is not None:
        default = [b for b in rules[default_signature] if len(b.qubits) == 1]
    return NoiseModel(rules, default, readout)


def rescale_body(body: Body, s0: float, seed=0) -> Body:
    """Refit a body at a new stochastic scale ``s0``, keeping its recorded ``f`` and ``s1``.

    Bodies without a recorded target are treated as Pauli channels and scaled linearly.
    """
    if "f" not in body.meta:
        if body.q is None:
            raise ValueError(f"body on {body.qubits} has neither a fit target nor Pauli rates")
        q = s0 * np.asarray(body.q, dtype=float)
        q[0] += 1 - q.sum()
        return Body.from_qh(body.qubits, q, None, {**body.meta, "s0": s0})
    target = FitTarget(np.asarray(body.meta["f"]), s0, body.meta["s1"])
    fit = fit_channel(target, seed=seed)
    meta = {**body.meta, "residual": fit.residual, "s0": s0}
    return Body.from_qh(body.qubits, fit.q, fit.h, meta)


def rescale_model(nm: NoiseModel, s0_1q: float, s0_2q: float, seed: int = 0) -> NoiseModel:
    """The same model with every body refitted at the given stochastic scales."""
    cache: dict = {}

    def scaled(b: Body) -> Body:
        # identical bodies (e.g. idle-cycle bodies reused as defaults) share one refit
        key = (b.qubits, json.dumps(b.to_dict(), sort_keys=True))
        if key not in cache:
            s0 = s0_2q if len(b.qubits) == 2 else s0_1q
            cache[key] = rescale_body(b, s0, seed=(seed, len(cache)))
        return cache[key]

    rules = {sig: [scaled(b) for b in bodies] for sig, bodies in sorted(nm.rules.items())}
    default = None if nm.default_bodies is None else [scaled(b) for b in nm.default_bodies]
    return NoiseModel(rules, default, nm.readout, nm.ideal_default)


def body_report(body: Body) -> dict:
    """Forward-model check of a fitted body against its recorded target."""
    f = np.asarray(body.meta["f"])
    target = FitTarget(f, body.meta["s0"], body.meta["s1"])
    d, u = forward(body.q, body.h)
    return {
        "qubits": list(body.qubits),
        "residual": float(body.meta["residual"]),
        "d_error": float(np.abs(d - target.d).max()),
        "u_error": float(abs(u - target.u_target)),
        "u_channel": unitarity(body.channel),
        "cptp": body.channel.is_cptp(),
    }

