"""Regenerate the shipped 4-qubit reference CER data and fitted complete model.

Qubits 0..3 form a linear chain; CX cycles use the high qubit as control. Per-body
Pauli error budgets are chosen to reproduce the reference cycle infidelities
(2.2e-2 idle, 7.1e-2 / 6.3e-2 / 6.7e-2 for the three CX cycles) with independent
bodies, then fitted with unitarity fractions 0.7 (1q) and 0.9 (2q).
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from rckit.benchmark import CERResult, cer_json
from rckit.circuit import Gate, hard_cycle
from rckit.fitting import build_noise_model
from rckit.noise import pauli_product_distribution
from rckit.pauli import pauli_labels

DATA = Path(__file__).resolve().parents[1] / "src" / "rckit" / "data"
N = 4
READOUT = [(0.9969, 0.9872), (0.9970, 0.9862), (0.9973, 0.9786), (0.9958, 0.9841)]
IDLE = [3.9e-3, 6.0e-3, 7.2e-3, 5.2e-3]
CX_TOTALS = {(1, 0): 7.1e-2, (2, 1): 6.3e-2, (3, 2): 6.7e-2}
SPECTATORS = {
    (1, 0): {2: (8.5e-3, "idle"), 3: (6.5e-3, "idle")},
    (2, 1): {0: (6.5e-3, "idle"), 3: (7.5e-3, "idle")},
    (3, 2): {0: (6.5e-3, "idle"), 1: (1.8e-2, "zheavy")},
}
SPLITS = {"idle": (0.25, 0.25, 0.5), "zheavy": (0.1, 0.1, 0.8)}


def one_qubit(e: float, kind: str = "idle") -> np.ndarray:
    return np.array([1 - e, *(e * s for s in SPLITS[kind])])


def two_qubit(e: float, control_x: bool) -> np.ndarray:
    """Error budget ``e`` over the 15 two-qubit labels (lower qubit first)."""
    labels = pauli_labels(2)[1:]
    w = np.ones(15)
    for i, lab in enumerate(labels):
        if control_x and lab in ("IX", "XX"):
            w[i] = 6.0
        if not control_x and lab in ("ZI", "IZ", "ZZ"):
            w[i] = 3.0
    return np.concatenate([[1 - e], e * w / w.sum()])


def main() -> None:
    cers = []
    bodies = [((q,), one_qubit(e)) for q, e in enumerate(IDLE)]
    idle = hard_cycle(N)
    cers.append(CERResult(N, idle.signature, *_c(bodies)))
    for (c, t), total in CX_TOTALS.items():
        spect = SPECTATORS[(c, t)]
        keep = np.prod([1 - e for e, _ in spect.values()])
        e2 = 1 - (1 - total) / keep
        bodies = [(tuple(sorted((c, t))), two_qubit(e2, control_x=(c, t) != (1, 0)))]
        bodies += [((q,), one_qubit(e, kind)) for q, (e, kind) in spect.items()]
        cyc = hard_cycle(N, [Gate("CX", (c, t))])
        cers.append(CERResult(N, cyc.signature, *_c(bodies)))

    (DATA / "default_cer.json").write_text(cer_json(cers) + "\n")
    model = build_noise_model(cers, readout=READOUT, default_signature=idle.signature)
    (DATA / "default_model.json").write_text(model.to_json(indent=1) + "\n")
    for cer in cers:
        print(f"{cer.signature:32s} e_F = {cer.e_f:.4f}")


def _c(bodies):
    c = pauli_product_distribution(N, bodies)
    return c, c.copy(), 0.0


if __name__ == "__main__":
    main()
