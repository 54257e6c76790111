"""End-to-end experiment drivers: QFT, depth and randomization sweeps, coherent
fraction study and single-qubit tomography."""

from __future__ import annotations

import csv
import io
import itertools
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from importlib import resources
from typing import Callable, Sequence

import numpy as np
from scipy import stats

from . import __version__
from .circuit import (
    Circuit,
    build_qft,
    circuit_unitary,
    haar_random_su2,
    prepend_state_prep,
    recompile_cycle_pair,
    sample_random_circuit,
    to_native_cx,
)
from .fitting import rescale_model
from .metrics import (
    BASIS_ROTATIONS,
    bloch_from_tomography,
    bloch_vector,
    pearson_r,
    spearman_r,
    tvd,
    uniformity_distance,
)
from .noise import Body, NoiseModel, measure_distribution, simulate, unitarity
from .rc import randomize_batch

KINDS = ("qft", "depth-sweep", "randomization-sweep", "coherent-fraction", "tomography")


class SpecError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentSpec:
    """Parameters of one experiment run. ``shots`` counts bare shots; RC runs split the
    same total evenly over ``n_randomizations`` (``shots=None`` means exact
    probabilities, with RC averaged over the randomizations)."""

    kind: str
    seed: int | None = None
    n: int = 4
    shots: int | None = 10_000
    n_randomizations: int = 50
    K: int = 10
    Ks: tuple[int, ...] = ()
    n_inputs: int = 100
    inputs: str = "haar"
    n_circuits: int = 100
    rc_shots_per_randomization: int | None = None
    target_shots: int = 4000
    noise: str | None = None
    s0_1q: float = 1.0
    s0_2q: float = 1.0
    coherent_fractions: tuple[float, ...] = (0.0, 0.25, 0.5, 0.75, 1.0)
    e_f: float = 0.02
    qubit: int = 3

    def __post_init__(self):
        if self.kind not in KINDS:
            raise SpecError(f"unknown experiment kind {self.kind!r}")
        if self.seed is None:
            raise SpecError("a seed is required")
        if self.n_randomizations < 1:
            raise SpecError("n_randomizations must be positive")
        if self.shots is not None:
            if self.shots < 1:
                raise SpecError("shots must be positive")
            if self.rc_shots_per_randomization is None and self.shots % self.n_randomizations:
                raise SpecError("shots must be divisible by n_randomizations")
        if any(k < 1 for k in self.Ks) or self.K < 1:
            raise SpecError("circuit depths must be at least 1")
        if self.inputs not in ("haar", "pauli", "plus"):
            raise SpecError("inputs must be haar, pauli or plus")

    @property
    def rc_shots(self) -> int | None:
        if self.shots is None:
            return None
        return self.rc_shots_per_randomization or self.shots // self.n_randomizations

    def to_dict(self) -> dict:
        d = asdict(self)
        d["Ks"] = list(self.Ks)
        d["coherent_fractions"] = list(self.coherent_fractions)
        return d


# --- infrastructure ------------------------------------------------------------------

def load_default_model() -> NoiseModel:
    text = resources.files("rckit").joinpath("data/default_model.json").read_text()
    return NoiseModel.from_json(text)


def load_default_cer():
    from .benchmark import CERResult

    text = resources.files("rckit").joinpath("data/default_cer.json").read_text()
    return [CERResult.from_dict(d) for d in json.loads(text)["cycles"]]


def load_noise(path: str | None) -> NoiseModel:
    if path in (None, "default"):
        return load_default_model()
    if path == "ideal":
        return NoiseModel.ideal()
    try:
        return NoiseModel.load(path)
    except (OSError, ValueError, KeyError) as e:
        raise SpecError(f"cannot load noise model {path!r}: {e}") from e


def worker_count() -> int:
    cap = os.environ.get("RCKIT_THREADS")
    n = os.cpu_count() or 1
    return max(1, min(n, int(cap))) if cap else n


def parallel_map(fn: Callable, tasks: Sequence) -> list:
    """Order-preserving map over a process pool capped by ``RCKIT_THREADS``."""
    workers = min(worker_count(), len(tasks))
    if workers <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, tasks, chunksize=max(1, len(tasks) // (4 * workers))))


def task_rng(seed: int, *index: int) -> np.random.Generator:
    return np.random.default_rng([seed, *index])


def ideal_probs(c: Circuit) -> np.ndarray:
    return np.abs(circuit_unitary(c)[:, 0]) ** 2


def noisy_probs(c: Circuit, nm: NoiseModel) -> np.ndarray:
    return measure_distribution(simulate(c, nm), nm.readout).probs


def _draw(p: np.ndarray, shots: int | None, rng) -> np.ndarray:
    if shots is None:
        return p
    return rng.multinomial(shots, p).astype(float)


@dataclass
class Trial:
    ideal: np.ndarray
    bare: np.ndarray
    rc: list[np.ndarray]
    exact: bool

    def rc_union(self, first: int | None = None) -> np.ndarray:
        sel = self.rc[:first]
        return np.mean(sel, axis=0) if self.exact else np.sum(sel, axis=0)


def bare_vs_rc(c: Circuit, nm: NoiseModel, n_rand: int, bare_shots, rc_shots, seed: int, index) -> Trial:
    """Ideal distribution, bare counts and per-randomization RC counts for one circuit."""
    rng = task_rng(seed, *index, 0)
    bare = _draw(noisy_probs(c, nm), bare_shots, rng)
    rcs = randomize_batch(c, n_rand, int(task_rng(seed, *index, 1).integers(2**62)))
    rc = [_draw(noisy_probs(r.compiled, nm), rc_shots, rng) for r in rcs]
    return Trial(ideal_probs(c), bare, rc, bare_shots is None)


def _report(spec: ExperimentSpec, rows: list[dict], summary: dict) -> dict:
    return {
        "rckit_version": __version__,
        "spec": spec.to_dict(),
        "summary": summary,
        "rows": rows,
    }


def report_json(report: dict) -> str:
    return json.dumps(report, indent=1, sort_keys=True, default=_json_default)


def report_csv(report: dict) -> str:
    rows = report["rows"]
    if not rows:
        return ""
    buf = io.StringIO()
    keys = list(rows[0])
    w = csv.DictWriter(buf, fieldnames=keys, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: (json.dumps(v) if isinstance(v, (list, dict)) else v) for k, v in r.items()})
    return buf.getvalue()


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(type(o))


def _ratio(a: float, b: float) -> float:
    return float(a / b) if b > 0 else float("inf")


# --- QFT ---------------------------------------------------------------------------------

def qft_inputs(spec: ExperimentSpec) -> list[tuple[str, dict[int, np.ndarray]]]:
    n = spec.n
    if spec.inputs == "plus":
        h = BASIS_ROTATIONS["X"].conj().T
        return [("+" * n, {q: h for q in range(n)})]
    if spec.inputs == "pauli":
        prep = {"0": np.eye(2), "1": np.array([[0, 1], [1, 0]]), "+": BASIS_ROTATIONS["X"].conj().T}
        return [("".join(lab), {q: prep[c] for q, c in enumerate(lab)})
                for lab in itertools.product("01+", repeat=n)]
    out = []
    for i in range(spec.n_inputs):
        rng = task_rng(spec.seed, 7, i)
        out.append((f"haar-{i}", {q: haar_random_su2(rng) for q in range(n)}))
    return out


def _qft_task(args):
    spec, nm, base, i, label, prep = args
    c = prepend_state_prep(base, prep)
    t = bare_vs_rc(c, nm, spec.n_randomizations, spec.shots, spec.rc_shots, spec.seed, (1, i))
    bare, rc = tvd(t.ideal, t.bare), tvd(t.ideal, t.rc_union())
    return {
        "input": label,
        "uniformity_distance": uniformity_distance(t.ideal),
        "tvd_bare": bare,
        "tvd_rc": rc,
        "ratio": _ratio(bare, rc),
    }


def run_qft_experiment(spec: ExperimentSpec, nm: NoiseModel) -> dict:
    base = build_qft(spec.n)
    tasks = [(spec, nm, base, i, lab, prep) for i, (lab, prep) in enumerate(qft_inputs(spec))]
    rows = parallel_map(_qft_task, tasks)
    bare = np.array([r["tvd_bare"] for r in rows])
    rc = np.array([r["tvd_rc"] for r in rows])
    ud = np.array([r["uniformity_distance"] for r in rows])
    summary = {
        "cnot_count": base.K,
        "mean_tvd_bare": float(bare.mean()),
        "mean_tvd_rc": float(rc.mean()),
        "mean_ratio": float(np.mean([r["ratio"] for r in rows])),
        "ratio_of_means": _ratio(bare.mean(), rc.mean()),
        "fraction_improved": float(np.mean(rc < bare)),
    }
    if len(rows) >= 3 and np.std(ud) > 0:
        summary["pearson_bare"] = pearson_r(ud, bare)
        summary["pearson_rc"] = pearson_r(ud, rc)
    return _report(spec, rows, summary)


# --- random-circuit sweeps --------------------------------------------------------------

def _random_circuit(spec: ExperimentSpec, K: int, i: int, mode: str = "multiqubit") -> Circuit:
    c = sample_random_circuit(spec.n, K, mode, task_rng(spec.seed, 2, K, i))
    return to_native_cx(c) if mode == "multiqubit" else c


def _depth_task(args):
    spec, nm, K, i = args
    c = _random_circuit(spec, K, i)
    t = bare_vs_rc(c, nm, spec.n_randomizations, spec.shots, spec.rc_shots, spec.seed, (3, K, i))
    return {"K": K, "circuit": i, "tvd_bare": tvd(t.ideal, t.bare), "tvd_rc": tvd(t.ideal, t.rc_union())}


def _linear_fit(x, y) -> dict | None:
    if len(set(x)) < 2:
        return None
    res = stats.linregress(x, y)
    return {"slope": float(res.slope), "intercept": float(res.intercept), "r2": float(res.rvalue**2)}


def run_depth_sweep(spec: ExperimentSpec, nm: NoiseModel) -> dict:
    Ks = spec.Ks or tuple(range(2, 17, 2))
    tasks = [(spec, nm, K, i) for K in Ks for i in range(spec.n_circuits)]
    rows = parallel_map(_depth_task, tasks)
    per_k = []
    for K in Ks:
        b = np.array([r["tvd_bare"] for r in rows if r["K"] == K])
        r_ = np.array([r["tvd_rc"] for r in rows if r["K"] == K])
        per_k.append({
            "K": K,
            "mean_bare": float(b.mean()),
            "mean_rc": float(r_.mean()),
            "quantiles_bare": np.quantile(b, [0.1, 0.5, 0.9]).tolist(),
            "quantiles_rc": np.quantile(r_, [0.1, 0.5, 0.9]).tolist(),
            "ratio": _ratio(b.mean(), r_.mean()),
        })
    summary = {
        "per_K": per_k,
        "fit_bare": _linear_fit(Ks, [p["mean_bare"] for p in per_k]),
        "fit_rc": _linear_fit(Ks, [p["mean_rc"] for p in per_k]),
        "mean_ratio": float(np.mean([p["ratio"] for p in per_k])),
        "rc_never_worse": bool(all(p["mean_rc"] <= p["mean_bare"] for p in per_k)),
    }
    return _report(spec, rows, summary)


def _randsweep_task(args):
    spec, nm, i = args
    c = _random_circuit(spec, spec.K, i)
    per = spec.rc_shots_per_randomization or spec.target_shots
    shots = None if spec.shots is None else per
    bare_shots = None if spec.shots is None else spec.target_shots
    t = bare_vs_rc(c, nm, spec.n_randomizations, bare_shots, shots, spec.seed, (4, i))
    rng = task_rng(spec.seed, 4, i, 2)
    row = {"circuit": i, "tvd_bare": tvd(t.ideal, t.bare)}
    for N in range(1, spec.n_randomizations + 1):
        union = t.rc_union(N)
        if not t.exact and union.sum() > spec.target_shots:
            union = rng.multivariate_hypergeometric(union.astype(np.int64), spec.target_shots).astype(float)
        row[f"tvd_rc_N{N}"] = tvd(t.ideal, union)
    return row


def run_randomization_sweep(spec: ExperimentSpec, nm: NoiseModel) -> dict:
    """Mean RC TVD against the number of randomizations, every union cut to the same shots."""
    rows = parallel_map(_randsweep_task, [(spec, nm, i) for i in range(spec.n_circuits)])
    Ns = list(range(1, spec.n_randomizations + 1))
    means = [float(np.mean([r[f"tvd_rc_N{N}"] for r in rows])) for N in Ns]
    bare = np.array([r["tvd_bare"] for r in rows])
    summary = {
        "N": Ns,
        "mean_tvd_rc": means,
        "mean_tvd_bare": float(bare.mean()),
        "bare_q10": float(np.quantile(bare, 0.1)),
    }
    if len(Ns) >= 10:
        summary["rel_diff_N10_vs_Nmax"] = float(abs(means[9] - means[-1]) / means[-1])
    return _report(spec, rows, summary)


# --- coherent-fraction study -------------------------------------------------------------

def coherent_fraction(ch) -> float:
    """0 for a Pauli channel, 1 for a unitary: excess unitarity over the Pauli twirl."""
    u = unitarity(ch)
    diag = np.diag(ch.ptm)[1:]
    u_pauli = float(np.mean(diag**2))
    return float((u - u_pauli) / (1 - u_pauli)) if u_pauli < 1 else 1.0


def fixed_infidelity_body(e_f: float, alpha: float, axis=(1.0, 0.0, 1.0)) -> Body:
    """Single-qubit S(q, h) with process infidelity ``e_f``; ``alpha`` of it coherent.

    The coherent part is a rotation about ``axis``; the stochastic part is
    depolarizing, sized so the total infidelity is exactly ``e_f``.
    """
    axis = np.asarray(axis, dtype=float) / np.linalg.norm(axis)
    cos_phi = 1 - 2 * alpha * e_f
    phi = float(np.arccos(cos_phi))
    w = (3 - 4 * e_f) / (1 + 2 * cos_phi)
    p = 3 * (1 - w) / 4
    q = np.array([1 - p, p / 3, p / 3, p / 3])
    return Body.from_qh((0,), q, axis * phi / 2)


def _cf_task(args):
    spec, alpha, i = args
    nm = NoiseModel(default_bodies=[fixed_infidelity_body(spec.e_f, alpha)])
    c = sample_random_circuit(1, spec.K, "singlequbit", task_rng(spec.seed, 5, i))
    t = bare_vs_rc(c, nm, spec.n_randomizations, spec.shots, spec.rc_shots, spec.seed, (5, i))
    return {"alpha": alpha, "circuit": i, "tvd_bare": tvd(t.ideal, t.bare), "tvd_rc": tvd(t.ideal, t.rc_union())}


def run_coherent_fraction_study(spec: ExperimentSpec, nm: NoiseModel | None = None) -> dict:
    tasks = [(spec, a, i) for a in spec.coherent_fractions for i in range(spec.n_circuits)]
    rows = parallel_map(_cf_task, tasks)
    series = []
    for a in spec.coherent_fractions:
        b = np.array([r["tvd_bare"] for r in rows if r["alpha"] == a])
        r_ = np.array([r["tvd_rc"] for r in rows if r["alpha"] == a])
        body = fixed_infidelity_body(spec.e_f, a)
        series.append({
            "alpha": a,
            "coherent_fraction": coherent_fraction(body.channel),
            "unitarity": unitarity(body.channel),
            "mean_tvd_bare": float(b.mean()),
            "mean_tvd_rc": float(r_.mean()),
            "ratio": _ratio(b.mean(), r_.mean()),
        })
    x = [s["coherent_fraction"] for s in series]
    y = [s["ratio"] for s in series]
    summary = {"series": series, "spearman": spearman_r(x, y) if len(series) > 1 else None}
    return _report(spec, rows, summary)


# --- tomography -------------------------------------------------------------------------

def single_qubit_model(nm: NoiseModel, qubit: int) -> NoiseModel:
    """Restrict a model's fallback body on ``qubit`` to a standalone one-qubit model."""
    if nm.ideal_default and nm.default_bodies is None:
        return nm
    if nm.default_bodies is None:
        raise SpecError("model has no per-qubit default bodies")
    b = next(b for b in nm.default_bodies if b.qubits == (qubit,))
    readout = None if nm.readout is None else [nm.readout[qubit]]
    return NoiseModel(default_bodies=[Body((0,), b.channel, b.q, b.h)], readout=readout)


def _with_measurement(c: Circuit, basis: str) -> Circuit:
    cycles = list(c.cycles)
    cycles[-1] = recompile_cycle_pair(cycles[-1], after={0: BASIS_ROTATIONS[basis]})
    return Circuit(c.n, tuple(cycles))


def _tomo_task(args):
    spec, nm, K = args
    c = sample_random_circuit(1, K, "singlequbit", task_rng(spec.seed, 6, K))
    rcs = randomize_batch(c, spec.n_randomizations, int(task_rng(spec.seed, 6, K, 1).integers(2**62)))
    rng = task_rng(spec.seed, 6, K, 2)
    psi = circuit_unitary(c)[:, 0]
    r_ideal = bloch_vector(np.outer(psi, psi.conj()))
    bare, per, ideal = {}, {b: [] for b in "XYZ"}, {}
    for basis in "XYZ":
        ideal[basis] = ideal_probs(_with_measurement(c, basis))
        bare[basis] = _draw(noisy_probs(_with_measurement(c, basis), nm), spec.shots, rng)
        for r in rcs:
            per[basis].append(_draw(noisy_probs(_with_measurement(r.compiled, basis), nm), spec.rc_shots, rng))
    union = {b: np.sum(per[b], axis=0) for b in "XYZ"}

    def state(d):
        s = bloch_from_tomography(d["X"], d["Y"], d["Z"], ideal_r=r_ideal)
        return {
            "r": s.r.tolist(),
            "purity": s.purity,
            "fidelity": s.fidelity,
            "length": s.norm,
            "projection": s.projection(r_ideal),
        }

    return {
        "K": K,
        "ideal_r": r_ideal.tolist(),
        "bare": state(bare),
        "rc_union": state(union),
        "randomizations": [state({b: per[b][j] for b in "XYZ"}) for j in range(len(rcs))],
        "tvd_bare": {b: tvd(ideal[b], bare[b]) for b in "XYZ"},
        "tvd_rc": {b: tvd(ideal[b], union[b]) for b in "XYZ"},
    }


def run_tomography_demo(spec: ExperimentSpec, nm: NoiseModel) -> dict:
    Ks = spec.Ks or (5, 25, 50, 75, 100)
    model = nm if nm.default_bodies is None or len(nm.default_bodies) == 1 else single_qubit_model(nm, spec.qubit)
    rows = parallel_map(_tomo_task, [(spec, model, K) for K in Ks])
    table = [{
        "K": r["K"],
        "bare_purity": r["bare"]["purity"],
        "bare_fidelity": r["bare"]["fidelity"],
        "rc_purity": r["rc_union"]["purity"],
        "rc_fidelity": r["rc_union"]["fidelity"],
        "bare_alignment": r["bare"]["projection"] / r["bare"]["length"],
        "rc_alignment": r["rc_union"]["projection"] / r["rc_union"]["length"],
    } for r in rows]
    return _report(spec, rows, {"table": table})


RUNNERS = {
    "qft": run_qft_experiment,
    "depth-sweep": run_depth_sweep,
    "randomization-sweep": run_randomization_sweep,
    "coherent-fraction": run_coherent_fraction_study,
    "tomography": run_tomography_demo,
}


def run(spec: ExperimentSpec, nm: NoiseModel | None = None) -> dict:
    nm = load_noise(spec.noise) if nm is None else nm
    if (spec.s0_1q, spec.s0_2q) != (1.0, 1.0):
        nm = rescale_model(nm, spec.s0_1q, spec.s0_2q, seed=spec.seed)
    return RUNNERS[spec.kind](spec, nm)

