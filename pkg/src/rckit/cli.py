"""Command-line interface.

Exit codes: 0 on success, 2 on invalid input or spec validation failure, 3 when a
noise-model fit does not converge.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click
import numpy as np

from . import __version__
from .benchmark import (
    CBConfig,
    CBResult,
    MissingBasisError,
    cer_json,
    reconstruct_error_rates,
    run_cb,
)
from .circuit import Circuit, CircuitError, Cycle, hard_cycle, Gate
from .experiments import ExperimentSpec, SpecError, load_noise, report_csv, report_json, run
from .fitting import FitFailedError, build_noise_model
from .noise import Distribution, measure_distribution, sample_counts, simulate
from .rc import UnsupportedHardCycleError, randomize_batch

EXIT_SPEC = 2
EXIT_FIT = 3


def _fail(msg: str, code: int) -> None:
    click.echo(f"error: {msg}", err=True)
    sys.exit(code)


def _read_json(path: str):
    try:
        with open(path) as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as e:
        _fail(f"cannot read {path}: {e}", EXIT_SPEC)


def _write(path: str | None, text: str) -> None:
    if path is None:
        click.echo(text)
        return
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(text)


def _load_circuit(path: str) -> Circuit:
    try:
        return Circuit.from_dict(_read_json(path))
    except (KeyError, TypeError, ValueError, CircuitError) as e:
        _fail(f"invalid circuit {path}: {e}", EXIT_SPEC)


def _load_cycle(path: str) -> Cycle:
    """A cycle JSON is either a full ``{"kind", "gates"}`` record or ``{"n", "gates"}``,
    in which case idle qubits are padded with identities."""
    d = _read_json(path)
    try:
        if "kind" in d:
            return Cycle.from_dict(d)
        return hard_cycle(int(d["n"]), [Gate.from_dict(g) for g in d["gates"]])
    except (KeyError, TypeError, ValueError, CircuitError) as e:
        _fail(f"invalid cycle {path}: {e}", EXIT_SPEC)


def _load_model(noise: str | None):
    try:
        return load_noise(noise)
    except (OSError, KeyError, TypeError, ValueError) as e:
        _fail(f"invalid noise model {noise}: {e}", EXIT_SPEC)


def _ints(text: str | None) -> tuple[int, ...]:
    if not text:
        return ()
    try:
        return tuple(int(v) for v in text.split(","))
    except ValueError:
        raise click.BadParameter(f"expected comma-separated integers, got {text!r}")


def _floats(text: str | None) -> tuple[float, ...]:
    if not text:
        return ()
    try:
        return tuple(float(v) for v in text.split(","))
    except ValueError:
        raise click.BadParameter(f"expected comma-separated numbers, got {text!r}")


@click.group()
@click.version_option(__version__, prog_name="rckit")
def main():
    """Randomized compiling, noisy simulation and cycle benchmarking."""


@main.command("rc")
@click.option("--in", "in_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--n-randomizations", default=10, show_default=True, type=click.IntRange(1))
@click.option("--seed", required=True, type=int)
@click.option("--out-dir", required=True, type=click.Path(file_okay=False))
def rc_cmd(in_path, n_randomizations, seed, out_dir):
    """Write logically equivalent randomizations of a circuit plus a manifest."""
    c = _load_circuit(in_path)
    try:
        batch = randomize_batch(c, n_randomizations, seed)
    except UnsupportedHardCycleError as e:
        _fail(str(e), EXIT_SPEC)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    entries = []
    for i, r in enumerate(batch):
        name = f"randomization_{i:04d}.json"
        (out / name).write_text(r.compiled.to_json(indent=1))
        entries.append({"index": i, "file": name, "twirls": r.twirl_labels})
    manifest = {
        "rckit_version": __version__,
        "source": str(in_path),
        "seed": seed,
        "n_randomizations": n_randomizations,
        "randomizations": entries,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=1))
    click.echo(f"wrote {n_randomizations} randomizations to {out}")


@main.command("simulate")
@click.option("--in", "in_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--noise", default="ideal", show_default=True, help="model JSON, 'default' or 'ideal'")
@click.option("--shots", type=click.IntRange(1), default=None, help="omit for exact probabilities")
@click.option("--n-randomizations", type=click.IntRange(1), default=None,
              help="simulate the union of this many randomizations (shots split evenly)")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), default=None)
def simulate_cmd(in_path, noise, shots, n_randomizations, seed, out):
    """Simulate a circuit and emit its outcome distribution."""
    c = _load_circuit(in_path)
    nm = _load_model(noise)
    rng = np.random.default_rng(seed)
    try:
        if n_randomizations is None:
            circuits = [c]
        else:
            circuits = [r.compiled for r in randomize_batch(c, n_randomizations, seed)]
        if shots is not None and shots % len(circuits):
            _fail("shots must be divisible by n-randomizations", EXIT_SPEC)
        dists = [measure_distribution(simulate(x, nm), nm.readout) for x in circuits]
    except (UnsupportedHardCycleError, ValueError, KeyError) as e:
        _fail(str(e), EXIT_SPEC)
    if shots is None:
        dist = Distribution(c.n, probs=np.mean([d.probs for d in dists], axis=0))
    else:
        per = shots // len(circuits)
        counts = sum(sample_counts(d, per, rng).counts for d in dists)
        dist = Distribution(c.n, counts=counts)
    _write(out, json.dumps(dist.to_dict(), indent=1))


@main.command("cb")
@click.option("--cycle", "cycle_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--noise", default="default", show_default=True)
@click.option("--lengths", default="2,8,24", show_default=True)
@click.option("--shots", type=click.IntRange(1), default=None, help="shots per sequence; omit for exact")
@click.option("--n-randomizations", default=10, show_default=True, type=click.IntRange(1))
@click.option("--exact-twirl", is_flag=True, help="use the exact twirled channel (no sampling over twirls)")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), default=None)
def cb_cmd(cycle_path, noise, lengths, shots, n_randomizations, exact_twirl, seed, out):
    """Cycle benchmarking of a Clifford hard cycle."""
    cycle = _load_cycle(cycle_path)
    nm = _load_model(noise)
    try:
        cfg = CBConfig(cycle, _ints(lengths), n_randomizations, shots)
        res = run_cb(cfg, nm, np.random.default_rng(seed), exact_twirl=exact_twirl)
    except (ValueError, KeyError) as e:
        _fail(str(e), EXIT_SPEC)
    _write(out, json.dumps(res.to_dict(), indent=1))
    click.echo(f"{res.signature}: e_F = {res.e_f:.5f}", err=True)


@main.command("cer")
@click.option("--cb", "cb_paths", required=True, multiple=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), default=None)
def cer_cmd(cb_paths, seed, out):
    """Reconstruct Pauli error rates from one or more cycle-benchmarking results."""
    rng = np.random.default_rng(seed)
    results = []
    for p in cb_paths:
        try:
            results.append(reconstruct_error_rates(CBResult.from_dict(_read_json(p)), rng=rng))
        except (MissingBasisError, KeyError, ValueError) as e:
            _fail(f"{p}: {e}", EXIT_SPEC)
    _write(out, cer_json(results))


@main.command("fit-model")
@click.option("--cer", "cer_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--s0-1q", default=1.0, show_default=True, type=click.FloatRange(0, 1))
@click.option("--s0-2q", default=1.0, show_default=True, type=click.FloatRange(0, 1))
@click.option("--s1-1q", default=0.7, show_default=True, type=click.FloatRange(0, 1))
@click.option("--s1-2q", default=0.9, show_default=True, type=click.FloatRange(0, 1))
@click.option("--readout", "readout_path", type=click.Path(exists=True, dir_okay=False), default=None,
              help='JSON list of {"p00", "p11"} per qubit')
@click.option("--default-signature", default=None, help="cycle whose 1q bodies cover unseen cycles")
@click.option("--pauli-only", is_flag=True, help="skip the coherent fit (stochastic model)")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), default=None)
def fit_model_cmd(cer_path, s0_1q, s0_2q, s1_1q, s1_2q, readout_path, default_signature, pauli_only, seed, out):
    """Fit a noise model of per-body channels to reconstructed error rates."""
    from .benchmark import load_cer

    try:
        cers = load_cer(cer_path)
    except (OSError, KeyError, TypeError, ValueError) as e:
        _fail(f"invalid CER file: {e}", EXIT_SPEC)
    readout = None
    if readout_path is not None:
        data = _read_json(readout_path)
        try:
            readout = [(r["p00"], r["p11"]) for r in data]
        except (KeyError, TypeError) as e:
            _fail(f"invalid readout file: {e}", EXIT_SPEC)
    try:
        nm = build_noise_model(
            cers, s0_1q=s0_1q, s0_2q=s0_2q, s1_1q=s1_1q, s1_2q=s1_2q, readout=readout,
            default_signature=default_signature, pauli_only=pauli_only, seed=seed,
        )
    except FitFailedError as e:
        _fail(str(e), EXIT_FIT)
    except (KeyError, ValueError) as e:
        _fail(str(e), EXIT_SPEC)
    _write(out, nm.to_json())


def _experiment_options(fn):
    opts = [
        click.option("--seed", required=True, type=int),
        click.option("--shots", type=click.IntRange(1), default=10_000, show_default=True),
        click.option("--exact", is_flag=True, help="exact probabilities instead of sampled shots"),
        click.option("--n-randomizations", default=50, show_default=True, type=click.IntRange(1)),
        click.option("--noise", default="default", show_default=True, help="model JSON, 'default' or 'ideal'"),
        click.option("--out", type=click.Path(dir_okay=False), default=None,
                     help="report JSON; a CSV of the rows is written next to it"),
    ]
    for o in reversed(opts):
        fn = o(fn)
    return fn


def _run_experiment(kind: str, seed, shots, exact, n_randomizations, noise, out, **extra) -> None:
    try:
        spec = ExperimentSpec(
            kind, seed=seed, shots=None if exact else shots, n_randomizations=n_randomizations,
            noise=noise, **extra,
        )
    except (SpecError, TypeError) as e:
        _fail(str(e), EXIT_SPEC)
    nm = None
    if kind != "coherent-fraction" or noise != "default":
        nm = _load_model(noise)
    try:
        report = run(spec, nm)
    except FitFailedError as e:
        _fail(str(e), EXIT_FIT)
    except (SpecError, ValueError, KeyError) as e:
        _fail(str(e), EXIT_SPEC)
    _write(out, report_json(report))
    if out is not None:
        Path(out).with_suffix(".csv").write_text(report_csv(report))
    click.echo(json.dumps(report["summary"], indent=1, sort_keys=True, default=float), err=True)


@main.command("qft")
@_experiment_options
@click.option("--n", "n", default=4, show_default=True, type=click.IntRange(1, 5))
@click.option("--n-inputs", default=100, show_default=True, type=click.IntRange(1))
@click.option("--inputs", default="haar", show_default=True, type=click.Choice(["haar", "pauli", "plus"]))
@click.option("--s0-1q", default=1.0, show_default=True, type=click.FloatRange(0, 1))
@click.option("--s0-2q", default=1.0, show_default=True, type=click.FloatRange(0, 1))
def qft_cmd(n, n_inputs, inputs, s0_1q, s0_2q, **common):
    """Bare vs RC quantum Fourier transform over random product inputs."""
    _run_experiment("qft", n=n, n_inputs=n_inputs, inputs=inputs, s0_1q=s0_1q, s0_2q=s0_2q, **common)


@main.command("depth-sweep")
@_experiment_options
@click.option("--n", "n", default=4, show_default=True, type=click.IntRange(1, 5))
@click.option("--ks", "Ks", default="2,4,6,8,10,12,14,16", show_default=True, help="comma-separated depths")
@click.option("--n-circuits", default=100, show_default=True, type=click.IntRange(1))
def depth_sweep_cmd(n, Ks, n_circuits, **common):
    """TVD against depth for random circuits, bare vs RC."""
    _run_experiment("depth-sweep", n=n, Ks=_ints(Ks), n_circuits=n_circuits, **common)


@main.command("rand-sweep")
@_experiment_options
@click.option("--n", "n", default=4, show_default=True, type=click.IntRange(1, 5))
@click.option("--k", "K", default=10, show_default=True, type=click.IntRange(1))
@click.option("--n-circuits", default=30, show_default=True, type=click.IntRange(1))
@click.option("--per-randomization-shots", default=4000, show_default=True, type=click.IntRange(1))
@click.option("--target-shots", default=4000, show_default=True, type=click.IntRange(1))
def rand_sweep_cmd(n, K, n_circuits, per_randomization_shots, target_shots, **common):
    """RC TVD against the number of randomizations."""
    _run_experiment(
        "randomization-sweep", n=n, K=K, n_circuits=n_circuits,
        rc_shots_per_randomization=per_randomization_shots, target_shots=target_shots, **common,
    )


@main.command("coherent-fraction")
@_experiment_options
@click.option("--k", "K", default=5, show_default=True, type=click.IntRange(1))
@click.option("--e-f", default=0.02, show_default=True, type=click.FloatRange(0, 0.5, min_open=True))
@click.option("--fractions", default="0,0.25,0.5,0.75,1", show_default=True)
@click.option("--n-circuits", default=30, show_default=True, type=click.IntRange(1))
def coherent_fraction_cmd(K, e_f, fractions, n_circuits, **common):
    """RC benefit against the coherent share of a fixed process infidelity."""
    _run_experiment(
        "coherent-fraction", n=1, K=K, e_f=e_f, coherent_fractions=_floats(fractions),
        n_circuits=n_circuits, **common,
    )


@main.command("tomography")
@_experiment_options
@click.option("--ks", "Ks", default="5,25,50,75,100", show_default=True)
@click.option("--qubit", default=3, show_default=True, type=click.IntRange(0))
def tomography_cmd(Ks, qubit, **common):
    """Single-qubit state tomography of bare and RC random circuits."""
    _run_experiment("tomography", n=1, Ks=_ints(Ks), qubit=qubit, **common)


if __name__ == "__main__":
    main()
