import json

import numpy as np
import pytest
from click.testing import CliRunner

from rckit import __version__
from rckit.benchmark import CERResult, cer_json
from rckit.circuit import Circuit, build_qft, circuit_unitary
from rckit.cli import EXIT_FIT, EXIT_SPEC, main
from rckit.noise import Distribution


@pytest.fixture
def runner():
    return CliRunner()


@pytest.fixture
def qft2(tmp_path):
    path = tmp_path / "qft2.json"
    path.write_text(build_qft(2).to_json())
    return path


def test_version(runner):
    res = runner.invoke(main, ["--version"])
    assert res.exit_code == 0 and __version__ in res.output


def test_rc_writes_equivalent_randomizations(runner, qft2, tmp_path):
    out = tmp_path / "rc"
    res = runner.invoke(main, ["rc", "--in", str(qft2), "--n-randomizations", "3", "--seed", "4",
                               "--out-dir", str(out)])
    assert res.exit_code == 0, res.output
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["n_randomizations"] == 3 and manifest["seed"] == 4
    u = circuit_unitary(build_qft(2))
    for entry in manifest["randomizations"]:
        c = Circuit.from_dict(json.loads((out / entry["file"]).read_text()))
        v = circuit_unitary(c)
        phase = np.vdot(v.ravel(), u.ravel())
        assert abs(abs(phase) - 4) < 1e-9


def test_rc_is_deterministic(runner, qft2, tmp_path):
    for name in ("a", "b"):
        runner.invoke(main, ["rc", "--in", str(qft2), "--n-randomizations", "2", "--seed", "1",
                             "--out-dir", str(tmp_path / name)])
    assert (tmp_path / "a" / "randomization_0001.json").read_text() == \
        (tmp_path / "b" / "randomization_0001.json").read_text()


def test_rc_requires_seed(runner, qft2, tmp_path):
    res = runner.invoke(main, ["rc", "--in", str(qft2), "--out-dir", str(tmp_path)])
    assert res.exit_code == 2


def test_simulate_exact_and_sampled(runner, qft2, tmp_path):
    res = runner.invoke(main, ["simulate", "--in", str(qft2)])
    assert res.exit_code == 0
    d = Distribution.from_dict(json.loads(res.output))
    np.testing.assert_allclose(d.probs, 0.25, atol=1e-12)
    out = tmp_path / "d.json"
    res = runner.invoke(main, ["simulate", "--in", str(qft2), "--noise", "default", "--shots", "1000",
                               "--n-randomizations", "4", "--seed", "2", "--out", str(out)])
    assert res.exit_code == 0, res.output
    assert Distribution.from_dict(json.loads(out.read_text())).shots == 1000


def test_simulate_rejects_uneven_split(runner, qft2):
    res = runner.invoke(main, ["simulate", "--in", str(qft2), "--shots", "10", "--n-randomizations", "3"])
    assert res.exit_code == EXIT_SPEC


def test_invalid_circuit_exit_code(runner, tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text('{"n": 2, "cycles": [{"kind": "hard", "gates": []}]}')
    res = runner.invoke(main, ["simulate", "--in", str(bad)])
    assert res.exit_code == EXIT_SPEC
    assert "error:" in res.output


def test_missing_noise_file_exit_code(runner, qft2):
    res = runner.invoke(main, ["simulate", "--in", str(qft2), "--noise", "/nonexistent.json"])
    assert res.exit_code == EXIT_SPEC


def test_cb_cer_fit_pipeline(runner, tmp_path):
    cycle = tmp_path / "cx.json"
    cycle.write_text(json.dumps({"n": 2, "gates": [{"name": "CX", "qubits": [1, 0]}]}))
    model = tmp_path / "model.json"
    from rckit.noise import Body, NoiseModel

    q = np.zeros(16)
    q[0], q[1:] = 0.95, 0.05 / 15
    model.write_text(NoiseModel({"CX(1,0)": [Body.from_qh((0, 1), q)]}).to_json())
    cb = tmp_path / "cb.json"
    res = runner.invoke(main, ["cb", "--cycle", str(cycle), "--noise", str(model), "--exact-twirl",
                               "--out", str(cb)])
    assert res.exit_code == 0, res.output
    assert json.loads(cb.read_text())["e_f"] == pytest.approx(0.05, abs=1e-9)
    cer = tmp_path / "cer.json"
    assert runner.invoke(main, ["cer", "--cb", str(cb), "--out", str(cer)]).exit_code == 0
    fitted = tmp_path / "fitted.json"
    res = runner.invoke(main, ["fit-model", "--cer", str(cer), "--pauli-only", "--out", str(fitted)])
    assert res.exit_code == 0, res.output
    body = NoiseModel.load(fitted).rules["CX(1,0)"][0]
    np.testing.assert_allclose(body.q, q, atol=1e-9)


def test_cb_rejects_non_clifford_cycle(runner, tmp_path):
    cycle = tmp_path / "t.json"
    cycle.write_text(json.dumps({"n": 1, "gates": [{"name": "T", "qubits": [0]}]}))
    res = runner.invoke(main, ["cb", "--cycle", str(cycle), "--noise", "ideal"])
    assert res.exit_code == EXIT_SPEC


def test_fit_model_infeasible_exit_code(runner, tmp_path):
    # d = (1, 1, 0, 0) cannot reach u = 1/4 (s1 = 0): the fit must report failure
    cer = tmp_path / "cer.json"
    c = np.array([0.5, 0.5, 0.0, 0.0])
    cer.write_text(cer_json([CERResult(1, "I(0)", c, c, 0.0)]))
    res = runner.invoke(main, ["fit-model", "--cer", str(cer), "--s1-1q", "0"])
    assert res.exit_code == EXIT_FIT, res.output


def test_experiment_requires_seed(runner):
    res = runner.invoke(main, ["qft", "--n", "2"])
    assert res.exit_code == 2


def test_experiment_spec_error_exit_code(runner):
    res = runner.invoke(main, ["qft", "--seed", "0", "--shots", "1000", "--n-randomizations", "30"])
    assert res.exit_code == EXIT_SPEC
    assert "divisible" in res.output


def test_experiment_writes_json_and_csv(runner, tmp_path):
    out = tmp_path / "qft.json"
    args = ["qft", "--seed", "5", "--n", "2", "--n-inputs", "3", "--shots", "400", "--n-randomizations", "4",
            "--out", str(out)]
    assert runner.invoke(main, args).exit_code == 0
    first = out.read_text()
    assert json.loads(first)["summary"]["cnot_count"] == 3
    assert out.with_suffix(".csv").read_text().startswith("input,")
    runner.invoke(main, args)
    assert out.read_text() == first


def test_malformed_cer_exit_code(runner, tmp_path):
    cer = tmp_path / "cer.json"
    cer.write_text("[1, 2]")
    assert runner.invoke(main, ["fit-model", "--cer", str(cer)]).exit_code == EXIT_SPEC
