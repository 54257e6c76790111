import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rckit.circuit import Gate, build_qft, circuit_unitary, cycle_unitary, hard_cycle, sample_random_circuit
from rckit.noise import (
    Body,
    Channel,
    Distribution,
    MissingCycleRuleError,
    NoiseModel,
    coherent_unitary,
    compose_sqh,
    confusion_matrix,
    make_pauli_channel,
    measure_distribution,
    pauli_product_distribution,
    process_fidelity,
    sample_counts,
    simulate,
    subsample_counts,
    union_counts,
    unitarity,
)
from rckit.pauli import PAULI_MATRICES, pauli_basis, walsh_hadamard


def random_kraus(n_body: int, rank: int, rng) -> list[np.ndarray]:
    d = 2**n_body
    g = rng.normal(size=(rank * d, d)) + 1j * rng.normal(size=(rank * d, d))
    q, _ = np.linalg.qr(g)  # isometry -> Kraus set
    return [q[i * d:(i + 1) * d] for i in range(rank)]


def embed_kraus(k: np.ndarray, qubits, n: int) -> np.ndarray:
    """Dense n-qubit operator for ``k`` acting on ``qubits`` (oracle)."""
    d = 2**n
    out = np.zeros((d, d), dtype=complex)
    m = len(qubits)
    rest = [q for q in range(n) if q not in qubits]
    for i in range(d):
        bi = [(i >> (n - 1 - q)) & 1 for q in range(n)]
        for j in range(d):
            bj = [(j >> (n - 1 - q)) & 1 for q in range(n)]
            if any(bi[q] != bj[q] for q in rest):
                continue
            a = int("".join(str(bi[q]) for q in qubits), 2)
            b = int("".join(str(bj[q]) for q in qubits), 2)
            out[i, j] = k[a, b]
    assert m == len(qubits)
    return out


def test_pauli_channel_action():
    q = np.array([0.7, 0.1, 0.05, 0.15])
    ch = make_pauli_channel(q)
    rho = np.array([[0.6, 0.2 - 0.1j], [0.2 + 0.1j, 0.4]])
    expected = sum(qi * PAULI_MATRICES[c] @ rho @ PAULI_MATRICES[c] for qi, c in zip(q, "IXYZ"))
    np.testing.assert_allclose(ch.apply(rho), expected, atol=1e-14)
    np.testing.assert_allclose(np.diag(ch.ptm), walsh_hadamard(q), atol=1e-14)


def test_depolarizing_closed_form():
    p = 0.12
    ch = make_pauli_channel([1 - 3 * p / 4, p / 4, p / 4, p / 4])
    rho = np.array([[1, 0], [0, 0]], dtype=complex)
    np.testing.assert_allclose(ch.apply(rho), (1 - p) * rho + p * np.eye(2) / 2, atol=1e-14)
    assert unitarity(ch) == pytest.approx((1 - p) ** 2)


@pytest.mark.parametrize("q", [[1.1, -0.1, 0, 0], [0.5, 0.1, 0.1, 0.1]])
def test_pauli_channel_rejects_non_simplex(q):
    with pytest.raises(ValueError):
        make_pauli_channel(q)


@pytest.mark.parametrize("n_body", [1, 2])
def test_superop_ptm_choi_consistent(n_body):
    rng = np.random.default_rng(n_body)
    ks = random_kraus(n_body, 3, rng)
    ch = Channel.from_kraus(ks)
    assert ch.is_cptp()
    rho = np.eye(2**n_body) / 2**n_body + 0.1 * pauli_basis(n_body)[1]
    expected = sum(k @ rho @ k.conj().T for k in ks)
    np.testing.assert_allclose(ch.apply(rho), expected, atol=1e-13)
    back = Channel.from_ptm(ch.ptm)
    np.testing.assert_allclose(back.superop, ch.superop, atol=1e-13)
    # Kraus rebuilt from the Choi matrix reproduces the map
    rebuilt = Channel.from_kraus(Channel(ch.superop).kraus)
    np.testing.assert_allclose(rebuilt.superop, ch.superop, atol=1e-12)


def test_non_cp_map_detected():
    # transpose map is positive but not completely positive
    ptm = np.diag([1.0, 1.0, -1.0, 1.0])
    assert not Channel.from_ptm(ptm).is_cptp()


def test_compose_and_tensor():
    rng = np.random.default_rng(0)
    a = Channel.from_kraus(random_kraus(1, 2, rng))
    b = Channel.from_kraus(random_kraus(1, 2, rng))
    rho = np.array([[0.7, 0.3j], [-0.3j, 0.3]])
    np.testing.assert_allclose(a.compose(b).apply(rho), a.apply(b.apply(rho)), atol=1e-14)
    sigma = np.array([[0.5, 0.5], [0.5, 0.5]])
    np.testing.assert_allclose(a.tensor(b).apply(np.kron(rho, sigma)), np.kron(a.apply(rho), b.apply(sigma)),
                               atol=1e-14)


def test_twirled_keeps_diagonal():
    ch = Channel.from_kraus(random_kraus(2, 2, np.random.default_rng(3)))
    tw = ch.twirled()
    np.testing.assert_allclose(tw.ptm, np.diag(np.diag(ch.ptm)), atol=1e-13)


def test_coherent_unitary():
    h = np.zeros(3)
    h[2] = 0.3  # Z
    u = coherent_unitary(h)
    np.testing.assert_allclose(u, np.diag(np.exp([-0.3j, 0.3j])), atol=1e-14)
    with pytest.raises(ValueError):
        coherent_unitary(np.zeros(4))
    with pytest.raises(ValueError):
        coherent_unitary([np.nan, 0, 0])


def test_sqh_is_pauli_then_unitary():
    q = np.array([0.9, 0.05, 0.02, 0.03])
    h = np.array([0.01, -0.02, 0.05])
    ch = compose_sqh(q, h)
    u = coherent_unitary(h)
    rho = np.array([[0.8, 0.1], [0.1, 0.2]], dtype=complex)
    expected = u @ make_pauli_channel(q).apply(rho) @ u.conj().T
    np.testing.assert_allclose(ch.apply(rho), expected, atol=1e-14)
    assert ch.is_cptp()
    # unitary post-rotation leaves unitarity unchanged
    assert unitarity(ch) == pytest.approx(unitarity(make_pauli_channel(q)))
    assert unitarity(Channel.from_unitary(u)) == pytest.approx(1.0)


def dense_simulate(c, nm) -> np.ndarray:
    """Oracle: global Kraus operators built from dense matrices."""
    n = c.n
    rho = np.zeros((2**n, 2**n), dtype=complex)
    rho[0, 0] = 1
    for cyc in c.cycles:
        u = cycle_unitary(cyc, n)
        rho = u @ rho @ u.conj().T
        if cyc.kind == "hard":
            for b in nm.bodies_for(cyc, n):
                ks = [embed_kraus(k, b.qubits, n) for k in b.channel.kraus]
                rho = sum(k @ rho @ k.conj().T for k in ks)
    return rho


def random_model(n: int, rng, signatures) -> NoiseModel:
    rules = {}
    for sig, pair in signatures:
        bodies = [Body(pair, Channel.from_kraus(random_kraus(2, 2, rng)))]
        for q in range(n):
            if q not in pair:
                bodies.append(Body((q,), Channel.from_kraus(random_kraus(1, 2, rng))))
        rules[sig] = bodies
    return NoiseModel(rules)


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_simulate_matches_kraus_oracle(seed):
    rng = np.random.default_rng(seed)
    n = 3
    c = sample_random_circuit(n, 4, "multiqubit", rng)
    sigs = {(h.signature, tuple(sorted(h.two_qubit_gate.qubits))) for h in c.hard_cycles}
    nm = random_model(n, rng, sorted(sigs))
    np.testing.assert_allclose(simulate(c, nm), dense_simulate(c, nm), atol=1e-12)


def test_ideal_model_reproduces_unitary():
    c = build_qft(3)
    psi = circuit_unitary(c)[:, 0]
    np.testing.assert_allclose(simulate(c, NoiseModel.ideal()), np.outer(psi, psi.conj()), atol=1e-12)


def test_missing_rule_and_bad_coverage():
    c = build_qft(2)
    with pytest.raises(MissingCycleRuleError):
        simulate(c, NoiseModel())
    sig = c.hard_cycles[0].signature
    bad = NoiseModel({sig: [Body.from_qh((0,), [1, 0, 0, 0])]})
    with pytest.raises(ValueError, match="cover"):
        bad.bodies_for(c.hard_cycles[0], 2)


def test_model_json_roundtrip(tmp_path):
    rng = np.random.default_rng(2)
    q = rng.dirichlet(np.ones(16))
    nm = NoiseModel({"CX(1,0)": [Body.from_qh((0, 1), q, rng.normal(0, 0.01, 15), {"tag": 1})]},
                    [Body.from_qh((0,), [0.97, 0.01, 0.01, 0.01])], [(0.99, 0.95), (0.98, 0.97)])
    path = tmp_path / "m.json"
    path.write_text(nm.to_json())
    back = NoiseModel.load(path)
    np.testing.assert_allclose(back.rules["CX(1,0)"][0].channel.superop, nm.rules["CX(1,0)"][0].channel.superop)
    assert back.rules["CX(1,0)"][0].meta == {"tag": 1}
    assert back.readout == nm.readout


def test_cycle_channel_matches_simulation():
    rng = np.random.default_rng(4)
    cyc = hard_cycle(3, [Gate("CX", (1, 0))])
    nm = random_model(3, rng, [(cyc.signature, (0, 1))])
    rho = np.diag(rng.dirichlet(np.ones(8))).astype(complex)
    ch = nm.cycle_channel(cyc, 3)
    from rckit.noise import _apply_superop

    t = rho.reshape((2,) * 6)
    for axes, op in nm._ops(cyc, 3):
        t = _apply_superop(t, op, axes)
    np.testing.assert_allclose(ch.apply(rho), t.reshape(8, 8), atol=1e-14)
    assert process_fidelity(ch) <= 1


def test_readout_confusion():
    rho = np.diag([1.0, 0, 0, 0]).astype(complex)
    d = measure_distribution(rho, [(0.9, 0.8), (0.95, 0.7)])
    np.testing.assert_allclose(d.probs, [0.9 * 0.95, 0.9 * 0.05, 0.1 * 0.95, 0.1 * 0.05])
    np.testing.assert_allclose(confusion_matrix(0.9, 0.8).sum(0), [1, 1])
    with pytest.raises(ValueError):
        measure_distribution(rho, [(0.9, 0.8)])


def test_distribution_io_and_sampling():
    rng = np.random.default_rng(0)
    d = Distribution(2, probs=[0.5, 0.25, 0.25, 0.0])
    assert Distribution.from_dict(d.to_dict()).probs.tolist() == d.probs.tolist()
    c = sample_counts(d, 1000, rng)
    assert c.shots == 1000 and c.counts[3] == 0
    u = union_counts([c, sample_counts(d, 500, rng)])
    assert u.shots == 1500
    s = subsample_counts(u, 700, rng)
    assert s.shots == 700 and np.all(s.counts <= u.counts)
    with pytest.raises(ValueError):
        Distribution(1, probs=[0.5, 0.6])
    with pytest.raises(ValueError):
        subsample_counts(c, 2000, rng)


def test_pauli_product_distribution():
    a = np.array([0.9, 0.1, 0, 0])
    b = np.array([0.8, 0, 0, 0.2])
    joint = pauli_product_distribution(2, [((1,), b), ((0,), a)])
    assert joint[0b0000] == pytest.approx(0.72)
    assert joint[1 * 4 + 3] == pytest.approx(0.02)  # "XZ"
