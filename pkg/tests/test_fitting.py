import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rckit.benchmark import CBConfig, CERResult, reconstruct_error_rates, run_cb
from rckit.circuit import Gate, hard_cycle
from rckit.experiments import load_default_model
from rckit.fitting import (
    FitFailedError,
    FitTarget,
    body_partition,
    body_report,
    build_noise_model,
    fit_channel,
    forward,
    parse_signature,
    rescale_body,
    rescale_model,
)
from rckit.noise import Body, NoiseModel, compose_sqh, unitarity
from rckit.pauli import walsh_hadamard


@settings(max_examples=20, deadline=None)
@given(st.sampled_from([1, 2]), st.integers(0, 2**32 - 1))
def test_forward_matches_channel(n, seed):
    rng = np.random.default_rng(seed)
    q = rng.dirichlet(np.ones(4**n))
    h = rng.normal(0, 0.3, 4**n - 1)
    ch = compose_sqh(q, h)
    d, u = forward(q, h)
    np.testing.assert_allclose(d, np.diag(ch.ptm), atol=1e-12)
    assert u == pytest.approx(unitarity(ch), abs=1e-12)


def test_target_validation():
    with pytest.raises(ValueError):
        FitTarget(np.ones(8))
    with pytest.raises(ValueError):
        FitTarget(np.array([0.9, 1, 1, 1]))
    with pytest.raises(ValueError):
        FitTarget(np.ones(4), s0=1.5)
    t = FitTarget(np.array([1, 0.9, 0.8, 0.7]), s0=0.5, s1=0.0)
    np.testing.assert_allclose(t.d, [1, 0.95, 0.9, 0.85])
    assert t.u_target == pytest.approx(np.mean(t.d) ** 2)
    assert FitTarget(t.f, s0=0.5, s1=1.0).u_target == 1.0


def test_trivial_fit():
    r = fit_channel(FitTarget(np.ones(4), s1=1.0))
    assert r.residual < 1e-15
    assert r.q[0] == pytest.approx(1, abs=1e-6)


@pytest.mark.parametrize("n", [1, 2])
def test_known_channel_roundtrip(n):
    rng = np.random.default_rng(10 + n)
    q = np.zeros(4**n)
    q[0] = 0.95
    q[1:] = rng.dirichlet(np.ones(4**n - 1)) * 0.05
    h = rng.normal(0, 0.03, 4**n - 1)
    src = compose_sqh(q, h)
    target = FitTarget(np.diag(src.ptm), u=unitarity(src))
    r = fit_channel(target, seed=3)
    assert r.residual < 1e-10
    np.testing.assert_allclose(r.d, np.diag(src.ptm), atol=1e-6)
    assert r.u == pytest.approx(unitarity(src), abs=1e-6)
    assert r.channel.is_cptp()


def test_pauli_channel_with_its_own_unitarity():
    q = np.array([0.96, 0.01, 0.01, 0.02])
    f = walsh_hadamard(q)
    r = fit_channel(FitTarget(f, u=float(np.mean(f[1:] ** 2))))
    assert r.residual < 1e-10
    np.testing.assert_allclose(r.d, f, atol=1e-6)


def test_single_qubit_target_at_s1_07():
    f = walsh_hadamard(np.array([0.985, 0.004, 0.004, 0.007]))
    t = FitTarget(f, s0=1.0, s1=0.7)
    r = fit_channel(t)
    np.testing.assert_allclose(r.d, t.d, atol=1e-6)
    assert r.u == pytest.approx(t.u_target, abs=1e-6)
    assert np.linalg.norm(r.h) > 0


def test_infeasible_target_raises_with_best():
    # d = (1, 1, 0, 0) forces u >= mean(d[1:]^2) = 1/3, but s1 = 0 asks for u = 1/4
    f = walsh_hadamard(np.array([0.5, 0.5, 0.0, 0.0]))
    with pytest.raises(FitFailedError) as exc:
        fit_channel(FitTarget(f, s1=0.0), starts=3)
    assert exc.value.best is not None
    assert exc.value.best.residual >= 1e-10


def test_fit_is_deterministic_under_seed():
    f = walsh_hadamard(np.array([0.97, 0.01, 0.01, 0.01]))
    a = fit_channel(FitTarget(f, s1=0.7), seed=5)
    b = fit_channel(FitTarget(f, s1=0.7), seed=5)
    np.testing.assert_array_equal(a.q, b.q)
    np.testing.assert_array_equal(a.h, b.h)


def test_signature_parsing():
    assert parse_signature("CX(1,0)|I(2)") == [("CX", (1, 0)), ("I", (2,))]
    assert body_partition("I(0)|CX(2,1)|I(3)") == [(1, 2), (0,), (3,)]
    with pytest.raises(ValueError):
        parse_signature("CX[1,0]")


def test_pauli_only_model_scales_error():
    c = np.zeros(16)
    c[0], c[5] = 0.9, 0.1  # "XX" on a CX cycle
    cer = CERResult(2, "CX(1,0)", c, c, 0.0)
    nm = build_noise_model([cer], s0_2q=0.5, pauli_only=True)
    body = nm.rules["CX(1,0)"][0]
    assert body.q[0] == pytest.approx(0.95)
    assert body.q[5] == pytest.approx(0.05)
    assert np.allclose(body.h, 0)


def test_noiseless_cer_gives_noiseless_model():
    c = np.zeros(16)
    c[0] = 1
    nm = build_noise_model([CERResult(2, "CX(1,0)", c, c, 0.0)], s1_2q=1.0)
    ch = nm.rules["CX(1,0)"][0].channel
    # d and u are flat to second order in h, so a tiny residual still allows h ~ 1e-4
    np.testing.assert_allclose(ch.ptm, np.eye(16), atol=1e-3)
    np.testing.assert_allclose(np.diag(ch.ptm), 1, atol=1e-6)


def test_closed_loop_cb_cer_fit_cb():
    """Inject a model, reconstruct its errors, refit, and benchmark the refit."""
    src = load_default_model().rules["CX(1,0)|I(2)|I(3)"][0]
    assert src.qubits == (0, 1)
    cyc = hard_cycle(2, [Gate("CX", (1, 0))])
    injected = NoiseModel({cyc.signature: [src]})
    cb = run_cb(CBConfig(cyc), injected, np.random.default_rng(0), exact_twirl=True)
    cer = reconstruct_error_rates(cb)
    refit = build_noise_model([cer], s1_2q=0.9, seed=1)
    cb2 = run_cb(CBConfig(cyc), refit, np.random.default_rng(0), exact_twirl=True)
    assert cb2.e_f == pytest.approx(cb.e_f, abs=1e-3)
    rep = body_report(refit.rules[cyc.signature][0])
    assert rep["cptp"] and rep["d_error"] < 1e-6 and rep["u_error"] < 1e-6


def test_rescale_pauli_body_is_linear():
    b = Body.from_qh((0,), [0.9, 0.05, 0.03, 0.02])
    np.testing.assert_allclose(rescale_body(b, 0.1).q, [0.99, 0.005, 0.003, 0.002])


def test_rescaled_default_model_meets_scaled_targets():
    nm = load_default_model()
    small = rescale_model(nm, 0.1, 0.1)
    assert set(small.rules) == set(nm.rules)
    for sig, bodies in small.rules.items():
        for b, orig in zip(bodies, nm.rules[sig]):
            rep = body_report(b)
            assert rep["residual"] < 1e-10 and rep["d_error"] < 1e-6 and rep["u_error"] < 1e-6
            # stochastic infidelity shrinks tenfold
            e_small = 1 - np.mean(np.diag(b.channel.ptm))
            e_orig = 1 - np.mean(np.diag(orig.channel.ptm))
            assert e_small == pytest.approx(0.1 * e_orig, rel=1e-4)
    assert small.readout == nm.readout and len(small.default_bodies) == 4
