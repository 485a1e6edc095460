import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qpurify.bloch import BlochState, linear_entropy, measurement_step, purity
from qpurify.protocols import Protocol, apply_control, jacobs_purity, simulated_jacobs_step


def test_parse():
    assert Protocol.parse("none") is Protocol.NO_FEEDBACK
    assert Protocol.parse("JACOBS") is Protocol.JACOBS
    assert Protocol.parse(Protocol.JACOBS) is Protocol.JACOBS
    with pytest.raises(ValueError, match="unknown protocol"):
        Protocol.parse("bang-bang")


def test_control_examples():
    s = apply_control("none", BlochState(0.0, 0.3))
    assert (s.x, s.z) == (0.0, 0.3)
    s = apply_control(Protocol.JACOBS, BlochState(0.3, 0.4))
    assert (s.x, s.z) == (pytest.approx(0.5, abs=1e-15), 0.0)


@settings(max_examples=200, deadline=None)
@given(st.floats(0.0, 1.0), st.floats(0.0, 2 * math.pi))
def test_control_preserves_purity(r, phi):
    state = BlochState(r * math.cos(phi), r * math.sin(phi))
    for kind in Protocol:
        out = apply_control(kind, state)
        assert purity(out) == pytest.approx(purity(state), abs=1e-15)
    assert apply_control(Protocol.JACOBS, state).x >= 0.0


def test_jacobs_purity_examples():
    assert jacobs_purity(0.0) == 0.5
    assert jacobs_purity(math.log(2) / 4) == pytest.approx(0.75, abs=1e-15)
    assert (1 - jacobs_purity(3.2806)) == pytest.approx(1e-6, rel=1e-4)
    with pytest.raises(ValueError):
        jacobs_purity(-0.1)


def test_deterministic_step_with_zero_noise():
    dt = 1e-3
    s = simulated_jacobs_step(BlochState(0.6, 0.0), dt, 0.0)
    assert s.x == pytest.approx(0.6 * (1 - 2 * dt), abs=1e-15)
    assert s.z == 0.0
    # without the noise only dephasing acts, so s grows; purification comes from dW^2
    assert linear_entropy(s) == pytest.approx(0.5 * (1 - (0.6 * (1 - 2 * dt)) ** 2), abs=1e-15)
    assert linear_entropy(s) > linear_entropy(BlochState(0.6, 0.0))


@pytest.mark.parametrize("step", [None, measurement_step])
def test_ensemble_entropy_contracts_at_rate_four(rng, step):
    n, k, dt = 1000, 1000, 1e-4
    dW = rng.standard_normal((n, k)) * math.sqrt(dt)
    kw = {} if step is None else {"step": step}
    s_end = np.empty(n)
    for i in range(n):
        st_ = BlochState(0.0, 0.0)
        for d in dW[i]:
            st_ = simulated_jacobs_step(st_, dt, d, **kw)
        assert st_.z == 0.0
        s_end[i] = linear_entropy(st_)
    t = k * dt
    exact = 0.5 * math.exp(-4 * t)
    assert s_end.mean() == pytest.approx(exact, rel=5e-3)


def test_mean_purity_increases(rng):
    dt = 1e-4
    states = [BlochState(0.5, 0.0)] * 4000
    dW = rng.standard_normal(len(states)) * math.sqrt(dt)
    before = np.mean([purity(s) for s in states])
    after = np.mean([purity(simulated_jacobs_step(s, dt, d)) for s, d in zip(states, dW)])
    assert after > before
