import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qpurify.bloch import BlochState, ito_path_batch, ito_step, purity as bloch_purity
from qpurify.density import (IDENTITY, SIGMA_Z, check_density, dissipator, from_bloch,
                             innovation_term, purity, sme_path_batch, sme_step, to_bloch)

UP = np.diag([1.0, 0.0]).astype(complex)
MIXED = 0.5 * IDENTITY


def _rho(x, z):
    return from_bloch(BlochState(x, z))


disc = st.tuples(st.floats(0.0, 1.0), st.floats(0.0, 2 * math.pi)).map(
    lambda rp: (rp[0] * math.cos(rp[1]), rp[0] * math.sin(rp[1])))


def test_dissipator_examples():
    assert np.allclose(dissipator(MIXED), 0)
    assert np.allclose(dissipator(UP), 0)
    c = 0.3 + 0.1j
    rho = np.array([[0.5, c], [np.conj(c), 0.5]])
    out = dissipator(rho)
    assert out[0, 1] == pytest.approx(-2 * c)
    assert out[0, 0] == 0


def test_innovation_examples():
    assert np.allclose(innovation_term(UP), 0)
    assert np.allclose(innovation_term(MIXED), np.diag([1.0, -1.0]))


@settings(max_examples=100, deadline=None)
@given(disc)
def test_superoperators_are_traceless(xz):
    rho = _rho(*xz)
    assert abs(np.trace(innovation_term(rho))) < 1e-14
    assert abs(np.trace(dissipator(rho))) < 1e-14


def test_sme_step_examples():
    for dt, dW in ((1e-3, 0.2), (0.0, -0.5)):
        assert np.allclose(sme_step(UP, dt, dW), UP, atol=1e-15)
    out = sme_step(MIXED, 0.0, 0.1)
    assert np.allclose(out, MIXED + 0.1 * np.diag([1.0, -1.0]))


@pytest.mark.parametrize("dt, dW", [(-1e-3, 0.0), (1e-3, math.inf)])
def test_sme_step_rejects_bad_input(dt, dW):
    with pytest.raises(ValueError):
        sme_step(MIXED, dt, dW)


@settings(max_examples=200, deadline=None)
@given(disc, st.floats(0.0, 1e-2), st.floats(-0.3, 0.3))
def test_sme_step_keeps_a_valid_density_matrix(xz, dt, dW):
    out = sme_step(_rho(*xz), dt, dW)
    assert abs(np.trace(out) - 1) < 1e-12
    assert np.allclose(out, out.conj().T, atol=0)
    check_density(out, atol=1e-12)


def test_positivity_repair():
    # a large kick overshoots the pure boundary
    out = sme_step(_rho(0.0, 0.9), 1e-4, 2.0)
    evals = np.linalg.eigvalsh(out)
    assert evals.min() >= -1e-15
    assert np.trace(out).real == pytest.approx(1.0)


@pytest.mark.parametrize("x, z", [(0.0, 0.0), (0.0, 1.0), (0.6, 0.8), (-0.3, 0.2)])
def test_bloch_roundtrip(x, z):
    rho = _rho(x, z)
    back = to_bloch(rho)
    assert (back.x, back.z) == (pytest.approx(x, abs=1e-15), pytest.approx(z, abs=1e-15))
    assert purity(rho) == pytest.approx(bloch_purity(BlochState(x, z)), abs=1e-12)


def test_roundtrip_named_states():
    assert np.allclose(_rho(0, 0), MIXED)
    assert np.allclose(_rho(0, 1), UP)
    assert purity(_rho(0.6, 0.8)) == pytest.approx(1.0, abs=1e-12)


def test_from_bloch_rejects_long_vector():
    class Fake:
        x, z = 0.9, 0.9
    with pytest.raises(ValueError):
        from_bloch(Fake())


def test_check_density_rejects_invalid():
    with pytest.raises(ValueError):
        check_density(np.diag([0.7, 0.7]))
    with pytest.raises(ValueError):
        check_density(np.diag([1.2, -0.2]))
    with pytest.raises(ValueError):
        check_density(np.array([[0.5, 0.1], [0.2, 0.5]]))


def test_single_step_agrees_with_bloch_update():
    # Euler-Maruyama on rho and on (x, z) are the same scheme in different coordinates
    state = BlochState(0.3, -0.5)
    for dt, dW in ((1e-4, 0.01), (1e-3, -0.03), (0.0, 0.2)):
        a = ito_step(state, dt, dW)
        b = to_bloch(sme_step(from_bloch(state), dt, dW))
        assert (b.x, b.z) == (pytest.approx(a.x, abs=1e-14), pytest.approx(a.z, abs=1e-14))


def test_path_equivalence_regression(rng):
    # baseline for shared-noise agreement at dt = 1e-5 over t in [0, 1]
    dt = 1e-5
    dW = rng.standard_normal((4, 100_000)) * math.sqrt(dt)
    _, z_b = ito_path_batch(0.0, 0.0, dW, dt)
    _, z_o = sme_path_batch(np.zeros(4), np.zeros(4), dW, dt)
    assert np.max(np.abs(z_b - z_o)) < 1e-10


def test_sme_batch_matches_scalar(rng):
    dt = 1e-4
    dW = rng.standard_normal((2, 50)) * math.sqrt(dt)
    _, zs = sme_path_batch(np.array([0.2, 0.0]), np.array([0.1, -0.4]), dW, dt)
    for i, (x0, z0) in enumerate(((0.2, 0.1), (0.0, -0.4))):
        rho = _rho(x0, z0)
        for d in dW[i]:
            rho = sme_step(rho, dt, d)
        assert zs[i, -1] == pytest.approx(np.trace(SIGMA_Z @ rho).real, abs=1e-13)
