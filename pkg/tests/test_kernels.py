import math

import numpy as np
import pytest

from qpurify import ensemble, kernels
from qpurify.ensemble import SimConfig, run_first_passage, state_snapshots

HAVE_COMPILED = "compiled" in kernels.BACKENDS
needs_compiled = pytest.mark.skipif(not HAVE_COMPILED, reason="extension not built")


def _block(rng, m, k, z0=0.0):
    x = np.zeros(m)
    z = np.full(m, z0)
    a = 1.0 - z * z
    return x, z, a, a.copy(), rng.standard_normal((m, k)), rng.random((m, k))


def _run(backend, state, **kw):
    x, z, a, w, xi, u = (None if v is None else v.copy() for v in state)
    m = len(x)
    steps = np.empty(m, dtype=np.int64)
    frac = np.empty(m)
    args = dict(dt=1e-3, feedback=False, w_target=-1.0, bridge_u=0.0, a_near=-1.0)
    args.update(kw)
    kernels.get_backend(backend).advance(x, z, a, w, xi, u, args["dt"], args["feedback"],
                                         args["w_target"], args["bridge_u"], args["a_near"],
                                         steps, frac)
    return x, z, a, w, steps, frac


def test_backend_registry():
    assert kernels.BACKEND in kernels.BACKENDS
    assert "python" in kernels.BACKENDS
    with pytest.raises(ValueError):
        kernels.get_backend("fortran")


@needs_compiled
@pytest.mark.parametrize("kw", [
    dict(),
    dict(feedback=True),
    dict(w_target=0.02),
    dict(feedback=True, w_target=0.5),
    dict(w_target=0.02, bridge_u=math.atanh(math.sqrt(0.98)), a_near=0.2),
])
def test_compiled_matches_python(rng, kw):
    state = _block(rng, 64, 3000, z0=0.1)
    c = _run("compiled", state, **kw)
    p = _run("python", state, **kw)
    for u, v in zip(c[:4], p[:4]):
        assert np.allclose(u, v, rtol=1e-10, atol=1e-300)
    assert np.array_equal(c[4], p[4])
    assert np.allclose(c[5], p[5], rtol=1e-10, atol=0)


@pytest.mark.parametrize("backend", sorted(kernels.BACKENDS))
def test_zero_noise_is_pure_dephasing(backend, rng):
    x, z, a, w, _, _ = _block(rng, 3, 1)
    x[:] = 0.8
    w[:] = 1 - 0.64
    xi = np.zeros((3, 10))
    steps = np.empty(3, dtype=np.int64)
    frac = np.empty(3)
    kernels.get_backend(backend).advance(x, z, a, w, xi, None, 1e-3, False, -1.0, 0.0, -1.0,
                                         steps, frac)
    assert np.allclose(x, 0.8)
    assert np.all(steps == 10) and np.all(frac == -1.0)


@pytest.mark.parametrize("backend", sorted(kernels.BACKENDS))
def test_feedback_keeps_state_on_x_axis(backend, rng):
    x, z, a, w, xi, _ = _block(rng, 20, 500)
    _, z, a, w, _, _ = _run(backend, (x, z, a, w, xi, None), feedback=True)
    assert np.all(z == 0.0) and np.all(a == 1.0)
    assert np.all((0 < w) & (w < 1))


@pytest.mark.parametrize("backend", sorted(kernels.BACKENDS))
def test_hit_interpolation(backend, rng):
    x, z, a, w, xi, _ = _block(rng, 50, 2000)
    target = 0.3
    w0 = w.copy()
    out = _run(backend, (x, z, a, w, xi, None), w_target=target)
    steps, frac = out[4], out[5]
    hit = frac >= 0
    assert hit.any()
    assert np.all((frac[hit] >= 0) & (frac[hit] <= 1))
    assert np.all(steps[hit] >= 1)
    assert np.all(out[3][hit] <= target)
    assert np.all(w0 > target)


def test_state_arrays_must_match_noise(rng):
    for backend in kernels.BACKENDS:
        with pytest.raises(ValueError):
            kernels.get_backend(backend).advance(
                np.zeros(2), np.zeros(2), np.ones(2), np.ones(2), np.zeros((3, 4)), None,
                1e-3, False, -1.0, 0.0, -1.0, np.empty(3, dtype=np.int64), np.empty(3))


@pytest.mark.parametrize("protocol", ["none", "jacobs"])
def test_block_size_does_not_change_results(monkeypatch, protocol):
    cfg = SimConfig(epsilon=1e-2, protocol=protocol, n_traj=40, master_seed=3)
    ref = run_first_passage(cfg)
    monkeypatch.setattr(ensemble, "BLOCK_STEPS", 37)
    out = run_first_passage(cfg)
    for u, v in zip(ref, out):
        assert np.array_equal(u, v)


@pytest.mark.parametrize("backend", sorted(kernels.BACKENDS))
def test_ensemble_backends_agree(backend):
    cfg = SimConfig(epsilon=1e-3, n_traj=60, master_seed=11)
    T_ref, pole_ref, _ = run_first_passage(cfg, backend=kernels.BACKEND)
    T, pole, _ = run_first_passage(cfg, backend=backend)
    assert np.allclose(T, T_ref, rtol=1e-9, atol=1e-12)
    assert np.array_equal(pole, pole_ref)
    snap_ref = state_snapshots(cfg, [0.5], backend=kernels.BACKEND)
    snap = state_snapshots(cfg, [0.5], backend=backend)
    assert np.allclose(snap["s"], snap_ref["s"], rtol=1e-9, atol=0)
