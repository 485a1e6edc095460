"""Full 2x2 density-matrix integrator for the measured qubit.

Independent of :mod:`qpurify.bloch`: it works with complex matrices and the
superoperators directly, so it can be used to cross-check the Bloch-plane
updates.
"""

import numpy as np

from .bloch import BlochState

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
IDENTITY = np.eye(2, dtype=complex)


def check_density(rho, atol=1e-10):
    """Raise ValueError unless ``rho`` is a 2x2 Hermitian, unit-trace, PSD matrix."""
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (2, 2):
        raise ValueError(f"expected a 2x2 matrix, got shape {rho.shape}")
    if not np.allclose(rho, rho.conj().T, atol=atol):
        raise ValueError("density matrix is not Hermitian")
    if abs(np.trace(rho) - 1.0) > atol:
        raise ValueError(f"density matrix trace is {np.trace(rho)}")
    det = (rho[0, 0] * rho[1, 1] - rho[0, 1] * rho[1, 0]).real
    if det < -atol:
        raise ValueError(f"density matrix is not positive (det = {det})")
    return rho


def dissipator(rho):
    """D[sigma_z] rho = sigma_z rho sigma_z - rho."""
    return SIGMA_Z @ rho @ SIGMA_Z - rho


def innovation_term(rho):
    """H[sigma_z] rho = sigma_z rho + rho sigma_z - 2 Tr[sigma_z rho] rho."""
    ez = np.trace(SIGMA_Z @ rho)
    return SIGMA_Z @ rho + rho @ SIGMA_Z - 2.0 * ez * rho


def _enforce_positivity(rho):
    evals, evecs = np.linalg.eigh(rho)
    if evals[0] >= 0.0:
        return rho
    evals = np.clip(evals, 0.0, None)
    evals /= evals.sum()
    out = (evecs * evals) @ evecs.conj().T
    return 0.5 * (out + out.conj().T)


def sme_step(rho, dt, dW):
    """Euler-Maruyama step of the stochastic master equation.

    A step that produces a negative eigenvalue is repaired by clipping it to
    zero and renormalizing the trace.
    """
    if not np.isfinite(dt) or dt < 0.0:
        raise ValueError(f"time step must be finite and non-negative, got {dt}")
    if not np.isfinite(dW):
        raise ValueError(f"Wiener increment must be finite, got {dW}")
    new = rho + dt * dissipator(rho) + dW * innovation_term(rho)
    new = 0.5 * (new + new.conj().T)
    det = (new[0, 0] * new[1, 1] - new[0, 1] * new[1, 0]).real
    if det < 0.0:
        new = _enforce_positivity(new)
    return new


def to_bloch(rho):
    """(x, z) = (Tr[sigma_x rho], Tr[sigma_z rho]) as a BlochState."""
    x = np.trace(SIGMA_X @ rho).real
    z = np.trace(SIGMA_Z @ rho).real
    return BlochState(x, z)


def from_bloch(state):
    """Density matrix (I + x sigma_x + z sigma_z) / 2."""
    if state.x ** 2 + state.z ** 2 > 1.0 + 1e-12:
        raise ValueError("Bloch vector longer than one")
    return 0.5 * (IDENTITY + state.x * SIGMA_X + state.z * SIGMA_Z)


def purity(rho):
    """Tr[rho^2]."""
    return np.trace(rho @ rho).real


def sme_path_batch(x0, z0, dW, dt):
    """Drive a batch of density matrices with the noise rows of ``dW``.

    Returns the induced ``(x, z)`` paths, each of shape ``(n_paths, n_steps + 1)``.
    Positivity repair is applied per path where needed.
    """
    dW = np.atleast_2d(np.asarray(dW, dtype=float))
    n_paths, n_steps = dW.shape
    rho = np.empty((n_paths, 2, 2), dtype=complex)
    rho[:] = 0.5 * IDENTITY
    rho += 0.5 * np.asarray(x0, dtype=float).reshape(-1, 1, 1) * SIGMA_X
    rho += 0.5 * np.asarray(z0, dtype=float).reshape(-1, 1, 1) * SIGMA_Z
    xs = np.empty((n_paths, n_steps + 1))
    zs = np.empty((n_paths, n_steps + 1))
    xs[:, 0] = np.einsum("ij,nji->n", SIGMA_X, rho).real
    zs[:, 0] = np.einsum("ij,nji->n", SIGMA_Z, rho).real
    for k in range(n_steps):
        ez = np.einsum("ij,nji->n", SIGMA_Z, rho)
        d = SIGMA_Z @ rho @ SIGMA_Z - rho
        h = SIGMA_Z @ rho + rho @ SIGMA_Z - 2.0 * ez[:, None, None] * rho
        rho = rho + dt * d + dW[:, k, None, None] * h
        rho = 0.5 * (rho + np.conj(np.swapaxes(rho, 1, 2)))
        det = (rho[:, 0, 0] * rho[:, 1, 1] - rho[:, 0, 1] * rho[:, 1, 0]).real
        for i in np.nonzero(det < 0.0)[0]:
            rho[i] = _enforce_positivity(rho[i])
        xs[:, k + 1] = np.einsum("ij,nji->n", SIGMA_X, rho).real
        zs[:, k + 1] = np.einsum("ij,nji->n", SIGMA_Z, rho).real
    return xs, zs
