"""Bloch-plane state of a qubit under continuous sigma_z measurement.

Units follow the measurement-strength convention in which the conditional
dynamics read ``dz = 2(1 - z^2) dW`` and ``dx = -2x dt - 2zx dW``; the y
component is identically zero.
"""

from dataclasses import dataclass, field
import math

import numpy as np

_TOL = 1e-12


@dataclass(frozen=True)
class BlochState:
    """Point ``(x, z)`` in the Bloch disc.

    ``gap_z = 1 - z**2`` and ``gap = 1 - x**2 - z**2`` are carried alongside
    the coordinates; near a pole they cannot be recovered from ``z`` in
    double precision. They default to the values implied by ``x`` and ``z``.
    """

    x: float
    z: float
    gap_z: float = field(default=None)
    gap: float = field(default=None)

    def __post_init__(self):
        x, z = float(self.x), float(self.z)
        if not (math.isfinite(x) and math.isfinite(z)):
            raise ValueError(f"non-finite Bloch coordinates ({x}, {z})")
        if x * x + z * z > 1.0 + _TOL:
            raise ValueError(f"({x}, {z}) lies outside the Bloch disc")
        gap_z = 1.0 - z * z if self.gap_z is None else float(self.gap_z)
        gap = gap_z - x * x if self.gap is None else float(self.gap)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "z", z)
        object.__setattr__(self, "gap_z", max(gap_z, 0.0))
        object.__setattr__(self, "gap", max(gap, 0.0))

    @property
    def length(self):
        return math.sqrt(self.x * self.x + self.z * self.z)


def purity(state):
    """Tr[rho^2] = (1 + x^2 + z^2) / 2."""
    return 1.0 - 0.5 * state.gap


def linear_entropy(state):
    """s = 1 - purity."""
    return 0.5 * state.gap


def _check_step(dt, dW):
    if not math.isfinite(dt) or dt < 0.0:
        raise ValueError(f"time step must be finite and non-negative, got {dt}")
    if not math.isfinite(dW):
        raise ValueError(f"Wiener increment must be finite, got {dW}")


def _project(x, z):
    r = math.hypot(x, z)
    x, z = x / r, z / r
    return BlochState(x, z, gap_z=x * x, gap=0.0)


def ito_step(state, dt, dW):
    """One Euler-Maruyama step of the conditional Bloch equations.

    A step that lands outside the disc is projected radially back onto the
    unit circle.
    """
    _check_step(dt, dW)
    x, z, a, w = state.x, state.z, state.gap_z, state.gap
    c = 2.0 * dt + 2.0 * z * dW
    x_new = x * (1.0 - c)
    z_new = z + 2.0 * a * dW
    # the two gaps in factored form, algebraically 1 - z'^2 and 1 - x'^2 - z'^2
    dz_term = 4.0 * a * dW * (z + a * dW)
    a_new = a - dz_term
    w_new = w + x * x * c * (2.0 - c) - dz_term
    if a_new < 0.0 or w_new < 0.0:
        return _project(x_new, z_new)
    return BlochState(x_new, z_new, gap_z=a_new, gap=w_new)


def measurement_step(state, dt, dW):
    """Exact measurement update for a record increment ``dW + 2 z dt``.

    Agrees with :func:`ito_step` to first order in ``dt`` but is positivity
    preserving and updates both gaps multiplicatively, so it stays accurate
    at arbitrarily high purity. This is the update used by the ensemble
    kernel.
    """
    _check_step(dt, dW)
    x, z = state.x, state.z
    y = dW + 2.0 * z * dt
    c, s = math.cosh(2.0 * y), math.sinh(2.0 * y)
    n = c + z * s
    inv2 = 1.0 / (n * n)
    return BlochState(x / n, (z * c + s) / n,
                      gap_z=state.gap_z * inv2, gap=state.gap * inv2)


def log_entropy_drift(state):
    """Drift of d(ln s): -4(2s + x^2 + 2z^2)."""
    s = linear_entropy(state)
    if s <= 0.0:
        raise ValueError("ln s is undefined for a pure state")
    return -4.0 * (2.0 * s + state.x ** 2 + 2.0 * state.z ** 2)


def linear_entropy_coefficients(state):
    """Itô drift and diffusion of s: ``ds = -(8s^2 + 4x^2 s) dt - 4zs dW``."""
    s = linear_entropy(state)
    return -(8.0 * s * s + 4.0 * state.x ** 2 * s), -4.0 * state.z * s


def ito_path_batch(x0, z0, dW, dt):
    """Euler-Maruyama ``(x, z)`` paths for each row of increments ``dW``.

    Vectorized counterpart of repeated :func:`ito_step` calls; returns two
    arrays of shape ``(n_paths, n_steps + 1)``.
    """
    dW = np.atleast_2d(np.asarray(dW, dtype=float))
    n, k = dW.shape
    x = np.broadcast_to(np.asarray(x0, dtype=float), (n,)).copy()
    z = np.broadcast_to(np.asarray(z0, dtype=float), (n,)).copy()
    xs = np.empty((n, k + 1))
    zs = np.empty((n, k + 1))
    xs[:, 0], zs[:, 0] = x, z
    for j in range(k):
        d = dW[:, j]
        x, z = x * (1.0 - 2.0 * dt - 2.0 * z * d), z + 2.0 * (1.0 - z * z) * d
        r = np.hypot(x, z)
        over = r > 1.0
        if over.any():
            x[over] /= r[over]
            z[over] /= r[over]
        xs[:, j + 1], zs[:, j + 1] = x, z
    return xs, zs


def measurement_path_batch(x0, z0, dW, dt):
    """Paths of the exact measurement update (:func:`measurement_step`)."""
    dW = np.atleast_2d(np.asarray(dW, dtype=float))
    n, k = dW.shape
    x = np.broadcast_to(np.asarray(x0, dtype=float), (n,)).copy()
    z = np.broadcast_to(np.asarray(z0, dtype=float), (n,)).copy()
    xs = np.empty((n, k + 1))
    zs = np.empty((n, k + 1))
    xs[:, 0], zs[:, 0] = x, z
    for j in range(k):
        y = dW[:, j] + 2.0 * z * dt
        c, s = np.cosh(2.0 * y), np.sinh(2.0 * y)
        nrm = c + z * s
        x, z = x / nrm, (z * c + s) / nrm
        xs[:, j + 1], zs[:, j + 1] = x, z
    return xs, zs
