"""Survival probability from the Fokker-Planck equation with absorbing walls.

Solves ``d/dt P = d^2/dz^2 [D(z) P]`` with ``D(z) = 2 (1 - z^2)^2`` on
``(-Z, Z)``, ``P(+-Z, t) = 0`` and a unit point mass at ``z0``.
Backward Euler in time, second differences of ``D P`` in space.
"""

from dataclasses import dataclass, field
import math

import numpy as np
from scipy.linalg import solve_banded


class FokkerPlanckError(RuntimeError):
    pass


def diffusion(z):
    return 2.0 * (1.0 - z * z) ** 2


@dataclass(frozen=True)
class FPGrid:
    """Uniform grid of ``n_interior`` nodes strictly inside ``(-Z, Z)``.

    Use an odd ``n_interior`` to put a node at ``z = 0``; halving the spacing
    of such a grid means ``n -> 2n + 1``.
    """

    Z: float
    n_interior: int = 801
    dt: float = 1e-3
    g_stop: float = 1e-8
    t_max: float = 1e4
    neg_tol: float = 1e-10

    def __post_init__(self):
        if not 0.0 < self.Z < 1.0:
            raise ValueError(f"boundary must satisfy 0 < Z < 1, got {self.Z}")
        if self.n_interior < 3:
            raise ValueError("need at least three interior nodes")
        if self.dt <= 0 or self.g_stop <= 0:
            raise ValueError("time step and stopping level must be positive")

    @property
    def h(self):
        return 2.0 * self.Z / (self.n_interior + 1)

    @property
    def nodes(self):
        return -self.Z + self.h * np.arange(1, self.n_interior + 1)

    def refined(self):
        return FPGrid(self.Z, 2 * self.n_interior + 1, self.dt, self.g_stop,
                      self.t_max, self.neg_tol)


@dataclass
class SurvivalResult:
    t: np.ndarray
    G: np.ndarray
    mean_fpt: float
    tail: float = 0.0
    grid: FPGrid = field(default=None, repr=False)


def fokker_planck_survival(z0, grid):
    """Survival curve ``G(t | z0)`` and mean first-passage time.

    The mean is the right-endpoint sum of ``G`` over the time steps, which
    for backward Euler equals the integral of the spatially discretized
    survival curve exactly; the remainder beyond ``G < g_stop`` is added from
    the decay rate over the last decade.
    """
    if not abs(z0) < grid.Z:
        raise ValueError(f"start {z0} must lie strictly inside (-{grid.Z}, {grid.Z})")
    n, h, dt = grid.n_interior, grid.h, grid.dt
    nodes = grid.nodes
    d = diffusion(nodes)
    lam = dt / h ** 2

    ab = np.empty((3, n))
    ab[0, :] = -lam * d
    ab[1, :] = 1.0 + 2.0 * lam * d
    ab[2, :] = -lam * d
    ab[0, 0] = 0.0
    ab[2, -1] = 0.0

    prob = np.zeros(n)
    i0 = int(np.argmin(np.abs(nodes - z0)))
    prob[i0] = 1.0 / h

    times = [0.0]
    surv = [1.0]
    total = 0.0
    decade_start = (0.0, 1.0)
    decade_rate = None
    t = 0.0
    while True:
        prob = solve_banded((1, 1), ab, prob, check_finite=False)
        t += dt
        if prob.min() < -grid.neg_tol * max(prob.max(), 1.0):
            raise FokkerPlanckError(
                f"negative density {prob.min():.3e} at t = {t:.4g}; refine dt or the grid"
            )
        g = h * prob.sum()
        times.append(t)
        surv.append(g)
        total += g * dt
        if g <= 0.1 * decade_start[1]:
            decade_rate = math.log(decade_start[1] / g) / (t - decade_start[0])
            decade_start = (t, g)
        if g < grid.g_stop:
            break
        if t >= grid.t_max:
            raise FokkerPlanckError(f"survival still {g:.3e} at t_max = {grid.t_max}")

    tail = 0.0
    if decade_rate is not None and decade_rate > 0.0:
        # geometric remainder of the right-endpoint sum
        r = math.exp(-decade_rate * dt)
        tail = surv[-1] * dt * r / (1.0 - r)
    return SurvivalResult(np.array(times), np.array(surv), total + tail, tail, grid)


def mean_fpt_linear_solve(z0, grid):
    """Mean first-passage time of the semi-discrete system, via one linear solve.

    Solves the backward equation ``D T'' = -1`` with ``T(+-Z) = 0`` on the
    same grid; a check on :func:`fokker_planck_survival` that skips the time
    stepping.
    """
    n, h = grid.n_interior, grid.h
    nodes = grid.nodes
    d = diffusion(nodes)
    ab = np.zeros((3, n))
    ab[0, 1:] = 1.0
    ab[1, :] = -2.0
    ab[2, :-1] = 1.0
    rhs = -h * h / d
    T = solve_banded((1, 1), ab, rhs, check_finite=False)
    return float(np.interp(z0, nodes, T))
