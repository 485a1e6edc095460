"""Monte Carlo ensembles of measured qubits.

Every trajectory owns its random streams, derived from ``(master_seed,
index)`` through ``numpy.random.SeedSequence`` spawn keys and Philox
counter-based generators. Trajectories are processed in fixed batches of
:data:`BATCH_SIZE` and reduced in index order, so results are bitwise
reproducible for any number of worker threads.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, asdict
import logging
import math

import numpy as np

from . import analytics, kernels
from .protocols import Protocol

log = logging.getLogger(__name__)

BATCH_SIZE = 500
BLOCK_STEPS = 2048
DEFAULT_DT = 1e-4
DEFAULT_N_TRAJ = 20_000
DEFAULT_SEED = 20_000

_NORMAL_STREAM = 0
_UNIFORM_STREAM = 1


@dataclass(frozen=True)
class SimConfig:
    epsilon: float = 1e-6
    protocol: Protocol = Protocol.NO_FEEDBACK
    dt: float = DEFAULT_DT
    t_max: float = None
    n_traj: int = DEFAULT_N_TRAJ
    master_seed: int = DEFAULT_SEED
    z0: float = 0.0
    record_stride: int = 100
    bridge: bool = True

    def __post_init__(self):
        object.__setattr__(self, "protocol", Protocol.parse(self.protocol))
        if not 0.0 < self.epsilon < 0.5:
            raise ValueError(f"epsilon must lie in (0, 1/2), got {self.epsilon}")
        if not (math.isfinite(self.dt) and self.dt > 0):
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.t_max is None:
            object.__setattr__(self, "t_max", 10.0 * analytics.tau_q(self.epsilon))
        if not self.dt < self.t_max:
            raise ValueError(f"dt ({self.dt}) must be smaller than t_max ({self.t_max})")
        if int(self.n_traj) != self.n_traj or self.n_traj < 1:
            raise ValueError(f"n_traj must be a positive integer, got {self.n_traj}")
        if not 0 <= int(self.master_seed) < 2 ** 64:
            raise ValueError("master_seed must be a 64-bit unsigned integer")
        if not -1.0 < self.z0 < 1.0:
            raise ValueError(f"z0 must lie in (-1, 1), got {self.z0}")
        if self.record_stride < 1:
            raise ValueError("record_stride must be at least 1")

    @property
    def Z(self):
        return analytics.threshold_z(self.epsilon)

    @property
    def n_steps_max(self):
        return int(math.ceil(self.t_max / self.dt - 1e-9))

    def as_dict(self):
        d = asdict(self)
        d["protocol"] = self.protocol.value
        return d


@dataclass
class FirstPassageRecord:
    T: float
    pole: int
    censored: bool


@dataclass
class Histogram:
    edges: np.ndarray
    counts: np.ndarray
    quantity: str = "value"

    def __post_init__(self):
        self.edges = np.asarray(self.edges, dtype=float)
        self.counts = np.asarray(self.counts, dtype=np.int64)
        if np.any(np.diff(self.edges) <= 0):
            raise ValueError("histogram edges must be strictly increasing")
        if len(self.counts) != len(self.edges) - 1:
            raise ValueError("need one count per bin")

    @property
    def total(self):
        return int(self.counts.sum())

    @property
    def centres(self):
        return 0.5 * (self.edges[1:] + self.edges[:-1])

    def density(self):
        if self.total == 0:
            return np.zeros(len(self.counts))
        return self.counts / (self.total * np.diff(self.edges))

    @classmethod
    def from_samples(cls, samples, edges=None, bins=50, quantity="value"):
        samples = np.asarray(samples, dtype=float)
        if edges is None:
            lo, hi = float(samples.min()), float(samples.max())
            if hi <= lo:
                lo, hi = lo - 0.5, hi + 0.5
            edges = np.linspace(lo, hi, bins + 1)
        edges = np.asarray(edges, dtype=float)
        counts, _ = np.histogram(samples, bins=edges)
        # np.histogram drops values outside the edges; make sure none were
        inside = (samples >= edges[0]) & (samples <= edges[-1])
        if not inside.all():
            log.warning("%d samples fall outside the histogram range",
                        int((~inside).sum()))
        return cls(edges, counts, quantity)


@dataclass
class EnsembleSummary:
    config: SimConfig
    T: np.ndarray
    pole: np.ndarray
    censored: np.ndarray
    histogram: Histogram = field(repr=False)

    @property
    def uncensored(self):
        return self.T[~self.censored]

    @property
    def n_censored(self):
        return int(self.censored.sum())

    @property
    def mean(self):
        u = self.uncensored
        return float(np.mean(u)) if u.size else math.nan

    @property
    def std(self):
        u = self.uncensored
        return float(np.std(u, ddof=1)) if u.size > 1 else 0.0

    @property
    def se(self):
        u = self.uncensored
        return self.std / math.sqrt(u.size) if u.size > 1 else 0.0

    @property
    def pole_counts(self):
        return {+1: int(np.sum(self.pole == 1)), -1: int(np.sum(self.pole == -1))}

    def record(self, index):
        return FirstPassageRecord(float(self.T[index]), int(self.pole[index]),
                                  bool(self.censored[index]))

    def as_dict(self):
        poles = self.pole_counts
        return {
            "epsilon": self.config.epsilon,
            "protocol": self.config.protocol.value,
            "n_traj": self.config.n_traj,
            "n_censored": self.n_censored,
            "mean_T": self.mean,
            "std_T": self.std,
            "se_T": self.se,
            "n_pole_plus": poles[+1],
            "n_pole_minus": poles[-1],
        }


# ----------------------------------------------------------------- streams

def _seed_sequence(master_seed, index, stream):
    return np.random.SeedSequence(int(master_seed), spawn_key=(int(index), stream))


def normal_stream(master_seed, index):
    """Generator of standard normals driving trajectory ``index``."""
    return np.random.Generator(np.random.Philox(_seed_sequence(master_seed, index, _NORMAL_STREAM)))


def uniform_stream(master_seed, index):
    """Generator of uniforms for the between-step crossing test of trajectory ``index``."""
    return np.random.Generator(np.random.Philox(_seed_sequence(master_seed, index, _UNIFORM_STREAM)))


def _batches(n):
    return [np.arange(lo, min(lo + BATCH_SIZE, n)) for lo in range(0, n, BATCH_SIZE)]


def _map_batches(fn, n, workers):
    batches = _batches(n)
    if workers is None or workers <= 1 or len(batches) == 1:
        return [fn(b) for b in batches]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, batches))


def _fill(gens, rows, out):
    for j, i in enumerate(rows):
        gens[i].standard_normal(out=out[j])


def _fill_uniform(gens, rows, out):
    for j, i in enumerate(rows):
        gens[i].random(out=out[j])


def _initial_state(cfg, m):
    z = np.full(m, float(cfg.z0))
    x = np.zeros(m)
    a = np.full(m, 1.0 - cfg.z0 * cfg.z0)
    return x, z, a, a.copy()


# ---------------------------------------------------------- first passage

def _bridge_params(cfg):
    if not cfg.bridge or cfg.protocol.feedback:
        return 0.0, -1.0
    U = math.atanh(cfg.Z)
    # only test for crossings when p = exp(-d0 d1 / 2dt) could exceed ~1e-13
    reach = math.sqrt(60.0 * cfg.dt)
    if U - reach <= 0.0:
        return U, 1.0
    return U, 1.0 / math.cosh(U - reach) ** 2


def _fpt_batch(cfg, rows, backend):
    kernel = kernels.get_backend(backend)
    m = len(rows)
    T = np.full(m, float(cfg.t_max))
    pole = np.zeros(m, dtype=np.int64)
    censored = np.ones(m, dtype=bool)
    x, z, a, w = _initial_state(cfg, m)
    w_target = 2.0 * cfg.epsilon

    if w[0] <= w_target or abs(cfg.z0) >= cfg.Z:
        T[:] = 0.0
        pole[:] = 0 if cfg.protocol.feedback or cfg.z0 == 0 else int(np.sign(cfg.z0))
        censored[:] = False
        return T, pole, censored

    bridge_u, a_near = _bridge_params(cfg)
    normals = [normal_stream(cfg.master_seed, i) for i in rows]
    uniforms = [uniform_stream(cfg.master_seed, i) for i in rows] if bridge_u > 0 else None

    live = np.arange(m)
    step = 0
    n_max = cfg.n_steps_max
    while live.size and step < n_max:
        k = min(BLOCK_STEPS, n_max - step)
        xi = np.empty((live.size, k))
        _fill(normals, live, xi)
        vi = None
        if uniforms is not None:
            vi = np.empty((live.size, k))
            _fill_uniform(uniforms, live, vi)
        xs, zs, as_, ws = x[live], z[live], a[live], w[live]
        steps = np.empty(live.size, dtype=np.int64)
        frac = np.empty(live.size)
        kernel.advance(xs, zs, as_, ws, xi, vi, cfg.dt, cfg.protocol.feedback,
                       w_target, bridge_u, a_near, steps, frac)
        x[live], z[live], a[live], w[live] = xs, zs, as_, ws
        hit = frac >= 0.0
        if hit.any():
            idx = live[hit]
            T[idx] = (step + steps[hit] - 1 + frac[hit]) * cfg.dt
            censored[idx] = False
            if not cfg.protocol.feedback:
                pole[idx] = np.where(zs[hit] >= 0.0, 1, -1)
            live = live[~hit]
        step += k
    return T, pole, censored


def run_first_passage(cfg, workers=1, backend=None):
    """Per-trajectory first-passage times ``(T, pole, censored)`` in index order."""
    parts = _map_batches(lambda rows: _fpt_batch(cfg, rows, backend), cfg.n_traj, workers)
    T = np.concatenate([p[0] for p in parts])
    pole = np.concatenate([p[1] for p in parts])
    censored = np.concatenate([p[2] for p in parts])
    return T, pole, censored


def run_trajectory(cfg, index, backend=None):
    """First-passage record of trajectory ``index`` alone."""
    if not 0 <= index < cfg.n_traj:
        raise IndexError(f"trajectory {index} outside 0..{cfg.n_traj - 1}")
    T, pole, censored = _fpt_batch(cfg, np.array([index]), backend)
    return FirstPassageRecord(float(T[0]), int(pole[0]), bool(censored[0]))


def fpt_histogram(T, bins=60, t_hi=None):
    T = np.asarray(T, dtype=float)
    if t_hi is None:
        t_hi = float(T.max()) if T.size else 1.0
    t_hi = max(t_hi, 1e-12)
    return Histogram(np.linspace(0.0, t_hi * (1 + 1e-12), bins + 1),
                     np.histogram(T, bins=np.linspace(0.0, t_hi * (1 + 1e-12), bins + 1))[0],
                     "T")


def run_ensemble(cfg, workers=1, backend=None, bins=60):
    """First-passage statistics over ``cfg.n_traj`` trajectories."""
    T, pole, censored = run_first_passage(cfg, workers, backend)
    if censored.any():
        log.warning("%d of %d trajectories censored at t_max = %g",
                    int(censored.sum()), cfg.n_traj, cfg.t_max)
    hist = fpt_histogram(T[~censored], bins=bins)
    return EnsembleSummary(cfg, T, pole, censored, hist)


# ---------------------------------------------------------- free evolution

def _record_steps(cfg, times):
    times = np.atleast_1d(np.asarray(times, dtype=float))
    if np.any(times < 0):
        raise ValueError("snapshot times must be non-negative")
    if np.any(times > cfg.t_max + cfg.dt):
        raise ValueError("snapshot time beyond t_max")
    steps = np.rint(times / cfg.dt).astype(np.int64)
    if np.any(np.diff(steps) < 0):
        raise ValueError("snapshot times must be sorted")
    return steps


def _evolve_batch(cfg, rows, steps, reducer, backend):
    kernel = kernels.get_backend(backend)
    m = len(rows)
    x, z, a, w = _initial_state(cfg, m)
    gens = [normal_stream(cfg.master_seed, i) for i in rows]
    all_rows = np.arange(m)
    dummy_steps = np.empty(m, dtype=np.int64)
    dummy_frac = np.empty(m)
    out = []
    now = 0
    for target in steps:
        while now < target:
            k = int(min(BLOCK_STEPS, target - now))
            xi = np.empty((m, k))
            _fill(gens, all_rows, xi)
            kernel.advance(x, z, a, w, xi, None, cfg.dt, cfg.protocol.feedback,
                           -1.0, 0.0, -1.0, dummy_steps, dummy_frac)
            now += k
        out.append(reducer(x, z, a, w))
    return out


def state_snapshots(cfg, times, workers=1, backend=None):
    """Free-evolution states at ``times`` (no absorbing stop).

    Returns a dict of arrays of shape ``(len(times), n_traj)`` keyed by
    ``x``, ``z``, ``s`` (linear entropy) and ``t`` (the grid times used).
    """
    steps = _record_steps(cfg, times)
    grab = lambda x, z, a, w: (x.copy(), z.copy(), 0.5 * w)
    parts = _map_batches(lambda rows: _evolve_batch(cfg, rows, steps, grab, backend),
                         cfg.n_traj, workers)
    out = {}
    for j, name in enumerate(("x", "z", "s")):
        out[name] = np.stack([np.concatenate([p[i][j] for p in parts])
                              for i in range(len(steps))])
    out["t"] = steps * cfg.dt
    return out


def log_entropy_edges(lo=-16.0, hi=np.log10(0.5), width=0.25):
    """Bin edges in log10(s) of the given width ending exactly at log10(1/2)."""
    n = int(math.ceil((hi - lo) / width))
    return hi - width * np.arange(n, -1, -1)


def purity_snapshot(cfg, t_snap, edges=None, workers=1, backend=None):
    """Histogram of log10(1 - p) across the ensemble at ``t_snap``."""
    snap = state_snapshots(cfg, [t_snap], workers, backend)
    ls = np.log10(snap["s"][0])
    if edges is None:
        edges = log_entropy_edges(lo=min(-16.0, math.floor(ls.min())))
    return Histogram.from_samples(ls, edges=edges, quantity="log10_s")


_OBS = ("z", "abs_z", "p", "ln_s", "z2", "r2")


def _observable_sums(x, z, a, w):
    s = 0.5 * w
    vals = {
        "z": z,
        "abs_z": np.abs(z),
        "p": 1.0 - s,
        "ln_s": np.log(s),
        "z2": 1.0 - a,
        "r2": 1.0 - w,
    }
    return np.array([[v.sum(), (v * v).sum()] for v in (vals[k] for k in _OBS)])


@dataclass
class ObservableSeries:
    t: np.ndarray
    mean: dict
    se: dict

    def at(self, name, i):
        return self.mean[name][i], self.se[name][i]


def mean_observables(cfg, times, workers=1, backend=None):
    """Ensemble means and standard errors of z, |z|, p, ln s, z^2 and x^2+z^2.

    Only per-batch sums are kept, so long time series stay cheap in memory.
    """
    steps = _record_steps(cfg, times)
    parts = _map_batches(lambda rows: _evolve_batch(cfg, rows, steps, _observable_sums, backend),
                         cfg.n_traj, workers)
    sums = np.zeros((len(steps), len(_OBS), 2))
    for p in parts:
        sums += np.stack(p)
    n = cfg.n_traj
    mean = sums[:, :, 0] / n
    var = np.maximum(sums[:, :, 1] / n - mean ** 2, 0.0) * n / max(n - 1, 1)
    se = np.sqrt(var / n)
    return ObservableSeries(
        steps * cfg.dt,
        {k: mean[:, j] for j, k in enumerate(_OBS)},
        {k: se[:, j] for j, k in enumerate(_OBS)},
    )


def observable_series(cfg, t_end, workers=1, backend=None):
    """:func:`mean_observables` every ``cfg.record_stride`` steps up to ``t_end``."""
    n = int(round(t_end / cfg.dt))
    steps = np.arange(0, n + 1, cfg.record_stride)
    return mean_observables(cfg, steps * cfg.dt, workers, backend)


def late_log_entropy_slope(series, threshold=0.99, t_end=None):
    """Least-squares slope of mean ln s over the window where mean x^2+z^2 > threshold."""
    mask = series.mean["r2"] > threshold
    if t_end is not None:
        mask &= series.t <= t_end
    if mask.sum() < 3:
        raise ValueError("window with mean squared Bloch length above threshold is too short")
    slope, _ = np.polyfit(series.t[mask], series.mean["ln_s"][mask], 1)
    return float(slope), (float(series.t[mask][0]), float(series.t[mask][-1]))
