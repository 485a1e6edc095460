"""Closed-form and quadrature results for the two purification protocols.

Time is measured in units where the no-feedback dynamics are
``dz = 2(1 - z^2) dW``. Starting from the maximally mixed state the
no-feedback Bloch component is ``z = tanh(2q)`` with ``q`` distributed as an
equal mixture of ``N(+2t, t)`` and ``N(-2t, t)``.
"""

from dataclasses import dataclass
import math

import numpy as np
from scipy import integrate, optimize, special


class QuadratureError(RuntimeError):
    """Adaptive quadrature did not reach the requested tolerance."""

    def __init__(self, message, estimate=None, error=None):
        super().__init__(message)
        self.estimate = estimate
        self.error = error


class RootFindingError(RuntimeError):
    pass


@dataclass(frozen=True)
class QuadratureSpec:
    abs_tol: float = 1e-14
    rel_tol: float = 1e-11
    limit: int = 500
    # integration half-width in units of sqrt(t), added to the mixture centre 2t
    width_sigmas: float = 14.0

    def __post_init__(self):
        if self.abs_tol <= 0 or self.rel_tol <= 0:
            raise ValueError("quadrature tolerances must be positive")

    def half_width(self, t, centre=0.0):
        return abs(centre) + max(20.0, self.width_sigmas * math.sqrt(t))


DEFAULT_QUAD = QuadratureSpec()


def _quad(f, lo, hi, spec, points=None):
    val, err, *info = integrate.quad(
        f, lo, hi, epsabs=spec.abs_tol, epsrel=spec.rel_tol,
        limit=spec.limit, points=points, full_output=1,
    )
    budget = max(spec.abs_tol, spec.rel_tol * abs(val))
    # QUADPACK's error estimate is conservative; allow a small multiple
    if not math.isfinite(val) or err > 100.0 * budget:
        raise QuadratureError(
            f"quadrature failed to converge: value {val!r}, error estimate {err!r}",
            estimate=val, error=err,
        )
    return val


def _check_time(t):
    if not t > 0:
        raise ValueError(f"time must be positive, got {t}")


def _check_epsilon(eps):
    if not 0.0 < eps < 0.5:
        raise ValueError(f"target infidelity must lie in (0, 1/2), got {eps}")


def _gauss_points(t, half):
    # breakpoints at a few standard deviations of a Gaussian factor centred at 0
    sd = math.sqrt(t)
    return [k * sd for k in (1.0, 4.0, 10.0) if k * sd < half]


def _sech(x):
    e = np.exp(-np.abs(x))
    return 2.0 * e / (1.0 + e * e)


# ---------------------------------------------------------------- q-picture

def wp_q(q, t):
    """Density of the linear-trajectory variable ``q`` at time ``t``.

    Equal to ``exp(-2t) cosh(2q) exp(-q^2/2t) / sqrt(2 pi t)``, evaluated as
    a two-Gaussian mixture to avoid overflow.
    """
    _check_time(t)
    q = np.asarray(q, dtype=float)
    norm = 1.0 / math.sqrt(2.0 * math.pi * t)
    out = 0.5 * norm * (np.exp(-(q - 2 * t) ** 2 / (2 * t))
                        + np.exp(-(q + 2 * t) ** 2 / (2 * t)))
    return out if out.ndim else float(out)


def z_of_q(q):
    return np.tanh(2.0 * np.asarray(q, dtype=float))


def wp_q_normalization(t, spec=DEFAULT_QUAD):
    """Numerical integral of :func:`wp_q` over the real line."""
    _check_time(t)
    half = spec.half_width(t, centre=2 * t)
    return _quad(lambda q: wp_q(q, t), -half, half, spec, points=[-2 * t, 0.0, 2 * t])


# ------------------------------------------------------------ mean purity

def mean_purity(t, spec=DEFAULT_QUAD):
    """Ensemble-average purity at time ``t`` under no feedback."""
    _check_time(t)
    half = spec.half_width(t)
    integral = 2.0 * _quad(lambda q: math.exp(-q * q / (2 * t)) * _sech(2 * q),
                           0.0, half, spec, points=_gauss_points(t, half))
    return 1.0 - math.exp(-2.0 * t) / math.sqrt(8.0 * math.pi * t) * integral


def epsilon_asymptotic(t):
    """Large-time form of ``1 - mean_purity(t)``: pi e^{-2t} / (4 sqrt(2 pi t))."""
    _check_time(t)
    return math.pi * math.exp(-2.0 * t) / (4.0 * math.sqrt(2.0 * math.pi * t))


def bisect_root(f, lo, hi, xtol=1e-13):
    """Bisection for a sign change of ``f`` on ``[lo, hi]``."""
    flo, fhi = f(lo), f(hi)
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    if np.sign(flo) == np.sign(fhi):
        raise RootFindingError(
            f"root not bracketed on [{lo}, {hi}]: f = ({flo:.3g}, {fhi:.3g})"
        )
    return optimize.bisect(f, lo, hi, xtol=xtol, rtol=4 * np.finfo(float).eps,
                           maxiter=400)


TAU_BRACKET = (1e-3, 50.0)


def tau_c(epsilon, method="exact", bracket=TAU_BRACKET):
    """Time for the no-feedback mean purity to reach ``1 - epsilon``.

    ``method`` selects the defining relation:

    - ``"exact"``: root of ``mean_purity(t) = 1 - epsilon``;
    - ``"asymptotic"``: root of ``epsilon_asymptotic(t) = epsilon``;
    - ``"leading"``: the leading-log estimate ``ln(1/epsilon) / 2``.
    """
    if method == "leading":
        _check_epsilon(epsilon)
        return 0.5 * math.log(1.0 / epsilon)
    if method == "exact":
        if epsilon == 0.5:
            return 0.0
        _check_epsilon(epsilon)
        lo, hi = bracket
        f = lambda t: (1.0 - mean_purity(t)) - epsilon
        if f(lo) < 0.0:
            # the root sits below the default bracket; the curve starts at 1/2
            lo = 1e-12
        return bisect_root(f, lo, hi)
    if method == "asymptotic":
        _check_epsilon(epsilon)
        lo, hi = bracket
        return bisect_root(lambda t: math.log(epsilon_asymptotic(t) / epsilon), lo, hi)
    raise ValueError(f"unknown method {method!r}")


# -------------------------------------------------- first-passage closed forms

def threshold_z(epsilon):
    """|z| at which the purity (on the z axis) equals ``1 - epsilon``."""
    _check_epsilon(epsilon)
    return math.sqrt(1.0 - 2.0 * epsilon)


def mean_fpt_exact(z0, Z):
    """Mean first-passage time from ``z0`` to ``|z| = Z``: (Z artanh Z - z0 artanh z0)/4."""
    if not 0.0 <= Z < 1.0:
        raise ValueError(f"boundary Z must satisfy 0 <= Z < 1, got {Z}")
    if abs(z0) > Z:
        raise ValueError(f"start {z0} lies outside the boundary {Z}")
    return 0.25 * (Z * math.atanh(Z) - z0 * math.atanh(z0))


def tbar_c_asymptotic(epsilon, form="ln2"):
    """Small-epsilon mean first-passage time under no feedback.

    ``form="ln2"`` gives ``ln(2/epsilon) / 8``; ``form="ln1"`` gives the
    cruder ``ln(1/epsilon) / 8``.
    """
    _check_epsilon(epsilon)
    if form == "ln2":
        return 0.125 * math.log(2.0 / epsilon)
    if form == "ln1":
        return 0.125 * math.log(1.0 / epsilon)
    raise ValueError(f"unknown form {form!r}")


def tau_q(epsilon):
    """Deterministic purification time under Jacobs feedback: -ln(2 epsilon) / 4."""
    if epsilon == 0.5:
        return 0.0
    _check_epsilon(epsilon)
    return -0.25 * math.log(2.0 * epsilon)


def ratio_curve(epsilon):
    """T_q / mean T_c = ln(1/2eps) / (sqrt(1-2eps) artanh sqrt(1-2eps))."""
    _check_epsilon(epsilon)
    Z = math.sqrt(1.0 - 2.0 * epsilon)
    # artanh Z = ln((1 + Z)^2 / 2eps) / 2 stays finite when 1 - 2eps rounds to 1
    artanh_z = 0.5 * math.log((1.0 + Z) ** 2 / (2.0 * epsilon))
    return math.log(1.0 / (2.0 * epsilon)) / (Z * artanh_z)


# ------------------------------------------------------ purity distributions

def linear_entropy_pdf(s, t):
    """Density of the linear entropy ``s = 1 - p`` at time ``t`` under no feedback.

    Taking ``s`` rather than ``p`` keeps full precision for nearly pure
    states. Normalized on (0, 1/2).
    """
    _check_time(t)
    s = np.asarray(s, dtype=float)
    if np.any((s <= 0.0) | (s >= 0.5)):
        raise ValueError("linear entropy must lie strictly between 0 and 1/2")
    one_minus_2s = 1.0 - 2.0 * s
    r = np.sqrt(one_minus_2s)
    # artanh r, with 1 - r = 2s / (1 + r) to avoid cancellation
    artanh_r = 0.5 * np.log((1.0 + r) ** 2 / (2.0 * s))
    # in logs, so that s**3 cannot underflow
    expo = (-artanh_r ** 2 / (8.0 * t) - 2.0 * t
            - 1.5 * np.log(s) - 0.5 * np.log(one_minus_2s))
    out = np.exp(expo) / (4.0 * math.sqrt(math.pi * t))
    return out if out.ndim else float(out)


def purity_pdf_classical(p, t):
    """Density of the purity at time ``t`` under no feedback.

    Normalized on (1/2, 1); it is the push-forward of :func:`wp_q` through
    ``p = (1 + tanh^2 2q) / 2`` (both signs of ``q`` map to the same ``p``).
    """
    p = np.asarray(p, dtype=float)
    if np.any((p <= 0.5) | (p >= 1.0)):
        raise ValueError("purity must lie strictly between 1/2 and 1")
    return linear_entropy_pdf(1.0 - p, t)


def log10_entropy_pdf(log10_s, t):
    """Density of ``log10(1 - p)``, the variable histogrammed in purity snapshots."""
    log10_s = np.asarray(log10_s, dtype=float)
    s = 10.0 ** log10_s
    return linear_entropy_pdf(s, t) * s * math.log(10.0)


def _pdf_moment_in_q(t, weight, spec):
    # integrate weight(p) * pdf over (1/2, 1) after substituting s = sech^2(2q)/2,
    # |ds/dq| = 2 tanh(2q) sech^2(2q), for q > 0
    def integrand(q):
        th = math.tanh(2 * q)
        sech2 = float(_sech(2 * q)) ** 2
        s = 0.5 * sech2
        if s <= 0.0 or s >= 0.5:
            return 0.0
        return weight(s) * linear_entropy_pdf(s, t) * 2.0 * th * sech2

    half = spec.half_width(t, centre=2 * t)
    return _quad(integrand, 0.0, half, spec, points=[2 * t])


def purity_pdf_normalization(t, spec=DEFAULT_QUAD):
    """Integral of :func:`purity_pdf_classical` over (1/2, 1)."""
    _check_time(t)
    return _pdf_moment_in_q(t, lambda s: 1.0, spec)


def mean_purity_from_pdf(t, spec=DEFAULT_QUAD):
    """Mean purity computed from :func:`purity_pdf_classical`."""
    _check_time(t)
    return 1.0 - _pdf_moment_in_q(t, lambda s: s, spec)


def linear_entropy_cdf(s, t):
    """P(1 - p <= s) at time ``t`` under no feedback, from the Gaussian mixture.

    ``s = sech^2(u) / 2`` with ``u = artanh z = 2q`` distributed as an equal
    mixture of ``N(+-4t, 4t)``.
    """
    _check_time(t)
    s = np.asarray(s, dtype=float)
    s_c = np.clip(s, 1e-300, 0.5)
    # |u| at which the entropy equals s
    u = np.arccosh(1.0 / np.sqrt(2.0 * s_c))
    sd = 2.0 * math.sqrt(t)
    mu = 4.0 * t
    # P(|u| >= u0) for the symmetric mixture = P(u >= u0) + P(u <= -u0)
    upper = special.ndtr((mu - u) / sd)
    lower = special.ndtr((-u - mu) / sd)
    out = np.where(s >= 0.5, 1.0, upper + lower)
    out = np.where(s <= 0.0, 0.0, out)
    return out if out.ndim else float(out)


def jacobs_linear_entropy(t):
    """Linear entropy under ideal feedback: e^{-4t} / 2 (a point mass)."""
    if t < 0:
        raise ValueError(f"time must be non-negative, got {t}")
    return 0.5 * math.exp(-4.0 * t)


# ------------------------------------------------------- operational purity

def mean_abs_z(t, spec=DEFAULT_QUAD):
    """<|z|> at time ``t`` under no feedback, by quadrature."""
    _check_time(t)
    half = spec.half_width(t)
    # the Gaussian factor times e^{-2q} peaks at q = -2t < 0, so no breakpoint needed
    integral = _quad(lambda q: math.exp(-q * q / (2 * t) - 2.0 * q), 0.0, half, spec,
                     points=_gauss_points(t, half))
    return 1.0 - 2.0 * math.exp(-2.0 * t) / math.sqrt(2.0 * math.pi * t) * integral


def operational_epsilon(t):
    """Large-time infidelity of the record-averaged state: e^{-2t} / sqrt(2 pi t)."""
    _check_time(t)
    return math.exp(-2.0 * t) / math.sqrt(2.0 * math.pi * t)


def operational_purity(t, spec=DEFAULT_QUAD):
    """Purity (1 + <|z|>^2) / 2 of the state averaged after rotating to z > 0."""
    m = mean_abs_z(t, spec)
    return 0.5 * (1.0 + m * m)
