"""Entropy production of the driven oscillator and its lower and upper bounds.

Entropies are dimensionless (``k_B = 1``) and logarithms are natural.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from . import _hyperbolic as hyp
from .dynamics import OscillatorParams, check_qstar, mean_energy_final, mean_energy_initial
from .errors import DomainError, NumericError
from .gaussian import DiscretizedKernel, closed_form_fidelity
from .metrics import bures_angle, bures_distance

__all__ = [
    "s_exact",
    "s_series",
    "SERIES_COEFFICIENTS",
    "sigma_exact",
    "sigma_numeric",
    "WorkDecomposition",
    "work_decomposition",
    "LowerBounds",
    "lower_bounds",
    "ClassicalBound",
    "classical_lower_bound",
    "SpectralBound",
    "upper_bound_spectral",
    "BoundReport",
    "evaluate_bounds",
]

# Taylor coefficients of s(x) in x^2, x^4, ..., x^10; the last two were
# fixed by 120-digit minimisation (992/5103 and 6656/32805 overshoot s).
SERIES_COEFFICIENTS = (2.0, 4.0 / 9.0, 32.0 / 135.0, 7072.0 / 42525.0, 153088.0 / 1148175.0)

S_SATURATION = 1.0 - 1e-12
_EDGE = 1e-13
_SCAN_POINTS = 1024
_GOLDEN_ITERATIONS = 80
_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0

CHAIN_SLACK = 1e-10
UPPER_SLACK = 1e-4
EIGEN_FLOOR = 1e-14


# --------------------------------------------------------------------------
# the sharp lower-bound function s(x)


def _binary_divergence(r, x):
    # relative entropy between Bernoulli(r - x) and Bernoulli(r)
    return (1.0 - r + x) * np.log1p(x / (1.0 - r)) + (r - x) * np.log1p(-x / r)


def _s_minimize(x: np.ndarray) -> np.ndarray:
    """Golden-section minimisation over r, vectorised over ``x``."""
    u = np.linspace(_EDGE, 1.0 - _EDGE, _SCAN_POINTS)
    xc = x[:, None]
    r = xc + (1.0 - xc) * u[None, :]
    r = np.clip(r, xc + _EDGE, 1.0 - _EDGE)
    with np.errstate(divide="ignore", invalid="ignore"):
        f = _binary_divergence(r, xc)
    f = np.where(np.isfinite(f), f, np.inf)
    k = np.argmin(f, axis=1)
    rows = np.arange(x.size)
    lo = r[rows, np.maximum(k - 1, 0)]
    hi = r[rows, np.minimum(k + 1, _SCAN_POINTS - 1)]
    best = f[rows, k]

    c = hi - _INVPHI * (hi - lo)
    d = lo + _INVPHI * (hi - lo)
    fc, fd = _binary_divergence(c, x), _binary_divergence(d, x)
    for _ in range(_GOLDEN_ITERATIONS):
        left = fc < fd
        hi = np.where(left, d, hi)
        lo = np.where(left, lo, c)
        new_c = hi - _INVPHI * (hi - lo)
        new_d = lo + _INVPHI * (hi - lo)
        fd_next = np.where(left, fc, _binary_divergence(new_d, x))
        fc_next = np.where(left, _binary_divergence(new_c, x), fd)
        c, d = np.where(left, new_c, d), np.where(left, c, new_d)
        fc, fd = fc_next, fd_next
    return np.minimum(best, np.minimum(fc, fd))


def s_exact(x):
    """Sharp lower bound on the relative entropy at normalised distance ``x``.

    Minimises the Bernoulli relative entropy ``D(r - x || r)`` over
    ``x < r < 1``.  Accepts scalars or arrays.  Returns ``inf`` for
    ``x >= 1 - 1e-12`` where the minimum diverges.

    Raises
    ------
    DomainError
        For ``x < 0``, ``x > 1`` or NaN.
    """
    arr = np.asarray(x, dtype=float)
    if np.any(~np.isfinite(arr)) or np.any(arr < 0.0) or np.any(arr > 1.0 + 1e-12):
        raise DomainError(f"s(x) needs x in [0, 1), got {x!r}")
    flat = arr.ravel()
    out = np.zeros_like(flat)
    saturated = flat >= S_SATURATION
    out[saturated] = math.inf
    inner = (flat > 0.0) & ~saturated
    if np.any(inner):
        out[inner] = _s_minimize(flat[inner])
    out = out.reshape(arr.shape)
    return float(out) if out.ndim == 0 else out


def s_series(x, n_terms: int = 5):
    """Partial sum of the even power series of :func:`s_exact` (1 to 5 terms)."""
    if n_terms not in (1, 2, 3, 4, 5):
        raise DomainError(f"n_terms must be 1..5, got {n_terms!r}")
    arr = np.asarray(x, dtype=float)
    if np.any(arr < 0.0) or np.any(arr >= 1.0):
        raise DomainError(f"series needs x in [0, 1), got {x!r}")
    x2 = arr * arr
    total = np.zeros_like(arr)
    for coeff in reversed(SERIES_COEFFICIENTS[:n_terms]):
        total = (total + coeff) * x2
    return float(total) if total.ndim == 0 else total


# --------------------------------------------------------------------------
# entropy production


def sigma_exact(params: OscillatorParams, qstar: float) -> float:
    """Entropy production of the driven oscillator as a function of Q*."""
    qstar = check_qstar(qstar)
    z0, z1 = params.half_arg(params.omega0), params.half_arg(params.omega1)
    work_term = 0.5 * params.beta * (qstar * params.energy1 - params.energy0) * float(hyp.coth(z0))
    return work_term - (float(hyp.log_sinh(z1)) - float(hyp.log_sinh(z0)))


@dataclass(frozen=True)
class WorkDecomposition:
    """Mean work, free-energy change and their entropy production."""

    mean_work: float
    delta_F: float
    beta: float

    @property
    def sigma(self) -> float:
        return self.beta * (self.mean_work - self.delta_F)


def work_decomposition(params: OscillatorParams, qstar: float) -> WorkDecomposition:
    """Split the entropy production into mean work and free-energy change.

    The drive is unitary so no heat flows and the work is the change of mean
    energy; ``Z = 1 / (2 sinh(beta hbar omega / 2))``.
    """
    work = mean_energy_final(params, qstar) - mean_energy_initial(params)
    z0, z1 = params.half_arg(params.omega0), params.half_arg(params.omega1)
    delta_f = (float(hyp.log_sinh(z1)) - float(hyp.log_sinh(z0))) / params.beta
    return WorkDecomposition(work, delta_f, params.beta)


@dataclass(frozen=True)
class RelativeEntropy:
    value: float
    excluded_mass: float


def sigma_numeric(k_noneq: DiscretizedKernel, k_eq: DiscretizedKernel, full_output: bool = False):
    """Relative entropy ``tr(rho ln rho - rho ln rho_eq)`` of two sampled states.

    Both logarithms go through dense Hermitian eigendecompositions.
    Eigenvalues of ``rho_eq`` below 1e-14 are dropped from its logarithm; the
    weight ``rho`` carries on them is returned as ``excluded_mass`` when
    ``full_output`` is set.
    """
    if not k_noneq.same_grid(k_eq):
        raise DomainError("kernels are sampled on different grids")
    try:
        mu = np.linalg.eigvalsh(k_noneq.scaled())
        lam, vecs = np.linalg.eigh(k_eq.scaled())
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"eigensolver failed: {exc}") from exc
    if mu.min() < -1e-8 or lam.min() < -1e-8:
        raise NumericError(f"kernel is not positive: eigenvalue {min(mu.min(), lam.min())!r}")
    mu = mu[mu > EIGEN_FLOOR]
    neg_entropy = float(np.sum(mu * np.log(mu)))
    # diagonal of rho in the eigenbasis of rho_eq
    weights = np.real(np.einsum("ik,ij,jk->k", vecs.conj(), k_noneq.scaled(), vecs))
    keep = lam > EIGEN_FLOOR
    cross = float(np.sum(weights[keep] * np.log(lam[keep])))
    value = neg_entropy - cross
    if value < -1e-8:
        raise NumericError(f"relative entropy {value!r} is negative")
    result = RelativeEntropy(value, float(np.sum(weights[~keep])))
    return result if full_output else result.value


# --------------------------------------------------------------------------
# lower bounds


@dataclass(frozen=True)
class LowerBounds:
    s_bures: float
    leading_bures: float
    bures_distance_sq: float
    s_trace: Optional[float] = None
    flags: tuple = ()


def lower_bounds(F: float, trace_dist: Optional[float] = None) -> LowerBounds:
    """All lower bounds on the entropy production implied by a fidelity.

    ``trace_dist`` adds the bound from the trace distance, whose value on
    orthogonal states is 1.
    """
    angle = bures_angle(F)
    x = min(2.0 * angle / math.pi, 1.0)
    flags = []
    s_b = s_exact(x)
    if math.isinf(s_b):
        flags.append("s_bures_saturated")
    s_t = None
    if trace_dist is not None:
        trace_dist = float(trace_dist)
        if not 0.0 <= trace_dist <= 1.0:
            raise DomainError(f"trace distance must lie in [0, 1], got {trace_dist!r}")
        s_t = s_exact(trace_dist)
        if math.isinf(s_t):
            flags.append("s_trace_saturated")
    return LowerBounds(s_b, 8.0 / math.pi ** 2 * angle ** 2, bures_distance(F) ** 2, s_t, tuple(flags))


@dataclass(frozen=True)
class ClassicalBound:
    convention: str
    s_value: float
    leading: float


def classical_lower_bound(ell: float, convention: str = "quantum_consistent") -> ClassicalBound:
    """Lower bound on classical entropy production from the statistical length.

    ``quantum_consistent`` uses ``s(2 ell / pi)`` with leading term
    ``(8/pi^2) ell^2`` (the pure-state reduction of the Bures-angle bound);
    ``literal`` uses ``s(ell / (2 pi))`` with leading term ``(2/pi^2) ell^2``.
    """
    ell = float(ell)
    if not 0.0 <= ell <= math.pi / 2.0 + 1e-12:
        raise DomainError(f"statistical length must lie in [0, pi/2], got {ell!r}")
    if convention == "quantum_consistent":
        return ClassicalBound(convention, s_exact(min(2.0 * ell / math.pi, 1.0)), 8.0 / math.pi ** 2 * ell ** 2)
    if convention == "literal":
        return ClassicalBound(convention, s_exact(ell / (2.0 * math.pi)), 2.0 / math.pi ** 2 * ell ** 2)
    raise DomainError(f"unknown convention {convention!r}")


# --------------------------------------------------------------------------
# upper bound sum_n p_n^2 / q_n - 1


@dataclass(frozen=True)
class SpectralBound:
    """Upper bound with the bookkeeping of how it was obtained."""

    mode: str
    value: float
    partial_sum: float = math.nan
    tail: float = 0.0
    n_terms: int = 0
    diverged: bool = False


def _geometric_bound(params: OscillatorParams) -> SpectralBound:
    # (1-a)^2 / ((1-b)(1-a^2/b)) - 1 with a = exp(-beta e0), b = exp(-beta e1);
    # diverges iff a^2 >= b, i.e. 2 omega0 <= omega1
    if 2.0 * params.omega0 <= params.omega1:
        return SpectralBound("eigenvalue", math.inf, diverged=True)
    one_minus_a = -math.expm1(-params.beta * params.energy0)
    one_minus_b = -math.expm1(-params.beta * params.energy1)
    one_minus_ratio = -math.expm1(-params.beta * params.hbar * (2.0 * params.omega0 - params.omega1))
    return SpectralBound("eigenvalue", one_minus_a ** 2 / (one_minus_b * one_minus_ratio) - 1.0)


def _population_bound(params: OscillatorParams, populations: Sequence[float]) -> SpectralBound:
    p = np.asarray(populations, dtype=float)
    if p.ndim != 1 or p.size == 0 or np.any(p < 0.0):
        raise DomainError("populations must be a nonempty vector of nonnegative numbers")
    if p.sum() > 1.0 + 1e-6:
        raise DomainError(f"populations sum to {p.sum()!r} > 1")
    n = np.arange(p.size)
    bw1 = params.beta * params.energy1
    log_q = math.log(-math.expm1(-bw1)) - bw1 * n
    # entries below this are quadrature noise and would be amplified by 1/q_n
    reliable = np.flatnonzero(p > 1e-11)
    if reliable.size == 0:
        raise DomainError("no population above the noise floor")
    last = int(reliable[-1])
    with np.errstate(divide="ignore"):
        log_terms = np.where(p[: last + 1] > 0.0, 2.0 * np.log(p[: last + 1]) - log_q[: last + 1], -np.inf)
    terms = np.exp(log_terms)
    partial = math.fsum(terms)
    ratio = _tail_ratio(log_terms)
    if ratio is None:
        tail, diverged = 0.0, False
    elif ratio >= 1.0:
        return SpectralBound("population", math.inf, partial - 1.0, math.inf, last + 1, True)
    else:
        tail, diverged = float(terms[-1]) * ratio / (1.0 - ratio), False
    return SpectralBound("population", partial + tail - 1.0, partial - 1.0, tail, last + 1, diverged)


def _tail_ratio(log_terms: np.ndarray, window: int = 12) -> Optional[float]:
    """Per-level geometric ratio of the last finite terms (least squares in log)."""
    idx = np.flatnonzero(np.isfinite(log_terms))
    if idx.size < 3:
        return None
    idx = idx[-window:]
    slope = np.polyfit(idx.astype(float), log_terms[idx], 1)[0]
    return float(math.exp(slope))


def upper_bound_spectral(
    params: OscillatorParams,
    mode: str = "eigenvalue",
    populations: Optional[Sequence[float]] = None,
    full_output: bool = False,
):
    """Upper bound ``sum_n p_n^2 / q_n - 1`` on the entropy production.

    ``q_n`` are thermal weights at ``omega1``.  In ``eigenvalue`` mode
    ``p_n`` are the thermal weights at ``omega0`` (the spectrum of the driven
    state, unchanged by unitary evolution) and the geometric series is summed
    in closed form.  In ``population`` mode ``p_n`` are the driven state's
    occupations in the ``omega1`` eigenbasis; the truncated sum is completed
    with a geometric tail fitted to its last terms.

    Returns ``inf`` when the series diverges.
    """
    if mode == "eigenvalue":
        result = _geometric_bound(params)
    elif mode == "population":
        if populations is None:
            raise DomainError("population mode needs populations in the omega1 basis")
        result = _population_bound(params, populations)
    else:
        raise DomainError(f"unknown mode {mode!r}")
    return result if full_output else result.value


# --------------------------------------------------------------------------
# combined report


@dataclass
class BoundReport:
    """Exact entropy production next to every bound evaluated for it."""

    qstar: float
    sigma_exact: float
    lower_bures_angle_s: float
    lower_bures_angle_leading: float
    lower_bures_distance: float
    lower_trace: Optional[float] = None
    upper_eigenvalue: Optional[float] = None
    upper_population: Optional[float] = None
    fidelity: float = math.nan
    flags: List[str] = field(default_factory=list)

    def violations(self) -> List[str]:
        """Human-readable list of inequalities that fail beyond their slack."""
        out = []
        sig = self.sigma_exact
        checks = [
            ("sigma >= s(2L/pi)", sig, self.lower_bures_angle_s, CHAIN_SLACK),
            ("s(2L/pi) >= (8/pi^2) L^2", self.lower_bures_angle_s, self.lower_bures_angle_leading, CHAIN_SLACK),
            ("(8/pi^2) L^2 >= 0", self.lower_bures_angle_leading, 0.0, CHAIN_SLACK),
            ("sigma >= D^2", sig, self.lower_bures_distance, CHAIN_SLACK),
        ]
        if self.lower_trace is not None:
            checks.append(("sigma >= s(T)", sig, self.lower_trace, UPPER_SLACK))
        for label, upper in (("eigenvalue", self.upper_eigenvalue), ("population", self.upper_population)):
            if upper is not None and math.isfinite(upper):
                checks.append((f"upper_{label} >= sigma", upper, sig, UPPER_SLACK))
        for label, big, small, slack in checks:
            if not big >= small - slack:
                out.append(f"{label} violated: {big!r} < {small!r}")
        return out


def evaluate_bounds(
    params: OscillatorParams,
    qstar: float,
    trace_dist: Optional[float] = None,
    populations: Optional[Sequence[float]] = None,
    upper: bool = False,
) -> BoundReport:
    """Evaluate the exact entropy production and all bounds at one Q*."""
    F = closed_form_fidelity(params, qstar)
    low = lower_bounds(F, trace_dist)
    report = BoundReport(
        qstar=float(qstar),
        sigma_exact=sigma_exact(params, qstar),
        lower_bures_angle_s=low.s_bures,
        lower_bures_angle_leading=low.leading_bures,
        lower_bures_distance=low.bures_distance_sq,
        lower_trace=low.s_trace,
        fidelity=F,
        flags=list(low.flags),
    )
    if upper:
        report.upper_eigenvalue = upper_bound_spectral(params, "eigenvalue")
    if populations is not None:
        report.upper_population = upper_bound_spectral(params, "population", populations)
    for v in report.violations():
        report.flags.append(v)
    return report
