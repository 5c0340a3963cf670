"""Distances between quantum states and between classical distributions."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DomainError, GridError, NumericError
from .gaussian import DiscretizedKernel

__all__ = [
    "MetricReport",
    "HellingerResult",
    "TraceDistance",
    "bures_angle",
    "bures_distance",
    "hellinger_distance",
    "kl_divergence",
    "trace_distance",
    "metric_report",
    "ORTHOGONAL_DISTANCE",
]

# distance between the orthogonal projectors e11 and e22, the normalisation
# that maps each metric onto the argument of the relative-entropy bound
ORTHOGONAL_DISTANCE = {
    "bures_angle": math.pi / 2.0,
    "bures_distance": math.sqrt(2.0),
    "trace_distance": 1.0,
}

DOMAIN_SLACK = 1e-10
REFINEMENT_TOL = 1e-4


def _check_fidelity(F: float) -> float:
    F = float(F)
    if not (-DOMAIN_SLACK <= F <= 1.0 + DOMAIN_SLACK):
        raise DomainError(f"fidelity must lie in [0, 1], got {F!r}")
    return min(max(F, 0.0), 1.0)


def bures_angle(F: float) -> float:
    """Bures angle ``arccos(sqrt(F))`` in radians."""
    return math.acos(math.sqrt(_check_fidelity(F)))


def bures_distance(F: float) -> float:
    """Bures distance ``sqrt(2 (1 - sqrt(F)))``."""
    return math.sqrt(2.0 * (1.0 - math.sqrt(_check_fidelity(F))))


@dataclass(frozen=True)
class HellingerResult:
    distance: float
    fidelity: float
    length: float


def _check_distributions(p1, p2, dx):
    p1 = np.asarray(p1, dtype=float)
    p2 = np.asarray(p2, dtype=float)
    if p1.shape != p2.shape:
        raise GridError(f"distributions live on different grids: {p1.shape} vs {p2.shape}")
    if not dx > 0.0:
        raise GridError(f"dx must be > 0, got {dx!r}")
    for p in (p1, p2):
        if np.any(p < 0.0):
            raise DomainError("probability densities must be nonnegative")
        if abs(p.sum() * dx - 1.0) > 1e-8:
            raise DomainError(f"density integrates to {p.sum() * dx!r}, not 1")
    return p1, p2


def hellinger_distance(p1, p2, dx: float) -> HellingerResult:
    """Hellinger distance between two sampled probability densities.

    Also returns the Bhattacharyya coefficient ``f`` and the statistical
    length ``arccos(f)``.
    """
    p1, p2 = _check_distributions(p1, p2, dx)
    # divide out the quadrature norms so identical inputs give f = 1 exactly
    f = min(float(np.sum(np.sqrt(p1 * p2)) / math.sqrt(np.sum(p1) * np.sum(p2))), 1.0)
    return HellingerResult(math.sqrt(max(2.0 - 2.0 * f, 0.0)), f, math.acos(f))


def kl_divergence(p1, p2, dx: float) -> float:
    """Kullback-Leibler divergence ``D(p1 || p2)`` of sampled densities."""
    p1, p2 = _check_distributions(p1, p2, dx)
    support = p1 > 0.0
    if np.any(p2[support] == 0.0):
        return math.inf
    return float(np.sum(p1[support] * np.log(p1[support] / p2[support])) * dx)


@dataclass(frozen=True)
class TraceDistance:
    """Trace distance with its grid-refinement certificate.

    ``converged`` is ``None`` when no refinement was attempted.
    """

    value: float
    refined_value: Optional[float] = None
    converged: Optional[bool] = None

    @property
    def refinement_change(self) -> Optional[float]:
        if self.refined_value is None:
            return None
        return abs(self.refined_value - self.value)

    def __float__(self):
        return self.value


def _trace_norm_half(k1: DiscretizedKernel, k2: DiscretizedKernel) -> float:
    if not k1.same_grid(k2):
        raise GridError("kernels are sampled on different grids")
    diff = k1.scaled() - k2.scaled()
    try:
        lam = np.linalg.eigvalsh(diff)
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"eigensolver failed: {exc}") from exc
    mags = np.sort(np.abs(lam))[::-1]
    return min(0.5 * math.fsum(mags), 1.0)


def trace_distance(k1: DiscretizedKernel, k2: DiscretizedKernel, certify: bool = True) -> TraceDistance:
    """Half the trace norm of the difference of two sampled density matrices.

    With ``certify`` the pair is rebuilt on a grid of half the spacing and
    the result flagged unconverged if it moves by 1e-4 or more.
    """
    value = _trace_norm_half(k1, k2)
    if not certify or k1.rebuild is None or k2.rebuild is None:
        return TraceDistance(value)
    refined = _trace_norm_half(k1.refined(), k2.refined())
    return TraceDistance(value, refined, abs(refined - value) < REFINEMENT_TOL)


@dataclass(frozen=True)
class MetricReport:
    fidelity: float
    bures_angle: float
    bures_distance: float
    trace_distance: Optional[float] = None
    trace_converged: Optional[bool] = None
    normalization_of_each: tuple = tuple(ORTHOGONAL_DISTANCE.items())

    def normalized(self, metric: str) -> float:
        """Distance divided by its value on orthogonal states."""
        value = getattr(self, metric)
        if value is None:
            raise DomainError(f"{metric} not available")
        return value / ORTHOGONAL_DISTANCE[metric]


def metric_report(F: float, trace: Optional[TraceDistance] = None) -> MetricReport:
    F = _check_fidelity(F)
    td = None if trace is None else float(trace)
    if td is not None and not 0.0 <= td <= 1.0:
        raise DomainError(f"trace distance must lie in [0, 1], got {td!r}")
    return MetricReport(
        F,
        bures_angle(F),
        bures_distance(F),
        td,
        None if trace is None else trace.converged,
    )
