"""Gaussian states of the oscillator: moments, fidelity and position kernels."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np
from scipy.special import erfc

from . import _hyperbolic as hyp
from .dynamics import OscillatorParams, Trajectory, check_qstar
from .errors import DomainError, GridError, InvalidStateError, NumericError, ResolutionError

__all__ = [
    "GaussianState",
    "GridSpec",
    "DiscretizedKernel",
    "equilibrium_state",
    "nonequilibrium_state",
    "gaussian_fidelity",
    "closed_form_fidelity",
    "kernel_equilibrium",
    "kernel_nonequilibrium",
    "kernel_pair",
    "fock_populations",
    "harmonic_eigenfunctions",
    "resolvable_levels",
    "population_grid",
]

HEISENBERG_RTOL = 1e-10
DET_RTOL = 1e-9
FIDELITY_SLACK = 1e-10
TAIL_MASS_MAX = 1e-8
EIGENFUNCTION_NORM_TOL = 1e-6


@dataclass(frozen=True)
class GaussianState:
    """Single-mode Gaussian state given by its first and second moments.

    ``cov_xp`` is the symmetrised covariance ``<xp+px>/2 - <x><p>``.
    """

    mean_x: float
    mean_p: float
    var_xx: float
    var_pp: float
    cov_xp: float
    hbar: float = 1.0

    def __post_init__(self):
        if not (self.var_xx > 0.0 and self.var_pp > 0.0):
            raise InvalidStateError(f"variances must be positive, got {self.var_xx!r}, {self.var_pp!r}")
        det = self.var_xx * self.var_pp - self.cov_xp ** 2
        bound = 0.25 * self.hbar ** 2
        if det < bound * (1.0 - HEISENBERG_RTOL):
            raise InvalidStateError(f"uncertainty relation violated: det = {det!r} < hbar^2/4 = {bound!r}")

    def covariance_matrix(self) -> np.ndarray:
        """Dimensionless matrix with unit determinant for pure states."""
        h = self.hbar
        axp = 2.0 * self.cov_xp / h
        return np.array([[2.0 * self.var_xx, axp], [axp, 2.0 * self.var_pp / h ** 2]])

    @property
    def purity(self) -> float:
        return 1.0 / math.sqrt(float(np.linalg.det(self.covariance_matrix())))


def equilibrium_state(params: OscillatorParams, omega: float) -> GaussianState:
    """Thermal state of the oscillator at frequency ``omega``."""
    if not omega > 0.0:
        raise DomainError(f"omega must be > 0, got {omega!r}")
    h, m = params.hbar, params.mass
    ct = float(hyp.coth(params.half_arg(omega)))
    return GaussianState(0.0, 0.0, h / (2.0 * m * omega) * ct, h * omega * m / 2.0 * ct, 0.0, h)


def _endpoint_moments(params: OscillatorParams, traj: Trajectory):
    """Squeeze factors at tau, rescaled so the transfer matrix has unit determinant."""
    X, Xd, Y, Yd = traj.final
    w0 = params.omega0
    wr = Xd * Y - X * Yd
    s_x = (Y * Y + w0 * w0 * X * X) / wr
    s_p = (Yd * Yd + w0 * w0 * Xd * Xd) / wr
    s_xp = (Y * Yd + w0 * w0 * X * Xd) / wr
    return s_x, s_p, s_xp


def nonequilibrium_state(params: OscillatorParams, traj: Trajectory) -> GaussianState:
    """State reached by unitary driving of the initial thermal state."""
    h, m, w0 = params.hbar, params.mass, params.omega0
    ct = float(hyp.coth(params.half_arg(w0)))
    s_x, s_p, s_xp = _endpoint_moments(params, traj)
    return GaussianState(
        0.0,
        0.0,
        h / (2.0 * m * w0) * s_x * ct,
        h * m / (2.0 * w0) * s_p * ct,
        h / (2.0 * w0) * s_xp * ct,
        h,
    )


def _fidelity_from_determinants(big_delta, small_delta):
    # 2/(sqrt(D+d) - sqrt(d)) rationalised; avoids cancellation when d >> 1
    return 2.0 * (np.sqrt(big_delta + small_delta) + np.sqrt(small_delta)) / big_delta


def _clamp_fidelity(f: float) -> float:
    if not math.isfinite(f) or f < -FIDELITY_SLACK or f > 1.0 + FIDELITY_SLACK:
        raise NumericError(f"fidelity {f!r} outside [0, 1]")
    return min(max(f, 0.0), 1.0)


def gaussian_fidelity(s1: GaussianState, s2: GaussianState) -> float:
    """Fidelity of two non-displaced single-mode Gaussian states.

    Parameters
    ----------
    s1, s2 : GaussianState
        States with vanishing first moments and equal ``hbar``.

    Returns
    -------
    float
        ``F = 2 / (sqrt(Delta + delta) - sqrt(delta))`` with
        ``Delta = det(A1 + A2)`` and ``delta = (det A1 - 1)(det A2 - 1)``,
        in the squared (overlap ``|<psi1|psi2>|**2``) convention.

    Raises
    ------
    InvalidStateError
        If a covariance matrix has ``det A < 1 - 1e-9``.
    """
    for s in (s1, s2):
        if s.mean_x != 0.0 or s.mean_p != 0.0:
            raise DomainError("displaced Gaussian states are not supported")
    if s1.hbar != s2.hbar:
        raise DomainError("states use different hbar")
    a1, a2 = s1.covariance_matrix(), s2.covariance_matrix()
    d1, d2 = _det2(a1), _det2(a2)
    for d in (d1, d2):
        if d < 1.0 - DET_RTOL:
            raise InvalidStateError(f"unphysical covariance matrix, det A = {d!r} < 1")
    small = max(d1 - 1.0, 0.0) * max(d2 - 1.0, 0.0)
    return _clamp_fidelity(float(_fidelity_from_determinants(_det2(a1 + a2), small)))


def _det2(a: np.ndarray) -> float:
    return float(a[0, 0] * a[1, 1] - a[0, 1] * a[1, 0])


def closed_form_fidelity(params: OscillatorParams, qstar: float) -> float:
    """Fidelity between the driven state and the final thermal state as a function of Q*."""
    qstar = check_qstar(qstar)
    z0, z1 = params.half_arg(params.omega0), params.half_arg(params.omega1)
    ct0, ct1 = float(hyp.coth(z0)), float(hyp.coth(z1))
    c0, c1 = float(hyp.csch(z0)), float(hyp.csch(z1))
    big = ct0 * ct0 + ct1 * ct1 + 2.0 * qstar * ct0 * ct1
    return _clamp_fidelity(float(_fidelity_from_determinants(big, (c0 * c1) ** 2)))


# --------------------------------------------------------------------------
# position-space kernels


@dataclass(frozen=True)
class GridSpec:
    """Equally spaced position grid ``[-L, L]`` with ``n_points`` nodes.

    ``L`` is ``half_width`` when given, else ``half_width_mult`` times the
    largest position standard deviation among the states sampled on it.
    """

    n_points: int = 601
    half_width_mult: float = 8.0
    half_width: Optional[float] = None

    def __post_init__(self):
        if int(self.n_points) != self.n_points or self.n_points < 64:
            raise GridError(f"n_points must be an integer >= 64, got {self.n_points!r}")
        if not self.half_width_mult > 0.0:
            raise GridError(f"half_width_mult must be > 0, got {self.half_width_mult!r}")
        if self.half_width is not None and not self.half_width > 0.0:
            raise GridError(f"half_width must be > 0, got {self.half_width!r}")

    def resolve(self, *states: GaussianState) -> "GridSpec":
        """Fix ``half_width`` from the widest of ``states`` (no-op if already set)."""
        if self.half_width is not None:
            return self
        width = max(math.sqrt(s.var_xx) for s in states)
        return replace(self, half_width=self.half_width_mult * width)

    def refined(self) -> "GridSpec":
        """Same interval, half the spacing."""
        if self.half_width is None:
            raise GridError("refine a resolved grid")
        return replace(self, n_points=2 * self.n_points - 1)

    def nodes(self):
        x = np.linspace(-self.half_width, self.half_width, int(self.n_points))
        return x, x[1] - x[0]


@dataclass(frozen=True)
class DiscretizedKernel:
    """Density matrix ``K[i, j] = rho(x_i, x_j)`` sampled on a grid.

    ``dx * matrix`` is the discrete density matrix; it is trace-normalised at
    construction and ``raw_trace`` records the quadrature trace before that.
    ``rebuild`` reconstructs the same operator on another resolved grid.
    """

    grid: np.ndarray
    dx: float
    matrix: np.ndarray
    spec: GridSpec
    raw_trace: float = 1.0
    rebuild: Optional[Callable[[GridSpec], "DiscretizedKernel"]] = field(default=None, repr=False, compare=False)

    def scaled(self) -> np.ndarray:
        return self.dx * self.matrix

    def trace(self) -> float:
        return float(np.real(np.trace(self.matrix))) * self.dx

    def same_grid(self, other: "DiscretizedKernel") -> bool:
        return self.grid.shape == other.grid.shape and np.array_equal(self.grid, other.grid)

    def refined(self) -> "DiscretizedKernel":
        if self.rebuild is None:
            raise GridError("kernel has no rebuild recipe")
        return self.rebuild(self.spec.refined())


def _check_coverage(spec: GridSpec, var_xx: float) -> None:
    tail = float(erfc(spec.half_width / math.sqrt(2.0 * var_xx)))
    if tail > TAIL_MASS_MAX:
        raise GridError(
            f"grid half-width {spec.half_width:.4g} leaves probability {tail:.2e} outside "
            f"(position sd {math.sqrt(var_xx):.4g})"
        )


def _thermal_kernel(params, omega, spec, squeeze=1.0, phase=0.0):
    """Mehler kernel at frequency ``omega``; ``squeeze`` stretches it in x and
    ``phase`` multiplies the chirp ``exp(i*phase*(x**2 - y**2))``."""
    x, dx = spec.nodes()
    h, m = params.hbar, params.mass
    z = params.half_arg(omega)
    a = m * omega / (2.0 * h * squeeze)
    ct2, th = float(hyp.coth(2.0 * z)), float(np.tanh(z))
    # coth(2z)(x^2+y^2) - 2 csch(2z) xy, regrouped to avoid cancellation when hot
    xx, yy = x[:, None], x[None, :]
    expo = -a * (ct2 * (xx - yy) ** 2 + 2.0 * th * xx * yy)
    norm = math.sqrt(m * omega * th / (math.pi * h * squeeze))
    if phase:
        k = norm * np.exp(expo + 1j * phase * (xx * xx - yy * yy))
    else:
        k = norm * np.exp(expo)
    raw = float(np.real(np.trace(k))) * dx
    if not (raw > 0.0 and math.isfinite(raw)):
        raise NumericError(f"kernel quadrature trace is {raw!r}")
    k = k / raw
    k.flags.writeable = False
    return x, dx, k, raw


def kernel_equilibrium(params: OscillatorParams, omega: float, grid: GridSpec = GridSpec()) -> DiscretizedKernel:
    """Thermal density matrix at frequency ``omega`` on a position grid."""
    state = equilibrium_state(params, omega)
    spec = grid.resolve(state)
    _check_coverage(spec, state.var_xx)
    x, dx, k, raw = _thermal_kernel(params, omega, spec)
    return DiscretizedKernel(x, dx, k, spec, raw, lambda g: kernel_equilibrium(params, omega, g))


def kernel_nonequilibrium(params: OscillatorParams, traj: Trajectory, grid: GridSpec = GridSpec()) -> DiscretizedKernel:
    """Density matrix of the driven state at the end of the protocol.

    The thermal kernel at ``omega0`` is stretched by the squeeze factor
    ``Y**2 + omega0**2 X**2`` and acquires the chirp whose coefficient
    reproduces ``<xp+px> = M d<x^2>/dt``.
    """
    state = nonequilibrium_state(params, traj)
    spec = grid.resolve(state)
    _check_coverage(spec, state.var_xx)
    s_x, _, s_xp = _endpoint_moments(params, traj)
    chirp = params.mass * s_xp / (2.0 * params.hbar * s_x)
    x, dx, k, raw = _thermal_kernel(params, params.omega0, spec, squeeze=s_x, phase=chirp)
    return DiscretizedKernel(x, dx, k, spec, raw, lambda g: kernel_nonequilibrium(params, traj, g))


def kernel_pair(params: OscillatorParams, traj: Trajectory, grid: GridSpec = GridSpec()):
    """Driven and final-equilibrium kernels on one shared grid."""
    spec = grid.resolve(nonequilibrium_state(params, traj), equilibrium_state(params, params.omega1))
    return kernel_nonequilibrium(params, traj, spec), kernel_equilibrium(params, params.omega1, spec)


def harmonic_eigenfunctions(x: np.ndarray, params: OscillatorParams, omega: float, n_max: int) -> np.ndarray:
    """Oscillator eigenfunctions ``phi_0 .. phi_{n_max}`` sampled at ``x``.

    Uses the normalised three-term recurrence, which stays bounded where the
    explicit Hermite polynomials would overflow.
    """
    xi = x * math.sqrt(params.mass * omega / params.hbar)
    phi = np.zeros((n_max + 1, x.size))
    phi[0] = (params.mass * omega / (math.pi * params.hbar)) ** 0.25 * np.exp(-0.5 * xi * xi)
    if n_max >= 1:
        phi[1] = math.sqrt(2.0) * xi * phi[0]
    for n in range(1, n_max):
        phi[n + 1] = math.sqrt(2.0 / (n + 1)) * xi * phi[n] - math.sqrt(n / (n + 1)) * phi[n - 1]
    return phi


def fock_populations(kernel: DiscretizedKernel, params: OscillatorParams, omega: float, n_max: int) -> np.ndarray:
    """Occupation probabilities ``<n|rho|n>`` in the eigenbasis at frequency ``omega``.

    Raises
    ------
    ResolutionError
        If the grid has fewer than ``6 * n_max`` points or any eigenfunction
        integrates to a norm off by more than 1e-6.
    """
    if not 0 <= n_max <= 200:
        raise DomainError(f"n_max must lie in [0, 200], got {n_max!r}")
    if kernel.grid.size < 6 * n_max:
        raise ResolutionError(f"{kernel.grid.size} grid points cannot resolve level {n_max}")
    phi = harmonic_eigenfunctions(kernel.grid, params, omega, n_max)
    norms = kernel.dx * np.einsum("ni,ni->n", phi, phi)
    bad = np.flatnonzero(np.abs(norms - 1.0) > EIGENFUNCTION_NORM_TOL)
    if bad.size:
        raise ResolutionError(f"eigenfunction {bad[0]} has quadrature norm {norms[bad[0]]!r}")
    pops = kernel.dx ** 2 * np.real(np.sum((phi @ kernel.matrix) * phi, axis=1))
    if np.any(pops < -1e-10):
        raise NumericError(f"negative population {pops.min()!r}")
    pops = np.clip(pops, 0.0, 1.0)
    if pops.sum() > 1.0 + 1e-8:
        raise NumericError(f"populations sum to {pops.sum()!r} > 1")
    return pops


def resolvable_levels(kernel: DiscretizedKernel, params: OscillatorParams, omega: float, n_cap: int = 200) -> int:
    """Largest ``n_max <= n_cap`` that :func:`fock_populations` accepts on this grid."""
    n_cap = min(n_cap, kernel.grid.size // 6)
    phi = harmonic_eigenfunctions(kernel.grid, params, omega, n_cap)
    norms = kernel.dx * np.einsum("ni,ni->n", phi, phi)
    bad = np.flatnonzero(np.abs(norms - 1.0) > EIGENFUNCTION_NORM_TOL)
    return int(bad[0]) - 1 if bad.size else n_cap


def population_grid(params: OscillatorParams, omega: float, n_max: int, grid: GridSpec = GridSpec()) -> GridSpec:
    """Grid wide and fine enough to resolve eigenfunctions up to ``n_max`` at ``omega``."""
    length = math.sqrt(params.hbar / (params.mass * omega))
    half = (math.sqrt(2.0 * n_max + 1.0) + 7.0) * length
    if grid.half_width is not None:
        half = max(half, grid.half_width)
    # ~30 nodes per shortest de Broglie wavelength at the classical centre
    spacing = 2.0 * math.pi * length / math.sqrt(2.0 * n_max + 1.0) / 30.0
    n_points = max(grid.n_points, 6 * n_max + 1, int(math.ceil(2.0 * half / spacing)) + 1)
    return replace(grid, n_points=n_points, half_width=half)
