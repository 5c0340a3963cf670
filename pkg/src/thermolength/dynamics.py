"""Driving protocols, the auxiliary classical oscillator and Husimi's Q*.

The Riccati equation for the Gaussian-wavefunction width is mapped onto the
force-free classical oscillator ``x'' + omega_t**2 x = 0``.  Its two
fundamental solutions ``X`` (X0=0, X'0=1) and ``Y`` (Y0=1, Y'0=0) determine
every quantity downstream: moments, kernels and the adiabaticity parameter.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Tuple

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import PchipInterpolator

from . import _hyperbolic as hyp
from .errors import DomainError, IntegrationError, InvalidParamsError, InvalidProtocolError

__all__ = [
    "OscillatorParams",
    "Protocol",
    "Trajectory",
    "integrate_trajectory",
    "adiabaticity",
    "sudden_qstar",
    "mean_energy_initial",
    "mean_energy_final",
    "ground_state_persistence",
    "check_qstar",
]

PROTOCOL_KINDS = ("sudden", "linear", "smoothstep", "tabulated")
DEFAULT_TOL = 1e-10
WRONSKIAN_TOL = 1e-9
QSTAR_SLACK = 1e-9
_ENDPOINT_RTOL = 1e-12


@dataclass(frozen=True)
class OscillatorParams:
    """Physical constants of the parametric oscillator.

    Parameters
    ----------
    beta : float
        Inverse temperature of the initial thermal state.
    omega0, omega1 : float
        Angular frequency at the start and at the end of the drive.
    hbar, mass : float
        Action quantum and oscillator mass (both default to 1).
    """

    beta: float
    omega0: float
    omega1: float
    hbar: float = 1.0
    mass: float = 1.0

    def __post_init__(self):
        for name in ("beta", "omega0", "omega1", "hbar", "mass"):
            value = getattr(self, name)
            try:
                value = float(value)
            except (TypeError, ValueError):
                raise InvalidParamsError(f"{name} must be a number, got {value!r}") from None
            if not math.isfinite(value) or value <= 0.0:
                raise InvalidParamsError(f"{name} must be finite and > 0, got {value!r}")
            object.__setattr__(self, name, value)

    @property
    def energy0(self) -> float:
        return self.hbar * self.omega0

    @property
    def energy1(self) -> float:
        return self.hbar * self.omega1

    def half_arg(self, omega: float) -> float:
        """beta*hbar*omega/2, the argument of every thermal hyperbolic function."""
        return 0.5 * self.beta * self.hbar * omega

    def with_omega1(self, omega1: float) -> "OscillatorParams":
        return OscillatorParams(self.beta, self.omega0, omega1, self.hbar, self.mass)


@dataclass(frozen=True)
class Protocol:
    """Frequency schedule on ``[0, tau]``.

    ``linear`` and ``smoothstep`` interpolate between the endpoint frequencies
    of the :class:`OscillatorParams` they are evaluated with.  ``tabulated``
    carries its own ``(t, omega)`` samples, joined by a monotone cubic
    (``interpolation="pchip"``) or piecewise-linear interpolant.
    A ``sudden`` protocol jumps to ``omega1`` at ``t = 0+`` and has ``tau = 0``.
    """

    kind: str
    tau: float = 0.0
    table: Optional[Tuple[Tuple[float, float], ...]] = None
    interpolation: str = "pchip"

    def __post_init__(self):
        if self.kind not in PROTOCOL_KINDS:
            raise InvalidProtocolError(f"unknown protocol kind {self.kind!r}; expected one of {PROTOCOL_KINDS}")
        if self.interpolation not in ("pchip", "linear"):
            raise InvalidProtocolError(f"unknown interpolation {self.interpolation!r}")
        tau = float(self.tau)
        if not math.isfinite(tau) or tau < 0.0:
            raise InvalidProtocolError(f"tau must be finite and >= 0, got {self.tau!r}")
        object.__setattr__(self, "tau", tau)
        if self.kind == "sudden" and tau != 0.0:
            raise InvalidProtocolError("a sudden protocol has tau = 0")
        if self.kind == "tabulated":
            if self.table is None or len(self.table) < 2:
                raise InvalidProtocolError("a tabulated protocol needs at least two (t, omega) samples")
            table = tuple((float(t), float(w)) for t, w in self.table)
            times = np.array([t for t, _ in table])
            omegas = np.array([w for _, w in table])
            if not (np.all(np.isfinite(times)) and np.all(np.isfinite(omegas))):
                raise InvalidProtocolError("tabulated protocol contains non-finite samples")
            if np.any(np.diff(times) <= 0.0):
                raise InvalidProtocolError("tabulated times must be strictly increasing")
            if np.any(omegas <= 0.0):
                raise InvalidProtocolError("tabulated frequencies must be strictly positive")
            if times[0] != 0.0:
                raise InvalidProtocolError("tabulated protocol must start at t = 0")
            object.__setattr__(self, "table", table)
            object.__setattr__(self, "tau", float(times[-1]))
        elif self.table is not None:
            raise InvalidProtocolError(f"protocol kind {self.kind!r} takes no table")

    @classmethod
    def sudden(cls) -> "Protocol":
        return cls("sudden", 0.0)

    @classmethod
    def linear(cls, tau: float) -> "Protocol":
        return cls("linear", tau)

    @classmethod
    def smoothstep(cls, tau: float) -> "Protocol":
        return cls("smoothstep", tau)

    @classmethod
    def tabulated(cls, times: Sequence[float], omegas: Sequence[float], interpolation: str = "pchip") -> "Protocol":
        return cls("tabulated", float(times[-1]), tuple(zip(times, omegas)), interpolation)

    @property
    def is_instantaneous(self) -> bool:
        return self.tau == 0.0

    def validate(self, params: OscillatorParams) -> None:
        """Check that the schedule starts at ``omega0`` and ends at ``omega1``."""
        if self.kind != "tabulated":
            return
        w_start, w_end = self.table[0][1], self.table[-1][1]
        for label, got, want in (("omega(0)", w_start, params.omega0), ("omega(tau)", w_end, params.omega1)):
            if abs(got - want) > _ENDPOINT_RTOL * want:
                raise InvalidProtocolError(f"{label} = {got!r} does not match {want!r}")

    def schedule(self, params: OscillatorParams) -> Callable[[float], float]:
        """Return the frequency ``omega(t)`` as a vectorised callable."""
        w0, w1, tau = params.omega0, params.omega1, self.tau
        if self.kind == "sudden" or tau == 0.0:
            return lambda t: np.where(np.asarray(t) > 0.0, w1, w0) * 1.0
        if self.kind == "linear":
            return lambda t: w0 + (w1 - w0) * (np.asarray(t) / tau)
        if self.kind == "smoothstep":
            def smoothstep(t):
                s = np.clip(np.asarray(t) / tau, 0.0, 1.0)
                return w0 + (w1 - w0) * s * s * (3.0 - 2.0 * s)
            return smoothstep
        times = np.array([t for t, _ in self.table])
        omegas = np.array([w for _, w in self.table])
        if self.interpolation == "linear":
            return lambda t: np.interp(t, times, omegas)
        return PchipInterpolator(times, omegas)


@dataclass(frozen=True)
class Trajectory:
    """Samples of the fundamental solutions ``X`` and ``Y`` on ``[0, tau]``.

    ``omega`` holds the driving frequency at each sample.
    """

    times: np.ndarray
    X: np.ndarray
    Xdot: np.ndarray
    Y: np.ndarray
    Ydot: np.ndarray
    omega: np.ndarray = field(repr=False)

    @property
    def tau(self) -> float:
        return float(self.times[-1])

    @property
    def final(self) -> Tuple[float, float, float, float]:
        """``(X, X', Y, Y')`` at the end of the drive."""
        return float(self.X[-1]), float(self.Xdot[-1]), float(self.Y[-1]), float(self.Ydot[-1])

    def wronskian(self) -> np.ndarray:
        return self.Xdot * self.Y - self.X * self.Ydot

    def wronskian_error(self) -> float:
        return float(np.max(np.abs(self.wronskian() - 1.0)))

    def qstar_profile(self, params: OscillatorParams) -> np.ndarray:
        """Q*(t) with ``omega1`` replaced by the instantaneous ``omega_t``.

        Only the last entry is Q* proper; earlier values are an extension of
        the same formula used for plotting.
        """
        return _qstar_formula(params.omega0, self.omega, self.X, self.Xdot, self.Y, self.Ydot)


def _qstar_formula(w0, w1, X, Xd, Y, Yd):
    w1_sq = w1 * w1
    return (w0 * w0 * (w1_sq * X * X + Xd * Xd) + (w1_sq * Y * Y + Yd * Yd)) / (2.0 * w0 * w1)


def _instantaneous_trajectory(params: OscillatorParams) -> Trajectory:
    one = np.ones(1)
    zero = np.zeros(1)
    return Trajectory(zero.copy(), zero.copy(), one.copy(), one.copy(), zero.copy(), np.full(1, params.omega1))


def integrate_trajectory(params: OscillatorParams, protocol: Protocol, tol: float = DEFAULT_TOL) -> Trajectory:
    """Integrate ``X'' + omega_t**2 X = 0`` for both fundamental solutions.

    Uses an adaptive Dormand-Prince 8(5,3) scheme on the first-order system
    ``(X, X', Y, Y')``.  If the Wronskian ``X'Y - XY'`` drifts from one by more
    than 1e-9 the integration is repeated with a tighter tolerance.

    Parameters
    ----------
    params : OscillatorParams
    protocol : Protocol
    tol : float
        Relative tolerance of the integrator, in ``(1e-14, 1e-3)``.

    Returns
    -------
    Trajectory
        Samples at the accepted integrator steps, endpoints included.
    """
    if not 1e-14 < tol < 1e-3:
        raise DomainError(f"tol must lie in (1e-14, 1e-3), got {tol!r}")
    protocol.validate(params)
    if protocol.is_instantaneous:
        return _instantaneous_trajectory(params)

    omega = protocol.schedule(params)
    probe = np.asarray(omega(np.linspace(0.0, protocol.tau, 257)), dtype=float)
    if not np.all(np.isfinite(probe)) or np.any(probe <= 0.0):
        raise InvalidProtocolError("protocol produces non-finite or non-positive frequencies")

    def rhs(t, y):
        w = float(omega(t))
        if not math.isfinite(w):
            raise InvalidProtocolError(f"non-finite frequency at t = {t!r}")
        w2 = w * w
        return np.array([y[1], -w2 * y[0], y[3], -w2 * y[2]])

    y0 = np.array([0.0, 1.0, 1.0, 0.0])
    rtol = tol
    for _ in range(4):
        sol = solve_ivp(rhs, (0.0, protocol.tau), y0, method="DOP853", rtol=rtol, atol=rtol * 1e-2)
        if sol.status != 0:
            raise IntegrationError(f"integration failed: {sol.message}")
        X, Xd, Y, Yd = sol.y
        traj = Trajectory(sol.t, X, Xd, Y, Yd, np.asarray(omega(sol.t), dtype=float))
        if traj.wronskian_error() < WRONSKIAN_TOL:
            return traj
        if rtol <= 1e-13:
            break
        rtol = max(rtol * 0.01, 1e-13)
    raise IntegrationError(
        f"Wronskian drift {traj.wronskian_error():.3e} exceeds {WRONSKIAN_TOL:g} even at rtol={rtol:g}"
    )


def check_qstar(qstar: float) -> float:
    qstar = float(qstar)
    if not math.isfinite(qstar) or qstar < 1.0 - QSTAR_SLACK:
        raise DomainError(f"Q* must be >= 1, got {qstar!r}")
    return qstar


def adiabaticity(params: OscillatorParams, traj: Trajectory) -> float:
    """Husimi's adiabaticity parameter Q* from the trajectory endpoint."""
    if abs(traj.wronskian()[-1] - 1.0) > WRONSKIAN_TOL:
        raise DomainError("trajectory violates the Wronskian identity X'Y - XY' = 1")
    X, Xd, Y, Yd = traj.final
    return float(_qstar_formula(params.omega0, params.omega1, X, Xd, Y, Yd))


def sudden_qstar(params: OscillatorParams) -> float:
    w0, w1 = params.omega0, params.omega1
    return (w0 * w0 + w1 * w1) / (2.0 * w0 * w1)


def mean_energy_initial(params: OscillatorParams) -> float:
    return 0.5 * params.energy0 * float(hyp.coth(params.half_arg(params.omega0)))


def mean_energy_final(params: OscillatorParams, qstar: float) -> float:
    """Mean energy after the drive, linear in Q*."""
    qstar = check_qstar(qstar)
    return 0.5 * params.energy1 * qstar * float(hyp.coth(params.half_arg(params.omega0)))


def ground_state_persistence(qstar: float) -> float:
    """Probability to start and end in the instantaneous ground state."""
    qstar = check_qstar(qstar)
    return math.sqrt(2.0 / (1.0 + qstar))
