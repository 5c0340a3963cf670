import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import minimize_scalar

from conftest import FIG1, realize_qstar
from thermolength.bounds import (
    SERIES_COEFFICIENTS,
    BoundReport,
    classical_lower_bound,
    evaluate_bounds,
    lower_bounds,
    s_exact,
    s_series,
    sigma_exact,
    sigma_numeric,
    upper_bound_spectral,
    work_decomposition,
)
from thermolength.dynamics import OscillatorParams, Protocol, adiabaticity, integrate_trajectory, sudden_qstar
from thermolength.errors import DomainError
from thermolength.gaussian import (
    fock_populations,
    harmonic_eigenfunctions,
    kernel_equilibrium,
    kernel_nonequilibrium,
    kernel_pair,
    population_grid,
)


def _s_oracle(x):
    """Dense scan of the divergence over r, then bounded refinement."""

    def f(r):
        return (1 - r + x) * math.log1p(x / (1 - r)) + (r - x) * math.log1p(-x / r)

    r = np.linspace(x, 1.0, 1_000_001)[1:-1]
    vals = (1 - r + x) * np.log1p(x / (1 - r)) + (r - x) * np.log1p(-x / r)
    i = int(np.argmin(vals))
    res = minimize_scalar(f, bounds=(r[max(i - 1, 0)], r[min(i + 1, r.size - 1)]), method="bounded",
                          options={"xatol": 1e-14})
    return min(res.fun, vals[i])


# --------------------------------------------------------------------------
# s(x)


@pytest.mark.parametrize("x", [0.1, 0.5, 0.9])
def test_s_exact_matches_scan_oracle(x):
    assert s_exact(x) == pytest.approx(_s_oracle(x), abs=1e-12)


def test_s_exact_endpoints_and_domain():
    assert s_exact(0.0) == 0.0
    assert math.isinf(s_exact(1.0))
    for bad in (-1e-3, 1.5, math.nan):
        with pytest.raises(DomainError):
            s_exact(bad)


def test_s_exact_vectorized():
    xs = np.array([0.0, 0.2, 0.7])
    assert np.array_equal(s_exact(xs), np.array([s_exact(x) for x in xs]))


def test_s_exact_monotone_convex():
    x = np.linspace(0.0, 0.95, 10_000)
    s = s_exact(x)
    assert np.all(np.diff(s) > 0.0)
    assert np.all(np.diff(s, 2) > -1e-12)


def test_series_coefficients_high_precision():
    # small-x expansion of a 60-digit minimization recovers the x^4 and x^6 terms
    mp.mp.dps = 60

    def s_mp(x):
        f = lambda r: (1 - r + x) * mp.log(1 + x / (1 - r)) + (r - x) * mp.log(1 - x / r)
        return f(mp.findroot(lambda r: mp.diff(f, r), mp.mpf(1) / 2))

    x = mp.mpf("1e-4")
    c2 = (s_mp(x) - 2 * x ** 2) / x ** 4
    assert float(c2) == pytest.approx(SERIES_COEFFICIENTS[1], rel=1e-6)


def test_series_below_exact():
    x = np.linspace(0.0, 0.95, 10_000)
    assert np.all(s_series(x) <= s_exact(x) + 1e-15)
    for n in range(1, 6):
        assert np.all(s_series(x, n) <= s_series(x, 5) + 1e-15)


def test_series_leading_term():
    ratio = {x: (s_exact(x) - 2 * x * x) / x ** 4 for x in (1e-2, 1e-3)}
    assert abs(ratio[1e-2] - 4 / 9) < 1e-4
    assert abs(ratio[1e-3] - 4 / 9) < 1e-6
    assert abs(ratio[1e-3] - 4 / 9) < abs(ratio[1e-2] - 4 / 9)


def test_series_rejects_bad_order():
    with pytest.raises(DomainError):
        s_series(0.1, 0)
    with pytest.raises(DomainError):
        s_series(0.1, 6)


# --------------------------------------------------------------------------
# entropy production


def _sigma_from_sums(params, qstar, n_terms=4000):
    """beta (W - Delta F) with energies and partition functions by direct summation."""
    n = np.arange(n_terms)
    w0 = np.exp(-params.beta * params.hbar * params.omega0 * (n + 0.5))
    w1 = np.exp(-params.beta * params.hbar * params.omega1 * (n + 0.5))
    Z0, Z1 = math.fsum(w0), math.fsum(w1)
    p = w0 / Z0
    e0 = math.fsum(p * params.hbar * params.omega0 * (n + 0.5))
    # final mean energy: occupations stretched by Q*
    e1 = qstar * params.hbar * params.omega1 * math.fsum(p * (n + 0.5))
    return params.beta * (e1 - e0) + math.log(Z1 / Z0)


@pytest.mark.parametrize("qstar", [1.0, 1.3, 2.0, 5.0])
@pytest.mark.parametrize("beta", [0.3, 1.2, 7.0])
def test_sigma_exact_oracle(beta, qstar):
    params = OscillatorParams(beta, 0.9, 0.5)
    assert sigma_exact(params, qstar) == pytest.approx(_sigma_from_sums(params, qstar), rel=1e-10, abs=1e-13)
    assert work_decomposition(params, qstar).sigma == pytest.approx(sigma_exact(params, qstar), rel=1e-12, abs=1e-14)


def test_sigma_zero_at_adiabatic_identity():
    assert sigma_exact(OscillatorParams(1.0, 0.7, 0.7), 1.0) == pytest.approx(0.0, abs=1e-15)
    assert sigma_exact(OscillatorParams(1.0, 0.9, 0.5), 1.0) >= 0.0


def test_sigma_numeric_matches_closed_form(fig1_params):
    traj = integrate_trajectory(fig1_params, Protocol.sudden())
    k_ne, k_eq = kernel_pair(fig1_params, traj)
    rel = sigma_numeric(k_ne, k_eq, full_output=True)
    assert rel.value == pytest.approx(sigma_exact(fig1_params, sudden_qstar(fig1_params)), rel=1e-8)
    assert rel.excluded_mass < 1e-8


def test_sigma_numeric_klein():
    # relative entropy of two thermal states is nonnegative and zero on itself
    params = OscillatorParams(1.0, 0.9, 0.5)
    k = kernel_equilibrium(params, 0.5)
    assert sigma_numeric(k, k) == pytest.approx(0.0, abs=1e-10)


def test_sigma_numeric_grid_mismatch(fig1_params):
    k1 = kernel_equilibrium(fig1_params, 0.5)
    k2 = kernel_equilibrium(fig1_params, 0.9)
    if k1.same_grid(k2):
        pytest.skip("grids coincide")
    with pytest.raises(DomainError):
        sigma_numeric(k1, k2)


# --------------------------------------------------------------------------
# lower bounds


def test_lower_bounds_limits():
    same = lower_bounds(1.0)
    assert same.s_bures == 0.0 and same.leading_bures == 0.0 and same.bures_distance_sq == 0.0
    ortho = lower_bounds(0.0)
    assert math.isinf(ortho.s_bures)
    assert ortho.leading_bures == pytest.approx(2.0, rel=1e-15)
    assert ortho.bures_distance_sq == pytest.approx(2.0, rel=1e-15)
    assert "s_bures_saturated" in ortho.flags


def test_lower_bounds_trace_domain():
    with pytest.raises(DomainError):
        lower_bounds(0.5, trace_dist=1.2)
    assert lower_bounds(0.5, trace_dist=0.3).s_trace == pytest.approx(s_exact(0.3), rel=1e-15)


@settings(max_examples=200, deadline=None)
@given(st.floats(0.0, 1.0))
def test_lower_bound_ordering(F):
    low = lower_bounds(F)
    assert low.s_bures >= low.leading_bures - 1e-12


def test_classical_conventions():
    ell = 0.4
    qc = classical_lower_bound(ell)
    lit = classical_lower_bound(ell, "literal")
    assert qc.s_value == pytest.approx(s_exact(2 * ell / math.pi), rel=1e-15)
    assert lit.s_value == pytest.approx(s_exact(ell / (2 * math.pi)), rel=1e-15)
    assert qc.leading == pytest.approx(4 * lit.leading, rel=1e-15)
    assert qc.s_value > lit.s_value
    with pytest.raises(DomainError):
        classical_lower_bound(ell, "other")
    with pytest.raises(DomainError):
        classical_lower_bound(2.0)


@settings(max_examples=60, deadline=None)
@given(st.floats(0.05, 10.0), st.floats(0.2, 2.0), st.floats(0.2, 2.0), st.floats(1.0, 20.0))
def test_chain_random(beta, w0, w1, qstar):
    report = evaluate_bounds(OscillatorParams(beta, w0, w1), qstar)
    assert report.violations() == []


# --------------------------------------------------------------------------
# upper bound


def test_upper_geometric_vs_partial_sum():
    params = OscillatorParams(**FIG1)
    n = np.arange(10_000)
    a, b = params.beta * params.energy0, params.beta * params.energy1
    # p_n^2 / q_n in log space; p and q individually underflow long before n = 10^4
    log_terms = 2 * (math.log(-math.expm1(-a)) - a * n) - (math.log(-math.expm1(-b)) - b * n)
    assert upper_bound_spectral(params) == pytest.approx(math.fsum(np.exp(log_terms)) - 1.0, abs=1e-10)


@pytest.mark.parametrize("w1", [1.8, 2.5])
def test_upper_diverges(w1):
    res = upper_bound_spectral(OscillatorParams(1.0, 0.9, w1), full_output=True)
    assert math.isinf(res.value) and res.diverged


def test_upper_zero_without_change():
    assert upper_bound_spectral(OscillatorParams(1.0, 0.9, 0.9)) == pytest.approx(0.0, abs=1e-15)


def test_upper_mode_errors():
    params = OscillatorParams(**FIG1)
    with pytest.raises(DomainError):
        upper_bound_spectral(params, "population")
    with pytest.raises(DomainError):
        upper_bound_spectral(params, "other")
    with pytest.raises(DomainError):
        upper_bound_spectral(params, "population", [0.9, 0.5])


def test_population_mode_thermal_reproduces_eigenvalue_mode():
    # occupations of an undriven thermal state are its eigenvalues
    params = OscillatorParams(1.2, 0.9, 0.7)
    n = np.arange(80)
    a = params.beta * params.energy0
    p = -math.expm1(-a) * np.exp(-a * n)
    p = p[p > 1e-11]
    got = upper_bound_spectral(params, "population", p)
    assert got == pytest.approx(upper_bound_spectral(params), rel=1e-8)


def _driven_fock(params, traj, n_max=40):
    grid = population_grid(params, params.omega1, n_max)
    k = kernel_nonequilibrium(params, traj, grid)
    return k, fock_populations(k, params, params.omega1, n_max)


def test_population_mode_fig1_sudden_report(fig1_params):
    traj = integrate_trajectory(fig1_params, Protocol.sudden())
    _, pops = _driven_fock(fig1_params, traj)
    qstar = adiabaticity(fig1_params, traj)
    report = evaluate_bounds(fig1_params, qstar, populations=pops, upper=True)
    sig = sigma_exact(fig1_params, qstar)
    # both readings fall below sigma here; the report must say so
    assert report.upper_population < sig and report.upper_eigenvalue < sig
    labels = " ".join(report.violations())
    assert "upper_population" in labels and "upper_eigenvalue" in labels


def test_intermediate_bound_holds(fig1_params):
    # tr(rho^2 sigma^-1) - 1 >= D(rho||sigma) for every state
    traj = integrate_trajectory(fig1_params, Protocol.sudden())
    k, pops = _driven_fock(fig1_params, traj)
    w1 = fig1_params.omega1
    phi = harmonic_eigenfunctions(k.grid, fig1_params, w1, 40)
    rho = k.dx ** 2 * phi @ k.matrix @ phi.T
    b = fig1_params.beta * fig1_params.energy1
    q = -math.expm1(-b) * np.exp(-b * np.arange(41))
    chi2 = float(np.sum(np.abs(rho) ** 2 / q[:, None])) - 1.0
    sig = sigma_exact(fig1_params, adiabaticity(fig1_params, traj))
    assert chi2 >= sig
    # population reading is a lower estimate of it
    assert upper_bound_spectral(fig1_params, "population", pops) <= chi2


def test_bound_report_consistent_for_realized_state(fig1_params):
    traj = realize_qstar(fig1_params, 2.0)
    report = evaluate_bounds(fig1_params, 2.0)
    assert isinstance(report, BoundReport)
    assert report.sigma_exact == pytest.approx(sigma_exact(fig1_params, adiabaticity(fig1_params, traj)), rel=1e-8)
    assert report.violations() == []
