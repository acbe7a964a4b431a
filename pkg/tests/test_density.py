"""Tests for the distribution layer.

Closed-form values are pinned against mpmath (Bessel products, the
scaled Hartman-Watson kernel) computed at dps=30 and frozen below.
Distributional claims are checked two ways: quadrature of the density
against exact normalization/marginals, and KS distance against the
exact path simulator at sample sizes where the gates sit several sigma
away from the expected statistic.  The general-drift density gets three
independent routes (substitution quadrature, unconditional tilt
average, endpoint-conditional reweighting) that must not be collapsed:
their disagreement pattern is itself under test.
"""

import io
import math

import numpy as np
import pytest

from verhulst.density import (
    DensityCurve,
    MyorEval,
    curve_exact_half,
    curve_exp_time,
    curve_general_mc,
    curve_lognormal,
    density_exact_half,
    density_exp_time,
    density_exp_time_mixture,
    density_general_both,
    density_general_mc,
    density_general_quad,
    exp_time_total_mass,
    h_kernel,
    lognormal_density,
    moment_exp_int_theta,
    myor_conditional_laplace,
    myor_psi,
    myor_psi_profile,
    variants_disagree,
    write_density_csv,
)
from verhulst.errors import DomainError
from verhulst.simulate import (
    ModelParams,
    TimeGrid,
    simulate_exp_terminal,
    simulate_terminal_batch,
)
from verhulst.specfun import DEFAULT_QUAD, _panels

# Frozen from mpmath at dps=30: 2 lam e^{x-z} sqrt(x/z^3) I_nu(min) K_nu(max),
# nu = sqrt(2 lam + 1/4).
P_EXP_1_1_2 = 0.013736729166550635
P_EXP_1_HALF_HALF = 0.63395044561728636

# Frozen from mpmath quadrature of the scaled kernel (dps=30):
# psi(mu=0, t=1, v=1, x=0) = e^{-8}/2 * e^{4} Theta(4, 1/4).
PSI_0_1_1_0 = 0.54938143689263459
# Conditional Laplace transform at (mu=0, t=1, v=1, x=0, lam=1).
COND_0_1_1_0_1 = 0.58677258519288161
# h_kernel(1, 0, 1, 1, 1) = e^{1/2} * the value above.
H_1_0_1_1_1 = 0.96742444227120696


def ks_stat(samples, cdf_vals):
    """Sup distance between the empirical CDF of sorted samples and the
    exact CDF evaluated at them."""
    n = len(samples)
    hi = np.arange(1, n + 1) / n - cdf_vals
    lo = cdf_vals - np.arange(0, n) / n
    return float(max(hi.max(), lo.max()))


def curve_cdf(curve, points):
    return np.interp(points, curve.abscissae, curve.cumulative())


def gl_mass(fn, breaks):
    """Composite 16-node Gauss-Legendre integral of fn over log-spaced
    panel breaks (fn takes the untransformed variable)."""
    u, w = _panels(np.asarray(breaks, dtype=float))
    z = np.exp(u)
    return float(np.sum(w * z * np.array([fn(zi) for zi in z])))


# --- DensityCurve ------------------------------------------------------------


def test_curve_validation():
    with pytest.raises(DomainError):
        DensityCurve(np.array([1.0, 2.0]), np.array([1.0]))
    with pytest.raises(DomainError):
        DensityCurve(np.array([2.0, 1.0]), np.array([1.0, 1.0]))
    with pytest.raises(DomainError):
        DensityCurve(np.array([-1.0, 1.0]), np.array([1.0, 1.0]))
    with pytest.raises(DomainError):
        DensityCurve(np.array([1.0, 2.0]), np.array([1.0, -0.5]))
    with pytest.raises(DomainError):
        DensityCurve(np.array([1.0, 2.0]), np.array([1.0, math.nan]))


def test_curve_mass_and_cumulative():
    c = DensityCurve(np.array([1.0, 2.0, 4.0]), np.array([0.5, 1.0, 0.25]))
    assert c.total_mass == pytest.approx(0.75 + 1.25)
    cum = c.cumulative()
    assert cum[0] == 0.0
    assert cum[-1] == pytest.approx(c.total_mass)
    assert np.all(np.diff(cum) >= 0.0)


def test_curve_csv_roundtrip():
    c = DensityCurve(
        np.array([0.5, 1.0, 2.0]),
        np.array([0.1, 0.4, 0.2]),
        kind="lognormal",
        params="mu=0 t=1",
    )
    buf = io.StringIO()
    write_density_csv(c, buf)
    lines = buf.getvalue().strip().split("\n")
    assert lines[0].startswith("# kind=lognormal params=mu=0 t=1 mass=")
    assert lines[1] == "x,density"
    rows = [line.split(",") for line in lines[2:]]
    assert len(rows) == 3
    back = np.array([[float(a), float(b)] for a, b in rows])
    assert np.array_equal(back[:, 0], c.abscissae)
    assert np.array_equal(back[:, 1], c.values)


# --- lognormal baseline ------------------------------------------------------


def test_lognormal_standard_point():
    # density of e^{B_1} at 1: standard normal at 0, Jacobian 1
    assert lognormal_density(0.0, 1.0, 1.0) == pytest.approx(
        1.0 / math.sqrt(2.0 * math.pi), rel=1e-15
    )


@pytest.mark.parametrize("mu,t", [(0.0, 1.0), (0.5, 2.0), (-1.0, 0.3)])
def test_lognormal_normalization(mu, t):
    sd = math.sqrt(t)
    breaks = np.linspace(mu * t - 9.0 * sd, mu * t + 9.0 * sd, 40)
    mass = gl_mass(lambda x: lognormal_density(mu, t, x), breaks)
    assert abs(mass - 1.0) < 1e-8


@pytest.mark.parametrize("mu,t", [(0.0, 1.0), (0.3, 0.5)])
def test_lognormal_mode(mu, t):
    mode = math.exp((mu - 1.0) * t)
    at = lognormal_density(mu, t, mode)
    for bump in (0.999, 1.001):
        assert lognormal_density(mu, t, mode * bump) < at


def test_lognormal_domain():
    with pytest.raises(DomainError):
        lognormal_density(0.0, 0.0, 1.0)
    with pytest.raises(DomainError):
        lognormal_density(0.0, 1.0, -1.0)


# --- fixed-time density, coupled start ---------------------------------------


def test_exact_half_mass():
    curve = curve_exact_half(1.0, 1.0, n_points=400)
    assert curve.kind == "exact_half"
    assert abs(curve.total_mass - 1.0) < 1e-3


def test_exact_half_positive_and_small_t_refusal():
    assert density_exact_half(1.0, 1.0, 1.0) > 0.0
    with pytest.raises(DomainError):
        density_exact_half(1.0, 0.1, 1.0)  # below the Theta time cutoff


def test_exact_half_ks_vs_paths():
    # reduced-n version of the acceptance gate: 3e4 exact paths
    p = ModelParams.coupled_start(1.0)
    stats = simulate_terminal_batch(p, TimeGrid(1.0, 1000), 30_000, seed=101)
    samples = np.sort(stats.theta)
    curve = curve_exact_half(1.0, 1.0, n_points=600)
    ks = ks_stat(samples, curve_cdf(curve, samples))
    assert ks < 0.015  # 99% Kolmogorov band at n=3e4 is 0.0094


# --- exponential-time density ------------------------------------------------


def test_exp_time_frozen_values():
    assert density_exp_time(1.0, 1.0, 2.0) == pytest.approx(P_EXP_1_1_2, rel=1e-9)
    assert density_exp_time(1.0, 0.5, 0.5) == pytest.approx(
        P_EXP_1_HALF_HALF, rel=1e-9
    )


@pytest.mark.parametrize("lam", [1.0, 2.0])
def test_exp_time_mass(lam):
    x = 1.0
    lo, hi = math.log(1e-9), math.log(30.0)
    breaks = np.concatenate(
        [
            np.linspace(lo, math.log(x), 48),
            np.linspace(math.log(x), hi, 16)[1:],
        ]
    )
    mass = gl_mass(lambda z: density_exp_time(x, lam, z), breaks)
    assert abs(mass - 1.0) < 1e-6


@pytest.mark.parametrize("x,lam", [(1.0, 1.0), (2.0, 0.5), (0.5, 2.0)])
def test_exp_time_total_mass(x, lam):
    assert abs(exp_time_total_mass(x, lam) - 1.0) < 1e-6


def test_exp_time_total_mass_domain():
    with pytest.raises(DomainError):
        exp_time_total_mass(0.0, 1.0)
    with pytest.raises(DomainError):
        exp_time_total_mass(1.0, 0.01)  # exponent nu - 1/2 too flat to truncate
    with pytest.raises(DomainError):
        exp_time_total_mass(1.0, 25.0)


def test_exp_time_mirror_identity():
    # prefactor-stripped symmetry: both sides reduce to the same Bessel
    # product, so the weighted mirror must agree to roundoff
    for x, z in [(0.5, 2.0), (1.0, 3.0), (0.7, 0.9)]:
        lhs = density_exp_time(x, 1.0, z) * math.exp(z - x) * math.sqrt(z**3 / x)
        rhs = density_exp_time(z, 1.0, x) * math.exp(x - z) * math.sqrt(x**3 / z)
        assert lhs == pytest.approx(rhs, rel=1e-12)


def test_exp_time_ks_vs_exp_sampled_paths():
    samples = simulate_exp_terminal(
        ModelParams.coupled_start(1.0), rate=1.0, dt=1e-3, n=20_000, seed=7
    )
    samples = np.sort(samples)
    curve = curve_exp_time(1.0, 1.0, n_points=800)
    ks = ks_stat(samples, curve_cdf(curve, samples))
    assert ks < 0.02  # 99% Kolmogorov band at n=2e4 is 0.0115


def test_exp_time_curve_kink_alignment():
    # grid must contain the slope kink where the Bessel arguments swap
    curve = curve_exp_time(1.5, 1.0)
    assert 1.5 in curve.abscissae


# --- mixture consistency ------------------------------------------------------


@pytest.mark.parametrize("w", [0.5, 1.0, 2.0])
def test_mixture_matches_closed_form(w):
    closed = density_exp_time(1.0, 1.0, w)
    value, bound = density_exp_time_mixture(1.0, 1.0, w)
    assert abs(value - closed) / closed < 1e-3
    assert abs(value - closed) <= bound + 1e-3 * closed  # bound honesty
    assert bound < closed


def test_mixture_rate_domain():
    with pytest.raises(DomainError):
        density_exp_time_mixture(1.0, 0.0, 1.0)
    with pytest.raises(DomainError):
        density_exp_time_mixture(1.0, 20.0, 1.0)  # beyond the anchor range


# --- joint density of (a_t, B_t + mu t) --------------------------------------


def test_psi_frozen_value():
    assert myor_psi(0.0, 1.0, 1.0, 0.0) == pytest.approx(PSI_0_1_1_0, rel=1e-6)


def test_psi_profile_matches_scalar():
    vs = np.array([0.3, 1.0, 2.5])
    prof = myor_psi_profile(0.2, 1.0, vs, 0.5)
    for v, p in zip(vs, prof):
        assert p == pytest.approx(myor_psi(0.2, 1.0, v, 0.5), rel=1e-12)


def test_psi_double_normalization():
    xs = np.linspace(-6.0, 6.0, 121)
    vs = np.geomspace(1e-3, 80.0, 500)
    marg = np.array([np.trapezoid(myor_psi_profile(0.0, 1.0, vs, x), vs) for x in xs])
    mass = float(np.trapezoid(marg, xs))
    assert abs(mass - 1.0) < 5e-3


@pytest.mark.parametrize("x", [-1.0, 0.0, 1.0])
def test_psi_x_marginal_is_gaussian(x):
    vs = np.geomspace(1e-3, 120.0, 800)
    marg = float(np.trapezoid(myor_psi_profile(0.0, 1.0, vs, x), vs))
    target = math.exp(-x * x / 2.0) / math.sqrt(2.0 * math.pi)
    assert abs(marg - target) / target < 5e-3


def test_psi_v_marginal_ks():
    # v-marginal CDF by quadrature of the profile over x, vs simulated a_t
    stats = simulate_terminal_batch(
        ModelParams(mu=0.0, beta=0.0, x0=1.0), TimeGrid(1.0, 1000), 100_000, seed=17
    )
    a = np.sort(stats.a)
    vs = np.geomspace(5e-3, 60.0, 900)
    xs = np.linspace(-7.0, 7.0, 141)
    dens = np.zeros_like(vs)
    for i, x in enumerate(xs):
        row = myor_psi_profile(0.0, 1.0, vs, x)
        dens += row * (xs[1] - xs[0]) * (0.5 if i in (0, len(xs) - 1) else 1.0)
    vcdf = np.concatenate([[0.0], np.cumsum(0.5 * (dens[1:] + dens[:-1]) * np.diff(vs))])
    ks = ks_stat(a, np.interp(a, vs, vcdf))
    assert ks < 1e-2


def test_psi_domain():
    with pytest.raises(DomainError):
        myor_psi(0.0, 0.5, 1.0, 0.0)  # t below 4*t_min_theta
    with pytest.raises(DomainError):
        myor_psi(0.0, 1.0, -1.0, 0.0)
    with pytest.raises(DomainError):
        myor_psi_profile(0.0, 0.5, np.array([1.0]), 0.0)


# --- conditional Laplace transform -------------------------------------------


def test_myor_eval_validation():
    with pytest.raises(DomainError):
        MyorEval(mu=0.0, t=0.0, v=1.0, x=0.0, lam=1.0)
    with pytest.raises(DomainError):
        MyorEval(mu=0.0, t=1.0, v=-1.0, x=0.0, lam=1.0)
    with pytest.raises(DomainError):
        MyorEval(mu=0.0, t=1.0, v=1.0, x=0.0, lam=0.0)


def test_conditional_frozen_value():
    ev = MyorEval(mu=0.0, t=1.0, v=1.0, x=0.0, lam=1.0)
    assert myor_conditional_laplace(ev) == pytest.approx(COND_0_1_1_0_1, rel=1e-6)


def test_conditional_small_rate_limit():
    ev = MyorEval(mu=0.0, t=1.0, v=1.0, x=0.0, lam=1e-4)
    assert abs(myor_conditional_laplace(ev) - 1.0) < 1e-2


def test_conditional_monotone_and_bounded():
    vals = []
    for lam in (0.25, 0.5, 1.0, 2.0, 4.0):
        ev = MyorEval(mu=0.0, t=1.0, v=1.0, x=0.0, lam=lam)
        vals.append(myor_conditional_laplace(ev))
    assert all(v2 < v1 for v1, v2 in zip(vals, vals[1:]))
    for v, x in [(0.5, 0.0), (1.0, 0.5), (2.0, -0.5), (0.8, 1.0)]:
        c = myor_conditional_laplace(MyorEval(mu=0.3, t=1.2, v=v, x=x, lam=1.0))
        assert 0.0 < c <= 1.0 + 1e-12


def test_conditional_out_of_support_refusal():
    with pytest.raises(DomainError):
        myor_conditional_laplace(MyorEval(mu=0.0, t=1.0, v=0.5, x=25.0, lam=1.0))


def test_conditional_vs_binned_mc():
    # brute-force oracle: bin paths near (a_1, B_1) = (1, 0) and average
    # exp(-A_1/2) -- the quantity the transform conditions on
    stats = simulate_terminal_batch(
        ModelParams(mu=0.0, beta=0.0, x0=1.0), TimeGrid(1.0, 250), 800_000, seed=23
    )
    sel = (np.abs(stats.a - 1.0) < 0.1) & (np.abs(stats.bmd) < 0.1)
    assert sel.sum() > 5_000
    binned = float(np.exp(-0.5 * stats.A[sel]).mean())
    assert abs(binned - COND_0_1_1_0_1) < 5e-2


# --- tilt kernel --------------------------------------------------------------


def test_h_kernel_composition():
    assert h_kernel(1.0, 0.0, 1.0, 1.0, 1.0) == pytest.approx(H_1_0_1_1_1, rel=1e-6)


def test_h_kernel_reduces_at_coupled_drift():
    # exponent gamma (mu + 1/2) vanishes at mu = -1/2
    ev = MyorEval(mu=-0.5, t=1.0, v=1.0, x=0.0, lam=1.0)
    assert h_kernel(1.0, -0.5, 1.0, 1.0, 1.0) == pytest.approx(
        myor_conditional_laplace(ev), rel=1e-14
    )


def test_h_kernel_increasing_in_y_at_small_gamma():
    ys = [0.5, 1.0, 1.5, 2.0]
    hs = [h_kernel(0.05, 0.0, 1.0, y, 1.0) for y in ys]
    assert all(h2 > h1 for h1, h2 in zip(hs, hs[1:]))


def test_h_kernel_domain():
    with pytest.raises(DomainError):
        h_kernel(1.0, 0.0, 1.0, 1.0, -2.0)


# --- general-drift density -----------------------------------------------------


def test_general_quad_matches_small_gamma_lognormal():
    for x in (0.5, 1.0, 2.0):
        q = density_general_quad(1e-8, 0.3, 1.0, x)
        assert q == pytest.approx(lognormal_density(0.3, 1.0, x), rel=1e-4)


def test_general_quad_normalization():
    xg = np.geomspace(1e-3, 30.0, 400)
    ys = np.array([density_general_quad(1.0, 0.0, 1.0, x) for x in xg])
    assert abs(float(np.trapezoid(ys, xg)) - 1.0) < 5e-3


def test_general_quad_resolution_stable():
    a = density_general_quad(1.0, 0.0, 1.0, 1.0, n=2000)
    b = density_general_quad(1.0, 0.0, 1.0, 1.0, n=8000)
    assert a == pytest.approx(b, rel=1e-4)


def test_general_mc_small_gamma_is_lognormal():
    for variant in ("unconditional", "endpoint-conditional"):
        est = density_general_mc(
            1e-8, 0.0, 1.0, 1.0, 5_000, seed=3, variant=variant
        )
        assert est.mean == pytest.approx(lognormal_density(0.0, 1.0, 1.0), rel=1e-6)


def test_general_mc_conditional_matches_quad():
    xg = np.array([0.5, 1.0, 2.0])
    curve, errs = curve_general_mc(
        1.0, 0.0, 1.0, xg, 30_000, seed=41, variant="endpoint-conditional"
    )
    for x, v, e in zip(xg, curve.values, errs):
        q = density_general_quad(1.0, 0.0, 1.0, x)
        assert abs(v - q) < 4.0 * e


def test_general_mc_variants_disagree_at_unit_gamma():
    # the two readings of the tilt average genuinely differ here; the
    # histogram arbitration in the acceptance suite picks the winner
    u, c, warn = density_general_both(1.0, 0.0, 1.0, 1.0, 20_000, seed=77)
    assert warn
    assert variants_disagree(u, c)
    assert not variants_disagree(c, c)


def test_general_mc_conditional_curve_mass():
    xg = np.geomspace(0.05, 8.0, 80)
    curve, _ = curve_general_mc(
        1.0, 0.0, 1.0, xg, 20_000, seed=77, variant="endpoint-conditional"
    )
    assert abs(curve.total_mass - 1.0) < 2e-2


def test_general_mc_thread_count_invariance():
    a = density_general_mc(
        1.0, 0.0, 1.0, 1.0, 4_000, seed=9, variant="endpoint-conditional", threads=1
    )
    b = density_general_mc(
        1.0, 0.0, 1.0, 1.0, 4_000, seed=9, variant="endpoint-conditional", threads=3
    )
    assert (a.mean, a.stderr) == (b.mean, b.stderr)


def test_general_mc_domain():
    with pytest.raises(DomainError):
        density_general_mc(0.0, 0.0, 1.0, 1.0, 100, seed=1)
    with pytest.raises(DomainError):
        density_general_mc(1.0, 0.0, 0.5, 1.0, 100, seed=1)  # t < 4*t_min_theta
    with pytest.raises(DomainError):
        density_general_mc(1.0, 0.0, 1.0, -1.0, 100, seed=1)
    with pytest.raises(DomainError):
        density_general_mc(1.0, 0.0, 1.0, 1.0, 100, seed=1, variant="nope")


# --- moment identity -----------------------------------------------------------


def test_moment_values():
    p = ModelParams(mu=0.0, beta=1.0, x0=1.0)
    assert moment_exp_int_theta(p, 0.0) == 1.0
    assert moment_exp_int_theta(p, 1.0) == pytest.approx(
        1.0 + 2.0 * (math.exp(0.5) - 1.0), rel=1e-15
    )
    with pytest.raises(DomainError):
        moment_exp_int_theta(p, -1.0)


def test_moment_coupled_drift_limit():
    target = moment_exp_int_theta(ModelParams(mu=-0.5, beta=1.0, x0=1.0), 1.0)
    assert target == 2.0  # 1 + beta t
    for eps in (1e-6, -1e-6):
        near = moment_exp_int_theta(ModelParams(mu=-0.5 + eps, beta=1.0, x0=1.0), 1.0)
        assert abs(near - target) < 1e-5


def test_moment_mc_crosscheck():
    p = ModelParams(mu=0.0, beta=1.0, x0=1.0)
    stats = simulate_terminal_batch(p, TimeGrid(1.0, 1000), 20_000, seed=31)
    vals = np.exp(p.beta * stats.int_theta)
    est = vals.mean()
    se = vals.std(ddof=1) / math.sqrt(vals.size)
    assert abs(est - moment_exp_int_theta(p, 1.0)) < 3.0 * se
