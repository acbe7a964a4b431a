"""Monte Carlo oracles for the Verhulst process.

Exact pathwise simulation of theta_t = x0 e^{B_t+mu t} / (1 + beta a_t)
with its integral bookkeeping, an Euler-Maruyama witness for the SDE
form, exact squared-Bessel(dim 0) sampling, the pathwise change-of-
measure weight, and three independent Monte Carlo routes to the Laplace
transform E e^{-lambda theta_t}.

Reproducibility contract: replicates are organized in fixed blocks of
BLOCK_PATHS paths; block b draws from Philox seeded with the pair
(seed, b).  Estimates depend only on (seed, n), never on the number of
worker threads.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .specfun import laplace_kernel_F

BLOCK_PATHS = 4096

# reflection floor for the Euler guard, as a fraction of the start value
EULER_FLOOR_FRAC = 1e-12


def _block_rng(seed, block):
    return np.random.Generator(
        np.random.Philox(np.random.SeedSequence((int(seed), int(block))))
    )


def _run_blocks(n, fill, threads):
    """Call fill(block_index) for every block covering n paths."""
    n_blocks = (n + BLOCK_PATHS - 1) // BLOCK_PATHS
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            list(ex.map(fill, range(n_blocks)))
    else:
        for b in range(n_blocks):
            fill(b)


@dataclass(frozen=True)
class ModelParams:
    """Drift mu, crowding beta >= 0, start value x0 > 0.

    `coupled` marks the convention where the start level doubles as the
    crowding coefficient: theta_t(x) = x e^{B_t - t/2}/(1 + x a_t).  It
    pins mu = -1/2 and beta = x0; the generic and coupled conventions
    are never mixed within one run.
    """

    mu: float
    beta: float
    x0: float = 1.0
    coupled: bool = False

    def __post_init__(self):
        if self.beta < 0:
            raise DomainError("beta must be >= 0")
        if self.x0 <= 0:
            raise DomainError("x0 must be > 0")
        if self.coupled and (self.mu != -0.5 or self.beta != self.x0):
            raise DomainError("coupled convention requires mu = -1/2 and beta = x0")

    @classmethod
    def coupled_start(cls, x):
        return cls(mu=-0.5, beta=float(x), x0=float(x), coupled=True)


@dataclass(frozen=True)
class TimeGrid:
    t_end: float
    n_steps: int

    def __post_init__(self):
        if self.t_end <= 0:
            raise DomainError("t_end must be > 0")
        if self.n_steps < 1:
            raise DomainError("n_steps must be >= 1")

    @property
    def dt(self):
        return self.t_end / self.n_steps

    def times(self):
        return self.dt * np.arange(self.n_steps + 1)


@dataclass
class PathSample:
    """One path on a TimeGrid with its terminal integral bookkeeping.

    theta and bmd (= B_t + mu t) are node arrays; the four integrals are
    terminal trapezoid values.  n_clamped counts Euler positivity-guard
    events (always 0 for the exact functional simulator).
    """

    grid: TimeGrid
    theta: np.ndarray
    bmd: np.ndarray
    int_theta: float
    int_theta_sq: float
    a_T: float
    A_T: float
    n_clamped: int = 0

    def running_integrals(self):
        """Cumulative trapezoid series (int theta, int theta^2, a_t, A_t)."""
        dt = self.grid.dt
        e = np.exp(self.bmd)

        def ctrap(v):
            out = np.empty_like(v)
            out[0] = 0.0
            np.cumsum(0.5 * dt * (v[1:] + v[:-1]), out=out[1:])
            return out

        return ctrap(self.theta), ctrap(self.theta**2), ctrap(e), ctrap(e * e)


@dataclass(frozen=True)
class McEstimate:
    mean: float
    stderr: float
    n: int

    @classmethod
    def from_samples(cls, vals):
        vals = np.asarray(vals, dtype=float)
        if vals.size < 2:
            raise DomainError("need n >= 2 for a standard error")
        return cls(
            mean=float(vals.mean()),
            stderr=float(vals.std(ddof=1) / math.sqrt(vals.size)),
            n=int(vals.size),
        )


@dataclass
class TerminalStats:
    """Per-path terminal summaries from a batch run (arrays of length n)."""

    theta: np.ndarray
    bmd: np.ndarray
    a: np.ndarray
    A: np.ndarray
    int_theta: np.ndarray
    int_theta_sq: np.ndarray


def _path_from_increments(params, grid, g):
    dt = grid.dt
    bmd = np.empty(grid.n_steps + 1)
    bmd[0] = 0.0
    np.cumsum(g, out=bmd[1:])
    bmd[1:] += params.mu * dt * np.arange(1, grid.n_steps + 1)
    e = np.exp(bmd)
    a = np.empty_like(e)
    a[0] = 0.0
    np.cumsum(0.5 * dt * (e[1:] + e[:-1]), out=a[1:])
    theta = params.x0 * e / (1.0 + params.beta * a)

    def trap(v):
        return float(dt * (v.sum() - 0.5 * (v[0] + v[-1])))

    return PathSample(
        grid=grid,
        theta=theta,
        bmd=bmd,
        int_theta=trap(theta),
        int_theta_sq=trap(theta**2),
        a_T=float(a[-1]),
        A_T=trap(e * e),
    )


def simulate_functional(params, grid, seed):
    """Exact-in-distribution path of the functional at the grid nodes.

    Gaussian increments are exact; only the running integrals carry
    trapezoid bias.  Uses the stream of (seed, block 0), so path 0 of a
    batch run with the same seed sees the same increments.
    """
    rng = _block_rng(seed, 0)
    g = rng.standard_normal((1, grid.n_steps))[0] * math.sqrt(grid.dt)
    return _path_from_increments(params, grid, g)


def simulate_sde_euler(params, grid, seed):
    """Euler-Maruyama path of d theta = theta dB + ((mu+1/2) theta - (beta/x0) theta^2) dt.

    Shares Brownian increments with simulate_functional at the same
    seed.  Steps driven to theta <= 0 are reflected to a small positive
    floor and counted in n_clamped; the exact simulator is the primary
    oracle, this one is a consistency witness.
    """
    rng = _block_rng(seed, 0)
    dt = grid.dt
    g = rng.standard_normal((1, grid.n_steps))[0] * math.sqrt(dt)
    mu, x0 = params.mu, params.x0
    quad = params.beta / x0
    floor = EULER_FLOOR_FRAC * x0

    theta = np.empty(grid.n_steps + 1)
    theta[0] = x0
    clamped = 0
    for i in range(grid.n_steps):
        th = theta[i]
        nxt = th + th * g[i] + ((mu + 0.5) * th - quad * th * th) * dt
        if nxt <= 0.0:
            nxt = floor
            clamped += 1
        theta[i + 1] = nxt

    bmd = np.empty(grid.n_steps + 1)
    bmd[0] = 0.0
    np.cumsum(g, out=bmd[1:])
    bmd[1:] += mu * dt * np.arange(1, grid.n_steps + 1)
    e = np.exp(bmd)

    def trap(v):
        return float(dt * (v.sum() - 0.5 * (v[0] + v[-1])))

    a = np.empty_like(e)
    a[0] = 0.0
    np.cumsum(0.5 * dt * (e[1:] + e[:-1]), out=a[1:])
    return PathSample(
        grid=grid,
        theta=theta,
        bmd=bmd,
        int_theta=trap(theta),
        int_theta_sq=trap(theta**2),
        a_T=float(a[-1]),
        A_T=trap(e * e),
        n_clamped=clamped,
    )


def simulate_terminal_batch(params, grid, n, seed, threads=1):
    """Terminal summaries of n functional paths, block-parallel.

    Per block the node matrix is built once and reduced immediately, so
    memory stays at a few BLOCK_PATHS x n_steps buffers regardless of n.
    """
    if n < 1:
        raise DomainError("n must be >= 1")
    S = grid.n_steps
    dt = grid.dt
    sqdt = math.sqrt(dt)
    mu, beta, x0 = params.mu, params.beta, params.x0
    drift = mu * dt * np.arange(1, S + 1)

    out = TerminalStats(*(np.empty(n) for _ in range(6)))

    def fill(b):
        lo = b * BLOCK_PATHS
        m = min(BLOCK_PATHS, n - lo)
        rng = _block_rng(seed, b)
        w = rng.standard_normal((m, S))
        w *= sqdt
        np.cumsum(w, axis=1, out=w)
        w += drift  # now B + mu t at nodes 1..S
        bmd_T = w[:, -1].copy()
        np.exp(w, out=w)  # now e^{B + mu t}
        e_T = w[:, -1].copy()
        ee_sum = np.einsum("ij,ij->i", w, w)

        cum = np.cumsum(w, axis=1)
        cum -= 0.5 * w
        cum += 0.5
        cum *= dt  # now the running a_t (trapezoid, a_0 = 0 folded in)
        a_T = cum[:, -1].copy()

        cum *= beta
        cum += 1.0
        np.divide(w, cum, out=w)
        w *= x0  # now theta at nodes 1..S
        th_T = w[:, -1].copy()
        th_sum = w.sum(axis=1)
        thth_sum = np.einsum("ij,ij->i", w, w)

        sl = slice(lo, lo + m)
        out.theta[sl] = th_T
        out.bmd[sl] = bmd_T
        out.a[sl] = a_T
        out.A[sl] = dt * (ee_sum - 0.5 * e_T * e_T + 0.5)
        out.int_theta[sl] = dt * (th_sum - 0.5 * th_T + 0.5 * x0)
        out.int_theta_sq[sl] = dt * (thth_sum - 0.5 * th_T * th_T + 0.5 * x0 * x0)

    _run_blocks(n, fill, threads)
    return out


def simulate_exp_terminal(params, rate, dt, n, seed, threads=1):
    """theta evaluated at an independent Exp(rate) time, n replicates.

    Horizons are rounded to the step grid (at least one step).  Within a
    block, paths are sorted by decreasing horizon and advanced jointly;
    the active prefix shrinks as horizons expire, so total work is the
    sum of the horizons rather than block size times the longest one.
    """
    if rate <= 0:
        raise DomainError("rate must be > 0")
    if dt <= 0:
        raise DomainError("dt must be > 0")
    if n < 1:
        raise DomainError("n must be >= 1")
    sqdt = math.sqrt(dt)
    mu, beta, x0 = params.mu, params.beta, params.x0
    out = np.empty(n)

    def fill(b):
        lo = b * BLOCK_PATHS
        m = min(BLOCK_PATHS, n - lo)
        rng = _block_rng(seed, b)
        horizons = -np.log1p(-rng.random(m)) / rate
        n_steps = np.maximum(1, np.rint(horizons / dt).astype(np.int64))
        order = np.argsort(-n_steps, kind="stable")
        ns = n_steps[order]
        n_max = int(ns[0])
        cnt = np.bincount(ns, minlength=n_max + 2)
        geq = np.cumsum(cnt[::-1])[::-1]  # geq[s] = number of paths with ns >= s

        bm = np.zeros(m)
        a = np.zeros(m)
        e_prev = np.ones(m)
        res = np.empty(m)
        for s in range(1, n_max + 1):
            act = int(geq[s])
            g = rng.standard_normal(act)
            bm[:act] += g * sqdt + mu * dt
            e = np.exp(bm[:act])
            a[:act] += 0.5 * dt * (e_prev[:act] + e)
            e_prev[:act] = e
            retire_lo = int(geq[s + 1]) if s + 1 <= n_max else 0
            if retire_lo < act:
                sl = slice(retire_lo, act)
                res[sl] = x0 * e[sl] / (1.0 + beta * a[sl])
        block_out = np.empty(m)
        block_out[order] = res
        out[lo : lo + m] = block_out

    _run_blocks(n, fill, threads)
    return out


# --- change of measure ------------------------------------------------------


def girsanov_weight(path, gamma, params):
    """Pathwise weight M_T = exp(-gamma (theta_T - x0) + gamma (mu+1/2) int theta
    - (gamma beta/x0 + gamma^2/2) int theta^2).

    Stochastic-integral-free form: substituting the SDE for theta dB
    turns the exponential martingale of -gamma theta into this
    expression in the path's own integrals.  Expectation 1.
    """
    if gamma <= 0:
        raise DomainError("gamma must be > 0")
    return float(
        _girsanov_exponent(
            path.theta[-1], path.int_theta, path.int_theta_sq, gamma, params, np.exp
        )
    )


def girsanov_weight_batch(stats, gamma, params):
    """Vectorized girsanov_weight over a TerminalStats batch."""
    if gamma <= 0:
        raise DomainError("gamma must be > 0")
    return _girsanov_exponent(
        stats.theta, stats.int_theta, stats.int_theta_sq, gamma, params, np.exp
    )


def _girsanov_exponent(theta_T, int_theta, int_theta_sq, gamma, params, exp):
    quad = gamma * params.beta / params.x0 + 0.5 * gamma * gamma
    return exp(
        -gamma * (theta_T - params.x0)
        + gamma * (params.mu + 0.5) * int_theta
        - quad * int_theta_sq
    )


def girsanov_weight_bound(gamma, params, t_end):
    """Deterministic upper bound exp(gamma x0 + (gamma(mu+1/2))^2 T / (4 c)),
    c = gamma beta/x0 + gamma^2/2 (maximize the integrand in theta)."""
    if gamma <= 0:
        raise DomainError("gamma must be > 0")
    c = gamma * params.beta / params.x0 + 0.5 * gamma * gamma
    return math.exp(gamma * params.x0 + (gamma * (params.mu + 0.5)) ** 2 * t_end / (4.0 * c))


# --- elementary samplers ----------------------------------------------------


def sample_besq0(x_start, s, rng):
    """Exact draw of a dimension-0 squared Bessel bridge endpoint R^{(x)}(s).

    Poisson(x/(2s)) mixture of Gamma variables: N = 0 gives the absorbed
    state 0, otherwise 2s * Gamma(N, 1).  Broadcasts over x_start.
    """
    if s <= 0:
        raise DomainError("s must be > 0")
    x = np.asarray(x_start, dtype=float)
    if np.any(x < 0):
        raise DomainError("x_start must be >= 0")
    mix = rng.poisson(x / (2.0 * s))
    draw = 2.0 * s * rng.standard_gamma(mix)
    return float(draw) if np.ndim(x_start) == 0 else draw


def sample_exp_time(rate, rng, size=None):
    """Inverse-CDF exponential horizon(s) with the given rate."""
    if rate <= 0:
        raise DomainError("rate must be > 0")
    u = rng.random(size)
    return -np.log1p(-u) / rate


# --- Laplace-transform routes -----------------------------------------------


def laplace_mc_besq(lam, params, t, n, seed, horizon="t", threads=1):
    """E e^{-lambda theta_t} through the squared-Bessel representation.

    Draws a terminal Gaussian G with doubled drift, an exact
    dimension-0 squared Bessel value started at lambda e^{2G} run to
    time 1/2, and averages the arcosh kernel at (x=G, z=draw/(4 beta)).

    `horizon` picks the time parameter used for both G and the kernel:
    "t" (literal) or "t4" (t/4, the Brownian-rescaling reading).  The
    two disagree; the validation suite arbitrates against the direct
    route and records the winner.
    """
    if params.beta <= 0:
        raise DomainError("squared-Bessel route needs beta > 0")
    if params.x0 != 1.0:
        raise DomainError("squared-Bessel route is stated for x0 = 1")
    if lam < 0:
        # lam = 0 is the absorbed boundary: the Bessel draw is identically
        # 0 and the kernel identically 1, matching E e^{-0 theta} = 1
        raise DomainError("lam must be >= 0")
    if horizon not in ("t", "t4"):
        raise DomainError("horizon must be 't' or 't4'")
    h = t if horizon == "t" else 0.25 * t
    if h <= 0:
        raise DomainError("t must be > 0")
    sqh = math.sqrt(h)
    vals = np.empty(n)

    def fill(b):
        lo = b * BLOCK_PATHS
        m = min(BLOCK_PATHS, n - lo)
        rng = _block_rng(seed, b)
        gauss = rng.standard_normal(m) * sqh + 2.0 * params.mu * h
        r_draw = sample_besq0(lam * np.exp(2.0 * gauss), 0.5, rng)
        vals[lo : lo + m] = laplace_kernel_F(gauss, r_draw / (4.0 * params.beta), h)

    _run_blocks(n, fill, threads)
    return McEstimate.from_samples(vals)


def laplace_mc_gbm(lam, params, t, n, seed, n_steps=1000, threads=1):
    """E e^{-lambda theta_t} through the plain-GBM representation
    e^beta E exp(-(beta+lam) e^{B+mu t} + beta (mu+1/2) a_t - (beta^2/2) A_t).

    In the coupled convention the start level x enters as
    lam -> lam * x, beta -> x; the generic form is stated for x0 = 1.
    """
    if lam < 0:
        raise DomainError("lam must be >= 0")
    if params.coupled:
        lam_eff = lam * params.x0
        beta_eff = params.x0
    else:
        if params.x0 != 1.0:
            raise DomainError("GBM route is stated for x0 = 1 (or the coupled convention)")
        lam_eff = lam
        beta_eff = params.beta
    gbm = ModelParams(mu=params.mu, beta=0.0, x0=1.0)
    stats = simulate_terminal_batch(gbm, TimeGrid(t, n_steps), n, seed, threads=threads)
    e_T = np.exp(stats.bmd)
    expo = (
        beta_eff
        - (beta_eff + lam_eff) * e_T
        + beta_eff * (params.mu + 0.5) * stats.a
        - 0.5 * beta_eff * beta_eff * stats.A
    )
    return McEstimate.from_samples(np.exp(expo))


def laplace_mc_direct(lam, params, t, n, seed, n_steps=1000, threads=1):
    """Brute-force E e^{-lambda theta_t}: average over functional paths."""
    if lam < 0:
        raise DomainError("lam must be >= 0")
    stats = simulate_terminal_batch(params, TimeGrid(t, n_steps), n, seed, threads=threads)
    return McEstimate.from_samples(np.exp(-lam * stats.theta))


# --- serialization ----------------------------------------------------------

PATH_CSV_HEADER = "t,theta,bmd,int_theta,int_theta_sq,a_t,A_t"


def dump_path_csv(sample, fh):
    """Write one row per grid node with the running integral series."""
    i_th, i_th2, a_run, big_a = sample.running_integrals()
    fh.write(PATH_CSV_HEADER + "\n")
    for row in zip(sample.grid.times(), sample.theta, sample.bmd, i_th, i_th2, a_run, big_a):
        fh.write(",".join(format(v, ".17g") for v in row) + "\n")
