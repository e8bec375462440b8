"""Closed-form stationary and transient laws.

Canonical product-form measure of the particle system (exact, in log
space), its size-biased single-site marginal and geometric limit,
stick-breaking samplers (GEM / Poisson-Dirichlet / Beta / Exp), the
closed-form transient density of the resetting square-root diffusion,
a finite-difference solver for its Fokker-Planck equation, and exact
Beta-moment pairings with the macroscopic mutation operator.
"""
from __future__ import annotations

import math

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import splu
from scipy.stats import ncx2

from .observables import Observable
from .states import Configuration, Partition

INF = math.inf


class NonpositiveTime(ValueError):
    """Transient laws require t > 0."""


class GridTooCoarse(ValueError):
    """Finite-difference answer not converged at the requested resolution."""


# ---------------------------------------------------------------------------
# canonical measure


def log_weight(n, d):
    """log w(n) with w(n) = Gamma(n+d) / (n! Gamma(d))."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    return math.lgamma(n + d) - math.lgamma(n + 1) - math.lgamma(d)


def log_partition(L, N, d):
    """log Z_{L,N} with Z_{L,N} = Gamma(N+dL) / (N! Gamma(dL))."""
    if L < 1 or N < 0:
        raise ValueError("need L >= 1, N >= 0")
    return math.lgamma(N + d * L) - math.lgamma(N + 1) - math.lgamma(d * L)


class CanonicalMeasure:
    """Stationary product-form law of N particles on L sites."""

    def __init__(self, L, N, d):
        if L < 1 or N < 1 or d <= 0:
            raise ValueError("need L >= 1, N >= 1, d > 0")
        self.L, self.N, self.d = int(L), int(N), float(d)

    def log_prob(self, config):
        """log pi(eta) = sum log w(eta_x) - log Z."""
        if config.sites != self.L or config.particles != self.N:
            raise ValueError("configuration does not match (L, N)")
        return (sum(log_weight(int(n), self.d) for n in config.occupations)
                - log_partition(self.L, self.N, self.d))

    def marginal(self, sites_left=None, particles_left=None):
        """Single-site occupancy law pi[eta_1 = n], n = 0..N.

        With arguments, the conditional marginal for a site when
        `sites_left` sites and `particles_left` particles remain.
        """
        L = self.L if sites_left is None else sites_left
        N = self.N if particles_left is None else particles_left
        d = self.d
        if L == 1:
            p = np.zeros(N + 1)
            p[N] = 1.0
            return p
        logZ = log_partition(L, N, d)
        n = np.arange(N + 1)
        logp = (np.vectorize(log_weight)(n, d)
                + np.vectorize(log_partition)(L - 1, N - n, d) - logZ)
        p = np.exp(logp - logp.max())
        return p * math.exp(logp.max())

    def exact_sampler(self, rng):
        """Exact draw from pi by sequential conditional sampling."""
        occ = np.zeros(self.L, dtype=np.int64)
        left = self.N
        for x in range(self.L):
            p = self.marginal(self.L - x, left)
            n = int(rng.choice(left + 1, p=p / p.sum()))
            occ[x] = n
            left -= n
        return Configuration(occ)


def size_biased_marginal(n, L, N, d):
    """pi[size-biased first occupation = n] = (L/N) n w(n) Z_{L-1,N-n} / Z_{L,N}."""
    if n < 1 or n > N:
        return 0.0
    logp = (math.log(L) - math.log(N) + math.log(n) + log_weight(n, d)
            + log_partition(L - 1, N - n, d) - log_partition(L, N, d))
    return math.exp(logp)


def geometric_limit_pmf(n, gamma):
    """Limit law of the size-biased occupation: gamma^{n-1} / (1+gamma)^n."""
    if n < 1:
        raise ValueError("support is {1, 2, ...}")
    if gamma < 0:
        raise ValueError("gamma must be nonnegative")
    if gamma == 0.0:
        return 1.0 if n == 1 else 0.0
    return math.exp((n - 1) * math.log(gamma) - n * math.log1p(gamma))


# ---------------------------------------------------------------------------
# stick-breaking samplers


def sample_beta_1_theta(theta, rng):
    return float(rng.beta(1.0, theta))


def sample_exp1(rng):
    return float(rng.exponential(1.0))


def sample_gem(theta, tol, rng):
    """GEM(theta) stick-breaking weights in pick order.

    Returns (sticks, dust): sticks are the unranked Beta(1,theta)
    fractions of the remaining stick, stopping once the remainder drops
    below tol; the remainder is returned as dust.
    """
    if not 0.0 < tol < 1.0:
        raise ValueError("tol must lie in (0, 1)")
    sticks = []
    remaining = 1.0
    while remaining >= tol:
        v = rng.beta(1.0, theta)
        sticks.append(remaining * v)
        remaining *= 1.0 - v
    return sticks, remaining


def sample_pd(theta, tol, rng):
    """Poisson-Dirichlet PD(theta) sample: ranked GEM weights."""
    sticks, dust = sample_gem(theta, tol, rng)
    sticks = [s for s in sticks if s >= tol]
    dust = 1.0 - sum(sticks)
    return Partition(tuple(sorted(sticks, reverse=True)), dust)


# ---------------------------------------------------------------------------
# transient law of the resetting square-root diffusion


def _ell(t):
    return 0.5 * -math.expm1(-t)


def transition_density_no_reset(t, z, z0):
    """g(t, z | z0): square-root diffusion transition without resets.

    z0 = 0 has the closed form z/(2 l_t)^2 exp(-z/(2 l_t)); general z0
    is the scaled noncentral chi-square(4) density.
    """
    if t <= 0:
        raise NonpositiveTime("t must be positive")
    lt = _ell(t)
    if z0 == 0.0:
        return z / (2.0 * lt) ** 2 * math.exp(-z / (2.0 * lt))
    lam = z0 * math.exp(-t) / lt
    return float(ncx2.pdf(z / lt, df=4, nc=lam) / lt)


def closed_form_density(t, z, z0):
    """f(t, z | z0) = e^{-t} g(t, z | z0) + e^{-z/(2 l_t)}.

    The second term is the contribution of paths that have reset at
    least once; it is independent of z0.  z0 = INF puts the surviving
    mass e^{-t} at infinity, so only the reset term remains at finite z.
    """
    if t <= 0:
        raise NonpositiveTime("t must be positive")
    if z <= 0:
        raise ValueError("density defined for z > 0")
    lt = _ell(t)
    reset_part = math.exp(-z / (2.0 * lt))
    if z0 == INF:
        return reset_part
    return math.exp(-t) * transition_density_no_reset(t, z, z0) + reset_part


def mass_ode(t, alpha0):
    """Finite-mass fraction alpha(t) = 1 - (1 - alpha0) e^{-t}."""
    return 1.0 - (1.0 - alpha0) * math.exp(-t)


def fokker_planck_solve(initial, t, z_max=20.0, nodes=2000, dt=1e-3,
                        check_refinement=False):
    """Solve  d_t f = z f'' + z f'  with f(t,0) = 1, f(t,z_max) = 0.

    initial: callable z -> f(0, z).
    Returns (grid, f(t, grid)).  Implicit (backward Euler) stepping on a
    grid refined near 0 (quadratic stretching), unconditionally stable
    at the degenerate boundary.
    """
    if t <= 0:
        raise NonpositiveTime("t must be positive")
    if z_max < 20.0:
        raise ValueError("z_max must be at least 20")

    def solve(nodes, dt):
        u = np.linspace(0.0, 1.0, nodes)
        z = z_max * u**2
        f = np.array([initial(zi) for zi in z], dtype=float)
        f[0], f[-1] = 1.0, 0.0
        hm = z[1:-1] - z[:-2]
        hp = z[2:] - z[1:-1]
        zi = z[1:-1]
        # nonuniform 3-point stencils for f'' and f'
        a2 = 2.0 / (hm * (hm + hp))
        b2 = -2.0 / (hm * hp)
        c2 = 2.0 / (hp * (hm + hp))
        a1 = -hp / (hm * (hm + hp))
        b1 = (hp - hm) / (hm * hp)
        c1 = hm / (hp * (hm + hp))
        lo = zi * (a2 + a1)
        di = zi * (b2 + b1)
        up = zi * (c2 + c1)
        n = nodes
        steps = max(1, int(round(t / dt)))
        step_dt = t / steps
        A = sparse.lil_matrix((n, n))
        A[0, 0] = 1.0
        A[n - 1, n - 1] = 1.0
        idx = np.arange(1, n - 1)
        A[idx, idx - 1] = -step_dt * lo
        A[idx, idx] = 1.0 - step_dt * di
        A[idx, idx + 1] = -step_dt * up
        lu = splu(sparse.csc_matrix(A))
        for _ in range(steps):
            rhs = f.copy()
            rhs[0], rhs[-1] = 1.0, 0.0
            f = lu.solve(rhs)
        return z, f

    z, f = solve(nodes, dt)
    if check_refinement:
        z2, f2 = solve(2 * nodes - 1, dt / 2.0)
        interp = np.interp(z, z2, f2)
        if np.max(np.abs(interp - f)) > 10 * 1e-3:
            raise GridTooCoarse("halving the mesh moves the answer by more than 1e-2")
    return z, f


# ---------------------------------------------------------------------------
# exact Beta-moment pairing


def beta_moment(k, theta):
    """E[z^k] under Beta(1, theta) = k! Gamma(theta+1) / Gamma(theta+k+1)."""
    logm = math.lgamma(k + 1) + math.lgamma(theta + 1) - math.lgamma(theta + k + 1)
    return math.exp(logm)


def _expect_beta(h, theta):
    """Exact Beta(1, theta) expectation of a pure polynomial Observable."""
    total = 0.0
    for coeffs, cutoff in h.terms:
        if cutoff is not None:
            raise ValueError("pairing requires pure polynomials (no cutoff)")
        for k, c in enumerate(coeffs):
            total += c * beta_moment(k, theta)
    return total


def beta_generator_pairing(h, g, theta):
    """Exact  integral of g * (mutation operator applied to h)  under
    Beta(1, theta), by Beta-moment algebra (no quadrature).

    The operator is z(1-z)h'' + (2 - z(2+theta))h' + theta(h(0) - h(z)).
    """
    zp = Observable.polynomial([0.0, 1.0])
    ah = (zp * (1.0 - zp) * h.deriv(2)
          + (2.0 - zp * (2.0 + theta)) * h.deriv(1)
          + theta * (Observable.constant(h(0.0)) - h))
    return _expect_beta(g * ah, theta)
