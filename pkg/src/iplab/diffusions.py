"""Single-particle dual processes and related diffusions.

Covers the resetting jump-diffusions dual to the measure-valued limits
(the [0,1] process with mutation rate theta and the square-root process
on [0,inf) with unit resetting), the Jacobi and simplex (Wright-Fisher
type) projections, closed-form moment ODE systems, and the duality
residual between particle-system ensembles and dual ensembles.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

from .states import DiscreteMeasure, integrate

INF = math.inf


class SchemeMismatch(ValueError):
    """Exact transition sampling requested for a non-square-root spec."""


class NonpositiveTime(ValueError):
    pass


class MismatchedSetup(ValueError):
    """Duality comparison between incompatible ensembles."""


class BadSimplexPoint(ValueError):
    pass


EULER = "euler"
EXACT_CIR = "exact_cir"


@dataclass(frozen=True)
class JumpDiffusionSpec:
    drift: object          # callable z -> drift
    sigma2: object         # callable z -> squared diffusion coefficient
    reset_rate: float
    reset_target: float
    lo: float
    hi: float              # math.inf for the half-line
    exact_cir: bool = False  # exact transition sampling available


def macro_dual_spec(theta):
    """[0,1] dual: drift 2-(2+theta)z, sigma2 2z(1-z), resets at rate theta."""
    return JumpDiffusionSpec(
        drift=lambda z: 2.0 - (2.0 + theta) * z,
        sigma2=lambda z: 2.0 * z * (1.0 - z),
        reset_rate=float(theta), reset_target=0.0, lo=0.0, hi=1.0)


def meso_dual_spec():
    """[0,inf) dual: square-root diffusion, drift 2-z, sigma2 2z, unit resets."""
    return JumpDiffusionSpec(
        drift=lambda z: 2.0 - z,
        sigma2=lambda z: 2.0 * z,
        reset_rate=1.0, reset_target=0.0, lo=0.0, hi=INF, exact_cir=True)


def jacobi_spec(theta):
    return JumpDiffusionSpec(
        drift=lambda z: -theta * z,
        sigma2=lambda z: 2.0 * z * (1.0 - z),
        reset_rate=0.0, reset_target=0.0, lo=0.0, hi=1.0)


# ---------------------------------------------------------------------------
# path sampling


def _euler_segment(spec, z, duration, dt, rng):
    """Full-truncation Euler over one reset-free stretch."""
    steps = int(math.ceil(duration / dt))
    hi_clip = spec.hi if not math.isinf(spec.hi) else None
    for k in range(steps):
        h = min(dt, duration - k * dt)
        zbar = min(max(z, spec.lo), hi_clip) if hi_clip is not None else max(z, spec.lo)
        s2 = max(spec.sigma2(zbar), 0.0)
        z = z + spec.drift(zbar) * h + math.sqrt(s2 * h) * rng.standard_normal()
        z = max(z, spec.lo)
        if hi_clip is not None:
            z = min(z, hi_clip)
    return z


def _cir_transition(z, duration, rng):
    """Exact square-root transition: scaled noncentral chi-square(4),
    sampled as a Poisson mixture of central chi-squares (no special
    function inversion): K ~ Poisson(lambda/2), chi2(4+2K) = Gamma(2+K, 2)."""
    lu = 0.5 * -math.expm1(-duration)
    lam = z * math.exp(-duration) / lu
    k = rng.poisson(0.5 * lam) if lam > 0 else 0
    x = rng.gamma(2.0 + k, 2.0)
    return lu * x


def simulate_jump_diffusion(spec, z0, t, scheme, rng, dt=1e-3):
    """State at time t, starting from z0 (INF allowed with resetting)."""
    if t < 0:
        raise NonpositiveTime("t must be nonnegative")
    if scheme == EXACT_CIR and not spec.exact_cir:
        raise SchemeMismatch("exact transition only for the square-root spec")
    if z0 == INF and spec.reset_rate <= 0:
        raise ValueError("z0 = INF requires a positive reset rate")
    if t == 0:
        return z0

    z = z0
    remaining = t
    if z0 == INF:
        first = rng.exponential(1.0 / spec.reset_rate)
        if first >= remaining:
            return INF
        z = spec.reset_target
        remaining -= first

    # splice exact reset times into reset-free stretches
    while True:
        if spec.reset_rate > 0:
            next_reset = rng.exponential(1.0 / spec.reset_rate)
        else:
            next_reset = INF
        stretch = min(next_reset, remaining)
        if stretch > 0:
            if scheme == EXACT_CIR:
                z = _cir_transition(z, stretch, rng)
            elif scheme == EULER:
                z = _euler_segment(spec, z, stretch, dt, rng)
            else:
                raise SchemeMismatch(f"unknown scheme {scheme!r}")
        if next_reset >= remaining:
            return z
        z = spec.reset_target
        remaining -= next_reset


@dataclass(frozen=True)
class EnsembleLaw:
    states: np.ndarray
    time: float
    seed: object

    def finite_fraction(self):
        return float(np.mean(~np.isinf(self.states)))

    def to_measure(self, domain):
        s = self.states
        return DiscreteMeasure(s, np.full(s.size, 1.0 / s.size), domain)


def ensemble_law(spec, initial_law, t, replicas, scheme, rng, dt=1e-3):
    """i.i.d. replicas with initial states drawn from a discrete law."""
    idx = rng.choice(initial_law.locations.size, size=replicas,
                     p=initial_law.weights / initial_law.weights.sum())
    starts = initial_law.locations[idx]
    states = np.array([
        simulate_jump_diffusion(spec, float(z0), t, scheme, rng, dt=dt)
        for z0 in starts
    ])
    return EnsembleLaw(states, float(t), None)


# ---------------------------------------------------------------------------
# duality


def bootstrap_stderr(values, rng, n_boot=300):
    v = np.asarray(values, dtype=float)
    means = np.array([
        v[rng.integers(0, v.size, v.size)].mean() for _ in range(n_boot)
    ])
    return float(means.std(ddof=1))


def duality_residual(ip_measures, dual_states, h, rng=None, n_boot=300):
    """|mean over particle replicas of mu_t(h)  -  mean of h(dual state)|
    plus a bootstrap standard error of the difference.

    ip_measures: per-replica embedded measures at a common time;
    dual_states: per-replica dual process states at the matched time.
    """
    if len(ip_measures) == 0 or len(dual_states) == 0:
        raise MismatchedSetup("both ensembles must be nonempty")
    ip_vals = np.array([integrate(m, h) for m in ip_measures])
    dual_vals = np.array([h(z) for z in np.asarray(dual_states, dtype=float)])
    resid = abs(ip_vals.mean() - dual_vals.mean())
    if rng is None:
        rng = np.random.default_rng(0)
    se = math.hypot(bootstrap_stderr(ip_vals, rng, n_boot),
                    bootstrap_stderr(dual_vals, rng, n_boot))
    return resid, se


def product_duality_residual(pooled_measure, dual_states, h, n, rng=None,
                             n_boot=300):
    """Product form: pooled mu_t(h)^n against the mean of products of n
    independent dual copies (consecutive blocks of the state vector)."""
    lhs = integrate(pooled_measure, h) ** n
    states = np.asarray(dual_states, dtype=float)
    m = states.size // n
    blocks = states[: m * n].reshape(m, n)
    prods = np.prod(np.vectorize(h)(blocks), axis=1)
    if rng is None:
        rng = np.random.default_rng(0)
    return abs(lhs - prods.mean()), bootstrap_stderr(prods, rng, n_boot)


# ---------------------------------------------------------------------------
# moment ODE systems


def macro_mean(theta, m0, t):
    """m(t) = 1/(1+theta) + (m0 - 1/(1+theta)) e^{-2(1+theta)t}."""
    mstar = 1.0 / (1.0 + theta)
    return mstar + (m0 - mstar) * math.exp(-2.0 * (1.0 + theta) * t)


def pd_moments(theta, m_max, t, init):
    """E[phi_m](t) for m = 2..m_max from the triangular linear system
    d/dt E_m = m(m-1) E_{m-1} - m(m-1+theta) E_m  with E_1 = 1.

    init: initial values (E_2(0), ..., E_{m_max}(0)).
    Solved exactly by the matrix exponential of the augmented system.
    """
    if m_max < 2:
        raise ValueError("m_max must be at least 2")
    init = np.asarray(init, dtype=float)
    if init.size != m_max - 1:
        raise ValueError("init must list E_2(0)..E_{m_max}(0)")
    n = m_max  # states: [E_1 == 1, E_2, ..., E_m_max]
    A = np.zeros((n, n))
    for m in range(2, m_max + 1):
        i = m - 1
        A[i, i - 1] = m * (m - 1)
        A[i, i] = -m * (m - 1 + theta)
    y0 = np.concatenate([[1.0], init])
    y = expm(A * t) @ y0
    return y[1:]


def pd_stationary_moment(theta, m):
    """E[phi_m] at stationarity: (m-1)! Gamma(theta+1) / Gamma(theta+m)."""
    return math.exp(math.lgamma(m) + math.lgamma(theta + 1.0)
                    - math.lgamma(theta + m))


def mass_solution(alpha0, t):
    """alpha(t) = 1 - (1 - alpha0) e^{-t}."""
    return 1.0 - (1.0 - alpha0) * math.exp(-t)


def moment_ode_solve(system, t, **kw):
    """Dispatcher: system in {'MACRO_MEAN', 'PD_MOMENTS', 'MASS'}."""
    if t < 0:
        raise NonpositiveTime("t must be nonnegative")
    if system == "MACRO_MEAN":
        return macro_mean(kw["theta"], kw["m0"], t)
    if system == "PD_MOMENTS":
        return pd_moments(kw["theta"], kw["m_max"], t, kw["init"])
    if system == "MASS":
        return mass_solution(kw["alpha0"], t)
    raise ValueError(f"unknown system {system!r}")


# ---------------------------------------------------------------------------
# simplex and Jacobi diffusions


def simulate_wright_fisher(n, theta, z0, t, dt, rng):
    """Euler scheme on the (n+1)-simplex with diffusion matrix
    a_ij = 2 z_i (delta_ij - z_j) (noise via the square-root
    factorization diag(sqrt z)(I - sqrt z sqrt z^T)) and mutation drift
    toward coordinate 0; renormalized to the simplex each step."""
    z = np.asarray(z0, dtype=float)
    if z.size != n + 1 or np.any(z < -1e-12) or abs(z.sum() - 1.0) > 1e-9:
        raise BadSimplexPoint("z0 must be a probability vector of length n+1")
    z = np.maximum(z, 0.0)
    z /= z.sum()
    steps = int(math.ceil(t / dt))
    for k in range(steps):
        h = min(dt, t - k * dt)
        s = np.sqrt(z)
        xi = rng.standard_normal(n + 1)
        noise = math.sqrt(2.0 * h) * (s * (xi - s * np.dot(s, xi)))
        drift = np.empty(n + 1)
        drift[0] = theta * (1.0 - z[0])
        drift[1:] = -theta * z[1:]
        z = z + drift * h + noise
        z = np.maximum(z, 0.0)
        total = z.sum()
        if total <= 0:
            z = np.zeros(n + 1)
            z[0] = 1.0
        else:
            z /= total
    return z


def simulate_jacobi(theta, z0, t, dt, rng):
    """Euler scheme for z(1-z)h'' - theta z h'; exact absorption at 0."""
    if not 0.0 <= z0 <= 1.0:
        raise BadSimplexPoint("z0 must lie in [0, 1]")
    z = float(z0)
    steps = int(math.ceil(t / dt))
    for k in range(steps):
        if z <= 0.0:
            return 0.0
        h = min(dt, t - k * dt)
        zbar = min(max(z, 0.0), 1.0)
        z = (z - theta * zbar * h
             + math.sqrt(max(2.0 * zbar * (1.0 - zbar), 0.0) * h)
             * rng.standard_normal())
        if z <= 0.0:
            return 0.0
        z = min(z, 1.0)
    return z
