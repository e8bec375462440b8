"""Exact generator evaluation: the discrete particle-system generator on
cylindrical test functions, the macroscopic and mesoscopic limit
generators, the ranked-simplex (Poisson-Dirichlet) generator on moment
monomials, and the identity/convergence harnesses built on them.

A cylindrical function is a linear combination of products
H(mu) = mu(h_1) ... mu(h_n) of integrals against observables.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .observables import ANY, MACRO, MESO, DomainMismatch, Observable
from .states import (Configuration, DiscreteMeasure, Partition,
                     embed_macroscopic, embed_mesoscopic, integrate,
                     partition_to_measure)

INF = math.inf


class CylindricalFunction:
    """Linear combination of products of single-integral factors.

    terms: sequence of (coefficient, tuple of Observables).
    """

    def __init__(self, terms):
        self.terms = tuple((float(c), tuple(fs)) for c, fs in terms)
        if not self.terms or any(len(fs) < 1 for _, fs in self.terms):
            raise ValueError("need at least one term with at least one factor")

    @staticmethod
    def product(*factors):
        return CylindricalFunction([(1.0, factors)])

    @staticmethod
    def monomial(h, power=1):
        return CylindricalFunction([(1.0, (h,) * power)])

    def __add__(self, other):
        return CylindricalFunction(self.terms + other.terms)

    def __mul__(self, scalar):
        return CylindricalFunction([(c * scalar, fs) for c, fs in self.terms])

    __rmul__ = __mul__

    def __call__(self, mu):
        total = 0.0
        for c, factors in self.terms:
            prod = c
            for h in factors:
                prod *= integrate(mu, h)
            total += prod
        return total


def B_operator(h):
    """Size-biasing operator Bh = h + z h' = (zh)'."""
    return h.biased()


# ---------------------------------------------------------------------------
# discrete generator


def _factor_values(factors, locs, weights):
    """Per-factor integrals sum_i w_i h(z_i) for shared atoms."""
    return [float(sum(w * h(z) for z, w in zip(locs, weights))) for h in factors]


def discrete_generator_apply(config, H, d, embedding, d_embed=None):
    """Exact generator value  sum_{x != y} eta_x (d + eta_y) [H(mu') - H(mu)].

    Sites are grouped by occupation value: all ordered pairs (x, y) with
    (eta_x, eta_y) = (u, v) produce the same post-move measure, so the
    double sum costs O(K^2) for K distinct occupation values.  The
    grouped value is tested against the naive O(L^2) oracle.

    embedding: MACRO (atom at eta/N) or MESO (atom at d_embed*L*eta/N;
    d_embed defaults to d).
    """
    occ = config.occupations
    L, N = config.sites, config.particles
    if embedding == MACRO:
        scale = 1.0 / N
    elif embedding == MESO:
        dd = d if d_embed is None else d_embed
        scale = dd * L / N
    else:
        raise ValueError("embedding must be MACRO or MESO")

    values, counts = np.unique(occ, return_counts=True)
    count = dict(zip(values.tolist(), counts.tolist()))

    def loc(u):
        return scale * u

    total = 0.0
    for c, factors in H.terms:
        # base integrals over the pre-move measure
        base = [
            float(sum(cnt * (u / N) * h(loc(u))
                      for u, cnt in count.items() if u > 0))
            for h in factors
        ]
        base_prod = c
        for s in base:
            base_prod *= s
        for u, cu in count.items():
            if u == 0:
                continue
            for v, cv in count.items():
                npairs = cu * cv - (cu if u == v else 0)
                if npairs == 0:
                    continue
                rate = u * (d + v)
                # per-factor increment of mu(h) for the move u -> u-1, v -> v+1
                prod = c
                for h, s in zip(factors, base):
                    delta = ((u - 1) * h(loc(u - 1)) - u * h(loc(u))
                             + (v + 1) * h(loc(v + 1)) - v * h(loc(v))) / N
                    prod *= s + delta
                total += npairs * rate * (prod - base_prod)
    return total


def discrete_generator_naive(config, H, d, embedding, d_embed=None):
    """O(L^2) oracle: apply every move explicitly."""
    L = config.sites
    occ = config.occupations

    def embed(cfg):
        if embedding == MACRO:
            return embed_macroscopic(cfg)
        return embed_mesoscopic(cfg, d if d_embed is None else d_embed)

    base = H(embed(config))
    total = 0.0
    for x in range(L):
        if occ[x] == 0:
            continue
        for y in range(L):
            if y == x:
                continue
            moved = config.copy()
            moved.move(x, y)
            total += occ[x] * (d + occ[y]) * (H(embed(moved)) - base)
    return total


# ---------------------------------------------------------------------------
# limit generators


def mutation_macro(h, z, theta):
    """z(1-z)h'' + (2 - z(2+theta))h' + theta(h(0) - h(z))."""
    return (z * (1.0 - z) * h(z, 2) + (2.0 - z * (2.0 + theta)) * h(z, 1)
            + theta * (h(0.0) - h(z)))


def mutation_meso(h, z):
    """z h'' + (2 - z)h' + (h(0) - h(z)); at infinity only h(0) - h(inf)."""
    if math.isinf(z):
        return h(0.0) - h(z)
    return z * h(z, 2) + (2.0 - z) * h(z, 1) + (h(0.0) - h(z))


def _mutated_integral(mu, h, mutation):
    return float(sum(w * mutation(z) for z, w in zip(mu.locations, mu.weights)))


def limit_generator_macro(mu, H, theta):
    """Macroscopic limit generator: pairwise interaction of size-biased
    factors plus single-factor mutation terms."""
    if mu.domain != MACRO:
        raise DomainMismatch("limit_generator_macro needs a MACRO measure")
    total = 0.0
    for c, factors in H.terms:
        vals = [integrate(mu, h) for h in factors]
        n = len(factors)

        def rest(skip):
            prod = 1.0
            for j, s in enumerate(vals):
                if j not in skip:
                    prod *= s
            return prod

        term = 0.0
        for k in range(n):
            term += _mutated_integral(
                mu, factors[k], lambda z, h=factors[k]: mutation_macro(h, z, theta)
            ) * rest({k})
        for k in range(n):
            bk = factors[k].biased()
            for l in range(k + 1, n):
                bl = factors[l].biased()
                cov = integrate(mu, bk * bl) - integrate(mu, bk) * integrate(mu, bl)
                term += 2.0 * cov * rest({k, l})
        total += c * term
    return total


def limit_generator_meso(mu, H):
    """Mesoscopic limit generator: mutation terms only, no interaction."""
    if mu.domain != MESO:
        raise DomainMismatch("limit_generator_meso needs a MESO measure")
    total = 0.0
    for c, factors in H.terms:
        vals = [integrate(mu, h) for h in factors]
        term = 0.0
        for k, h in enumerate(factors):
            prod = 1.0
            for j, s in enumerate(vals):
                if j != k:
                    prod *= s
            term += _mutated_integral(mu, h, lambda z, hh=h: mutation_meso(hh, z)) * prod
        total += c * term
    return total


# ---------------------------------------------------------------------------
# ranked-simplex generator on moment monomials


def pd_phi(p, m):
    """phi_m(p) = sum_i p_i^m (phi_1 is identically 1 by convention)."""
    if m == 1:
        return 1.0
    return p.phi(m)


def pd_generator_phi(p, m, theta):
    """Generator applied to phi_m:  m(m-1)phi_{m-1} - m(m-1+theta)phi_m."""
    return m * (m - 1) * pd_phi(p, m - 1) - m * (m - 1 + theta) * pd_phi(p, m)


def pd_generator_monomial(p, powers, theta):
    """Generator applied to a product  prod_k phi_{m_k}  by the second-order
    product rule: single-factor terms plus the pairwise carre-du-champ
    2 m_k m_l (phi_{m_k + m_l - 1} - phi_{m_k} phi_{m_l})."""
    powers = list(powers)
    vals = [pd_phi(p, m) for m in powers]
    n = len(powers)

    def rest(skip):
        prod = 1.0
        for j, v in enumerate(vals):
            if j not in skip:
                prod *= v
        return prod

    total = 0.0
    for k, m in enumerate(powers):
        total += pd_generator_phi(p, m, theta) * rest({k})
    for k in range(n):
        for l in range(k + 1, n):
            mk, ml = powers[k], powers[l]
            cross = 2.0 * mk * ml * (pd_phi(p, mk + ml - 1) - vals[k] * vals[l])
            total += cross * rest({k, l})
    return total


def ek_identity_residual(p, h, theta):
    """Residual of the exact identity linking the measure-valued generator
    on mu^(p)(h) with the simplex generator plus the dust correction
    2 h'(0) (1 - sum p_i).  Must vanish to rounding accuracy."""
    H = CylindricalFunction.product(h)
    lhs = limit_generator_macro(partition_to_measure(p), H, theta)

    # simplex generator by direct partial derivatives of
    # f(p) = (1 - sum p_i) h(0) + sum_i p_i h(p_i)
    masses = p.masses
    bf = 0.0
    for pi in masses:
        d1 = -h(0.0) + h(pi) + pi * h(pi, 1)
        d2 = 2.0 * h(pi, 1) + pi * h(pi, 2)
        bf += pi * (1.0 - pi) * d2 - theta * pi * d1
    norm = sum(masses)
    return lhs - bf - 2.0 * h(0.0, 1) * (1.0 - norm)


# ---------------------------------------------------------------------------
# projections to classical diffusions


def jacobi_generator(h, z, theta):
    """z(1-z)h'' - theta z h'."""
    return z * (1.0 - z) * h(z, 2) - theta * z * h(z, 1)


def wf_generator(h, z, theta, grad=None, hess=None, eps=1e-5):
    """Simplex diffusion generator
       sum_ij z_i (delta_ij - z_j) d2h/dz_i dz_j
       + theta sum_{i>=1} z_i (dh/dz_0 - dh/dz_i),
    with gradient and Hessian supplied or taken by central differences."""
    z = np.asarray(z, dtype=float)
    if abs(z.sum() - 1.0) > 1e-9:
        raise ValueError("z must lie on the simplex")
    n = z.size

    if grad is None:
        def grad(x):
            g = np.zeros(n)
            for i in range(n):
                e = np.zeros(n)
                e[i] = eps
                g[i] = (h(x + e) - h(x - e)) / (2 * eps)
            return g
    if hess is None:
        def hess(x):
            Hm = np.zeros((n, n))
            for i in range(n):
                for j in range(n):
                    ei, ej = np.zeros(n), np.zeros(n)
                    ei[i], ej[j] = eps, eps
                    Hm[i, j] = (h(x + ei + ej) - h(x + ei - ej)
                                - h(x - ei + ej) + h(x - ei - ej)) / (4 * eps**2)
            return Hm

    g = np.asarray(grad(z), dtype=float)
    Hm = np.asarray(hess(z), dtype=float)
    diff = 0.0
    for i in range(n):
        for j in range(n):
            diff += z[i] * ((1.0 if i == j else 0.0) - z[j]) * Hm[i, j]
    drift = theta * sum(z[i] * (g[0] - g[i]) for i in range(1, n))
    return diff + drift


def fixed_site_residual(config, h, d):
    """|exact generator on h(eta_1/N)  -  Jacobi generator at eta_1/N|,
    with theta = dL.  Only moves touching site 1 change the argument."""
    occ = config.occupations
    L, N = config.sites, config.particles
    n1 = int(occ[0])
    z = n1 / N
    out_rate = n1 * (d * (L - 1) + N - n1)
    in_rate = (N - n1) * (d + n1)
    exact = (out_rate * (h((n1 - 1) / N) - h(z))
             + in_rate * (h((n1 + 1) / N) - h(z)))
    return abs(exact - jacobi_generator(h, z, d * L))


# ---------------------------------------------------------------------------
# large-mutation-rate scaling


def scale_measure(mu, theta):
    """Push a MACRO measure forward under z -> theta z (MESO result)."""
    if mu.domain != MACRO:
        raise DomainMismatch("scale_measure expects a MACRO measure")
    return DiscreteMeasure(mu.locations * theta, mu.weights, MESO)


def theta_limit_residual(mu, H, theta):
    """| (1/theta) L H_theta (mu)  -  G H (S_theta mu) |  where H_theta
    precomposes every factor with z -> theta z (symbolically, to avoid
    cancellation at large theta)."""
    H_theta = CylindricalFunction(
        [(c, tuple(h.scaled_arg(theta).with_domain(MACRO) for h in fs))
         for c, fs in H.terms])
    lhs = limit_generator_macro(mu, H_theta, theta) / theta
    rhs = limit_generator_meso(scale_measure(mu, theta), H)
    return abs(lhs - rhs)


# ---------------------------------------------------------------------------
# convergence reports


@dataclass(frozen=True)
class GeneratorReport:
    rows: tuple  # of (L, N, d, theta, test_id, error)

    def errors_by_L(self):
        out = {}
        for L, N, d, theta, tid, err in self.rows:
            out[L] = max(out.get(L, 0.0), err)
        return dict(sorted(out.items()))

    def to_csv(self):
        lines = ["L,N,d,theta,test_id,error"]
        for L, N, d, theta, tid, err in self.rows:
            lines.append(f"{L},{N},{float(d)!r},{float(theta)!r},{tid},{float(err)!r}")
        return "\n".join(lines) + "\n"


def condensed_config(L, N):
    occ = np.zeros(L, dtype=np.int64)
    occ[0] = N
    return Configuration(occ)


def dimer_config(L, N):
    occ = np.zeros(L, dtype=np.int64)
    occ[0] = N - N // 2
    occ[1] = N // 2
    return Configuration(occ)


def flat_config(L, N):
    base, extra = divmod(N, L)
    occ = np.full(L, base, dtype=np.int64)
    occ[:extra] += 1
    return Configuration(occ)


def zipf_config(L, N):
    """Occupations proportional to 1/rank over the first min(L, 32) sites."""
    k = min(L, 32)
    weights = 1.0 / np.arange(1, k + 1)
    occ = np.zeros(L, dtype=np.int64)
    occ[:k] = np.floor(weights / weights.sum() * N).astype(np.int64)
    leftover = N - int(occ.sum())
    occ[0] += leftover
    return Configuration(occ)


CONFIG_BATTERY = (
    ("condensed", condensed_config),
    ("dimer", dimer_config),
    ("flat", flat_config),
    ("zipf", zipf_config),
)


def _measure_builder(locations, weights):
    from .states import config_from_measure
    nu = DiscreteMeasure(locations, weights, MESO)

    def build(L, N, d):
        return config_from_measure(nu, L, N, d)

    return build


def meso_config_battery():
    """The same adversarial profiles, built at the mesoscopic cluster
    scale: macroscopic profiles degenerate under the mesoscopic
    embedding (their atoms escape every compact support), so the
    comparison is only informative on configurations whose embedded
    measures converge to a fixed limit."""
    zipf_w = np.array([1.0 / k for k in range(1, 5)])
    zipf_w = zipf_w / zipf_w.sum() * 0.8
    return (
        ("condensed", _measure_builder([2.0], [1.0])),
        ("dimer", _measure_builder([1.0, 3.0], [0.5, 0.5])),
        ("flat", lambda L, N, d: flat_config(L, N)),
        ("zipf", _measure_builder([3.0 / k for k in range(1, 5)] + [0.0],
                                  list(zipf_w) + [0.2])),
    )


def macro_observable_battery():
    z = Observable.polynomial([0.0, 1.0])
    z2 = Observable.polynomial([0.0, 0.0, 1.0])
    return (
        ("mu(z)", CylindricalFunction.product(z)),
        ("mu(z)^2", CylindricalFunction.monomial(z, 2)),
        ("mu(z2)", CylindricalFunction.product(z2)),
    )


def meso_observable_battery():
    """Windows with h'(0) = 0: the leading finite-size error of the
    mesoscopic comparison is the occupancy-step Taylor term h(step) ~
    step * h'(0), which approaches the asymptotic decay rate only from
    below; factors with vanishing first derivative expose the rate at
    the tested sizes."""
    w2 = Observable.window(2, 4.0, 5)
    w26 = Observable.window(2, 6.0, 5)
    return (
        ("win(2,4,5)", CylindricalFunction.product(w2)),
        ("win(2,4,5)^2", CylindricalFunction.monomial(w2, 2)),
        ("win(2,6,5)", CylindricalFunction.product(w26)),
    )


def convergence_report(mode, L_grid, rho=1.0, theta=1.0):
    """Max generator-approximation error per system size over the
    adversarial configuration battery.

    mode MACRO: d = theta/L, error |discrete H - limit H| at the
    macroscopic embedding.  mode MESO: d = L^{-1/2}, error
    |(1/dL) discrete H - limit H| at the mesoscopic embedding.
    """
    rows = []
    if mode == MACRO:
        obs = macro_observable_battery()
        configs = CONFIG_BATTERY
    elif mode == MESO:
        obs = meso_observable_battery()
        configs = meso_config_battery()
    else:
        raise ValueError("mode must be MACRO or MESO")
    for L in L_grid:
        N = max(1, int(round(rho * L)))
        d = theta / L if mode == MACRO else L ** -0.5
        th = d * L
        for cname, builder in configs:
            cfg = builder(L, N) if mode == MACRO else builder(L, N, d)
            for oname, H in obs:
                if mode == MACRO:
                    disc = discrete_generator_apply(cfg, H, d, MACRO)
                    lim = limit_generator_macro(embed_macroscopic(cfg), H, th)
                else:
                    disc = discrete_generator_apply(cfg, H, d, MESO) / (d * L)
                    lim = limit_generator_meso(embed_mesoscopic(cfg, d), H)
                rows.append((L, N, d, th, f"{cname}/{oname}", abs(disc - lim)))
    return GeneratorReport(tuple(rows))
