"""Labelled particle system and its Fleming-Viot limit structure.

Particles carry labels and live on sites 1..L.  Events are:

* pair events, one per ordered label pair (i, j) at rate 1: particle i
  adopts the site of particle j (a no-op when i = j or they share a site);
* walk events, one per (label, site) pair at rate d: particle i moves to
  the chosen site (a no-op when it is already there).

The total clock rate is N^2 + dLN including the no-op self events; the
unlabelled site-count projection then evolves exactly as the particle
system with pair rates eta_x (d + eta_y).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .generators import CylindricalFunction
from .observables import MACRO
from .states import Configuration, DiscreteMeasure, integrate


@dataclass
class LabelledState:
    positions: np.ndarray  # length N, entries in 1..L
    L: int

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=np.int64)
        if pos.ndim != 1 or pos.size < 1:
            raise ValueError("positions must be a non-empty vector")
        if np.any(pos < 1) or np.any(pos > self.L):
            raise ValueError("positions must lie in 1..L")
        self.positions = pos

    @property
    def N(self):
        return self.positions.size

    def iota(self):
        """Site occupation counts (the unlabelled projection)."""
        counts = np.bincount(self.positions - 1, minlength=self.L)
        return Configuration(counts)

    def copy(self):
        return LabelledState(self.positions.copy(), self.L)


def total_rate_labelled(state, d):
    N, L = state.N, state.L
    return float(N * N) + d * L * N


def labelled_step(state, d, rng):
    """One clock event (possibly a no-op); returns the waiting time."""
    N, L = state.N, state.L
    rate = total_rate_labelled(state, d)
    wait = rng.exponential(1.0 / rate)
    if rng.random() * rate < N * N:
        i = int(rng.integers(0, N))
        j = int(rng.integers(0, N))
        state.positions[i] = state.positions[j]
    else:
        i = int(rng.integers(0, N))
        x = int(rng.integers(1, L + 1))
        state.positions[i] = x
    return wait


def labelled_simulate(state, d, schedule, rng, record=None):
    """Snapshots of the labelled state (or record(state)) at scheduled times."""
    schedule = tuple(float(t) for t in schedule)
    state = state.copy()
    t = 0.0
    snaps = []
    events = 0
    for target in schedule:
        while True:
            rate = total_rate_labelled(state, d)
            wait = rng.exponential(1.0 / rate)
            if t + wait > target:
                t = target
                break
            t += wait
            # inline event (keeps the clock draw above exact)
            if rng.random() * rate < state.N * state.N:
                i = int(rng.integers(0, state.N))
                j = int(rng.integers(0, state.N))
                state.positions[i] = state.positions[j]
            else:
                i = int(rng.integers(0, state.N))
                x = int(rng.integers(1, state.L + 1))
                state.positions[i] = x
            events += 1
        snaps.append(state.copy() if record is None else record(state))
    return snaps, events


def type_embedding(state):
    """Empirical type measure: atom at x/L with weight (count at x)/N."""
    counts = np.bincount(state.positions - 1, minlength=state.L)
    occ = np.nonzero(counts)[0]
    return DiscreteMeasure((occ + 1) / state.L, counts[occ] / state.N, MACRO)


def type_average(h, L):
    """(1/L) sum_x h(x/L) over the discrete type space."""
    return float(np.mean([h((x + 1) / L) for x in range(L)]))


def mutation_fv(h, u, theta):
    """A_FV h(u) = theta * (integral of h over [0,1] - h(u))."""
    return theta * (h.integral(0.0, 1.0) - h(u))


def fv_generator(mu, H, theta):
    """Fleming-Viot generator on cylindrical functions: plain pairwise
    replacement interaction plus uniform-mutation terms."""
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
        for k, h in enumerate(factors):
            mut = float(sum(w * mutation_fv(h, z, theta)
                            for z, w in zip(mu.locations, mu.weights)))
            term += mut * rest({k})
        for k in range(n):
            for l in range(k + 1, n):
                cov = (integrate(mu, factors[k] * factors[l])
                       - vals[k] * vals[l])
                term += 2.0 * cov * rest({k, l})
        total += c * term
    return total


def labelled_generator_identity(state, h, d):
    """Exact pair (lhs, rhs) of the finite-system identity

        lhs = generator applied to sigma -> nu(h)(sigma)
        rhs = dL * ( (1/L) sum_x h(x/L)  -  nu(h)(sigma) )

    lhs sums rate * increment over every event by brute force; the pair
    events cancel by symmetry, which the identity encodes.
    """
    N, L = state.N, state.L
    pos = state.positions
    hv = np.array([h(x / L) for x in range(1, L + 1)])
    hp = hv[pos - 1]
    # pair events: particle i adopts the site of particle j, rate 1 each
    lhs = float(np.sum(hp[None, :] - hp[:, None])) / N
    # walk events: particle i moves to site x, rate d each
    lhs += d * float(np.sum(hv[None, :] - hp[:, None])) / N
    nu_h = float(hp.mean())
    rhs = d * L * (float(hv.mean()) - nu_h)
    return lhs, rhs


def labelled_generator_cylindrical(state, H, d):
    """Exact generator value on H(nu(sigma)), grouped by occupied sites.

    Pair events between sites a and b (counts n_a n_b ordered pairs)
    share the same post-event measure; walk events are grouped by
    (source site, target site).
    """
    N, L = state.N, state.L
    counts = np.bincount(state.positions - 1, minlength=L)
    occ_sites = np.nonzero(counts)[0]
    n_occ = counts[occ_sites].astype(float)
    total = 0.0
    for c, factors in H.terms:
        hv = [np.array([h(x / L) for x in range(1, L + 1)]) for h in factors]
        base = [float(np.dot(counts, v)) / N for v in hv]
        base_prod = c
        for s in base:
            base_prod *= s
        # pair events: site a (occupied) -> site b (occupied), n_a*n_b pairs
        npairs = np.outer(n_occ, n_occ)
        prod = np.full(npairs.shape, c)
        for v, s in zip(hv, base):
            va = v[occ_sites]
            delta = (va[None, :] - va[:, None]) / N
            prod = prod * (s + delta)
        total += float(np.sum(npairs * (prod - base_prod)))
        # walk events: site a (occupied) -> any site x, n_a particles, rate d
        nwalk = n_occ[:, None] * d
        prod = np.full((occ_sites.size, L), c)
        for v, s in zip(hv, base):
            va = v[occ_sites]
            delta = (v[None, :] - va[:, None]) / N
            prod = prod * (s + delta)
        total += float(np.sum(nwalk * (prod - base_prod)))
    return total


def fv_convergence_errors(L_grid, d_of_L, config_builders, H_builders, rng=None):
    """Max |labelled generator - FV generator| over a battery, per L.

    d_of_L: callable L -> d (theta = dL is typically held fixed);
    config_builders: (name, builder(L, N) -> Configuration) pairs; the
    labelled state places particles deterministically site by site.
    """
    out = {}
    for L in L_grid:
        N = L
        d = d_of_L(L)
        theta = d * L
        worst = 0.0
        for cname, builder in config_builders:
            cfg = builder(L, N)
            positions = np.repeat(np.arange(1, L + 1), cfg.occupations)
            state = LabelledState(positions, L)
            mu = type_embedding(state)
            for hname, H in H_builders:
                lhs = labelled_generator_cylindrical(state, H, d)
                rhs = fv_generator(mu, H, theta)
                worst = max(worst, abs(lhs - rhs))
        out[L] = worst
    return out
