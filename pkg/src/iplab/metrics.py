"""Distances between discrete measures and the quadratic-variation
estimator for the martingale part of measure-valued trajectories.

Measures are compared through their atoms.  On the MESO scale the
Wasserstein distance uses the compactified coordinate x/(1+x), so atoms
at infinity contribute finitely (they sit at 1).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .observables import DomainMismatch, MESO
from .states import DiscreteMeasure


class TooSparse(ValueError):
    """Trajectory sampled too coarsely for quadratic-variation estimation."""


@dataclass(frozen=True)
class ComparisonResult:
    metric: str
    value: float
    stderr: float
    n1: int
    n2: int

    def __post_init__(self):
        if self.value < 0:
            raise ValueError("metric value must be nonnegative")
        object.__setattr__(self, "value", float(self.value))
        object.__setattr__(self, "stderr", float(self.stderr))

    def to_csv_row(self):
        return f"{self.metric},{self.value!r},{self.stderr!r},{self.n1},{self.n2}"

    @staticmethod
    def csv_header():
        return "metric,value,stderr,n1,n2"


def _check_domains(mu, nu):
    if mu.domain != nu.domain:
        raise DomainMismatch(f"{mu.domain} vs {nu.domain}")


def _compact(x):
    """Map [0, inf] homeomorphically onto [0, 1]."""
    x = np.asarray(x, dtype=float)
    finite = np.where(np.isinf(x), 0.0, x)
    return np.where(np.isinf(x), 1.0, finite / (1.0 + finite))


def ks_distance(mu, nu):
    """Kolmogorov-Smirnov distance: sup CDF gap over all atom locations."""
    _check_domains(mu, nu)
    grid = np.union1d(mu.locations, nu.locations)
    cdf_mu = np.array([mu.weights[mu.locations <= g + 1e-15].sum() for g in grid])
    cdf_nu = np.array([nu.weights[nu.locations <= g + 1e-15].sum() for g in grid])
    return float(np.max(np.abs(cdf_mu - cdf_nu)))


def wasserstein1(mu, nu):
    """W1 distance by the sorted-CDF sweep; MESO uses x/(1+x)."""
    _check_domains(mu, nu)
    xm, xn = mu.locations, nu.locations
    if mu.domain == MESO:
        xm, xn = _compact(xm), _compact(xn)
    grid = np.union1d(xm, xn)
    if grid.size < 2:
        return 0.0
    cdf_mu = np.array([mu.weights[xm <= g + 1e-15].sum() for g in grid])
    cdf_nu = np.array([nu.weights[xn <= g + 1e-15].sum() for g in grid])
    gaps = np.abs(cdf_mu - cdf_nu)[:-1]
    return float(np.sum(gaps * np.diff(grid)))


def tv_binned(mu, nu, bins=64):
    """Binned total-variation estimate: half the L1 gap over shared bins.

    Bin edges are quantiles of the pooled finite atoms; mass at infinity
    gets its own bin.
    """
    _check_domains(mu, nu)
    fin_mu = ~np.isinf(mu.locations)
    fin_nu = ~np.isinf(nu.locations)
    loc = np.concatenate([mu.locations[fin_mu], nu.locations[fin_nu]])
    wgt = np.concatenate([mu.weights[fin_mu], nu.weights[fin_nu]])
    if loc.size == 0:
        edges = np.array([0.0, 1.0])
    else:
        order = np.argsort(loc)
        loc, wgt = loc[order], wgt[order]
        cum = np.cumsum(wgt) / wgt.sum()
        # weighted quantile edges of the pooled finite mass
        targets = np.linspace(0.0, 1.0, bins + 1)[1:-1]
        inner = loc[np.searchsorted(cum, targets, side="left").clip(0, loc.size - 1)]
        edges = np.unique(np.concatenate([[loc[0] - 1e-12], inner, [loc[-1] + 1e-12]]))
        if edges.size < 2:
            edges = np.array([loc[0] - 1e-12, loc[0] + 1e-12])
    hm, _ = np.histogram(mu.locations[fin_mu], bins=edges, weights=mu.weights[fin_mu])
    hn, _ = np.histogram(nu.locations[fin_nu], bins=edges, weights=nu.weights[fin_nu])
    inf_gap = abs((1.0 - mu.finite_mass()) - (1.0 - nu.finite_mass()))
    tv = 0.5 * (np.abs(hm - hn).sum() + inf_gap)
    return float(min(tv, 1.0))


def empirical_measure(samples, domain):
    """Uniform-weight DiscreteMeasure from a sample vector."""
    s = np.asarray(samples, dtype=float)
    return DiscreteMeasure(s, np.full(s.size, 1.0 / s.size), domain)


def qv_estimate(times, values, predicted_integrand, drift):
    """Realized vs predicted quadratic variation of a compensated path.

    times, values:       dense samples of t -> mu_t(h)
    predicted_integrand: samples of mu_t((Bh)^2) - mu_t(Bh)^2
    drift:               samples of mu_t(A_theta h), used to compensate
                         increments before squaring

    Returns (realized QV path over times, predicted trapezoid integral path).
    """
    t = np.asarray(times, dtype=float)
    v = np.asarray(values, dtype=float)
    g = np.asarray(predicted_integrand, dtype=float)
    a = np.asarray(drift, dtype=float)
    if t.size < 2:
        raise TooSparse("need at least two samples")
    dt = np.diff(t)
    span = t[-1] - t[0]
    if span > 0 and (t.size - 1) / span < 100:
        raise TooSparse("fewer than 100 samples per unit time")
    incr = np.diff(v) - a[:-1] * dt
    realized = np.concatenate([[0.0], np.cumsum(incr**2)])
    predicted = np.concatenate([[0.0], np.cumsum(0.5 * (g[:-1] + g[1:]) * dt)])
    return realized, predicted
