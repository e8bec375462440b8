"""Reference curves, re-implemented locally and cross-checked against
golden CSVs emitted by the simulation CLI.

A disagreement beyond 1e-9 with a golden CSV is a hard error: it means
the two implementations of the closed forms have drifted apart.
"""
from __future__ import annotations

import math

import numpy as np
from scipy import stats


class GoldenMismatch(RuntimeError):
    pass


def exp1_density(z):
    """Unit exponential density e^{-z}."""
    return np.exp(-np.asarray(z, dtype=float))


def _ell(t):
    return 0.5 * (1.0 - math.exp(-t))


def transition_density(t, z, z0):
    """Density of the square-root diffusion started at z0 (no resets):
    scaled noncentral chi-squared with 4 degrees of freedom."""
    ell = _ell(t)
    lam = z0 * math.exp(-t) / ell
    return stats.ncx2.pdf(np.asarray(z) / ell, 4, lam) / ell


def closed_form_density(t, z, z0):
    """f(t, z | z0) = e^{-t} g(t, z | z0) + e^{-z / (2 l_t)}."""
    ell = _ell(t)
    reset = np.exp(-np.asarray(z, dtype=float) / (2.0 * ell))
    if math.isinf(z0):
        return reset
    return math.exp(-t) * transition_density(t, z, z0) + reset


def geometric_pmf(n, gamma):
    """gamma^{n-1} / (1 + gamma)^n on n = 1, 2, ..."""
    n = np.asarray(n, dtype=float)
    return gamma ** (n - 1) / (1.0 + gamma) ** n


def check_golden(name, golden_values, local_values, tol=1e-9):
    """Hard error if the local re-implementation drifts from the golden CSV."""
    g = np.asarray(golden_values, dtype=float)
    l = np.asarray(local_values, dtype=float)
    if g.shape != l.shape:
        raise GoldenMismatch(f"{name}: golden has {g.shape}, local has {l.shape}")
    gap = float(np.max(np.abs(g - l)))
    if gap > tol:
        raise GoldenMismatch(f"{name}: reference curves differ by {gap:.3e} > {tol}")
    return gap
