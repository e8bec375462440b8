"""Particle configurations, ranked-mass partitions, size-biased discrete
measures, and the exact maps between them.

The three state representations:

* ``Configuration`` -- occupation numbers of N particles on L sites.
* ``Partition``     -- ranked mass fractions in the Kingman simplex, with
  the unrepresented remainder stored explicitly as ``dust``.
* ``DiscreteMeasure`` -- weighted atoms on [0,1] (MACRO) or [0,inf] (MESO).

All constructive approximation routines (configurations realising a given
partition or mesoscopic measure) follow the explicit floor-and-spread
recipes and are deterministic.
"""
from __future__ import annotations

import io
import math
from dataclasses import dataclass, field

import numpy as np

from .observables import ANY, MACRO, MESO, DomainMismatch, Observable

INF = math.inf

MERGE_TOL = 1e-12       # atoms closer than this are merged
MULTIPLICITY_TOL = 1e-9  # weight/location integrality tolerance for E-membership


class NotInE(ValueError):
    """Measure is not the size-biased image of any partition."""


class TooManyDraws(ValueError):
    """Requested more size-biased draws than occupied sites."""


class TooManyParts(ValueError):
    """Partition has more positive masses than available sites."""


class DoesNotFit(ValueError):
    """Mesoscopic construction does not fit in the requested geometry."""


class Configuration:
    """Occupation numbers; the only mutable state object (single-owner)."""

    __slots__ = ("occupations", "particles", "sum_squares")

    def __init__(self, occupations):
        occ = np.asarray(occupations, dtype=np.int64)
        if occ.ndim != 1 or occ.size < 1:
            raise ValueError("occupations must be a non-empty 1-d sequence")
        if np.any(occ < 0):
            raise ValueError("occupations must be nonnegative")
        self.occupations = occ
        self.particles = int(occ.sum())
        self.sum_squares = int((occ * occ).sum())

    @property
    def sites(self):
        return self.occupations.size

    def move(self, x, y):
        """Apply one particle jump x -> y, maintaining cached sums."""
        occ = self.occupations
        if occ[x] <= 0:
            raise ValueError(f"site {x} is empty")
        self.sum_squares += 2 * int(occ[y] - occ[x]) + 2
        occ[x] -= 1
        occ[y] += 1

    def copy(self):
        return Configuration(self.occupations.copy())

    def __eq__(self, other):
        return isinstance(other, Configuration) and np.array_equal(
            self.occupations, other.occupations)

    def __repr__(self):
        return f"Configuration({self.occupations.tolist()})"

    def to_csv_row(self):
        return ",".join(str(int(n)) for n in self.occupations)

    @staticmethod
    def from_csv_row(row):
        return Configuration([int(tok) for tok in row.strip().split(",")])


@dataclass(frozen=True)
class Partition:
    """Element of the Kingman simplex: ranked masses plus explicit dust."""

    masses: tuple
    dust: float = 0.0

    def __post_init__(self):
        masses = tuple(float(m) for m in self.masses if m > 0.0)
        object.__setattr__(self, "masses", masses)
        for i in range(1, len(masses)):
            if masses[i] > masses[i - 1] + 1e-15:
                raise ValueError("partition masses must be nonincreasing")
        for i, m in enumerate(masses):
            if m > 1.0 + 1e-15 or m > 1.0 / (i + 1) + 1e-12:
                raise ValueError(f"mass {m} at rank {i + 1} exceeds 1/{i + 1}")
        if not (-1e-12 <= self.dust <= 1 + 1e-12):
            raise ValueError("dust must lie in [0, 1]")
        total = sum(masses) + self.dust
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"masses + dust = {total} != 1")

    def phi(self, m):
        """phi_m(p) = sum_i p_i^m."""
        return float(sum(p**m for p in self.masses))


class DiscreteMeasure:
    """Probability measure with finitely many atoms, in canonical form."""

    __slots__ = ("locations", "weights", "domain")

    def __init__(self, locations, weights, domain):
        loc = np.asarray(locations, dtype=float)
        w = np.asarray(weights, dtype=float)
        if loc.shape != w.shape or loc.ndim != 1:
            raise ValueError("locations and weights must be matching 1-d arrays")
        if np.any(w < -1e-15):
            raise ValueError("weights must be nonnegative")
        if domain not in (MACRO, MESO):
            raise ValueError("domain must be MACRO or MESO")
        if domain == MACRO and (np.any(np.isinf(loc)) or np.any(loc > 1 + 1e-12)):
            raise ValueError("MACRO measures live on [0, 1] without infinity")
        if np.any(loc < -1e-15):
            raise ValueError("locations must be nonnegative")
        order = np.argsort(loc)
        loc, w = loc[order], w[order]
        # merge atoms whose locations collide (exact rationals make most
        # collisions exact; the tolerance only guards float noise)
        keep_loc, keep_w = [], []
        for z, wt in zip(loc, w):
            if wt <= 0.0:
                continue
            if keep_loc and ((math.isinf(z) and math.isinf(keep_loc[-1]))
                             or (not math.isinf(z) and z - keep_loc[-1] <= MERGE_TOL)):
                keep_w[-1] += wt
            else:
                keep_loc.append(z)
                keep_w.append(wt)
        total = sum(keep_w)
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"total weight {total} != 1")
        self.locations = np.asarray(keep_loc)
        self.weights = np.asarray(keep_w)
        self.domain = domain

    def __eq__(self, other):
        return (isinstance(other, DiscreteMeasure) and self.domain == other.domain
                and np.array_equal(self.locations, other.locations)
                and np.array_equal(self.weights, other.weights))

    def __repr__(self):
        atoms = ", ".join(f"({z:g}, {w:g})" for z, w in zip(self.locations, self.weights))
        return f"DiscreteMeasure[{self.domain}]{{{atoms}}}"

    def mass_at(self, z):
        hit = np.isclose(self.locations, z, rtol=0.0, atol=MERGE_TOL) if not math.isinf(z) \
            else np.isinf(self.locations)
        return float(self.weights[hit].sum())

    def finite_mass(self):
        return float(self.weights[~np.isinf(self.locations)].sum())

    def to_csv(self, fh=None):
        buf = fh or io.StringIO()
        buf.write("location,weight\n")
        for z, w in zip(self.locations, self.weights):
            buf.write(f"{'inf' if math.isinf(z) else repr(float(z))},{float(w)!r}\n")
        if fh is None:
            return buf.getvalue()

    @staticmethod
    def from_csv(text, domain):
        locs, ws = [], []
        lines = text.strip().splitlines()
        for line in lines[1:]:
            z, w = line.split(",")
            locs.append(INF if z.strip() == "inf" else float(z))
            ws.append(float(w))
        return DiscreteMeasure(locs, ws, domain)


# ---------------------------------------------------------------------------
# embeddings


def embed_macroscopic(config):
    """Size-biased empirical measure: atom of weight eta_x/N at eta_x/N."""
    occ = config.occupations
    n = config.particles
    pos = occ[occ > 0]
    return DiscreteMeasure(pos / n, pos / n, MACRO)


def embed_mesoscopic(config, d):
    """Mesoscopic embedding: atom of weight eta_x/N at d*L*eta_x/N."""
    if d <= 0:
        raise ValueError("d must be positive")
    occ = config.occupations
    n, L = config.particles, config.sites
    pos = occ[occ > 0]
    return DiscreteMeasure(d * L * pos / n, pos / n, MESO)


def order_configuration(config):
    """Ranked mass fractions of a configuration (zeros dropped, dust 0)."""
    occ = np.sort(config.occupations[config.occupations > 0])[::-1]
    return Partition(tuple(occ / config.particles), 0.0)


def partition_to_measure(p):
    """mu^(p) = (1 - |p|_1) delta_0 + sum_i p_i delta_{p_i}."""
    locs = list(p.masses)
    ws = list(p.masses)
    if p.dust > 0:
        locs.append(0.0)
        ws.append(p.dust)
    if not locs:
        locs, ws = [0.0], [1.0]
    return DiscreteMeasure(locs, ws, MACRO)


def measure_to_partition(mu):
    """Inverse of partition_to_measure on its range E.

    An atom at z > 0 must carry weight k*z for an integer multiplicity k.
    """
    if mu.domain != MACRO:
        raise DomainMismatch("only MACRO measures embed partitions")
    masses = []
    dust = 0.0
    for z, w in zip(mu.locations, mu.weights):
        if z <= MERGE_TOL:
            dust += w
            continue
        k = w / z
        if abs(k - round(k)) > MULTIPLICITY_TOL or round(k) < 1:
            raise NotInE(f"atom ({z}, {w}): weight/location {k} is not a positive integer")
        masses.extend([z] * int(round(k)))
    masses.sort(reverse=True)
    return Partition(tuple(masses), dust)


# ---------------------------------------------------------------------------
# sampling and constructive builders


def size_biased_sample(config, k, rng):
    """k occupation numbers drawn by size bias without site replacement."""
    occ = config.occupations.astype(float).copy()
    occupied = int(np.count_nonzero(occ))
    if k > occupied:
        raise TooManyDraws(f"{k} draws requested but only {occupied} occupied sites")
    remaining = float(config.particles)
    out = []
    for _ in range(k):
        u = rng.random() * remaining
        x = int(np.searchsorted(np.cumsum(occ), u, side="right"))
        x = min(x, occ.size - 1)
        out.append(int(config.occupations[x]))
        remaining -= occ[x]
        occ[x] = 0.0
    return out


def config_from_partition(p, L, N):
    """Configuration approximating a partition: floors of p_i N, then the
    leftover spread as uniformly as possible over all sites."""
    if len(p.masses) > L:
        raise TooManyParts(f"{len(p.masses)} masses but only {L} sites")
    occ = np.zeros(L, dtype=np.int64)
    for i, m in enumerate(p.masses):
        occ[i] = int(math.floor(m * N))
    leftover = N - int(occ.sum())
    base, extra = divmod(leftover, L)
    occ += base
    occ[:extra] += 1
    return Configuration(occ)


def config_from_measure(nu, L, N, d):
    """Configuration whose mesoscopic embedding approximates a discrete
    measure: cluster sites of size floor((N/dL) p_i) per finite atom, one
    site for the atom at infinity, dust spread over the empty sites."""
    if nu.domain != MESO:
        raise DomainMismatch("config_from_measure needs a MESO measure")
    dL = d * L
    sizes, counts = [], []
    used_sites = 0
    used_particles = 0
    for z, w in zip(nu.locations, nu.weights):
        if z <= MERGE_TOL or math.isinf(z):
            continue
        k = int(math.floor(N / dL * z))
        if k < 1:
            raise DoesNotFit(f"atom at {z} needs cluster size >= 1 (got {k})")
        cnt = int(math.floor(w * N / k))
        if cnt < 1:
            raise DoesNotFit(
                f"atom at {z} (weight {w}) cannot hold one cluster of size {k}")
        sizes.append(k)
        counts.append(cnt)
        used_sites += cnt
        used_particles += k * cnt
    w_inf = nu.mass_at(INF)
    k_inf = int(math.floor(w_inf * N))
    if k_inf > 0:
        used_sites += 1
        used_particles += k_inf
    empties = L - used_sites
    if empties < 1 or used_particles > N:
        raise DoesNotFit("cluster construction exceeds the site or particle budget")
    occ = np.zeros(L, dtype=np.int64)
    pos = 0
    for k, cnt in zip(sizes, counts):
        occ[pos:pos + cnt] = k
        pos += cnt
    if k_inf > 0:
        occ[pos] = k_inf
        pos += 1
    leftover = N - used_particles
    base, extra = divmod(leftover, empties)
    occ[pos:] = base
    occ[pos:pos + extra] += 1
    return Configuration(occ)


def integrate(mu, h):
    """Finite sum  sum_i w_i h(z_i), with h's declared value at infinity."""
    if h.domain != ANY and h.domain != mu.domain:
        raise DomainMismatch(f"{h.domain} observable paired with {mu.domain} measure")
    total = 0.0
    for z, w in zip(mu.locations, mu.weights):
        total += w * h(z)
    return total


def exp1_quantile_measure(n_atoms=10_000):
    """Quantile discretization of Exp(1) as a MESO measure."""
    q = (np.arange(n_atoms) + 0.5) / n_atoms
    return DiscreteMeasure(-np.log1p(-q), np.full(n_atoms, 1.0 / n_atoms), MESO)
