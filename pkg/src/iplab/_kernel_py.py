"""Pure-Python event loop for the complete-graph particle system.

This is the reference twin of the compiled kernel in ``_kernel_cy.pyx``:
both consume uniforms from identical 4096-long buffers filled by the
same bit generator and perform identical floating-point operations in
identical order, so trajectories are bit-for-bit equal across backends.

Rate structure (proved by the decomposition below and tested against
the naive pair law):

  the move x -> y happens at rate eta_x (d + eta_y).  Summing over y
  gives the per-source weight

      W_x = eta_x (a + N - eta_x),      a := d (L - 1),

  because sum_{y != x} (d + eta_y) = d(L-1) + N - eta_x.  Conditional
  on the source x, the destination law splits as the exact mixture

      P(y | x) = a/(a + N - eta_x) * Uniform{y != x}
               + (N - eta_x)/(a + N - eta_x) * [eta_y / (N - eta_x)],

  i.e. with the first probability pick a uniform site other than x,
  otherwise pick a uniformly random particle conditioned to not sit on
  x (size-biased by occupation).  Multiplying back:
  W_x/R * P(y|x) = eta_x (d + eta_y) / R for every ordered pair (x, y).

The size-biased branch draws a uniform particle and rejects y = x
(acceptance chance 1 - eta_x/N >= 1/2 while no site holds more than
half the particles); if a site does hold more than half, the kernel
temporarily zeroes it in the occupancy tree and samples exactly.
"""
from __future__ import annotations

import math

import numpy as np

CHUNK = 4096
MAX_REJECT = 64


class Frozen(RuntimeError):
    """Total event rate is zero (cannot happen for d > 0, L >= 2)."""


class KernelPy:
    """Event-driven sampler; owns the configuration state."""

    backend = "python"

    def __init__(self, occupations, d, rng):
        occ = np.asarray(occupations, dtype=np.int64).copy()
        self.occ = occ
        self.L = int(occ.size)
        self.N = int(occ.sum())
        self.d = float(d)
        self.a = float(d) * (self.L - 1)
        self.sumsq = int((occ * occ).sum())
        self.time = 0.0
        self._tcomp = 0.0  # Kahan compensation for the clock
        self.events = 0
        self.rng = rng
        self._buf = rng.random(CHUNK)
        self._pos = 0
        # highest power of two <= L, for Fenwick prefix descent
        self._mask = 1 << (self.L.bit_length() - 1)
        if self._mask > self.L:
            self._mask >>= 1
        # Fenwick trees (1-based): per-site rate weights and occupations
        self.fr = np.zeros(self.L + 1)
        self.fo = np.zeros(self.L + 1)
        for x in range(self.L):
            w = occ[x] * (self.a + self.N - occ[x])
            if w != 0.0:
                self._fen_add(self.fr, x, float(w))
            if occ[x] != 0:
                self._fen_add(self.fo, x, float(occ[x]))

    @property
    def occupations(self):
        return self.occ

    # -- uniform stream ------------------------------------------------

    def _u(self):
        if self._pos == CHUNK:
            self._buf = self.rng.random(CHUNK)
            self._pos = 0
        u = self._buf[self._pos]
        self._pos += 1
        return u

    # -- Fenwick primitives ---------------------------------------------

    def _fen_add(self, f, i, delta):
        i += 1
        while i <= self.L:
            f[i] += delta
            i += i & (-i)

    def _fen_find(self, f, target):
        """Largest prefix with cumulative weight <= target (0-based index)."""
        idx = 0
        bit = self._mask
        while bit != 0:
            nxt = idx + bit
            if nxt <= self.L and f[nxt] < target:
                idx = nxt
                target -= f[nxt]
            bit >>= 1
        return idx  # 0-based: idx sites have cumulative < target

    # -- rates ----------------------------------------------------------

    def total_rate(self):
        """d N (L-1) + N^2 - sum eta_x^2, exact (integer sum of squares)."""
        return self.d * self.N * (self.L - 1) + float(self.N * self.N - self.sumsq)

    def _site_weight(self, x):
        n = self.occ[x]
        return n * (self.a + self.N - n)

    # -- sampling -------------------------------------------------------

    def _fix_occupied(self, x):
        occ = self.occ
        while x > 0 and occ[x] == 0:
            x -= 1
        while occ[x] == 0:
            x += 1
        return x

    def _sample_source(self):
        u = self._u() * self.total_rate()
        x = self._fen_find(self.fr, u)
        if x >= self.L:
            x = self.L - 1
        if self.occ[x] == 0:
            x = self._fix_occupied(x)
        return x

    def _sample_dest(self, x):
        occ = self.occ
        nx = occ[x]
        rest = self.N - nx
        u = self._u()
        if u * (self.a + rest) < self.a or rest == 0:
            # diffusive branch: uniform site other than x
            idx = int(self._u() * (self.L - 1))
            if idx >= self.L - 1:
                idx = self.L - 2
            return idx if idx < x else idx + 1
        # size-biased branch: a uniform particle not on x
        if 2 * nx <= self.N:
            for _ in range(MAX_REJECT):
                t = self._u() * self.N
                y = self._fen_find(self.fo, t)
                if y >= self.L:
                    y = self.L - 1
                if occ[y] == 0:
                    y = self._fix_occupied(y)
                if y != x:
                    return y
        # exact exclusion: zero out x, draw, restore
        self._fen_add(self.fo, x, -float(nx))
        t = self._u() * rest
        y = self._fen_find(self.fo, t)
        if y >= self.L:
            y = self.L - 1
        if occ[y] == 0 or y == x:
            yy = y
            while yy > 0 and (occ[yy] == 0 or yy == x):
                yy -= 1
            if occ[yy] == 0 or yy == x:
                yy = y
                while occ[yy] == 0 or yy == x:
                    yy += 1
            y = yy
        self._fen_add(self.fo, x, float(nx))
        return y

    def sample_move(self):
        """Draw one (source, destination) pair without mutating state."""
        x = self._sample_source()
        y = self._sample_dest(x)
        return x, y

    # -- evolution -------------------------------------------------------

    def _apply(self, x, y):
        occ = self.occ
        wx0 = self._site_weight(x)
        wy0 = self._site_weight(y)
        self.sumsq += 2 * int(occ[y] - occ[x]) + 2
        occ[x] -= 1
        occ[y] += 1
        self._fen_add(self.fr, x, float(self._site_weight(x) - wx0))
        self._fen_add(self.fr, y, float(self._site_weight(y) - wy0))
        self._fen_add(self.fo, x, -1.0)
        self._fen_add(self.fo, y, 1.0)
        self.events += 1

    def _advance_clock(self, w):
        y = w - self._tcomp
        s = self.time + y
        self._tcomp = (s - self.time) - y
        self.time = s

    def step(self):
        """One event: returns (x, y, waiting time) and mutates state."""
        rate = self.total_rate()
        if rate <= 0.0:
            raise Frozen("total rate is zero")
        wait = -math.log1p(-self._u()) / rate
        self._advance_clock(wait)
        x, y = self.sample_move()
        self._apply(x, y)
        return x, y, wait

    def advance_to(self, t_target):
        """Run events until the clock would pass t_target, then stop there.

        The discarded residual waiting time is redrawn on the next call,
        which is exact by memorylessness of the exponential clock.
        """
        if t_target < self.time:
            raise ValueError("t_target is before the current clock time")
        while True:
            rate = self.total_rate()
            if rate <= 0.0:
                raise Frozen("total rate is zero")
            wait = -math.log1p(-self._u()) / rate
            if self.time + wait > t_target:
                self.time = t_target
                self._tcomp = 0.0
                return
            self._advance_clock(wait)
            x, y = self.sample_move()
            self._apply(x, y)
