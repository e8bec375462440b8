# cython: language_level=3
"""Compiled event loop, the bit-exact twin of ``_kernel_py.KernelPy``.

Every uniform draw, every floating-point operation and their order are
identical to the pure-Python kernel, so the two backends produce
bit-for-bit equal trajectories from the same bit generator.  See the
decomposition proof in ``_kernel_py``; it applies verbatim here.
"""
from libc.math cimport log1p

import numpy as np

cdef long CHUNK = 4096
cdef int MAX_REJECT = 64


class Frozen(RuntimeError):
    pass


cdef class KernelCy:

    cdef public object rng
    cdef public long L, N
    cdef public double d, a
    cdef public long long sumsq
    cdef public double time
    cdef double _tcomp
    cdef public long long events
    cdef long _mask, _pos
    cdef double[::1] _buf
    cdef object _buf_arr
    cdef long long[::1] occ
    cdef object _occ_arr
    cdef double[::1] fr
    cdef double[::1] fo
    cdef object _fr_arr, _fo_arr

    @property
    def backend(self):
        return "cython"

    def __init__(self, occupations, double d, rng):
        occ_arr = np.asarray(occupations, dtype=np.int64).copy()
        self._occ_arr = occ_arr
        self.occ = occ_arr
        self.L = occ_arr.size
        self.N = int(occ_arr.sum())
        self.d = d
        self.a = d * (self.L - 1)
        self.sumsq = int((occ_arr * occ_arr).sum())
        self.time = 0.0
        self._tcomp = 0.0
        self.events = 0
        self.rng = rng
        self._buf_arr = rng.random(CHUNK)
        self._buf = self._buf_arr
        self._pos = 0
        cdef long m = 1
        while (m << 1) <= self.L:
            m <<= 1
        self._mask = m
        self._fr_arr = np.zeros(self.L + 1)
        self._fo_arr = np.zeros(self.L + 1)
        self.fr = self._fr_arr
        self.fo = self._fo_arr
        cdef long x
        cdef double w
        for x in range(self.L):
            w = self.occ[x] * ((self.a + self.N) - <double>self.occ[x])
            if w != 0.0:
                self._fen_add_fr(x, w)
            if self.occ[x] != 0:
                self._fen_add_fo(x, <double>self.occ[x])

    # expose state like the Python kernel

    @property
    def occupations(self):
        return self._occ_arr

    cdef inline double _u(self):
        if self._pos == CHUNK:
            self._buf_arr = self.rng.random(CHUNK)
            self._buf = self._buf_arr
            self._pos = 0
        cdef double u = self._buf[self._pos]
        self._pos += 1
        return u

    cdef inline void _fen_add_fr(self, long i, double delta):
        i += 1
        while i <= self.L:
            self.fr[i] += delta
            i += i & (-i)

    cdef inline void _fen_add_fo(self, long i, double delta):
        i += 1
        while i <= self.L:
            self.fo[i] += delta
            i += i & (-i)

    cdef inline long _fen_find_fr(self, double target):
        cdef long idx = 0, bit = self._mask, nxt
        while bit != 0:
            nxt = idx + bit
            if nxt <= self.L and self.fr[nxt] < target:
                idx = nxt
                target -= self.fr[nxt]
            bit >>= 1
        return idx

    cdef inline long _fen_find_fo(self, double target):
        cdef long idx = 0, bit = self._mask, nxt
        while bit != 0:
            nxt = idx + bit
            if nxt <= self.L and self.fo[nxt] < target:
                idx = nxt
                target -= self.fo[nxt]
            bit >>= 1
        return idx

    cpdef double total_rate(self):
        return self.d * self.N * (self.L - 1) + <double>(
            <long long>self.N * <long long>self.N - self.sumsq)

    cdef inline double _site_weight(self, long x):
        return self.occ[x] * ((self.a + self.N) - <double>self.occ[x])

    cdef long _fix_occupied(self, long x):
        while x > 0 and self.occ[x] == 0:
            x -= 1
        while self.occ[x] == 0:
            x += 1
        return x

    cdef long _sample_source(self):
        cdef double u = self._u() * self.total_rate()
        cdef long x = self._fen_find_fr(u)
        if x >= self.L:
            x = self.L - 1
        if self.occ[x] == 0:
            x = self._fix_occupied(x)
        return x

    cdef long _sample_dest(self, long x):
        cdef long long nx = self.occ[x]
        cdef long long rest = self.N - nx
        cdef double u = self._u()
        cdef long idx, y, yy
        cdef double t
        cdef int k
        if u * (self.a + <double>rest) < self.a or rest == 0:
            idx = <long>(self._u() * (self.L - 1))
            if idx >= self.L - 1:
                idx = self.L - 2
            return idx if idx < x else idx + 1
        if 2 * nx <= self.N:
            for k in range(MAX_REJECT):
                t = self._u() * self.N
                y = self._fen_find_fo(t)
                if y >= self.L:
                    y = self.L - 1
                if self.occ[y] == 0:
                    y = self._fix_occupied(y)
                if y != x:
                    return y
        self._fen_add_fo(x, -<double>nx)
        t = self._u() * <double>rest
        y = self._fen_find_fo(t)
        if y >= self.L:
            y = self.L - 1
        if self.occ[y] == 0 or y == x:
            yy = y
            while yy > 0 and (self.occ[yy] == 0 or yy == x):
                yy -= 1
            if self.occ[yy] == 0 or yy == x:
                yy = y
                while self.occ[yy] == 0 or yy == x:
                    yy += 1
            y = yy
        self._fen_add_fo(x, <double>nx)
        return y

    def sample_move(self):
        cdef long x = self._sample_source()
        cdef long y = self._sample_dest(x)
        return x, y

    cdef void _apply(self, long x, long y):
        cdef double wx0 = self._site_weight(x)
        cdef double wy0 = self._site_weight(y)
        self.sumsq += 2 * (self.occ[y] - self.occ[x]) + 2
        self.occ[x] -= 1
        self.occ[y] += 1
        self._fen_add_fr(x, self._site_weight(x) - wx0)
        self._fen_add_fr(y, self._site_weight(y) - wy0)
        self._fen_add_fo(x, -1.0)
        self._fen_add_fo(y, 1.0)
        self.events += 1

    cdef inline void _advance_clock(self, double w):
        cdef double yk = w - self._tcomp
        cdef double s = self.time + yk
        self._tcomp = (s - self.time) - yk
        self.time = s

    def step(self):
        cdef double rate = self.total_rate()
        if rate <= 0.0:
            raise Frozen("total rate is zero")
        cdef double wait = -log1p(-self._u()) / rate
        self._advance_clock(wait)
        cdef long x = self._sample_source()
        cdef long y = self._sample_dest(x)
        self._apply(x, y)
        return x, y, wait

    cpdef advance_to(self, double t_target):
        cdef double rate, wait
        cdef long x, y
        if t_target < self.time:
            raise ValueError("t_target is before the current clock time")
        while True:
            rate = self.total_rate()
            if rate <= 0.0:
                raise Frozen("total rate is zero")
            wait = -log1p(-self._u()) / rate
            if self.time + wait > t_target:
                self.time = t_target
                self._tcomp = 0.0
                return
            self._advance_clock(wait)
            x = self._sample_source()
            y = self._sample_dest(x)
            self._apply(x, y)
