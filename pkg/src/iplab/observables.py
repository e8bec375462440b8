"""Test functions (observables) closed under products, sums, derivatives
and the size-biasing operator ``B h = h + z h' = (z h)'``.

Every observable is stored as a sum of truncated polynomial pieces

    h(z) = sum_k  poly_k(z) * 1[z <= cutoff_k]          (cutoff None = no cut)

plus a declared value at the point at infinity.  The three families used
throughout (plain polynomials on [0,1], compact-support polynomial windows
z^j (1 - z/a)^q on [0, a], and constants) are all of this form, and the
form is stable under every operation the generators need, so all symbolic
manipulation stays exact.
"""
from __future__ import annotations

import math
from fractions import Fraction

import numpy as np

MACRO = "macro"  # observables on [0, 1]
MESO = "meso"    # observables on [0, inf]
ANY = "any"      # constants: valid on either domain


class DomainMismatch(ValueError):
    """Observable paired with a measure on the wrong scale."""


def _poly_eval(coeffs, z):
    out = 0.0
    for c in reversed(coeffs):
        out = out * z + c
    return out


def _poly_mul(a, b):
    out = [0.0] * (len(a) + len(b) - 1)
    for i, ca in enumerate(a):
        if ca == 0.0:
            continue
        for j, cb in enumerate(b):
            out[i + j] += ca * cb
    return tuple(out)


def _poly_trim(coeffs):
    coeffs = list(coeffs)
    while len(coeffs) > 1 and coeffs[-1] == 0.0:
        coeffs.pop()
    return tuple(coeffs)


class Observable:
    """A C^3 test function with exact derivatives up to order 3."""

    __slots__ = ("terms", "at_inf", "domain")

    def __init__(self, terms, at_inf, domain):
        merged: dict = {}
        for coeffs, cutoff in terms:
            coeffs = _poly_trim(coeffs)
            if coeffs == (0.0,):
                continue
            prev = merged.get(cutoff)
            if prev is None:
                merged[cutoff] = list(coeffs)
            else:
                for i, c in enumerate(coeffs):
                    if i < len(prev):
                        prev[i] += c
                    else:
                        prev.append(c)
        self.terms = tuple(
            (_poly_trim(c), cut) for cut, c in sorted(
                merged.items(), key=lambda kv: math.inf if kv[0] is None else kv[0])
            if _poly_trim(c) != (0.0,)
        )
        self.at_inf = at_inf
        self.domain = domain

    # -- constructors -------------------------------------------------

    @staticmethod
    def polynomial(coeffs, domain=MACRO):
        """h(z) = sum coeffs[m] z^m, no cutoff."""
        at_inf = None
        c = _poly_trim(coeffs)
        if len(c) == 1:
            return Observable.constant(c[0])
        return Observable([(c, None)], at_inf, domain)

    @staticmethod
    def constant(c):
        return Observable([((float(c),), None)], float(c), ANY)

    @staticmethod
    def window(j, a, q):
        """h(z) = z^j (1 - z/a)^q on [0, a], 0 beyond and at infinity.

        q >= 4 keeps h in C^3 across the cutoff.
        """
        if q < 4:
            raise ValueError("window exponent q must be >= 4 for C^3 regularity")
        if a <= 0:
            raise ValueError("window width a must be positive")
        # exact binomial expansion of z^j (1 - z/a)^q
        af = Fraction(a).limit_denominator(10**12) if isinstance(a, float) else Fraction(a)
        coeffs = [Fraction(0)] * (j + q + 1)
        for k in range(q + 1):
            coeffs[j + k] = math.comb(q, k) * (-1) ** k / af**k
        return Observable([(tuple(float(c) for c in coeffs), float(a))], 0.0, MESO)

    # -- evaluation ---------------------------------------------------

    def __call__(self, z, order=0):
        """Evaluate the order-th derivative at z (scalar or ndarray)."""
        if np.ndim(z) > 0:
            return np.array([self(float(v), order) for v in np.asarray(z).ravel()]).reshape(np.shape(z))
        z = float(z)
        if math.isinf(z):
            if self.at_inf is None:
                raise DomainMismatch("observable has no declared value at infinity")
            return self.at_inf if order == 0 else 0.0
        val = 0.0
        for coeffs, cutoff in self.terms:
            if cutoff is not None and z > cutoff:
                continue
            c = coeffs
            for _ in range(order):
                c = tuple(i * c[i] for i in range(1, len(c))) or (0.0,)
            val += _poly_eval(c, z)
        return val

    def deriv(self, n=1):
        """n-th derivative as an Observable (cutoffs preserved)."""
        terms = []
        for coeffs, cutoff in self.terms:
            c = coeffs
            for _ in range(n):
                c = tuple(i * c[i] for i in range(1, len(c))) or (0.0,)
            terms.append((c, cutoff))
        return Observable(terms, 0.0 if self.at_inf is not None else None, self.domain)

    def biased(self):
        """B h = h + z h' = (z h)'; maps z^m to (m+1) z^m termwise."""
        terms = []
        for coeffs, cutoff in self.terms:
            terms.append((tuple((m + 1) * c for m, c in enumerate(coeffs)), cutoff))
        return Observable(terms, self.at_inf, self.domain)

    def scaled_arg(self, s):
        """h(s z), represented exactly (cutoffs shrink to cutoff/s)."""
        terms = []
        for coeffs, cutoff in self.terms:
            terms.append(
                (tuple(c * s**m for m, c in enumerate(coeffs)),
                 None if cutoff is None else cutoff / s)
            )
        return Observable(terms, self.at_inf, self.domain)

    def with_domain(self, domain):
        """Same function, re-tagged for the other scale (used when a
        symbolic argument rescaling moves it between scales)."""
        return Observable(self.terms, self.at_inf, domain)

    def integral(self, lo, hi):
        """Exact integral of h over [lo, hi] (finite interval)."""
        total = 0.0
        for coeffs, cutoff in self.terms:
            b = hi if cutoff is None else min(hi, cutoff)
            if b <= lo:
                continue
            anti = tuple(c / (m + 1) for m, c in enumerate(coeffs))
            total += _poly_eval((0.0,) + anti, b) - _poly_eval((0.0,) + anti, lo)
        return total

    # -- algebra ------------------------------------------------------

    def _join_domain(self, other):
        if self.domain == ANY:
            return other.domain
        if other.domain == ANY or other.domain == self.domain:
            return self.domain
        raise DomainMismatch(f"cannot combine {self.domain} and {other.domain} observables")

    def __add__(self, other):
        if not isinstance(other, Observable):
            other = Observable.constant(other)
        inf = None
        if self.at_inf is not None and other.at_inf is not None:
            inf = self.at_inf + other.at_inf
        return Observable(self.terms + other.terms, inf, self._join_domain(other))

    def __radd__(self, other):
        return self.__add__(other)

    def __sub__(self, other):
        if not isinstance(other, Observable):
            other = Observable.constant(other)
        return self + (other * -1.0)

    def __rsub__(self, other):
        return (self * -1.0) + other

    def __mul__(self, other):
        if not isinstance(other, Observable):
            s = float(other)
            inf = None if self.at_inf is None else self.at_inf * s
            return Observable(
                [(tuple(c * s for c in coeffs), cut) for coeffs, cut in self.terms],
                inf, self.domain)
        terms = []
        for ca, cuta in self.terms:
            for cb, cutb in other.terms:
                if cuta is None:
                    cut = cutb
                elif cutb is None:
                    cut = cuta
                else:
                    cut = min(cuta, cutb)
                terms.append((_poly_mul(ca, cb), cut))
        inf = None
        if self.at_inf is not None and other.at_inf is not None:
            inf = self.at_inf * other.at_inf
        return Observable(terms, inf, self._join_domain(other))

    def __rmul__(self, other):
        return self.__mul__(other)

    def __repr__(self):
        return f"Observable(terms={self.terms}, at_inf={self.at_inf}, domain={self.domain})"
