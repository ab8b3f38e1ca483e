"""Exact scalar arithmetic for the geometric core.

Everything downstream (predicates, geodesics, functionals) is built on three
representations:

* ``Fraction`` for all coordinates and all exactly-known quantities;
* ``Interval`` -- a pair of rational endpoints certified to enclose a real
  value, used wherever square roots force us off the rationals;
* ``SqrtSum`` -- an exact symbolic sum ``sum_i c_i * sqrt(m_i)`` with rational
  coefficients and integer radicands, used for lengths of polylines.  Sums of
  square roots of distinct squarefree integers over Q are linearly
  independent, so a canonicalised nonzero ``SqrtSum`` is never numerically
  zero and sign queries terminate by enclosure refinement.

Radicands are canonicalised by pulling out square factors found by trial
division (plus a perfect-square check); a Pollard rho step is attempted only
when two values look tied at very high precision, which in practice only
happens for small, fully factorable radicands.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import gcd, isqrt
from typing import Iterable

Q = Fraction

# Trial division bound: radicands produced by test-scale coordinates factor
# completely below this, so exact tie detection never needs Pollard rho there.
_TRIAL_BOUND = 100_000
# Construction-time canonicalisation only strips small square factors; full
# factoring runs lazily when a sign query stays undecided at high precision.
_FAST_TRIAL_BOUND = 256
_ENCLOSURE_BITS_LADDER = (64, 128, 256, 512, 1024)


def fr(x: int | str | Fraction) -> Fraction:
    """Coerce to Fraction; floats are rejected to keep exactness explicit."""
    if isinstance(x, float):
        raise TypeError("floats are not allowed in the exact core; use Fraction")
    return Fraction(x)


def sqrt_floor_ceil(x: Fraction, bits: int) -> tuple[Fraction, Fraction]:
    """Rational enclosure [lo, hi] of sqrt(x) with hi - lo <= 2**(1-bits)."""
    if x < 0:
        raise ValueError("sqrt of negative rational")
    if x == 0:
        return Q(0), Q(0)
    scale = 1 << bits
    n = isqrt((x.numerator * scale * scale) // x.denominator)
    lo = Q(n, scale)
    hi = Q(n + 2, scale)
    # Tighten: (n+1)/scale is an upper bound iff (n+1)^2 >= x*scale^2.
    if (n + 1) * (n + 1) * x.denominator >= x.numerator * scale * scale:
        hi = Q(n + 1, scale)
    return lo, hi


# ---------------------------------------------------------------------------
# intervals
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Interval:
    """Closed rational interval certified to contain a real value."""

    lo: Fraction
    hi: Fraction

    def __post_init__(self) -> None:
        if self.lo > self.hi:
            raise ValueError(f"inverted interval [{self.lo}, {self.hi}]")

    @staticmethod
    def exact(x: Fraction) -> "Interval":
        x = fr(x)
        return Interval(x, x)

    @staticmethod
    def sqrt_of(x: Fraction, bits: int = 80) -> "Interval":
        lo, hi = sqrt_floor_ceil(x, bits)
        return Interval(lo, hi)

    @property
    def width(self) -> Fraction:
        return self.hi - self.lo

    @property
    def mid(self) -> Fraction:
        return (self.lo + self.hi) / 2

    def __add__(self, other: "Interval | Fraction | int") -> "Interval":
        if isinstance(other, Interval):
            return Interval(self.lo + other.lo, self.hi + other.hi)
        other = fr(other)
        return Interval(self.lo + other, self.hi + other)

    __radd__ = __add__

    def __neg__(self) -> "Interval":
        return Interval(-self.hi, -self.lo)

    def __sub__(self, other: "Interval | Fraction | int") -> "Interval":
        return self + (-other if isinstance(other, Interval) else -fr(other))

    def __mul__(self, other: "Interval | Fraction | int") -> "Interval":
        if isinstance(other, Interval):
            products = (
                self.lo * other.lo,
                self.lo * other.hi,
                self.hi * other.lo,
                self.hi * other.hi,
            )
            return Interval(min(products), max(products))
        other = fr(other)
        if other >= 0:
            return Interval(self.lo * other, self.hi * other)
        return Interval(self.hi * other, self.lo * other)

    __rmul__ = __mul__

    def certainly_le(self, other: "Interval | Fraction | int") -> bool:
        bound = other.lo if isinstance(other, Interval) else fr(other)
        return self.hi <= bound

    def certainly_lt(self, other: "Interval | Fraction | int") -> bool:
        bound = other.lo if isinstance(other, Interval) else fr(other)
        return self.hi < bound

    def contains(self, x: Fraction) -> bool:
        return self.lo <= x <= self.hi

    def __float__(self) -> float:
        return float(self.mid)


def interval_sum(items: Iterable[Interval]) -> Interval:
    lo = Q(0)
    hi = Q(0)
    for it in items:
        lo += it.lo
        hi += it.hi
    return Interval(lo, hi)


# ---------------------------------------------------------------------------
# integer factoring helpers (for radicand canonicalisation)
# ---------------------------------------------------------------------------

_square_free_cache: dict[int, tuple[int, int]] = {}


def _pollard_rho(n: int) -> int:
    # Deterministic variant: cycles through fixed increments; n must be
    # composite and odd.  Returns a non-trivial factor or n on failure.
    if n % 2 == 0:
        return 2
    for c in (1, 3, 5, 7, 11, 13):
        x = y = 2
        d = 1
        steps = 0
        while d == 1:
            x = (x * x + c) % n
            y = (y * y + c) % n
            y = (y * y + c) % n
            d = gcd(abs(x - y), n)
            steps += 1
            if steps > 1_000_000:
                break
        if d != n and d != 1:
            return d
    return n


def _is_probable_prime(n: int) -> bool:
    if n < 2:
        return False
    for p in (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37):
        if n % p == 0:
            return n == p
    d = n - 1
    r = 0
    while d % 2 == 0:
        d //= 2
        r += 1
    # Deterministic witness set for n < 3.3e24.
    for a in (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37):
        x = pow(a, d, n)
        if x in (1, n - 1):
            continue
        for _ in range(r - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


def _factor(n: int, out: dict[int, int]) -> None:
    if n == 1:
        return
    if _is_probable_prime(n):
        out[n] = out.get(n, 0) + 1
        return
    d = _pollard_rho(n)
    if d == n:
        raise ArithmeticError(f"cannot factor {n} for radicand canonicalisation")
    _factor(d, out)
    _factor(n // d, out)


def square_free_split(n: int, allow_rho: bool = False) -> tuple[int, int]:
    """Write n = k*k*m with m as squarefree as cheap factoring allows.

    Returns (k, m).  With ``allow_rho`` the split is exactly squarefree or an
    ArithmeticError is raised.
    """
    if n <= 0:
        raise ValueError("radicand must be positive")
    cached = _square_free_cache.get(n)
    if cached is not None and not allow_rho:
        return cached
    k = 1
    m = 1
    rem = n
    p = 2
    bound = _TRIAL_BOUND if allow_rho else _FAST_TRIAL_BOUND
    while p * p <= rem and p <= bound:
        if rem % p == 0:
            e = 0
            while rem % p == 0:
                rem //= p
                e += 1
            k *= p ** (e // 2)
            if e % 2:
                m *= p
        p += 1 if p == 2 else 2
    if rem > 1:
        r = isqrt(rem)
        if r * r == rem:
            k *= r
        elif allow_rho and not _is_probable_prime(rem):
            extra: dict[int, int] = {}
            _factor(rem, extra)
            for q, e in extra.items():
                k *= q ** (e // 2)
                if e % 2:
                    m *= q
        else:
            m *= rem
    if not allow_rho:
        _square_free_cache[n] = (k, m)
    return k, m


# ---------------------------------------------------------------------------
# exact sums of square roots
# ---------------------------------------------------------------------------


class SqrtSum:
    """Exact value sum_i c_i*sqrt(m_i), kept in canonical merged form.

    Radicand 1 carries the rational part.  Instances are immutable; all
    arithmetic returns new objects.
    """

    __slots__ = ("terms", "_float", "_enclosures")

    def __init__(self, terms: dict[int, Fraction] | None = None):
        self.terms: dict[int, Fraction] = {}
        if terms:
            for m, c in terms.items():
                if c != 0:
                    self.terms[m] = c
        self._float: float | None = None
        self._enclosures: dict[int, Interval] = {}

    # -- constructors -------------------------------------------------------

    @staticmethod
    def zero() -> "SqrtSum":
        return SqrtSum()

    @staticmethod
    def rational(c: Fraction | int) -> "SqrtSum":
        c = fr(c)
        return SqrtSum({1: c}) if c else SqrtSum()

    @staticmethod
    def sqrt_rational(r: Fraction | int) -> "SqrtSum":
        """sqrt(r) for rational r >= 0, canonicalised."""
        r = fr(r)
        if r < 0:
            raise ValueError("sqrt of negative rational")
        if r == 0:
            return SqrtSum()
        # sqrt(p/q) = sqrt(p*q)/q
        n = r.numerator * r.denominator
        k, m = square_free_split(n)
        return SqrtSum({m: Q(k, r.denominator)})

    # -- arithmetic ----------------------------------------------------------

    def __add__(self, other: "SqrtSum") -> "SqrtSum":
        merged = dict(self.terms)
        for m, c in other.terms.items():
            nc = merged.get(m, Q(0)) + c
            if nc:
                merged[m] = nc
            else:
                merged.pop(m, None)
        return SqrtSum(merged)

    def __neg__(self) -> "SqrtSum":
        return SqrtSum({m: -c for m, c in self.terms.items()})

    def __sub__(self, other: "SqrtSum") -> "SqrtSum":
        return self + (-other)

    def scaled(self, c: Fraction | int) -> "SqrtSum":
        c = fr(c)
        if c == 0:
            return SqrtSum()
        return SqrtSum({m: co * c for m, co in self.terms.items()})

    # -- queries --------------------------------------------------------------

    def is_zero(self) -> bool:
        return not self.terms

    def enclosure(self, bits: int = 64) -> Interval:
        cached = self._enclosures.get(bits)
        if cached is not None:
            return cached
        total = Interval(Q(0), Q(0))
        for m, c in self.terms.items():
            if m == 1:
                total = total + Interval.exact(c)
            else:
                total = total + Interval.sqrt_of(Q(m), bits) * c
        self._enclosures[bits] = total
        return total

    def sign(self) -> int:
        """Exact sign; terminates because canonical nonzero sums are nonzero."""
        if not self.terms:
            return 0
        for bits in _ENCLOSURE_BITS_LADDER:
            enc = self.enclosure(bits)
            if enc.lo > 0:
                return 1
            if enc.hi < 0:
                return -1
        # Suspected tie between equal values whose radicands were not fully
        # canonicalised: re-split with Pollard rho and retry once.
        redone: dict[int, Fraction] = {}
        for m, c in self.terms.items():
            k, m2 = square_free_split(m, allow_rho=True)
            redone[m2] = redone.get(m2, Q(0)) + c * k
        clean = SqrtSum(redone)
        if not clean.terms:
            return 0
        for bits in (2048, 4096, 8192):
            enc = clean.enclosure(bits)
            if enc.lo > 0:
                return 1
            if enc.hi < 0:
                return -1
        raise ArithmeticError("sign of sqrt-sum could not be decided")

    def compare(self, other: "SqrtSum") -> int:
        return (self - other).sign()

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, SqrtSum):
            return NotImplemented
        return self.compare(other) == 0

    def __hash__(self) -> int:
        return hash(frozenset(self.terms.items()))

    def __lt__(self, other: "SqrtSum") -> bool:
        return self.compare(other) < 0

    def __le__(self, other: "SqrtSum") -> bool:
        return self.compare(other) <= 0

    def __float__(self) -> float:
        if self._float is None:
            self._float = float(self.enclosure(64).mid)
        return self._float

    def __repr__(self) -> str:
        if not self.terms:
            return "SqrtSum(0)"
        bits = " + ".join(
            f"{c}" if m == 1 else f"{c}*sqrt({m})" for m, c in sorted(self.terms.items())
        )
        return f"SqrtSum({bits})"

    def canonical_key(self) -> tuple[tuple[int, Fraction], ...]:
        """Hashable exact form, suitable for cross-implementation agreement."""
        return tuple(sorted(self.terms.items()))


def sqrtsum_total(items: Iterable[SqrtSum]) -> SqrtSum:
    total = SqrtSum()
    for it in items:
        total = total + it
    return total


# ---------------------------------------------------------------------------
# rational rotations
# ---------------------------------------------------------------------------


def rational_unit_vector(alpha: float, max_denominator: int = 1000) -> tuple[Fraction, Fraction]:
    """Rational (cos, sin) on the unit circle approximating angle ``alpha``.

    Uses the tan-half-angle parametrisation, so the returned pair satisfies
    c*c + s*s == 1 exactly.  Quarter-turn multiples are returned exactly.
    """
    from math import pi, tan

    a = alpha % (2 * pi)
    for k in range(4):
        if abs(a - k * pi / 2) < 1e-15:
            return [(Q(1), Q(0)), (Q(0), Q(1)), (Q(-1), Q(0)), (Q(0), Q(-1))][k]
    flip = False
    if a > pi:
        a -= pi
        flip = True
    t = Fraction(tan(a / 2)).limit_denominator(max_denominator)
    p, q = t.numerator, t.denominator
    c = Q(q * q - p * p, q * q + p * p)
    s = Q(2 * p * q, q * q + p * p)
    if flip:
        c, s = -c, -s
    return c, s
