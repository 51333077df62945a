"""Truncated formal series indexed by cone lattice points.

A series stores exact coefficients for the finitely many lattice points of the
totally-PSD cone up to a height bound, plus a constant term at the zero
matrix.  Multiplication is convolution over support pairs; because every
nonzero cone point has positive height, products are truncation-safe at the
smaller of the two bounds.  Coefficients live in a pluggable commutative ring
given by a small explicit contract, so the same machinery runs over the
rationals, Gaussian rationals, or the cycle-class rings defined elsewhere.
"""
from __future__ import annotations

from fractions import Fraction

from .numberfield import NumberField
from .symcone import ConeLattice, SymMatF


class InconclusiveTruncation(Exception):
    """A query cannot be decided from the stored height window."""


# --- coefficient ring contract ---------------------------------------------------------

class CoefficientRing:
    """Explicit commutative-ring operations on opaque coefficient values."""

    name = "abstract"

    def zero(self):
        raise NotImplementedError

    def one(self):
        raise NotImplementedError

    def add(self, a, b):
        raise NotImplementedError

    def neg(self, a):
        raise NotImplementedError

    def mul(self, a, b):
        raise NotImplementedError

    def eq(self, a, b):
        raise NotImplementedError

    def is_zero(self, a):
        return self.eq(a, self.zero())

    def coerce(self, value):
        return value

    def to_json(self, a):
        raise NotImplementedError

    def from_json(self, data):
        raise NotImplementedError


class RationalRing(CoefficientRing):
    name = "rational"

    def zero(self):
        return Fraction(0)

    def one(self):
        return Fraction(1)

    def add(self, a, b):
        return a + b

    def neg(self, a):
        return -a

    def mul(self, a, b):
        return a * b

    def eq(self, a, b):
        return a == b

    def coerce(self, value):
        return Fraction(value)

    def to_json(self, a):
        return str(a)

    def from_json(self, data):
        return Fraction(data)


class GaussianRationalRing(CoefficientRing):
    """Pairs (re, im) of rationals with i^2 = -1."""

    name = "gaussian"

    def zero(self):
        return (Fraction(0), Fraction(0))

    def one(self):
        return (Fraction(1), Fraction(0))

    def add(self, a, b):
        return (a[0] + b[0], a[1] + b[1])

    def neg(self, a):
        return (-a[0], -a[1])

    def mul(self, a, b):
        return (a[0] * b[0] - a[1] * b[1], a[0] * b[1] + a[1] * b[0])

    def eq(self, a, b):
        return a == b

    def coerce(self, value):
        if isinstance(value, tuple):
            return (Fraction(value[0]), Fraction(value[1]))
        return (Fraction(value), Fraction(0))

    def to_json(self, a):
        return [str(a[0]), str(a[1])]

    def from_json(self, data):
        if isinstance(data, str):
            return (Fraction(data), Fraction(0))
        return (Fraction(data[0]), Fraction(data[1]))


RING_TAGS = {"rational": RationalRing(), "gaussian": GaussianRationalRing()}


# --- the series ------------------------------------------------------------------------

class FormalSeries:
    """Coefficients on cone lattice points of height <= height_bound, plus a
    constant term keyed by the zero matrix."""

    __slots__ = ("cone", "height_bound", "ring", "coeffs")

    def __init__(self, cone: ConeLattice, height_bound, ring: CoefficientRing, coeffs=None):
        self.cone = cone
        self.height_bound = Fraction(height_bound)
        if self.height_bound < 0:
            raise ValueError("height bound must be nonnegative")
        self.ring = ring
        store: dict[SymMatF, object] = {}
        for t, value in (coeffs or {}).items():
            if not isinstance(t, SymMatF):
                raise TypeError("series keys must be symmetric matrices")
            if ring.is_zero(value):
                continue
            if not t.is_zero():
                if not self.cone.in_dual_lattice(t):
                    raise ValueError("series key is not a lattice point")
                h = self.cone.height(t)  # raises if not totally PSD
                if h > self.height_bound:
                    raise ValueError("series key exceeds the height bound")
            store[t] = value
        self.coeffs = store

    # --- constructors -------------------------------------------------------------

    @classmethod
    def unit(cls, cone: ConeLattice, height_bound, ring: CoefficientRing) -> "FormalSeries":
        z = SymMatF.zero(cone.field, cone.n)
        return cls(cone, height_bound, ring, {z: ring.one()})

    @classmethod
    def zero_series(cls, cone: ConeLattice, height_bound, ring: CoefficientRing) -> "FormalSeries":
        return cls(cone, height_bound, ring, {})

    # --- access --------------------------------------------------------------------

    def coefficient(self, t: SymMatF):
        return self.coeffs.get(t, self.ring.zero())

    @property
    def constant_term(self):
        return self.coefficient(SymMatF.zero(self.cone.field, self.cone.n))

    def support(self) -> tuple[SymMatF, ...]:
        """Nonzero-coefficient cone points (the constant term excluded), sorted."""
        pts = [t for t in self.coeffs if not t.is_zero()]
        pts.sort(key=lambda t: (self.cone._height_raw(t), t.coords_key()))
        return tuple(pts)

    def items_sorted(self):
        return sorted(
            self.coeffs.items(),
            key=lambda kv: (self.cone._height_raw(kv[0]), kv[0].coords_key()),
        )

    def __eq__(self, other):
        if not isinstance(other, FormalSeries):
            return NotImplemented
        if self.cone != other.cone or self.height_bound != other.height_bound:
            return False
        keys = set(self.coeffs) | set(other.coeffs)
        return all(self.ring.eq(self.coefficient(k), other.coefficient(k)) for k in keys)

    def __add__(self, other: "FormalSeries") -> "FormalSeries":
        self._check_compatible(other)
        out = dict(self.coeffs)
        for t, v in other.coeffs.items():
            out[t] = self.ring.add(out.get(t, self.ring.zero()), v)
        return FormalSeries(self.cone, min(self.height_bound, other.height_bound), self.ring, out)

    def scale(self, value) -> "FormalSeries":
        value = self.ring.coerce(value)
        out = {t: self.ring.mul(value, v) for t, v in self.coeffs.items()}
        return FormalSeries(self.cone, self.height_bound, self.ring, out)

    def _check_compatible(self, other: "FormalSeries"):
        if self.cone != other.cone:
            raise ValueError("series live on different cone lattices")
        if self.ring is not other.ring and self.ring.name != other.ring.name:
            raise ValueError("series have different coefficient rings")

    def __repr__(self):
        return (
            f"FormalSeries(bound={self.height_bound}, terms={len(self.coeffs)}, "
            f"ring={self.ring.name})"
        )


def multiply(a: FormalSeries, b: FormalSeries) -> FormalSeries:
    """Convolution product, truncated at the smaller height bound.

    Heights of nonzero cone points are positive, so every product coefficient
    at height <= min(bounds) is already determined by the stored windows.
    The inner loop works on flat coordinate tuples; matrices are rebuilt once
    per distinct product key.
    """
    a._check_compatible(b)
    ring = a.ring
    bound = min(a.height_bound, b.height_bound)
    cone = a.cone
    field = cone.field
    n = cone.n
    av = sorted(
        ((cone._height_raw(t), t.coords_key(), v) for t, v in a.coeffs.items()),
        key=lambda p: p[0],
    )
    bv = sorted(
        ((cone._height_raw(t), t.coords_key(), v) for t, v in b.coeffs.items()),
        key=lambda p: p[0],
    )
    acc: dict[tuple, object] = {}
    for ha, ka, va in av:
        lim = bound - ha
        for hb, kb, vb in bv:
            if hb > lim:
                break
            key = tuple(
                tuple(x + y for x, y in zip(ca, cb)) for ca, cb in zip(ka, kb)
            )
            term = ring.mul(va, vb)
            if key in acc:
                acc[key] = ring.add(acc[key], term)
            else:
                acc[key] = term
    out: dict[SymMatF, object] = {}
    for key, v in acc.items():
        if ring.is_zero(v):
            continue
        out[SymMatF.from_coords(field, n, [list(c) for c in key])] = v
    return FormalSeries(cone, bound, ring, out)


# --- decomposition length ---------------------------------------------------------------

_lambda_memo: dict[tuple[ConeLattice, SymMatF], int] = {}


def lambda_(cone: ConeLattice, t: SymMatF) -> int:
    """Largest k such that t splits as a sum of k nonzero cone lattice points."""
    if t.is_zero():
        raise ValueError("the zero matrix has no decomposition length")
    if not cone.in_dual_lattice(t):
        raise ValueError("not a lattice point")
    h = cone.height(t)  # raises if outside the closed cone
    cone.enumerate_cone(h)
    return _lambda_rec(cone, t, h)


def _lambda_rec(cone: ConeLattice, t: SymMatF, h: Fraction) -> int:
    key = (cone, t)
    cached = _lambda_memo.get(key)
    if cached is not None:
        return cached
    from .symcone import is_totally_psd

    best = 1
    for p in cone.enumerate_cone(h):
        hp = cone._height_raw(p)
        if hp >= h:
            break
        rest = t - p
        if not is_totally_psd(rest):
            continue
        cand = 1 + _lambda_rec(cone, rest, h - hp)
        if cand > best:
            best = cand
    _lambda_memo[key] = best
    return best


# --- augmentation-ideal powers ------------------------------------------------------------

def ideal_membership(f: FormalSeries, k: int) -> bool:
    """Whether f lies in the k-th power of the augmentation ideal, judged by
    the vanishing pattern a(0) = 0 and a(x) = 0 for every x with
    decomposition length < k.

    Raises InconclusiveTruncation when the stored window cannot contain any
    point of length >= k, i.e. k * (minimal positive height) exceeds the
    series bound.
    """
    if not isinstance(k, int) or k < 1:
        raise ValueError("k must be a positive integer")
    min_h = f.cone.min_positive_height()
    if k * min_h > f.height_bound:
        raise InconclusiveTruncation(
            f"window of height {f.height_bound} cannot witness length-{k} decompositions"
        )
    if not f.ring.is_zero(f.constant_term):
        return False
    for t in f.support():
        if lambda_(f.cone, t) < k:
            return False
    return True


# --- unit-orbit symmetrization --------------------------------------------------------------

def symmetrize(f: FormalSeries, generators) -> tuple[FormalSeries, bool]:
    """Orbit-sum of f under the congruence units generated by `generators`,
    restricted to the stored height ball.

    Each orbit's stored coefficients are summed and the total is placed on
    every orbit point inside the ball.  The flag is True when every involved
    orbit lies entirely inside the ball, so the result is exactly the full
    symmetrization.
    """
    cone = f.cone
    ring = f.ring
    out: dict[SymMatF, object] = {}
    z = SymMatF.zero(cone.field, cone.n)
    if not ring.is_zero(f.constant_term):
        out[z] = f.constant_term
    complete = True
    covered: set[SymMatF] = set()
    for t in f.support():
        if t in covered:
            continue
        orbit, comp = cone.symmetrize_orbit(t, generators, f.height_bound)
        complete = complete and comp
        weight = ring.zero()
        for p in orbit:
            covered.add(p)
            weight = ring.add(weight, f.coefficient(p))
        for p in orbit:
            out[p] = weight
    return FormalSeries(cone, f.height_bound, ring, out), complete


def is_symmetric(f: FormalSeries, generators) -> bool:
    """Whether the stored coefficients are constant along each unit orbit,
    as far as the orbits are visible inside the height ball."""
    cone = f.cone
    ring = f.ring
    checked: set[SymMatF] = set()
    for t in f.support():
        if t in checked:
            continue
        orbit, _ = cone.symmetrize_orbit(t, generators, f.height_bound)
        ref = f.coefficient(orbit[0])
        for p in orbit:
            checked.add(p)
            if not ring.eq(f.coefficient(p), ref):
                return False
    return True


# --- series files -----------------------------------------------------------------------

def _dumps(obj) -> str:
    import json

    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def series_to_json_lines(f: FormalSeries) -> list[str]:
    """Canonical JSON-lines form: a header line with the cone data and the
    coefficient-ring tag, then one {T, coeff} line per stored term in
    (height, entry) order.  Identical series always render identical bytes."""
    header = {
        "field": f.cone.field.to_json_dict(),
        "height_bound": str(f.height_bound),
        "n": f.cone.n,
        "nu": f.cone.nu,
        "ring": f.ring.name,
    }
    lines = [_dumps(header)]
    for t, a in f.items_sorted():
        lines.append(_dumps({"T": t.to_json_list(), "coeff": f.ring.to_json(a)}))
    return lines


def series_from_json_lines(lines) -> FormalSeries:
    """Inverse of series_to_json_lines for the named coefficient rings."""
    import json

    rows = [ln for ln in lines if ln.strip()]
    if not rows:
        raise ValueError("series file is empty")
    header = json.loads(rows[0])
    ring = RING_TAGS.get(header["ring"])
    if ring is None:
        raise ValueError(f"unknown coefficient ring tag: {header['ring']!r}")
    field = NumberField.from_json_dict(header["field"])
    n = int(header["n"])
    cone = ConeLattice(field, n, int(header["nu"]))
    coeffs: dict[SymMatF, object] = {}
    for ln in rows[1:]:
        item = json.loads(ln)
        t = SymMatF.from_json_list(field, n, item["T"])
        if t in coeffs:
            raise ValueError("series file repeats a cone point")
        coeffs[t] = ring.from_json(item["coeff"])
    return FormalSeries(cone, Fraction(header["height_bound"]), ring, coeffs)
