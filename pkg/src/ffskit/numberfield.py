"""Exact arithmetic in a totally real number field.

A field is described by a monic integer minimal polynomial, a rational matrix
expressing an integral basis in the power basis, and one isolating rational
interval per real root.  Real embeddings are indexed in increasing root order.
All sign decisions are certified: interval refinement by bisection plus an
exact gcd-based zero test.  No floating point enters any decision.
"""
from __future__ import annotations

from fractions import Fraction
from typing import Iterable, Sequence

from . import _linalg

Poly = tuple[Fraction, ...]  # coefficients, low degree first


class FieldValidationError(ValueError):
    pass


# --- polynomial helpers ---------------------------------------------------------

def poly_trim(p: Iterable) -> Poly:
    coeffs = [Fraction(c) for c in p]
    while coeffs and coeffs[-1] == 0:
        coeffs.pop()
    return tuple(coeffs)


def poly_eval(p: Poly, x: Fraction) -> Fraction:
    acc = Fraction(0)
    for c in reversed(p):
        acc = acc * x + c
    return acc


def poly_add(p: Poly, q: Poly) -> Poly:
    n = max(len(p), len(q))
    return poly_trim(
        [(p[i] if i < len(p) else 0) + (q[i] if i < len(q) else 0) for i in range(n)]
    )


def poly_mul(p: Poly, q: Poly) -> Poly:
    if not p or not q:
        return ()
    out = [Fraction(0)] * (len(p) + len(q) - 1)
    for i, a in enumerate(p):
        if a:
            for j, b in enumerate(q):
                out[i + j] += a * b
    return poly_trim(out)


def poly_divmod(p: Poly, q: Poly) -> tuple[Poly, Poly]:
    if not q:
        raise ZeroDivisionError("polynomial division by zero")
    rem = list(p)
    quo = [Fraction(0)] * max(len(p) - len(q) + 1, 0)
    dq = len(q) - 1
    lead = q[-1]
    while len(rem) - 1 >= dq and any(rem):
        if rem[-1] == 0:
            rem.pop()
            continue
        shift = len(rem) - 1 - dq
        factor = rem[-1] / lead
        quo[shift] = factor
        for i, c in enumerate(q):
            rem[shift + i] -= factor * c
        rem.pop()
    return poly_trim(quo), poly_trim(rem)


def poly_deriv(p: Poly) -> Poly:
    return poly_trim([i * c for i, c in enumerate(p)][1:])


def poly_gcd(p: Poly, q: Poly) -> Poly:
    a, b = poly_trim(p), poly_trim(q)
    while b:
        a, b = b, poly_divmod(a, b)[1]
    if a:
        a = tuple(c / a[-1] for c in a)  # monic
    return a


def poly_resultant(p: Poly, q: Poly) -> Fraction:
    """Resultant via the Euclidean remainder sequence."""
    a, b = poly_trim(p), poly_trim(q)
    if not a or not b:
        return Fraction(0)
    res = Fraction(1)
    while True:
        da, db = len(a) - 1, len(b) - 1
        if db == 0:
            return res * b[0] ** da
        _, r = poly_divmod(a, b)
        if not r:
            return Fraction(0)
        dr = len(r) - 1
        res *= (Fraction(-1) ** (da * db)) * b[-1] ** (da - dr)
        a, b = b, r


def poly_discriminant(p: Poly) -> Fraction:
    d = len(p) - 1
    lead = p[-1]
    sign = Fraction(-1) ** (d * (d - 1) // 2)
    return sign * poly_resultant(p, poly_deriv(p)) / lead


# --- Sturm sequences and root isolation ------------------------------------------

def sturm_chain(p: Poly) -> list[Poly]:
    chain = [poly_trim(p), poly_deriv(p)]
    while chain[-1]:
        rem = poly_divmod(chain[-2], chain[-1])[1]
        if not rem:
            break
        chain.append(tuple(-c for c in rem))
    return chain


def _sign_changes(chain: Sequence[Poly], x: Fraction) -> int:
    signs = []
    for q in chain:
        v = poly_eval(q, x)
        if v:
            signs.append(1 if v > 0 else -1)
    return sum(1 for a, b in zip(signs, signs[1:]) if a != b)


def count_real_roots(p: Poly, lo: Fraction, hi: Fraction, chain=None) -> int:
    """Number of distinct real roots of p in (lo, hi]."""
    chain = chain or sturm_chain(p)
    return _sign_changes(chain, lo) - _sign_changes(chain, hi)


def root_bound(p: Poly) -> Fraction:
    lead = p[-1]
    return 1 + max(abs(c / lead) for c in p[:-1]) if len(p) > 1 else Fraction(1)


def isolate_real_roots(p: Poly) -> list[tuple[Fraction, Fraction]]:
    """Disjoint open-ish intervals (lo, hi], one per distinct real root, increasing."""
    chain = sturm_chain(p)
    bound = root_bound(p)
    total = count_real_roots(p, -bound, bound, chain)
    stack = [(-bound, bound, total)]
    out = []
    while stack:
        lo, hi, k = stack.pop()
        if k == 0:
            continue
        if k == 1:
            out.append((lo, hi))
            continue
        mid = (lo + hi) / 2
        while poly_eval(p, mid) == 0:
            mid = (mid + hi) / 2
        left = count_real_roots(p, lo, mid, chain)
        stack.append((mid, hi, k - left))
        stack.append((lo, mid, left))
    return sorted(out)


# --- field elements ---------------------------------------------------------------

class FieldElem:
    """An element of a NumberField, held as exact coordinates in the integral basis."""

    __slots__ = ("field", "coords")

    def __init__(self, field: "NumberField", coords: Sequence):
        self.field = field
        self.coords = tuple(Fraction(c) for c in coords)
        if len(self.coords) != field.degree:
            raise ValueError("coordinate length mismatch")

    @classmethod
    def _raw(cls, field: "NumberField", coords: tuple) -> "FieldElem":
        """Internal constructor for coordinates already known exact."""
        self = object.__new__(cls)
        self.field = field
        self.coords = coords
        return self

    def __add__(self, other):
        if isinstance(other, FieldElem) and other.field is self.field:
            return FieldElem._raw(
                self.field, tuple(a + b for a, b in zip(self.coords, other.coords))
            )
        other = self.field.coerce(other)
        return FieldElem(self.field, [a + b for a, b in zip(self.coords, other.coords)])

    __radd__ = __add__

    def __neg__(self):
        return FieldElem._raw(self.field, tuple(-a for a in self.coords))

    def __sub__(self, other):
        return self + (-self.field.coerce(other))

    def __rsub__(self, other):
        return self.field.coerce(other) - self

    def __mul__(self, other):
        if isinstance(other, FieldElem) and other.field is self.field:
            return self.field.mul(self, other)
        if isinstance(other, (int, Fraction)):
            scalar = Fraction(other)
            return FieldElem._raw(self.field, tuple(scalar * a for a in self.coords))
        other = self.field.coerce(other)
        return self.field.mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, (int, Fraction)):
            return FieldElem(self.field, [a / Fraction(other) for a in self.coords])
        return self * self.field.coerce(other).inverse()

    def __rtruediv__(self, other):
        return self.field.coerce(other) / self

    def __pow__(self, n: int):
        if n < 0:
            return self.inverse() ** (-n)
        out = self.field.one()
        base = self
        while n:
            if n & 1:
                out = out * base
            base = base * base
            n >>= 1
        return out

    def inverse(self) -> "FieldElem":
        return self.field.invert(self)

    def is_zero(self) -> bool:
        return all(c == 0 for c in self.coords)

    def __eq__(self, other):
        if isinstance(other, (int, Fraction)):
            other = self.field.coerce(other)
        if not isinstance(other, FieldElem):
            return NotImplemented
        return self.field is other.field and self.coords == other.coords

    def __hash__(self):
        return hash(self.coords)

    def __repr__(self):
        return f"FieldElem({list(map(str, self.coords))})"

    def is_rational(self) -> bool:
        return all(c == 0 for c in self.coords[1:]) and self.field.basis_is_unit_first

    def as_rational(self) -> Fraction:
        poly = self.field.power_poly(self)
        if len(poly_trim(poly)) > 1:
            raise ValueError("not a rational element")
        return poly[0] if poly else Fraction(0)


class NumberField:
    """A totally real number field with a fixed integral basis.

    min_poly: monic integer polynomial (low degree first, length d+1).
    integral_basis: d x d rational matrix; row i gives basis element b_i in the
    power basis 1, theta, ..., theta^(d-1).
    isolators: optional list of d rational intervals isolating the real roots,
    in increasing order; computed when absent.
    """

    def __init__(self, min_poly, integral_basis=None, isolators=None, validate=True):
        self.min_poly: Poly = poly_trim(min_poly)
        d = len(self.min_poly) - 1
        if d < 1:
            raise FieldValidationError("minimal polynomial must be nonconstant")
        self.degree = d
        if integral_basis is None:
            integral_basis = _linalg.identity(d)
        self.basis = _linalg.to_mat(integral_basis)
        if len(self.basis) != d or any(len(r) != d for r in self.basis):
            raise FieldValidationError("integral basis must be d x d")
        try:
            self.basis_inv = _linalg.inv_fraction(self.basis)
        except ZeroDivisionError:
            raise FieldValidationError("integral basis is singular") from None
        self._isolators = None
        self._mult_table = None
        if validate:
            self._validate(isolators)
        elif isolators is not None:
            self._isolators = [list(map(Fraction, iv)) for iv in isolators]
        if self._isolators is None:
            self._isolators = [list(iv) for iv in isolate_real_roots(self.min_poly)]
        self.basis_is_unit_first = self.basis[0] == tuple(
            Fraction(1 if j == 0 else 0) for j in range(d)
        )

    # --- validation --------------------------------------------------------------

    def _validate(self, isolators):
        p = self.min_poly
        if p[-1] != 1:
            raise FieldValidationError("minimal polynomial must be monic")
        if any(c.denominator != 1 for c in p):
            raise FieldValidationError("minimal polynomial must have integer coefficients")
        d = self.degree
        if len(poly_gcd(p, poly_deriv(p))) > 1:
            raise FieldValidationError("minimal polynomial is not squarefree")
        chain = sturm_chain(p)
        bound = root_bound(p)
        if count_real_roots(p, -bound, bound, chain) != d:
            raise FieldValidationError("field is not totally real")
        if d > 1 and not _is_irreducible(p):
            raise FieldValidationError("minimal polynomial is reducible")
        if isolators is not None:
            ivs = [tuple(map(Fraction, iv)) for iv in isolators]
            if len(ivs) != d:
                raise FieldValidationError("need one isolator per root")
            for lo, hi in ivs:
                if lo > hi:
                    raise FieldValidationError("empty isolator interval")
                if lo == hi:
                    # a point interval is allowed when it pins a rational root exactly
                    if poly_eval(p, lo) != 0:
                        raise FieldValidationError("isolator does not contain exactly one root")
                elif count_real_roots(p, lo, hi, chain) != 1:
                    raise FieldValidationError("isolator does not contain exactly one root")
            for (_, h1), (l2, _) in zip(ivs, ivs[1:]):
                if not h1 <= l2:
                    raise FieldValidationError("isolators must be disjoint and increasing")
            self._isolators = [list(iv) for iv in ivs]
        # ring closure: 1 and all b_i * b_j have integer coordinates
        one_coords = self._coords_from_power((Fraction(1),))
        if any(c.denominator != 1 for c in one_coords):
            raise FieldValidationError("1 is not an integral combination of the basis")
        for i in range(d):
            for j in range(i, d):
                prod = self._power_mul(self.basis[i], self.basis[j])
                coords = self._coords_from_power(prod)
                if any(c.denominator != 1 for c in coords):
                    raise FieldValidationError("basis is not multiplicatively closed")
        # discriminant consistency: det(trace gram) * det(basis)^-2 == disc(min_poly)
        gram = self.trace_gram()
        det_b = _linalg.det_fraction(self.basis)
        if _linalg.det_fraction(gram) != poly_discriminant(p) * det_b * det_b:
            raise FieldValidationError("trace form inconsistent with polynomial discriminant")

    # --- basic structure -----------------------------------------------------------

    def element(self, coords) -> FieldElem:
        return FieldElem(self, coords)

    def coerce(self, value) -> FieldElem:
        if isinstance(value, FieldElem):
            if value.field is not self and value.field != self:
                raise ValueError("element of a different field")
            return value
        value = Fraction(value)
        return self.from_power_poly((value,))

    def zero(self) -> FieldElem:
        cached = self.__dict__.get("_zero_cache")
        if cached is None:
            cached = FieldElem(self, [0] * self.degree)
            self.__dict__["_zero_cache"] = cached
        return cached

    def one(self) -> FieldElem:
        cached = self.__dict__.get("_one_cache")
        if cached is None:
            cached = self.coerce(1)
            self.__dict__["_one_cache"] = cached
        return cached

    def generator(self) -> FieldElem:
        """theta, the root of min_poly with the chosen integral-basis coordinates."""
        if self.degree == 1:
            return self.from_power_poly((-self.min_poly[0],))
        return self.from_power_poly((Fraction(0), Fraction(1)))

    def power_poly(self, alpha: FieldElem) -> Poly:
        """alpha as a polynomial in theta (power-basis coordinates)."""
        d = self.degree
        out = [Fraction(0)] * d
        for c, row in zip(alpha.coords, self.basis):
            for k in range(d):
                out[k] += c * row[k]
        return tuple(out)

    def from_power_poly(self, p) -> FieldElem:
        p = poly_trim(p)
        if len(p) > self.degree:
            p = poly_divmod(p, self.min_poly)[1]
        coords = self._coords_from_power(p)
        return FieldElem(self, coords)

    def _coords_from_power(self, p: Poly) -> tuple[Fraction, ...]:
        vec = list(p) + [Fraction(0)] * (self.degree - len(p))
        # solve coords @ basis = vec
        return _linalg.mat_vec(_linalg.transpose(self.basis_inv), vec)

    def _power_mul(self, pa, pb) -> Poly:
        return poly_divmod(poly_mul(poly_trim(pa), poly_trim(pb)), self.min_poly)[1]

    def _mul_table(self):
        """b_i * b_j in basis coordinates, precomputed once per field."""
        table = self.__dict__.get("_mul_table_cache")
        if table is None:
            d = self.degree
            table = tuple(
                tuple(
                    self._coords_from_power(
                        self._power_mul(self.basis[i], self.basis[j])
                    )
                    for j in range(d)
                )
                for i in range(d)
            )
            self.__dict__["_mul_table_cache"] = table
        return table

    def mul(self, a: FieldElem, b: FieldElem) -> FieldElem:
        d = self.degree
        if d == 1:
            # value = coord * basis scalar, so the product coordinate picks
            # up one extra factor of the scalar
            return FieldElem._raw(self, (a.coords[0] * b.coords[0] * self.basis[0][0],))
        table = self._mul_table()
        out = [Fraction(0)] * d
        for i, ca in enumerate(a.coords):
            if not ca:
                continue
            row = table[i]
            for j, cb in enumerate(b.coords):
                if not cb:
                    continue
                c = ca * cb
                cell = row[j]
                for k in range(d):
                    if cell[k]:
                        out[k] += c * cell[k]
        return FieldElem._raw(self, tuple(out))

    def invert(self, a: FieldElem) -> FieldElem:
        if a.is_zero():
            raise ZeroDivisionError("division by zero field element")
        if self.degree == 1:
            scale = self.basis[0][0]
            return FieldElem._raw(self, (1 / (a.coords[0] * scale * scale),))
        m = self.mult_matrix(a)
        one = self.one().coords
        coords = _linalg.solve_fraction(_linalg.transpose(m), one)
        return FieldElem(self, coords)

    def mult_matrix(self, a: FieldElem) -> _linalg.Mat:
        """Matrix of multiplication by a on the integral basis (rows = images)."""
        rows = []
        for i in range(self.degree):
            e = FieldElem(self, [1 if j == i else 0 for j in range(self.degree)])
            rows.append((e * a).coords)
        return tuple(rows)

    # --- trace, norm, duals ---------------------------------------------------------

    def trace(self, alpha) -> Fraction:
        alpha = self.coerce(alpha)
        m = self.mult_matrix(alpha)
        return sum(m[i][i] for i in range(self.degree))

    def norm(self, alpha) -> Fraction:
        alpha = self.coerce(alpha)
        return _linalg.det_fraction(self.mult_matrix(alpha))

    def trace_gram(self) -> _linalg.Mat:
        d = self.degree
        gram = []
        for i in range(d):
            bi = FieldElem(self, [1 if j == i else 0 for j in range(d)])
            row = []
            for k in range(d):
                bk = FieldElem(self, [1 if j == k else 0 for j in range(d)])
                row.append(self.trace(bi * bk))
            gram.append(tuple(row))
        return tuple(gram)

    def inverse_different(self) -> tuple[FieldElem, ...]:
        """Basis of the trace-dual of the ring spanned by the integral basis."""
        ginv = _linalg.inv_fraction(self.trace_gram())
        return tuple(FieldElem(self, row) for row in ginv)

    # --- certified embeddings ---------------------------------------------------------

    def _refine_isolator(self, j: int, width: Fraction) -> tuple[Fraction, Fraction]:
        lo, hi = self._isolators[j]
        p = self.min_poly
        flo = poly_eval(p, lo)
        if flo == 0:
            self._isolators[j] = [lo, lo]
            return lo, lo
        while hi - lo > width:
            mid = (lo + hi) / 2
            fmid = poly_eval(p, mid)
            if fmid == 0:
                lo = hi = mid
                break
            if (fmid > 0) == (flo > 0):
                lo, flo = mid, fmid
            else:
                hi = mid
        self._isolators[j] = [lo, hi]
        return lo, hi

    def embed(self, alpha, j: int, eps) -> tuple[Fraction, Fraction]:
        """A rational interval of width < eps containing sigma_j(alpha); j is 1-based."""
        if not 1 <= j <= self.degree:
            raise ValueError("embedding index out of range")
        eps = Fraction(eps)
        if eps <= 0:
            raise ValueError("eps must be positive")
        alpha = self.coerce(alpha)
        p = self.power_poly(alpha)
        if all(c == 0 for c in p):
            return Fraction(0), Fraction(0)
        width = min(Fraction(1, 4), eps / 2)
        while True:
            lo, hi = self._refine_isolator(j - 1, width)
            ilo, ihi = _interval_poly_eval(p, lo, hi)
            if ihi - ilo < eps:
                return ilo, ihi
            width /= 16

    def sign_at(self, alpha, j: int) -> int:
        """Certified sign of sigma_j(alpha): -1, 0 or 1."""
        alpha = self.coerce(alpha)
        p = poly_trim(self.power_poly(alpha))
        if not p:
            return 0
        g = poly_gcd(self.min_poly, p)
        if len(g) > 1:
            # exact zero test: does the shared factor vanish at root j?
            lo, hi = self._isolators[j - 1]
            if lo == hi:
                if poly_eval(g, lo) == 0:
                    return 0
            elif count_real_roots(g, lo, hi) > 0:
                return 0
        width = Fraction(1, 4)
        while True:
            lo, hi = self._refine_isolator(j - 1, width)
            ilo, ihi = _interval_poly_eval(p, lo, hi)
            if ilo > 0:
                return 1
            if ihi < 0:
                return -1
            width /= 16

    def signs(self, alpha) -> tuple[int, ...]:
        return tuple(self.sign_at(alpha, j) for j in range(1, self.degree + 1))

    def is_totally_positive(self, alpha) -> bool:
        return all(s > 0 for s in self.signs(alpha))

    def is_totally_nonnegative(self, alpha) -> bool:
        return all(s >= 0 for s in self.signs(alpha))

    # --- coordinate boxes for lattice enumeration --------------------------------------

    def coordinate_bound(self, elems: Sequence[FieldElem]) -> Fraction:
        """A rational rho such that, for x = sum c_s * elems[s] with real c,
        max_j |sigma_j(x)| <= h implies max_s |c_s| <= rho * h.

        rho is a certified upper bound on the sup-norm of the inverse of the
        embedding matrix, obtained from a rational midpoint inverse plus a
        Neumann-series perturbation bound.
        """
        d = self.degree
        if len(elems) != d:
            raise ValueError("need exactly d elements")
        eps = Fraction(1, 64)
        while True:
            mid = []
            for j in range(1, d + 1):
                row = []
                for e in elems:
                    lo, hi = self.embed(e, j, eps)
                    row.append((lo + hi) / 2)
                mid.append(tuple(row))
            mid = tuple(mid)  # M[j][s] ~ sigma_j(elems[s])
            try:
                r = _linalg.inv_fraction(mid)
            except ZeroDivisionError:
                eps /= 16
                continue
            rnorm = max(sum(abs(x) for x in row) for row in r)
            delta = rnorm * d * eps  # |M - mid| <= eps entrywise
            if delta < Fraction(1, 2):
                return rnorm / (1 - delta)
            eps /= 16

    # --- quadratic Galois conjugation (used by the standard-kernel decision) -----------

    def quadratic_conjugation(self, alpha: FieldElem) -> FieldElem:
        """For degree 2: the nontrivial conjugate (swaps the two embeddings)."""
        if self.degree != 2:
            raise ValueError("only defined for quadratic fields")
        p = self.power_poly(alpha)
        c0 = p[0] if len(p) > 0 else Fraction(0)
        c1 = p[1] if len(p) > 1 else Fraction(0)
        s = -self.min_poly[1]  # sum of the two roots
        return self.from_power_poly((c0 + c1 * s, -c1))

    # --- identity ------------------------------------------------------------------

    def __eq__(self, other):
        if not isinstance(other, NumberField):
            return NotImplemented
        return self.min_poly == other.min_poly and self.basis == other.basis

    def __hash__(self):
        return hash((self.min_poly, self.basis))

    def __repr__(self):
        return f"NumberField(min_poly={[str(c) for c in self.min_poly]})"

    # --- JSON ------------------------------------------------------------------------

    def to_json_dict(self) -> dict:
        return {
            "min_poly": [int(c) for c in self.min_poly],
            "integral_basis": [[str(x) for x in row] for row in self.basis],
            "isolators": [[str(lo), str(hi)] for lo, hi in self._isolators],
        }

    def interned(self) -> "NumberField":
        """The canonical instance with this minimal polynomial and basis.

        Element equality requires the two fields to be the same object, so
        anything deserialized should be interned before elements mix."""
        return _FIELD_REGISTRY.setdefault((self.min_poly, self.basis), self)

    @classmethod
    def from_json_dict(cls, data: dict) -> "NumberField":
        return cls(
            data["min_poly"],
            data.get("integral_basis"),
            data.get("isolators"),
        ).interned()


def _interval_poly_eval(p: Poly, lo: Fraction, hi: Fraction) -> tuple[Fraction, Fraction]:
    """Exact interval Horner evaluation of p over [lo, hi]."""
    alo = ahi = Fraction(0)
    for c in reversed(p):
        cands = (alo * lo, alo * hi, ahi * lo, ahi * hi)
        alo, ahi = min(cands) + c, max(cands) + c
    return alo, ahi


def _is_irreducible(p: Poly) -> bool:
    # mature-library call for polynomial factorization; everything on the
    # decision path elsewhere stays hand-rolled and exact
    import sympy

    x = sympy.Symbol("x")
    expr = sum(int(c) * x**i for i, c in enumerate(p))
    return sympy.Poly(expr, x).is_irreducible


# --- stock fields --------------------------------------------------------------------

_FIELD_REGISTRY: dict = {}


def rationals() -> NumberField:
    """The degenerate degree-1 field (minimal polynomial x)."""
    return NumberField([0, 1]).interned()


def real_quadratic_golden() -> NumberField:
    """Q(sqrt 5) presented by x^2 - x - 1, integral basis 1, phi."""
    return NumberField([-1, -1, 1], isolators=[["-1", "0"], ["1", "2"]]).interned()
