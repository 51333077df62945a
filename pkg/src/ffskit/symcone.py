"""Cones of totally positive-semidefinite symmetric matrices over a field.

A cone lattice fixes a totally real field F, a matrix size n and a level
nu >= 1.  Its points are the nonzero symmetric n x n matrices over F that are
positive semidefinite under every real embedding, with diagonal entries in
nu^-1 d^-1 and off-diagonal entries in (2 nu)^-1 d^-1, where d^-1 is the
trace-dual of the ring of integers.  Heights, enumeration, unit-orbit
symmetrization and the standard-kernel membership test all run on exact
rational data; no decision ever consults floating point.
"""
from __future__ import annotations

import itertools
from fractions import Fraction
from typing import Iterable, Sequence

from . import _linalg
from .numberfield import FieldElem, NumberField


# --- small matrix helpers over a field ----------------------------------------------

def f_rows(field: NumberField, rows) -> tuple[tuple[FieldElem, ...], ...]:
    return tuple(tuple(field.coerce(x) for x in row) for row in rows)


def f_identity(field: NumberField, n: int) -> tuple[tuple[FieldElem, ...], ...]:
    return tuple(
        tuple(field.one() if i == j else field.zero() for j in range(n)) for i in range(n)
    )


def f_transpose(rows):
    return tuple(zip(*rows))


def f_mat_mul(a, b):
    bt = f_transpose(b)
    out = []
    for row in a:
        out.append(
            tuple(_f_dot(row, col) for col in bt)
        )
    return tuple(out)


def _f_dot(u, v):
    # matrices here are mostly sparse (permutations, diagonals): skip zeros
    acc = None
    for x, y in zip(u, v):
        if not any(x.coords):
            continue
        term = x * y
        acc = term if acc is None else acc + term
    return acc if acc is not None else u[0].field.zero()


def f_det(rows) -> FieldElem:
    n = len(rows)
    field = rows[0][0].field
    if n == 1:
        return rows[0][0]
    acc = field.zero()
    for j in range(n):
        if rows[0][j].is_zero():
            continue
        minor = tuple(tuple(r[k] for k in range(n) if k != j) for r in rows[1:])
        term = rows[0][j] * f_det(minor)
        acc = acc + term if j % 2 == 0 else acc - term
    return acc


def f_mat_inv(rows):
    n = len(rows)
    field = rows[0][0].field
    a = [list(r) + list(f_identity(field, n)[i]) for i, r in enumerate(rows)]
    for col in range(n):
        piv = next((r for r in range(col, n) if not a[r][col].is_zero()), None)
        if piv is None:
            raise ZeroDivisionError("singular matrix over field")
        a[col], a[piv] = a[piv], a[col]
        inv = a[col][col].inverse()
        a[col] = [x * inv for x in a[col]]
        for r in range(n):
            if r != col and not a[r][col].is_zero():
                f = a[r][col]
                a[r] = [x - f * y for x, y in zip(a[r], a[col])]
    return tuple(tuple(row[n:]) for row in a)


# --- symmetric matrices over F --------------------------------------------------------

class SymMatF:
    """A symmetric n x n matrix with entries in a fixed number field."""

    __slots__ = ("field", "n", "rows", "_key")

    def __init__(self, field: NumberField, rows):
        self.field = field
        self.rows = f_rows(field, rows)
        self.n = len(self.rows)
        if any(len(r) != self.n for r in self.rows):
            raise ValueError("matrix must be square")
        for i in range(self.n):
            for k in range(i + 1, self.n):
                if self.rows[i][k] != self.rows[k][i]:
                    raise ValueError("matrix must be symmetric")
        self._key = tuple(e.coords for row in self.rows for e in row)

    @classmethod
    def zero(cls, field: NumberField, n: int) -> "SymMatF":
        return cls(field, [[0] * n for _ in range(n)])

    @classmethod
    def from_coords(cls, field: NumberField, n: int, flat_coords) -> "SymMatF":
        if len(flat_coords) != n * n:
            raise ValueError("need n*n coordinate vectors")
        ent = [field.element(c) for c in flat_coords]
        return cls(field, [ent[i * n : (i + 1) * n] for i in range(n)])

    def entry(self, i: int, k: int) -> FieldElem:
        return self.rows[i][k]

    def coords_key(self):
        return self._key

    def __add__(self, other: "SymMatF") -> "SymMatF":
        return SymMatF(
            self.field,
            [[a + b for a, b in zip(ra, rb)] for ra, rb in zip(self.rows, other.rows)],
        )

    def __sub__(self, other: "SymMatF") -> "SymMatF":
        return SymMatF(
            self.field,
            [[a - b for a, b in zip(ra, rb)] for ra, rb in zip(self.rows, other.rows)],
        )

    def scale(self, c) -> "SymMatF":
        return SymMatF(self.field, [[x * Fraction(c) for x in row] for row in self.rows])

    def is_zero(self) -> bool:
        return all(e.is_zero() for row in self.rows for e in row)

    def trace_elem(self) -> FieldElem:
        acc = self.field.zero()
        for i in range(self.n):
            acc = acc + self.rows[i][i]
        return acc

    def transform(self, g) -> "SymMatF":
        """g @ T @ g^T for an n x n matrix g over the same field."""
        gt = f_mat_mul(f_mat_mul(g, self.rows), f_transpose(g))
        return SymMatF(self.field, gt)

    def principal_minor_det(self, idx: Sequence[int]) -> FieldElem:
        sub = tuple(tuple(self.rows[i][k] for k in idx) for i in idx)
        return f_det(sub)

    def __eq__(self, other):
        if not isinstance(other, SymMatF):
            return NotImplemented
        return self.field == other.field and self._key == other._key

    def __hash__(self):
        return hash(self._key)

    def __repr__(self):
        return f"SymMatF({[[str(e.coords) for e in row] for row in self.rows]})"

    def to_json_list(self) -> list:
        return [[str(c) for c in e.coords] for row in self.rows for e in row]

    @classmethod
    def from_json_list(cls, field: NumberField, n: int, data) -> "SymMatF":
        return cls.from_coords(field, n, [[Fraction(c) for c in vec] for vec in data])


def is_totally_psd(t: SymMatF) -> bool:
    """True when every principal minor is nonnegative under every embedding."""
    field = t.field
    for size in range(1, t.n + 1):
        for idx in itertools.combinations(range(t.n), size):
            if not field.is_totally_nonnegative(t.principal_minor_det(idx)):
                return False
    return True


def is_totally_pd(t: SymMatF) -> bool:
    """True when every leading principal minor is positive under every embedding."""
    field = t.field
    for size in range(1, t.n + 1):
        idx = tuple(range(size))
        if not field.is_totally_positive(t.principal_minor_det(idx)):
            return False
    return True


# --- the cone lattice ------------------------------------------------------------------

class ConeLattice:
    """Lattice points of the totally-PSD cone at a fixed level.

    Heights take values in (1/nu) * Z>=0 and the zero matrix is the only point
    of height zero, so enumeration by height bound is finite and exhaustive.
    """

    def __init__(self, field: NumberField, n: int, nu: int = 1):
        if not isinstance(n, int) or n < 1:
            raise ValueError("n must be a positive integer")
        if not isinstance(nu, int) or nu < 1:
            raise ValueError("nu must be a positive integer")
        self.field = field
        self.n = n
        self.nu = nu
        self._dual = field.inverse_different()
        self._diag_basis = tuple(x / nu for x in self._dual)
        self._off_basis = tuple(x / (2 * nu) for x in self._dual)
        self._rho_diag = None
        self._rho_off = None
        self._enum: list | None = None
        self._enum_bound: Fraction | None = None

    def __eq__(self, other):
        if not isinstance(other, ConeLattice):
            return NotImplemented
        return (self.field, self.n, self.nu) == (other.field, other.n, other.nu)

    def __hash__(self):
        return hash((self.field, self.n, self.nu))

    def __repr__(self):
        return f"ConeLattice(n={self.n}, nu={self.nu}, degree={self.field.degree})"

    # --- membership and height ----------------------------------------------------

    def in_dual_lattice(self, t: SymMatF) -> bool:
        """Entrywise integrality: tr(nu t_ii b) and tr(2 nu t_ik b) integral."""
        if t.field != self.field or t.n != self.n:
            return False
        field = self.field
        basis = [
            field.element([1 if s == r else 0 for s in range(field.degree)])
            for r in range(field.degree)
        ]
        for i in range(self.n):
            for k in range(i, self.n):
                mult = self.nu if i == k else 2 * self.nu
                x = t.entry(i, k) * mult
                for b in basis:
                    if field.trace(x * b).denominator != 1:
                        return False
        return True

    def _height_raw(self, t: SymMatF) -> Fraction:
        return self.field.trace(t.trace_elem())

    def height(self, t: SymMatF) -> Fraction:
        if not is_totally_psd(t):
            raise ValueError("height is only defined on the closed cone")
        return self._height_raw(t)

    # --- enumeration -----------------------------------------------------------------

    def _rho(self, basis_key: str) -> Fraction:
        if basis_key == "diag":
            if self._rho_diag is None:
                self._rho_diag = self.field.coordinate_bound(list(self._diag_basis))
            return self._rho_diag
        if self._rho_off is None:
            self._rho_off = self.field.coordinate_bound(list(self._off_basis))
        return self._rho_off

    def _diag_candidates(self, bound: Fraction):
        """Totally nonnegative diagonal values with trace at most bound."""
        field = self.field
        d = field.degree
        box = int(self._rho("diag") * bound) + 1
        out = []
        for coords in itertools.product(range(-box, box + 1), repeat=d):
            x = field.zero()
            for c, b in zip(coords, self._diag_basis):
                x = x + b * c
            tr = field.trace(x)
            if tr < 0 or tr > bound:
                continue
            if field.is_totally_nonnegative(x):
                out.append((tr, x))
        out.sort(key=lambda p: (p[0], p[1].coords))
        return out

    def _embed_upper(self, x: FieldElem) -> Fraction:
        """Rational upper bound on max_j sigma_j(x)."""
        u = None
        for j in range(1, self.field.degree + 1):
            _, hi = self.field.embed(x, j, Fraction(1, 4))
            u = hi if u is None else max(u, hi)
        return u

    def _offdiag_candidates(self, cap: Fraction):
        """All off-diagonal lattice values x with max_j |sigma_j(x)| possibly <= cap."""
        field = self.field
        d = field.degree
        box = int(self._rho("off") * cap) + 1
        out = []
        for coords in itertools.product(range(-box, box + 1), repeat=d):
            x = field.zero()
            for c, b in zip(coords, self._off_basis):
                x = x + b * c
            out.append(x)
        out.sort(key=lambda e: e.coords)
        return out

    def _enumerate(self, bound: Fraction) -> list[tuple[Fraction, SymMatF]]:
        field = self.field
        n = self.n
        diag = self._diag_candidates(bound)
        offcache: dict[Fraction, list[FieldElem]] = {}
        found: list[tuple[Fraction, SymMatF]] = []

        def diag_combos(i, budget, acc):
            if i == n:
                yield tuple(acc)
                return
            for tr, x in diag:
                if tr > budget:
                    break
                acc.append(x)
                yield from diag_combos(i + 1, budget - tr, acc)
                acc.pop()

        pairs = [(i, k) for i in range(n) for k in range(i + 1, n)]
        for dvals in diag_combos(0, bound, []):
            uppers = [self._embed_upper(x) for x in dvals]
            cand_lists = []
            for i, k in pairs:
                cap = (uppers[i] + uppers[k]) / 2
                if cap not in offcache:
                    offcache[cap] = self._offdiag_candidates(cap)
                cand_lists.append(offcache[cap])
            for choice in itertools.product(*cand_lists):
                rows = [[field.zero()] * n for _ in range(n)]
                for i in range(n):
                    rows[i][i] = dvals[i]
                for (i, k), x in zip(pairs, choice):
                    rows[i][k] = x
                    rows[k][i] = x
                t = SymMatF(field, rows)
                if t.is_zero():
                    continue
                if not is_totally_psd(t):
                    continue
                found.append((self._height_raw(t), t))
        found.sort(key=lambda p: (p[0], p[1].coords_key()))
        return found

    def enumerate_cone(self, bound) -> tuple[SymMatF, ...]:
        """All nonzero lattice cone points of height <= bound, in canonical order.

        The order is (height, entry coordinates), so results for a smaller
        bound are a prefix of results for a larger one.
        """
        bound = Fraction(bound)
        if bound < 0:
            return ()
        if self._enum_bound is None or bound > self._enum_bound:
            self._enum = self._enumerate(bound)
            self._enum_bound = bound
        return tuple(t for h, t in self._enum if h <= bound)

    def min_positive_height(self) -> Fraction:
        b = Fraction(1)
        while True:
            pts = self.enumerate_cone(b)
            if pts:
                return self._height_raw(pts[0])
            b *= 2

    # --- unit-orbit symmetrization -----------------------------------------------------

    def _check_generator(self, g):
        field = self.field
        rows = f_rows(field, g)
        if len(rows) != self.n or any(len(r) != self.n for r in rows):
            raise ValueError("generator must be n x n")
        for row in rows:
            for e in row:
                if any(c.denominator != 1 for c in e.coords):
                    raise ValueError("generator entries must be integral")
        det = f_det(rows)
        if abs(field.norm(det)) != 1:
            raise ValueError("generator must be unimodular over the integers of F")
        ident = f_identity(field, self.n)
        for i in range(self.n):
            for k in range(self.n):
                diff = rows[i][k] - ident[i][k]
                if any(c.denominator != 1 or c % self.nu != 0 for c in diff.coords):
                    raise ValueError("generator must be congruent to 1 mod nu")
        return rows

    def symmetrize_orbit(self, t: SymMatF, generators, height_bound):
        """Orbit of t under the group generated by the given units, restricted
        to the ball height <= height_bound.

        Returns (points, complete): points sorted canonically; complete is True
        exactly when the whole orbit stayed inside the ball, i.e. the returned
        set is closed under every generator and its inverse.
        """
        height_bound = Fraction(height_bound)
        gens = [self._check_generator(g) for g in generators]
        gens += [f_mat_inv(g) for g in gens]
        if self._height_raw(t) > height_bound:
            raise ValueError("starting point lies outside the height ball")
        seen = {t}
        frontier = [t]
        complete = True
        while frontier:
            new = []
            for x in frontier:
                for g in gens:
                    y = x.transform(g)
                    if self._height_raw(y) > height_bound:
                        complete = False
                        continue
                    if y not in seen:
                        seen.add(y)
                        new.append(y)
            frontier = new
        pts = sorted(seen, key=lambda m: (self._height_raw(m), m.coords_key()))
        return tuple(pts), complete

    # --- standard kernel membership -----------------------------------------------------

    def standard_kernel_contains(self, v, max_refine: int = 80) -> bool:
        """Whether sum_j tr(sigma_j(x) v_j) >= 1 holds for every nonzero cone
        point x; v is one rational symmetric positive-definite matrix per
        real embedding."""
        field = self.field
        d = field.degree
        if len(v) != d:
            raise ValueError("need one matrix per real embedding")
        mats = []
        for m in v:
            mm = _linalg.to_mat(m)
            if len(mm) != self.n or any(len(r) != self.n for r in mm):
                raise ValueError("each matrix must be n x n")
            if mm != _linalg.transpose(mm):
                raise ValueError("each matrix must be symmetric")
            if not _linalg.leading_minors_positive(mm):
                raise ValueError("each matrix must be positive definite")
            mats.append(mm)
        lam = Fraction(1)
        while not all(
            _linalg.leading_minors_positive(
                _linalg.mat_add(m, _linalg.mat_scale(_linalg.identity(self.n), -lam))
            )
            for m in mats
        ):
            lam /= 2
        # pairing >= lam * height, so a violator has height < 1/lam
        for x in self.enumerate_cone(1 / lam):
            if not self._pairing_at_least_one(x, mats, max_refine):
                return False
        return True

    def _pairing_at_least_one(self, x: SymMatF, mats, max_refine: int) -> bool:
        field = self.field
        d = field.degree
        tvals = []
        for m in mats:
            acc = field.zero()
            for i in range(self.n):
                for k in range(self.n):
                    acc = acc + x.entry(i, k) * m[k][i]
            tvals.append(acc)
        if d == 1:
            return field.power_poly(tvals[0])[0] >= 1
        if d == 2:
            xi = tvals[0] + field.quadratic_conjugation(tvals[1])
            return field.sign_at(xi - 1, 1) >= 0
        eps = Fraction(1, 16)
        for _ in range(max_refine):
            lo = hi = Fraction(0)
            for j, t in enumerate(tvals, start=1):
                l, h = field.embed(t, j, eps)
                lo += l
                hi += h
            if lo >= 1:
                return True
            if hi < 1:
                return False
            eps /= 16
        raise RuntimeError(
            "pairing comparison undecided at maximum refinement; "
            "the value may lie exactly on the boundary"
        )
