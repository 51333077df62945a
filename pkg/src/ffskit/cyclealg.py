"""Cycle classes on a finite orbit model of a totally positive-definite
quadratic space.

The model replaces the arithmetic quotient by explicit finite data: an exact
finite group of isometries acting on F^m, a list of component labels (each
with its own group when they differ), and formal classes spanned by symbols
(component, subspace orbit, c-exponent).  Intersection is defined by the
double-coset formula, pullback by orthogonal projection to the complement of
a fixed subspace, and weighted cycles by summing frame orbits against a
finitely supported invariant weight.  Everything is exact; group sizes stay
tiny, so all orbit and coset computations are direct enumerations.
"""
from __future__ import annotations

import math
from fractions import Fraction

from .ffs import CoefficientRing, FormalSeries
from .numberfield import FieldElem, NumberField
from .symcone import (
    SymMatF,
    f_identity,
    f_mat_inv,
    f_mat_mul,
    f_rows,
    f_transpose,
    is_totally_pd,
    is_totally_psd,
)


class NeatnessError(RuntimeError):
    """A subspace stabilizer moves the subspace without fixing it pointwise."""


# --- linear algebra over the field -----------------------------------------------------

def rref_field(field: NumberField, rows):
    """Reduced row echelon form over F; returns (nonzero rows, pivot columns)."""
    a = [list(r) for r in rows]
    nrows = len(a)
    ncols = len(a[0]) if a else 0
    pivots = []
    r = 0
    for c in range(ncols):
        piv = next((i for i in range(r, nrows) if not a[i][c].is_zero()), None)
        if piv is None:
            continue
        a[r], a[piv] = a[piv], a[r]
        inv = a[r][c].inverse()
        a[r] = [x * inv for x in a[r]]
        for i in range(nrows):
            if i != r and not a[i][c].is_zero():
                f = a[i][c]
                a[i] = [x - f * y for x, y in zip(a[i], a[r])]
        pivots.append(c)
        r += 1
        if r == nrows:
            break
    return tuple(tuple(row) for row in a[:r]), tuple(pivots)


def span_key(field: NumberField, vectors):
    """Canonical representation of the span of the given vectors."""
    rows = [v for v in vectors if any(not e.is_zero() for e in v)]
    red, _ = rref_field(field, rows) if rows else ((), ())
    return red


def kernel_field(field: NumberField, rows, ncols: int):
    """Basis rows of {v : rows @ v = 0} over F."""
    if not rows:
        return tuple(
            tuple(field.one() if i == j else field.zero() for i in range(ncols))
            for j in range(ncols)
        )
    red, pivots = rref_field(field, rows)
    free = [c for c in range(ncols) if c not in pivots]
    basis = []
    for f in free:
        v = [field.zero()] * ncols
        v[f] = field.one()
        for r, p in enumerate(pivots):
            v[p] = -red[r][f]
        basis.append(tuple(v))
    return tuple(basis)


def act(g, v):
    """Matrix action on a coordinate vector."""
    return tuple(_dot(row, v) for row in g)


def _dot(row, v):
    # group matrices are mostly zeros (signed permutations), so skip them
    acc = None
    for a, b in zip(row, v):
        if not any(a.coords):
            continue
        t = a * b
        acc = t if acc is None else acc + t
    return acc if acc is not None else row[0].field.zero()


def act_frame(g, frame):
    return tuple(act(g, v) for v in frame)


def g_sort_key(g):
    return tuple(c for row in g for e in row for c in e.coords)


def w_sort_key(rows):
    return (len(rows), tuple(c for row in rows for e in row for c in e.coords))


def frame_sort_key(frame):
    return tuple(c for v in frame for e in v for c in e.coords)


# --- the ambient space ------------------------------------------------------------------

class QuadSpaceF:
    """F^m with a totally positive-definite symmetric bilinear form and a
    grading multiplier counting cohomological degrees per unit codimension."""

    def __init__(self, field: NumberField, gram, d_plus: int = 1):
        self.field = field
        self.gram = SymMatF(field, gram)
        self.m = self.gram.n
        if not is_totally_pd(self.gram):
            raise ValueError("the form must be totally positive definite")
        if not isinstance(d_plus, int) or d_plus < 1:
            raise ValueError("d_plus must be a positive integer")
        self.d_plus = d_plus

    def pairing(self, u, v) -> FieldElem:
        acc = self.field.zero()
        for i, ui in enumerate(u):
            if ui.is_zero():
                continue
            row = self.gram.rows[i]
            for k, vk in enumerate(v):
                if not vk.is_zero():
                    acc = acc + ui * row[k] * vk
        return acc

    def vector(self, coords):
        if len(coords) != self.m:
            raise ValueError("wrong vector length")
        return tuple(self.field.coerce(c) for c in coords)

    def frame(self, rows):
        return tuple(self.vector(r) for r in rows)

    def frame_gram(self, frame) -> SymMatF:
        n = len(frame)
        rows = [
            [self.pairing(frame[a], frame[b]) / 2 for b in range(n)] for a in range(n)
        ]
        return SymMatF(self.field, rows)

    def __eq__(self, other):
        if not isinstance(other, QuadSpaceF):
            return NotImplemented
        return (
            self.field == other.field
            and self.gram == other.gram
            and self.d_plus == other.d_plus
        )

    def __hash__(self):
        return hash((self.gram, self.d_plus))


# --- orbit data ----------------------------------------------------------------------------

def close_group(space: QuadSpaceF, generators, cap: int = 20000):
    """Closure of the generators inside the exact orthogonal group."""
    field = space.field
    gens = [f_rows(field, g) for g in generators]
    gmat = space.gram.rows
    for g in gens:
        if len(g) != space.m or any(len(r) != space.m for r in g):
            raise ValueError("generator has wrong shape")
        if f_mat_mul(f_mat_mul(f_transpose(g), gmat), g) != gmat:
            raise ValueError("generator does not preserve the form")
    ident = f_identity(field, space.m)
    group = {ident}
    frontier = [ident]
    while frontier:
        new = []
        for a in frontier:
            for g in gens:
                b = f_mat_mul(a, g)
                if b not in group:
                    group.add(b)
                    new.append(b)
                    if len(group) > cap:
                        raise ValueError("group closure exceeded the cap")
        frontier = new
    return frozenset(group)


class OrbitDatum:
    """A finite isometry group per component label, acting on a fixed space."""

    def __init__(self, space: QuadSpaceF, generators, components=("0",), component_groups=None):
        self.space = space
        self.components = tuple(str(c) for c in components)
        if len(set(self.components)) != len(self.components):
            raise ValueError("component labels must be distinct")
        shared = close_group(space, generators)
        if component_groups is None:
            self.groups = {c: shared for c in self.components}
        else:
            self.groups = {}
            for c in self.components:
                g = component_groups[c]
                self.groups[c] = g if isinstance(g, frozenset) else close_group(space, g)
        self.shared_group = shared
        self._orbit_cache: dict = {}

    def group(self, component) -> frozenset:
        return self.groups[str(component)]

    def __eq__(self, other):
        if not isinstance(other, OrbitDatum):
            return NotImplemented
        return (
            self.space == other.space
            and self.components == other.components
            and self.groups == other.groups
        )

    def __hash__(self):
        return hash(
            (self.space, self.components, tuple(sorted(len(self.groups[c]) for c in self.components)))
        )

    # --- orbit machinery --------------------------------------------------------------

    def subspace_orbit(self, component, wrows):
        """All canonical forms in the orbit of the subspace; neatness-checked."""
        key = (str(component), wrows)
        cached = self._orbit_cache.get(key)
        if cached is not None:
            return cached
        field = self.space.field
        group = self.group(component)
        orbit = set()
        for g in group:
            img = span_key(field, [act(g, v) for v in wrows])
            orbit.add(img)
        self._check_neat(group, wrows)
        out = tuple(sorted(orbit, key=w_sort_key))
        for w in orbit:
            self._orbit_cache[(str(component), w)] = out
        return out

    def orbit_rep(self, component, wrows):
        return self.subspace_orbit(component, wrows)[0]

    def _check_neat(self, group, wrows):
        field = self.space.field
        wkey = span_key(field, wrows)
        for g in group:
            img = span_key(field, [act(g, v) for v in wrows])
            if img == wkey:
                if any(act(g, v) != v for v in wrows):
                    shown = [[str(c) for e in v for c in e.coords] for v in wkey]
                    raise NeatnessError(
                        "a group element stabilizes a subspace without fixing it "
                        f"pointwise; offending subspace basis rows: {shown}"
                    )

    def pointwise_stab(self, component, wrows):
        group = self.group(component)
        return frozenset(
            g for g in group if all(act(g, v) == v for v in wrows)
        )


def double_coset_reps(group, left, right):
    """Representatives of left \\ group / right, in canonical order."""
    elems = sorted(group, key=g_sort_key)
    seen = set()
    reps = []
    for g in elems:
        if g in seen:
            continue
        reps.append(g)
        for a in left:
            ag = f_mat_mul(a, g)
            for b in right:
                seen.add(f_mat_mul(ag, b))
    return reps


# --- cycle classes ----------------------------------------------------------------------------

class CycleClass:
    """Formal rational combination of symbols (component, subspace orbit, k).

    The symbol degree is (dim W + k) * d_plus.  Classes built from frames are
    homogeneous; sums of mixed degrees are permitted and grading() then
    returns None.
    """

    __slots__ = ("datum", "terms")

    def __init__(self, datum: OrbitDatum, terms=None):
        self.datum = datum
        store = {}
        for (comp, wrows, k), coeff in (terms or {}).items():
            coeff = Fraction(coeff)
            if coeff == 0:
                continue
            comp = str(comp)
            if comp not in datum.components:
                raise ValueError("unknown component label")
            if not isinstance(k, int) or k < 0:
                raise ValueError("c-exponent must be a nonnegative integer")
            rep = datum.orbit_rep(comp, wrows)
            key = (comp, rep, k)
            store[key] = store.get(key, Fraction(0)) + coeff
            if store[key] == 0:
                del store[key]
        self.terms = store

    def is_zero(self) -> bool:
        return not self.terms

    def grading(self):
        degs = {
            (len(w) + k) * self.datum.space.d_plus for (_, w, k) in self.terms
        }
        return degs.pop() if len(degs) == 1 else None

    def __add__(self, other: "CycleClass") -> "CycleClass":
        if self.datum != other.datum:
            raise ValueError("classes live on different orbit data")
        out = dict(self.terms)
        for key, c in other.terms.items():
            out[key] = out.get(key, Fraction(0)) + c
        return CycleClass(self.datum, out)

    def __sub__(self, other: "CycleClass") -> "CycleClass":
        return self + other.scale(-1)

    def scale(self, c) -> "CycleClass":
        c = Fraction(c)
        return CycleClass(self.datum, {k: c * v for k, v in self.terms.items()})

    def __eq__(self, other):
        if not isinstance(other, CycleClass):
            return NotImplemented
        return self.datum == other.datum and self.terms == other.terms

    def __hash__(self):
        return hash(frozenset(self.terms.items()))

    def __repr__(self):
        parts = []
        for (comp, w, k), c in sorted(
            self.terms.items(), key=lambda kv: (kv[0][0], w_sort_key(kv[0][1]), kv[0][2])
        ):
            parts.append(f"{c}*<{comp}, dim {len(w)}, c^{k}>")
        return "CycleClass(" + (" + ".join(parts) if parts else "0") + ")"


def unit_class(datum: OrbitDatum) -> CycleClass:
    return CycleClass(datum, {(c, (), 0): Fraction(1) for c in datum.components})


def zero_class(datum: OrbitDatum) -> CycleClass:
    return CycleClass(datum, {})


def connected_cycle(datum: OrbitDatum, frame, component=None) -> CycleClass:
    """Class of the orbit of span(frame), with c-exponent n - rank.

    A zero frame contributes the pure c^n symbol; a span that fails to be
    totally positive definite under the ambient form gives the zero class."""
    comp = str(component) if component is not None else datum.components[0]
    space = datum.space
    field = space.field
    frame = space.frame(frame)
    w = span_key(field, frame)
    if w:
        restricted = SymMatF(field, [[space.pairing(u, v) for v in w] for u in w])
        if not is_totally_pd(restricted):
            return zero_class(datum)
    k = len(frame) - len(w)
    return CycleClass(datum, {(comp, w, k): Fraction(1)})


def intersect(datum: OrbitDatum, a: CycleClass, b: CycleClass) -> CycleClass:
    """Double-coset intersection product, component by component."""
    if a.datum != datum or b.datum != datum:
        raise ValueError("classes live on different orbit data")
    field = datum.space.field
    out: dict = {}
    for (c1, w1, k1), x1 in a.terms.items():
        for (c2, w2, k2), x2 in b.terms.items():
            if c1 != c2:
                continue
            group = datum.group(c1)
            s1 = datum.pointwise_stab(c1, w1)
            s2 = datum.pointwise_stab(c1, w2)
            for gamma in double_coset_reps(group, s1, s2):
                moved = [act(gamma, v) for v in w2]
                w = span_key(field, list(w1) + moved)
                # the pointwise stabilizer of the union equals that of the span
                joint = frozenset(
                    g
                    for g in s1
                    if all(act(g, v) == v for v in moved)
                )
                if joint != datum.pointwise_stab(c1, w):
                    raise AssertionError("stabilizer mismatch on an intersection")
                k = k1 + k2 + len(w1) + len(w2) - len(w)
                key = (c1, datum.orbit_rep(c1, w), k)
                out[key] = out.get(key, Fraction(0)) + x1 * x2
    return CycleClass(datum, out)


# --- weighted cycles -----------------------------------------------------------------------

def _normalize_phi(space: QuadSpaceF, phi):
    out = {}
    for frame, weight in phi.items():
        fr = space.frame(frame)
        weight = Fraction(weight)
        if weight == 0:
            continue
        if fr in out:
            raise ValueError("duplicate frame in weight function")
        out[fr] = weight
    return out


def _check_invariant(datum: OrbitDatum, component, phi) -> None:
    """The weight must be constant on each group orbit within its support."""
    group = datum.group(component)
    for frame, weight in phi.items():
        for g in group:
            img = act_frame(g, frame)
            if img in phi and phi[img] != weight:
                raise ValueError("weight function is not constant on orbit support")


def _orbit_close_phi(datum: OrbitDatum, component, phi) -> dict:
    """Extend a weight to full group orbits by orbit-constancy.

    A partially supported weight stands for the invariant function taking the
    stored value on the whole orbit; conflicting values on one orbit raise."""
    group = datum.group(component)
    out = dict(phi)
    for frame, weight in phi.items():
        for g in group:
            img = act_frame(g, frame)
            if out.setdefault(img, weight) != weight:
                raise ValueError("weight function is not constant on orbit support")
    return out


def weighted_cycle(datum: OrbitDatum, n: int, t: SymMatF, phi, component=None) -> CycleClass:
    """Sum of frame-orbit classes against an invariant weight supported on
    length-n frames with half-pairing Gram matrix t."""
    comp = str(component) if component is not None else datum.components[0]
    space = datum.space
    phi = _normalize_phi(space, phi)
    if t.n != n:
        raise ValueError("Gram matrix size must match the frame length")
    for frame in phi:
        if len(frame) != n:
            raise ValueError("weight function holds a frame of the wrong length")
        if space.frame_gram(frame) != t:
            raise ValueError("weight function is supported outside the target Gram set")
    _check_invariant(datum, comp, phi)
    return _weighted_cycle_restricted(datum, t, phi, comp)


def _weighted_cycle_restricted(datum: OrbitDatum, t: SymMatF, phi, component) -> CycleClass:
    """Same sum, silently restricting the weight to frames with Gram t and
    assuming invariance (used by identities whose right-hand sides reuse one
    weight across many Gram targets)."""
    space = datum.space
    field = space.field
    group = datum.group(component)
    todo = {f for f in phi if space.frame_gram(f) == t and phi[f] != 0}
    out: dict = {}
    while todo:
        frame = min(todo, key=frame_sort_key)
        orbit = {act_frame(g, frame) for g in group}
        todo -= orbit
        w = span_key(field, frame)
        k = len(frame) - len(w)
        key = (component, datum.orbit_rep(component, w), k)
        out[key] = out.get(key, Fraction(0)) + phi[frame]
    return CycleClass(datum, out)


def check_product_formula(
    datum: OrbitDatum,
    n1: int,
    t1: SymMatF,
    phi1,
    n2: int,
    t2: SymMatF,
    phi2,
    claimed_phi12=None,
    component=None,
):
    """Intersecting two weighted cycles against summing block-Gram cycles.

    The left side is intersect(Z(t1, phi1), Z(t2, phi2)).  The right side
    runs over the off-diagonal blocks X realized by support pairs and sums
    Z(block(t1, X, t2), phi1 (x) phi2).  A claimed product weight may be
    supplied instead of the derived tensor weight; it is validated for
    support and invariance, then used on the right side.  Returns
    (equal, lhs, rhs)."""
    comp = str(component) if component is not None else datum.components[0]
    space = datum.space
    field = space.field
    # a partially supported factor stands for its invariant orbit extension;
    # close it so the block enumeration sees every realized cross pairing
    p1 = _orbit_close_phi(datum, comp, _normalize_phi(space, phi1))
    p2 = _orbit_close_phi(datum, comp, _normalize_phi(space, phi2))
    lhs = intersect(
        datum,
        weighted_cycle(datum, n1, t1, p1, comp),
        weighted_cycle(datum, n2, t2, p2, comp),
    )
    blocks: dict = {}
    for x, wx in p1.items():
        for y, wy in p2.items():
            cross = tuple(
                tuple(space.pairing(x[a], y[b]) / 2 for b in range(n2))
                for a in range(n1)
            )
            z = x + y
            blocks.setdefault(cross, {})[z] = wx * wy
    if claimed_phi12 is not None:
        blocks = {}
        for cross_key, phi12 in claimed_phi12.items():
            blocks[cross_key] = _normalize_phi(space, phi12)
    rhs = zero_class(datum)
    for cross, phi12 in sorted(
        blocks.items(), key=lambda kv: tuple(c for row in kv[0] for e in row for c in e.coords)
    ):
        rows = []
        for i in range(n1 + n2):
            row = []
            for k in range(n1 + n2):
                if i < n1 and k < n1:
                    row.append(t1.entry(i, k))
                elif i >= n1 and k >= n1:
                    row.append(t2.entry(i - n1, k - n1))
                elif i < n1:
                    row.append(cross[i][k - n1])
                else:
                    row.append(cross[k][i - n1])
            rows.append(row)
        tt = SymMatF(field, rows)
        if claimed_phi12 is not None:
            for frame in phi12:
                if space.frame_gram(frame) != tt:
                    raise ValueError("claimed product weight supported off its Gram set")
            phi12 = _orbit_close_phi(datum, comp, phi12)
        rhs = rhs + _weighted_cycle_restricted(datum, tt, phi12, comp)
    return lhs == rhs, lhs, rhs


# --- pullback to the complement of a subspace ---------------------------------------------------

def restrict_datum(datum: OrbitDatum, u0_rows):
    """Sub-datum on the orthogonal complement of U0: the pointwise stabilizer
    of U0 acting on perp(U0) in a fixed basis.  Returns (sub_datum, context)."""
    space = datum.space
    field = space.field
    u0 = span_key(field, space.frame(u0_rows))
    # perp = kernel of (U0 . G)
    gm = space.gram.rows
    ug = tuple(
        tuple(_dot(u, tuple(gm[i][k] for i in range(space.m))) for k in range(space.m))
        for u in u0
    )
    perp = kernel_field(field, ug, space.m)
    sub_gram = [
        [space.pairing(p, q) for q in perp] for p in perp
    ]
    sub_space = QuadSpaceF(field, sub_gram, space.d_plus)
    # pivot columns let us convert ambient vectors in the span of perp to coordinates
    red, pivots = rref_field(field, perp)
    groups = {}
    for comp in datum.components:
        stab = datum.pointwise_stab(comp, u0)
        sub = set()
        for g in stab:
            rows = []
            for p in perp:
                img = act(g, p)
                rows.append(_coords_in_basis(field, img, perp, red, pivots))
            sub.add(f_transpose(tuple(tuple(r) for r in rows)))
        groups[comp] = frozenset(sub)
    sub_datum = OrbitDatum(
        sub_space, [], components=datum.components, component_groups=groups
    )
    ctx = {"u0": u0, "perp": perp, "red": red, "pivots": pivots}
    return sub_datum, ctx


def _coords_in_basis(field, vec, basis, red, pivots):
    """Coordinates of vec in the given independent basis rows, using the
    precomputed reduced form of the basis (vec must lie in the span)."""
    coords = [vec[p] for p in pivots]
    # red rows express the rref basis; basis rows = M . red for some M, so
    # solve through the rref: vec = sum_r coords_r red_r in the pivot columns
    # and then convert red-coordinates back to basis-coordinates.
    m = [[None] * len(basis) for _ in range(len(basis))]
    for i, b in enumerate(basis):
        for r, p in enumerate(pivots):
            m[i][r] = b[p]
    minv = f_mat_inv(tuple(tuple(row) for row in m))
    out = act(f_transpose(minv), tuple(coords))
    return out


def pullback(datum: OrbitDatum, u0_rows, cls: CycleClass, _ctx=None):
    """Pull a class back to the complement of U0.

    For each symbol (j, W, k), runs over double cosets of (stab of U0, stab
    of W) and projects the moved subspace orthogonally onto perp(U0); the
    c-exponent grows by the rank drop, so the total degree is preserved.
    Returns (sub_datum, pulled_class)."""
    if cls.datum != datum:
        raise ValueError("class lives on a different datum")
    sub_datum, ctx = restrict_datum(datum, u0_rows) if _ctx is None else _ctx
    space = datum.space
    field = space.field
    u0 = ctx["u0"]
    perp = ctx["perp"]
    out: dict = {}
    gm = space.gram.rows
    u0_gram = tuple(tuple(space.pairing(a, b) for b in u0) for a in u0)
    u0_gram_inv = f_mat_inv(u0_gram) if u0 else None
    for (comp, w, k), coeff in cls.terms.items():
        gamma0 = datum.pointwise_stab(comp, u0)
        gammaw = datum.pointwise_stab(comp, w)
        for gamma in double_coset_reps(datum.group(comp), gamma0, gammaw):
            moved = [act(gamma, v) for v in w]
            projected = []
            for v in moved:
                projected.append(_project_to_perp(space, v, u0, u0_gram_inv))
            wp_ambient = span_key(field, projected)
            wp = span_key(
                field,
                [
                    _coords_in_basis(field, v, perp, ctx["red"], ctx["pivots"])
                    for v in wp_ambient
                ],
            )
            kk = k + len(w) - len(wp)
            key = (comp, sub_datum.orbit_rep(comp, wp), kk)
            out[key] = out.get(key, Fraction(0)) + coeff
    return sub_datum, CycleClass(sub_datum, out)


def _project_to_perp(space: QuadSpaceF, v, u0, u0_gram_inv):
    """v minus its G-orthogonal projection onto span(u0)."""
    if not u0:
        return v
    field = space.field
    rhs = tuple(space.pairing(u, v) for u in u0)
    coeffs = act(u0_gram_inv, rhs)
    out = list(v)
    for c, u in zip(coeffs, u0):
        for i in range(space.m):
            out[i] = out[i] - c * u[i]
    return tuple(out)


def check_pullback_factorization(
    datum: OrbitDatum,
    u0_rows,
    n: int,
    t: SymMatF,
    phi_pairs,
    claimed_phi_total=None,
    component=None,
):
    """Pulling back a weighted cycle against the fiber-sum expansion.

    phi_pairs is a list of (phi0, phi1): phi0 supported on length-n frames
    inside U0, phi1 on length-n frames inside perp(U0) and invariant under
    the stabilizer of U0.  The combined weight z -> sum_r phi0_r(z0)
    phi1_r(z1), with z = z0 + z1 the orthogonal decomposition, must be
    orbit-constant; a claimed combined weight may be supplied instead
    (validated the same way, then used for the left side).  Returns
    (equal, lhs, rhs)."""
    comp = str(component) if component is not None else datum.components[0]
    space = datum.space
    field = space.field
    sub_datum, ctx = restrict_datum(datum, u0_rows)
    u0 = ctx["u0"]
    perp = ctx["perp"]
    u0_gram = tuple(tuple(space.pairing(a, b) for b in u0) for a in u0)
    u0_gram_inv = f_mat_inv(u0_gram) if u0 else None
    pairs = []
    for phi0, phi1 in phi_pairs:
        p0 = _normalize_phi(space, phi0)
        p1 = _normalize_phi(space, phi1)
        for frame in list(p0) + list(p1):
            if len(frame) != n:
                raise ValueError("split weights must hold length-n frames")
        for frame in p0:
            for v in frame:
                if _project_to_perp(space, v, u0, u0_gram_inv) != tuple(
                    field.zero() for _ in range(space.m)
                ):
                    raise ValueError("phi0 frame does not lie inside U0")
        for frame in p1:
            for v in frame:
                for u in u0:
                    if not space.pairing(u, v).is_zero():
                        raise ValueError("phi1 frame does not lie inside perp(U0)")
        # phi1 must be invariant under the pointwise stabilizer of U0
        stab = datum.pointwise_stab(comp, u0)
        for frame, weight in p1.items():
            for g in stab:
                img = act_frame(g, frame)
                if p1.get(img, Fraction(0)) != weight:
                    raise ValueError("phi1 is not stabilizer-invariant")
        pairs.append((p0, p1))
    # combine: phi(z) = sum_r phi0_r(z0) phi1_r(z1)
    combined: dict = {}
    for p0, p1 in pairs:
        for x0, w0 in p0.items():
            for x1, w1 in p1.items():
                if len(x0) != len(x1):
                    raise ValueError("phi0 and phi1 frames must have equal length")
                z = tuple(
                    tuple(a + b for a, b in zip(v0, v1)) for v0, v1 in zip(x0, x1)
                )
                combined[z] = combined.get(z, Fraction(0)) + w0 * w1
    combined = {z: w for z, w in combined.items() if w != 0}
    if claimed_phi_total is not None:
        combined = _normalize_phi(space, claimed_phi_total)
    # the split data defines the combined weight everywhere (zero off the
    # realized sums), so invariance must hold against the full group orbit of
    # the support, not merely within it; the weight may still spread over many
    # Gram matrices (the cycle restricts to t internally)
    group = datum.group(comp)
    for frame, weight in combined.items():
        for g in group:
            if combined.get(act_frame(g, frame), Fraction(0)) != weight:
                raise ValueError(
                    "split weights do not assemble to a group-invariant combined weight"
                )
    big = _weighted_cycle_restricted(datum, t, combined, comp)
    _, lhs = pullback(datum, u0_rows, big, _ctx=(sub_datum, ctx))
    # right side: enumerate U0-frames from the phi0 supports
    rhs = zero_class(sub_datum)
    for p0, p1 in pairs:
        # convert phi1 to complement coordinates once
        p1_sub = {}
        for frame, weight in p1.items():
            fr = tuple(
                tuple(_coords_in_basis(field, v, perp, ctx["red"], ctx["pivots"]))
                for v in frame
            )
            p1_sub[fr] = weight
        for x0, w0 in p0.items():
            t_rest = t - space.frame_gram(x0)
            rhs = rhs + _weighted_cycle_restricted(
                sub_datum, t_rest, p1_sub, comp
            ).scale(w0)
    return lhs == rhs, lhs, rhs


# --- natural against weighted cycles, on an adelic surrogate -------------------------------------

class AdelicSurrogate:
    """Finite stand-in for the adelic double quotient: a finite group with a
    chosen plus-part, a compact-open stand-in K, and a base frame."""

    def __init__(self, space: QuadSpaceF, g_fin, g_plus, k_fin, x0):
        self.space = space
        field = space.field
        self.g_fin = close_group(space, g_fin)
        self.g_plus = frozenset(f_rows(field, g) for g in g_plus)
        self.k_fin = frozenset(f_rows(field, g) for g in k_fin)
        for sub, name in ((self.g_plus, "plus part"), (self.k_fin, "K")):
            if not sub <= self.g_fin:
                raise ValueError(f"{name} is not contained in the group")
            for a in sub:
                for b in sub:
                    if f_mat_mul(a, b) not in sub:
                        raise ValueError(f"{name} is not closed under products")
        self.x0 = space.frame(x0)
        ident = f_identity(field, space.m)
        if ident not in self.g_plus or ident not in self.k_fin:
            raise ValueError("subgroups must contain the identity")

    def component_reps(self):
        """Double-coset representatives for plus \\ group / K, canonical order."""
        return double_coset_reps(self.g_fin, self.g_plus, self.k_fin)


def check_natural_vs_weighted(
    surrogate: AdelicSurrogate, phi, n=None, t=None, claimed_natural_weights=None
):
    """Two expansions of a weighted special cycle on the surrogate.

    Definition A groups the plus-orbit of the base frame by components and
    sums phi against component-group orbits.  Definition B re-indexes the
    same sum through the stabilizer of the base frame, double cosets against
    the K-conjugates, and transported subspaces.  The finite bijection
    underlying the re-indexing is verified exhaustively before the two class
    sums are compared.  Claimed natural weights, if given, replace the values
    phi(xi_r^-1 x0) in definition B.  Returns (equal, weighted, natural)."""
    space = surrogate.space
    field = space.field
    phi = _normalize_phi(space, phi)
    x0 = surrogate.x0
    if n is not None and n != len(x0):
        raise ValueError("frame length does not match the base frame")
    gram0 = space.frame_gram(x0)
    if t is not None and t != gram0:
        raise ValueError("Gram matrix does not match the base frame")
    t = gram0
    if not is_totally_psd(t):
        raise ValueError("the base frame Gram matrix must lie in the closed cone")
    # phi must be K-invariant and supported inside the G_fin-orbit of x0 on O_T
    orbit_x0 = {act_frame(g, x0): g for g in sorted(surrogate.g_fin, key=g_sort_key)}
    for frame, weight in phi.items():
        if space.frame_gram(frame) != t:
            raise ValueError("weight supported outside the Gram set of the base frame")
        if frame not in orbit_x0:
            raise ValueError("weight supported outside the group orbit of the base frame")
        for kmat in surrogate.k_fin:
            if phi.get(act_frame(kmat, frame), Fraction(0)) != weight:
                raise ValueError("weight is not K-invariant")

    comp_reps = surrogate.component_reps()
    labels = [str(i) for i in range(len(comp_reps))]
    comp_groups = {}
    for label, gj in zip(labels, comp_reps):
        gj_inv = f_mat_inv(gj)
        conj = frozenset(
            f_mat_mul(f_mat_mul(gj, kmat), gj_inv) for kmat in surrogate.k_fin
        )
        comp_groups[label] = frozenset(g for g in surrogate.g_plus if g in conj)
    datum = OrbitDatum(space, [], components=labels, component_groups=comp_groups)
    n = len(x0)
    r0 = len(span_key(field, x0))

    # --- definition A: weighted sum over component-group orbits -------------------
    a_terms: dict = {}
    plus_orbit = sorted({act_frame(g, x0) for g in surrogate.g_plus}, key=frame_sort_key)
    for label, gj in zip(labels, comp_reps):
        gj_inv = f_mat_inv(gj)
        gamma_j = comp_groups[label]
        supp = [x for x in plus_orbit if phi.get(act_frame(gj_inv, x), Fraction(0)) != 0]
        seen = set()
        for x in supp:
            if x in seen:
                continue
            orb = {act_frame(g, x) for g in gamma_j}
            seen |= orb
            w = span_key(field, x)
            key = (label, datum.orbit_rep(label, w), n - len(w))
            a_terms[key] = a_terms.get(key, Fraction(0)) + phi[act_frame(gj_inv, x)]
    a_class = CycleClass(datum, a_terms)

    # --- definition B: through the frame stabilizer ---------------------------------
    h_group = frozenset(
        g for g in surrogate.g_fin if act_frame(g, x0) == x0
    )
    h_plus = frozenset(g for g in h_group if g in surrogate.g_plus)
    # K-orbit decomposition of the support
    supp_frames = sorted(phi, key=frame_sort_key)
    xi_list = []
    covered = set()
    for frame in supp_frames:
        if frame in covered:
            continue
        korb = {act_frame(kmat, frame) for kmat in surrogate.k_fin}
        covered |= korb
        rep = min(korb, key=frame_sort_key)
        # find xi with xi^-1 x0 = rep
        xi = None
        for g in sorted(surrogate.g_fin, key=g_sort_key):
            if act_frame(f_mat_inv(g), x0) == rep:
                xi = g
                break
        if xi is None:
            raise ValueError("support frame escaped the group orbit")
        xi_list.append((rep, xi))

    b_terms: dict = {}
    for r_idx, (rep, xi) in enumerate(xi_list):
        w_r = phi[rep]
        if claimed_natural_weights is not None:
            w_r = Fraction(claimed_natural_weights[r_idx])
        xi_inv = f_mat_inv(xi)
        k_h = frozenset(
            g
            for g in h_group
            if f_mat_mul(f_mat_mul(xi_inv, g), xi) in surrogate.k_fin
        )
        for h in double_coset_reps(h_group, h_plus, k_h):
            u = f_mat_mul(h, xi)
            # locate the component of u and a witness gamma in the plus part
            gamma_i = None
            label_i = None
            for label, gj in zip(labels, comp_reps):
                for kmat in surrogate.k_fin:
                    cand = f_mat_mul(f_mat_mul(gj, kmat), f_mat_inv(u))
                    if cand in surrogate.g_plus:
                        gamma_i = cand
                        label_i = label
                        break
                if gamma_i is not None:
                    break
            if gamma_i is None:
                raise AssertionError("double coset escaped the component decomposition")
            w0 = span_key(field, x0)
            moved = span_key(field, [act(gamma_i, v) for v in w0])
            key = (label_i, datum.orbit_rep(label_i, moved), n - r0)
            b_terms[key] = b_terms.get(key, Fraction(0)) + w_r
    b_class = CycleClass(datum, b_terms)

    _verify_orbit_coset_bijection(surrogate, phi, comp_reps, labels, comp_groups, xi_list)
    return a_class == b_class, a_class, b_class


def _verify_orbit_coset_bijection(surrogate, phi, comp_reps, labels, comp_groups, xi_list):
    """Exhaustively verify, for every component and support orbit, the
    bijection between component-group orbits on the matched plus-orbit frames
    and double cosets of the frame stabilizer; raises on any mismatch."""
    space = surrogate.space
    x0 = surrogate.x0
    h_group = frozenset(g for g in surrogate.g_fin if act_frame(g, x0) == x0)
    h_plus = frozenset(g for g in h_group if g in surrogate.g_plus)
    for label, gj in zip(labels, comp_reps):
        gamma_j = comp_groups[label]
        for rep, xi in xi_list:
            xi_inv = f_mat_inv(xi)
            k_h = frozenset(
                g
                for g in h_group
                if f_mat_mul(f_mat_mul(xi_inv, g), xi) in surrogate.k_fin
            )
            # left side: Gamma_j-orbits on plus-orbit frames matching g_j K xi^-1 x0
            target = {
                act_frame(f_mat_mul(f_mat_mul(gj, kmat), xi_inv), x0)
                for kmat in surrogate.k_fin
            }
            plus_frames = {act_frame(g, x0) for g in surrogate.g_plus}
            s = sorted(target & plus_frames, key=frame_sort_key)
            orbits = []
            seen = set()
            for x in s:
                if x in seen:
                    continue
                orb = frozenset(act_frame(g, x) for g in gamma_j) & set(s)
                seen |= orb
                orbits.append(orb)
            # right side: double cosets of H_plus \ (H cap G_plus g_j K xi^-1) / K_H
            m_set = set()
            for gp in surrogate.g_plus:
                base = f_mat_mul(gp, gj)
                for kmat in surrogate.k_fin:
                    cand = f_mat_mul(f_mat_mul(base, kmat), xi_inv)
                    if cand in h_group:
                        m_set.add(cand)
            cosets = []
            seen_m = set()
            for hmat in sorted(m_set, key=g_sort_key):
                if hmat in seen_m:
                    continue
                dc = frozenset(
                    f_mat_mul(f_mat_mul(a, hmat), b) for a in h_plus for b in k_h
                ) & m_set
                seen_m |= dc
                cosets.append(dc)
            if len(orbits) != len(cosets):
                raise AssertionError("orbit/double-coset counts differ")
            # explicit matching: x = gamma x0 = g_j k xi^-1 x0 -> gamma^-1 g_j k xi^-1
            matched = set()
            for orb in orbits:
                x = min(orb, key=frame_sort_key)
                gamma = next(
                    g for g in sorted(surrogate.g_plus, key=g_sort_key) if act_frame(g, x0) == x
                )
                kmat = next(
                    km
                    for km in sorted(surrogate.k_fin, key=g_sort_key)
                    if act_frame(f_mat_mul(f_mat_mul(gj, km), f_mat_inv(xi)), x0) == x
                )
                elem = f_mat_mul(
                    f_mat_mul(f_mat_inv(gamma), f_mat_mul(gj, kmat)), f_mat_inv(xi)
                )
                hit = [i for i, dc in enumerate(cosets) if elem in dc]
                if len(hit) != 1 or hit[0] in matched:
                    raise AssertionError("orbit-to-coset map failed to be a bijection")
                matched.add(hit[0])


# --- cycle-valued series --------------------------------------------------------------------

class CycleClassRing(CoefficientRing):
    """Cycle classes on a fixed orbit datum, multiplied by intersection."""

    def __init__(self, datum: OrbitDatum):
        self.datum = datum
        self.name = "cycle"

    def zero(self):
        return zero_class(self.datum)

    def one(self):
        return unit_class(self.datum)

    def add(self, a, b):
        return a + b

    def neg(self, a):
        return a.scale(-1)

    def mul(self, a, b):
        return intersect(self.datum, a, b)

    def eq(self, a, b):
        return a == b

    def is_zero(self, a):
        return a.is_zero()

    def coerce(self, value):
        if isinstance(value, CycleClass):
            return value
        raise TypeError("cycle ring values must be cycle classes")


def series_of_cycles(datum: OrbitDatum, n: int, phi, cone, height_bound, component=None) -> FormalSeries:
    """Generating series with cycle-class coefficients.

    Groups the supported frames by their Gram matrix and places the
    corresponding weighted cycle at each cone point of height at most the
    bound; the zero frame lands in the constant term as a pure c^n class."""
    space = datum.space
    if cone.field != space.field or cone.n != n:
        raise ValueError("cone lattice does not match the frame shape")
    phi = _normalize_phi(space, phi)
    ring = CycleClassRing(datum)
    by_t: dict = {}
    for frame, weight in phi.items():
        if len(frame) != n:
            raise ValueError("weight function holds a frame of the wrong length")
        t = space.frame_gram(frame)
        if not t.is_zero() and cone.height(t) > Fraction(height_bound):
            continue
        by_t.setdefault(t, {})[frame] = weight
    coeffs = {}
    for t, part in by_t.items():
        coeffs[t] = weighted_cycle(datum, n, t, part, component)
    return FormalSeries(cone, height_bound, ring, coeffs)


# --- serialization ---------------------------------------------------------------------

def orbit_datum_to_json(datum: OrbitDatum, generators) -> dict:
    """JSON form {space, generators, components}; generators must regenerate
    the stored group (callers keep the generating set, the datum the closure).
    Matrix entries serialize as rational coordinate lists over the field basis."""
    space = datum.space
    field = space.field
    gens = []
    for g in generators:
        rows = f_rows(field, g)
        gens.append([[[str(c) for c in e.coords] for e in row] for row in rows])
    return {
        "space": {
            "field": field.to_json_dict(),
            "gram": space.gram.to_json_list(),
            "d_plus": space.d_plus,
        },
        "generators": gens,
        "components": list(datum.components),
    }


def orbit_datum_from_json(data: dict) -> OrbitDatum:
    sp = data["space"]
    field = NumberField.from_json_dict(sp["field"])
    flat = sp["gram"]
    m = math.isqrt(len(flat))
    gram = SymMatF.from_json_list(field, m, flat)
    space = QuadSpaceF(field, gram.rows, int(sp["d_plus"]))
    gens = [
        [[field.element([Fraction(c) for c in e]) for e in row] for row in g]
        for g in data.get("generators", [])
    ]
    components = data.get("components", ["0"])
    return OrbitDatum(space, gens, components=components)


def cycle_class_to_json(cls: CycleClass) -> list:
    """Sorted term list [{component, basis, k, coeff}]."""
    out = []
    for (comp, w, k), coeff in sorted(
        cls.terms.items(), key=lambda kv: (kv[0][0], w_sort_key(kv[0][1]), kv[0][2])
    ):
        out.append(
            {
                "component": comp,
                "basis": [[[str(c) for c in e.coords] for e in row] for row in w],
                "k": k,
                "coeff": str(coeff),
            }
        )
    return out


def weight_function_from_json(space: QuadSpaceF, data: list) -> dict:
    """JSON form [{frame: [[rational coords per field degree] per vector], weight}]."""
    phi = {}
    for item in data:
        frame = []
        for vec in item["frame"]:
            if len(vec) != space.m:
                raise ValueError("frame vector has the wrong length")
            coords = []
            for ent in vec:
                if isinstance(ent, list):
                    coords.append(space.field.element([Fraction(x) for x in ent]))
                else:
                    coords.append(space.field.coerce(Fraction(ent)))
            frame.append(tuple(coords))
        phi[tuple(frame)] = Fraction(item["weight"])
    return phi


def relabel(datum: OrbitDatum, eta) -> tuple[OrbitDatum, "callable"]:
    """Conjugated datum eta Gamma eta^-1 plus the induced map on classes."""
    space = datum.space
    field = space.field
    em = f_rows(field, eta)
    gm = space.gram.rows
    if f_mat_mul(f_mat_mul(f_transpose(em), gm), em) != gm:
        raise ValueError("relabeling must preserve the form")
    em_inv = f_mat_inv(em)
    groups = {
        c: frozenset(f_mat_mul(f_mat_mul(em, g), em_inv) for g in datum.groups[c])
        for c in datum.components
    }
    new_datum = OrbitDatum(space, [], components=datum.components, component_groups=groups)

    def map_class(cls: CycleClass) -> CycleClass:
        out = {}
        for (comp, w, k), coeff in cls.terms.items():
            moved = span_key(field, [act(em, v) for v in w])
            key = (comp, new_datum.orbit_rep(comp, moved), k)
            out[key] = out.get(key, Fraction(0)) + coeff
        return CycleClass(new_datum, out)

    return new_datum, map_class
