"""Hodge-degree bookkeeping for theta-stable parabolic data on O(m,2) factors.

Everything here is closed-form integer arithmetic: the (R+, R-) dimension
pair attached to a parabolic datum, the exhaustive enumeration of off-diagonal
Hodge degrees, the low-degree Betti vanishing bound, the unconditional
modularity range, and the auxiliary-dimension shift parameter used to extend
the vanishing range by enlarging the space.
"""
from __future__ import annotations


class ParabolicDatum:
    """Integer datum (m, r, s, sign_a0, delta_plus, delta_minus).

    r counts the nonzero paired rotation angles, s flags a nonzero central
    angle (with its sign), and delta_+/delta_- count coincidences between the
    paired angles and the central one; coincidences are only meaningful when
    s = 1."""

    def __init__(self, m, r, s, sign_a0=None, delta_plus=0, delta_minus=0):
        if m < 1:
            raise ValueError("m must be a positive integer")
        if s not in (0, 1):
            raise ValueError("s must be 0 or 1")
        if not 0 <= r <= m // 2:
            raise ValueError("r must satisfy 0 <= r <= floor(m/2)")
        if 2 * (r + s) >= m:
            raise ValueError("r + s must be less than m/2")
        if delta_plus < 0 or delta_minus < 0:
            raise ValueError("coincidence counts must be nonnegative")
        if delta_plus + delta_minus > r:
            raise ValueError("coincidence counts cannot exceed r")
        if s == 0:
            if delta_plus or delta_minus:
                raise ValueError("coincidence counts require s = 1")
            if sign_a0 is not None:
                raise ValueError("sign_a0 is unused when s = 0")
        else:
            if sign_a0 not in (1, -1):
                raise ValueError("s = 1 requires sign_a0 = +1 or -1")
        self.m = m
        self.r = r
        self.s = s
        self.sign_a0 = sign_a0
        self.delta_plus = delta_plus
        self.delta_minus = delta_minus

    def __repr__(self):
        return (
            f"ParabolicDatum(m={self.m}, r={self.r}, s={self.s}, "
            f"sign_a0={self.sign_a0}, delta=({self.delta_plus}, {self.delta_minus}))"
        )


def r_plus_minus(p: ParabolicDatum) -> tuple[int, int]:
    """The dimension pair (R+, R-) of the positive-eigenvalue nilpotent part.

    s = 0 gives the balanced pair (r, r); s = 1 splits m - delta_+ - delta_-
    across the two sides according to the sign of the central angle."""
    if p.s == 0:
        return (p.r, p.r)
    if p.sign_a0 > 0:
        return (p.r - p.delta_plus, p.m - p.r - p.delta_minus)
    return (p.m - p.r - p.delta_plus, p.r - p.delta_minus)


def all_data(m: int):
    """Every valid datum for the given m, exhaustively."""
    for s in (0, 1):
        for r in range(0, m // 2 + 1):
            if 2 * (r + s) >= m:
                continue
            if s == 0:
                yield ParabolicDatum(m, r, 0)
                continue
            for sign in (1, -1):
                for dp in range(r + 1):
                    for dm in range(r - dp + 1):
                        yield ParabolicDatum(m, r, 1, sign, dp, dm)


def allowed_offdiagonal_degrees(m: int) -> set[int]:
    """All degrees R+ + R- realized with R+ != R-.

    The minimum of the returned set (when nonempty) is at least
    m - floor(m/2); the bound is verified here exhaustively."""
    if m < 1:
        raise ValueError("m must be a positive integer")
    degrees = set()
    for p in all_data(m):
        rp, rm = r_plus_minus(p)
        if rp != rm:
            degrees.add(rp + rm)
    bound = m - m // 2
    if degrees and min(degrees) < bound:
        raise AssertionError("an off-diagonal degree undercuts the proven bound")
    return degrees


def betti_vanishing_max(m: int) -> int:
    """Largest k with H^(2k-1) forced to vanish, i.e. 2k - 1 < ceil(m/2);
    0 when no k >= 1 qualifies."""
    if m < 1:
        raise ValueError("m must be a positive integer")
    return ((m + 1) // 2) // 2


def unconditional_modularity_range(m: int, d_plus: int):
    """Largest genus n with n*d_plus below the convergence bound, or None.

    The bound is (m+2)/4 for even m and (m+3)/4 for odd m, strictly."""
    if m < 1 or d_plus < 1:
        raise ValueError("m and d_plus must be positive integers")
    num = m + 2 if m % 2 == 0 else m + 3
    n = (num - 1) // (4 * d_plus)
    return n if n >= 1 else None


def required_ell(n: int, d_plus: int, m: int) -> int:
    """Minimal dimension-shift parameter ell making degree 2*n*d_plus - 1
    fall inside the vanishing range after replacing m by m + 4*ell."""
    if n < 1 or d_plus < 1 or m < 1:
        raise ValueError("n, d_plus and m must be positive integers")
    ell = n * d_plus + 1
    m_shift = m + 4 * ell
    if betti_vanishing_max(m_shift) < n * d_plus:
        raise AssertionError("dimension shift failed to reach the vanishing range")
    return ell


def degree_table(ms, d_plus: int = 1):
    """Rows (m, min off-diagonal degree or None, betti max, modularity range)
    for the CLI table output."""
    rows = []
    for m in ms:
        degs = allowed_offdiagonal_degrees(m)
        rows.append(
            {
                "m": m,
                "min_offdiagonal": min(degs) if degs else None,
                "betti_vanishing_max": betti_vanishing_max(m),
                "modularity_range": unconditional_modularity_range(m, d_plus),
            }
        )
    return rows
