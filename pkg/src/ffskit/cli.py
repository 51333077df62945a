"""Command-line front end over the library.

Subcommands list cone lattice points, expand and multiply theta series,
evaluate series numerically, measure decomposition lengths, run the cycle
identity checks, print Hodge bound tables, and show discriminant groups.
Every byte of output is canonical JSON (sorted keys, fixed separators) or a
fixed-layout table, so identical inputs always produce identical output.

Exit codes: 0 success (and, for verify, identity holds); 1 identity fails;
2 malformed input file or usage; 3 semantic validation failure, including
neatness violations.
"""
from __future__ import annotations

import argparse
import json
import sys
from contextlib import contextmanager
from fractions import Fraction

from . import cyclealg, hodgebound
from .cyclealg import NeatnessError, OrbitDatum
from .ffs import (
    FormalSeries,
    lambda_,
    multiply,
    series_from_json_lines,
    series_to_json_lines,
)
from .numberfield import FieldValidationError, NumberField
from .symcone import ConeLattice, SymMatF
from .theta import QuadLattice, TauPoint, numeric_eval, _default_dps

EXIT_OK = 0
EXIT_IDENTITY = 1
EXIT_SCHEMA = 2
EXIT_VALIDATION = 3


class SchemaError(Exception):
    """An input file or inline JSON argument does not parse into the
    documented shape."""


def _dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


@contextmanager
def _schema_scope(what: str):
    """Convert shape/parse failures inside input loading into SchemaError."""
    try:
        yield
    except SchemaError:
        raise
    except NeatnessError:
        raise
    except (KeyError, IndexError, TypeError, ValueError, ZeroDivisionError) as exc:
        raise SchemaError(f"malformed {what}: {exc}") from exc


def _load_json_file(path: str, what: str):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise SchemaError(f"cannot read {what} {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{what} {path} is not valid JSON: {exc}") from exc


def _load_field(path: str) -> NumberField:
    data = _load_json_file(path, "field file")
    with _schema_scope(f"field file {path}"):
        return NumberField.from_json_dict(data)


def _load_lattice(path: str) -> QuadLattice:
    data = _load_json_file(path, "lattice file")
    with _schema_scope(f"lattice file {path}"):
        return QuadLattice.from_json_dict(data)


def _load_series(path: str) -> FormalSeries:
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise SchemaError(f"cannot read series file {path}: {exc}") from exc
    with _schema_scope(f"series file {path}"):
        return series_from_json_lines(lines)


def _load_tau(path: str) -> TauPoint:
    data = _load_json_file(path, "tau file")
    with _schema_scope(f"tau file {path}"):
        return TauPoint.from_json_dict(data)


def _load_orbit(path: str) -> OrbitDatum:
    data = _load_json_file(path, "orbit file")
    with _schema_scope(f"orbit file {path}"):
        return cyclealg.orbit_datum_from_json(data)


def _emit(args, text: str) -> None:
    if getattr(args, "output", None):
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _mp_str(x, digits: int) -> str:
    import mpmath

    return mpmath.nstr(mpmath.mpf(x), digits)


# --- plain commands ----------------------------------------------------------------------


def cmd_cone_enum(args) -> int:
    field = _load_field(args.field)
    cone = ConeLattice(field, args.n, args.nu)
    lines = []
    if args.bound >= 0:
        zero = SymMatF.zero(field, args.n)
        lines.append(_dumps({"height": "0", "t": zero.to_json_list()}))
    for t in cone.enumerate_cone(args.bound):
        lines.append(_dumps({"height": str(cone._height_raw(t)), "t": t.to_json_list()}))
    _emit(args, "".join(ln + "\n" for ln in lines))
    return EXIT_OK


def cmd_theta(args) -> int:
    from .theta import theta_expansion

    lat = _load_lattice(args.lattice)
    mu = None
    if args.mu is not None:
        with _schema_scope("--mu"):
            data = json.loads(args.mu)
            mu = [[Fraction(c) for c in vec] for vec in data]
    series = theta_expansion(lat, args.n, args.bound, nu=args.nu, mu=mu)
    _emit(args, "".join(ln + "\n" for ln in series_to_json_lines(series)))
    return EXIT_OK


def cmd_multiply(args) -> int:
    fa = _load_series(args.a)
    fb = _load_series(args.b)
    product = multiply(fa, fb)
    _emit(args, "".join(ln + "\n" for ln in series_to_json_lines(product)))
    return EXIT_OK


def cmd_eval(args) -> int:
    import mpmath

    series = _load_series(args.series)
    tau = _load_tau(args.tau)
    dps = args.dps if args.dps is not None else _default_dps()
    if dps < 1:
        raise ValueError("precision must be a positive number of digits")
    value, tail = numeric_eval(series, tau, dps=dps)
    value = mpmath.mpc(value)
    report = {
        "dps": dps,
        "value": {"re": _mp_str(value.real, dps), "im": _mp_str(value.imag, dps)},
        "tail_bound": _mp_str(tail, 10),
    }
    _emit(args, _dumps(report) + "\n")
    return EXIT_OK


def cmd_lambda(args) -> int:
    field = _load_field(args.field)
    with _schema_scope("matrix argument"):
        entries = json.loads(args.matrix)
        t = SymMatF.from_json_list(field, args.n, entries)
    cone = ConeLattice(field, args.n, args.nu)
    length = lambda_(cone, t)
    report = {"height": str(cone.height(t)), "lambda": length}
    _emit(args, _dumps(report) + "\n")
    return EXIT_OK


def cmd_discgroup(args) -> int:
    lat = _load_lattice(args.lattice)
    info = lat.discriminant_group(rep_cap=args.rep_cap)
    report = {
        "invariant_factors": [int(x) for x in info["invariant_factors"]],
        "order": int(info["order"]),
        "coset_reps": [[str(c) for c in rep] for rep in info["coset_reps"]],
    }
    _emit(args, _dumps(report) + "\n")
    return EXIT_OK


def cmd_hodge(args) -> int:
    if args.m_min < 1 or args.m_max < args.m_min:
        raise ValueError("need 1 <= m-min <= m-max")
    rows = hodgebound.degree_table(range(args.m_min, args.m_max + 1), args.d_plus)
    for row in rows:
        row["required_ell"] = hodgebound.required_ell(args.n, args.d_plus, row["m"])
    columns = [
        "m",
        "min_offdiagonal",
        "betti_vanishing_max",
        "modularity_range",
        "required_ell",
    ]

    def cell(row, col):
        value = row[col]
        return "none" if value is None else str(value)

    if args.format == "csv":
        import csv
        import io

        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([cell(row, col) for col in columns])
        _emit(args, buf.getvalue())
    else:
        lines = [
            "| " + " | ".join(columns) + " |",
            "| " + " | ".join("---" for _ in columns) + " |",
        ]
        for row in rows:
            lines.append("| " + " | ".join(cell(row, col) for col in columns) + " |")
        _emit(args, "".join(ln + "\n" for ln in lines))
    return EXIT_OK


# --- verify ------------------------------------------------------------------------------


def _parse_field_matrix(field: NumberField, rows):
    return tuple(
        tuple(
            field.element([Fraction(c) for c in ent])
            if isinstance(ent, list)
            else field.coerce(Fraction(ent))
            for ent in row
        )
        for row in rows
    )


def _parse_vectors(field: NumberField, m: int, rows):
    out = []
    for vec in rows:
        if len(vec) != m:
            raise ValueError("vector has the wrong length")
        out.append(
            tuple(
                field.element([Fraction(c) for c in ent])
                if isinstance(ent, list)
                else field.coerce(Fraction(ent))
                for ent in vec
            )
        )
    return out


def _parse_symmat(field: NumberField, n: int, data) -> SymMatF:
    return SymMatF.from_json_list(field, n, data)


def _class_pair_report(check: str, equal: bool, lhs, rhs) -> dict:
    return {
        "check": check,
        "equal": bool(equal),
        "lhs": cyclealg.cycle_class_to_json(lhs),
        "rhs": cyclealg.cycle_class_to_json(rhs),
    }


def _verify_product(datum: OrbitDatum, params: dict) -> dict:
    space = datum.space
    field = space.field
    with _schema_scope("params file"):
        n1 = int(params["n1"])
        n2 = int(params["n2"])
        t1 = _parse_symmat(field, n1, params["t1"])
        t2 = _parse_symmat(field, n2, params["t2"])
        phi1 = cyclealg.weight_function_from_json(space, params["phi1"])
        phi2 = cyclealg.weight_function_from_json(space, params["phi2"])
        component = params.get("component")
        claimed = None
        if "claimed_phi12" in params:
            claimed = {}
            for item in params["claimed_phi12"]:
                cross = _parse_field_matrix(field, item["cross"])
                claimed[cross] = cyclealg.weight_function_from_json(space, item["phi"])
    equal, lhs, rhs = cyclealg.check_product_formula(
        datum, n1, t1, phi1, n2, t2, phi2, claimed_phi12=claimed, component=component
    )
    return _class_pair_report("product", equal, lhs, rhs)


def _verify_pullback(datum: OrbitDatum, params: dict) -> dict:
    space = datum.space
    field = space.field
    with _schema_scope("params file"):
        u0 = _parse_vectors(field, space.m, params["u0"])
        n = int(params["n"])
        t = _parse_symmat(field, n, params["t"])
        pairs = [
            (
                cyclealg.weight_function_from_json(space, item["phi0"]),
                cyclealg.weight_function_from_json(space, item["phi1"]),
            )
            for item in params["phi_pairs"]
        ]
        claimed = None
        if "claimed_phi_total" in params:
            claimed = cyclealg.weight_function_from_json(space, params["claimed_phi_total"])
        component = params.get("component")
    equal, lhs, rhs = cyclealg.check_pullback_factorization(
        datum, u0, n, t, pairs, claimed_phi_total=claimed, component=component
    )
    return _class_pair_report("pullback", equal, lhs, rhs)


def _verify_natural(datum: OrbitDatum, orbit_data: dict, params: dict) -> dict:
    space = datum.space
    field = space.field
    with _schema_scope("orbit file"):
        g_fin = [
            [[field.element([Fraction(c) for c in ent]) for ent in row] for row in g]
            for g in orbit_data.get("generators", [])
        ]
    with _schema_scope("params file"):
        g_plus_gens = [_parse_field_matrix(field, g) for g in params["g_plus"]]
        k_gens = [_parse_field_matrix(field, g) for g in params.get("k_fin", [])]
        x0 = tuple(_parse_vectors(field, space.m, params["x0"]))
        phi = cyclealg.weight_function_from_json(space, params["phi"])
        n = int(params["n"]) if "n" in params else None
        t = _parse_symmat(field, n, params["t"]) if "t" in params else None
        claimed = params.get("claimed_natural_weights")
    g_plus = cyclealg.close_group(space, g_plus_gens)
    k_fin = cyclealg.close_group(space, k_gens)
    surrogate = cyclealg.AdelicSurrogate(space, g_fin, g_plus, k_fin, x0)
    equal, weighted, natural = cyclealg.check_natural_vs_weighted(
        surrogate, phi, n=n, t=t, claimed_natural_weights=claimed
    )
    return _class_pair_report("natural", equal, weighted, natural)


def _diagonal_restriction(f: FormalSeries, n: int, cone_out: ConeLattice) -> FormalSeries:
    """Collapse each 2n x 2n cone point to the sum of its two diagonal n x n
    blocks — the series shadow of evaluating at a pair of equal points."""
    ring = f.ring
    field = f.cone.field
    out: dict[SymMatF, object] = {}
    for t, a in f.coeffs.items():
        top = SymMatF(field, [[t.entry(i, k) for k in range(n)] for i in range(n)])
        bot = SymMatF(
            field, [[t.entry(n + i, n + k) for k in range(n)] for i in range(n)]
        )
        u = top + bot
        out[u] = ring.add(out[u], a) if u in out else a
    return FormalSeries(cone_out, f.height_bound, ring, out)


def _series_terms_json(f: FormalSeries) -> dict:
    return {
        "height_bound": str(f.height_bound),
        "terms": [
            {"T": t.to_json_list(), "coeff": cyclealg.cycle_class_to_json(a)}
            for t, a in f.items_sorted()
        ],
    }


def _verify_series_product(datum: OrbitDatum, params: dict) -> dict:
    space = datum.space
    with _schema_scope("params file"):
        n = int(params.get("n", 1))
        nu = int(params.get("nu", 1))
        bound = Fraction(params["height_bound"])
        phi1 = cyclealg.weight_function_from_json(space, params["phi1"])
        phi2 = cyclealg.weight_function_from_json(space, params["phi2"])
        component = params.get("component")
    comp = str(component) if component is not None else datum.components[0]
    p1 = cyclealg._orbit_close_phi(datum, comp, cyclealg._normalize_phi(space, phi1))
    p2 = cyclealg._orbit_close_phi(datum, comp, cyclealg._normalize_phi(space, phi2))
    cone = ConeLattice(space.field, n, nu)
    s1 = cyclealg.series_of_cycles(datum, n, p1, cone, bound, component)
    s2 = cyclealg.series_of_cycles(datum, n, p2, cone, bound, component)
    lhs = multiply(s1, s2)
    phi12 = {x + y: w1 * w2 for x, w1 in p1.items() for y, w2 in p2.items()}
    cone2 = ConeLattice(space.field, 2 * n, nu)
    s12 = cyclealg.series_of_cycles(datum, 2 * n, phi12, cone2, bound, component)
    rhs = _diagonal_restriction(s12, n, cone)
    return {
        "check": "series-product",
        "equal": lhs == rhs,
        "lhs": _series_terms_json(lhs),
        "rhs": _series_terms_json(rhs),
    }


def cmd_verify(args) -> int:
    orbit_data = _load_json_file(args.orbit, "orbit file")
    with _schema_scope(f"orbit file {args.orbit}"):
        datum = cyclealg.orbit_datum_from_json(orbit_data)
    params = _load_json_file(args.params, "params file")
    if not isinstance(params, dict):
        raise SchemaError("params file must hold a JSON object")
    if args.check == "product":
        report = _verify_product(datum, params)
    elif args.check == "pullback":
        report = _verify_pullback(datum, params)
    elif args.check == "natural":
        report = _verify_natural(datum, orbit_data, params)
    else:
        report = _verify_series_product(datum, params)
    _emit(args, _dumps(report) + "\n")
    return EXIT_OK if report["equal"] else EXIT_IDENTITY


# --- parser ------------------------------------------------------------------------------


def _fraction_arg(text: str) -> Fraction:
    return Fraction(text)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ffskit",
        description="Exact cone series, theta expansions, and cycle identity checks.",
    )
    parser.add_argument(
        "--jobs",
        type=int,
        default=1,
        help="worker budget hint for enumeration (results do not depend on it)",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("cone-enum", help="list cone lattice points up to a height bound")
    p.add_argument("field", help="field descriptor JSON file")
    p.add_argument("-n", type=int, required=True, help="matrix size")
    p.add_argument("--nu", type=int, default=1, help="level denominator")
    p.add_argument("-B", "--bound", type=_fraction_arg, required=True, help="height bound")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_cone_enum)

    p = sub.add_parser("theta", help="theta series of a lattice as a series file")
    p.add_argument("lattice", help="lattice JSON file")
    p.add_argument("-n", type=int, default=1, help="genus")
    p.add_argument("--nu", type=int, default=1, help="level denominator")
    p.add_argument(
        "--mu",
        help="coset representatives as JSON: one coordinate vector per column, "
        'e.g. \'[["1/2"]]\' (default: the zero coset)',
    )
    p.add_argument("-B", "--bound", type=_fraction_arg, required=True, help="height bound")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_theta)

    p = sub.add_parser("multiply", help="product of two series files")
    p.add_argument("a", help="first series file")
    p.add_argument("b", help="second series file")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_multiply)

    p = sub.add_parser("eval", help="numeric value of a series at a point")
    p.add_argument("series", help="series file")
    p.add_argument("tau", help="tau JSON file")
    p.add_argument(
        "--dps",
        type=int,
        default=None,
        help="decimal precision (default: FFSKIT_PRECISION or 50)",
    )
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("lambda", help="decomposition length of a cone lattice point")
    p.add_argument("field", help="field descriptor JSON file")
    p.add_argument("-n", type=int, required=True, help="matrix size")
    p.add_argument("--nu", type=int, default=1, help="level denominator")
    p.add_argument(
        "-T",
        "--matrix",
        required=True,
        help="matrix as JSON: flat row-major list of coordinate vectors",
    )
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_lambda)

    p = sub.add_parser("verify", help="run a cycle identity check and report both sides")
    p.add_argument("orbit", help="orbit datum JSON file")
    p.add_argument(
        "--check",
        required=True,
        choices=["product", "pullback", "natural", "series-product"],
    )
    p.add_argument("--params", required=True, help="check parameters JSON file")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("hodge", help="degree bound table over a range of m")
    p.add_argument("--m-min", type=int, default=1)
    p.add_argument("--m-max", type=int, required=True)
    p.add_argument("--d-plus", type=int, default=1)
    p.add_argument("-n", type=int, default=1, help="genus for the required-ell column")
    p.add_argument("--format", choices=["markdown", "csv"], default="markdown")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_hodge)

    p = sub.add_parser("discgroup", help="discriminant group of a lattice")
    p.add_argument("lattice", help="lattice JSON file")
    p.add_argument("--rep-cap", type=int, default=512)
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_discgroup)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.jobs < 1:
        parser.error("--jobs must be a positive integer")
    try:
        return args.func(args)
    except SchemaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except NeatnessError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (FieldValidationError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
