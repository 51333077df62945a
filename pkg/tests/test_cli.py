from __future__ import annotations

import json

import mpmath
import pytest

from ffskit import cli
from ffskit import cyclealg as ca
from ffskit.cyclealg import OrbitDatum, QuadSpaceF
from ffskit.numberfield import rationals
from ffskit.theta import QuadLattice

QQ = rationals()

FLIP2 = [[1, 0, 0], [0, -1, 0], [0, 0, 1]]
SWAP12 = [[0, 1, 0], [1, 0, 0], [0, 0, 1]]
FLIPXY = [[-1, 0, 0], [0, -1, 0], [0, 0, 1]]


def run(capsys, argv):
    code = cli.main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def write_json(path, obj):
    path.write_text(json.dumps(obj))
    return str(path)


@pytest.fixture
def field_file(tmp_path):
    return write_json(tmp_path / "field.json", QQ.to_json_dict())


@pytest.fixture
def lat2_file(tmp_path):
    lat = QuadLattice(QQ, [[2]])
    return write_json(tmp_path / "lat2.json", lat.to_json_dict())


@pytest.fixture
def tau_i_file(tmp_path):
    return write_json(tmp_path / "tau.json", {"tau": [{"re": [["0"]], "im": [["1"]]}]})


@pytest.fixture
def orbit_file(tmp_path):
    space = QuadSpaceF(QQ, [[2, 0, 0], [0, 2, 0], [0, 0, 2]], 1)
    datum = OrbitDatum(space, [FLIP2])
    return write_json(tmp_path / "orbit.json", ca.orbit_datum_to_json(datum, [FLIP2]))


# --- plain commands ----------------------------------------------------------------


def test_cone_enum_lines(capsys, field_file):
    code, out, _ = run(capsys, ["cone-enum", field_file, "-n", "1", "-B", "3"])
    assert code == 0
    lines = out.splitlines()
    assert len(lines) == 4
    assert [json.loads(ln)["height"] for ln in lines] == ["0", "1", "2", "3"]

    code, out, _ = run(capsys, ["cone-enum", field_file, "-n", "1", "-B", "0"])
    assert code == 0
    assert out.splitlines() == ['{"height":"0","t":[["0"]]}']


def test_cone_enum_error_codes(capsys, tmp_path, field_file):
    broken = tmp_path / "broken.json"
    broken.write_text("{nope")
    code, _, err = run(capsys, ["cone-enum", str(broken), "-n", "1", "-B", "2"])
    assert code == 2
    assert "broken.json" in err

    code, _, err = run(capsys, ["cone-enum", field_file, "-n", "0", "-B", "2"])
    assert code == 3
    assert "positive" in err


def test_theta_series_file(capsys, lat2_file):
    code, out, _ = run(capsys, ["theta", lat2_file, "-n", "1", "-B", "4"])
    assert code == 0
    lines = out.splitlines()
    header = json.loads(lines[0])
    assert header["ring"] == "rational" and header["height_bound"] == "4"
    terms = [json.loads(ln) for ln in lines[1:]]
    assert [(t["T"], t["coeff"]) for t in terms] == [
        ([["0"]], "1"),
        ([["1"]], "2"),
        ([["4"]], "2"),
    ]


def test_theta_coset_option(capsys, lat2_file):
    code, out, _ = run(
        capsys, ["theta", lat2_file, "-n", "1", "-B", "3", "--nu", "4", "--mu", '[["1/2"]]']
    )
    assert code == 0
    terms = [json.loads(ln) for ln in out.splitlines()[1:]]
    assert [(t["T"], t["coeff"]) for t in terms] == [
        ([["1/4"]], "2"),
        ([["9/4"]], "2"),
    ]
    # malformed JSON is a schema error; a level too small for the coset is
    # a semantic one
    code, _, err = run(capsys, ["theta", lat2_file, "-B", "3", "--mu", "{"])
    assert code == 2 and "--mu" in err
    code, _, _ = run(capsys, ["theta", lat2_file, "-B", "3", "--mu", '[["1/2"]]'])
    assert code == 3


def test_multiply_matches_direct_sum_lattice(capsys, tmp_path, lat2_file):
    lat22 = QuadLattice(QQ, [[2, 0], [0, 2]])
    lat22_file = write_json(tmp_path / "lat22.json", lat22.to_json_dict())
    a = tmp_path / "a.series"
    prod = tmp_path / "prod.series"
    direct = tmp_path / "direct.series"
    assert cli.main(["theta", lat2_file, "-B", "6", "-o", str(a)]) == 0
    assert cli.main(["multiply", str(a), str(a), "-o", str(prod)]) == 0
    assert cli.main(["theta", str(lat22_file), "-B", "6", "-o", str(direct)]) == 0
    assert prod.read_bytes() == direct.read_bytes()


def test_multiply_rejects_mismatched_cones(capsys, tmp_path, lat2_file):
    a = tmp_path / "a.series"
    b = tmp_path / "b.series"
    assert cli.main(["theta", lat2_file, "-B", "3", "-o", str(a)]) == 0
    assert cli.main(["theta", lat2_file, "-n", "2", "-B", "3", "-o", str(b)]) == 0
    code, _, err = run(capsys, ["multiply", str(a), str(b)])
    assert code == 3
    assert "different cone" in err


def test_eval_theta_at_i(capsys, tmp_path, lat2_file, tau_i_file):
    series = tmp_path / "t.series"
    assert cli.main(["theta", lat2_file, "-B", "16", "-o", str(series)]) == 0
    code, out, _ = run(capsys, ["eval", str(series), tau_i_file, "--dps", "40"])
    assert code == 0
    report = json.loads(out)
    assert report["dps"] == 40
    with mpmath.workdps(45):
        direct = 1 + 2 * sum(mpmath.exp(-2 * mpmath.pi * x * x) for x in range(1, 12))
        got = mpmath.mpf(report["value"]["re"])
        assert abs(got - direct) < 1e-10
        assert abs(mpmath.mpf(report["value"]["im"])) < 1e-20
        assert mpmath.mpf(report["tail_bound"]) < 1e-10


def test_eval_precision_env(capsys, monkeypatch, tmp_path, lat2_file, tau_i_file):
    series = tmp_path / "t.series"
    assert cli.main(["theta", lat2_file, "-B", "4", "-o", str(series)]) == 0
    monkeypatch.setenv("FFSKIT_PRECISION", "21")
    code, out, _ = run(capsys, ["eval", str(series), tau_i_file])
    assert code == 0
    assert json.loads(out)["dps"] == 21


def test_lambda_command(capsys, field_file):
    code, out, _ = run(capsys, ["lambda", field_file, "-n", "1", "-T", '[["5"]]'])
    assert code == 0
    assert json.loads(out) == {"height": "5", "lambda": 5}

    code, _, err = run(capsys, ["lambda", field_file, "-n", "1", "-T", '[["0"]]'])
    assert code == 3
    assert "zero matrix" in err

    code, _, _ = run(capsys, ["lambda", field_file, "-n", "1", "-T", "not json"])
    assert code == 2


def test_discgroup_command(capsys, lat2_file):
    code, out, _ = run(capsys, ["discgroup", lat2_file])
    assert code == 0
    report = json.loads(out)
    assert report["invariant_factors"] == [2]
    assert report["order"] == 2
    assert report["coset_reps"] == [["0"], ["1/2"]]


def test_hodge_table(capsys):
    code, out, _ = run(capsys, ["hodge", "--m-max", "5"])
    assert code == 0
    rows = out.splitlines()
    assert rows[0].split("|")[1].strip() == "m"
    by_m = {ln.split("|")[1].strip(): ln for ln in rows[2:]}
    assert by_m["4"].split("|")[4].strip() == "1"  # modularity range at m=4, d+=1
    assert by_m["1"].split("|")[2].strip() == "none"

    code, out, _ = run(capsys, ["hodge", "--m-max", "1", "--d-plus", "2", "--format", "csv"])
    assert code == 0
    header, row = out.splitlines()
    assert header.split(",") == [
        "m",
        "min_offdiagonal",
        "betti_vanishing_max",
        "modularity_range",
        "required_ell",
    ]
    assert row.split(",") == ["1", "none", "0", "none", "3"]

    code, _, _ = run(capsys, ["hodge", "--m-max", "0"])
    assert code == 3


# --- verify -----------------------------------------------------------------------


def phi_json(*entries):
    return [{"frame": [[str(c) for c in v] for v in frame], "weight": str(w)} for frame, w in entries]


def test_verify_product(capsys, tmp_path, orbit_file):
    params = {
        "n1": 1,
        "t1": [["1"]],
        "phi1": phi_json((((1, 0, 0),), 1)),
        "n2": 1,
        "t2": [["1"]],
        "phi2": phi_json((((1, 0, 0),), 1)),
    }
    pfile = write_json(tmp_path / "p.json", params)
    code, out, _ = run(capsys, ["verify", orbit_file, "--check", "product", "--params", pfile])
    assert code == 0
    report = json.loads(out)
    assert report["equal"] is True
    assert report["lhs"] == report["rhs"]
    assert report["lhs"][0]["k"] == 1

    # a corrupted claimed product weight flips the verdict and the report shows both sides
    params["claimed_phi12"] = [
        {"cross": [["1"]], "phi": phi_json((((1, 0, 0), (1, 0, 0)), 5))}
    ]
    bad = write_json(tmp_path / "bad.json", params)
    code, out, _ = run(capsys, ["verify", orbit_file, "--check", "product", "--params", bad])
    assert code == 1
    report = json.loads(out)
    assert report["equal"] is False
    assert report["lhs"] != report["rhs"]


def test_verify_neatness_violation(capsys, tmp_path, orbit_file):
    params = {
        "n1": 1,
        "t1": [["1"]],
        "phi1": phi_json((((0, 1, 0),), 1)),
        "n2": 1,
        "t2": [["1"]],
        "phi2": phi_json((((0, 1, 0),), 1)),
    }
    pfile = write_json(tmp_path / "p.json", params)
    code, _, err = run(capsys, ["verify", orbit_file, "--check", "product", "--params", pfile])
    assert code == 3
    assert "offending subspace" in err

    broken = tmp_path / "orbit_broken.json"
    broken.write_text('{"space": 3}')
    code, _, _ = run(capsys, ["verify", str(broken), "--check", "product", "--params", pfile])
    assert code == 2


def test_verify_pullback(capsys, tmp_path, orbit_file):
    params = {
        "u0": [["0", "0", "1"]],
        "n": 1,
        "t": [["3"]],
        "phi_pairs": [
            {
                "phi0": phi_json((((0, 0, 1),), 2), (((0, 0, 2),), 3)),
                "phi1": phi_json((((1, 1, 0),), 1), (((1, -1, 0),), 1)),
            }
        ],
    }
    pfile = write_json(tmp_path / "p.json", params)
    code, out, _ = run(capsys, ["verify", orbit_file, "--check", "pullback", "--params", pfile])
    assert code == 0
    assert json.loads(out)["equal"] is True

    params["claimed_phi_total"] = phi_json((((1, 1, 1),), 4), (((1, -1, 1),), 4))
    bad = write_json(tmp_path / "bad.json", params)
    code, out, _ = run(capsys, ["verify", orbit_file, "--check", "pullback", "--params", bad])
    assert code == 1
    assert json.loads(out)["equal"] is False


def test_verify_natural(capsys, tmp_path):
    space = QuadSpaceF(QQ, [[2, 0, 0], [0, 2, 0], [0, 0, 2]], 1)
    datum = OrbitDatum(space, [SWAP12, FLIPXY])
    ofile = write_json(
        tmp_path / "orbit.json", ca.orbit_datum_to_json(datum, [SWAP12, FLIPXY])
    )
    params = {
        "g_plus": [[[str(c) for c in row] for row in FLIPXY]],
        "k_fin": [],
        "x0": [["1", "2", "0"]],
        "phi": phi_json(
            (((1, 2, 0),), 1),
            (((-1, -2, 0),), 2),
            (((2, 1, 0),), 3),
            (((-2, -1, 0),), 4),
        ),
    }
    pfile = write_json(tmp_path / "p.json", params)
    code, out, _ = run(capsys, ["verify", ofile, "--check", "natural", "--params", pfile])
    assert code == 0
    report = json.loads(out)
    assert report["equal"] is True
    assert {term["component"] for term in report["lhs"]} == {"0", "1"}

    params["claimed_natural_weights"] = ["1", "2", "3", "5"]
    bad = write_json(tmp_path / "bad.json", params)
    code, out, _ = run(capsys, ["verify", ofile, "--check", "natural", "--params", bad])
    assert code == 1


def test_verify_series_product(capsys, tmp_path, orbit_file):
    params = {
        "n": 1,
        "nu": 1,
        "height_bound": "4",
        "phi1": phi_json((((1, 0, 0),), 1), (((1, 1, 1),), 2)),
        "phi2": phi_json((((1, 0, 0),), 1)),
    }
    pfile = write_json(tmp_path / "p.json", params)
    code, out, _ = run(capsys, ["verify", orbit_file, "--check", "series-product", "--params", pfile])
    assert code == 0
    report = json.loads(out)
    assert report["equal"] is True
    assert report["lhs"] == report["rhs"]
    assert report["lhs"]["height_bound"] == "4"


# --- determinism ------------------------------------------------------------------


def test_byte_identical_reruns(capsys, tmp_path, field_file, lat2_file, tau_i_file, orbit_file):
    series = tmp_path / "t.series"
    assert cli.main(["theta", lat2_file, "-B", "6", "-o", str(series)]) == 0
    params = write_json(
        tmp_path / "p.json",
        {
            "n1": 1,
            "t1": [["1"]],
            "phi1": phi_json((((1, 0, 0),), 1)),
            "n2": 1,
            "t2": [["1"]],
            "phi2": phi_json((((1, 0, 0),), 1)),
        },
    )
    cases = [
        ["cone-enum", field_file, "-n", "2", "-B", "2"],
        ["theta", lat2_file, "-n", "2", "-B", "3"],
        ["multiply", str(series), str(series)],
        ["eval", str(series), tau_i_file, "--dps", "30"],
        ["verify", orbit_file, "--check", "product", "--params", params],
        ["hodge", "--m-max", "8", "--format", "csv"],
        ["hodge", "--m-max", "8", "--format", "markdown"],
        ["discgroup", lat2_file],
    ]
    for argv in cases:
        first = run(capsys, argv)
        second = run(capsys, argv)
        assert first == second, argv
        assert first[0] == 0


def test_jobs_flag_validation(capsys):
    with pytest.raises(SystemExit):
        cli.main(["--jobs", "0", "hodge", "--m-max", "3"])
    code, out, _ = run(capsys, ["--jobs", "4", "hodge", "--m-max", "3"])
    assert code == 0
