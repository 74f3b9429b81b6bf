import json
import os
import subprocess
import sys

import numpy as np
import pytest

from quasinv.cli import EXIT_FAIL, EXIT_GEOMETRY, EXIT_OK, EXIT_USAGE, format_points, main, read_points
from quasinv.constants import constants_for
from quasinv.geometry import quasi_inversion, sphere_inversion
from quasinv.report import ReportEnvelope, dumps, write_atomic
from quasinv.specfile import SpecError, parse_spec
from quasinv.svg import MIN_SAMPLES, read_polylines
from quasinv.tangent import alpha_profile_2d


def write_spec(tmp_path, doc, name="spec.json"):
    p = tmp_path / name
    p.write_text(doc if isinstance(doc, str) else json.dumps(doc))
    return str(p)


def run(argv, capsys):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


SQUARE = {"dimension": 2, "shape": "square", "params": {"half_side": 1.0}}


# ---------------------------------------------------------------------------
# spec files
# ---------------------------------------------------------------------------

def test_parse_spec_roundtrip():
    spec = parse_spec(json.dumps(SQUARE))
    assert spec.to_dict()["shape"] == "square"
    assert spec.boundary().r_min == pytest.approx(1.0)


def test_parse_error_has_position():
    with pytest.raises(SpecError) as e:
        parse_spec('{"dimension": 2,\n  "shape": }')
    assert e.value.line == 2 and e.value.column is not None
    assert "line 2" in str(e.value)


@pytest.mark.parametrize("doc", [
    {"dimension": 2, "shape": "square", "colour": 1},
    {"dimension": 3, "shape": "square"},
    {"dimension": 2, "shape": "blob"},
    {"dimension": 2, "shape": "ellipse", "params": {"semi_axes": [1, 2, 3]}},
    {"dimension": 2, "shape": "square", "params": {"radius": 1}},
    {"dimension": 2, "shape": "square", "sampling": {"speed": 1}},
    {"dimension": 1, "shape": "ball"},
])
def test_spec_rejections(doc):
    with pytest.raises(SpecError):
        parse_spec(json.dumps(doc))


def test_bad_spec_exit_code(tmp_path, capsys):
    path = write_spec(tmp_path, '{"dimension": 2, "shape": ')
    code, _, err = run(["constants", "--spec", path], capsys)
    assert code == EXIT_USAGE and "line 1" in err


def test_missing_spec_file_exit_code(tmp_path, capsys):
    code, _, _ = run(["constants", "--spec", str(tmp_path / "none.json")], capsys)
    assert code == EXIT_USAGE


def test_invalid_geometry_exit_code(tmp_path, capsys):
    path = write_spec(tmp_path, {"dimension": 2, "shape": "polygon", "params": {
        "vertices": [[1, 0], [0, 1], [-1, 0], [0.1, 0.1], [0, -1]]}})
    code, _, err = run(["constants", "--spec", path], capsys)
    assert code == EXIT_GEOMETRY and "invalid geometry" in err


def test_bad_arguments_exit_code(capsys):
    assert run(["frobnicate"], capsys)[0] == EXIT_USAGE
    assert run(["constants"], capsys)[0] == EXIT_USAGE


# ---------------------------------------------------------------------------
# constants and reports
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("doc, k_min", [
    ({"dimension": 3, "shape": "cube"}, np.sqrt(3) + np.sqrt(2)),
    ({"dimension": 3, "shape": "cone"}, 2 + np.sqrt(3)),
    ({"dimension": 2, "shape": "ellipse", "params": {"semi_axes": [1, 2]}}, 1 / np.tan(np.arctan(0.5))),
])
def test_constants_command(tmp_path, capsys, doc, k_min):
    code, out, _ = run(["constants", "--spec", write_spec(tmp_path, doc)], capsys)
    assert code == EXIT_OK
    env = ReportEnvelope.from_json(out)
    assert env.constants.K_min == pytest.approx(k_min, rel=5e-3)
    assert env.schema_version == 1


def test_constants_output_deterministic(tmp_path, capsys):
    path = write_spec(tmp_path, SQUARE)
    a = ReportEnvelope.from_json(run(["constants", "--spec", path], capsys)[1])
    b = ReportEnvelope.from_json(run(["constants", "--spec", path], capsys)[1])
    assert a.to_json(timing=False) == b.to_json(timing=False)


def test_report_roundtrip(square):
    env = ReportEnvelope(spec=SQUARE, constants=constants_for(square), timing={"seconds": 0.1})
    again = ReportEnvelope.from_json(env.to_json())
    assert again.to_json() == env.to_json()
    doc = json.loads(env.to_json())
    doc["schema_version"] = 99
    with pytest.raises(ValueError):
        ReportEnvelope.from_dict(doc)


def test_dumps_handles_numpy():
    text = dumps({"a": np.float64(1.5), "b": np.arange(3), "c": np.int64(2)})
    assert json.loads(text) == {"a": 1.5, "b": [0, 1, 2], "c": 2}


def test_write_atomic(tmp_path):
    p = tmp_path / "out.json"
    p.write_text("old")
    write_atomic(str(p), "new\n")
    assert p.read_text() == "new\n"
    assert os.listdir(tmp_path) == ["out.json"]


def test_out_flag_writes_file(tmp_path, capsys):
    out = tmp_path / "c.json"
    code, stdout, _ = run(["constants", "--spec", write_spec(tmp_path, SQUARE), "--out", str(out)],
                          capsys)
    assert code == EXIT_OK and stdout == ""
    assert ReportEnvelope.from_json(out.read_text()).constants.K_min == pytest.approx(1 + np.sqrt(2))


# ---------------------------------------------------------------------------
# map
# ---------------------------------------------------------------------------

def test_read_points_rules():
    X = read_points("# c\n1,2\n\ninf\n-0.5, 3e-2\n", 2)
    assert X.shape == (3, 2) and np.all(np.isinf(X[1]))
    for bad in ("1,2,3\n", "a,b\n", "nan,1\n"):
        with pytest.raises(Exception):
            read_points(bad, 2)


def test_csv_roundtrip(rng):
    X = rng.normal(size=(200, 3)) * np.exp(rng.uniform(-20, 20, (200, 1)))
    back = read_points(format_points(X, "h"), 3)
    assert np.allclose(back, X, rtol=1e-9, atol=0)


def test_map_sphere_bit_for_bit(tmp_path, capsys, rng):
    spec = write_spec(tmp_path, {"dimension": 3, "shape": "ball", "params": {"radius": 1.5}})
    X = rng.normal(size=(300, 3))
    pts = tmp_path / "p.csv"
    pts.write_text(format_points(X, "input"))
    code, out, _ = run(["map", "--spec", spec, "--points", str(pts)], capsys)
    assert code == EXIT_OK
    assert np.array_equal(read_points(out, 3), sphere_inversion(np.zeros(3), 1.5, X))


def test_map_zero_and_infinity(tmp_path, capsys):
    spec = write_spec(tmp_path, SQUARE)
    pts = tmp_path / "p.csv"
    pts.write_text("0.5,0\ninf\n0,0\n")
    code, out, _ = run(["map", "--spec", spec, "--points", str(pts)], capsys)
    assert code == EXIT_OK
    lines = [l for l in out.splitlines() if not l.startswith("#")]
    assert lines == ["2.0,0.0", "0.0,0.0", "inf"]


def test_map_stretch_roundtrip(tmp_path, capsys, rng):
    spec = write_spec(tmp_path, {"dimension": 2, "shape": "ellipse"})
    X = rng.normal(size=(50, 2))
    pts = tmp_path / "p.csv"
    pts.write_text(format_points(X, "input"))
    _, out, _ = run(["map", "--spec", spec, "--points", str(pts), "--mode", "phi_a", "--a", "2"],
                    capsys)
    pts.write_text(out)
    _, back, _ = run(["map", "--spec", spec, "--points", str(pts), "--mode", "phi_a_inv",
                      "--a", "2"], capsys)
    assert np.allclose(read_points(back, 2), X, rtol=1e-12)


def test_map_projection_rejects_origin(tmp_path, capsys):
    spec = write_spec(tmp_path, SQUARE)
    pts = tmp_path / "p.csv"
    pts.write_text("0,0\n")
    assert run(["map", "--spec", spec, "--points", str(pts), "--mode", "projection"],
               capsys)[0] == EXIT_USAGE


def test_map_reads_stdin(tmp_path):
    spec = write_spec(tmp_path, SQUARE)
    res = subprocess.run([sys.executable, "-m", "quasinv.cli", "map", "--spec", spec,
                          "--points", "-"], input="0.25,0.25\n", capture_output=True, text=True)
    assert res.returncode == 0
    assert np.allclose(read_points(res.stdout, 2), [[4.0, 4.0]], rtol=1e-14)


# ---------------------------------------------------------------------------
# verify
# ---------------------------------------------------------------------------

def test_verify_exit_codes(tmp_path, capsys):
    spec = write_spec(tmp_path, SQUARE)
    base = ["verify", "--spec", spec, "--pairs", "5000",
            "--checks", "inversion-distance,projection-lower-bound"]
    code, out, err = run(base, capsys)
    assert code == EXIT_OK
    env = ReportEnvelope.from_json(out)
    assert [c.name for c in env.checks] == ["inversion-distance", "projection-lower-bound"]
    assert "pass" in err
    code, out, _ = run(base + ["--bound-scale", "0.5"], capsys)
    assert code == EXIT_FAIL
    failed = [c for c in ReportEnvelope.from_json(out).checks if not c.passed]
    assert failed and all(c.witnesses for c in failed)


def test_verify_deterministic(tmp_path, capsys):
    spec = write_spec(tmp_path, SQUARE)
    argv = ["verify", "--spec", spec, "--pairs", "3000", "--checks", "ray-comparison",
            "--seed", "11"]
    a = ReportEnvelope.from_json(run(argv, capsys)[1]).to_json(timing=False)
    b = ReportEnvelope.from_json(run(argv, capsys)[1]).to_json(timing=False)
    assert a == b


def test_verify_unknown_check(tmp_path, capsys):
    spec = write_spec(tmp_path, SQUARE)
    assert run(["verify", "--spec", spec, "--checks", "bogus"], capsys)[0] == EXIT_USAGE


# ---------------------------------------------------------------------------
# plot
# ---------------------------------------------------------------------------

def plot(tmp_path, capsys, doc, *extra):
    spec = write_spec(tmp_path, doc)
    code, out, _ = run(["plot", "--spec", spec, *extra], capsys)
    return code, out


def test_inversion_image_of_circle_on_sphere(tmp_path, capsys):
    code, out = plot(tmp_path, capsys, {"dimension": 2, "shape": "ball"},
                     "--figure", "inversion-image")
    assert code == EXIT_OK
    lines = read_polylines(out)
    src, img = lines["source"][0], lines["image"][0]
    assert len(src) >= MIN_SAMPLES
    assert np.allclose(np.linalg.norm(src, axis=1), 0.5, rtol=1e-12)
    assert np.allclose(np.linalg.norm(img, axis=1), 2.0, rtol=1e-12)


def test_inversion_image_square(tmp_path, capsys, square):
    code, out = plot(tmp_path, capsys, SQUARE, "--figure", "inversion-image")
    assert code == EXIT_OK
    lines = read_polylines(out)
    src, img = lines["source"][0], lines["image"][0]
    assert np.max(np.abs(quasi_inversion(square, img) - src)) < 1e-9
    assert np.all(np.max(np.abs(img), axis=1) > 1.0)
    assert plot(tmp_path, capsys, SQUARE, "--figure", "inversion-image")[1] == out


def test_alpha_profile_figure(tmp_path, capsys, ellipse):
    code, out = plot(tmp_path, capsys, {"dimension": 2, "shape": "ellipse"},
                     "--figure", "alpha-profile")
    assert code == EXIT_OK
    prof = read_polylines(out)["alpha-profile"][0]
    assert len(prof) >= MIN_SAMPLES
    k = int(np.argmin(prof[:, 1]))
    assert prof[k, 1] == pytest.approx(2 * np.arctan(0.5), rel=1e-4)
    t, _ = alpha_profile_2d(ellipse, len(prof))
    assert min(abs(prof[k, 0] - np.arctan(2)), abs(prof[k, 0] - np.pi - np.arctan(2))) \
        <= 2 * (t[1] - t[0])


def test_constants_figure_3d(tmp_path, capsys):
    code, out = plot(tmp_path, capsys, {"dimension": 3, "shape": "cube"},
                     "--figure", "constants-vs-alpha")
    assert code == EXIT_OK
    lines = read_polylines(out)
    assert lines["stretch-dilatation"] and all(len(p) >= MIN_SAMPLES for p in lines["envelope"])


def test_plot_rejects_3d_image(tmp_path, capsys):
    code, _ = plot(tmp_path, capsys, {"dimension": 3, "shape": "cube"},
                   "--figure", "inversion-image")
    assert code == EXIT_USAGE
