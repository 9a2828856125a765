import csv
import io
import json

import numpy as np
import pytest

from previewsafe import geometry as geo
from previewsafe.artifacts import load_artifacts
from previewsafe.cli import EXIT_INVALID, EXIT_NOT_CERTIFIED, EXIT_OK, EXIT_UNSAFE, main
from previewsafe.problem import (
    ProblemError,
    bundled,
    load_problem,
    problem_from_dict,
    validate_problem,
)
from previewsafe.synthesis import verify_fixed_point

ASSETS = ["toy.json", "cruise.json", "lane4d.json", "cruise_hills.json"]


def toy_data():
    return json.loads(bundled("toy.json").read_text())


def write(tmp_path, data, name="p.json"):
    path = tmp_path / name
    path.write_text(json.dumps(data))
    return str(path)


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


# -- problem files -----------------------------------------------------------------


@pytest.mark.parametrize("name", ASSETS)
def test_bundled_assets_are_clean(name):
    assert validate_problem(load_problem(bundled(name))) == []


def test_options_override():
    p = problem_from_dict(toy_data(), {"tol": 1e-5, "max_iters": 7})
    assert p.options.tol == 1e-5 and p.options.max_iters == 7
    assert p.options.fixpoint().max_iters == 7


def test_unknown_option_rejected():
    data = toy_data()
    data["options"]["speed"] = 3
    with pytest.raises(ProblemError, match="options.speed"):
        problem_from_dict(data)


def test_bad_successor_reports_field():
    data = toy_data()
    data["system"]["modes"]["1"]["s1"]["u1"] = ["s9"]
    with pytest.raises(ProblemError, match=r"system\.modes\.1\.s1\.u1"):
        problem_from_dict(data)


def test_json_error_reports_line(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{\n  "system": ,\n}')
    with pytest.raises(ProblemError, match=r"bad\.json:2:"):
        load_problem(path)


def test_affine_backend_from_matrices():
    data = {
        "system": {
            "backend": "affine",
            "X": {"box": [[-1], [1]]},
            "U": {"box": [[-1], [1]]},
            "modes": {"1": {"A": [[1.0]], "B": [[1.0]], "E": [[1.0]], "D": {"box": [[-0.1], [0.1]]}}},
        },
        "automaton": {"nodes": 1, "edges": [], "holding": {}},
        "safety": {"1": {"A": [[1.0], [-1.0]], "b": [0.5, 0.5]}},
    }
    p = problem_from_dict(data)
    assert p.backend == "affine"
    assert geo.equals(p.safety[1], geo.Polytope.box([-0.5], [0.5]))


def test_wrong_dimension_safe_set():
    data = json.loads(bundled("cruise.json").read_text())
    data["safety"]["1"] = {"box": [[0, 0], [1, 1]]}
    with pytest.raises(ProblemError, match="safety.1"):
        problem_from_dict(data)


def test_unknown_model():
    data = json.loads(bundled("cruise.json").read_text())
    data["system"]["model"] = "rocket"
    with pytest.raises(ProblemError, match="system.model"):
        problem_from_dict(data)


# -- validate --------------------------------------------------------------------


def test_validate_clean(capsys):
    code, out, _ = run(capsys, "validate", bundled("cruise.json"))
    assert code == EXIT_OK and json.loads(out)["ok"]


def test_validate_self_loop(tmp_path, capsys):
    data = toy_data()
    data["automaton"]["edges"].append({"from": 1, "to": 1, "preview": [1, 1]})
    code, out, _ = run(capsys, "validate", write(tmp_path, data))
    assert code == EXIT_INVALID
    assert "self_loop" in {v["rule"] for v in json.loads(out)["violations"]}


def test_validate_missing_safe_set(tmp_path, capsys):
    data = json.loads(bundled("cruise.json").read_text())
    del data["safety"]["3"]
    code, out, _ = run(capsys, "validate", write(tmp_path, data))
    assert code == EXIT_INVALID
    assert {"rule": "missing_safety", "where": "3"} == {k: v for k, v in json.loads(out)["violations"][0].items()
                                                       if k != "message"}


def test_validate_parse_error(tmp_path, capsys):
    path = tmp_path / "broken.json"
    path.write_text("{")
    code, _, err = run(capsys, "validate", path)
    assert code == EXIT_INVALID and "broken.json:1:" in err


def test_missing_file(capsys):
    code, _, err = run(capsys, "validate", "/nonexistent/problem.json")
    assert code == EXIT_INVALID and "error" in err


# -- synth -------------------------------------------------------------------------


def test_synth_toy(tmp_path, capsys):
    code, out, _ = run(capsys, "synth", bundled("toy.json"), "-o", tmp_path / "toy")
    assert code == EXIT_OK
    brief = json.loads(out)
    assert brief["certified"] and brief["iterations"] == 2
    summary = json.loads((tmp_path / "toy" / "summary.json").read_text())
    assert summary["nodes"] == {"1": {"states": ["s1"], "size": 1}, "2": {"states": ["s2"], "size": 1}}
    last = [t for t in summary["trace"] if t["sweep"] == brief["iterations"] - 1]
    assert last and not any(t["changed"] for t in last)


def test_synth_cruise(tmp_path, capsys):
    code, _, _ = run(capsys, "synth", bundled("cruise.json"), "-o", tmp_path / "c")
    assert code == EXIT_OK
    summary = json.loads((tmp_path / "c" / "summary.json").read_text())
    for q in ("1", "2", "3"):
        lo, hi = summary["nodes"][q]["bounding_box"]
        assert lo[0] == pytest.approx(31.95, abs=1e-6) and hi[0] == pytest.approx(32.0, abs=1e-6)
        assert summary["nodes"][q]["volume"] == pytest.approx(0.05, abs=1e-6)
    assert summary["wall_time_s"] > 0


def test_synth_capped(tmp_path, capsys):
    code, out, _ = run(capsys, "synth", bundled("cruise.json"), "-o", tmp_path / "c", "--max-iters", "0")
    assert code == EXIT_NOT_CERTIFIED
    assert json.loads(out)["certified"] is False
    assert json.loads((tmp_path / "c" / "winning.json").read_text())["certified"] is False


def test_synth_zoh(tmp_path, capsys):
    code, _, _ = run(capsys, "synth", bundled("cruise.json"), "-o", tmp_path / "z", "--discretization", "zoh")
    assert code == EXIT_OK
    raw = json.loads((tmp_path / "z" / "problem.json").read_text())
    assert raw["options"]["discretization"] == "zoh"


@pytest.mark.parametrize("name", ["toy.json", "cruise.json"])
def test_artifacts_round_trip(tmp_path, capsys, name):
    assert run(capsys, "synth", bundled(name), "-o", tmp_path / "a")[0] == EXIT_OK
    problem, W, cert, status = load_artifacts(tmp_path / "a")
    assert status.value == "converged"
    assert verify_fixed_point(problem.system, problem.automaton, problem.safety, W) == []
    for q, c in cert.nodes.items():
        assert problem.system.equals(c.winning, W[q], 1e-9)


# -- compare -----------------------------------------------------------------------


@pytest.mark.parametrize("name", ["toy.json", "cruise.json"])
def test_compare_baseline_empty(tmp_path, capsys, name):
    code, out, _ = run(capsys, "compare", bundled(name))
    report = json.loads(out)
    assert code == EXIT_OK and report["baseline_empty"]
    for node in report["nodes"].values():
        assert node["baseline_subset"] and node["strictly_larger"]


def test_compare_single_sink_matches_baseline(tmp_path, capsys):
    data = {
        "system": {
            "backend": "affine",
            "X": {"box": [[-1], [1]]},
            "U": {"box": [[-0.1], [0.1]]},
            "modes": {"1": {"A": [[0.5]], "B": [[1.0]]}},
        },
        "automaton": {"nodes": 1, "edges": [], "holding": {}},
        "safety": {"1": "X"},
    }
    code, out, _ = run(capsys, "compare", write(tmp_path, data), "-o", tmp_path / "r.json")
    report = json.loads((tmp_path / "r.json").read_text())
    assert code == EXIT_OK and out == ""
    assert report["nodes"]["1"]["baseline_subset"] and not report["nodes"]["1"]["strictly_larger"]


# -- simulate ----------------------------------------------------------------------


def test_simulate_cruise(tmp_path, capsys):
    run(capsys, "synth", bundled("cruise.json"), "-o", tmp_path / "c")
    code, out, _ = run(capsys, "simulate", bundled("cruise.json"), tmp_path / "c", "--runs", 5, "--steps", 200,
                       "--trace", tmp_path / "t.jsonl")
    summary = json.loads(out)
    assert code == EXIT_OK and summary["runs"] == 5 and summary["violations"] == 0
    assert summary["min_margin"] >= -1e-6
    lines = (tmp_path / "t.jsonl").read_text().splitlines()
    assert json.loads(lines[0])["run"] == 0


def test_simulate_unsafe_start(tmp_path, capsys):
    run(capsys, "synth", bundled("toy.json"), "-o", tmp_path / "t")
    code, out, _ = run(capsys, "simulate", bundled("toy.json"), tmp_path / "t", "--runs", 10, "--steps", 20,
                       "--allow-unsafe-start")
    summary = json.loads(out)
    assert code == EXIT_UNSAFE
    assert summary["violations"] + summary["failures"] > 0


def test_simulate_zero_runs(tmp_path, capsys):
    run(capsys, "synth", bundled("toy.json"), "-o", tmp_path / "t")
    code, out, _ = run(capsys, "simulate", bundled("toy.json"), tmp_path / "t", "--runs", 0)
    assert code == EXIT_OK
    assert json.loads(out) == {"runs": 0, "violations": 0, "failures": 0, "min_margin": None}


def test_simulate_is_deterministic(tmp_path, capsys):
    run(capsys, "synth", bundled("cruise.json"), "-o", tmp_path / "c")
    args = ("simulate", bundled("cruise.json"), tmp_path / "c", "--runs", 3, "--steps", 50, "--seed", 4)
    assert run(capsys, *args)[1] == run(capsys, *args)[1]


# -- export ------------------------------------------------------------------------


def test_export_cruise_csv(tmp_path, capsys):
    run(capsys, "synth", bundled("cruise.json"), "-o", tmp_path / "c")
    code, out, _ = run(capsys, "export", tmp_path / "c", "--format", "csv")
    assert code == EXIT_OK
    rows = list(csv.reader(io.StringIO(out)))
    assert rows[0] == ["node", "vertex", "x0"]
    ends = sorted(float(r[2]) for r in rows[1:] if r[0] == "2")
    assert ends == pytest.approx([31.95, 32.0], abs=1e-6)


def test_export_finite_states(tmp_path, capsys):
    run(capsys, "synth", bundled("toy.json"), "-o", tmp_path / "t")
    code, out, _ = run(capsys, "export", tmp_path / "t")
    assert code == EXIT_OK
    assert json.loads(out) == {"1": {"empty": False, "states": ["s1"]}, "2": {"empty": False, "states": ["s2"]}}


def test_export_empty_set_flagged(tmp_path, capsys):
    data = toy_data()
    for e in data["automaton"]["edges"]:
        e["preview"] = [0, 0]
    run(capsys, "synth", write(tmp_path, data), "-o", tmp_path / "t0")
    code, out, _ = run(capsys, "export", tmp_path / "t0")
    assert json.loads(out)["1"] == {"empty": True, "states": []}

    cruise = json.loads(bundled("cruise.json").read_text())
    cruise["system"]["params"]["force_mg"] = [-0.01, 0.01]
    run(capsys, "synth", write(tmp_path, cruise, "weak.json"), "-o", tmp_path / "w")
    code, out, _ = run(capsys, "export", tmp_path / "w")
    assert code == EXIT_OK
    assert json.loads(out)["1"] == {"empty": True, "dims": [0], "vertices": []}


def test_export_4d_projection(lane_artifacts, tmp_path, capsys):
    problem, out_dir, W = lane_artifacts
    code, out, _ = run(capsys, "export", out_dir, "--project", "0,1,3", "-o", tmp_path / "v.json")
    assert code == EXIT_OK
    records = json.loads((tmp_path / "v.json").read_text())
    for q, rec in records.items():
        assert rec["dims"] == [0, 1, 3] and not rec["empty"]
        V = np.array(rec["vertices"])
        expected = geo.project(W[int(q)], [0, 1, 3])
        # every exported vertex lies in the projection and their hull spans it
        assert expected.contains(V.mean(axis=0))
        assert all(expected.contains(v, tol=1e-6) for v in V)
        assert geo.equals(geo.hull_of_vertices(V), expected, 1e-5)


def test_export_4d_without_projection_fails(lane_artifacts, capsys):
    _, out_dir, _ = lane_artifacts
    code, _, err = run(capsys, "export", out_dir)
    assert code == EXIT_INVALID and "3 dimensions" in err
    code, out, _ = run(capsys, "export", out_dir, "--hrep")
    assert code == EXIT_OK and json.loads(out)["2"]["hrep"]["dim"] == 4
