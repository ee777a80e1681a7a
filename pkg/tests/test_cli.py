import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from sgmtl.cli import main, matrix_from_json, matrix_to_json, problem_fingerprint, read_dataset

SMALL = ["--m", "4", "--n-per-task", "12", "--d", "6", "--n-groups-true", "2", "--support-size", "3"]


@pytest.fixture
def small_dir(tmp_path):
    out = tmp_path / "data"
    assert main(["generate", "--out", str(out), "--seed", "1", *SMALL]) == 0
    return out


def _rows(path):
    with open(path) as fh:
        first = fh.readline()
        assert first.startswith("# manifest: ")
        json.loads(first[len("# manifest: "):])
        return list(csv.DictReader(fh))


def test_generate_layout(small_dir):
    manifest = json.loads((small_dir / "manifest.json").read_text())
    assert manifest["d"] == 6 and len(manifest["tasks"]) == 4
    header = (small_dir / manifest["tasks"][0]["file"]).read_text().splitlines()[0]
    assert header == "target," + ",".join(f"f{j}" for j in range(6))
    truth = json.loads((small_dir / "truth.json").read_text())
    assert truth["group_of_task"] == [0, 0, 1, 1]


def test_generate_round_trip_preserves_data(small_dir):
    from sgmtl.datagen import SyntheticSpec, make_custom

    problem, _ = read_dataset(small_dir)
    original, _ = make_custom(SyntheticSpec(m=4, n_per_task=12, d=6, n_groups_true=2, support_size=3, seed=1))
    assert problem_fingerprint(problem) == problem_fingerprint(original)
    manifest = json.loads((small_dir / "manifest.json").read_text())
    assert manifest["fingerprint"] == problem_fingerprint(problem)


def test_generate_is_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for d in (a, b):
        assert main(["generate", "--preset", "set1", "--seed", "2", "--out", str(d)]) == 0
    for f in sorted(p.name for p in a.iterdir()):
        assert (a / f).read_bytes() == (b / f).read_bytes()


def test_seed_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("SGMTL_SEED", "1")
    assert main(["generate", "--out", str(tmp_path / "env"), *SMALL]) == 0
    monkeypatch.delenv("SGMTL_SEED")
    assert main(["generate", "--seed", "1", "--out", str(tmp_path / "flag"), *SMALL]) == 0
    assert (tmp_path / "env" / "task_t00.csv").read_bytes() == (tmp_path / "flag" / "task_t00.csv").read_bytes()
    monkeypatch.setenv("SGMTL_SEED", "abc")
    assert main(["generate", "--out", str(tmp_path / "x")]) == 2


def test_fit_sgmtl_on_set1(tmp_path):
    data = tmp_path / "set1"
    assert main(["generate", "--preset", "set1", "--out", str(data)]) == 0
    out = tmp_path / "fit.json"
    assert main(["fit", str(data), "--method", "sgmtl", "--n-groups", "3", "--lambda", "1e-3",
                 "--out", str(out)]) == 0
    res = json.loads(out.read_text())
    assert len(res["hard_groups"]) == 30
    assert matrix_from_json(res["weights"]).shape == (21, 30)
    assert matrix_from_json(res["membership"]).shape == (3, 30)
    trace = res["objective_trace"]
    assert all(b <= a + 1e-9 * max(1, abs(a)) for a, b in zip(trace, trace[1:]))
    assert 0.0 <= res["metrics"]["support_f1"] <= 1.0 and "ari" in res["metrics"]
    assert res["manifest"]["dataset_fingerprint"] == json.loads((data / "manifest.json").read_text())["fingerprint"]


def test_fit_stl_has_no_membership(small_dir, tmp_path):
    out = tmp_path / "stl.json"
    assert main(["fit", str(small_dir), "--method", "stl", "--l1", "0.05", "--out", str(out)]) == 0
    res = json.loads(out.read_text())
    assert "membership" not in res and res["params"] == {"l1": 0.05}


def test_fit_output_is_deterministic(small_dir, tmp_path):
    outs = []
    for name in ("a.json", "b.json"):
        path = tmp_path / name
        assert main(["fit", str(small_dir), "--method", "sgmtl", "--n-groups", "2", "--out", str(path)]) == 0
        res = json.loads(path.read_text())
        res.pop("manifest")
        outs.append(res)
    assert outs[0] == outs[1]


def test_cv_grid(small_dir, tmp_path):
    out = tmp_path / "cv.json"
    assert main(["cv", str(small_dir), "--method", "sgmtl", "--n-groups-grid", "1,2",
                 "--lambda-grid", "1e-4,1e-2", "--folds", "3", "--out", str(out)]) == 0
    res = json.loads(out.read_text())
    assert len(res["cells"]) == 4
    best = min(range(4), key=lambda i: res["cells"][i]["mse_avg"])
    assert res["selected_index"] == best
    assert res["selected_params"] == res["cells"][best]["params"]


def test_sweep_n_rows(small_dir, tmp_path):
    out = tmp_path / "sweep.csv"
    assert main(["sweep-n", str(small_dir), "--n-list", "1,2,3,4", "--folds", "3", "--max-outer", "5",
                 "--out", str(out)]) == 0
    rows = _rows(out)
    assert [int(r["n_groups"]) for r in rows] == [1, 2, 3, 4]
    assert all(float(r["mse_avg"]) >= 0 for r in rows)


def test_samplesweep(tmp_path):
    out = tmp_path / "ss.csv"
    assert main(["samplesweep", *SMALL, "--n-grid", "8,16", "--methods", "stl,sgmtl", "--n-groups", "2",
                 "--seeds", "0,1", "--n-test", "10", "--out", str(out)]) == 0
    rows = _rows(out)
    assert [(r["n"], r["method"]) for r in rows] == [("8", "stl"), ("8", "sgmtl"), ("16", "stl"), ("16", "sgmtl")]
    assert rows[0]["ari"] == ""


def test_exit_codes(small_dir, tmp_path):
    out = str(tmp_path / "o.json")
    assert main(["fit", str(tmp_path / "missing"), "--method", "stl", "--out", out]) == 2
    assert main(["generate", "--out", out, "--d", "3"]) == 2          # too few features for the supports
    assert main(["fit", str(small_dir), "--method", "bogus", "--out", out]) == 2
    assert main(["cv", str(small_dir), "--method", "stl", "--folds", "1", "--out", out]) == 2
    assert main(["sweep-n", str(small_dir), "--method", "stl", "--out", out]) == 2
    assert main(["fit", str(small_dir), "--method", "sgmtl", "--n-groups", "0", "--out", out]) == 2
    assert main([]) == 2


def test_solver_failure_exit_code(small_dir, tmp_path, monkeypatch):
    from sgmtl import cli
    from sgmtl.errors import NonFinite

    def boom(*_args, **_kw):
        raise NonFinite("diverged")

    monkeypatch.setattr(cli, "fit_method", boom)
    assert main(["fit", str(small_dir), "--method", "stl", "--out", str(tmp_path / "o.json")]) == 1


def test_matrix_json_round_trip(rng):
    A = rng.standard_normal((3, 5))
    assert np.array_equal(matrix_from_json(json.loads(json.dumps(matrix_to_json(A)))), A)


def test_console_entry_point(tmp_path):
    out = subprocess.run([sys.executable, "-m", "sgmtl.cli", "--help"], capture_output=True, text=True)
    assert out.returncode == 0
    for cmd in ("generate", "fit", "cv", "sweep-n", "samplesweep"):
        assert cmd in out.stdout
