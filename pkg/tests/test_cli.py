import json

import pytest

from duality_bounds import io
from duality_bounds.cli import main

GAP_ARGS = ["--backgrounds", "1010", "1100"]


def strip_timing(d):
    d = dict(d)
    d.pop("timing", None)
    return d


@pytest.fixture(scope="module")
def files(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    healthy = root / "healthy.json"
    gap = root / "gap.json"
    assert main(["generate", "--dim", "10", "--blocks", "5", "--loss", "0.1", "--coupling", "0.7",
                 "--seed", "102", "-o", str(healthy)]) == 0
    assert main(["generate", "--dim", "8", "--blocks", "4", "--loss", "0.1", "--coupling", "0.6",
                 "--seed", "101", "-o", str(gap)]) == 0
    return root, healthy, gap


class TestGenerate:
    def test_round_trip(self, tmp_path):
        out = tmp_path / "p.json"
        assert main(["generate", "--dim", "8", "--blocks", "4", "--loss", "0.3", "--seed", "7", "-o", str(out)]) == 0
        p = io.load_problem(out)
        assert p.dim == 8 and p.J == 4

    def test_lossless(self, tmp_path, capsys):
        code = main(["generate", "--dim", "8", "--blocks", "4", "--loss", "0", "--seed", "7",
                     "-o", str(tmp_path / "p.json")])
        assert code == 2
        assert "PassivityViolation" in capsys.readouterr().err

    def test_idempotent(self, tmp_path):
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        for out in (a, b):
            main(["generate", "--dim", "6", "--blocks", "3", "--loss", "0.2", "--seed", "3", "-o", str(out)])
        assert a.read_bytes() == b.read_bytes()

    def test_bad_flags(self):
        with pytest.raises(SystemExit) as exc:
            main(["generate", "--dim", "eight"])
        assert exc.value.code == 2


class TestSolve:
    def test_with_oracle(self, files, tmp_path):
        _, healthy, _ = files
        out = tmp_path / "r.json"
        code = main(["solve", str(healthy), "--with-oracle", "-o", str(out)] + GAP_ARGS[:1] + ["10101", "11100"])
        rep = io.read_json(out)
        assert code == 0
        assert rep["certificate"]["kind"] == "StrongDual"
        assert rep["weak_duality"]["passed"]
        assert rep["dual_value"] >= rep["weak_duality"]["oracle_value"]
        assert "wall_time_s" in rep["timing"]

    def test_gap_exit(self, files, tmp_path):
        _, _, gap = files
        assert main(["solve", str(gap), "-o", str(tmp_path / "r.json")] + GAP_ARGS) == 3

    def test_oracle_cap(self, tmp_path, capsys):
        big = tmp_path / "big.json"
        main(["generate", "--dim", "21", "--blocks", "21", "--loss", "0.3", "--seed", "0", "-o", str(big)])
        assert main(["solve", str(big), "--with-oracle", "-o", str(tmp_path / "r.json")]) == 2
        assert "J <= 20" in capsys.readouterr().err

    def test_malformed(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        assert main(["solve", str(bad), "-o", str(tmp_path / "r.json")]) == 2
        assert main(["solve", str(tmp_path / "missing.json"), "-o", str(tmp_path / "r.json")]) == 2

    def test_deterministic(self, files, tmp_path):
        _, healthy, _ = files
        reps = []
        for k in range(2):
            out = tmp_path / f"r{k}.json"
            main(["solve", str(healthy), "-o", str(out)])
            reps.append(strip_timing(io.read_json(out)))
        assert reps[0] == reps[1]

    def test_batch_jobs(self, files, tmp_path):
        _, healthy, gap = files
        outdir = tmp_path / "out"
        code = main(["solve", str(healthy), str(gap), "--jobs", "2", "--out-dir", str(outdir)])
        assert code == 3
        assert {p.name for p in outdir.iterdir()} == {"healthy.report.json", "gap.report.json"}


class TestVerify:
    def test_healthy(self, files, tmp_path):
        _, healthy, _ = files
        state = tmp_path / "state.json"
        main(["solve", str(healthy), "-o", str(state)])
        out = tmp_path / "v.json"
        code = main(["verify", str(healthy), "--state", str(state), "--points", "5", "--samples", "30",
                     "-o", str(out)])
        rep = io.read_json(out)
        assert code == 0 and rep["passed"]
        assert set(rep["suites"]) == {"validity", "fd", "weak", "psd", "violation_bound", "minimax"}

    def test_corrupted_constraints(self, files, tmp_path):
        _, healthy, _ = files
        from duality_bounds.constraints import default_family

        cs = io.constraints_to_dict(default_family(io.load_problem(healthy), []))
        c = cs["constraints"][2]
        c["s"] = {k: [1.01 * x for x in v] for k, v in c["s"].items()}
        path = tmp_path / "cs.json"
        path.write_text(json.dumps(cs))
        out = tmp_path / "v.json"
        code = main(["verify", str(healthy), "--constraints", str(path), "-o", str(out)])
        rep = io.read_json(out)
        assert code == 3
        assert not rep["suites"]["validity"]["passed"]
        assert set(rep["skipped"]) == {"fd", "weak", "psd", "violation_bound", "minimax"}

    def test_fd_zero_points(self, files, tmp_path):
        _, healthy, _ = files
        out = tmp_path / "v.json"
        assert main(["verify", str(healthy), "--suite", "fd", "--points", "0", "-o", str(out)]) == 0
        assert io.read_json(out)["suites"]["fd"]["n_checked"] == 0

    def test_missing_state(self, files, tmp_path):
        _, healthy, _ = files
        assert main(["verify", str(healthy), "--state", str(tmp_path / "no.json"), "-o", str(tmp_path / "v.json")]) == 2


class TestRefine:
    def test_strong_single_iteration(self, files, tmp_path):
        _, healthy, _ = files
        out = tmp_path / "t.json"
        assert main(["refine", str(healthy), "-o", str(out)]) == 0
        assert len(io.read_json(out)["trace"]["iterations"]) == 1

    def test_gap_instance(self, files, tmp_path):
        _, _, gap = files
        out = tmp_path / "t.json"
        assert main(["refine", str(gap), "-o", str(out)] + GAP_ARGS) == 0
        rep = io.read_json(out)
        its = rep["trace"]["iterations"]
        assert len(its) > 1 and rep["trace"]["final"]["kind"] == "StrongDual"
        assert rep["feedback_bound"] <= rep["original_bound"] + 1e-9 * rep["trace"]["final"]["scale"]

    def test_zero_restarts(self, files, tmp_path):
        _, _, gap = files
        out = tmp_path / "t.json"
        assert main(["refine", str(gap), "--max-restarts", "0", "-o", str(out)] + GAP_ARGS) == 3
        assert len(io.read_json(out)["trace"]["iterations"]) == 1
