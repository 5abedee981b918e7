import json

import numpy as np
import pytest

from kldiv.cli import main
from kldiv.data import dedup_rows, load_csv, schema_from_json, write_csv
from kldiv.mixed import kld_est_mixed
from kldiv.models import fit_covariate_model, load_model, sample_model

SCHEMA = [{"name": "a", "kind": "continuous"}, {"name": "b", "kind": "continuous"}]


def _write_sample_csv(path, seed, n, shift=0.0):
    rng = np.random.default_rng(seed)
    rows = shift + rng.standard_normal((n, 2))
    lines = ["a,b"] + [f"{float(r[0])!r},{float(r[1])!r}" for r in rows]
    path.write_text("\n".join(lines) + "\n")


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    (root / "schema.json").write_text(json.dumps(SCHEMA))
    _write_sample_csv(root / "x.csv", seed=1, n=60)
    _write_sample_csv(root / "y.csv", seed=2, n=80, shift=0.4)
    return root


class TestEstimate:
    def test_point_estimate_output(self, workdir, capsys):
        argv = ["estimate", str(workdir / "x.csv"), str(workdir / "y.csv"),
                "--schema", str(workdir / "schema.json")]
        assert main(argv) == 0
        out = capsys.readouterr().out.splitlines()
        assert out[1] == "n 60" and out[2] == "m 80"

        schema = schema_from_json(SCHEMA)
        x = dedup_rows(load_csv(workdir / "x.csv", schema))
        y = dedup_rows(load_csv(workdir / "y.csv", schema))
        want = kld_est_mixed(x, y).value
        assert out[0] == f"kl_estimate {format(want, '.17g')}"

    def test_ci_output_and_rerun_identical(self, workdir, capsys):
        argv = ["estimate", str(workdir / "x.csv"), str(workdir / "y.csv"),
                "--schema", str(workdir / "schema.json"),
                "--ci", "--s", "16", "--seed", "5"]
        assert main(argv) == 0
        first = capsys.readouterr().out
        keys = [line.split()[0] for line in first.splitlines()]
        assert keys == ["kl_estimate", "ci_lower", "ci_upper", "level", "n", "m"]
        vals = dict(line.split() for line in first.splitlines())
        assert float(vals["ci_lower"]) <= float(vals["ci_upper"])
        assert float(vals["level"]) == 0.95

        assert main(argv) == 0
        assert capsys.readouterr().out == first

    def test_degenerate_data_exits_2(self, workdir, tmp_path, capsys):
        dup = tmp_path / "dup.csv"
        dup.write_text("a,b\n1.0,2.0\n1.0,2.0\n1.0,2.0\n")
        argv = ["estimate", str(dup), str(workdir / "y.csv"),
                "--schema", str(workdir / "schema.json")]
        assert main(argv) == 2
        assert capsys.readouterr().err.startswith("error:")

    def test_missing_cells_exit_1(self, workdir, tmp_path, capsys):
        holey = tmp_path / "holey.csv"
        holey.write_text("a,b\n1.0,NA\n2.0,3.0\n0.5,1.5\n")
        argv = ["estimate", str(holey), str(workdir / "y.csv"),
                "--schema", str(workdir / "schema.json"), "--missing-token", "NA"]
        assert main(argv) == 1
        assert "error:" in capsys.readouterr().err

    def test_absent_file_exits_1(self, workdir, capsys):
        argv = ["estimate", str(workdir / "nope.csv"), str(workdir / "y.csv"),
                "--schema", str(workdir / "schema.json")]
        assert main(argv) == 1
        capsys.readouterr()

    def test_usage_errors_exit_1(self, workdir):
        with pytest.raises(SystemExit) as exc:
            main(["estimate", str(workdir / "x.csv"), str(workdir / "y.csv")])
        assert exc.value.code == 1
        with pytest.raises(SystemExit) as exc:
            main(["estimate", "--bogus-flag"])
        assert exc.value.code == 1


class TestFitSample:
    def test_writes_sample_matching_library_pipeline(self, workdir, tmp_path, capsys):
        out = tmp_path / "sim.csv"
        argv = ["fit-sample", str(workdir / "x.csv"),
                "--schema", str(workdir / "schema.json"),
                "--model", "gausscop", "--m", "120", "--seed", "9",
                "--out", str(out)]
        assert main(argv) == 0
        schema = schema_from_json(SCHEMA)
        data = dedup_rows(load_csv(workdir / "x.csv", schema))
        model = fit_covariate_model(data, "gausscop")
        sample = dedup_rows(sample_model(model, 120, 9))
        want = tmp_path / "want.csv"
        write_csv(sample, want)
        assert out.read_bytes() == want.read_bytes()
        assert capsys.readouterr().out == f"wrote {sample.n_rows} rows to {out}\n"

    def test_rerun_byte_identical(self, workdir, tmp_path, capsys):
        outs = []
        for name in ("one.csv", "two.csv"):
            out = tmp_path / name
            assert main(["fit-sample", str(workdir / "x.csv"),
                         "--schema", str(workdir / "schema.json"),
                         "--model", "indepcop", "--m", "90", "--seed", "4",
                         "--out", str(out)]) == 0
            outs.append(out.read_bytes())
        capsys.readouterr()
        assert outs[0] == outs[1]

    def test_save_model_roundtrips(self, workdir, tmp_path, capsys):
        out = tmp_path / "sim.csv"
        saved = tmp_path / "model.json"
        assert main(["fit-sample", str(workdir / "x.csv"),
                     "--schema", str(workdir / "schema.json"),
                     "--model", "gaussdist", "--m", "70", "--seed", "2",
                     "--out", str(out), "--save-model", str(saved)]) == 0
        capsys.readouterr()
        reloaded = load_model(saved)
        sample = dedup_rows(sample_model(reloaded, 70, 2))
        redraw = tmp_path / "redraw.csv"
        write_csv(sample, redraw)
        assert redraw.read_bytes() == out.read_bytes()

    def test_unknown_model_rejected_by_parser(self, workdir, tmp_path):
        with pytest.raises(SystemExit) as exc:
            main(["fit-sample", str(workdir / "x.csv"),
                  "--schema", str(workdir / "schema.json"),
                  "--model", "vine", "--out", str(tmp_path / "o.csv")])
        assert exc.value.code == 1


class TestExperimentCommands:
    @pytest.fixture()
    def config_path(self, workdir, tmp_path):
        cfg = {
            "experiment": "eval",
            "data": str(workdir / "x.csv"),
            "schema": "schema.json",
            "models": ["gausscop"],
            "m": 150,
            "s": 16,
            "seed": 3,
            "out_dir": str(tmp_path / "out"),
        }
        path = workdir / "cfg.json"
        path.write_text(json.dumps(cfg))
        return path

    def test_experiment_runs_and_reruns_identically(self, config_path, tmp_path, capsys):
        assert main(["experiment", str(config_path)]) == 0
        out = capsys.readouterr().out
        assert "wrote 2 rows to" in out and "manifest:" in out
        results = tmp_path / "out" / "eval_results.csv"
        manifest = tmp_path / "out" / "eval_manifest.json"
        before = (results.read_bytes(), manifest.read_bytes())
        assert main(["experiment", str(config_path)]) == 0
        capsys.readouterr()
        assert (results.read_bytes(), manifest.read_bytes()) == before

    def test_benchmark_subcommand(self, tmp_path, capsys):
        spec = {
            "experiment": "benchmark",
            "seed": 1,
            "s": 16,
            "benchmark": [{"name": "unit", "mu1": [0.0], "cov1": [[1.0]],
                           "mu2": [0.5], "cov2": [[1.0]], "n": 120, "m": 150}],
            "out_dir": str(tmp_path / "bench"),
        }
        path = tmp_path / "spec.json"
        path.write_text(json.dumps(spec))
        assert main(["benchmark", str(path)]) == 0
        assert "wrote 2 rows" in capsys.readouterr().out

    def test_benchmark_rejects_other_experiments(self, config_path, capsys):
        assert main(["benchmark", str(config_path)]) == 1
        assert "expected experiment" in capsys.readouterr().err

    def test_bad_config_json_exits_1(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text("{")
        assert main(["experiment", str(bad)]) == 1
        assert "invalid JSON" in capsys.readouterr().err
