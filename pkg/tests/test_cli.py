import csv
import io
import json

import numpy as np
import pytest

from graphsee.cli import main


def run(argv, tmp_path, name="out"):
    out, summary = tmp_path / f"{name}.csv", tmp_path / f"{name}.json"
    code = main([*argv, "--out", str(out), "--summary", str(summary)])
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out.read_text())))
    return rows, json.loads(summary.read_text())["summary"], out.read_bytes()


class TestGraphInfo:
    def test_karate(self, tmp_path):
        rows, summary, _ = run(["graph-info", "karate"], tmp_path)
        assert summary["n_nodes"] == 34 and summary["n_edges"] == 78
        assert summary["lambda0"] == pytest.approx(0.132, abs=5e-4)
        assert len(rows) == 34 and set(rows[0]) == {"node_id", "degree", "z0"}

    def test_inline_triangle(self, tmp_path):
        _, summary, _ = run(["graph-info", "inline:1 2;2 3;1 3"], tmp_path)
        assert summary["lambda0"] == pytest.approx(1.5)

    def test_file(self, tmp_path):
        path = tmp_path / "g.txt"
        path.write_text("# square\n1 2\n2 3\n3 4\n4 1\n")
        _, summary, _ = run(["graph-info", str(path)], tmp_path)
        assert summary["n_nodes"] == 4 and summary["lambda0"] == pytest.approx(1.0)

    def test_missing_file(self, tmp_path, capsys):
        assert main(["graph-info", str(tmp_path / "nope.txt")]) == 3
        assert "cannot read edge list" in capsys.readouterr().err

    def test_bad_file(self, tmp_path):
        path = tmp_path / "g.txt"
        path.write_text("1 1\n")
        assert main(["graph-info", str(path)]) == 3

    def test_usage_error(self):
        with pytest.raises(SystemExit) as exc:
            main(["enf", "karate", "--link", "probit"])
        assert exc.value.code == 2


class TestEnf:
    def test_logistic(self, tmp_path):
        rows, s, _ = run(["enf", "karate"], tmp_path)
        assert s["xi0"] == pytest.approx(0.955, abs=0.01)
        np.testing.assert_allclose(s["psi0"], [-4.631, 15.747], rtol=0.01)
        assert (s["misclassified_ones"], s["misclassified_zeros"]) == (2, 2)
        wrong = sum(r["y"] != r["yhat"] for r in rows)
        assert wrong == 4

    def test_tanh(self, tmp_path):
        _, s, _ = run(["enf", "karate", "--link", "tanh"], tmp_path)
        np.testing.assert_allclose(s["psi0"], [-2.315, 7.874], rtol=0.01)

    def test_normalize(self, tmp_path):
        rows, s, _ = run(["enf", "karate", "--normalize"], tmp_path)
        x = np.array([float(r["x0"]) for r in rows])
        assert np.linalg.norm(x) == pytest.approx(1, abs=1e-8)
        assert s["misclassified"] == 4

    def test_sample(self, tmp_path):
        rows, s, _ = run(["enf", "karate", "--sample", "5", "--replicates", "500", "--seed", "3"], tmp_path)
        assert "xhat_mean" in rows[0]
        assert abs(s["score_at_xi0_mean"]) < 4 * s["score_at_xi0_se"]
        ydot = np.array([float(r["ydot"]) for r in rows])
        xhat = np.array([float(r["xhat_mean"]) for r in rows])
        np.testing.assert_allclose(xhat, s["xi_hat_mean"] * ydot, rtol=1e-7, atol=1e-9)

    def test_labels_file(self, tmp_path):
        lab = tmp_path / "y.csv"
        lab.write_text("1,0\n2,1\n3,1\n4,0\n")
        _, s, _ = run(["enf", "inline:1 2;2 3;3 4;4 1;1 3", "--labels", str(lab)], tmp_path)
        assert "xi0" in s

    def test_needs_labels(self):
        assert main(["enf", "inline:1 2;2 3"]) == 3

    def test_separated_is_numerical_failure(self, tmp_path):
        lab = tmp_path / "y.csv"
        lab.write_text("1,1\n2,1\n3,0\n4,0\n")
        assert main(["enf", "inline:1 2;3 4;2 3", "--labels", str(lab)]) == 4


class TestSnle:
    def test_eigen_route(self, tmp_path):
        rows, s, _ = run(["snle", "karate", "--lambda", "0.1", "--gamma", "0", "--variant", "plain"], tmp_path)
        assert abs(s["corr_x0_z0"]) > 0.99
        assert set(rows[0]) == {"node_id", "y", "z0", "x0"}

    def test_sweep(self, tmp_path):
        rows, _, _ = run(
            ["snle", "karate", "--sweep", "0.1:1.9:0.1", "--variant", "plain", "--gamma", "0.0001"], tmp_path
        )
        assert list(rows[0]) == ["lambda", "rank", "correlation"]
        assert len(rows) == 19
        assert rows[0]["lambda"] == "0.1" and rows[0]["rank"] == "33"

    def test_sample(self, tmp_path):
        rows, s, _ = run(
            ["snle", "karate", "--sample", "1", "--gamma", "0.1", "--lambda", "0.1", "--variant", "looped",
             "--replicates", "2000", "--seed", "4"],
            tmp_path,
        )
        assert {"xhat_mean", "inclusion_count"} <= set(rows[0])
        assert s["missing_nodes"] == []
        assert s["gap_xhat_mean"] > 0

    def test_bad_sweep(self):
        assert main(["snle", "karate", "--sweep", "1:0.5"]) == 3


class TestTrw:
    def test_walks(self, tmp_path):
        rows, s, _ = run(["trw", "karate", "--walks", "4", "--states", "300", "--seed", "2"], tmp_path)
        assert len(rows) == 4 and [r["seed"] for r in rows] == ["2", "3", "4", "5"]
        xi = np.array([float(r["xi_hat"]) for r in rows])
        assert s["xi_hat_combined"] == pytest.approx(xi.mean(), rel=1e-8)
        assert s["xi_hat_variance"] == pytest.approx(xi.var(ddof=1) / 4, rel=1e-6)
        assert sum(s["visit_frequency"]) == pytest.approx(1)

    def test_single_walk_has_no_variance(self, tmp_path):
        _, s, _ = run(["trw", "karate", "--walks", "1", "--states", "100"], tmp_path)
        assert s["xi_hat_variance"] is None

    @pytest.mark.slow
    def test_combined_near_graph_fit(self, tmp_path):
        _, s, _ = run(["trw", "karate", "--walks", "10", "--states", "2000", "--seed", "1"], tmp_path)
        assert abs(s["xi_hat_combined"] - 0.955) < 3 * np.sqrt(s["xi_hat_variance"]) + 0.01


class TestReproducibility:
    def test_byte_identical(self, tmp_path):
        argv = ["enf", "karate", "--sample", "3", "--replicates", "200", "--seed", "9"]
        _, _, a = run(argv, tmp_path, "a")
        _, _, b = run(argv, tmp_path, "b")
        assert a == b

    def test_env_seed(self, tmp_path, monkeypatch):
        argv = ["snle", "karate", "--sample", "2", "--replicates", "50"]
        monkeypatch.setenv("GRAPHSEE_SEED", "17")
        _, _, env = run(argv, tmp_path, "env")
        monkeypatch.delenv("GRAPHSEE_SEED")
        _, _, flag = run([*argv, "--seed", "17"], tmp_path, "flag")
        _, _, other = run(argv, tmp_path, "other")
        assert env == flag != other

    def test_nine_significant_digits(self, tmp_path):
        rows, _, _ = run(["graph-info", "karate"], tmp_path)
        digits = max(len(r["z0"].lstrip("-").replace(".", "").lstrip("0").split("e")[0]) for r in rows)
        assert digits == 9

    def test_stdout_default(self, capsys):
        assert main(["graph-info", "inline:1 2"]) == 0
        captured = capsys.readouterr()
        assert captured.out.splitlines()[0] == "node_id,degree,z0"
        assert json.loads(captured.err)["command"] == "graph-info"
