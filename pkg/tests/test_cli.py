import csv

import numpy as np
import pytest

from catlasso.cli import main

from oracles import dummies


def write(path, text):
    path.write_text(text)
    return str(path)


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def fit_rows(path):
    rows = read_csv(path)
    assert rows[0] == ["term", "block", "level", "value"]
    return rows[1:]


def theta_blocks(rows):
    out = {}
    for term, block, level, value in rows:
        if term == "theta":
            out.setdefault(block, {})[level] = float(value)
    return out


@pytest.fixture
def fit_data(tmp_path):
    rng = np.random.default_rng(0)
    n = 40
    a = np.concatenate([[1, 2, 3], rng.choice([1, 2, 3], n - 3, p=[0.6, 0.3, 0.1])])
    b = np.concatenate([[1, 2], rng.choice([1, 2], n - 2, p=[0.7, 0.3])])
    labels = np.array(["lo", "mid", "hi"])
    y = np.array([0.5, -1.0, 1.5])[a - 1] + np.array([0.3, -0.3])[b - 1] + 0.2 * rng.normal(size=n)
    lines = ["y,a,b"] + [f"{float(yi)!r},{labels[ai - 1]},{bi}" for yi, ai, bi in zip(y, a, b)]
    # Labels sort as hi < lo < mid.
    order = {"hi": 0, "lo": 1, "mid": 2}
    codes_a = np.array([order[labels[ai - 1]] + 1 for ai in a])
    return write(tmp_path / "data.csv", "\n".join(lines) + "\n"), y, codes_a, b


class TestEncode:
    def test_reference(self, tmp_path, capsys):
        src = write(tmp_path / "x.csv", "f\n1\n2\n3\n")
        assert main(["encode", "--input", src, "--scheme", "reference"]) == 0
        assert capsys.readouterr().out == "f_1,f_2\n1,0\n0,1\n0,0\n"

    def test_indicator_and_helmert(self, tmp_path):
        src = write(tmp_path / "x.csv", "f\n1\n2\n3\n")
        out = tmp_path / "o.csv"
        assert main(["encode", "--input", src, "--scheme", "helmert", "--output", str(out)]) == 0
        assert read_csv(out)[1:] == [["-1", "-1"], ["1", "-1"], ["0", "2"]]
        assert main(["encode", "--input", src, "--output", str(out)]) == 0
        assert read_csv(out) == [["f_1", "f_2", "f_3"], ["1", "0", "0"], ["0", "1", "0"], ["0", "0", "1"]]

    def test_single_level_rejected(self, tmp_path, capsys):
        src = write(tmp_path / "x.csv", "f\na\na\n")
        assert main(["encode", "--input", src, "--scheme", "reference"]) == 2
        assert "2 levels" in capsys.readouterr().err

    def test_standardized_means(self, tmp_path):
        src = write(tmp_path / "x.csv", "f,g\na,1\nb,2\nb,2\nc,1\nb,1\n")
        out = tmp_path / "o.csv"
        assert main(["encode", "--input", src, "--scheme", "standardized", "--output", str(out)]) == 0
        values = np.array(read_csv(out)[1:], dtype=float)
        assert np.abs(values.mean(axis=0)).max() <= 1e-12
        # Column norms follow sqrt(1 - n_l / n).
        freq = np.array([1, 3, 1, 3, 2]) / 5
        np.testing.assert_allclose(np.linalg.norm(values, axis=0), np.sqrt(1 - freq), atol=1e-12)

    @pytest.mark.parametrize(
        "text, line",
        [("f,g\n1,2\n3\n", 3), ("f,g\n1,2\n1,\n", 3), ("f,g\n1,2\n2,1\n1,2,3\n", 4)],
    )
    def test_malformed(self, tmp_path, capsys, text, line):
        src = write(tmp_path / "x.csv", text)
        assert main(["encode", "--input", src]) == 2
        assert f"line {line}" in capsys.readouterr().err

    def test_missing_file(self, tmp_path):
        assert main(["encode", "--input", str(tmp_path / "nope.csv")]) == 2


class TestFit:
    def test_unpenalized_matches_normal_equations(self, fit_data, tmp_path):
        src, y, codes_a, codes_b = fit_data
        out = tmp_path / "fit.csv"
        assert main(["fit", "--input", src, "--lambda", "0", "--output", str(out)]) == 0
        rows = fit_rows(out)
        theta = theta_blocks(rows)
        # Effect coding: the last level's coefficient is minus the sum of the rest.
        za = dummies(codes_a, 3)
        zb = dummies(codes_b, 2)
        ea = za[:, :2] - za[:, 2:3]
        eb = zb[:, :1] - zb[:, 1:2]
        a = np.hstack([np.ones((len(y), 1)), ea, eb])
        coef = np.linalg.solve(a.T @ a, a.T @ y)
        theta_a = np.append(coef[1:3], -coef[1:3].sum())
        theta_b = np.append(coef[3:4], -coef[3])
        np.testing.assert_allclose([theta["a"][k] for k in ("hi", "lo", "mid")], theta_a, atol=1e-8)
        np.testing.assert_allclose([theta["b"][k] for k in ("1", "2")], theta_b, atol=1e-8)
        # Intercept is mean(y); the OLS intercept differs by the centering offsets.
        fitted_ols = a @ coef
        fitted = float(rows[0][3]) + sum(
            np.array([theta[name][lab] for lab in labs])[codes - 1]
            - np.mean(np.array([theta[name][lab] for lab in labs])[codes - 1])
            for name, labs, codes in (("a", ("hi", "lo", "mid"), codes_a), ("b", ("1", "2"), codes_b))
        )
        np.testing.assert_allclose(fitted, fitted_ols, atol=1e-8)

    def test_huge_lambda(self, fit_data, tmp_path):
        src, y, *_ = fit_data
        out = tmp_path / "fit.csv"
        assert main(["fit", "--input", src, "--lambda", "1e6", "--output", str(out)]) == 0
        rows = fit_rows(out)
        assert float(rows[0][3]) == pytest.approx(y.mean(), abs=1e-12)
        assert all(float(r[3]) == 0.0 for r in rows if r[0] == "theta")
        diag = {r[0]: r[3] for r in rows}
        assert diag["converged"] == "true"
        assert float(diag["kkt_residual"]) == 0.0

    @pytest.mark.parametrize("variant", ["group_only", "sgl_scaling", "sgl_svd", "sgl_svd_scaling", "sgl_centering_only"])
    def test_theta_sums(self, fit_data, tmp_path, variant):
        src, *_ = fit_data
        out = tmp_path / "fit.csv"
        args = ["fit", "--input", src, "--lambda", "0.02", "--tau", "0.5", "--lambda-lasso", "0.02",
                "--variant", variant, "--output", str(out)]
        assert main(args) == 0
        for block in theta_blocks(fit_rows(out)).values():
            assert abs(sum(block.values())) <= 1e-8

    def test_interaction(self, fit_data, tmp_path):
        src, *_ = fit_data
        out = tmp_path / "fit.csv"
        assert main(["fit", "--input", src, "--lambda", "0.01", "--interaction", "a:b", "--output", str(out)]) == 0
        theta = theta_blocks(fit_rows(out))
        inter = theta["a:b"]
        table = np.array([[inter[f"{la}:{lb}"] for lb in ("1", "2")] for la in ("hi", "lo", "mid")])
        assert np.abs(table.sum(axis=0)).max() <= 1e-8
        assert np.abs(table.sum(axis=1)).max() <= 1e-8

    def test_empty_cell_exit(self, tmp_path, capsys):
        src = write(tmp_path / "d.csv", "y,a,b\n1,1,1\n2,1,2\n3,2,1\n4,2,1\n")
        assert main(["fit", "--input", src, "--lambda", "0.1", "--interaction", "a:b"]) == 2
        assert "(2, 2)" in capsys.readouterr().err

    def test_empty_level_exit(self, tmp_path):
        src = write(tmp_path / "d.csv", "y,a\n1,1\n2,3\n3,3\n")
        assert main(["fit", "--input", src, "--lambda", "0.1"]) == 2

    def test_bad_response(self, tmp_path, capsys):
        src = write(tmp_path / "d.csv", "y,a\n1,1\nx,2\n")
        assert main(["fit", "--input", src, "--lambda", "0.1"]) == 2
        assert "line 3" in capsys.readouterr().err

    def test_nonconvergence_exit(self, fit_data, tmp_path):
        src, *_ = fit_data
        out = tmp_path / "fit.csv"
        assert main(["fit", "--input", src, "--lambda", "0.001", "--max-iter", "1", "--output", str(out)]) == 3
        diag = {r[0]: r[3] for r in fit_rows(out)}
        assert diag["converged"] == "false"


SIM_ARGS = ["simulate", "--setting", "1", "--s", "1", "--t", "0.6667", "--reps", "2", "--seed", "7",
            "--p", "3", "--L", "4", "--n-train", "80", "--n-val", "40"]


class TestSimulate:
    def test_identical_reruns(self, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        assert main(SIM_ARGS + ["--output", str(a)]) == 0
        assert main(SIM_ARGS + ["--output", str(b)]) == 0
        assert a.read_bytes() == b.read_bytes()
        assert (tmp_path / "a_summary.csv").read_bytes() == (tmp_path / "b_summary.csv").read_bytes()
        rows = read_csv(a)
        assert rows[0] == ["method", "replication", "kappa", "tau", "val_mspe", "est_error"]
        assert len(rows) == 1 + 2 * 2

    def test_config_file(self, tmp_path):
        cfg = write(tmp_path / "sim.cfg", "# small run\nsetting = 1\ns = 1\nt = 2/3\nreps = 1\n"
                    "p = 3\nL = 4\nn_train = 80\nn_val = 40\nseed = 7\n")
        out = tmp_path / "r.csv"
        assert main(["simulate", "--config", cfg, "--output", str(out)]) == 0
        assert len(read_csv(out)) == 3

    def test_stdout(self, capsys):
        assert main(SIM_ARGS + ["--reps", "1"]) == 0
        text = capsys.readouterr().out
        assert text.startswith("method,replication")

    @pytest.mark.parametrize(
        "extra",
        [["--s", "9"], ["--t", "0"], ["--n-train", "3"], ["--methods", "svd"]],
    )
    def test_invalid_config(self, extra):
        assert main(SIM_ARGS + extra) == 2

    def test_bad_config_line(self, tmp_path):
        cfg = write(tmp_path / "sim.cfg", "setting 1\n")
        assert main(["simulate", "--config", cfg]) == 2

    def test_solver_failure_exit(self, tmp_path, monkeypatch):
        import catlasso.experiments as ex

        real = ex.run_replication

        def flaky(cfg, r, solver_cfg=None):
            if r == 1:
                raise ex.NonConvergenceError("forced", None)
            return real(cfg, r, solver_cfg)

        monkeypatch.setattr(ex, "run_replication", flaky)
        out = tmp_path / "r.csv"
        assert main(SIM_ARGS + ["--output", str(out)]) == 3
        rows = read_csv(out)
        assert {r[1] for r in rows[1:]} == {"0"}
