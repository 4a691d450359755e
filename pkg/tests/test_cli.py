import math

import numpy as np
import pytest

from peakheight import cli
from peakheight.config import builtin_ids, load_builtin
from peakheight.csvio import read_csv
from peakheight.errors import NotPSDGrid

LINEAR_BW = """
[model]
type = "kernel"
nu = {kind = "linear", coeffs = [0.1, 0.5]}
"""

STATIONARY = """
[model]
type = "kernel"
nu = 0.2
"""

COSINE_JSON = '{"model": {"type": "cosine", "cosine": {"c1": 3, "c2": 4, "omega": 2}}}'


@pytest.fixture
def model_file(tmp_path):
    def make(text, name="model.toml"):
        p = tmp_path / name
        p.write_text(text)
        return str(p)
    return make


def run1(*argv):
    (path,) = cli.run(list(argv))
    return read_csv(path)


class TestParams:
    def test_linear_bandwidth_rho_constant(self, model_file, tmp_path):
        t = run1("params", "--model", model_file(LINEAR_BW), "--out", str(tmp_path / "p.csv"))
        assert t.schema == "params/1" and len(t) == 101
        np.testing.assert_allclose(t["rho"], -5 / math.sqrt(119), atol=1e-12)

    def test_linear_bandwidth_quoted_constant(self, model_file, tmp_path):
        # quoted constant for this model; the derived Var X'' gives -5/sqrt(119) instead
        t = run1("params", "--model", model_file(LINEAR_BW), "--out", str(tmp_path / "p.csv"))
        np.testing.assert_allclose(t["rho"], -0.4588314677, atol=1e-8)

    def test_quadratic_sigma_crosses_zero(self, tmp_path):
        paths = cli.run(["reproduce", "fig5", "--out", str(tmp_path)])
        t = read_csv(paths[0])
        rho, ts = t["rho"], t["t"]
        assert rho.min() == pytest.approx(-0.54, abs=0.01) and abs(ts[rho.argmin()] - 0.2) < 0.05
        assert rho.max() == pytest.approx(0.38, abs=0.01) and abs(ts[rho.argmax()] - 0.7) < 0.05

    def test_cosine(self, model_file, tmp_path):
        t = run1("params", "--model", model_file(COSINE_JSON, "m.json"), "--grid", "0:6:61",
                 "--out", str(tmp_path / "p.csv"))
        np.testing.assert_allclose(t["rho"], -1.0)
        np.testing.assert_allclose(t["t"], np.linspace(0, 6, 61))


class TestDensity:
    def test_integrates_to_one(self, tmp_path):
        t = run1("density", f"--rho={-1 / math.sqrt(3)}", "--sigma-tilde", "1",
                 "--grid=-8:10:3601", "--out", str(tmp_path / "d.csv"))
        assert abs(np.trapezoid(t["density"], t["x"]) - 1) < 1e-4

    def test_mirror(self, tmp_path):
        t = run1("density", "--rho=-0.4,0.4", "--grid=-5:5:101", "--out", str(tmp_path / "d.csv"))
        lo, hi = t["density"][:101], t["density"][101:]
        np.testing.assert_allclose(lo, hi[::-1], atol=1e-15)

    def test_fig1_grid(self, tmp_path):
        (path,) = cli.run(["reproduce", "fig1", "--out", str(tmp_path)])
        t = read_csv(path)
        pairs = set(zip(np.round(t["rho"], 12), t["sigma_tilde"]))
        s3 = round(1 / math.sqrt(3), 12)
        assert pairs == {(r, s) for r in (-0.9, -s3, 0.0, s3, 0.9) for s in (0.5, 1.0, 2.0)}


class TestKacrice:
    @pytest.mark.parametrize("algorithm", ["1", "2"])
    def test_stationary_vs_closed_form(self, algorithm, model_file, tmp_path):
        t = run1("kacrice", "--model", model_file(STATIONARY), "--u=-inf,-1,0,1,2",
                 "--niters", "200000", "--algorithm", algorithm, "--seed", "3",
                 "--out", str(tmp_path / "k.csv"))
        assert t["tail"][0] == 1.0
        assert np.all(np.abs(t["tail"] - t["closed_form"]) <= 3 * t["se"] + 1e-12)

    def test_table2_scenarios(self, tmp_path, model_file):
        text = load_builtin("table2")
        cfg = (
            '[model]\ntype = "scale_space"\nN = 2\n[kacrice]\n'
            f'points = {text["kacrice"]["points"]}\nu = [0.0, 1.0, 2.0, 3.0]\n'
        )
        t = run1("kacrice", "--model", model_file(cfg), "--niters", "100000",
                 "--out", str(tmp_path / "k.csv"))
        tails = t["tail"].reshape(3, 4)
        ses = t["se"].reshape(3, 4)
        for i in range(3):
            for j in range(i):
                assert np.all(np.abs(tails[i] - tails[j]) <= 3 * np.hypot(ses[i], ses[j]))


class TestSimulate:
    def test_outputs(self, model_file, tmp_path):
        out = tmp_path / "s.csv"
        paths = cli.run(["simulate", "--model", model_file(LINEAR_BW), "--grid", "0:1:50",
                         "--nsims", "20", "--out", str(out)])
        peaks, tail = read_csv(paths[0]), read_csv(paths[1])
        assert paths[1] == cli.tail_path(out)
        assert list(peaks.columns) == ["realization_id", "t", "height"]
        assert peaks.meta["n_peaks"] == str(len(peaks))
        assert tail.schema == "tail/1" and np.all(np.diff(tail["tail"]) <= 0)

    def test_scale_space_columns(self, tmp_path):
        paths = cli.run(["reproduce", "fig7", "--out", str(tmp_path)])
        assert list(read_csv(paths[0]).columns) == ["realization_id", "t1", "nu", "height"]

    def test_no_peaks_gives_undefined_tail(self, tmp_path):
        paths = cli.run(["reproduce", "fig7", "--out", str(tmp_path)])
        peaks, tail = read_csv(paths[0]), read_csv(paths[1])
        assert len(peaks) == 0
        assert np.all(np.isnan(tail["tail"])) and "note" in tail.meta


def test_benchmark_single_realization(tmp_path):
    cfg = tmp_path / "b.toml"
    cfg.write_text('[model]\ntype = "scale_space"\nN = 2\n')
    t = run1("benchmark", "--model", str(cfg), "--grid", "0:1:8,0:1:8,0.2:1.2:8",
             "--nsims", "1", "--out", str(tmp_path / "b.csv"))
    assert list(t["method"]) == ["direct_simulation", "kac_rice_algorithm1"]
    assert np.all(t["wall_seconds"] > 0)


class TestExitCodes:
    def test_ok(self, model_file, tmp_path, capsys):
        assert cli.main(["params", "--model", model_file(LINEAR_BW), "--out", str(tmp_path / "p.csv")]) == 0
        assert capsys.readouterr().out.strip().endswith("p.csv")

    @pytest.mark.parametrize("argv", [
        ["params"],
        ["params", "--model", "/nonexistent.toml"],
        ["kacrice", "--model", "{m}", "--u", "2,1"],
        ["kacrice", "--model", "{m}", "--u", "0,inf"],
        ["kacrice", "--model", "{m}", "--niters", "0"],
        ["simulate", "--model", "{m}"],
        ["reproduce", "fig99"],
    ])
    def test_config_errors(self, argv, model_file, capsys):
        m = model_file(LINEAR_BW)
        assert cli.main([a.format(m=m) for a in argv]) == 2
        assert "error" in capsys.readouterr().err

    @pytest.mark.parametrize("text", ['[model]\ntype = "wave"\n', "[model\n", "[model]\nnu = {kind = 'linear', coeffs = [1]}\n"])
    def test_bad_model_files(self, text, model_file):
        assert cli.main(["params", "--model", model_file(text)]) == 2

    def test_numerical_failure(self, model_file, monkeypatch, capsys):
        def boom(cfg, reproducible):
            raise NotPSDGrid("grid covariance is not positive semidefinite")

        monkeypatch.setitem(cli.RUNNERS, "params", boom)
        assert cli.main(["params", "--model", model_file(LINEAR_BW)]) == 3
        assert "numerical failure" in capsys.readouterr().err

    def test_nonpositive_profile(self, model_file, tmp_path):
        text = '[model]\ntype = "kernel"\nnu = 0.3\nsigma = [0.0]\n'
        assert cli.main(["params", "--model", model_file(text), "--out", str(tmp_path / "p.csv")]) == 2

    def test_unwritable(self, model_file, tmp_path):
        blocker = tmp_path / "file"
        blocker.write_text("")
        assert cli.main(["params", "--model", model_file(LINEAR_BW), "--out", str(blocker / "p.csv")]) == 2


class TestDeterminism:
    @pytest.mark.parametrize("verb,extra", [
        ("kacrice", ["--niters", "70000", "--u=-1,0,1,2"]),
        ("kacrice", ["--niters", "70000", "--u=-1,0,1,2", "--algorithm", "2"]),
        ("simulate", ["--grid", "0:1:60", "--nsims", "600"]),
        ("params", []),
    ])
    def test_byte_identical(self, verb, extra, model_file, tmp_path):
        m = model_file(LINEAR_BW)
        texts = []
        for i, workers in enumerate(("1", "1", "3")):
            out = tmp_path / f"{i}" / "o.csv"
            paths = cli.run([verb, "--model", m, "--seed", "11", "--reproducible", "--workers", workers,
                             "--out", str(out)] + extra)
            texts.append([p.read_bytes() for p in paths])
        assert texts[0] == texts[1] == texts[2]

    def test_timestamp_only_without_flag(self, model_file, tmp_path):
        (p,) = cli.run(["params", "--model", model_file(LINEAR_BW), "--out", str(tmp_path / "p.csv")])
        assert "# generated:" in p.read_text()


QUICK = ["fig1", "fig2", "fig3", "fig4", "fig5", "fig6", "fig7"]


@pytest.mark.parametrize("exp", QUICK)
def test_reproduce_round_trip(exp, tmp_path):
    paths = cli.run(["reproduce", exp, "--out", str(tmp_path), "--reproducible", "--niters", "20000"])
    assert paths
    for p in paths:
        t = read_csv(p)
        assert t.columns and t.schema
        assert "generated" not in t.meta


def test_every_figure_has_a_config():
    assert set(builtin_ids()) == {f"fig{i}" for i in range(1, 11)} | {"table1", "table2"}
