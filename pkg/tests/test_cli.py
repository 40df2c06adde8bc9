import csv
import json

import pydot
import pytest

from graphdarts.cli import main

FAST = ["--w-epochs", "20", "--alpha-epochs", "10", "--retrain-epochs", "20", "--retrain-inits", "2"]


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


class TestGenerate:
    def test_weber_rows(self, tmp_path, capsys):
        assert main(["generate", "--case", "weber", "--seed", "7", "--out", str(tmp_path)]) == 0
        rows = read_csv(tmp_path / "weber.csv")
        assert len(rows) == 210
        assert list(rows[0]) == ["I0", "I1", "P(detected)", "split", "row_id"]
        assert "train 84, val 21, test 105" in capsys.readouterr().out

    def test_byte_identical(self, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        main(["generate", "--case", "lca", "--seed", "3", "--out", str(a)])
        main(["generate", "--case", "lca", "--seed", "3", "--out", str(b)])
        assert a.read_bytes() == b.read_bytes()

    def test_unknown_case(self, tmp_path, capsys):
        with pytest.raises(SystemExit) as err:
            main(["generate", "--case", "stroop", "--out", str(tmp_path)])
        assert err.value.code != 0
        assert "exp_learning" in capsys.readouterr().err


@pytest.fixture(scope="module")
def run_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("run")
    code = main(["search", "--method", "regular", "--case", "weber", "--k", "1", "--gamma", "0.25",
                 "--seed", "0", "--out", str(out), *FAST])
    assert code == 0
    return out


class TestSearch:
    def test_files(self, run_dir):
        names = sorted(p.name for p in run_dir.iterdir())
        assert names == ["manifest.json", "weber_regular_k1_g0.25_s0.json",
                         "weber_regular_k1_g0.25_s0_trace.csv"]
        assert len(read_csv(run_dir / "weber_regular_k1_g0.25_s0_trace.csv")) == 30

    def test_gamma_recorded_verbatim(self, run_dir):
        data = json.loads((run_dir / "weber_regular_k1_g0.25_s0.json").read_text())
        assert data["config"]["gamma"] == 0.25
        assert data["status"] == "ok"
        assert {"train", "val", "test"} == set(data["losses"])

    def test_manifest(self, run_dir):
        m = json.loads((run_dir / "manifest.json").read_text())
        assert len(m["configs"]) == 1 and len(m["dataset_checksum"]) == 64

    def test_export_equation(self, run_dir, capsys):
        capsys.readouterr()
        assert main(["export", str(run_dir / "weber_regular_k1_g0.25_s0.json")]) == 0
        assert capsys.readouterr().out.startswith("P(detected) = logistic(")

    def test_export_dot_parses(self, run_dir, tmp_path):
        out = tmp_path / "g.dot"
        main(["export", str(run_dir / "weber_regular_k1_g0.25_s0.json"), "--format", "dot",
              "--out", str(out)])
        (graph,) = pydot.graph_from_dot_data(out.read_text())
        names = {n.get_name().strip('"') for n in graph.get_nodes()}
        assert {"I0", "I1"} <= names

    def test_random_needs_budget(self, tmp_path):
        with pytest.raises(SystemExit) as err:
            main(["search", "--method", "random", "--case", "weber", "--out", str(tmp_path)])
        assert err.value.code == 2

    def test_budget_only_for_random(self, tmp_path):
        with pytest.raises(SystemExit):
            main(["search", "--method", "fair", "--case", "weber", "--out", str(tmp_path),
                  "--time-budget-s", "5"])


def test_lca_curves_have_two_sources(tmp_path):
    main(["search", "--method", "fair", "--case", "lca", "--out", str(tmp_path), *FAST])
    run = tmp_path / "lca_fair_k1_g0_s0.json"
    assert main(["export", str(run), "--format", "curves"]) == 0
    rows = read_csv(tmp_path / "lca_fair_k1_g0_s0_curves.csv")
    assert {r["source"] for r in rows} == {"model", "recovered"}
    assert [r for r in rows if r["source"] == "model"][-1]["step"] == "100"


def test_grid_and_summarize(tmp_path):
    assert main(["grid", "--case", "weber", "--methods", "regular,random", "--k-set", "1",
                 "--gamma-set", "0", "--seeds", "0-1", "--workers", "1", "--out", str(tmp_path),
                 *FAST]) == 0
    runs = [p for p in tmp_path.glob("weber_*.json")]
    assert len(runs) == 4
    summary = read_csv(tmp_path / "summary.csv")
    assert [(r["method"], r["n"]) for r in summary] == [("regular", "2"), ("random", "2")]
    best = json.loads((tmp_path / "best.json").read_text())
    for method, entry in best.items():
        vals = [json.loads(p.read_text()) for p in runs]
        vals = [v["losses"]["val"]["total"] for v in vals if v["config"]["method"] == method]
        assert entry["val_total"] == min(vals)
    before = (tmp_path / "summary.csv").read_text()
    assert main(["summarize", str(tmp_path)]) == 0
    assert (tmp_path / "summary.csv").read_text() == before
