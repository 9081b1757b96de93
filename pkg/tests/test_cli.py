import json

import pytest

from hoplp.cli import main
from hoplp.generators import gen_chain_exclusion
from hoplp.model import EnergyModel, write_model, zero_hop


@pytest.fixture
def chain(tmp_path):
    p = tmp_path / "chain.json"
    p.write_text(write_model(gen_chain_exclusion(4, 10.0, 0.1)))
    return p


def test_solve_all_edges(chain, tmp_path, capsys):
    trace = tmp_path / "trace.csv"
    assert main(["solve", str(chain), "--edges", "all", "--trace", str(trace)]) == 0
    rep = json.loads(capsys.readouterr().out)
    assert rep["certificate"] and rep["decoded"] == [1, 1, 1, 1]
    assert rep["bound"] == pytest.approx(0.4, abs=1e-6)
    assert trace.read_text().startswith("sweep,bound\n")


def test_solve_without_edges_is_loose(chain, tmp_path):
    out = tmp_path / "r.json"
    assert main(["solve", str(chain), "--edges", "none", "--out", str(out)]) == 0
    rep = json.loads(out.read_text())
    assert not rep["certificate"] and rep["bound"] == pytest.approx(0.1, abs=1e-4)


def test_solve_edge_file(chain, tmp_path, capsys):
    f = tmp_path / "edges.json"
    f.write_text(json.dumps([[0, 1], [1, 2], [2, 3]]))
    assert main(["solve", str(chain), "--edges", f"file:{f}"]) == 0
    assert json.loads(capsys.readouterr().out)["certificate"]
    f.write_text(json.dumps([[0, 2]]))
    assert main(["solve", str(chain), "--edges", f"file:{f}"]) == 2


def test_tw_budget(chain):
    assert main(["solve", str(chain), "--edges", "all", "--tw-max", "0"]) == 2


def test_oracle(chain, capsys):
    assert main(["oracle", str(chain)]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["assignment"] == [1, 1, 1, 1] and out["energy"] == pytest.approx(0.4)


def test_input_errors(tmp_path, capsys):
    assert main(["solve", str(tmp_path / "missing.json")]) == 2
    bad = tmp_path / "bad.json"
    bad.write_text("{}")
    assert main(["oracle", str(bad)]) == 2
    assert "error" in capsys.readouterr().err
    assert main(["solve", str(bad), "--edges", "weird"]) == 2


def test_infeasible_exit_code(tmp_path):
    m = EnergyModel(1, [[1e15, 1e15]], [], [], zero_hop(1))
    p = tmp_path / "inf.json"
    p.write_text(write_model(m))
    assert main(["oracle", str(p)]) == 3
    assert main(["solve", str(p), "--edges", "none"]) == 3


def test_gen_and_tighten(tmp_path, capsys):
    model = tmp_path / "grid.json"
    assert main(["gen", "avgcut-grid", "--rows", "3", "--cols", "3", "--seed", "2", "--out", str(model)]) == 0
    trace = tmp_path / "sel.csv"
    assert main(["tighten", str(model), "--k", "2", "--trace", str(trace)]) == 0
    rep = json.loads(capsys.readouterr().out)
    assert rep["stop_reason"] == "certified" and rep["bound"] == pytest.approx(0.0, abs=1e-6)
    assert trace.read_text().splitlines()[0] == "round,edges_in_S,edge_added,wca,treewidth_bound,converged_bound"


@pytest.mark.parametrize("family", ["chain-exclusion", "avgcut-chain", "hamming-tree"])
def test_gen_families(family, tmp_path):
    out = tmp_path / "m.json"
    assert main(["gen", family, "--n", "6", "--out", str(out)]) == 0
    assert main(["oracle", str(out)]) == 0


def test_gen_rejects_bad_parameters(capsys):
    assert main(["gen", "chain-exclusion", "--n", "5"]) == 2
    assert main(["gen", "avgcut-grid", "--rows", "6", "--cols", "6"]) == 2


def test_experiment_command(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"n": 6, "seeds": 2, "k": [1], "lam": [0.5]}))
    assert main(["experiment", "hamming", "--config", str(cfg), "--outdir", str(tmp_path / "out")]) == 0
    assert json.loads(capsys.readouterr().out)["cells"][0]["tree_certified_rate"] == 1.0
    assert (tmp_path / "out" / "hamming.csv").exists()
    cfg.write_text(json.dumps({"n": 6, "bogus": 1}))
    assert main(["experiment", "hamming", "--config", str(cfg), "--outdir", str(tmp_path)]) == 2


def test_help_documents_schemas(capsys):
    with pytest.raises(SystemExit):
        main(["--help"])
    text = capsys.readouterr().out
    assert "edgesel-compare: seed, criterion" in text and "exit codes" in text
