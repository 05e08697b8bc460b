import csv
import json
import shutil
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from isingghost.cli import EXIT_CONFIG, EXIT_FAILED, EXIT_IO, EXIT_OK, EXIT_USAGE, main
from isingghost.lattice import graph_hash
from isingghost.samplers import read_bond_stream

FIXTURES = Path(__file__).parent / "fixtures"


def write_ini(path, text):
    path.write_text(text)
    return str(path)


def test_verify_small_corpus(tmp_path, capsys):
    ini = write_ini(tmp_path / "v.ini", "[verify]\nshapes = ##|##, ###\na_values = 1, 0.5\nh_values = 0, 0.4\n")
    assert main(["verify", "--config", ini, "--out", str(tmp_path / "o")]) == EXIT_OK
    out = capsys.readouterr().out
    assert "verification passed" in out
    report = json.loads((tmp_path / "o" / "verify.json").read_text())
    assert report["pass"] and report["n_graphs"] == 8
    golden = json.loads((tmp_path / "o" / "golden.json").read_text())
    assert {"graph-hash", "graph", "identity", "deviation"} <= set(golden[0])
    assert {r["identity"] for r in golden} >= {"ES", "SWITCHING", "UEG", "SECH", "PARITY"}


def test_verify_flags_corrupted_graph(tmp_path, capsys):
    for name in ("square.graph", "corrupted_square.graph"):
        shutil.copy(FIXTURES / name, tmp_path / name)
    ini = write_ini(tmp_path / "v.ini", "[verify]\ngraphs = *.graph\n")
    code = main(["verify", "--config", ini, "--out", str(tmp_path / "o")])
    assert code == EXIT_FAILED
    report = json.loads((tmp_path / "o" / "verify.json").read_text())
    assert not report["worst"]["COUPLINGS"]["pass"]
    assert report["worst"]["COUPLINGS"]["graph"] == "corrupted_square.graph"
    assert "FAIL" in capsys.readouterr().out


def test_clean_graph_file_passes(tmp_path):
    shutil.copy(FIXTURES / "square.graph", tmp_path / "square.graph")
    ini = write_ini(tmp_path / "v.ini", "[verify]\ngraphs = square.graph\n")
    assert main(["verify", "--config", ini, "--out", str(tmp_path / "o")]) == EXIT_OK


def test_empty_corpus_is_config_error(tmp_path, capsys):
    ini = write_ini(tmp_path / "v.ini", "[verify]\nshapes = \n")
    assert main(["verify", "--config", ini, "--out", str(tmp_path / "o")]) == EXIT_CONFIG
    assert "no graphs" in capsys.readouterr().err


def test_malformed_config_is_usage_error(tmp_path):
    ini = write_ini(tmp_path / "bad.ini", "this is [not ini\n= =\n")
    assert main(["verify", "--config", ini]) == EXIT_USAGE


def test_missing_config_file_is_io_error(tmp_path):
    assert main(["verify", "--config", str(tmp_path / "missing.ini")]) == EXIT_IO


def test_missing_seed(tmp_path):
    assert main(["experiment", "onearm", "--out", str(tmp_path)]) == EXIT_CONFIG
    assert main(["sample", "--out", str(tmp_path)]) == EXIT_CONFIG


def test_unknown_experiment_and_subcommand(tmp_path):
    assert main(["experiment", "nope", "--seed", "1", "--out", str(tmp_path)]) == EXIT_USAGE
    assert main(["frobnicate"]) == EXIT_USAGE


def test_invalid_experiment_value(tmp_path):
    ini = write_ini(tmp_path / "e.ini", "[onearm]\nchains = 1\n")
    assert main(["experiment", "onearm", "--seed", "1", "--config", ini, "--out", str(tmp_path)]) == EXIT_CONFIG


def test_unwritable_output(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    code = main(["experiment", "onearm", "--seed", "1", "--out", str(blocker / "sub")])
    assert code == EXIT_IO


TINY_ONEARM = "[run]\nworkers = 1\n[onearm]\nN = 16\nradii = 2, 4, 8\nchains = 2\nsweeps = 40\nbatches = 4\nburn_in = 5\n"


def test_onearm_tiny_run_is_reproducible(tmp_path):
    ini = write_ini(tmp_path / "e.ini", TINY_ONEARM)
    outs = []
    for k in range(2):
        out = tmp_path / f"run{k}"
        assert main(["experiment", "onearm", "--seed", "5", "--config", ini, "--out", str(out)]) == EXIT_OK
        outs.append(out)
        assert sorted(p.name for p in out.iterdir()) == ["manifest.json", "onearm.csv", "onearm.json"]
        rows = list(csv.DictReader((out / "onearm.csv").open()))
        assert [int(r["r"]) for r in rows] == [2, 4, 8]
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["seed"] == 5 and manifest["outputs"] == ["onearm.csv", "onearm.json"]
    for name in ("onearm.csv", "onearm.json"):
        assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()


@pytest.mark.parametrize("rep,boundary", [("fk", "wired"), ("trace", "free"), ("loops", "free")])
def test_sample_round_trip(tmp_path, rep, boundary):
    ini = write_ini(tmp_path / "s.ini", f"[run]\nseed = 3\n[sample]\ndomain = 0,2,0,2\na = 1\nh = 0.2\n"
                                        f"boundary = {boundary}\nrepresentation = {rep}\nsamples = 25\nthin = 2\n")
    out = tmp_path / "o"
    assert main(["sample", "--config", ini, "--out", str(out)]) == EXIT_OK
    header, idx, configs = read_bond_stream(out / "samples.bin")
    assert header["seed"] == 3 and configs.shape[0] == 25
    assert np.all(np.diff(idx) == 2)
    from isingghost.lattice import build_domain_graph

    g = build_domain_graph((0, 2, 0, 2), 1.0, 0.2)
    assert header["graph_hash"] == graph_hash(g) and configs.shape[1] == g.n_edges
    if rep == "loops":
        deg = np.array([np.bincount(g.edges[c].ravel(), minlength=g.n_vertices) for c in configs])
        assert np.all(deg % 2 == 0)


def test_sample_rejects_bad_settings(tmp_path):
    ini = write_ini(tmp_path / "s.ini", "[sample]\nrepresentation = trace\nboundary = wired\n")
    assert main(["sample", "--seed", "1", "--config", ini, "--out", str(tmp_path)]) == EXIT_CONFIG


def test_console_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "isingghost", "experiment", "nope", "--seed", "1",
                           "--out", str(tmp_path)], capture_output=True, text=True)
    assert proc.returncode == EXIT_USAGE
    assert "unknown experiment" in proc.stderr
