import csv
import io
import json
import math

import numpy as np
import pytest

from isingghost.events import has_dual_circuit
from isingghost.experiments import (
    DECAY_EXPONENT,
    EXPERIMENTS,
    ExperimentConfig,
    default_config,
    fit_line,
    frame_graph,
    loop_domain,
    run_experiment,
    write_outputs,
)
from isingghost.lattice import WIRED, RectFrame, row_of_frames
from isingghost.samplers import RngStream, fk_chain

TINY = dict(chains=2, sweeps=40, batches=4, burn_in=5)


def rows_of(result):
    return list(csv.DictReader(io.StringIO(result.csv_text())))


def test_exponent_constants():
    assert DECAY_EXPONENT == pytest.approx(8 / 15)


def test_fit_line_recovers_exact_line():
    x = np.arange(6.0)
    fit = fit_line(x, 2.5 - 0.75 * x, np.full(6, 0.1))
    assert fit.slope == pytest.approx(-0.75, abs=1e-12)
    assert fit.intercept == pytest.approx(2.5, abs=1e-12)
    assert fit.chi2 == pytest.approx(0.0, abs=1e-20)
    # two points, slope error is sqrt(2) sigma / dx
    two = fit_line([0.0, 1.0], [0.0, 1.0], [0.1, 0.1])
    assert two.slope_se == pytest.approx(0.1 * math.sqrt(2), rel=1e-12)


def test_fit_line_inflates_by_scatter():
    x = np.arange(10.0)
    y = x + np.where(np.arange(10) % 2, 1.0, -1.0)
    fit = fit_line(x, y, np.full(10, 0.01))
    assert fit.slope_se > 0.05
    with pytest.raises(ValueError):
        fit_line([1.0], [1.0], [1.0])
    with pytest.raises(ValueError):
        fit_line([1.0, 2.0], [1.0, 2.0], [1.0, 0.0])


@pytest.mark.parametrize("bad", [
    dict(name="nope"), dict(chains=1), dict(sweeps=2, batches=5), dict(h_values=(-0.1,)),
    dict(a_values=(2.0,)), dict(budget_scale=0.0), dict(radii=()), dict(burn_in=-1),
])
def test_config_validation(bad):
    kw = dict(name="decay", seed=1) | bad
    with pytest.raises(ValueError):
        ExperimentConfig(**kw)


def test_config_dict_round_trip_and_scaling():
    cfg = default_config("rsw", 4)
    assert ExperimentConfig.from_dict(json.loads(json.dumps(cfg.to_dict()))) == cfg
    small = cfg.scaled(0.1)
    assert small.sweeps == round(cfg.sweeps * 0.1)
    assert small.budget_scale == pytest.approx(0.1)
    with pytest.raises(ValueError):
        ExperimentConfig.from_dict({"name": "rsw", "seed": 1, "colour": 3})


def test_defaults_cover_every_experiment():
    for name in EXPERIMENTS:
        assert default_config(name, 0).name == name


def test_loop_domain_holds_the_row():
    for n in (1, 4):
        x0, x1, y0, y1 = loop_domain(n)
        for fr in row_of_frames(n):
            assert x0 <= fr.T.x0 and fr.T.x1 <= x1 and y0 <= fr.T.y0 and fr.T.y1 <= y1


def test_decoupled_annulus_always_has_circuit():
    g = frame_graph(0.5, 0.1)
    g0 = g.with_couplings(np.where(np.arange(g.n_edges) < g.n_internal, 0.0, g.couplings))
    it = fk_chain(g0, WIRED, RngStream(0), burn_in=5)
    assert all(has_dual_circuit(next(it), g0, RectFrame()) for _ in range(50))


def test_decay_schema_and_determinism(tmp_path):
    cfg = default_config("decay", 11, N=16, h_values=(0.0, 0.4), distances=(1, 2, 3), **TINY)
    a, b = run_experiment(cfg), run_experiment(cfg)
    assert a.csv_text() == b.csv_text()
    assert a.json_text() == b.json_text()
    rows = rows_of(a)
    assert list(rows[0]) == ["h", "distance", "covariance", "SE"]
    assert len(rows) == 6
    assert all(float(r["SE"]) >= 0 for r in rows)
    paths = write_outputs(a, tmp_path)
    assert sorted(p.name for p in paths) == ["decay.csv", "decay.json"]
    meta = json.loads((tmp_path / "decay.json").read_text())
    assert meta["experiment"] == "decay" and meta["parameters"]["seed"] == 11


def test_seed_changes_output():
    cfg = default_config("onearm", 1, N=16, radii=(2, 4), **TINY)
    other = default_config("onearm", 2, N=16, radii=(2, 4), **TINY)
    assert run_experiment(cfg).csv_text() != run_experiment(other).csv_text()


def test_onearm_probabilities_are_probabilities():
    res = run_experiment(default_config("onearm", 3, N=16, radii=(2, 4, 8), **TINY))
    rows = rows_of(res)
    assert [int(r["r"]) for r in rows] == [2, 4, 8]
    assert all(0 <= float(r["probability"]) <= 1 for r in rows)
    assert "exponent_in_band" in res.summary["flags"]


def test_rsw_reports_every_cell():
    res = run_experiment(default_config("rsw", 5, a_values=(1.0, 0.5), h_values=(0.0, 0.1), **TINY))
    rows = rows_of(res)
    assert len(rows) == 4
    assert all(0 <= float(r["P_E1"]) <= 1 for r in rows)
    assert "c0" in res.summary["estimates"]


def test_hR_and_loops_run_at_tiny_budget():
    hr = run_experiment(default_config("hR", 6, a_values=(1.0,), **TINY))
    assert len(rows_of(hr)) == 1
    lp = run_experiment(default_config("loops", 7, n_values=(1, 2), **TINY))
    rows = rows_of(lp)
    for n in (1, 2):
        law = [float(r["probability"]) for r in rows if int(r["n"]) == n]
        assert [int(r["count"]) for r in rows if int(r["n"]) == n] == list(range(n + 1))
        assert sum(law) == pytest.approx(1.0, abs=1e-12)


def test_parallel_workers_match_serial():
    cfg = default_config("rsw", 8, a_values=(1.0,), h_values=(0.0, 0.1), **TINY)
    par = ExperimentConfig.from_dict(cfg.to_dict() | {"workers": 2})
    assert run_experiment(cfg).csv_text() == run_experiment(par).csv_text()


def test_h_never_holds_without_field():
    res = run_experiment(default_config("hR", 9, a_values=(1.0,), h_values=(0.0,), **TINY))
    assert res.rows[0]["P_H"] == 0.0
