import copy
import json
from pathlib import Path

import pytest

from disg.cli import emit_region_plot, parse_config, run
from disg.errors import ConfigError, UnsupportedDimension
from disg.strategy import Region, build_grid, read_regions_csv

BASE = {
    "schema_version": 1,
    "model": {
        "num_states": 2,
        "transition": [[0.8, 0.2], [0.15, 0.85]],
        "channels": [{"type": "bsc", "p": 0.6}, {"type": "bsc", "p": 0.6}],
    },
    "params": {"delta": 0.9, "cost": 0.0225},
    "grid": {"resolution": 60},
    "simulate": {"horizon": 20, "rollouts": 30, "seed": 4, "prior": [0.5, 0.5]},
    "finite_check": {"T": 1},
    "sweep": [
        {"cost": 0.0225, "p1": 0.6, "p2": 0.6},
        {"cost": 0.022, "p1": 0.6, "p2": 0.6},
    ],
}


def write_cfg(tmp_path, cfg, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return str(path)


def stderr_json(capsys):
    return json.loads(capsys.readouterr().err.strip().splitlines()[-1])


def test_validate_ok(tmp_path, capsys):
    assert run(["validate", "--config", write_cfg(tmp_path, BASE)]) == 0
    assert json.loads(capsys.readouterr().out)["ok"]


def test_non_stochastic_row(tmp_path, capsys):
    cfg = copy.deepcopy(BASE)
    cfg["model"]["transition"][0] = [0.8, 0.3]
    assert run(["validate", "--config", write_cfg(tmp_path, cfg)]) == 1
    err = stderr_json(capsys)
    assert err["error"] == "NonStochasticRow"


@pytest.mark.parametrize(
    "mutate",
    [
        lambda c: c.update(extra=1),
        lambda c: c["params"].update(gamma=0.5),
        lambda c: c["model"]["channels"][0].update(q=0.1),
        lambda c: c.update(schema_version=2),
        lambda c: c["sweep"][0].update(delta=0.5),
        lambda c: c["model"]["channels"].__setitem__(0, {"type": "gaussian", "p": 0.6}),
        lambda c: c["params"].update(delta=1.5),
    ],
)
def test_bad_configs_exit_1(tmp_path, capsys, mutate):
    cfg = copy.deepcopy(BASE)
    mutate(cfg)
    assert run(["validate", "--config", write_cfg(tmp_path, cfg)]) == 1
    assert stderr_json(capsys)["error"] == "ConfigError"


def test_bsc_needs_two_states():
    cfg = copy.deepcopy(BASE)
    cfg["model"]["num_states"] = 3
    cfg["model"]["transition"] = [[1, 0, 0], [0, 1, 0], [0, 0, 1]]
    with pytest.raises(ConfigError):
        parse_config(cfg)


def test_explicit_channels():
    cfg = copy.deepcopy(BASE)
    cfg["model"]["channels"] = [[[0.7, 0.3], [0.2, 0.8]], [[0.5, 0.25, 0.25], [0.25, 0.25, 0.5]]]
    parsed = parse_config(cfg)
    assert parsed.model.num_obs(2) == 3


def test_missing_config_file(tmp_path, capsys):
    assert run(["solve", "--config", str(tmp_path / "nope.json")]) == 1
    assert stderr_json(capsys)["error"] == "ConfigError"


def test_solve_round_trip(tmp_path):
    out = tmp_path / "out"
    assert run(["solve", "--config", write_cfg(tmp_path, BASE), "--out", str(out)]) == 0
    region = read_regions_csv((out / "region.csv").read_text())[None]
    report = json.loads((out / "itra.json").read_text())
    assert report["halted_fixed_point"]
    assert sorted(region.members.tolist()) == report["region_members"]
    assert 0 < len(region) < region.grid.size


def test_grid_override(tmp_path):
    out = tmp_path / "out"
    assert run(["solve", "--config", write_cfg(tmp_path, BASE), "--out", str(out), "--grid", "40"]) == 0
    assert read_regions_csv((out / "region.csv").read_text())[None].grid.resolution == 40


def test_not_converged_exit_2(tmp_path):
    cfg = copy.deepcopy(BASE)
    cfg["params"]["max_iterations"] = 2
    assert run(["solve", "--config", write_cfg(tmp_path, cfg), "--out", str(tmp_path / "o")]) == 2
    assert json.loads((tmp_path / "o" / "itra.json").read_text())["tainted"]


def test_bound(tmp_path):
    assert run(["bound", "--config", write_cfg(tmp_path, BASE), "--out", str(tmp_path)]) == 0
    rep = json.loads((tmp_path / "absorbing.json").read_text())
    assert rep["box"][0] == [0.15, 0.8] and rep["is_absorbing"] and rep["is_positive"]


def test_finite_check(tmp_path):
    assert run(["finite-check", "--config", write_cfg(tmp_path, BASE), "--out", str(tmp_path)]) == 0
    assert json.loads((tmp_path / "finite_check.json").read_text())["holds"]


def test_simulate_deterministic_and_seed_override(tmp_path):
    cfg_path = write_cfg(tmp_path, BASE)
    outs = [tmp_path / n for n in ("a", "b", "c")]
    run(["simulate", "--config", cfg_path, "--out", str(outs[0])])
    run(["simulate", "--config", cfg_path, "--out", str(outs[1])])
    run(["simulate", "--config", cfg_path, "--out", str(outs[2]), "--seed", "99"])
    for name in ("trajectory.csv", "value.csv"):
        assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()
    assert (outs[0] / "trajectory.csv").read_bytes() != (outs[2] / "trajectory.csv").read_bytes()


def test_simulate_requires_prior(tmp_path, capsys):
    cfg = copy.deepcopy(BASE)
    del cfg["simulate"]["prior"]
    assert run(["simulate", "--config", write_cfg(tmp_path, cfg), "--out", str(tmp_path)]) == 1


def test_sweep_and_plot(tmp_path):
    out = tmp_path / "sw"
    cfg_path = write_cfg(tmp_path, BASE)
    assert run(["sweep", "--config", cfg_path, "--out", str(out)]) == 0
    regions = read_regions_csv((out / "sweep.csv").read_text())
    first, second = regions["c=0.0225 p1=0.6 p2=0.6"], regions["c=0.022 p1=0.6 p2=0.6"]
    assert first <= second
    svg = (out / "sweep.svg").read_text()
    assert svg.count("<text") >= 2 + 5
    assert run(["plot", "--input", str(out / "sweep.csv"), "--out", str(out)]) == 0
    assert (out / "sweep.svg").read_text() == svg
    again = tmp_path / "sw2"
    run(["sweep", "--config", cfg_path, "--out", str(again)])
    assert (again / "sweep.csv").read_bytes() == (out / "sweep.csv").read_bytes()


def test_plot_three_states_falls_back(tmp_path, capsys):
    g = build_grid(3, 4)
    path = tmp_path / "r.csv"
    path.write_text(Region.full(g).to_csv())
    assert run(["plot", "--input", str(path), "--out", str(tmp_path)]) == 0
    assert stderr_json(capsys)["error"] == "UnsupportedDimension"
    assert not (tmp_path / "r.svg").exists()


class TestPlot:
    def test_empty_band_has_no_cells(self, grid50):
        svg = emit_region_plot([("none", Region.empty(grid50))])
        assert 'fill="#3a6ea5"' not in svg

    def test_full_band_single_cell_spans_axis(self, grid50):
        svg = emit_region_plot([("all", Region.full(grid50))])
        assert svg.count('fill="#3a6ea5"') == 1
        assert 'x="140.00"' in svg and 'width="480.00"' in svg

    def test_labels_escaped_and_deterministic(self, grid50):
        items = [("a<b", Region.band(grid50, 0.2, 0.4)), ("c", Region.full(grid50))]
        assert emit_region_plot(items) == emit_region_plot(items)
        assert "a&lt;b" in emit_region_plot(items)

    def test_three_states_unsupported(self):
        with pytest.raises(UnsupportedDimension):
            emit_region_plot([("x", Region.full(build_grid(3, 3)))])


def reference_cfg():
    cfg = copy.deepcopy(BASE)
    cfg["params"]["cost"] = 0.027
    cfg["grid"]["resolution"] = 200
    cfg["sweep"] = [{"cost": 0.027, "p1": 0.6, "p2": 0.6}, {"cost": 0.024, "p1": 0.6, "p2": 0.6}]
    return cfg


@pytest.mark.xfail(strict=True, reason="max reception gain 0.0279 bits is below c/delta = 0.03 at c=0.027")
def test_solve_reference_config_strict_subset(tmp_path):
    assert run(["solve", "--config", write_cfg(tmp_path, reference_cfg()), "--out", str(tmp_path)]) == 0
    region = read_regions_csv((tmp_path / "region.csv").read_text())[None]
    assert 0 < len(region) < region.grid.size


def test_sweep_reference_costs_nested(tmp_path):
    assert run(["sweep", "--config", write_cfg(tmp_path, reference_cfg()), "--out", str(tmp_path)]) == 0
    regions = list(read_regions_csv((tmp_path / "sweep.csv").read_text()).values())
    assert regions[0] <= regions[1]
