import csv
import io
import json

import pytest

from slscreen import ConfigError, InvalidDataset, SweepConfig, aggregate, run_sweep, write_outputs
from slscreen import bench
from slscreen.bench import (
    TABLE_COLUMNS,
    SafetyTripwire,
    format_table,
    instance_seed,
    records_from_json,
    records_json,
    rows_to_csv,
)

TINY = dict(n=12, k=2, s=10.0, m=[15, 30], gamma=[1.0, 1.8], mu=[0.01], replications=2, seed=3)


def test_config_validation():
    with pytest.raises(ConfigError):
        SweepConfig(m=[])
    with pytest.raises(ConfigError):
        SweepConfig(problem="reg", mu=[])
    with pytest.raises(ConfigError):
        SweepConfig(replications=0)
    with pytest.raises(ConfigError):
        SweepConfig(problem="lasso")
    with pytest.raises(ConfigError):
        SweepConfig(problem="card", k_over_n=[])
    # CARD ignores the mu grid
    SweepConfig(problem="card", mu=[])


def test_config_from_json(tmp_path):
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"problem": "card", "m": [20], "gamma": [1.0], "k": 3, "n": 20, "k_over_n": [0.1, 0.3]}))
    cfg = SweepConfig.from_json(p)
    cells = cfg.cells()
    assert [c["n"] for c in cells] == [30, 10]
    p.write_text(json.dumps({"bogus": 1}))
    with pytest.raises(ConfigError):
        SweepConfig.from_json(p)


def test_cell_order_mirrors_tables():
    cfg = SweepConfig(n=60, k=8, m=[30, 60, 120], gamma=[1, 1.5, 1.8], mu=[5e-4, 1e-3])
    cells = cfg.cells()
    assert len(cells) == 18
    assert [(c["mu"], c["m"], c["gamma"]) for c in cells[:4]] == [
        (5e-4, 30, 1.0), (5e-4, 30, 1.5), (5e-4, 30, 1.8), (5e-4, 60, 1.0)]


def test_instance_seeds_are_distinct_and_stable():
    seeds = {instance_seed(0, 100, m, r) for m in (50, 100) for r in range(10)}
    assert len(seeds) == 20
    assert instance_seed(7, 10, 20, 3) == instance_seed(7, 10, 20, 3)
    assert instance_seed(7, 10, 20, 3) != instance_seed(8, 10, 20, 3)


@pytest.fixture(scope="module")
def tiny_run():
    cfg = SweepConfig(**TINY)
    return cfg, run_sweep(cfg, workers=1)


def test_records(tiny_run):
    cfg, recs = tiny_run
    assert len(recs) == len(cfg.cells()) * cfg.replications
    for r in recs:
        assert r.error is None and r.both_finished
        assert r.eta_relax_bigm <= r.eta_relax_perspective + 1e-7
        assert r.eta_relax_perspective <= r.eta_mip + 1e-7
        assert r.objective_screened == pytest.approx(r.eta_mip, abs=1e-6)
        assert r.speedup == pytest.approx(r.time_unscreened / r.time_screened)


def test_csv_reproducible_from_json(tiny_run):
    cfg, recs = tiny_run
    back = records_from_json(records_json(cfg, recs))
    assert rows_to_csv(aggregate(cfg, back), TABLE_COLUMNS) == rows_to_csv(aggregate(cfg, recs), TABLE_COLUMNS)
    rows = list(csv.DictReader(io.StringIO(rows_to_csv(aggregate(cfg, recs), TABLE_COLUMNS))))
    first = [r for r in recs if r.cell == 0]
    assert float(rows[0]["percent_screened"]) == pytest.approx(sum(r.percent_screened for r in first) / len(first))
    assert rows[0]["k_over_n"] == "-"


def test_outputs_deterministic_across_workers(tmp_path, tiny_run):
    cfg, recs = tiny_run
    a = write_outputs(cfg, recs, tmp_path / "a")
    b = write_outputs(cfg, run_sweep(cfg, workers=2), tmp_path / "b")
    assert a["table"].read_bytes() == b["table"].read_bytes()
    assert a["records"].read_bytes() == b["records"].read_bytes()
    doc = json.loads(a["records"].read_text())
    assert doc["schema_version"] == bench.SCHEMA_VERSION
    assert b"\r\n" in a["table"].read_bytes()


def test_unfinished_cells_are_dashed():
    cfg = SweepConfig(**{**TINY, "time_limit": 1e-12, "m": [15], "gamma": [1.0]})
    recs = run_sweep(cfg, workers=1)
    assert all(not r.both_finished and r.speedup is None for r in recs)
    text = rows_to_csv(aggregate(cfg, recs), TABLE_COLUMNS)
    row = list(csv.DictReader(io.StringIO(text)))[0]
    assert row["gap_perspective"] == "-" and row["nodes_screened"] == "-"
    assert row["percent_screened"] != "-"


def test_failures_are_recorded_not_raised(monkeypatch):
    def boom(cfg):
        raise InvalidDataset("synthetic failure")

    monkeypatch.setattr(bench, "gen_synthetic", boom)
    cfg = SweepConfig(**{**TINY, "replications": 1})
    recs = run_sweep(cfg, workers=1)
    assert all(r.status_unscreened == "failed" and "synthetic failure" in r.error for r in recs)
    rows = aggregate(cfg, recs)
    assert all(r["percent_screened"] is None for r in rows)
    json.loads(records_json(cfg, recs))


def test_safety_tripwire(monkeypatch):
    real = bench.solve_screened

    def skewed(d, spec, cfg):
        sol = real(d, spec, cfg)
        sol.objective += 1e-3
        return sol

    monkeypatch.setattr(bench, "solve_screened", skewed)
    with pytest.raises(SafetyTripwire) as exc:
        run_sweep(SweepConfig(**{**TINY, "replications": 1}), workers=1)
    payload = json.loads(str(exc.value))
    assert {"cell", "seed", "objective_screened", "objective_unscreened"} <= set(payload)


def test_card_sweep_and_table(tiny_run):
    cfg = SweepConfig(problem="card", n=12, k=2, s=10.0, m=[20], gamma=[1.0, 1.5], replications=1)
    recs = run_sweep(cfg, workers=1)
    assert all(r.k_over_n == pytest.approx(2 / 12) and r.mu is None for r in recs)
    text = format_table(cfg, aggregate(cfg, recs), "percent_screened")
    assert len(text.splitlines()) == 3


def test_reg_table_layout():
    cfg = SweepConfig(n=60, k=8, m=[30, 60, 120], gamma=[1, 1.5, 1.8], mu=[5e-4, 1e-3])
    rows = [{**c, "runs": 0, "finished": 0, "percent_screened": None} for c in cfg.cells()]
    lines = format_table(cfg, rows, "percent_screened").splitlines()
    assert len(lines) == 2 + 6
    assert all(len(l.split()) == 5 for l in lines[2:])
