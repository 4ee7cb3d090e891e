"""Command-line behavior: exit codes, files, determinism, verification."""

from __future__ import annotations

from pathlib import Path

import pytest
from click.testing import CliRunner

from bandwidth_engine.cli import main
from bandwidth_engine.fixtures import (
    day_forecast_rows,
    reference_full_network,
    write_forecast_csv,
)
from bandwidth_engine.grid_model import ForecastSeries, Season, TimestepForecast

GOLDENS = Path(__file__).resolve().parent / "goldens"


@pytest.fixture(scope="module")
def forecast_paths(zone_path, tmp_path_factory):
    from bandwidth_engine.fixtures import reference_zone

    zone = reference_zone()
    d = tmp_path_factory.mktemp("forecasts")
    paths = {}
    for kind in ("summer_day", "winter_day"):
        p = d / f"{kind}.csv"
        write_forecast_csv(zone, day_forecast_rows(zone, kind), p)
        paths[kind] = p
    return paths


def _run(*args):
    return CliRunner().invoke(main, [str(a) for a in args])


def test_compute_writes_reports(zone_path, forecast_paths, tmp_path):
    out = tmp_path / "run"
    res = _run("compute", "--zone", zone_path, "--forecast", forecast_paths["winter_day"], "--out", out)
    assert res.exit_code == 0, res.output
    for name in ("power_bandwidth.csv", "energy_bandwidth.csv", "merged_report.csv", "manifest.json"):
        assert (out / name).exists()
    assert (out / "power_bandwidth.csv").read_text() == (GOLDENS / "winter_day_power.csv").read_text()
    assert (out / "energy_bandwidth.csv").read_text() == (GOLDENS / "winter_day_energy.csv").read_text()
    manifest = (out / "manifest.json").read_text()
    assert "sha256" in manifest and "weights" in manifest


def test_compute_summer_matches_golden(zone_path, forecast_paths, tmp_path):
    out = tmp_path / "run"
    res = _run("compute", "--zone", zone_path, "--forecast", forecast_paths["summer_day"], "--out", out)
    assert res.exit_code == 0, res.output
    assert (out / "power_bandwidth.csv").read_text() == (GOLDENS / "summer_day_power.csv").read_text()


def test_compute_is_deterministic(zone_path, forecast_paths, tmp_path):
    outs = []
    for i in (1, 2):
        out = tmp_path / f"run{i}"
        res = _run("compute", "--zone", zone_path, "--forecast", forecast_paths["winter_day"], "--out", out)
        assert res.exit_code == 0
        outs.append(out)
    for name in ("power_bandwidth.csv", "energy_bandwidth.csv", "merged_report.csv"):
        assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()


def test_compute_missing_input_exits_1(tmp_path):
    res = _run("compute", "--zone", tmp_path / "nope.json", "--forecast", tmp_path / "nope.csv", "--out", tmp_path / "o")
    assert res.exit_code == 1
    assert "error" in res.output


def test_compute_empty_forecast_exits_1(zone_path, tmp_path):
    fc = tmp_path / "empty.csv"
    fc.write_text("")
    res = _run("compute", "--zone", zone_path, "--forecast", fc, "--out", tmp_path / "o")
    assert res.exit_code == 1


def test_compute_infeasible_exits_2(zone_path, tmp_path):
    from bandwidth_engine.fixtures import reference_zone

    zone = reference_zone()
    full = reference_full_network()
    injections = {"alpha": 0.0, "beta": 0.0, "gamma": 0.0, "delta": 0.0, "west": 1400.0}
    base = full.flows(injections)
    out_flows = full.without("gamma-delta").flows(injections)
    row = TimestepForecast(
        index=0,
        timestamp="t0",
        season=Season.SUMMER,
        injections_mw={b: 0.0 for b in zone.bus_ids()},
        curtailable_max_mw={b: 0.0 for b in zone.bus_ids()},
        ref_normal_mw={"alpha-west": base["alpha-west"], "delta-east": base["delta-east"]},
        ref_contingency_mw={
            "gamma-delta-outage": {
                "alpha-west": out_flows["alpha-west"],
                "delta-east": out_flows["delta-east"],
            }
        },
    )
    fc = tmp_path / "hot.csv"
    write_forecast_csv(zone, ForecastSeries((row,)), fc)
    out = tmp_path / "o"
    res = _run("compute", "--zone", zone_path, "--forecast", fc, "--out", out)
    assert res.exit_code == 2
    # power CSV still written, with the infeasible class recorded
    text = (out / "power_bandwidth.csv").read_text()
    assert "infeasible" in text
    assert not (out / "energy_bandwidth.csv").exists()


def test_config_file_with_flag_overrides(zone_path, forecast_paths, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(
        '{"zone": "%s", "forecast": "%s", "out": "%s", "horizon": 2}\n'
        % (zone_path, forecast_paths["winter_day"], tmp_path / "base_out")
    )
    out = tmp_path / "override_out"
    res = _run("compute", "--config", cfg, "--out", out, "--horizon", 3)
    assert res.exit_code == 0
    assert len((out / "power_bandwidth.csv").read_text().splitlines()) == 4  # header + 3


def test_stats_command(zone_path, forecast_paths):
    res = _run("stats", "--zone", zone_path, "--forecast", forecast_paths["winter_day"], "--json")
    assert res.exit_code == 0, res.output
    assert '"winter"' in res.output
    assert '"fraction_congestion"' in res.output


def test_stats_from_prior_run(zone_path, forecast_paths, tmp_path):
    out = tmp_path / "run"
    assert _run("compute", "--zone", zone_path, "--forecast", forecast_paths["winter_day"], "--out", out).exit_code == 0
    res = _run("stats", "--results", out)
    assert res.exit_code == 0, res.output
    assert "winter" in res.output and "fully available" in res.output


def test_verify_fixture_timesteps(zone_path, forecast_paths):
    res = _run(
        "verify", "--zone", zone_path, "--forecast", forecast_paths["summer_day"],
        "--timestep", 7, "--timestep", 11,
        "--power-resolution", 0.05, "--curtailment-resolution", 0.5,
    )
    assert res.exit_code == 0, res.output
    assert "0 disagreement(s)" in res.output


def test_verify_seed_sweep():
    res = _run("verify", "--seeds", 8)
    assert res.exit_code == 0, res.output
    assert "8 seeds, 0 disagreement(s)" in res.output


def test_verify_golden_match_and_corruption(zone_path, forecast_paths, tmp_path):
    res = _run("verify", "--zone", zone_path, "--forecast", forecast_paths["winter_day"],
               "--golden", GOLDENS / "winter_day_power.csv")
    assert res.exit_code == 0, res.output

    corrupted = tmp_path / "corrupted.csv"
    text = (GOLDENS / "winter_day_power.csv").read_text()
    corrupted.write_text(text.replace("9.000000", "8.500000"))
    res = _run("verify", "--zone", zone_path, "--forecast", forecast_paths["winter_day"],
               "--golden", corrupted)
    assert res.exit_code == 3
    assert "DIFFERS" in res.output


def test_export_lp(zone_path, forecast_paths, tmp_path):
    out = tmp_path / "problem.lp"
    res = _run("export-lp", "--zone", zone_path, "--forecast", forecast_paths["summer_day"],
               "--timestep", 7, "--direction", "lower", "--out", out)
    assert res.exit_code == 0, res.output
    text = out.read_text()
    assert "Minimize" in text and "batt" in text and "rating_hi" in text


def test_export_lp_bad_timestep_exits_1(zone_path, forecast_paths):
    res = _run("export-lp", "--zone", zone_path, "--forecast", forecast_paths["summer_day"], "--timestep", 99)
    assert res.exit_code == 1
