import numpy as np
import pytest

from kljnsync.errors import ConfigError, UnknownParameterError, UnknownSeriesError
from kljnsync.harness import (
    RunReport,
    ScenarioConfig,
    bundled_scenario_names,
    emit_plot_data,
    load_bundled,
    run_scenario,
    sweep,
)
from kljnsync.noise import theoretical_autocorrelation

MINIMAL = {
    "seed": 5,
    "line": {"R_L": 1.0, "R_H": 10.0, "bandwidth_B": 1e4, "noise_scale": 1e-4},
    "protocol": {"kind": "A"},
}


def test_minimal_config_gets_defaults():
    cfg = ScenarioConfig.from_dict(MINIMAL)
    doc = cfg.canonical_dict()
    assert doc["clock"] == {"t0": 0.0, "quantization": 1e-6}
    assert doc["channel"] == {"tau": 2e-3, "processing_delay": 1e-3}
    assert doc["line"]["R_wire"] == 0.01
    assert doc["protocol"]["k_range"] == [0]
    assert doc["key_bits"] == 8192


def test_unknown_keys_fail_closed():
    bad = dict(MINIMAL, typo=1)
    with pytest.raises(ConfigError, match="typo"):
        ScenarioConfig.from_dict(bad)
    bad = dict(MINIMAL, line=dict(MINIMAL["line"], R_wier=0.1))
    with pytest.raises(ConfigError, match="line.R_wier"):
        ScenarioConfig.from_dict(bad)
    bad = dict(MINIMAL, attacks=[{"kind": "AsymDelay", "leg": "BtoA", "del": 1}])
    with pytest.raises(ConfigError, match="attacks.0.del"):
        ScenarioConfig.from_dict(bad)


def test_validation_collects_multiple_problems():
    bad = {"seed": "x", "line": {}, "protocol": {"kind": "Z"}}
    with pytest.raises(ConfigError) as err:
        ScenarioConfig.from_dict(bad)
    assert len(err.value.problems) >= 3


def test_value_level_problems_surface():
    bad = dict(MINIMAL, line={"R_L": 10.0, "R_H": 1.0, "bandwidth_B": 1e4, "noise_scale": 1e-4})
    with pytest.raises(ConfigError, match="R_H"):
        ScenarioConfig.from_dict(bad)


def test_invalid_json_reported():
    with pytest.raises(ConfigError, match="JSON"):
        ScenarioConfig.from_json("{not json")


def test_bundled_scenarios_enumerate_and_load():
    names = bundled_scenario_names()
    assert "honest_protocol_a" in names and "linemod_attack_c" in names
    for name in names:
        load_bundled(name)  # validates every shipped file
    with pytest.raises(ConfigError, match="no bundled scenario"):
        load_bundled("nonexistent")


def test_run_honest_protocol_a_recovers_configured_offset():
    report = run_scenario(load_bundled("honest_protocol_a"))
    cfg = report.config
    assert report.result["t0_est"] == pytest.approx(cfg["clock"]["t0"], abs=1e-9)
    assert report.result["tau_est"] == pytest.approx(cfg["channel"]["tau"], abs=1e-9)
    assert report.result["attack_flag"] is False
    assert report.config["protocol"]["kind"] == "A"


def test_run_delay_attack_b_documents_the_weakness():
    report = run_scenario(load_bundled("delay_attack_b"))
    cfg = report.config
    delta = cfg["attacks"][0]["delta"]
    assert report.result["attack_flag"] is False  # B cannot see pure delay
    assert report.result["tau_est"] == pytest.approx(cfg["channel"]["tau"] + delta / 2, abs=1e-9)


def test_report_is_self_describing_and_round_trips():
    report = run_scenario(load_bundled("honest_protocol_c"))
    text = report.canonical_json()
    back = RunReport.from_json(text)
    assert back.canonical_json() == text
    rebuilt = ScenarioConfig.from_dict(back.config)  # embedded config is valid
    assert rebuilt.seed == report.config["seed"]


def test_repeated_runs_are_byte_identical():
    cfg = load_bundled("honest_combined")
    assert run_scenario(cfg).canonical_json() == run_scenario(cfg).canonical_json()


def test_sweep_delay_column():
    cfg = load_bundled("delay_attack_a")
    values = [0.0, 1e-3, 2e-3, 4e-3]
    reports = sweep(cfg, "attacks.0.delta", values)
    t0 = cfg.canonical_dict()["clock"]["t0"]
    for value, report in zip(values, reports):
        assert report.result["t0_est"] == pytest.approx(t0 - value / 2, abs=1e-9)


def test_sweep_empty_values_and_seed_policy():
    cfg = load_bundled("honest_protocol_a")
    assert sweep(cfg, "channel.tau", []) == []
    reports = sweep(cfg, "channel.tau", [1e-3, 1e-3], seed_policy="per-value")
    assert reports[0].config["seed"] != reports[1].config["seed"]


def test_sweep_unknown_or_non_numeric_parameter():
    cfg = load_bundled("honest_protocol_a")
    with pytest.raises(UnknownParameterError):
        sweep(cfg, "channel.bogus", [1.0])
    with pytest.raises(UnknownParameterError):
        sweep(cfg, "protocol.kind", [1.0])
    with pytest.raises(UnknownParameterError):
        sweep(cfg, "attacks.5.delta", [1.0])


def test_emit_plot_data_formats_and_unknown_series():
    report = run_scenario(load_bundled("honest_protocol_c"))
    text = emit_plot_data(report, "residual_curve")
    rows = [line.split() for line in text.splitlines()]
    assert all(len(r) == 2 for r in rows)
    floats = [(float(a), float(b)) for a, b in rows]
    assert len(floats) == 201
    with pytest.raises(UnknownSeriesError):
        emit_plot_data(report, "spectrogram")
    # protocol A runs have no residual curve
    report_a = run_scenario(load_bundled("honest_protocol_a"))
    with pytest.raises(UnknownSeriesError):
        emit_plot_data(report_a, "residual_curve")


def test_residual_series_minimum_sits_at_negative_offset():
    report = run_scenario(load_bundled("honest_protocol_c"))
    curve = np.asarray(report.series["residual_curve"])
    t0 = report.config["clock"]["t0"]
    fs = report.config["line"]["sample_rate"]
    assert curve[np.argmin(curve[:, 1]), 0] == pytest.approx(-t0, abs=0.5 / fs)


def test_autocorrelation_series_tracks_the_sinc_kernel():
    report = run_scenario(load_bundled("honest_protocol_c"))
    ac = np.asarray(report.series["autocorrelation"])
    B = report.config["line"]["bandwidth_B"]
    level = ac[0, 1]
    # one BEP is only 100/B long, so the statistical band is level/10 per lag
    band = 5.0 * level / 10.0
    theory = theoretical_autocorrelation(B, level / B, ac[:, 0])
    assert np.max(np.abs(ac[:, 1] - theory)) < band


def test_msq_histogram_series_counts_beps():
    report = run_scenario(load_bundled("replay_attack_c"))
    hist = np.asarray(report.series["msq_histogram"])
    assert int(hist[:, 1].sum()) == len(report.config["protocol"]["k_range"])


def test_sweep_offset_across_sample_grid_recovers_everywhere():
    cfg = load_bundled("honest_protocol_c")
    fs = cfg.canonical_dict()["line"]["sample_rate"]
    values = [m / fs for m in (-20, -7, 0, 13, 20)]
    for value, report in zip(values, sweep(cfg, "clock.t0", values)):
        assert report.result["attack_flag"] is False
        assert abs(report.result["t0_est"] - value) <= 1.0 / fs


def test_config_value_bounds_checked():
    bad = dict(MINIMAL, channel={"tau": -1.0})
    with pytest.raises(ConfigError, match="channel.tau"):
        ScenarioConfig.from_dict(bad)
    bad = dict(MINIMAL, clock={"quantization": -2.0})
    with pytest.raises(ConfigError, match="quantization"):
        ScenarioConfig.from_dict(bad)
