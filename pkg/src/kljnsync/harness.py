"""Scenario configuration files, batch execution, and reporting.

A scenario config is a JSON document that, together with its seed, fully
determines a run. Validation fails closed: unknown keys anywhere are
errors, because a silently ignored key in an attack scenario would test
the wrong thing. Reports embed the config that produced them, carry the
plot-ready series, and serialize canonically so identical runs produce
byte-identical files.
"""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from .adversaries import (
    AttackSpec,
    asym_delay,
    install,
    line_mod,
    passive,
    substitute_file,
    substitute_message,
)
from .channel import format_event_log
from .errors import (
    ConfigError,
    ProtocolIncompleteError,
    UnknownParameterError,
    UnknownSeriesError,
)
from .line import BitState, LineConfig, analytic_levels, classification_thresholds
from .noise import NoiseTrace, empirical_autocorrelation
from .protocols import (
    ProtocolKind,
    SyncResult,
    combined_check,
    protocol_a,
    protocol_b,
    protocol_c,
)
from .scenario import Scenario, make_scenario

# ---------------------------------------------------------------------------
# config schema (fail-closed)
# ---------------------------------------------------------------------------

_LINE_KEYS = {
    "R_L": True,
    "R_H": True,
    "bandwidth_B": True,
    "noise_scale": True,
    "R_wire": False,
    "tau_f": False,
    "bep_duration": False,
    "sample_rate": False,
    "measurement_noise_rel": False,
}
_CLOCK_KEYS = {"t0": False, "quantization": False}
_CHANNEL_KEYS = {"tau": False, "processing_delay": False}
_PROTOCOL_KEYS = {
    "kind": True,
    "dt_window": False,
    "residual_threshold": False,
    "k_range": False,
    "input": False,
    "t0_tol_quanta": False,
    "tau_tol_quanta": False,
}
_ATTACK_KEYS = {
    "Passive": set(),
    "AsymDelay": {"leg", "delta"},
    "Substitute": {
        "target", "field", "value", "delta", "fabricate_tag", "drop",
        "mode", "sample_index", "direction",
    },
    "LineMod": {"r_wire", "r_wire_factor", "tau", "at_time", "at_bep", "fraction"},
}
_TOP_KEYS = {"seed": True, "line": True, "protocol": True, "clock": False, "channel": False, "attacks": False, "key_bits": False}


def _check_keys(section: str, given: dict, allowed: dict, problems: list[str]) -> None:
    for key in given:
        if key not in allowed:
            problems.append(f"{section}.{key}: unknown key")
    for key, required in allowed.items():
        if required and key not in given:
            problems.append(f"{section}.{key}: required")


@dataclass(frozen=True)
class ScenarioConfig:
    """Validated form of a scenario config document."""

    raw: dict

    @classmethod
    def from_dict(cls, doc: dict) -> "ScenarioConfig":
        if not isinstance(doc, dict):
            raise ConfigError("config: expected an object")
        problems: list[str] = []
        _check_keys("", doc, _TOP_KEYS, problems)
        # strip the section-less prefix dots
        problems = [p.lstrip(".") for p in problems]

        if "seed" in doc and not isinstance(doc["seed"], int):
            problems.append("seed: must be an integer")
        if "key_bits" in doc and (not isinstance(doc["key_bits"], int) or doc["key_bits"] < 0):
            problems.append("key_bits: must be a non-negative integer")

        _check_keys("line", doc.get("line", {}), _LINE_KEYS, problems)
        _check_keys("clock", doc.get("clock", {}), _CLOCK_KEYS, problems)
        _check_keys("channel", doc.get("channel", {}), _CHANNEL_KEYS, problems)
        _check_keys("protocol", doc.get("protocol", {}), _PROTOCOL_KEYS, problems)

        proto = doc.get("protocol", {})
        if "kind" in proto:
            try:
                ProtocolKind(proto["kind"])
            except ValueError:
                problems.append(f"protocol.kind: must be one of A, B, C, Combined")
        if "k_range" in proto:
            ks = proto["k_range"]
            if not isinstance(ks, list) or not ks or not all(isinstance(k, int) for k in ks):
                problems.append("protocol.k_range: must be a non-empty list of integers")
        if "input" in proto and proto["input"] not in ("voltage", "current"):
            problems.append("protocol.input: must be 'voltage' or 'current'")
        for section, key, low in (
            ("channel", "tau", 0.0),
            ("channel", "processing_delay", 0.0),
            ("protocol", "residual_threshold", 1e-12),
            ("protocol", "dt_window", 1),
            ("protocol", "t0_tol_quanta", 0.0),
            ("protocol", "tau_tol_quanta", 0.0),
        ):
            value = doc.get(section, {}).get(key)
            if value is not None and (not isinstance(value, (int, float)) or value < low):
                problems.append(f"{section}.{key}: must be a number >= {low}")
        quant = doc.get("clock", {}).get("quantization")
        if quant is not None and (not isinstance(quant, (int, float)) or quant < 0):
            problems.append("clock.quantization: must be null or a number >= 0")

        for n, attack in enumerate(doc.get("attacks", [])):
            if not isinstance(attack, dict) or "kind" not in attack:
                problems.append(f"attacks.{n}: needs a kind")
                continue
            kind = attack["kind"]
            if kind not in _ATTACK_KEYS:
                problems.append(f"attacks.{n}.kind: unknown attack {kind!r}")
                continue
            for key in attack:
                if key != "kind" and key not in _ATTACK_KEYS[kind]:
                    problems.append(f"attacks.{n}.{key}: unknown key for {kind}")

        if problems:
            raise ConfigError(problems)
        try:
            cfg = cls(raw=doc)
            cfg.line_config()  # surfaces value-level problems early
        except ConfigError as exc:
            raise ConfigError([f"line.{p}" for p in exc.problems])
        return cfg

    @classmethod
    def from_json(cls, text: str) -> "ScenarioConfig":
        try:
            return cls.from_dict(json.loads(text))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config: invalid JSON ({exc})") from None

    # -- accessors with defaults ------------------------------------------

    @property
    def seed(self) -> int:
        return self.raw["seed"]

    def line_config(self) -> LineConfig:
        return LineConfig(**self.raw["line"])

    @property
    def protocol_kind(self) -> ProtocolKind:
        return ProtocolKind(self.raw["protocol"]["kind"])

    def canonical_dict(self) -> dict:
        """The config with every default made explicit."""
        proto = self.raw.get("protocol", {})
        clock = self.raw.get("clock", {})
        channel = self.raw.get("channel", {})
        line = self.line_config()
        return {
            "seed": self.seed,
            "key_bits": self.raw.get("key_bits", 8192),
            "line": {
                "R_L": line.R_L,
                "R_H": line.R_H,
                "R_wire": line.R_wire,
                "bandwidth_B": line.bandwidth_B,
                "noise_scale": line.noise_scale,
                "tau_f": line.tau_f,
                "bep_duration": line.bep_duration,
                "sample_rate": line.sample_rate,
                "measurement_noise_rel": line.measurement_noise_rel,
            },
            "clock": {
                "t0": clock.get("t0", 0.0),
                "quantization": clock.get("quantization", 1e-6),
            },
            "channel": {
                "tau": channel.get("tau", 2e-3),
                "processing_delay": channel.get("processing_delay", 1e-3),
            },
            "protocol": {
                "kind": proto["kind"],
                "dt_window": proto.get("dt_window", 100),
                "residual_threshold": proto.get("residual_threshold", 0.01),
                "k_range": proto.get("k_range", [0]),
                "input": proto.get("input", "voltage"),
                "t0_tol_quanta": proto.get("t0_tol_quanta", 2.0),
                "tau_tol_quanta": proto.get("tau_tol_quanta", 1.5),
            },
            "attacks": self.raw.get("attacks", []),
        }

    def build_scenario(self) -> Scenario:
        doc = self.canonical_dict()
        scenario = make_scenario(
            self.line_config(),
            seed=doc["seed"],
            t0=doc["clock"]["t0"],
            tau=doc["channel"]["tau"],
            quantization=doc["clock"]["quantization"],
            processing_delay=doc["channel"]["processing_delay"],
            key_bits=doc["key_bits"],
            dt_window=doc["protocol"]["dt_window"],
            residual_threshold=doc["protocol"]["residual_threshold"],
            k_range=tuple(doc["protocol"]["k_range"]),
            estimate_input=doc["protocol"]["input"],
            t0_tol_quanta=doc["protocol"]["t0_tol_quanta"],
            tau_tol_quanta=doc["protocol"]["tau_tol_quanta"],
        )
        attacks = [attack_from_dict(a) for a in doc["attacks"]]
        if attacks:
            install(attacks, scenario)
        return scenario


def attack_from_dict(doc: dict) -> AttackSpec:
    kind = doc["kind"]
    args = {k: v for k, v in doc.items() if k != "kind"}
    if kind == "Passive":
        return passive()
    if kind == "AsymDelay":
        return asym_delay(**args)
    if kind == "Substitute":
        if args.get("target") == "file":
            args.pop("target")
            return substitute_file(**args)
        field_name = args.pop("field", None)
        return substitute_message(args.pop("target"), field_name, **args)
    if kind == "LineMod":
        return line_mod(**args)
    raise ConfigError(f"attacks.kind: unknown attack {kind!r}")


# ---------------------------------------------------------------------------
# reports
# ---------------------------------------------------------------------------


@dataclass
class RunReport:
    config: dict
    result: dict
    event_log_digest: str
    msq_levels: dict
    key_bits_consumed: int
    series: dict = field(default_factory=dict)
    wall_seconds: float = 0.0  # informational; not part of the canonical form

    def canonical_json(self) -> str:
        body = {
            "config": self.config,
            "result": self.result,
            "event_log_digest": self.event_log_digest,
            "msq_levels": self.msq_levels,
            "key_bits_consumed": self.key_bits_consumed,
            "series": self.series,
        }
        return json.dumps(body, sort_keys=True, indent=1) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "RunReport":
        body = json.loads(text)
        return cls(
            config=body["config"],
            result=body["result"],
            event_log_digest=body["event_log_digest"],
            msq_levels=body["msq_levels"],
            key_bits_consumed=body["key_bits_consumed"],
            series=body.get("series", {}),
        )

    def summary(self) -> str:
        res = self.result
        lines = [
            f"protocol {res['protocol']}: "
            + ("ATTACK FLAGGED" if res["attack_flag"] else "clean"),
        ]
        if res.get("detail"):
            lines.append(f"  detail: {res['detail']}")
        for key in ("t0_est", "tau_est", "residual"):
            if res.get(key) is not None:
                lines.append(f"  {key} = {res[key]:.9g}")
        lines.append(f"  auth_ok = {res['auth_ok']}")
        lines.append(f"  key bits consumed = {self.key_bits_consumed}")
        lines.append(f"  wall time = {self.wall_seconds:.3f} s")
        return "\n".join(lines)


def _result_dict(result: SyncResult) -> dict:
    return {
        "protocol": result.protocol.value,
        "t0_est": None if result.t0_est is None else float(result.t0_est),
        "tau_est": None if result.tau_est is None else float(result.tau_est),
        "residual": None if result.residual is None else float(result.residual),
        "auth_ok": bool(result.auth_ok),
        "attack_flag": bool(result.attack_flag),
        "detail": result.detail,
    }


def _series_from(scenario: Scenario) -> dict:
    series = {}
    diag = scenario.diagnostics
    if "residual_curve" in diag:
        shifts, residuals = diag["residual_curve"]
        series["residual_curve"] = [[float(s), float(r)] for s, r in zip(shifts, residuals)]
    if "first_bep_voltage" in diag:
        trace: NoiseTrace = diag["first_bep_voltage"]
        fs = trace.sample_rate
        max_lag = min(len(trace) - 1, int(round(2.0 * fs / scenario.line.bandwidth_B)))
        ac = empirical_autocorrelation(trace, max_lag)
        series["autocorrelation"] = [[float(l), float(v)] for l, v in ac]
    if "bep_msq" in diag and diag["bep_msq"]:
        values = np.asarray(diag["bep_msq"])
        top = float(analytic_levels(scenario.line)[BitState.HH]) * 1.5
        counts, edges = np.histogram(values, bins=24, range=(0.0, top))
        centers = 0.5 * (edges[:-1] + edges[1:])
        series["msq_histogram"] = [[float(c), int(n)] for c, n in zip(centers, counts)]
    return series


def run_scenario(config: ScenarioConfig) -> RunReport:
    """Execute one configured run and package the deterministic report."""
    start = time.perf_counter()
    scenario = config.build_scenario()
    runner = {
        ProtocolKind.A: protocol_a,
        ProtocolKind.B: protocol_b,
        ProtocolKind.C: protocol_c,
        ProtocolKind.COMBINED: combined_check,
    }[config.protocol_kind]
    try:
        result = runner(scenario)
    except ProtocolIncompleteError as exc:
        # protocol A has no detection: a stalled run is a failure, not a flag
        result = SyncResult(
            config.protocol_kind, None, None, None,
            auth_ok=True, attack_flag=False, detail=f"incomplete: {exc}",
        )

    levels = analytic_levels(scenario.line)
    low, high = classification_thresholds(scenario.line)
    report = RunReport(
        config=config.canonical_dict(),
        result=_result_dict(result),
        event_log_digest=hashlib.sha256(
            format_event_log(scenario.scheduler.log).encode()
        ).hexdigest(),
        msq_levels={
            "LL": float(levels[BitState.LL]),
            "MIXED": float(levels[BitState.MIXED]),
            "HH": float(levels[BitState.HH]),
            "threshold_low": float(low),
            "threshold_high": float(high),
        },
        key_bits_consumed=int(scenario.ledger.consumed),
        series=_series_from(scenario),
        wall_seconds=time.perf_counter() - start,
    )
    return report


# ---------------------------------------------------------------------------
# sweeps and plot emission
# ---------------------------------------------------------------------------


def _resolve_path(doc: dict, path: str):
    """Walk a dotted path through dicts and lists; returns (container, key)."""
    parts = path.split(".")
    node = doc
    for part in parts[:-1]:
        if isinstance(node, list):
            try:
                node = node[int(part)]
            except (ValueError, IndexError):
                raise UnknownParameterError(f"{path}: no element {part!r}") from None
        elif isinstance(node, dict) and part in node:
            node = node[part]
        else:
            raise UnknownParameterError(f"{path}: no section {part!r}")
    last = parts[-1]
    if isinstance(node, list):
        try:
            idx = int(last)
            _ = node[idx]
        except (ValueError, IndexError):
            raise UnknownParameterError(f"{path}: no element {last!r}") from None
        return node, idx
    if not isinstance(node, dict) or last not in node:
        raise UnknownParameterError(f"{path}: no field {last!r}")
    return node, last


def sweep(
    config: ScenarioConfig,
    parameter: str,
    values: list,
    seed_policy: str = "fixed",
) -> list[RunReport]:
    """One run per value of a numeric config field (dotted path).

    seed_policy 'fixed' reuses the config seed; 'per-value' offsets it by
    the value's position so runs draw independent noise.
    """
    if seed_policy not in ("fixed", "per-value"):
        raise ConfigError("seed_policy: must be 'fixed' or 'per-value'")
    base = config.canonical_dict()
    container, key = _resolve_path(base, parameter)
    if not isinstance(container[key], (int, float)) or isinstance(container[key], bool):
        raise UnknownParameterError(f"{parameter}: not a numeric field")

    reports = []
    for i, value in enumerate(values):
        doc = json.loads(json.dumps(base))  # deep copy via the same codec
        node, k = _resolve_path(doc, parameter)
        node[k] = value
        if seed_policy == "per-value":
            doc["seed"] = doc["seed"] + i
        reports.append(run_scenario(ScenarioConfig.from_dict(doc)))
    return reports


def emit_plot_data(report: RunReport, series: str) -> str:
    """Two-column decimal text for external plotting."""
    if series not in report.series:
        raise UnknownSeriesError(
            f"series {series!r} not in report (have: {sorted(report.series) or 'none'})"
        )
    rows = report.series[series]
    return "\n".join(f"{x:.12g} {y:.12g}" for x, y in rows) + "\n"


# ---------------------------------------------------------------------------
# bundled scenarios
# ---------------------------------------------------------------------------


def bundled_scenario_names() -> list[str]:
    root = resources.files("kljnsync") / "scenarios"
    return sorted(p.name[: -len(".json")] for p in root.iterdir() if p.name.endswith(".json"))


def load_bundled(name: str) -> ScenarioConfig:
    root = resources.files("kljnsync") / "scenarios"
    path = root / f"{name}.json"
    try:
        text = path.read_text()
    except FileNotFoundError:
        raise ConfigError(
            f"config: no bundled scenario {name!r} (have: {', '.join(bundled_scenario_names())})"
        ) from None
    return ScenarioConfig.from_json(text)
