"""Eve's strategies, installed as channel hooks or line mutations.

Four behaviors are modeled. A passive Eve only listens: she can classify a
BEP as mixed but the two mixed arrangements look identical to her, so her
best move is a coin flip. A substituting Eve rewrites message fields or
file samples in flight (she can also drop envelopes outright). A delaying
Eve adds a constant to one channel direction, which biases two-way time
transfer by half the added delay without touching any content. A
line-modifying Eve changes the channel itself - the wire resistance during
a record, or the propagation delay - which leaves authentication intact but
breaks either the wire-model residual or the delay monitoring.

Hooks run synchronously inside the scheduler and every action they take is
recorded in the event log.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace as dc_replace
from typing import Optional

import numpy as np

from .auth import AuthTag
from .channel import Direction, Envelope, Scheduler
from .errors import ConfigError, ConflictingAttackError, InconsistentStateError
from .line import BepMeasurement, BitState, LineConfig, Party, classify_bep
from .noise import NoiseTrace, derive_seed
from .protocols import FileTransfer, SyncMessage, bep_start_time
from .scenario import Scenario


class AttackKind(enum.Enum):
    PASSIVE = "Passive"
    SUBSTITUTE = "Substitute"
    ASYM_DELAY = "AsymDelay"
    LINE_MOD = "LineMod"


@dataclass(frozen=True)
class AttackSpec:
    kind: AttackKind
    params: dict = field(default_factory=dict)


def passive() -> AttackSpec:
    return AttackSpec(AttackKind.PASSIVE)


def asym_delay(leg: str, delta: float) -> AttackSpec:
    """Add delta seconds to one leg: leg is 'AtoB' or 'BtoA'."""
    if delta < 0:
        raise ConfigError("delta: must be >= 0")
    Direction(leg)  # validates
    return AttackSpec(AttackKind.ASYM_DELAY, {"leg": leg, "delta": delta})


def substitute_message(
    target: str,
    field_name: Optional[str] = None,
    value: Optional[float] = None,
    delta: Optional[float] = None,
    fabricate_tag: bool = False,
    drop: bool = False,
) -> AttackSpec:
    """Rewrite (or remove) a protocol message in flight.

    target names the message kind ('TimeStamp', 'Response', 'Share').
    Either a replacement value or an additive delta applies to field_name;
    the original tag rides along unless fabricate_tag asks for a random one.
    """
    if not drop and field_name is None:
        raise ConfigError("substitute_message: need a field_name unless dropping")
    return AttackSpec(
        AttackKind.SUBSTITUTE,
        {
            "target": target,
            "field": field_name,
            "value": value,
            "delta": delta,
            "fabricate_tag": fabricate_tag,
            "drop": drop,
        },
    )


def substitute_file(
    mode: str = "alter_sample",
    sample_index: int = 0,
    delta: float = 0.0,
    direction: str = "AtoB",
    fabricate_tag: bool = False,
) -> AttackSpec:
    """Tamper with a measurement file in flight.

    mode 'alter_sample' perturbs one voltage sample by delta; mode 'replay'
    swaps in the previous file seen on that direction (with its genuine old
    tag); mode 'drop' removes the transfer.
    """
    if mode not in ("alter_sample", "replay", "drop"):
        raise ConfigError("substitute_file: unknown mode")
    Direction(direction)
    return AttackSpec(
        AttackKind.SUBSTITUTE,
        {
            "target": "file",
            "mode": mode,
            "sample_index": sample_index,
            "delta": delta,
            "direction": direction,
            "fabricate_tag": fabricate_tag,
        },
    )


def line_mod(
    r_wire: Optional[float] = None,
    r_wire_factor: Optional[float] = None,
    tau: Optional[float] = None,
    at_time: Optional[float] = None,
    at_bep: Optional[int] = None,
    fraction: float = 0.5,
) -> AttackSpec:
    """Change the line itself at a chosen instant.

    Exactly one of r_wire / r_wire_factor / tau selects what changes. The
    activation instant is at_time, or (at_bep, fraction) relative to that
    BEP's record window.
    """
    chosen = [x is not None for x in (r_wire, r_wire_factor, tau)]
    if sum(chosen) != 1:
        raise ConfigError("line_mod: choose exactly one of r_wire, r_wire_factor, tau")
    if at_time is None and at_bep is None:
        raise ConfigError("line_mod: need at_time or at_bep")
    return AttackSpec(
        AttackKind.LINE_MOD,
        {
            "r_wire": r_wire,
            "r_wire_factor": r_wire_factor,
            "tau": tau,
            "at_time": at_time,
            "at_bep": at_bep,
            "fraction": fraction,
        },
    )


# ---------------------------------------------------------------------------
# hook construction
# ---------------------------------------------------------------------------


def _asym_delay_hook(leg: Direction, delta: float):
    def hook(env: Envelope, sched: Scheduler):
        if env.direction is leg:
            env.deliver_absolute += delta
        return env

    return hook


def _substitute_message_hook(params: dict, rng: np.random.Generator):
    target = params["target"]

    def hook(env: Envelope, sched: Scheduler):
        msg = env.payload
        if not isinstance(msg, SyncMessage) or msg.kind.value != target:
            return env
        if params["drop"]:
            return None
        fname = params["field"]
        if params["value"] is not None:
            new_value = params["value"]
        else:
            new_value = getattr(msg, fname) + (params["delta"] or 0.0)
        forged = dc_replace(msg, **{fname: new_value})
        if params["fabricate_tag"] and msg.tag is not None:
            forged = dc_replace(forged, tag=AuthTag(rng.bytes(32), msg.tag.span))
        env.payload = forged
        return env

    return hook


def _substitute_file_hook(params: dict, rng: np.random.Generator):
    direction = Direction(params["direction"])
    memory: list[FileTransfer] = []

    def hook(env: Envelope, sched: Scheduler):
        transfer = env.payload
        if not isinstance(transfer, FileTransfer) or env.direction is not direction:
            return env
        mode = params["mode"]
        if mode == "drop":
            return None
        if mode == "replay":
            if memory:
                stale = memory[0]
                env.payload = stale
            else:
                memory.append(transfer)  # first transfer passes, gets remembered
            return env
        # alter_sample
        volts = transfer.file.voltage_samples.copy()
        idx = int(params["sample_index"]) % len(volts)
        volts[idx] += params["delta"] if params["delta"] else 1.0 + abs(volts[idx])
        forged_file = dc_replace(transfer.file, voltage_samples=volts)
        tag = transfer.tag
        if params["fabricate_tag"]:
            tag = AuthTag(rng.bytes(len(tag.ciphertext)), tag.span)
        env.payload = FileTransfer(forged_file, tag)
        return env

    return hook


def _tau_mod_hook(new_tau: float, at_time: float):
    def hook(env: Envelope, sched: Scheduler):
        if env.sent_absolute >= at_time:
            env.deliver_absolute = env.sent_absolute + new_tau
        return env

    return hook


def install(attacks, scenario: Scenario) -> Scenario:
    """Install one AttackSpec (or a list, applied in order) into a scenario.

    Substitutions and delays become channel hooks; wire-resistance changes
    append to the scenario's line-modification schedule; a passive Eve just
    gets a notebook. Two wire modifications at the same instant conflict.
    """
    if isinstance(attacks, AttackSpec):
        attacks = [attacks]
    for n, attack in enumerate(attacks):
        rng = np.random.default_rng(derive_seed(scenario.seed, 0xE5E, n))
        if attack.kind is AttackKind.PASSIVE:
            if scenario.passive_log is None:
                scenario.passive_log = []
        elif attack.kind is AttackKind.ASYM_DELAY:
            leg = Direction(attack.params["leg"])
            scenario.channel.hooks.append(_asym_delay_hook(leg, attack.params["delta"]))
        elif attack.kind is AttackKind.SUBSTITUTE:
            if attack.params.get("target") == "file":
                scenario.channel.hooks.append(_substitute_file_hook(attack.params, rng))
            else:
                scenario.channel.hooks.append(_substitute_message_hook(attack.params, rng))
        elif attack.kind is AttackKind.LINE_MOD:
            p = attack.params
            at = p["at_time"]
            if at is None:
                at = bep_start_time(scenario, p["at_bep"]) + p["fraction"] * scenario.line.bep_duration
            if p["tau"] is not None:
                scenario.channel.hooks.append(_tau_mod_hook(p["tau"], at))
                scenario.scheduler.record(at, "attack-linemod-tau", "-", None)
            else:
                new_r = p["r_wire"] if p["r_wire"] is not None else scenario.line.R_wire * p["r_wire_factor"]
                if any(t == at for t, _ in scenario.r_wire_schedule):
                    raise ConflictingAttackError(f"two line modifications at t={at}")
                scenario.r_wire_schedule.append((at, new_r))
                scenario.scheduler.record(at, "attack-linemod-rwire", "-", None)
    return scenario


def passive_bit_guess(
    voltage_trace: NoiseTrace,
    current_trace: NoiseTrace,
    config: LineConfig,
    seed: int,
) -> int:
    """Eve's best channel-only guess at the key bit of a mixed BEP.

    She can confirm the BEP is mixed from the mean-square level, but the
    two mixed arrangements produce identical statistics, so the guess is a
    seeded coin flip. Raises InconsistentStateError when the measurement
    does not classify as mixed.
    """
    meas = BepMeasurement(
        party=Party.ALICE,  # Eve taps the wire; with a short line all points look alike
        bep_index=0,
        local_start_time=0.0,
        voltage_trace=voltage_trace,
        current_trace=current_trace,
        msq_voltage=voltage_trace.mean_square(),
        msq_current=current_trace.mean_square(),
    )
    state = classify_bep(meas, config)
    if state is not BitState.MIXED:
        raise InconsistentStateError(f"passive guessing requires a mixed BEP, got {state.value}")
    rng = np.random.default_rng(derive_seed(seed, 0xEFE))
    return int(rng.integers(2))
