"""The three clock-synchronization protocols.

Protocol A is the bare two-way timestamp exchange: Alice announces her time,
Bob reports when he saw it and when he replied, Alice shares her arrival
time, and the two unknowns (Bob's offset and the propagation delay) fall out
of the two one-way equations. It synchronizes perfectly over an honest
channel and is trivially attackable: an asymmetric extra delay d on one leg
biases the recovered offset by d/2 in whichever direction, and nothing
flags.

Protocol B is the same exchange with every message authenticated by an
encrypted hash fingerprint. Substituted content is detected; channel
manipulation that leaves content intact (delays, a changed line) is not.

Protocol C synchronizes during normal bit exchange: both parties record
their terminal voltage and current against their own clocks, swap the
records through authenticated file transfer, and each feeds the other's
record, shifted by a trial offset, into a wire model (Ohm's law with the
known wire resistance). The shift that makes the simulated current match
the measured one is the negative of Bob's clock offset, and any line
tampering during the record shows up as a residual floor no shift can
remove. A combined check follows Protocol C with a random-time Protocol B
probe: the probe's offset should now be zero and its delay estimate should
match the nominal propagation time, which catches the delay games that C
alone cannot see.
"""

from __future__ import annotations

import enum
import struct
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .auth import AuthTag, encrypt_digest, hash_message, verify
from .bepfile import BepFile, build_bep_file
from .channel import Direction, Envelope, Scheduler, quantize
from .errors import (
    ConfigError,
    FlatResidualError,
    InsufficientOverlapError,
    ProtocolIncompleteError,
)
from .line import Party, ResistorChoice, simulate_bep
from .noise import derive_seed
from .scenario import Scenario

# spawn-key namespaces for the per-purpose random streams
_SEED_CHOICE_A = 1
_SEED_CHOICE_B = 2
_SEED_BEP = 3
_SEED_EVE = 4
_SEED_PROBE = 5


class MessageKind(enum.Enum):
    TIME_STAMP = "TimeStamp"
    RESPONSE = "Response"
    SHARE = "Share"


_KIND_FIELDS = {
    MessageKind.TIME_STAMP: ("t1",),
    MessageKind.RESPONSE: ("t1_star", "t2_star"),
    MessageKind.SHARE: ("t2",),
}


@dataclass(frozen=True)
class SyncMessage:
    kind: MessageKind
    t1: Optional[float] = None
    t1_star: Optional[float] = None
    t2_star: Optional[float] = None
    t2: Optional[float] = None
    tag: Optional[AuthTag] = None

    def __post_init__(self):
        required = _KIND_FIELDS[self.kind]
        for name in required:
            if getattr(self, name) is None:
                raise ConfigError(f"{self.kind.value} message requires {name}")

    def canonical_bytes(self) -> bytes:
        """Deterministic encoding of the content (tag excluded): the kind
        name plus each populated field as a tagged big-endian double."""
        parts = [self.kind.value.encode("ascii")]
        for i, name in enumerate(("t1", "t1_star", "t2_star", "t2")):
            value = getattr(self, name)
            if value is not None:
                parts.append(struct.pack(">Bd", i, value))
        return b"|".join(parts)


class ProtocolKind(enum.Enum):
    A = "A"
    B = "B"
    C = "C"
    COMBINED = "Combined"


@dataclass(frozen=True)
class SyncResult:
    """Outcome of one synchronization run.

    attack_flag is true whenever authentication failed, the integrity
    residual exceeded its threshold, or the measured propagation delay
    strayed from nominal; estimates from a flagged run are discarded.
    """

    protocol: ProtocolKind
    t0_est: Optional[float]
    tau_est: Optional[float]
    residual: Optional[float]
    auth_ok: bool
    attack_flag: bool
    detail: str = ""

    def __post_init__(self):
        if not self.auth_ok and not self.attack_flag:
            raise ConfigError("result: failed authentication must raise the attack flag")


@dataclass(frozen=True)
class FileTransfer:
    """A measurement file plus its tag, as carried by one envelope."""

    file: BepFile
    tag: AuthTag

    def canonical_bytes(self) -> bytes:
        return self.file.payload_bytes() + self.tag.to_bytes()


# ---------------------------------------------------------------------------
# Protocols A and B: two-way timestamp exchange
# ---------------------------------------------------------------------------


class _TwoWayRun:
    """State machine for one A/B exchange, driven by the scheduler."""

    def __init__(self, scenario: Scenario, authenticated: bool):
        self.scenario = scenario
        self.authenticated = authenticated
        self.t1: Optional[float] = None
        self.t1_star: Optional[float] = None
        self.t2_star: Optional[float] = None
        self.t2: Optional[float] = None
        self.share_delivered = False
        self.verdicts: list[bool] = []

    def _outgoing(self, msg: SyncMessage) -> SyncMessage:
        if not self.authenticated:
            return msg
        tag = encrypt_digest(hash_message(msg.canonical_bytes()), self.scenario.ledger)
        return replace(msg, tag=tag)

    def _check(self, msg: SyncMessage) -> None:
        if not self.authenticated:
            return
        if msg.tag is None:
            self.verdicts.append(False)
            return
        self.verdicts.append(verify(msg.canonical_bytes(), msg.tag, self.scenario.ledger))

    def start(self, start_absolute: float) -> None:
        scen = self.scenario
        alice = scen.clock(Party.ALICE)
        self.t1 = quantize(alice.local_time(start_absolute), scen.quantization)
        msg = self._outgoing(SyncMessage(MessageKind.TIME_STAMP, t1=self.t1))
        scen.scheduler.send(msg, Direction.A_TO_B, start_absolute)

    def on_deliver(self, sched: Scheduler, env: Envelope) -> None:
        msg = env.payload
        if not isinstance(msg, SyncMessage):
            return
        scen = self.scenario
        now = env.deliver_absolute
        if msg.kind is MessageKind.TIME_STAMP:
            # at Bob: note arrival, think, respond with both of his stamps
            self._check(msg)
            bob = scen.clock(Party.BOB)
            t1_star = quantize(bob.local_time(now), scen.quantization)
            respond_at = now + scen.processing_delay
            t2_star = quantize(bob.local_time(respond_at), scen.quantization)
            reply = self._outgoing(
                SyncMessage(MessageKind.RESPONSE, t1_star=t1_star, t2_star=t2_star)
            )
            sched.send(reply, Direction.B_TO_A, respond_at)
        elif msg.kind is MessageKind.RESPONSE:
            # at Alice: record her arrival time and share it
            self._check(msg)
            alice = scen.clock(Party.ALICE)
            self.t1_star = msg.t1_star
            self.t2_star = msg.t2_star
            self.t2 = quantize(alice.local_time(now), scen.quantization)
            share = self._outgoing(SyncMessage(MessageKind.SHARE, t2=self.t2))
            sched.send(share, Direction.A_TO_B, now)
        elif msg.kind is MessageKind.SHARE:
            self._check(msg)
            self.share_delivered = True

    @property
    def complete(self) -> bool:
        return None not in (self.t1, self.t1_star, self.t2_star, self.t2) and self.share_delivered

    def estimates(self) -> tuple[float, float]:
        t0 = (self.t1_star - self.t1 - self.t2 + self.t2_star) / 2.0
        tau = (self.t1_star - self.t1 + self.t2 - self.t2_star) / 2.0
        return t0, tau


def protocol_a(scenario: Scenario, start_absolute: Optional[float] = None) -> SyncResult:
    """Undefended two-way synchronization. Recovers (t0, tau) exactly over an
    honest channel; never raises an attack flag because it has nothing to
    check. Raises ProtocolIncompleteError when a message never arrives."""
    run = _TwoWayRun(scenario, authenticated=False)
    run.start(scenario.start_time if start_absolute is None else start_absolute)
    scenario.scheduler.run_until_idle(run.on_deliver)
    if not run.complete:
        raise ProtocolIncompleteError("synchronization exchange never finished")
    t0, tau = run.estimates()
    return SyncResult(ProtocolKind.A, t0, tau, None, auth_ok=True, attack_flag=False)


def protocol_b(scenario: Scenario, start_absolute: Optional[float] = None) -> SyncResult:
    """Authenticated two-way synchronization. Content substitution is caught
    by the tags; a stalled exchange is reported as a timeout detection. Pure
    delay or line-length games pass unflagged - the combined check exists
    for those."""
    run = _TwoWayRun(scenario, authenticated=True)
    run.start(scenario.start_time if start_absolute is None else start_absolute)
    scenario.scheduler.run_until_idle(run.on_deliver)
    if not run.complete:
        return SyncResult(
            ProtocolKind.B, None, None, None,
            auth_ok=False, attack_flag=True, detail="timeout: exchange stalled",
        )
    auth_ok = bool(run.verdicts) and all(run.verdicts)
    if not auth_ok:
        return SyncResult(
            ProtocolKind.B, None, None, None,
            auth_ok=False, attack_flag=True, detail="authentication failed",
        )
    t0, tau = run.estimates()
    return SyncResult(ProtocolKind.B, t0, tau, None, auth_ok=True, attack_flag=False)


# ---------------------------------------------------------------------------
# Protocol C: integrity-check synchronization over measurement files
# ---------------------------------------------------------------------------


@dataclass
class ExchangeOutcome:
    received_by_bob: Optional[BepFile] = None  # Alice's record, as delivered
    received_by_alice: Optional[BepFile] = None  # Bob's record, as delivered
    auth_ok_at_bob: Optional[bool] = None
    auth_ok_at_alice: Optional[bool] = None
    index_ok: bool = True
    config_ok: bool = True

    @property
    def complete(self) -> bool:
        return self.received_by_bob is not None and self.received_by_alice is not None

    @property
    def all_ok(self) -> bool:
        return (
            self.complete
            and bool(self.auth_ok_at_bob)
            and bool(self.auth_ok_at_alice)
            and self.index_ok
            and self.config_ok
        )


def exchange_files(
    scenario: Scenario,
    file_a: BepFile,
    file_b: BepFile,
    send_absolute: float,
    expected_index: Optional[int] = None,
) -> ExchangeOutcome:
    """Swap the two measurement files through the authenticated channel.

    Each file crosses with a one-time-pad encrypted hash of its serialized
    payload; the receiver re-hashes what arrived and compares. The BEP index
    and line-config digest sit inside the hashed bytes, so a replayed or
    re-parameterized file is caught by the expected-index check even though
    its tag verifies.
    """
    expected = file_a.bep_index if expected_index is None else expected_index
    outcome = ExchangeOutcome()
    local_digest = scenario.line.digest()

    def tagged(file: BepFile) -> FileTransfer:
        tag = encrypt_digest(hash_message(file.payload_bytes()), scenario.ledger)
        return FileTransfer(file, tag)

    def on_deliver(sched: Scheduler, env: Envelope) -> None:
        transfer = env.payload
        if not isinstance(transfer, FileTransfer):
            return
        ok = verify(transfer.file.payload_bytes(), transfer.tag, scenario.ledger)
        if env.direction is Direction.A_TO_B:
            outcome.received_by_bob = transfer.file
            outcome.auth_ok_at_bob = ok
        else:
            outcome.received_by_alice = transfer.file
            outcome.auth_ok_at_alice = ok
        if transfer.file.bep_index != expected:
            outcome.index_ok = False
        if transfer.file.config_digest != local_digest:
            outcome.config_ok = False

    sched = scenario.scheduler
    sched.send(tagged(file_a), Direction.A_TO_B, send_absolute)
    sched.send(tagged(file_b), Direction.B_TO_A, send_absolute)
    sched.run_until_idle(on_deliver)
    return outcome


@dataclass(frozen=True)
class SearchGrid:
    """Trial-shift grid for the alignment search: one candidate per sample
    interval over +-window samples, optionally refined to sub-sample by a
    three-point parabola through the minimum."""

    window: int = 100
    refine: bool = True
    threshold: float = 0.01
    input: str = "voltage"  # which record drives the wire model

    def __post_init__(self):
        if self.window < 1:
            raise ConfigError("window: must be >= 1")
        if self.input not in ("voltage", "current"):
            raise ConfigError("input: must be 'voltage' or 'current'")


def residual_curve(
    file_ref: BepFile,
    file_other: BepFile,
    r_wire: float,
    grid: SearchGrid = SearchGrid(),
) -> tuple[np.ndarray, np.ndarray]:
    """Normalized mean-square mismatch against the wire model, per shift.

    For each candidate shift the other party's record is placed on the
    reference party's time axis (linear interpolation between samples) and
    the wire model is evaluated over the overlap:

      voltage input: I_sim = (U_alice - U_bob) / r_wire, compared with the
        reference party's measured current;
      current input: the shifted record's current predicts the terminal
        voltage difference I * r_wire, compared with the measured difference.

    Returns (shifts_seconds, residuals). Raises InsufficientOverlapError if
    any candidate would leave less than half the reference record usable.
    """
    if r_wire <= 0:
        raise ConfigError("r_wire: alignment search needs a positive wire resistance")
    if file_ref.sample_rate != file_other.sample_rate:
        raise ConfigError("files: sample rates differ")
    n_ref, n_other = len(file_ref), len(file_other)
    if n_ref == 0 or n_other == 0:
        raise ConfigError("files: empty record")

    fs = file_ref.sample_rate
    # index into the other record of reference sample n at shift zero
    base = (file_ref.local_start - file_other.local_start) * fs
    ref_idx = np.arange(n_ref, dtype=np.float64)

    sign = 1.0 if file_ref.party is Party.ALICE else -1.0
    shifts = np.arange(-grid.window, grid.window + 1)
    residuals = np.empty(shifts.size)

    for pos, j in enumerate(shifts):
        idx = base - j + ref_idx
        valid = (idx >= 0.0) & (idx <= n_other - 1)
        n_valid = int(np.count_nonzero(valid))
        if n_valid < 0.5 * n_ref:
            raise InsufficientOverlapError(
                f"shift {j} samples leaves {n_valid}/{n_ref} overlap"
            )
        iv = idx[valid]
        i0 = np.clip(np.floor(iv).astype(np.intp), 0, n_other - 2)
        frac = iv - i0

        def interp(samples: np.ndarray) -> np.ndarray:
            return samples[i0] * (1.0 - frac) + samples[i0 + 1] * frac

        v_diff = sign * (file_ref.voltage_samples[valid] - interp(file_other.voltage_samples))
        if grid.input == "voltage":
            i_sim = v_diff / r_wire
            i_meas = file_ref.current_samples[valid]
            num = np.sum((i_sim - i_meas) ** 2)
            den = np.sum(i_meas**2)
        else:
            v_pred = interp(file_other.current_samples) * r_wire
            num = np.sum((v_diff - v_pred) ** 2)
            den = np.sum(v_pred**2)
        residuals[pos] = num / den if den > 0 else np.inf

    return shifts / fs, residuals


def _pick_minimum(shifts: np.ndarray, residuals: np.ndarray) -> int:
    # smallest residual; ties go to the smallest |shift| (the null
    # hypothesis of already-synchronized clocks)
    order = sorted(range(shifts.size), key=lambda i: (residuals[i], abs(shifts[i]), shifts[i]))
    return order[0]


def _refine_vertex(shifts: np.ndarray, residuals: np.ndarray, i: int) -> float:
    if i == 0 or i == shifts.size - 1:
        return float(shifts[i])
    y0, y1, y2 = residuals[i - 1], residuals[i], residuals[i + 1]
    denom = y0 - 2.0 * y1 + y2
    if denom <= 0.0 or not np.isfinite(denom):
        return float(shifts[i])
    step = shifts[1] - shifts[0]
    delta = 0.5 * (y0 - y2) / denom
    return float(shifts[i] + np.clip(delta, -0.5, 0.5) * step)


def estimate_offset(
    file_ref: BepFile,
    file_other: BepFile,
    r_wire: float,
    grid: SearchGrid = SearchGrid(),
) -> tuple[float, float]:
    """Find the shift where the other party's record satisfies the wire
    model against the reference record.

    Returns (dt_star, residual): the minimizing shift (sub-sample refined
    when the grid allows) and the residual at the grid minimum. The
    reference party's clock offset relative to the other is -dt_star; run
    with Alice as reference, that recovers Bob's offset directly.

    Raises FlatResidualError when no candidate gets below the detection
    threshold - either the line was modified or the model is wrong.
    """
    shifts, residuals = residual_curve(file_ref, file_other, r_wire, grid)
    i = _pick_minimum(shifts, residuals)
    best = float(residuals[i])
    if best > grid.threshold:
        raise FlatResidualError(float(shifts[i]), best, grid.threshold)
    dt = _refine_vertex(shifts, residuals, i) if grid.refine else float(shifts[i])
    return dt, best


def bep_start_time(scenario: Scenario, k: int) -> float:
    """Absolute start of BEP k on the shared timeline: records are taken
    back to back with enough slack after each for the file exchange."""
    slack = 2.0 * (scenario.channel.delay_a_to_b + scenario.channel.delay_b_to_a)
    return scenario.start_time + k * (scenario.line.bep_duration + slack)


def _draw_choices(scenario: Scenario, k: int) -> tuple[ResistorChoice, ResistorChoice]:
    rng_a = np.random.default_rng(derive_seed(scenario.seed, _SEED_CHOICE_A, k))
    rng_b = np.random.default_rng(derive_seed(scenario.seed, _SEED_CHOICE_B, k))
    c_a = ResistorChoice.L if rng_a.integers(2) == 0 else ResistorChoice.H
    c_b = ResistorChoice.L if rng_b.integers(2) == 0 else ResistorChoice.H
    return c_a, c_b


def run_bep(scenario: Scenario, k: int):
    """Simulate BEP k with the parties' current clocks and any installed
    line modification, and log it in the scenario trace."""
    t_k = bep_start_time(scenario, k)
    c_a, c_b = _draw_choices(scenario, k)
    meas_a, meas_b = simulate_bep(
        c_a,
        c_b,
        scenario.line,
        derive_seed(scenario.seed, _SEED_BEP, k),
        bep_index=k,
        start_absolute=t_k,
        offset_A=scenario.clock(Party.ALICE).offset_t0,
        offset_B=scenario.clock(Party.BOB).offset_t0,
        r_wire_schedule=scenario.r_wire_schedule or None,
    )
    scenario.scheduler.record(t_k, "bep", "-", None)
    scenario.diagnostics.setdefault("first_bep_voltage", meas_a.voltage_trace)
    scenario.diagnostics.setdefault("bep_msq", []).append(meas_a.msq_voltage)
    if scenario.passive_log is not None:
        rng = np.random.default_rng(derive_seed(scenario.seed, _SEED_EVE, k))
        scenario.passive_log.append(
            {
                "k": k,
                "msq_voltage": meas_a.msq_voltage,
                "msq_current": meas_a.msq_current,
                "guess_bit": int(rng.integers(2)),
            }
        )
    return meas_a, meas_b


def protocol_c(scenario: Scenario, k_range=None) -> SyncResult:
    """Integrity-check synchronization over one or more BEPs.

    Per BEP: record, exchange files with authentication, and accumulate the
    residual curve; curves from multiple BEPs are averaged before the
    minimum is taken, which sharpens the valley. Alice and Bob run the
    search symmetrically (their shifts are negatives of each other); Bob,
    as the non-master, applies the correction, after which his clock offset
    is zero to within the search resolution. The run is flagged, and no
    correction applied, when any file fails authentication or freshness, or
    when no shift explains the data (line modified mid-record).

    This protocol produces no propagation-delay estimate; only the embedded
    two-way probe of the combined check measures tau.
    """
    ks = tuple(k_range) if k_range is not None else tuple(scenario.k_range)
    if not ks:
        raise ConfigError("k_range: need at least one BEP")

    grid = SearchGrid(
        window=scenario.dt_window,
        threshold=scenario.residual_threshold,
        input=scenario.estimate_input,
    )

    curves_alice: list[np.ndarray] = []
    curves_bob: list[np.ndarray] = []
    shifts = None

    for k in ks:
        meas_a, meas_b = run_bep(scenario, k)
        file_a = build_bep_file(meas_a, scenario.line)
        file_b = build_bep_file(meas_b, scenario.line)
        send_at = bep_start_time(scenario, k) + scenario.line.bep_duration
        outcome = exchange_files(scenario, file_a, file_b, send_at, expected_index=k)
        if not outcome.complete:
            return SyncResult(
                ProtocolKind.C, None, None, None,
                auth_ok=False, attack_flag=True, detail="timeout: file exchange stalled",
            )
        if not outcome.all_ok:
            reason = "authentication failed" if not (
                outcome.auth_ok_at_bob and outcome.auth_ok_at_alice
            ) else "stale or mismatched file"
            return SyncResult(
                ProtocolKind.C, None, None, None,
                auth_ok=False, attack_flag=True, detail=reason,
            )
        # Alice searches her own record against Bob's received copy; Bob
        # does the mirror image with Alice's received copy.
        s_a, r_a = residual_curve(file_a, outcome.received_by_alice, scenario.line.R_wire, grid)
        _, r_b = residual_curve(file_b, outcome.received_by_bob, scenario.line.R_wire, grid)
        curves_alice.append(r_a)
        curves_bob.append(r_b)
        shifts = s_a

    mean_alice = np.mean(curves_alice, axis=0)
    mean_bob = np.mean(curves_bob, axis=0)
    scenario.diagnostics["residual_curve"] = (shifts, mean_alice)

    i_a = _pick_minimum(shifts, mean_alice)
    best = float(mean_alice[i_a])
    if best > grid.threshold:
        return SyncResult(
            ProtocolKind.C, None, None, best,
            auth_ok=True, attack_flag=True,
            detail=f"no shift explains the data (residual {best:.3e})",
        )
    dt_alice = _refine_vertex(shifts, mean_alice, i_a) if grid.refine else float(shifts[i_a])
    i_b = _pick_minimum(shifts, mean_bob)
    dt_bob = _refine_vertex(shifts, mean_bob, i_b) if grid.refine else float(shifts[i_b])

    t0_est = -dt_alice
    # symmetric searches must agree (their shifts are mutual negatives)
    if abs(dt_alice + dt_bob) > 1.0 / scenario.line.sample_rate:
        return SyncResult(
            ProtocolKind.C, t0_est, None, best,
            auth_ok=True, attack_flag=True, detail="parties' shift estimates disagree",
        )

    # Bob, the non-master, corrects his clock
    scenario.clock(Party.BOB).offset_t0 -= t0_est
    return SyncResult(ProtocolKind.C, t0_est, None, best, auth_ok=True, attack_flag=False)


def combined_check(scenario: Scenario, c_result: Optional[SyncResult] = None) -> SyncResult:
    """Full verdict: Protocol C plus a random-time authenticated probe.

    Passes only when (a) the probe's offset estimate is zero within
    tolerance (C already corrected Bob's clock), (b) the probe's delay
    estimate matches the nominal propagation time, and (c) the integrity
    residual stayed below threshold. Failing any leg raises the attack
    flag.
    """
    if c_result is None:
        c_result = protocol_c(scenario)

    # probe at a random later instant, snapped to the clock grid (parties
    # initiate on their own clock ticks)
    last = max((rec.absolute for rec in scenario.scheduler.log), default=scenario.start_time)
    rng = np.random.default_rng(derive_seed(scenario.seed, _SEED_PROBE))
    quantum = scenario.quantum
    wait = float(rng.integers(1_000, 1_000_000)) * quantum
    probe_start = (np.ceil(last / quantum) + 1) * quantum + wait

    b_result = protocol_b(scenario, start_absolute=probe_start)

    q = scenario.quantum
    failures = []
    if c_result.attack_flag:
        failures.append(f"integrity check: {c_result.detail or 'flagged'}")
    if b_result.attack_flag:
        failures.append(f"probe: {b_result.detail or 'flagged'}")
    else:
        if abs(b_result.t0_est) > scenario.t0_tol_quanta * q:
            failures.append(f"offset after correction is {b_result.t0_est:.3e}s, not zero")
        if abs(b_result.tau_est - scenario.nominal_tau) > scenario.tau_tol_quanta * q:
            failures.append(
                f"propagation delay {b_result.tau_est:.6e}s deviates from "
                f"nominal {scenario.nominal_tau:.6e}s"
            )

    return SyncResult(
        ProtocolKind.COMBINED,
        b_result.t0_est,
        b_result.tau_est,
        c_result.residual,
        auth_ok=c_result.auth_ok and b_result.auth_ok,
        attack_flag=bool(failures),
        detail="; ".join(failures),
    )
