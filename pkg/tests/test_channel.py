import pytest

from kljnsync.channel import (
    ChannelState,
    ClockState,
    Direction,
    Envelope,
    Scheduler,
    format_event_log,
    local_time,
    quantize,
)
from kljnsync.errors import ConfigError, LivelockError
from kljnsync.line import Party


def test_local_time_is_offset_translation():
    master = ClockState(Party.ALICE, 0.0, is_master=True)
    assert local_time(master, 7.0) == 7.0
    bob = ClockState(Party.BOB, 0.005)
    assert local_time(bob, 1.000) == 1.005
    early = ClockState(Party.BOB, -3e-3)
    assert local_time(early, 0.0) == -0.003


def test_clock_translation_round_trip():
    bob = ClockState(Party.BOB, 0.00317)
    for t in (-1.0, 0.0, 2.5, 1e4):
        assert bob.absolute_time(bob.local_time(t)) == pytest.approx(t, abs=1e-12)


def test_quantize():
    assert quantize(1.0000004, 1e-6) == pytest.approx(1.0, abs=1e-12)
    assert quantize(1.0000006, 1e-6) == pytest.approx(1.000001, abs=1e-12)
    assert quantize(1.23456789, None) == 1.23456789
    assert quantize(1.23456789, 0) == 1.23456789


def test_honest_send_is_pure_delay():
    sched = Scheduler(ChannelState(0.002, 0.002))
    env = sched.send("ping", Direction.A_TO_B, 0.0)
    assert env.deliver_absolute == 0.002
    got = []
    sched.run_until_idle(lambda s, e: got.append(e.payload))
    assert got == ["ping"]
    kinds = [rec.kind for rec in sched.log]
    assert kinds == ["send", "deliver"]


def test_empty_queue_gives_empty_log():
    sched = Scheduler(ChannelState(0.001, 0.001))
    assert sched.run_until_idle(lambda s, e: None) == []
    assert format_event_log(sched.log) == ""


def test_delay_hook_composes_additively():
    # Bob sends at 10 ms over a 2 ms channel; Eve adds 4 ms on that leg only
    channel = ChannelState(0.002, 0.002)

    def eve(env, sched):
        if env.direction is Direction.B_TO_A:
            env.deliver_absolute += 0.004
        return env

    channel.hooks.append(eve)
    sched = Scheduler(channel)
    env = sched.send("reply", Direction.B_TO_A, 0.010)
    assert env.deliver_absolute == pytest.approx(0.016)
    unharmed = sched.send("fwd", Direction.A_TO_B, 0.010)
    assert unharmed.deliver_absolute == pytest.approx(0.012)
    assert any(rec.kind == "attack-delay" for rec in sched.log)


def test_substitution_hook_logs_original_and_replacement():
    channel = ChannelState(0.002, 0.002)

    def eve(env, sched):
        env.payload = "forged"
        return env

    channel.hooks.append(eve)
    sched = Scheduler(channel)
    env = sched.send("genuine", Direction.A_TO_B, 0.0)
    assert env.payload == "forged"
    assert env.deliver_absolute == 0.002  # delivery time untouched
    send_rec = next(r for r in sched.log if r.kind == "send")
    sub_rec = next(r for r in sched.log if r.kind == "attack-substitute")
    assert send_rec.digest != sub_rec.digest


def test_drop_is_recorded_not_raised():
    channel = ChannelState(0.002, 0.002)
    channel.hooks.append(lambda env, sched: None)
    sched = Scheduler(channel)
    assert sched.send("gone", Direction.A_TO_B, 0.0) is None
    delivered = []
    sched.run_until_idle(lambda s, e: delivered.append(e))
    assert delivered == []
    assert any(rec.kind == "attack-drop" for rec in sched.log)


def test_hooks_cannot_break_causality():
    channel = ChannelState(0.002, 0.002)

    def eve(env, sched):
        env.deliver_absolute = env.sent_absolute - 1.0
        return env

    channel.hooks.append(eve)
    sched = Scheduler(channel)
    env = sched.send("m", Direction.A_TO_B, 5.0)
    assert env.deliver_absolute >= env.sent_absolute


def test_envelope_validates_causality():
    with pytest.raises(ConfigError):
        Envelope("x", 1.0, 0.5, Direction.A_TO_B)


def test_ties_break_by_insertion_order():
    sched = Scheduler(ChannelState(0.001, 0.001))
    sched.send("first", Direction.A_TO_B, 0.0)
    sched.send("second", Direction.B_TO_A, 0.0)
    got = []
    sched.run_until_idle(lambda s, e: got.append(e.payload))
    assert got == ["first", "second"]


def test_identical_runs_give_identical_logs():
    def run():
        sched = Scheduler(ChannelState(0.002, 0.003))
        sched.send("a", Direction.A_TO_B, 0.0)
        sched.send("b", Direction.B_TO_A, 0.001)
        sched.run_until_idle(lambda s, e: None)
        return format_event_log(sched.log)

    assert run() == run()


def test_event_log_line_format():
    sched = Scheduler(ChannelState(0.002, 0.002))
    sched.send("payload", Direction.A_TO_B, 0.25)
    sched.run_until_idle(lambda s, e: None)
    lines = format_event_log(sched.log).splitlines()
    t, direction, kind, digest = lines[0].split()
    assert t == "0.250000000" and direction == "AtoB" and kind == "send"
    assert len(digest) == 64


def test_livelock_guard():
    sched = Scheduler(ChannelState(0.001, 0.001), event_budget=50)

    def echo(s, env):
        s.send(env.payload, env.direction, env.deliver_absolute)

    sched.send("loop", Direction.A_TO_B, 0.0)
    with pytest.raises(LivelockError):
        sched.run_until_idle(echo)


def test_channel_rejects_negative_delay():
    with pytest.raises(ConfigError):
        ChannelState(-0.001, 0.001)
