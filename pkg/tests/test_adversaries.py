import numpy as np
import pytest

from kljnsync.adversaries import (
    asym_delay,
    install,
    line_mod,
    passive,
    passive_bit_guess,
    substitute_file,
    substitute_message,
)
from kljnsync.errors import (
    AmbiguousMeasurementError,
    ConfigError,
    ConflictingAttackError,
    InconsistentStateError,
)
from kljnsync.line import LineConfig, ResistorChoice, simulate_bep
from kljnsync.protocols import combined_check, protocol_a, protocol_b, protocol_c
from kljnsync.scenario import make_scenario

LINE = LineConfig(R_L=1.0, R_H=10.0, bandwidth_B=1e4, noise_scale=1e-4)
FS = LINE.sample_rate


def scenario(**kw):
    kw.setdefault("seed", 1)
    kw.setdefault("t0", 7.0 / FS)
    kw.setdefault("tau", 0.002)
    return make_scenario(LINE, **kw)


def test_spec_constructors_validate():
    with pytest.raises(ConfigError):
        asym_delay("BtoA", -1.0)
    with pytest.raises(ValueError):
        asym_delay("sideways", 1e-3)
    with pytest.raises(ConfigError):
        substitute_message("Response")  # no field, not dropping
    with pytest.raises(ConfigError):
        substitute_file("scramble")
    with pytest.raises(ConfigError):
        line_mod()  # nothing selected
    with pytest.raises(ConfigError):
        line_mod(r_wire=0.02, tau=1e-3, at_time=0.0)  # two selected
    with pytest.raises(ConfigError):
        line_mod(r_wire=0.02)  # no activation instant


def test_conflicting_line_modifications():
    sc = scenario()
    install(line_mod(r_wire=0.02, at_time=0.005), sc)
    with pytest.raises(ConflictingAttackError):
        install(line_mod(r_wire=0.03, at_time=0.005), sc)


def test_attack_composition_applies_in_order():
    sc = scenario(t0=0.005)
    install([asym_delay("BtoA", 2e-3), asym_delay("BtoA", 2e-3)], sc)
    res = protocol_a(sc)
    # two 2 ms hooks compose to a single 4 ms asymmetric delay
    assert res.tau_est == pytest.approx(0.002 + 0.002, abs=1e-12)


def test_hook_actions_are_audited_in_the_log():
    sc = scenario()
    install(asym_delay("BtoA", 1e-3), sc)
    protocol_a(sc)
    kinds = {rec.kind for rec in sc.scheduler.log}
    assert "attack-delay" in kinds

    sc = scenario()
    install(substitute_message("Response", "t2_star", delta=1e-3), sc)
    protocol_b(sc)
    kinds = {rec.kind for rec in sc.scheduler.log}
    assert "attack-substitute" in kinds

    sc = scenario()
    install(line_mod(r_wire_factor=1.5, at_bep=0), sc)
    protocol_c(sc)
    kinds = {rec.kind for rec in sc.scheduler.log}
    assert "attack-linemod-rwire" in kinds


def test_passive_installation_records_observations():
    sc = scenario(k_range=(0, 1))
    install(passive(), sc)
    protocol_c(sc)
    assert sc.passive_log is not None and len(sc.passive_log) == 2
    assert {"k", "msq_voltage", "msq_current", "guess_bit"} <= set(sc.passive_log[0])


def test_passive_guess_requires_mixed_bep():
    meas, _ = simulate_bep(ResistorChoice.L, ResistorChoice.L, LINE, seed=50)
    with pytest.raises(InconsistentStateError):
        passive_bit_guess(meas.voltage_trace, meas.current_trace, LINE, seed=0)


def test_passive_guess_is_deterministic():
    meas, _ = simulate_bep(ResistorChoice.L, ResistorChoice.H, LINE, seed=51)
    g1 = passive_bit_guess(meas.voltage_trace, meas.current_trace, LINE, seed=7)
    g2 = passive_bit_guess(meas.voltage_trace, meas.current_trace, LINE, seed=7)
    assert g1 == g2 and g1 in (0, 1)


def test_passive_guess_accuracy_is_chance():
    # Eve's channel view is identical for LH and HL, so her hit rate over
    # many mixed BEPs must sit inside the binomial chance band.
    hits = 0
    n = 0
    for k in range(200):
        if k % 2 == 0:
            c_a, c_b, true_bit = ResistorChoice.L, ResistorChoice.H, 0
        else:
            c_a, c_b, true_bit = ResistorChoice.H, ResistorChoice.L, 1
        meas, _ = simulate_bep(c_a, c_b, LINE, seed=60_000 + k)
        try:
            guess = passive_bit_guess(meas.voltage_trace, meas.current_trace, LINE, seed=k)
        except (InconsistentStateError, AmbiguousMeasurementError):
            continue  # unclassifiable BEP, Eve skips it too
        hits += guess == true_bit
        n += 1
    accuracy = hits / n
    band = 3.0 * np.sqrt(0.25 / n)
    assert abs(accuracy - 0.5) < band


def test_attack_matrix():
    """Detection table: A sees nothing, B sees substitution only, the
    combined integrity check sees all three active attacks."""
    delta = 4e-3
    sub = lambda: substitute_message("Response", "t2_star", delta=1e-3)
    filesub = lambda: substitute_file("alter_sample", sample_index=3, delta=0.5)
    delay = lambda: asym_delay("BtoA", delta)
    lm_tau = lambda: line_mod(tau=3e-3, at_time=0.004)
    lm_wire = lambda: line_mod(r_wire_factor=1.5, at_bep=0, fraction=0.5)

    # protocol A: everything sails through unflagged
    for attack in (sub, delay, lm_tau):
        sc = scenario(seed=20)
        install(attack(), sc)
        assert protocol_a(sc).attack_flag is False

    # protocol B: substitution only
    sc = scenario(seed=21)
    install(sub(), sc)
    assert protocol_b(sc).attack_flag is True
    for attack in (delay, lm_tau):
        sc = scenario(seed=21)
        install(attack(), sc)
        assert protocol_b(sc).attack_flag is False

    # combined check: all three
    for attack in (filesub, delay, lm_wire):
        sc = scenario(seed=22)
        install(attack(), sc)
        assert combined_check(sc).attack_flag is True
