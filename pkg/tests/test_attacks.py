import json

import numpy as np
import pytest

from s2qsp import attacks as at
from s2qsp.infotheory import lemma3_bound
from s2qsp.modmath import two_adic
from s2qsp.protocol import AliceRound, OwnershipError, Party, ProtocolParams, Session

P2 = ProtocolParams(2, 1)   # D = 16
P1 = ProtocolParams(1, 1)   # D = 8


def test_summarize_zero_spread_and_empty():
    s = at.summarize("x", 3, [True] * 10, [1.0] * 10)
    assert s.within_tolerance and s.sigma == 0 and s.empirical_rate == 1
    assert s.ci_low < 1 <= s.ci_high
    with pytest.raises(ValueError):
        at.summarize("x", 3, [], [])
    json.loads(s.to_json())


def test_forgery_a():
    s = at.forgery_attack_alice("a", P2, shots=512, seed=1)
    assert s.analytic_rate == pytest.approx(15 / 16, abs=0.02)
    assert s.within_tolerance
    assert 0 <= s.empirical_rate <= 1


def test_forgery_b_size_class():
    # 1 - k1 r3 with valuation 3 at D = 16 leaves 8 solutions: half the runs pass
    k1 = 1
    r3 = next(r for r in range(1, 16, 2) if two_adic((1 - k1 * r) % 16, 4).exponent == 3)
    assert at.forgery_pass_probability("b", (k1, 1, 1), r3, 0, 16) == pytest.approx(0.5)


def test_forgery_b_leakage_under_bound():
    d3 = ProtocolParams(1, 1)
    s = at.forgery_attack_alice("b", d3, shots=512, seed=2)
    assert s.within_tolerance
    assert s.leakage_bits <= s.bound_bits + 0.05
    assert s.bound_bits == pytest.approx(lemma3_bound(3)) == pytest.approx(5 / 8)
    for size, row in s.extra["by_size"].items():
        assert row["analytic"] == pytest.approx(1 - int(size) / 8)


def test_forgery_b_adaptive_is_undetected():
    s = at.forgery_attack_alice("b", P1, shots=128, seed=3, adaptive=True)
    assert s.detections == 0 and s.analytic_rate == 0


def test_forgery_c_and_bad_case():
    s = at.forgery_attack_alice("c", P2, shots=256, seed=4)
    assert s.within_tolerance
    with pytest.raises(ValueError):
        at.ForgeryAlice("z", np.random.default_rng(0))


def test_forger_cannot_touch_bob_registers():
    alice = at.ForgeryAlice("a", np.random.default_rng(0))
    sess = Session(3, alice.registers)
    alice.prepare(sess, AliceRound(0, (0, 0, 1, 0)))
    with pytest.raises(OwnershipError):
        sess.apply(Party.ALICE, lambda s, r: s, "t1")


@pytest.mark.parametrize("forge, rate", [("t2", 15 / 16), ("t1", 15 / 16), ("both", 1 - 1 / 256), ("none", 0)])
def test_intercept(forge, rate):
    s = at.intercept_resend_bob(P2, shots=256, seed=5, forge=forge)
    assert s.analytic_rate == pytest.approx(rate)
    assert s.within_tolerance


def test_intercept_none_randomises_output():
    s = at.intercept_resend_bob(P2, shots=256, seed=6, forge="none")
    assert s.detections == 0
    assert s.extra["undetected_M_correct"] < 0.5


def test_entangle_measure():
    const = at.entangle_measure_bob([3] * 8, P1, shots=128, seed=7)
    assert const.detections == 0 and const.extra["M_correct_fraction"] == 1
    ident = at.entangle_measure_bob(lambda j: j, P1, shots=128, seed=7)
    assert ident.detections == 0
    assert ident.extra["M_correct_fraction"] < 0.5


def test_entangle_holevo_constant():
    assert at.entangle_holevo([0] * 8) == pytest.approx(0, abs=1e-9)
    with pytest.raises(ValueError):
        at.entangle_holevo([0] * 16, d=4)


@pytest.mark.parametrize("side, mode", [("alice_r", "perturb_r4"), ("alice_r", "random"), ("bob_k", "random"),
                                        ("bob_k", "shift")])
def test_false_info(side, mode):
    s = at.false_info_attack(side, P2, shots=256, seed=8, mode=mode)
    assert s.within_tolerance
    assert s.analytic_rate > 0


@pytest.mark.parametrize("side", ["alice_r", "bob_k"])
def test_false_info_honest_control(side):
    s = at.false_info_attack(side, P2, shots=64, seed=9, mode="honest")
    assert s.detections == 0 and s.analytic_rate == 0


def test_false_info_bad_side():
    with pytest.raises(ValueError):
        at.false_info_attack("carol", P2, shots=1)


def test_perturbed_r4_matches_bruteforce():
    a = AliceRound(1, (3, 4, 5, 6))
    k = (1, 3, 5)
    from s2qsp.protocol import alice_answer, bondage_values
    r3, r4 = alice_answer(a, k, 16)
    r1, r2 = bondage_values(a.p, a.c, k, 16)
    for bad in range(16):
        brute = sum(((j * r1 + r2) * r3 + bad) % 16 == (j + a.c[0]) % 16 for j in range(16)) / 16
        assert at.honest_state_pass_probability(a, k, r3, bad, 16) == pytest.approx(brute)
    assert at.honest_state_pass_probability(a, k, r3, r4, 16) == 1


def test_measurement_attack_small():
    rep = at.measurement_attack_bob(P1, shots=512, seed=10)
    assert rep.exact_identical and rep.g_marginal_uniform
    assert rep.indistinguishable
    assert rep.control_distinguishable
    json.loads(rep.to_json())


def test_total_variation():
    assert at.total_variation({0: 1.0}, {1: 1.0}) == 1
    assert at.total_variation({0: 0.5, 1: 0.5}, {1: 0.5, 0: 0.5}) == 0


def test_semi_honest_alice():
    out = at.semi_honest_alice(ProtocolParams(1, 2), [1, 0], [1, 1], 1, seed=11)
    assert out["view_matches_shares"]
    assert abs(out["info_bits"]) < 1e-9
    assert out["output"] == (1 + 1) % 2
    one = at.semi_honest_alice(ProtocolParams(2, 1), [3], [2], 1)
    assert abs(one["info_bits"]) < 1e-9
