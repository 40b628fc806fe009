import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from s2qsp import sim
from s2qsp.fixtures import FIXTURES, TABLE_III, TABLE_IV, replay
from s2qsp.modmath import mod_inv
from s2qsp.protocol import (AliceRound, BobRound, BobStrategy, IntegrityError, OwnershipError, Party,
                            ProtocolAbort, ProtocolParams, Session, Transcript, alice_answer,
                            alice_honesty_test, alice_input_step, alice_test_gates, bob_input_step,
                            bondage_step, bondage_values, compute_output, extract_result, run_protocol,
                            scalar_product_oracle)
from s2qsp.sim import StateVector


def prepared(d, p, c, k=None):
    sess = Session(d)
    alice_input_step(sess, AliceRound((p - 1) // 2, c))
    if k is not None:
        bondage_step(sess, k)
    return sess


def test_params():
    p = ProtocolParams(2, 4)
    assert (p.d, p.N, p.D) == (4, 4, 16)
    with pytest.raises(ValueError):
        ProtocolParams(0, 1)


def test_alice_input_term():
    sess = prepared(4, 3, (2, 15, 9, 12))
    assert sess.state.amps[1, 3, 2, 5] == pytest.approx(0.25)
    assert sess.state.norm() == pytest.approx(1)
    assert all(sess.owners[r] is Party.BOB for r in ("t1", "t2", "g"))
    assert sess.owners["h"] is Party.ALICE


def test_alice_input_cat_state():
    sess = prepared(3, 1, (0, 0, 1, 0))
    want = StateVector.from_terms(sess.layout, {(j, j, j, j): 1 for j in range(8)})
    assert sim.fidelity(sess.state, want) == pytest.approx(1)


def test_alice_input_needs_zero_state():
    sess = Session(3)
    sess.apply(Party.ALICE, sim.apply_sum, "h", b=1)
    with pytest.raises(ValueError):
        alice_input_step(sess, AliceRound(0, (0, 0, 1, 0)))


@pytest.mark.parametrize("fx, i, r12", [(TABLE_III, 0, (13, 13)), (TABLE_IV, 1, (5, 12))])
def test_bondage_values_tables(fx, i, r12):
    row = fx.rows[i]
    assert bondage_values(2 * row.x + 1, row.c, row.k, 16) == r12


def test_bondage_values_unit_k():
    assert bondage_values(5, (3, 4, 7, 1), (1, 1, 1), 16)[0] == (1 + 5 + 7) % 16


def test_bondage_state_carries_r1_r2():
    p, c, k = 3, (2, 15, 9, 12), (5, 9, 5)
    r1, r2 = bondage_values(p, c, k, 16)
    sess = prepared(4, p, c, k)
    want = StateVector.from_terms(
        sess.layout, {(j, (j + c[0]) % 16, (j * p + c[1]) % 16, (j * r1 + r2) % 16): 1 for j in range(16)})
    assert sim.fidelity(sess.state, want) == pytest.approx(1)


def test_bondage_rejects_even_k():
    with pytest.raises(ValueError):
        prepared(4, 3, (2, 15, 9, 12), (5, 8, 5))


@pytest.mark.parametrize("s, q, p, M", [(15, 1, 3, 2), (13, 3, 1, 0), (0, 0, 1, 0)])
def test_bob_input_and_extract(s, q, p, M):
    c, k = (2, 15, 9, 12), (5, 9, 5)
    sess = prepared(4, p, c, k)
    bob_input_step(sess, s, q)
    r3, r4 = alice_answer(AliceRound((p - 1) // 2, c), k, 16)
    assert alice_honesty_test(sess, r3, r4, np.random.default_rng(0)).p_pass == pytest.approx(1)
    sess.discard(Party.BOB, "g")
    sess.send(Party.BOB, Party.ALICE, "t1", "t2")
    from s2qsp.protocol import bob_honesty_test
    assert bob_honesty_test(sess, c[0], c[1], p, np.random.default_rng(0)).p_pass == pytest.approx(1)
    assert extract_result(sess, np.random.default_rng(0)) == M


def test_bob_input_zero_is_identity():
    sess = prepared(3, 3, (1, 2, 3, 4))
    before = sess.state.copy()
    bob_input_step(sess, 0, 0)
    assert sim.fidelity(before, sess.state) == pytest.approx(1)


def test_table3_row1_answer():
    row = TABLE_III.rows[0]
    assert alice_answer(AliceRound(row.x, row.c), row.k, 16) == (5, 1)


def test_table4_errata_values():
    row = TABLE_IV.rows[0]
    assert alice_answer(AliceRound(row.x, row.c), row.k, 16) == (5, 2)


@pytest.mark.parametrize("delta", [1, 2, 4, 8])
def test_wrong_r4_pass_rate_matches_solution_count(delta):
    p, c, k = 3, (2, 15, 9, 12), (5, 9, 5)
    r1, r2 = bondage_values(p, c, k, 16)
    r3, r4 = alice_answer(AliceRound(1, c), k, 16)
    bad = (r4 + delta) % 16
    good_j = sum(((j * r1 + r2) * r3 + bad) % 16 == (j + c[0]) % 16 for j in range(16))
    sess = prepared(4, p, c, k)
    alice_test_gates(sess, r3, bad)
    assert sess.prob_zero(["g"]) == pytest.approx(good_j / 16)


def test_even_r3_rejected():
    sess = prepared(4, 3, (2, 15, 9, 12), (5, 9, 5))
    with pytest.raises(ValueError):
        alice_test_gates(sess, 4, 0)


def test_ownership_violations():
    sess = prepared(3, 3, (1, 2, 3, 4))
    with pytest.raises(OwnershipError):
        sess.apply(Party.ALICE, sim.apply_sum, "t1", b=1)
    with pytest.raises(OwnershipError):
        sess.apply(Party.BOB, sim.apply_qft, "h", inverse=False)
    with pytest.raises(OwnershipError):
        sess.measure(Party.BOB, "h", np.random.default_rng(0))
    with pytest.raises(OwnershipError):
        sess.send(Party.ALICE, Party.BOB, "t1")
    with pytest.raises(KeyError):
        sess.apply(Party.ALICE, sim.apply_sum, "zz", b=1)


class ShiftingBob(BobStrategy):
    def before_return(self, sess, b, rng):
        sess.apply(Party.BOB, sim.apply_sum, "t1", b=1)


class PeekingBob(BobStrategy):
    def before_return(self, sess, b, rng):
        sess.measure(Party.BOB, "t1", rng)


def test_extra_sum_on_t1_always_detected():
    params = ProtocolParams(2, 1)
    for seed in range(5):
        with pytest.raises(ProtocolAbort) as err:
            run_protocol([1], [2], 0, params, bob=ShiftingBob(), seed=seed)
        assert err.value.step == "bob_honesty_test" and err.value.round_index == 1
        assert err.value.transcript.rounds[0].p_bob_pass == pytest.approx(0)


def test_measured_and_returned_t1_passes_but_randomises_M():
    # a collapsed register is still consistent with h, so the test cannot see it
    from s2qsp.protocol import AliceStrategy, run_round
    params = ProtocolParams(2, 1)
    rng = np.random.default_rng(5)
    Ms = set()
    for _ in range(40):
        a = AliceRound(1, (3, 4, 5, 6))
        b = BobRound(2, 0, (1, 3, 5), params.D)
        rec, failed = run_round(params, 1, a, b, AliceStrategy(), PeekingBob(), rng, strict=False)
        assert failed is None and rec.p_bob_pass == pytest.approx(1)
        Ms.add(rec.M)
    assert len(Ms) > 1


@pytest.mark.parametrize("fx", list(FIXTURES.values()), ids=list(FIXTURES))
def test_fixture_replay(fx):
    tr, diffs, _ = replay(fx)
    assert [r.M for r in tr.rounds] == [r.M for r in fx.rows]
    assert tr.output == fx.output
    assert all(d.erratum for d in diffs)
    assert {(d.round, d.field) for d in diffs} == set(fx.errata)
    assert all(r.p_alice_pass == pytest.approx(1) and r.p_bob_pass == pytest.approx(1) for r in tr.rounds)


def test_fixture_histograms_concentrated():
    _, _, hists = replay(TABLE_III, shots=200)
    for h, row in zip(hists, TABLE_III.rows):
        assert h.sum() == 200 and h[row.M] == 200


@pytest.mark.parametrize("M, x, u", [((2, 12, 2, 8), (1, 0, 1, 2), 0), ((4, 10, 6, 0), (2, 3, 1, 0), 2)])
def test_compute_output_examples(M, x, u):
    assert compute_output(M, x, ProtocolParams(2, 4)) == u
    assert compute_output([0], [0], ProtocolParams(3, 1)) == 0


def test_compute_output_integrity():
    with pytest.raises(IntegrityError):
        compute_output([3], [0], ProtocolParams(2, 1))


def test_M_independent_of_randomisers():
    base = TABLE_III.pinned()
    tr0 = run_protocol(TABLE_III.x, TABLE_III.y, 1, TABLE_III.params, pinned=base)
    alt = dict(base, c=[(c1 + 3, c2 + 5, (c3 + 2) % 16, c4 + 1) for c1, c2, c3, c4 in base["c"]],
               k=[(3, 3, 3)] * 4)
    alt["c"] = [tuple(v % 16 for v in c) for c in alt["c"]]
    tr1 = run_protocol(TABLE_III.x, TABLE_III.y, 1, TABLE_III.params, pinned=alt)
    assert [r.M for r in tr0.rounds] == [r.M for r in tr1.rounds]


inst = st.integers(1, 3).flatmap(lambda m: st.integers(1, 4).flatmap(lambda n: st.tuples(
    st.just(m), st.just(n),
    st.lists(st.integers(0, (1 << m) - 1), min_size=n, max_size=n),
    st.lists(st.integers(0, (1 << m) - 1), min_size=n, max_size=n),
    st.integers(0, (1 << m) - 1), st.integers(0, 2**32 - 1))))


@settings(max_examples=40, deadline=None)
@given(inst)
def test_honest_runs_are_correct(case):
    m, n, x, y, v, seed = case
    params = ProtocolParams(m, n)
    tr = run_protocol(x, y, v, params, seed=seed)
    assert tr.output == scalar_product_oracle(x, y, v, params.N)
    D = params.D
    assert sum(r.M - 2 * xi for r, xi in zip(tr.rounds, x)) % D % 4 == 0
    for r, xi, yi, vi in zip(tr.rounds, x, y, tr.v_shares):
        assert (r.M - 2 * xi - 4 * xi * yi - 4 * vi) % D == 0
        assert r.p_alice_pass == pytest.approx(1, abs=1e-9)
        assert r.p_bob_pass == pytest.approx(1, abs=1e-9)
        assert r.r[2] == mod_inv(r.r[0], params.d)
        assert r.alice_test and r.bob_test


def test_transcript_determinism_and_json():
    params = ProtocolParams(2, 3)
    a = run_protocol([1, 2, 3], [3, 0, 1], 2, params, seed=99)
    b = run_protocol([1, 2, 3], [3, 0, 1], 2, params, seed=99)
    assert a.to_json() == b.to_json()
    data = json.loads(a.to_json())
    assert {"seed", "m", "n", "rounds", "output", "detections"} <= set(data)
    assert {"i", "c", "k", "r", "alice_test", "bob_test", "M"} <= set(data["rounds"][0])
    assert Transcript.from_dict(data) == a


def test_input_validation():
    params = ProtocolParams(2, 2)
    with pytest.raises(ValueError):
        run_protocol([1], [1, 2], 0, params)
    with pytest.raises(ValueError):
        run_protocol([1, 4], [1, 2], 0, params)
    with pytest.raises(ValueError):
        run_protocol([1, 1], [1, 2], 0, params, pinned={"v_shares": [1, 2]})


def test_bob_round_values():
    b = BobRound(0, 0, (5, 9, 5), 16)
    assert (b.q, b.s) == (1, 15)
