import numpy as np
import pytest

from s2qsp import sim
from s2qsp.circuits import (FAMILIES, Circuit, apply_circuit, build_bsum, build_draper_sum, build_qft,
                            build_rot, build_shor_mul, build_special_mul, build_xor, check_equivalence,
                            gate_count_scaling)
from s2qsp.constants import END_TO_END_TOL
from s2qsp.sim import RegisterLayout, StateVector


def run(circ, layout, **vals):
    return apply_circuit(StateVector.basis(layout, **vals), circ)


def basis_value(state):
    idx = np.argwhere(np.abs(state.amps) > 1 - 1e-9)
    assert len(idx) == 1
    return tuple(int(i) for i in idx[0])


def test_qft_d1_is_single_hadamard():
    c = build_qft(1)
    assert [g.kind for g in c.gates] == ["H"]


def test_qft_d4_gate_inventory():
    counts = build_qft(4).counts
    assert counts["H"] + counts["CP"] == 10 and counts["SWAP"] == 2


def test_qft_golden_dump():
    assert build_qft(2).dump() == "H h[1]\nCP h[1] h[0] 1/4\nH h[0]\nSWAP h[0] h[1]"


def test_rot_zero_is_empty_and_high_bit():
    assert len(build_rot(0, 4)) == 0
    c = build_rot(8, 4)
    assert {q for g in c.gates for q in g.targets} == {("h", 0)}
    assert c.dump() == "P h[0] 1/2"


def test_draper_sum_and_special_mul_examples():
    one = RegisterLayout((("h", 4),))
    assert basis_value(run(build_draper_sum(5, 4), one, h=3)) == (8,)
    assert basis_value(run(build_special_mul(9, 4), one, h=3)) == (11,)
    shor = RegisterLayout((("h", 4), ("s", 4)))
    assert basis_value(run(build_shor_mul(9, 4), shor, h=3)) == (11, 0)


def test_empty_circuit_is_identity():
    lay = RegisterLayout((("h", 3),))
    s = sim.apply_qft(StateVector.basis(lay, h=5), "h")
    assert np.allclose(apply_circuit(s, Circuit()).amps, s.amps)


def test_qft3_uniform():
    s = run(build_qft(3), RegisterLayout((("h", 3),)))
    assert np.allclose(s.flat(), 8 ** -0.5)


def test_xor_gate_count_equals_width():
    for d in range(1, 7):
        assert len(build_xor(d)) == d


def test_unknown_qubit_rejected():
    with pytest.raises((IndexError, KeyError)):
        run(build_qft(3, reg="zz"), RegisterLayout((("h", 3),)))
    with pytest.raises((IndexError, KeyError)):
        run(build_qft(4), RegisterLayout((("h", 3),)))


def test_step1_circuit_reproduces_entangled_state():
    d, D = 3, 8
    p, c = 5, (2, 7, 3, 5)
    regs = ["h", "t1", "t2", "g"]
    lay = RegisterLayout.uniform(regs, d)
    circ = build_qft(d)
    for t in regs[1:]:
        circ = circ + build_xor(d, "h", t)
    circ = (circ + build_special_mul(p, d, "t2") + build_special_mul(c[2], d, "g")
            + build_draper_sum(c[0], d, "t1") + build_draper_sum(c[1], d, "t2") + build_draper_sum(c[3], d, "g"))
    got = apply_circuit(StateVector.basis(lay), circ)
    want = StateVector.from_terms(
        lay, {(j, (j + c[0]) % D, (j * p + c[1]) % D, (j * c[2] + c[3]) % D): 1 for j in range(D)})
    assert sim.fidelity(got, want) > 1 - END_TO_END_TOL
    assert np.allclose(got.amps, want.amps, atol=1e-9)


def test_bsum_circuit_on_superposition():
    lay = RegisterLayout((("h", 3), ("t", 3)))
    rng = np.random.default_rng(2)
    amps = rng.normal(size=lay.shape) + 1j * rng.normal(size=lay.shape)
    s = StateVector(lay, amps / np.linalg.norm(amps))
    assert np.allclose(apply_circuit(s, build_bsum(3)).amps, sim.apply_bsum(s, "h", "t").amps)


@pytest.mark.parametrize("d", [1, 2, 3])
def test_equivalence_all_families(d):
    rows = check_equivalence(d)
    assert {r.family for r in rows} >= {"QFT", "QFT_INV", "ROT", "SUM", "BSUM", "XOR", "MUL", "MUL_SPECIAL"}
    for r in rows:
        assert r.ok(), (r.family, r.max_error)


def test_scaling_table():
    rows = {f: gate_count_scaling(f) for f in FAMILIES}
    for f in ("QFT", "ROT", "SUM", "BSUM", "MUL"):
        assert rows[f].quadratic_stable, f
    assert rows["XOR"].linear_exact
    assert not rows["MUL_SPECIAL"].quadratic_stable
    assert rows["QFT"].counts[4] == 12
