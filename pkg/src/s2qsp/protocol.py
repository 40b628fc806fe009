"""Two-party quantum scalar product engine.

Alice's particles ``h, t1, t2, g`` live as registers of one state vector.
Handing a particle to the other party changes its owner; it never copies
amplitudes. Every gate and measurement goes through :class:`Session`, which
refuses to let a party touch a register it does not hold.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from enum import Enum
from typing import Callable, Sequence

import numpy as np

from . import sim
from .constants import END_TO_END_TOL
from .modmath import derive_vn, mod_inv
from .sim import RegisterLayout, StateVector

REGISTERS = ("h", "t1", "t2", "g")


class Party(str, Enum):
    ALICE = "alice"
    BOB = "bob"


class OwnershipError(RuntimeError):
    pass


class IntegrityError(ValueError):
    pass


class ProtocolAbort(RuntimeError):
    """A failed honesty test; carries the step label and the round index."""

    def __init__(self, step: str, round_index: int, transcript: "Transcript | None" = None):
        super().__init__(f"detection at {step} in round {round_index}")
        self.step = step
        self.round_index = round_index
        self.transcript = transcript


@dataclass(frozen=True)
class ProtocolParams:
    m: int
    n: int

    def __post_init__(self) -> None:
        if self.m < 1 or self.n < 1:
            raise ValueError("need m >= 1 and n >= 1")

    @property
    def d(self) -> int:
        return self.m + 2

    @property
    def N(self) -> int:
        return 1 << self.m

    @property
    def D(self) -> int:
        return 1 << self.d


@dataclass
class AliceRound:
    x: int
    c: tuple[int, int, int, int]

    @property
    def p(self) -> int:
        return 2 * self.x + 1


@dataclass
class BobRound:
    y: int
    v_share: int
    k: tuple[int, int, int]
    D: int

    @property
    def q(self) -> int:
        return 2 * self.y + 1

    @property
    def s(self) -> int:
        return (4 * self.v_share - 2 * self.y - 1) % self.D


def bondage_values(p: int, c: Sequence[int], k: Sequence[int], D: int) -> tuple[int, int]:
    """``r1 = k1 + p k2 + c3 k3`` and ``r2 = c1 k1 + c2 k2 + c4 k3`` (mod D)."""
    c1, c2, c3, c4 = c
    k1, k2, k3 = k
    return (k1 + p * k2 + c3 * k3) % D, (c1 * k1 + c2 * k2 + c4 * k3) % D


def alice_answer(a: AliceRound, k: Sequence[int], D: int) -> tuple[int, int]:
    """Alice's reply to Bob's question: ``r3 = r1^-1`` and ``r4 = c1 - r2 r3``."""
    r1, r2 = bondage_values(a.p, a.c, k, D)
    r3 = mod_inv(r1, D.bit_length() - 1)
    return r3, (a.c[0] - r2 * r3) % D


class Session:
    """One round's joint state plus the owner of every register."""

    def __init__(self, d: int, registers: Sequence[str] = REGISTERS, owner: Party = Party.ALICE):
        self.layout = RegisterLayout.uniform(registers, d)
        self.state = StateVector.basis(self.layout)
        self.owners = {r: owner for r in registers}
        self.d = d

    @property
    def D(self) -> int:
        return 1 << self.d

    def _check(self, party: Party, regs: Sequence[str]) -> None:
        for r in regs:
            if r not in self.owners:
                raise KeyError(f"unknown register {r!r}")
            if self.owners[r] != party:
                raise OwnershipError(f"{party.value} does not hold register {r!r}")

    def apply(self, party: Party, gate: Callable[..., StateVector], *regs: str, **params) -> None:
        self._check(party, regs)
        self.state = gate(self.state, *regs, *params.values())

    def measure(self, party: Party, reg: str, rng: np.random.Generator) -> sim.MeasurementOutcome:
        self._check(party, [reg])
        out = sim.measure(self.state, reg, rng)
        self.state = out.posterior
        return out

    def send(self, sender: Party, receiver: Party, *regs: str) -> None:
        self._check(sender, regs)
        for r in regs:
            self.owners[r] = receiver

    def add_register(self, party: Party, name: str, value: int = 0) -> None:
        """A fresh local register (an attacker's probe, a scratch qubit bank)."""
        self.state = sim.extend(self.state, name, self.d, value)
        self.layout = self.state.layout
        self.owners[name] = party

    def discard(self, party: Party, reg: str) -> int:
        """Set aside a register already collapsed to a basis value."""
        self._check(party, [reg])
        value, self.state = sim.discard(self.state, reg)
        self.layout = self.state.layout
        del self.owners[reg]
        return value

    def copy(self) -> "Session":
        other = object.__new__(Session)
        other.layout, other.d = self.layout, self.d
        other.state = self.state.copy()
        other.owners = dict(self.owners)
        return other

    def prob_zero(self, regs: Sequence[str]) -> float:
        p = self.state.probabilities(list(regs))
        return float(p[(0,) * len(regs)])


# ------------------------------------------------------------------ steps

def alice_input_step(sess: Session, a: AliceRound) -> Session:
    """Prepare ``sum_j |j>|j+c1>|j p + c2>|j c3 + c4>`` and hand ``t1, t2, g`` to Bob."""
    if abs(sess.state.amps.flat[0]) < 1 - END_TO_END_TOL:
        raise ValueError("alice_input_step needs all registers in |0>")
    c1, c2, c3, c4 = a.c
    A = Party.ALICE
    sess.apply(A, sim.apply_qft, "h", inverse=False)
    for t in ("t1", "t2", "g"):
        sess.apply(A, sim.apply_xor, "h", t)
    sess.apply(A, sim.apply_mul, "t2", b=a.p % sess.D)
    sess.apply(A, sim.apply_mul, "g", b=c3)
    sess.apply(A, sim.apply_sum, "t1", b=c1)
    sess.apply(A, sim.apply_sum, "t2", b=c2)
    sess.apply(A, sim.apply_sum, "g", b=c4)
    sess.send(A, Party.BOB, "t1", "t2", "g")
    return sess


def bondage_step(sess: Session, k: Sequence[int]) -> Session:
    """Bob folds ``t1, t2`` into ``g``; afterwards ``g`` holds ``j r1 + r2``."""
    k1, k2, k3 = k
    if any(x % 2 == 0 for x in k):
        raise ValueError(f"bondage multipliers must be odd, got {tuple(k)}")
    B = Party.BOB
    sess.apply(B, sim.apply_mul, "t1", b=k1)
    sess.apply(B, sim.apply_mul, "t2", b=k2)
    sess.apply(B, sim.apply_mul, "g", b=k3)
    sess.apply(B, sim.apply_bsum, "t1", "g")
    sess.apply(B, sim.apply_bsum, "t2", "g")
    sess.apply(B, sim.apply_mul, "t1", b=mod_inv(k1, sess.d))
    sess.apply(B, sim.apply_mul, "t2", b=mod_inv(k2, sess.d))
    return sess


def bob_input_step(sess: Session, s: int, q: int) -> Session:
    """Imprint ``omega**(j M)`` with ``M = s + p q`` through two rotations."""
    sess.apply(Party.BOB, sim.apply_rot, "t1", b=s % sess.D)
    sess.apply(Party.BOB, sim.apply_rot, "t2", b=q % sess.D)
    return sess


@dataclass
class TestResult:
    passed: bool
    p_pass: float


def alice_test_gates(sess: Session, r3: int, r4: int) -> Session:
    """``g -> (g r3 + r4) xor t1``; an honest ``g`` returns to ``|0>``."""
    if r3 % 2 == 0:
        raise ValueError("r3 must be odd")
    B = Party.BOB
    sess.apply(B, sim.apply_mul, "g", b=r3 % sess.D)
    sess.apply(B, sim.apply_sum, "g", b=r4 % sess.D)
    sess.apply(B, sim.apply_xor, "t1", "g")
    return sess


def alice_honesty_test(sess: Session, r3: int, r4: int, rng: np.random.Generator) -> TestResult:
    """Bob unwinds the bondage on ``g`` with Alice's answer and measures it."""
    alice_test_gates(sess, r3, r4)
    p0 = sess.prob_zero(["g"])
    out = sess.measure(Party.BOB, "g", rng)
    return TestResult(out.value == 0, p0)


def bob_honesty_test(sess: Session, c1: int, c2: int, p: int, rng: np.random.Generator) -> TestResult:
    """Alice strips her randomisers from ``t1, t2`` and checks both read zero."""
    A = Party.ALICE
    D = sess.D
    sess.apply(A, sim.apply_sum, "t1", b=(-c1) % D)
    sess.apply(A, sim.apply_sum, "t2", b=(-c2) % D)
    sess.apply(A, sim.apply_mul, "t2", b=mod_inv(p, sess.d))
    sess.apply(A, sim.apply_xor, "h", "t1")
    sess.apply(A, sim.apply_xor, "h", "t2")
    p0 = sess.prob_zero(["t1", "t2"])
    o1 = sess.measure(A, "t1", rng)
    o2 = sess.measure(A, "t2", rng)
    return TestResult(o1.value == 0 and o2.value == 0, p0)


def extract_result(sess: Session, rng: np.random.Generator, strict: bool = True) -> int:
    """Inverse QFT on ``h`` and measure; ``strict`` demands a single certain outcome."""
    sess.apply(Party.ALICE, sim.apply_qft, "h", inverse=True)
    if strict:
        probs = sess.state.probabilities("h")
        if probs.max() < 1 - END_TO_END_TOL:
            raise RuntimeError(
                f"h is not concentrated (max probability {probs.max():.6f}); residual entanglement"
            )
    return sess.measure(Party.ALICE, "h", rng).value


def compute_output(M_list: Sequence[int], x_list: Sequence[int], params: ProtocolParams) -> int:
    total = sum(M - 2 * x for M, x in zip(M_list, x_list)) % params.D
    if total % 4:
        raise IntegrityError(f"sum(M_i - 2 x_i) mod D = {total} is not a multiple of 4")
    return total // 4


# ------------------------------------------------------------ strategies

class AliceStrategy:
    """Honest Alice. Attack strategies override single steps."""

    party = Party.ALICE
    name = "honest"
    registers = REGISTERS

    def prepare(self, sess: Session, a: AliceRound) -> None:
        alice_input_step(sess, a)

    def answer(self, a: AliceRound, k: Sequence[int], D: int) -> tuple[int, int]:
        return alice_answer(a, k, D)

    def verify_bob(self, sess: Session, a: AliceRound, rng: np.random.Generator) -> TestResult:
        return bob_honesty_test(sess, a.c[0], a.c[1], a.p, rng)

    def result(self, sess: Session, rng: np.random.Generator) -> int:
        return extract_result(sess, rng)


class SamplingAlice(AliceStrategy):
    """Honest Alice that also records a ``shots``-sample histogram of ``M`` per round."""

    name = "honest_sampling"

    def __init__(self, shots: int, rng: np.random.Generator):
        self.shots = shots
        self.rng = rng
        self.histograms: list[np.ndarray] = []

    def result(self, sess: Session, rng: np.random.Generator) -> int:
        sess.apply(Party.ALICE, sim.apply_qft, "h", inverse=True)
        self.histograms.append(sim.sample_counts(sess.state, "h", self.shots, self.rng))
        # undo so the shared extraction path (with its concentration check) runs unchanged
        sess.apply(Party.ALICE, sim.apply_qft, "h", inverse=False)
        return extract_result(sess, rng)


class BobStrategy:
    party = Party.BOB
    name = "honest"

    def bondage(self, sess: Session, b: BobRound) -> None:
        bondage_step(sess, b.k)

    def inputs(self, sess: Session, b: BobRound) -> None:
        bob_input_step(sess, b.s, b.q)

    def question(self, b: BobRound) -> tuple[int, int, int]:
        return b.k

    def verify_alice(self, sess: Session, r3: int, r4: int, rng: np.random.Generator) -> TestResult:
        return alice_honesty_test(sess, r3, r4, rng)

    def before_return(self, sess: Session, b: BobRound, rng: np.random.Generator) -> None:
        pass


# ------------------------------------------------------------ transcript

@dataclass
class RoundRecord:
    i: int
    c: list[int]
    k: list[int]
    r: list[int]
    alice_test: bool | None = None
    bob_test: bool | None = None
    M: int | None = None
    p_alice_pass: float | None = None
    p_bob_pass: float | None = None


@dataclass
class Transcript:
    seed: int | None
    m: int
    n: int
    v_shares: list[int] = field(default_factory=list)
    rounds: list[RoundRecord] = field(default_factory=list)
    output: int | None = None
    detections: list[dict] = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, data: dict) -> "Transcript":
        rounds = [RoundRecord(**r) for r in data.get("rounds", [])]
        return cls(**{**data, "rounds": rounds})


def odd(rng: np.random.Generator, D: int) -> int:
    return int(2 * rng.integers(0, D // 2) + 1)


def draw_c(rng: np.random.Generator, D: int) -> tuple[int, int, int, int]:
    c1, c2, c4 = (int(v) for v in rng.integers(0, D, size=3))
    return c1, c2, odd(rng, D), c4


def draw_k(rng: np.random.Generator, D: int) -> tuple[int, int, int]:
    return odd(rng, D), odd(rng, D), odd(rng, D)


def split_v(v: int, n: int, params: ProtocolParams, rng: np.random.Generator,
            pinned: Sequence[int] | None = None) -> list[int]:
    head = list(pinned) if pinned is not None else [int(z) for z in rng.integers(0, params.N, size=n - 1)]
    if len(head) != n - 1:
        raise ValueError(f"need {n - 1} pinned shares, got {len(head)}")
    return head + [derive_vn(v, head, params.m)]


def run_until_return(params: ProtocolParams, i: int, a: AliceRound, b: BobRound,
                     alice: AliceStrategy, bob: BobStrategy, rng: np.random.Generator,
                     ) -> tuple[Session, RoundRecord, str | None]:
    """Steps 1 to 4; on a passed test Bob sets the collapsed ``g`` aside."""
    D = params.D
    sess = Session(params.d, alice.registers)
    alice.prepare(sess, a)
    bob.bondage(sess, b)
    bob.inputs(sess, b)
    claimed = bob.question(b)
    r3, r4 = alice.answer(a, claimed, D)
    r1, r2 = bondage_values(a.p, a.c, b.k, D)
    rec = RoundRecord(i, list(a.c), list(b.k), [r1, r2, r3, r4])
    t4 = bob.verify_alice(sess, r3, r4, rng)
    rec.alice_test, rec.p_alice_pass = t4.passed, t4.p_pass
    if not t4.passed:
        return sess, rec, "alice_honesty_test"
    sess.discard(Party.BOB, "g")
    return sess, rec, None


def finish_round(sess: Session, rec: RoundRecord, a: AliceRound, b: BobRound,
                 alice: AliceStrategy, bob: BobStrategy, rng: np.random.Generator,
                 strict: bool = True) -> str | None:
    """Steps 5 and 6 on a session returned by :func:`run_until_return`."""
    bob.before_return(sess, b, rng)
    sess.send(Party.BOB, Party.ALICE, "t1", "t2")
    t5 = alice.verify_bob(sess, a, rng)
    rec.bob_test, rec.p_bob_pass = t5.passed, t5.p_pass
    if not t5.passed:
        return "bob_honesty_test"
    rec.M = alice.result(sess, rng) if strict else extract_result(sess, rng, strict=False)
    return None


def run_round(params: ProtocolParams, i: int, a: AliceRound, b: BobRound,
              alice: AliceStrategy, bob: BobStrategy, rng: np.random.Generator,
              strict: bool = True) -> tuple[RoundRecord, str | None]:
    """One operation-stage pass; returns the record and the failing step, if any."""
    sess, rec, failed = run_until_return(params, i, a, b, alice, bob, rng)
    if failed is None:
        failed = finish_round(sess, rec, a, b, alice, bob, rng, strict)
    return rec, failed


def run_protocol(x: Sequence[int], y: Sequence[int], v: int, params: ProtocolParams,
                 alice: AliceStrategy | None = None, bob: BobStrategy | None = None,
                 seed: int | None = 0, pinned: dict | None = None,
                 strict: bool = True) -> Transcript:
    """Preparation, ``n`` operation rounds and the output stage.

    ``pinned`` may fix ``v_shares`` (the first ``n-1``), ``c`` and ``k`` per
    round, bypassing the generator. A failed honesty test raises
    :class:`ProtocolAbort` with the partial transcript attached.
    """
    n, N, D = params.n, params.N, params.D
    if len(x) != n or len(y) != n:
        raise ValueError(f"vectors must have length n={n}")
    if not all(0 <= z < N for z in (*x, *y, v)):
        raise ValueError(f"inputs must lie in [0, {N})")
    alice = alice or AliceStrategy()
    bob = bob or BobStrategy()
    pinned = pinned or {}
    rng = np.random.default_rng(seed)

    shares = split_v(v, n, params, rng, pinned.get("v_shares"))
    tr = Transcript(seed, params.m, n, v_shares=shares)
    for i in range(n):
        c = tuple(pinned["c"][i]) if "c" in pinned else draw_c(rng, D)
        k = tuple(pinned["k"][i]) if "k" in pinned else draw_k(rng, D)
        a = AliceRound(x[i], c)
        b = BobRound(y[i], shares[i], k, D)
        rec, failed = run_round(params, i + 1, a, b, alice, bob, rng, strict=strict)
        tr.rounds.append(rec)
        if failed:
            tr.detections.append({"step": failed, "round": i + 1})
            raise ProtocolAbort(failed, i + 1, tr)
    tr.output = compute_output([r.M for r in tr.rounds], x, params)
    return tr


def scalar_product_oracle(x: Sequence[int], y: Sequence[int], v: int, N: int) -> int:
    return (sum(a * b for a, b in zip(x, y)) + v) % N
