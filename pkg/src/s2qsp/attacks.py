"""Adversary strategies and detection-rate campaigns.

Every attack is a protocol strategy that overrides one or more named steps;
the honest engine and its ownership checks stay untouched. Campaigns draw a
fresh round configuration per shot (or per batch of shots when the attack
acts after Step 4), run it through the simulator and compare the empirical
detection rate with the exact per-shot probability.
"""
from __future__ import annotations

import json
from collections import Counter, defaultdict
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import sim
from .infotheory import (bob_view_strings, lemma3_bound, lemma4_verifier,
                         solution_size, von_neumann_entropy)
from .modmath import mod_inv, solution_set
from .protocol import (AliceRound, AliceStrategy, BobRound, BobStrategy, Party,
                       ProtocolParams, Session, TestResult, alice_answer, alice_input_step,
                       bondage_values, draw_c, draw_k, odd, run_protocol, run_until_return,
                       finish_round)

SIGMAS = 4.0


@dataclass
class AttackStats:
    attack: str
    d: int
    shots: int
    detections: int
    empirical_rate: float
    analytic_rate: float
    sigma: float
    within_tolerance: bool
    ci_low: float
    ci_high: float
    leakage_bits: float | None = 0.0
    bound_bits: float | None = None
    detected_convention: bool = True
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, default=str)


def summarize(attack: str, d: int, detected: Sequence[bool], p_detect: Sequence[float],
              **kw) -> AttackStats:
    """Compare detections with their exact per-shot probabilities.

    The spread of a sum of independent Bernoulli trials with differing
    ``p`` is ``sqrt(sum p (1-p))``; a zero spread demands exact agreement.
    """
    shots = len(detected)
    if shots == 0:
        raise ValueError("no shots")
    hits = int(np.sum(detected))
    p = np.asarray(p_detect, dtype=float)
    rate = hits / shots
    analytic = float(p.mean())
    sigma = float(np.sqrt(np.sum(p * (1 - p)))) / shots
    ok = abs(rate - analytic) <= SIGMAS * sigma + 1e-12
    # Wilson score interval at the same z
    z = SIGMAS
    den = 1 + z * z / shots
    mid = (rate + z * z / (2 * shots)) / den
    half = z * np.sqrt(rate * (1 - rate) / shots + z * z / (4 * shots * shots)) / den
    return AttackStats(attack, d, shots, hits, rate, analytic, sigma, bool(ok),
                       float(max(0.0, mid - half)), float(min(1.0, mid + half)), **kw)


def random_round(params: ProtocolParams, rng: np.random.Generator) -> tuple[AliceRound, BobRound]:
    N, D = params.N, params.D
    a = AliceRound(int(rng.integers(N)), draw_c(rng, D))
    b = BobRound(int(rng.integers(N)), int(rng.integers(N)), draw_k(rng, D), D)
    return a, b


def pass_count(g_coeff: int, rhs: int, D: int) -> int:
    """``|{j : g_coeff j == rhs}|`` by brute force."""
    return len(solution_set(g_coeff, rhs, D.bit_length() - 1))


# ------------------------------------------------------------ forgery

class ForgeryAlice(AliceStrategy):
    """Alice swaps her entangled particles for plain superpositions.

    ``a``: uniform ``t1`` and ``t2``; ``b``: uniform ``t1`` only; ``c``:
    uniform ``t2`` only. ``h`` and any unforged particle stay ``|0>``;
    ``h`` never leaves Alice, so it is left out of the simulated layout.
    """

    registers = ("t1", "t2", "g")

    def __init__(self, case: str, rng: np.random.Generator, r4: int | None = None,
                 adaptive: bool = False):
        if case not in ("a", "b", "c"):
            raise ValueError(f"unknown forgery case {case!r}")
        self.case = case
        self.rng = rng
        self.r4 = r4
        self.adaptive = adaptive
        self.name = f"forgery_{case}"

    def prepare(self, sess: Session, a: AliceRound) -> None:
        forged = {"a": ("t1", "t2"), "b": ("t1",), "c": ("t2",)}[self.case]
        for reg in forged:
            sess.apply(Party.ALICE, sim.apply_qft, reg, inverse=False)
        sess.send(Party.ALICE, Party.BOB, "t1", "t2", "g")

    def answer(self, a: AliceRound, k: Sequence[int], D: int) -> tuple[int, int]:
        d = D.bit_length() - 1
        if self.adaptive:
            r3 = mod_inv(k[0] if self.case != "c" else k[1], d)
        else:
            r3 = odd(self.rng, D)
        if self.case == "a":
            r4 = int(self.rng.integers(D)) if self.r4 is None else self.r4
        else:
            r4 = 0 if self.r4 is None else self.r4
        return r3, r4 % D


def forgery_pass_probability(case: str, k: Sequence[int], r3: int, r4: int, D: int) -> float:
    """Exact chance that a forged round survives Bob's Step-4 check."""
    k1, k2, _ = k
    if case == "a":
        # one j' per j satisfies the test: j k1 r3 + j' k2 r3 + r4 = j
        hits = sum(pass_count(k2 * r3, j * (1 - k1 * r3) - r4, D) for j in range(D))
        return hits / (D * D)
    if case == "b":
        return pass_count(1 - k1 * r3, r4, D) / D
    # t1 stays |0>, so the test reads j k2 r3 + r4 = 0
    return pass_count(k2 * r3, -r4, D) / D


def forgery_attack_alice(case: str, params: ProtocolParams, shots: int = 4096, seed: int = 0,
                         r4: int | None = None, adaptive: bool = False) -> AttackStats:
    rng = np.random.default_rng(seed)
    alice = ForgeryAlice(case, rng, r4=r4, adaptive=adaptive)
    bob = BobStrategy()
    D, d = params.D, params.d
    detected, p_det = [], []
    by_size: dict = defaultdict(lambda: [0, 0])
    survivors: dict = {}
    leak = 0.0
    for shot in range(shots):
        a, b = random_round(params, rng)
        sess, rec, failed = run_until_return(params, shot, a, b, alice, bob, rng)
        r3, r4_sent = rec.r[2], rec.r[3]
        p_pass = forgery_pass_probability(case, b.k, r3, r4_sent, D)
        detected.append(failed is not None)
        p_det.append(1 - p_pass)
        if case == "b":
            size = solution_size(b.k[0], r3, r4_sent, d)
            by_size[size][0] += 1
            by_size[size][1] += failed is not None
            if failed is None:
                leak += np.log2(size) - 1
                if size not in survivors:
                    survivors[size] = sess.state.probabilities("t1").tolist()
    extra = {"case": case, "adaptive": adaptive}
    bound = leakage = None
    if case == "b":
        extra["by_size"] = {str(s): {"shots": n, "detected": k,
                                     "analytic": 1 - s / D} for s, (n, k) in sorted(by_size.items())}
        extra["survivor_t1_distribution"] = {str(s): v for s, v in survivors.items()}
        bound = lemma3_bound(d)
        # a detected round leaks nothing; a survivor holds log2|S_J| - 1 bits about s
        leakage = leak / shots
    return summarize(f"forgery_{case}", d, detected, p_det, leakage_bits=leakage,
                     bound_bits=bound, extra=extra)


# ------------------------------------------------------------ Bob after Step 4

class InterceptResendBob(BobStrategy):
    """Bob measures ``t1, t2`` and sends back basis states.

    ``forge`` names the particle(s) replaced by a fresh uniformly random
    basis state; the rest go back holding the measured value.
    """

    def __init__(self, forge: str = "t2"):
        if forge not in ("t1", "t2", "both", "none"):
            raise ValueError(f"unknown forge target {forge!r}")
        self.forge = forge
        self.name = f"intercept_{forge}"
        self.seen: list[int] = []

    def before_return(self, sess: Session, b: BobRound, rng: np.random.Generator) -> None:
        D = sess.D
        self.seen = []
        for reg in ("t1", "t2"):
            value = sess.measure(Party.BOB, reg, rng).value
            self.seen.append(value)
            if self.forge in (reg, "both"):
                fresh = int(rng.integers(D))
                sess.apply(Party.BOB, sim.apply_sum, reg, b=(fresh - value) % D)


def intercept_pass_probability(forge: str, D: int) -> float:
    """Enumerate resent values against one collapsed branch ``j = 0``."""
    c1 = c2 = 0
    p = 1
    t1_ok = sum(1 for r in range(D) if (r - c1) % D == 0) / D
    t2_ok = sum(1 for r in range(D) if (mod_inv(p, D.bit_length() - 1) * (r - c2)) % D == 0) / D
    return {"none": 1.0, "t1": t1_ok, "t2": t2_ok, "both": t1_ok * t2_ok}[forge]


class EntangleMeasureBob(BobStrategy):
    """Bob couples a probe ``e`` to ``t1`` through ``|j>|0> -> |j>|eps(j)>`` and reads it."""

    def __init__(self, eps: Sequence[int], measure_probe: bool = True):
        self.eps = list(eps)
        self.measure_probe = measure_probe
        self.name = "entangle_measure"

    def before_return(self, sess: Session, b: BobRound, rng: np.random.Generator) -> None:
        sess.add_register(Party.BOB, "e")
        sess.apply(Party.BOB, sim.apply_oracle, "t1", "e", table=self.eps)
        if self.measure_probe:
            sess.measure(Party.BOB, "e", rng)


def _post_test_campaign(bob: BobStrategy, params: ProtocolParams, shots: int, seed: int,
                        batch: int) -> tuple[list[bool], list[int | None], list[int]]:
    """Shots of a Bob deviation after Step 4; one honest configuration per batch.

    Returns Alice's Step-5 detections, her extracted ``M`` (``None`` when
    detected) and the honest ``M`` for each shot.
    """
    rng = np.random.default_rng(seed)
    honest = AliceStrategy()
    detected, got, want = [], [], []
    base = None
    for shot in range(shots):
        if shot % batch == 0:
            a, b = random_round(params, rng)
            base, rec0, failed = run_until_return(params, shot, a, b, honest, BobStrategy(), rng)
            if failed:
                raise RuntimeError("honest Step 4 failed")
            M_true = (b.s + a.p * b.q) % params.D
        sess = base.copy()
        rec = type(rec0)(**{**rec0.__dict__})
        failed = finish_round(sess, rec, a, b, honest, bob, rng, strict=False)
        detected.append(failed is not None)
        got.append(rec.M)
        want.append(M_true)
    return detected, got, want


def intercept_resend_bob(params: ProtocolParams, shots: int = 4096, seed: int = 0,
                         forge: str = "t2", batch: int = 64) -> AttackStats:
    bob = InterceptResendBob(forge)
    detected, got, want = _post_test_campaign(bob, params, shots, seed, batch)
    p = 1 - intercept_pass_probability(forge, params.D)
    kept = [g == w for g, w, det in zip(got, want, detected) if not det]
    extra = {"forge": forge, "undetected_M_correct": float(np.mean(kept)) if kept else None}
    return summarize(f"intercept_{forge}", params.d, detected, [p] * shots, extra=extra)


def entangle_measure_bob(eps: Sequence[int] | Callable[[int], int], params: ProtocolParams,
                         shots: int = 1024, seed: int = 0, batch: int = 64) -> AttackStats:
    """Detection rate and output damage of the probe attack.

    Alice's Step-5 test compares ``t1, t2`` with ``h``, which ``e`` never
    disturbs, so the test passes with certainty for every ``eps``. A
    non-constant ``eps`` instead decoheres ``h`` and randomises ``M``.
    """
    D = params.D
    table = [int(eps(j)) % D for j in range(D)] if callable(eps) else [int(v) % D for v in eps]
    bob = EntangleMeasureBob(table)
    detected, got, want = _post_test_campaign(bob, params, shots, seed, batch)
    kept = [g == w for g, w, det in zip(got, want, detected) if not det]
    extra = {"eps": table, "M_correct_fraction": float(np.mean(kept)) if kept else None,
             "analytic_M_correct": 1.0 if len(set(table)) == 1 else None}
    return summarize("entangle_measure", params.d, detected, [0.0] * shots, extra=extra)


def entangle_holevo(eps: Sequence[int], d: int = 3, k: Sequence[int] = (1, 1, 1),
                    s: int = 1, q: int = 1) -> float:
    """Holevo quantity of Bob's probe over Alice's ``x``.

    Enumerates every ``(x, c)``, simulates the honest round with Bob's probe
    attached after Step 4 and groups the probe's reduced state by Alice's
    classical answer ``(r3, r4)``.
    """
    if d != 3:
        raise ValueError("enumeration limited to d = 3")
    D = 1 << d
    N = D >> 2
    n_c = D ** 3 * (D // 2)
    blocks: dict = defaultdict(lambda: defaultdict(lambda: 0))
    params = ProtocolParams(d - 2, 1)
    rng = np.random.default_rng(0)
    honest_bob = BobStrategy()
    for x in range(N):
        for c1 in range(D):
            for c2 in range(D):
                for c3 in range(1, D, 2):
                    for c4 in range(D):
                        a = AliceRound(x, (c1, c2, c3, c4))
                        b = BobRound(0, 0, tuple(k), D)
                        sess = Session(d)
                        alice_input_step(sess, a)
                        honest_bob.bondage(sess, b)
                        sess.apply(Party.BOB, sim.apply_rot, "t1", b=s)
                        sess.apply(Party.BOB, sim.apply_rot, "t2", b=q)
                        r3, r4 = alice_answer(a, k, D)
                        honest_bob.verify_alice(sess, r3, r4, rng)
                        sess.discard(Party.BOB, "g")
                        sess.add_register(Party.BOB, "e")
                        sess.apply(Party.BOB, sim.apply_oracle, "t1", "e", table=list(eps))
                        rho = _reduced(sess.state, "e")
                        blocks[(r3, r4)][x] = blocks[(r3, r4)][x] + rho / n_c
    total = 0.0
    for per_x in blocks.values():
        avg = sum(per_x.values()) / N
        total += von_neumann_entropy(avg) - sum(von_neumann_entropy(r) for r in per_x.values()) / N
    return total


def _reduced(state: sim.StateVector, reg: str) -> np.ndarray:
    from .infotheory import partial_trace
    return partial_trace(state, [reg])


# ------------------------------------------------------------ false information

class FalseKBob(BobStrategy):
    """Bob reports bondage multipliers other than the ones he used."""

    def __init__(self, mode: str, rng: np.random.Generator):
        if mode not in ("random", "shift", "honest"):
            raise ValueError(f"unknown mode {mode!r}")
        self.mode, self.rng = mode, rng
        self.name = f"false_k_{mode}"

    def question(self, b: BobRound) -> tuple[int, int, int]:
        D = b.D
        if self.mode == "random":
            return draw_k(self.rng, D)
        if self.mode == "shift":
            # r1 survives any shift of k1 and k2 by D/2 because 1 + p is even
            return ((b.k[0] + D // 2) % D, (b.k[1] + D // 2) % D, b.k[2])
        return b.k


class FalseRAlice(AliceStrategy):
    """Alice prepares honestly but answers with wrong ``r3, r4``."""

    def __init__(self, mode: str, rng: np.random.Generator):
        if mode not in ("perturb_r4", "random", "honest"):
            raise ValueError(f"unknown mode {mode!r}")
        self.mode, self.rng = mode, rng
        self.name = f"false_r_{mode}"

    def answer(self, a: AliceRound, k: Sequence[int], D: int) -> tuple[int, int]:
        r3, r4 = alice_answer(a, k, D)
        if self.mode == "perturb_r4":
            return r3, (r4 + int(self.rng.integers(1, D))) % D
        if self.mode == "random":
            return odd(self.rng, D), int(self.rng.integers(D))
        return r3, r4


def honest_state_pass_probability(a: AliceRound, k: Sequence[int], r3: int, r4: int, D: int) -> float:
    """Step-4 pass chance of an honest state bonded with ``k`` against answer ``(r3, r4)``.

    ``g = j r1 + r2`` and ``t1 = j + c1``, so the test needs
    ``j (r1 r3 - 1) == c1 - r4 - r2 r3``.
    """
    r1, r2 = bondage_values(a.p, a.c, k, D)
    return pass_count(r1 * r3 - 1, a.c[0] - r4 - r2 * r3, D) / D


def false_info_attack(side: str, params: ProtocolParams, shots: int = 4096, seed: int = 0,
                      mode: str | None = None) -> AttackStats:
    rng = np.random.default_rng(seed)
    D = params.D
    if side == "bob_k":
        mode = mode or "random"
        alice, bob = AliceStrategy(), FalseKBob(mode, rng)
    elif side == "alice_r":
        mode = mode or "perturb_r4"
        alice, bob = FalseRAlice(mode, rng), BobStrategy()
    else:
        raise ValueError(f"unknown side {side!r}")
    detected, p_det = [], []
    for shot in range(shots):
        a, b = random_round(params, rng)
        _, rec, failed = run_until_return(params, shot, a, b, alice, bob, rng)
        r3, r4 = rec.r[2], rec.r[3]
        detected.append(failed is not None)
        p_det.append(1 - honest_state_pass_probability(a, b.k, r3, r4, D))
    return summarize(f"false_info_{side}", params.d, detected, p_det,
                     extra={"side": side, "mode": mode})


# ------------------------------------------------------------ measurement attack

class MeasuringBob(BobStrategy):
    """Bob skips his gates, waits for ``r3, r4`` and reads ``t1, t2, g``."""

    def __init__(self):
        self.name = "measurement"
        self.view: tuple | None = None

    def bondage(self, sess: Session, b: BobRound) -> None:
        pass

    def inputs(self, sess: Session, b: BobRound) -> None:
        pass

    def verify_alice(self, sess: Session, r3: int, r4: int, rng: np.random.Generator) -> TestResult:
        self.view = tuple(sess.measure(Party.BOB, r, rng).value for r in ("t1", "t2", "g")) + (r3, r4)
        return TestResult(True, 1.0)


def encode_view(view: Sequence[int], D: int) -> int:
    code = 0
    for part in view:
        code = code * D + part
    return code


def total_variation(p: dict, q: dict) -> float:
    keys = set(p) | set(q)
    return 0.5 * sum(abs(p.get(k, 0.0) - q.get(k, 0.0)) for k in keys)


@dataclass
class MeasurementReport:
    d: int
    shots: int
    k: tuple[int, int, int]
    tv_empirical: float
    noise_floor: float
    indistinguishable: bool
    exact_identical: bool
    g_marginal_uniform: bool
    control_tv: float | None
    control_distinguishable: bool | None
    histograms: dict = field(repr=False, default_factory=dict)

    def to_dict(self) -> dict:
        out = asdict(self)
        out.pop("histograms")
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def _measure_campaign(params: ProtocolParams, x: int, k: Sequence[int], shots: int,
                      rng: np.random.Generator, fixed_c=None) -> Counter:
    bob = MeasuringBob()
    alice = AliceStrategy()
    counts: Counter = Counter()
    for shot in range(shots):
        c = tuple(fixed_c) if fixed_c is not None else draw_c(rng, params.D)
        a = AliceRound(x, c)
        b = BobRound(0, 0, tuple(k), params.D)
        run_until_return(params, shot, a, b, alice, bob, rng)
        counts[encode_view(bob.view, params.D)] += 1
    return counts


def exact_view_distribution(d: int, k: Sequence[int]) -> dict[int, dict[int, float]]:
    """Bob's exact view distribution per ``x`` by enumeration of ``(j, c)``."""
    xs, codes, N, n_c = bob_view_strings(d, k, True)
    out = {}
    D = 1 << d
    for x in range(N):
        vals, cnt = np.unique(codes[xs == x], return_counts=True)
        out[x] = dict(zip(vals.tolist(), (cnt / (D * n_c)).tolist()))
    return out


def tv_noise_floor(dist: dict[int, float], shots: int, rng: np.random.Generator,
                   reps: int = 200) -> float:
    """Mean plus 4 sigma of the TV between two samples of the same law."""
    keys = list(dist)
    p = np.array([dist[k] for k in keys])
    p = p / p.sum()
    tvs = []
    for _ in range(reps):
        a = rng.multinomial(shots, p) / shots
        b = rng.multinomial(shots, p) / shots
        tvs.append(0.5 * np.abs(a - b).sum())
    return float(np.mean(tvs) + SIGMAS * np.std(tvs))


def measurement_attack_bob(params: ProtocolParams, shots: int = 4096, seed: int = 0,
                           xs: Sequence[int] = (0, 1), control: bool = True) -> MeasurementReport:
    """Bob's computational-basis view for two values of Alice's ``x``.

    The control pins ``c = (0, 0, 1, 0)`` (no masking; ``c3`` must stay odd)
    and should make the two views plainly distinguishable.
    """
    rng = np.random.default_rng(seed)
    D, d = params.D, params.d
    k = draw_k(rng, D)
    hist = {x: _measure_campaign(params, x, k, shots, rng) for x in xs}
    emp = {x: {c: n / shots for c, n in h.items()} for x, h in hist.items()}
    tv = total_variation(emp[xs[0]], emp[xs[1]])
    exact_ok = True
    floor = None
    g_uniform = True
    if d <= 4:
        exact = exact_view_distribution(d, k)
        ref = exact[xs[0]]
        exact_ok = all(total_variation(exact[x], ref) < 1e-12 for x in xs)
        floor = tv_noise_floor(ref, shots, rng)
        g = np.zeros(D)
        for code, pr in ref.items():
            g[(code // (D * D)) % D] += pr
        g_uniform = bool(np.allclose(g, 1 / D, atol=1e-12))
    ctl_tv = ctl_ok = None
    if control:
        n_ctl = max(1, shots // 8)
        ctl = {x: _measure_campaign(params, x, k, n_ctl, rng, fixed_c=(0, 0, 1, 0)) for x in xs}
        ce = {x: {c: n / n_ctl for c, n in h.items()} for x, h in ctl.items()}
        ctl_tv = total_variation(ce[xs[0]], ce[xs[1]])
        ctl_ok = floor is None or ctl_tv > floor
    return MeasurementReport(
        d, shots, tuple(k), tv, floor if floor is not None else float("nan"),
        floor is None or tv <= floor, exact_ok, g_uniform, ctl_tv, ctl_ok, hist)


# ------------------------------------------------------------ semi-honest Alice

def semi_honest_alice(params: ProtocolParams, x: Sequence[int], y: Sequence[int], v: int,
                      seed: int = 0) -> dict:
    """Alice follows the rules and keeps every ``M_i``; what can she infer?

    Her view ``M_i - 2 x_i`` must equal ``4 (v_i + x_i y_i)``; the mutual
    information with Bob's inputs beyond the output is delegated to the
    exhaustive enumeration.
    """
    tr = run_protocol(x, y, v, params, seed=seed)
    D = params.D
    view = [(r.M - 2 * xi) % D for r, xi in zip(tr.rounds, x)]
    expect = [4 * (s + xi * yi) % D for s, xi, yi in zip(tr.v_shares, x, y)]
    info = lemma4_verifier(params.n, params.m, x)
    return {
        "n": params.n, "m": params.m, "M": [r.M for r in tr.rounds],
        "view_matches_shares": view == expect,
        "output": tr.output,
        "info_bits": info.info_bits,
        "h_xb_given_view": info.h_xb_given_m,
    }
