"""Density operators, entropies and the privacy verifiers.

Classical messages (``r3, r4``) are kept as classical coordinates: a
classical-quantum state is a dict of unnormalised blocks keyed by the
classical value, so its entropy is the sum of the block entropies.
"""
from __future__ import annotations

import itertools
import json
from collections import defaultdict
from dataclasses import asdict, dataclass, field
from typing import Hashable, Iterable, Mapping, Sequence

import numpy as np

from . import sim
from .constants import EIG_CLAMP, END_TO_END_TOL
from .modmath import derive_vn, mod_inv, two_adic
from .protocol import (AliceRound, Party, Session, alice_answer, alice_input_step,
                       alice_test_gates, bondage_step, bob_input_step)
from .sim import RegisterLayout, StateVector

HERMITIAN_TOL = 1e-12

Blocks = Mapping[Hashable, np.ndarray]


def check_density(rho: np.ndarray, normalised: bool = True) -> np.ndarray:
    rho = np.asarray(rho, dtype=np.complex128)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise ValueError(f"density operator must be square, got shape {rho.shape}")
    if np.max(np.abs(rho - rho.conj().T), initial=0.0) > HERMITIAN_TOL:
        raise ValueError("density operator is not Hermitian")
    if normalised and abs(np.trace(rho).real - 1) > END_TO_END_TOL:
        raise ValueError(f"trace {np.trace(rho).real} != 1")
    return rho


def _reduced_factor(state: StateVector, keep: Sequence[str]) -> np.ndarray:
    """``A`` with ``rho_keep = A A^H``; rows index the kept registers."""
    if not keep:
        raise ValueError("keep set is empty")
    axes = [state.layout.axis(r) for r in keep]
    rest = [i for i in range(state.amps.ndim) if i not in axes]
    x = np.transpose(state.amps, axes + rest)
    dk = int(np.prod([state.layout.dim(r) for r in keep]))
    return x.reshape(dk, -1)


def partial_trace(state_or_rho, keep: Sequence[str] | str,
                  layout: RegisterLayout | None = None) -> np.ndarray:
    """Reduced density operator over ``keep`` (in the order given).

    A :class:`StateVector` carries its own layout; a bare matrix needs one.
    """
    if isinstance(keep, str):
        keep = [keep]
    if not keep:
        raise ValueError("keep set is empty")
    if isinstance(state_or_rho, StateVector):
        a = _reduced_factor(state_or_rho, keep)
        return a @ a.conj().T
    if layout is None:
        raise ValueError("a density matrix needs its register layout")
    rho = np.asarray(state_or_rho)
    shape = layout.shape
    n = len(shape)
    t = rho.reshape(shape + shape)
    k_axes = [layout.axis(r) for r in keep]
    letters = "abcdefghijklmnopqrstuvwxyz"
    row = list(letters[:n])
    col = list(letters[n:2 * n])
    for i in range(n):
        if i not in k_axes:
            col[i] = row[i]
    out = "".join(row[i] for i in k_axes) + "".join(col[i] for i in k_axes)
    red = np.einsum("".join(row) + "".join(col) + "->" + out, t)
    dk = int(np.prod([shape[i] for i in k_axes]))
    return red.reshape(dk, dk)


def _xlogx(p: np.ndarray) -> float:
    p = np.asarray(p, dtype=float)
    p = p[p > EIG_CLAMP]
    return float(np.sum(p * np.log2(p)))


def spectrum(rho: np.ndarray) -> np.ndarray:
    """Eigenvalues with the numerical noise floor clamped to zero."""
    w = np.linalg.eigvalsh(rho)
    w[w < EIG_CLAMP] = 0.0
    return w


def von_neumann_entropy(rho: np.ndarray) -> float:
    """``-sum lambda log2 lambda``; also fine for an unnormalised block."""
    return -_xlogx(spectrum(np.asarray(rho)))


def shannon_entropy(dist) -> float:
    """Entropy in bits of a probability table or an array of counts."""
    p = np.asarray(dist, dtype=float).ravel()
    if np.any(p < 0):
        raise ValueError("negative probability")
    total = p.sum()
    if total <= 0:
        raise ValueError("empty distribution")
    return -_xlogx(p / total)


def mutual_information(joint) -> float:
    """``I(X:Y)`` from a 2-D joint table (rows X, columns Y)."""
    j = np.asarray(joint, dtype=float)
    if j.ndim != 2:
        raise ValueError("joint table must be 2-D")
    return shannon_entropy(j.sum(1)) + shannon_entropy(j.sum(0)) - shannon_entropy(j)


def conditional_entropy(joint) -> float:
    """``H(X|Y)`` from a 2-D joint table (rows X, columns Y)."""
    j = np.asarray(joint, dtype=float)
    return shannon_entropy(j) - shannon_entropy(j.sum(0))


# ----------------------------------------------------------------- Holevo

@dataclass
class ClassicalQuantumEnsemble:
    """Labels ``x`` with priors and block-diagonal states ``rho_x``.

    Each state is a mapping from a classical coordinate to an unnormalised
    block; a plain matrix is the single-block case.
    """

    labels: list = field(default_factory=list)
    priors: list[float] = field(default_factory=list)
    states: list[dict] = field(default_factory=list)

    def add(self, label, prior: float, state) -> None:
        blocks = dict(state) if isinstance(state, Mapping) else {(): np.asarray(state)}
        self.labels.append(label)
        self.priors.append(float(prior))
        self.states.append(blocks)

    def validate(self) -> None:
        if abs(sum(self.priors) - 1) > END_TO_END_TOL:
            raise ValueError(f"priors sum to {sum(self.priors)}")
        for blocks in self.states:
            tr = sum(np.trace(b).real for b in blocks.values())
            if abs(tr - 1) > END_TO_END_TOL:
                raise ValueError(f"state trace {tr} != 1")
            for b in blocks.values():
                check_density(b, normalised=False)


def block_entropy(blocks: Blocks) -> float:
    return sum(von_neumann_entropy(b) for b in blocks.values())


def holevo_bound(ensemble: ClassicalQuantumEnsemble) -> float:
    """``S(sum p_x rho_x) - sum p_x S(rho_x)``."""
    ensemble.validate()
    avg: dict = {}
    for p, blocks in zip(ensemble.priors, ensemble.states):
        for key, b in blocks.items():
            avg[key] = avg.get(key, 0) + p * b
    return block_entropy(avg) - sum(
        p * block_entropy(blocks) for p, blocks in zip(ensemble.priors, ensemble.states))


def prop1_bound(alpha, beta, D: int, n_x: int, n_c: int) -> float:
    """Counting form of the Holevo bound for diagonal ensembles.

    ``alpha[x, b]`` counts ``(j, c)`` with string ``b`` under secret ``x``;
    ``beta[b]`` sums those over ``x``. Columns may be any common indexing
    of the strings (only the support matters).
    """
    alpha = np.asarray(alpha, dtype=np.int64)
    beta = np.asarray(beta, dtype=np.int64)
    if alpha.ndim != 2 or alpha.shape[0] != n_x or alpha.shape[1] != beta.size:
        raise ValueError(f"alpha must be ({n_x}, {beta.size}), got {alpha.shape}")
    if np.any(alpha.sum(1) != D * n_c):
        raise ValueError(f"every row of alpha must sum to D*|S_C| = {D * n_c}")
    if beta.sum() != D * n_x * n_c:
        raise ValueError(f"beta must sum to D*|S_X|*|S_C| = {D * n_x * n_c}")
    if np.any(alpha.sum(0) != beta):
        raise ValueError("beta is not the column sum of alpha")
    # xlogx written out to stay exact for large integer counts
    def xlx(a):
        a = a[a > 0].astype(float)
        return float(np.sum(a * np.log2(a)))
    total = D * n_x * n_c
    return float(np.log2(n_x) - (xlx(beta) - xlx(alpha)) / total)


# ----------------------------------------------------------------- Lemma 2

LEMMA2_MAX_D = 4


@dataclass
class Lemma2Tables:
    d: int
    k: tuple[int, int, int]
    with_g: bool
    n_x: int
    n_c: int
    image_size: int
    image_sizes_per_x: list[int]
    alpha_values: list[int]
    beta_values: list[int]
    expected_image: int


def bob_view_strings(d: int, k: Sequence[int], with_g: bool):
    """Every (x, string) pair of Bob's view, one entry per (j, c)."""
    D = 1 << d
    N = D >> 2
    k1, k2, k3 = k
    inv = np.zeros(D, dtype=np.int64)
    inv[1::2] = [mod_inv(a, d) for a in range(1, D, 2)]
    odd = np.arange(1, D, 2)
    full = np.arange(D)
    if with_g:
        grids = np.meshgrid(np.arange(N), full, full, full, odd, full, indexing="ij")
    else:
        grids = np.meshgrid(np.arange(N), full, full, full, np.ones(1, int), np.zeros(1, int),
                            indexing="ij")
    x, j, c1, c2, c3, c4 = (g.ravel().astype(np.int64) for g in grids)
    p = 2 * x + 1
    r1 = (k1 + p * k2 + c3 * k3) % D
    r2 = (c1 * k1 + c2 * k2 + c4 * k3) % D
    r3 = inv[r1]
    r4 = (c1 - r2 * r3) % D
    parts = [(j + c1) % D, (j * p + c2) % D]
    if with_g:
        parts.append((j * c3 + c4) % D)
    parts += [r3, r4]
    code = np.zeros_like(x)
    for part in parts:
        code = code * D + part
    n_c = (D ** 3 * (D // 2)) if with_g else D ** 2
    return x, code, N, n_c


def lemma2_counting(d: int, k: Sequence[int] = (1, 1, 1), with_g: bool = True):
    """Enumerate Bob's view and evaluate the counting bound.

    ``with_g=False`` drops register ``g`` from Bob's string and pins
    ``c3 = 1, c4 = 0`` so that ``r1`` stays invertible.
    """
    if not 3 <= d <= LEMMA2_MAX_D:
        raise ValueError(f"d={d} outside the enumerable range [3, {LEMMA2_MAX_D}]")
    if any(v % 2 == 0 for v in k):
        raise ValueError("k must be odd")
    D = 1 << d
    x, code, N, n_c = bob_view_strings(d, k, with_g)
    cols, inverse = np.unique(code, return_inverse=True)
    alpha = np.zeros((N, cols.size), dtype=np.int64)
    np.add.at(alpha, (x, inverse.ravel()), 1)
    beta = alpha.sum(0)
    bound = prop1_bound(alpha, beta, D, N, n_c)
    tables = Lemma2Tables(
        d, tuple(k), with_g, N, n_c,
        image_size=int(cols.size),
        image_sizes_per_x=[int(np.count_nonzero(row)) for row in alpha],
        alpha_values=sorted({int(a) for a in alpha[alpha > 0]}),
        beta_values=sorted({int(b) for b in beta}),
        expected_image=D ** 4 // 2,
    )
    return bound, tables


def lemma2_dense(d: int = 3, k: Sequence[int] = (1, 1, 1)) -> float:
    """Holevo quantity of Bob's view built from simulated states.

    Alice's Step-1 state is simulated for every ``(x, c)``; ``h`` is traced
    out and the reduced operators are grouped under Alice's classical answer
    ``(r3, r4)``. No diagonal form is assumed.
    """
    if not 3 <= d <= 3:
        raise ValueError("the dense path is limited to d = 3")
    D = 1 << d
    N = D >> 2
    n_c = D ** 3 * (D // 2)
    groups: dict = defaultdict(lambda: defaultdict(list))
    for x in range(N):
        for c1, c2, c3, c4 in itertools.product(range(D), range(D), range(1, D, 2), range(D)):
            a = AliceRound(x, (c1, c2, c3, c4))
            sess = Session(d)
            alice_input_step(sess, a)
            groups[alice_answer(a, k, D)][x].append(
                _reduced_factor(sess.state, ["t1", "t2", "g"]))
    prior = 1.0 / N
    total = 0.0
    for per_x in groups.values():
        avg = 0
        for x, factors in per_x.items():
            f = np.concatenate(factors, axis=1) / np.sqrt(n_c)
            block = f @ f.conj().T
            total -= prior * von_neumann_entropy(block)
            avg = avg + prior * block
        total += von_neumann_entropy(avg)
    return total


# ----------------------------------------------------------------- Lemma 1

def step3_family(d: int, x: int, c: Sequence[int], k: Sequence[int]) -> dict:
    """Joint Step-3 states for every odd pair ``(s, q)``, other inputs fixed."""
    out = {}
    D = 1 << d
    for s in range(1, D, 2):
        for q in range(1, D, 2):
            sess = Session(d)
            alice_input_step(sess, AliceRound(x, tuple(c)))
            bondage_step(sess, k)
            bob_input_step(sess, s, q)
            out[(s, q)] = sess.state
    return out


def _max_projector_gap(a: np.ndarray, b: np.ndarray) -> float:
    """``max |A A^H - B B^H|`` evaluated on the joint row support only."""
    rows = np.flatnonzero((np.abs(a) > 0).any(1) | (np.abs(b) > 0).any(1))
    a, b = a[rows], b[rows]
    return float(np.max(np.abs(a @ a.conj().T - b @ b.conj().T), initial=0.0))


def lemma1_check(states: Iterable[StateVector], keep: Sequence[str] = ("t1", "t2", "g")) -> float:
    """Largest entrywise gap between reduced operators of the family."""
    factors = [_reduced_factor(s, list(keep)) for s in states]
    return max((_max_projector_gap(f, g) for f, g in itertools.combinations(factors, 2)),
               default=0.0)


# ----------------------------------------------------------------- Lemma 3

@dataclass
class LeakageReport:
    attack: str
    leakage_bits: float
    bound_bits: float | None
    detected_fraction: float
    detected_convention: bool = True
    details: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.leakage_bits < -END_TO_END_TOL:
            raise ValueError(f"negative leakage {self.leakage_bits}")

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, default=str)


def lemma3_bound(d: int) -> float:
    return (d * d + d - 2) / (2 * (1 << d))


def _support_ensemble(states: Sequence[StateVector], keep: Sequence[str]) -> list[np.ndarray]:
    factors = [_reduced_factor(s, list(keep)) for s in states]
    rows = np.flatnonzero(np.any([(np.abs(f) > 0).any(1) for f in factors], axis=0))
    return [f[rows] @ f[rows].conj().T for f in factors]


def _forged_class(d: int, case: str, fold: int, r3: int, r4: int):
    """One forged round for a given bondage multiplier and Alice answer.

    Returns ``(p_pass, rho_list)`` where ``rho_list`` holds the normalised
    survivor states over ``(t1, t2)``, one per secret value.
    """
    D = 1 << d
    sess = Session(d, ("t1", "t2", "g"))
    forged = "t1" if case == "b" else "t2"
    sess.apply(Party.ALICE, sim.apply_qft, forged, inverse=False)
    sess.send(Party.ALICE, Party.BOB, "t1", "t2", "g")
    k = (fold, 1, 1) if case == "b" else (1, fold, 1)
    bondage_step(sess, k)
    # Bob's rotations are diagonal on t1, t2 and the test only permutes g
    # conditioned on t1, so they commute: test once, then rotate per secret.
    alice_test_gates(sess, r3, r4)
    p_pass, post = sim.project(sess.state, "g", 0)
    if post is None:
        return 0.0, []
    if case == "b":
        secrets = [(s, 1) for s in range(1, D, 2)]
    else:
        secrets = [(1, 2 * y + 1) for y in range(D >> 2)]
    states = []
    for s, q in secrets:
        t = Session(d, ("t1", "t2", "g"), owner=Party.BOB)
        t.state = post.copy()
        bob_input_step(t, s, q)
        states.append(t.state)
    return p_pass, _support_ensemble(states, ["t1", "t2"])


def lemma3_verifier(d: int, case: str = "b", r4: int = 0) -> LeakageReport:
    """Leakage of Bob's phase under Alice's forged-particle attack.

    Case ``b`` forges ``t1`` as a uniform superposition with ``t2 = g = 0``;
    case ``c`` forges ``t2`` instead. Both enumerate the bondage multiplier
    and Alice's ``r3`` over all odd values and weight each by its test pass
    probability; a detected run leaks nothing.
    """
    if not 3 <= d <= 6:
        raise ValueError(f"d={d} outside [3, 6]")
    if case not in ("b", "c"):
        raise ValueError(f"unknown forgery case {case!r}")
    D = 1 << d
    cache: dict = {}
    classes: dict = defaultdict(lambda: {"weight": 0.0, "p_pass": 0.0, "leak": 0.0})
    leak = passed = 0.0
    w = 1.0 / (D // 2) ** 2
    for fold in range(1, D, 2):
        for r3 in range(1, D, 2):
            u = fold * r3 % D
            if u not in cache:
                p_pass, rhos = _forged_class(d, case, fold, r3, r4)
                if rhos:
                    avg = sum(rhos) / len(rhos)
                    chi = von_neumann_entropy(avg) - sum(map(von_neumann_entropy, rhos)) / len(rhos)
                    eig = spectrum(avg)
                else:
                    chi, eig = 0.0, np.zeros(0)
                cache[u] = (p_pass, chi, eig)
            p_pass, chi, eig = cache[u]
            size = int(round(p_pass * D))
            cls = classes[size]
            cls["weight"] += w
            cls["p_pass"] = p_pass
            cls["leak"] = chi
            cls["eigenvalues"] = sorted({round(float(e), 12) for e in eig if e > 0})
            cls["multiplicity"] = int(np.count_nonzero(eig))
            leak += w * p_pass * chi
            passed += w * p_pass
    bound = lemma3_bound(d) if case == "b" else None
    details = {
        "case": case, "d": d, "r4": r4,
        "classes": {str(k): v for k, v in sorted(classes.items())},
    }
    return LeakageReport(f"forgery_{case}", leak, bound, 1.0 - passed, True, details)


def lemma3_closed_form(size: int) -> float:
    """Survivor entropy ``log2 |S_J| - 1`` in case (b)."""
    return float(np.log2(size) - 1)


def lemma3_class_weights(d: int) -> dict[int, float]:
    """``p_{|S_J|}`` for ``r4 = 0``: ``1/|S_J|`` below ``D`` and ``2/D`` at ``D``."""
    D = 1 << d
    out = {1 << l: 1.0 / (1 << l) for l in range(1, d)}
    out[D] = 2.0 / D
    return out


def solution_size(fold: int, r3: int, r4: int, d: int) -> int:
    """``|{j : j (1 - fold r3) = r4}|`` from valuations alone."""
    D = 1 << d
    a = (1 - fold * r3) % D
    da = two_adic(a, d).exponent
    dr = two_adic(r4, d).exponent
    return 0 if dr < da else 1 << da


# ----------------------------------------------------------------- Lemma 4

@dataclass
class Lemma4Result:
    n: int
    m: int
    info_bits: float
    h_xb: float
    h_xb_given_m: float
    h_u: float
    conditional_mi: float
    per_x: dict


LEMMA4_MAX_STATES = 1 << 22


def lemma4_verifier(n: int, m: int, x: Sequence[int] | None = None) -> Lemma4Result:
    """Alice's view of ``M_i - 2 x_i`` against Bob's inputs ``(y, v)``.

    Enumerates ``y``, ``v`` and the free shares; when ``x`` is omitted every
    Alice input is tried and the worst case is reported.
    """
    N = 1 << m
    D = N << 2
    if n < 1 or m < 1:
        raise ValueError("need n >= 1 and m >= 1")
    size = N ** (2 * n) * (N ** n if x is None else 1)
    if size > LEMMA4_MAX_STATES:
        raise ValueError(f"{size} configurations exceed the enumeration limit")
    xs = [tuple(x)] if x is not None else list(itertools.product(range(N), repeat=n))
    per_x = {}
    worst = None
    for xv in xs:
        xb_ids, m_ids, u_ids = [], [], []
        for ys in itertools.product(range(N), repeat=n):
            for v in range(N):
                for head in itertools.product(range(N), repeat=n - 1):
                    shares = list(head) + [derive_vn(v, list(head), m)]
                    mhat = tuple((4 * s + 4 * a * b) % D for s, a, b in zip(shares, xv, ys))
                    xb_ids.append(ys + (v,))
                    m_ids.append(mhat)
                    u_ids.append(sum(mhat) % D // 4)
        xb = _index(xb_ids)
        mm = _index(m_ids)
        uu = np.asarray(u_ids)
        joint = np.zeros((xb.max() + 1, mm.max() + 1))
        np.add.at(joint, (xb, mm), 1)
        h_xb = shannon_entropy(joint.sum(1))
        h_cond = conditional_entropy(joint)
        h_u = shannon_entropy(np.bincount(uu))
        # I(X_B : M | u) from its own joint table
        cmi = 0.0
        for val in np.unique(uu):
            sel = uu == val
            sub = np.zeros_like(joint)
            np.add.at(sub, (xb[sel], mm[sel]), 1)
            cmi += sel.mean() * mutual_information(sub)
        info = h_xb - h_cond - h_u
        per_x[xv] = (info, cmi)
        if worst is None or abs(info) > abs(worst[0]):
            worst = (info, h_xb, h_cond, h_u, cmi)
    info, h_xb, h_cond, h_u, cmi = worst
    return Lemma4Result(n, m, info, h_xb, h_cond, h_u, cmi, per_x)


def _index(items: list) -> np.ndarray:
    lookup: dict = {}
    return np.asarray([lookup.setdefault(t, len(lookup)) for t in items])
