"""Elementary-gate decompositions of the register gates.

Qubits are addressed as ``(register, bit)`` with ``bit`` the binary weight
inside the register. Phase gates carry their angle as exact turns
(``Fraction``), so ``P(i)`` on a ``d``-qubit register is ``P`` with
``turns = 2**i / 2**d``.
"""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Sequence

import numpy as np

from . import sim
from .constants import END_TO_END_TOL
from .modmath import mod_inv
from .sim import RegisterLayout, StateVector

Qubit = tuple[str, int]

KINDS = ("H", "P", "CP", "CNOT", "SWAP", "TOFFOLI", "CSUM")
_SQRT_HALF = 1 / np.sqrt(2)


@dataclass(frozen=True)
class ElementaryGate:
    kind: str
    targets: tuple[Qubit, ...]
    controls: tuple[Qubit, ...] = ()
    turns: Fraction | None = None
    addend: int | None = None

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ValueError(f"unknown gate kind {self.kind!r}")

    def dump(self) -> str:
        fmt = lambda q: f"{q[0]}[{q[1]}]"
        parts = [self.kind]
        if self.kind == "CSUM":
            parts.append(",".join(fmt(q) for q in self.targets))
        else:
            parts.extend(fmt(q) for q in self.targets)
        parts.extend(fmt(q) for q in self.controls)
        if self.turns is not None:
            parts.append(f"{self.turns.numerator}/{self.turns.denominator}")
        if self.addend is not None:
            parts.append(str(self.addend))
        return " ".join(parts)


@dataclass
class Circuit:
    gates: list[ElementaryGate] = field(default_factory=list)

    def __add__(self, other: "Circuit") -> "Circuit":
        return Circuit(self.gates + other.gates)

    def __len__(self) -> int:
        return len(self.gates)

    @property
    def counts(self) -> Counter:
        return Counter(g.kind for g in self.gates)

    def expanded(self) -> "Circuit":
        """Replace every controlled slice adder by its Draper realisation."""
        out: list[ElementaryGate] = []
        for g in self.gates:
            out.extend(_expand_csum(g) if g.kind == "CSUM" else [g])
        return Circuit(out)

    def dump(self) -> str:
        return "\n".join(g.dump() for g in self.gates)

    def qubits(self) -> set[Qubit]:
        return {q for g in self.gates for q in g.targets + g.controls}


def _reg(name: str, d: int) -> list[Qubit]:
    return [(name, i) for i in range(d)]


# ---------------------------------------------------------------- builders

def qft_gates(qubits: Sequence[Qubit], inverse: bool = False) -> list[ElementaryGate]:
    """H/CP ladder plus bit-reversal swaps; ``qubits`` listed LSB first."""
    n = len(qubits)
    gates: list[ElementaryGate] = []
    for t in range(n - 1, -1, -1):
        gates.append(ElementaryGate("H", (qubits[t],)))
        for c in range(t - 1, -1, -1):
            gates.append(ElementaryGate("CP", (qubits[t],), (qubits[c],), Fraction(1, 2 ** (t - c + 1))))
    for i in range(n // 2):
        gates.append(ElementaryGate("SWAP", (qubits[i], qubits[n - 1 - i])))
    if inverse:
        gates = [
            ElementaryGate(g.kind, g.targets, g.controls, -g.turns if g.turns is not None else None)
            for g in reversed(gates)
        ]
    return gates


def rot_gates(qubits: Sequence[Qubit], b: int) -> list[ElementaryGate]:
    """One ``P(i+k)`` on qubit ``i`` for each set bit ``k`` of ``b``; identities skipped."""
    n = len(qubits)
    gates = []
    for k in range(n):
        if (b >> k) & 1:
            for i in range(n - k):
                gates.append(ElementaryGate("P", (qubits[i],), turns=Fraction(2 ** (i + k), 2**n)))
    return gates


def brot_gates(src: Sequence[Qubit], dst: Sequence[Qubit]) -> list[ElementaryGate]:
    """``|a>|b> -> omega**(ab) |a>|b>`` as ``CP(i+k)`` on ``(src_i, dst_k)``."""
    n = len(dst)
    return [
        ElementaryGate("CP", (dst[k],), (src[i],), Fraction(2 ** (i + k), 2**n))
        for i in range(len(src))
        for k in range(n)
        if i + k < n
    ]


def build_qft(d: int, reg: str = "h", inverse: bool = False) -> Circuit:
    if d < 1:
        raise ValueError("d must be at least 1")
    return Circuit(qft_gates(_reg(reg, d), inverse))


def build_rot(b: int, d: int, reg: str = "h") -> Circuit:
    if not 0 <= b < 2**d:
        raise ValueError(f"b={b} outside [0, 2**{d})")
    return Circuit(rot_gates(_reg(reg, d), b))


def build_draper_sum(b: int, d: int, reg: str = "h") -> Circuit:
    if not 0 <= b < 2**d:
        raise ValueError(f"b={b} outside [0, 2**{d})")
    q = _reg(reg, d)
    return Circuit(qft_gates(q) + rot_gates(q, b) + qft_gates(q, inverse=True))


def build_bsum(d: int, src: str = "h", dst: str = "t") -> Circuit:
    s, t = _reg(src, d), _reg(dst, d)
    return Circuit(qft_gates(t) + brot_gates(s, t) + qft_gates(t, inverse=True))


def build_xor(d: int, src: str = "h", dst: str = "t") -> Circuit:
    return Circuit([ElementaryGate("CNOT", ((dst, i),), ((src, i),)) for i in range(d)])


def build_special_mul(b: int, d: int, reg: str = "h") -> Circuit:
    """Ancilla-free ``MUL(b)`` for odd ``b`` modulo ``2**d``.

    With ``w = (b - 1) / 2``, step ``l = 1 .. d-1`` adds ``w mod 2**l`` to the
    top ``l`` qubits, controlled by qubit ``d-1-l``. Controls are never
    touched by earlier steps, so the cascade computes ``a + 2 w a = a b``.
    """
    if b % 2 == 0:
        raise ValueError(f"MUL({b}): multiplier must be odd")
    w = (b - 1) // 2
    q = _reg(reg, d)
    gates = []
    for l in range(1, d):
        gates.append(ElementaryGate("CSUM", tuple(q[d - l:]), (q[d - 1 - l],), addend=w % 2**l))
    return Circuit(gates)


def bmul_gates(src: Sequence[Qubit], dst: Sequence[Qubit], c: int) -> list[ElementaryGate]:
    """``|a>|y> -> |a>|y + c a>`` in Fourier space.

    The controlled additions ``SUM(2**i c)^{a_i}`` share one QFT pair, and the
    phases landing on each ``(a_i, y_k)`` pair merge into a single ``CP``.
    """
    n = len(dst)
    mid = []
    for i, qa in enumerate(src):
        for k, qy in enumerate(dst):
            num = (c * 2 ** (i + k)) % 2**n
            if num:
                mid.append(ElementaryGate("CP", (qy,), (qa,), Fraction(num, 2**n)))
    return qft_gates(dst) + mid + qft_gates(dst, inverse=True)


def build_shor_mul(b: int, d: int, reg: str = "h", scratch: str = "s") -> Circuit:
    """``MUL(b)`` through a zeroed scratch register, the textbook route.

    ``|a>|0> -> |a>|ab> -> |0>|ab> -> |ab>|0>`` using two multiply-accumulate
    passes and a three-XOR swap.
    """
    if b % 2 == 0:
        raise ValueError(f"MUL({b}): multiplier must be odd")
    D = 2**d
    h, s = _reg(reg, d), _reg(scratch, d)
    neg_inv = (-mod_inv(b, d)) % D
    swap = build_xor(d, reg, scratch).gates + build_xor(d, scratch, reg).gates + build_xor(d, reg, scratch).gates
    return Circuit(bmul_gates(h, s, b) + bmul_gates(s, h, neg_inv) + swap)


def _expand_csum(g: ElementaryGate) -> list[ElementaryGate]:
    l = len(g.targets)
    addend = g.addend % 2**l
    if addend == 0:
        return []
    (ctrl,) = g.controls
    mid = []
    for s, q in enumerate(g.targets):
        num = (addend * 2**s) % 2**l
        if num:
            mid.append(ElementaryGate("CP", (q,), (ctrl,), Fraction(num, 2**l)))
    return qft_gates(g.targets) + mid + qft_gates(g.targets, inverse=True)


# ---------------------------------------------------------------- execution

def _phase_of(turns: Fraction) -> complex:
    return complex(np.exp(2j * np.pi * float(turns)))


def apply_circuit(state: StateVector, circuit: Circuit) -> StateVector:
    layout = state.layout
    T = layout.total_qubits
    v = state.amps.reshape(-1).copy().reshape((2,) * T)

    def ax(q: Qubit) -> int:
        try:
            return layout.qubit_axis(*q)
        except KeyError as exc:
            raise IndexError(f"qubit {q} not in layout") from exc

    def sl(fixed: dict[int, int]):
        idx: list = [slice(None)] * T
        for a, val in fixed.items():
            idx[a] = val
        return tuple(idx)

    def swap_slices(i: tuple, j: tuple) -> None:
        tmp = v[i].copy()
        v[i] = v[j]
        v[j] = tmp

    for g in circuit.expanded().gates:
        axes = [ax(q) for q in g.controls + g.targets]
        if len(set(axes)) != len(axes):
            raise ValueError(f"gate {g.dump()} repeats a qubit")
        if g.kind == "H":
            (t,) = axes
            i0, i1 = sl({t: 0}), sl({t: 1})
            a0, a1 = v[i0].copy(), v[i1].copy()
            v[i0] = (a0 + a1) * _SQRT_HALF
            v[i1] = (a0 - a1) * _SQRT_HALF
        elif g.kind == "P":
            (t,) = axes
            v[sl({t: 1})] *= _phase_of(g.turns)
        elif g.kind == "CP":
            c, t = axes
            v[sl({c: 1, t: 1})] *= _phase_of(g.turns)
        elif g.kind in ("CNOT", "TOFFOLI"):
            *cs, t = axes
            on = {c: 1 for c in cs}
            swap_slices(sl({**on, t: 0}), sl({**on, t: 1}))
        elif g.kind == "SWAP":
            p, q = axes
            swap_slices(sl({p: 0, q: 1}), sl({p: 1, q: 0}))
        else:  # pragma: no cover - expanded() removes CSUM
            raise AssertionError(g.kind)
    return StateVector(layout, v.reshape(layout.shape))


# ---------------------------------------------------------------- accounting

def _family_builders() -> dict[str, Callable[[int], Circuit]]:
    return {
        "QFT": lambda d: build_qft(d),
        "ROT": lambda d: build_rot(2**d - 1, d),
        "SUM": lambda d: build_draper_sum(2**d - 1, d),
        "BSUM": lambda d: build_bsum(d),
        "MUL": lambda d: build_shor_mul(2**d - 1, d),
        "MUL_SPECIAL": lambda d: build_special_mul(2**d - 1, d),
        "XOR": lambda d: build_xor(d),
    }


FAMILIES = tuple(_family_builders())


def _fit_quadratic_coeff(ds: Sequence[int], counts: Sequence[int]) -> float:
    x = np.asarray(ds, dtype=float) ** 2
    y = np.asarray(counts, dtype=float)
    return float(x @ y / (x @ x))


@dataclass
class ScalingRow:
    family: str
    counts: dict[int, int]
    top_level: dict[int, int]
    c_full: float
    c_low: float
    c_high: float

    @property
    def quadratic_stable(self) -> bool:
        return all(abs(c - self.c_full) <= 0.2 * self.c_full for c in (self.c_low, self.c_high))

    @property
    def linear_exact(self) -> bool:
        return all(n == d for d, n in self.counts.items())

    def as_dict(self) -> dict:
        return {
            "family": self.family,
            "counts": self.counts,
            "top_level": self.top_level,
            "c_full": self.c_full,
            "c_low": self.c_low,
            "c_high": self.c_high,
            "quadratic_stable": self.quadratic_stable,
        }


def gate_count_scaling(family: str, d_range: Iterable[int] = range(2, 9)) -> ScalingRow:
    """Elementary gate counts per register width and the fitted ``c`` of ``c d**2``.

    ``c`` is least-squares fitted on the full range and separately on its
    lower and upper halves (sharing the middle point); the family scales as
    ``d**2`` when all three agree within 20 %. Worst-case parameters
    (``b = D - 1``) are used.
    """
    build = _family_builders()[family]
    ds = sorted(d_range)
    top = {d: len(build(d)) for d in ds}
    counts = {d: len(build(d).expanded()) for d in ds}
    mid = len(ds) // 2
    lo, hi = ds[: mid + 1], ds[mid:]
    return ScalingRow(
        family,
        counts,
        top,
        _fit_quadratic_coeff(ds, [counts[d] for d in ds]),
        _fit_quadratic_coeff(lo, [counts[d] for d in lo]),
        _fit_quadratic_coeff(hi, [counts[d] for d in hi]),
    )


@dataclass
class EquivalenceRow:
    family: str
    d: int
    cases: int
    max_error: float

    def ok(self, tol: float = END_TO_END_TOL) -> bool:
        return self.max_error < tol


def _max_error(layout: RegisterLayout, circuit: Circuit, semantic, inputs) -> tuple[int, float]:
    worst, n = 0.0, 0
    for values in inputs:
        s = StateVector.basis(layout, **values)
        diff = apply_circuit(s, circuit).amps - semantic(s).amps
        worst = max(worst, float(np.max(np.abs(diff))))
        n += 1
    return n, worst


def check_equivalence(d: int) -> list[EquivalenceRow]:
    """Every decomposition against its semantic gate on all basis inputs at width ``d``."""
    D = 1 << d
    one = RegisterLayout((("h", d),))
    two = RegisterLayout((("h", d), ("t", d)))
    shor = RegisterLayout((("h", d), ("s", d)))
    singles = [{"h": a} for a in range(D)]
    pairs = [{"h": a, "t": b} for a in range(D) for b in range(D)]
    rows = []

    def add(family, layout, circuits_and_semantics, inputs):
        total, worst = 0, 0.0
        for circ, sem in circuits_and_semantics:
            n, err = _max_error(layout, circ, sem, inputs)
            total += n
            worst = max(worst, err)
        rows.append(EquivalenceRow(family, d, total, worst))

    add("QFT", one, [(build_qft(d), lambda s: sim.apply_qft(s, "h"))], singles)
    add("QFT_INV", one, [(build_qft(d, inverse=True), lambda s: sim.apply_qft(s, "h", True))], singles)
    add("ROT", one, [(build_rot(b, d), lambda s, b=b: sim.apply_rot(s, "h", b)) for b in range(D)], singles)
    add("SUM", one, [(build_draper_sum(b, d), lambda s, b=b: sim.apply_sum(s, "h", b))
                     for b in range(D)], singles)
    add("BSUM", two, [(build_bsum(d), lambda s: sim.apply_bsum(s, "h", "t"))], pairs)
    add("XOR", two, [(build_xor(d), lambda s: sim.apply_xor(s, "h", "t"))], pairs)
    add("MUL_SPECIAL", one, [(build_special_mul(b, d), lambda s, b=b: sim.apply_mul(s, "h", b))
                             for b in range(1, D, 2)], singles)
    add("MUL", shor, [(build_shor_mul(b, d), lambda s, b=b: sim.apply_mul(s, "h", b))
                      for b in range(1, D, 2)], singles)
    return rows
