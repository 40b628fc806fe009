"""Register-structured state-vector simulator.

The amplitude array carries one axis per register, so a register gate acts
on a single axis and never touches a dense ``2**T x 2**T`` matrix. Within a
register the basis label is the plain integer ``a = sum_i a_i 2**i``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .constants import END_TO_END_TOL, MAX_QUBITS, MEASURE_NORM_TOL
from .modmath import mod_inv


@dataclass(frozen=True)
class RegisterLayout:
    registers: tuple[tuple[str, int], ...]

    def __post_init__(self) -> None:
        names = [n for n, _ in self.registers]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate register names in {names}")
        if any(w < 1 for _, w in self.registers):
            raise ValueError("register widths must be positive")
        if self.total_qubits > MAX_QUBITS:
            raise ValueError(f"{self.total_qubits} qubits exceeds the {MAX_QUBITS}-qubit guard")

    @classmethod
    def uniform(cls, names: Iterable[str], d: int) -> "RegisterLayout":
        return cls(tuple((n, d) for n in names))

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(n for n, _ in self.registers)

    @property
    def total_qubits(self) -> int:
        return sum(w for _, w in self.registers)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(1 << w for _, w in self.registers)

    def axis(self, name: str) -> int:
        for i, (n, _) in enumerate(self.registers):
            if n == name:
                return i
        raise KeyError(f"unknown register {name!r}")

    def width(self, name: str) -> int:
        return self.registers[self.axis(name)][1]

    def dim(self, name: str) -> int:
        return 1 << self.width(name)

    def qubit_axis(self, name: str, bit: int) -> int:
        """Axis of qubit ``bit`` (weight ``2**bit``) in the all-qubit view."""
        w = self.width(name)
        if not 0 <= bit < w:
            raise IndexError(f"bit {bit} outside register {name!r} of width {w}")
        offset = sum(width for _, width in self.registers[: self.axis(name)])
        return offset + (w - 1 - bit)


@dataclass
class StateVector:
    layout: RegisterLayout
    amps: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        self.amps = np.asarray(self.amps, dtype=np.complex128).reshape(self.layout.shape)

    @classmethod
    def basis(cls, layout: RegisterLayout, **values: int) -> "StateVector":
        amps = np.zeros(layout.shape, dtype=np.complex128)
        idx = []
        for name in layout.names:
            v = values.get(name, 0)
            if not 0 <= v < layout.dim(name):
                raise ValueError(f"value {v} out of range for register {name!r}")
            idx.append(v)
        amps[tuple(idx)] = 1.0
        return cls(layout, amps)

    @classmethod
    def from_terms(cls, layout: RegisterLayout, terms: dict[tuple[int, ...], complex]) -> "StateVector":
        """Build ``sum amp |labels>`` and normalise."""
        amps = np.zeros(layout.shape, dtype=np.complex128)
        for labels, a in terms.items():
            amps[tuple(labels)] += a
        amps /= np.linalg.norm(amps)
        return cls(layout, amps)

    def copy(self) -> "StateVector":
        return StateVector(self.layout, self.amps.copy())

    def norm(self) -> float:
        return float(np.linalg.norm(self.amps))

    def flat(self) -> np.ndarray:
        return self.amps.reshape(-1)

    def probabilities(self, regs: str | Sequence[str]) -> np.ndarray:
        """Marginal Born distribution over one or more registers (in given order)."""
        if isinstance(regs, str):
            regs = [regs]
        axes = [self.layout.axis(r) for r in regs]
        p = np.abs(self.amps) ** 2
        other = tuple(i for i in range(p.ndim) if i not in axes)
        p = p.sum(axis=other)
        order = np.argsort(np.argsort(axes))
        return np.transpose(p, order)

    def dump(self) -> dict:
        return {
            "registers": [[n, w] for n, w in self.layout.registers],
            "amplitudes": [[float(a.real), float(a.imag)] for a in self.flat()],
        }

    @classmethod
    def from_dump(cls, data: dict) -> "StateVector":
        layout = RegisterLayout(tuple((n, int(w)) for n, w in data["registers"]))
        amps = np.array([complex(re, im) for re, im in data["amplitudes"]])
        return cls(layout, amps)


@dataclass(frozen=True)
class MeasurementOutcome:
    register: str
    value: int
    probability: float
    posterior: StateVector


def omega_powers(D: int, sign: int = 1) -> np.ndarray:
    """``omega**k`` for ``k`` in ``[0, D)`` with ``omega = exp(2 pi i / D)``."""
    return np.exp(sign * 2j * np.pi * np.arange(D) / D)


def _check_param(b: int, D: int) -> None:
    if not 0 <= b < D:
        raise ValueError(f"gate parameter {b} outside [0, {D})")


def _permute(state: StateVector, reg: str, source_index: np.ndarray) -> StateVector:
    ax = state.layout.axis(reg)
    return StateVector(state.layout, np.take(state.amps, source_index, axis=ax))


def _phase(state: StateVector, reg: str, phases: np.ndarray) -> StateVector:
    ax = state.layout.axis(reg)
    shape = [1] * state.amps.ndim
    shape[ax] = phases.size
    return StateVector(state.layout, state.amps * phases.reshape(shape))


def apply_qft(state: StateVector, reg: str, inverse: bool = False) -> StateVector:
    """``|a> -> D**-0.5 sum_j omega**(+-aj) |j>``."""
    ax = state.layout.axis(reg)
    # numpy's ifft carries the +i sign of the forward transform used here
    fn = np.fft.fft if inverse else np.fft.ifft
    return StateVector(state.layout, fn(state.amps, axis=ax, norm="ortho"))


def apply_rot(state: StateVector, reg: str, b: int) -> StateVector:
    D = state.layout.dim(reg)
    _check_param(b, D)
    return _phase(state, reg, omega_powers(D)[(np.arange(D) * b) % D])


def apply_sum(state: StateVector, reg: str, b: int) -> StateVector:
    D = state.layout.dim(reg)
    _check_param(b, D)
    return _permute(state, reg, (np.arange(D) - b) % D)


def apply_mul(state: StateVector, reg: str, b: int) -> StateVector:
    D = state.layout.dim(reg)
    _check_param(b, D)
    if b % 2 == 0:
        raise ValueError(f"MUL({b}): multiplier must be odd")
    inv = mod_inv(b, state.layout.width(reg))
    return _permute(state, reg, (np.arange(D) * inv) % D)


def _two_register(state: StateVector, src: str, dst: str, source_of) -> StateVector:
    if src == dst:
        raise ValueError("source and target registers must differ")
    lay = state.layout
    s, t = lay.axis(src), lay.axis(dst)
    x = np.moveaxis(state.amps, (s, t), (0, 1))
    a = np.arange(lay.dim(src))[:, None]
    b = np.arange(lay.dim(dst))[None, :]
    y = x[a, source_of(a, b) % lay.dim(dst)]
    return StateVector(lay, np.moveaxis(y, (0, 1), (s, t)))


def apply_bsum(state: StateVector, src_reg: str, dst_reg: str) -> StateVector:
    """``|a>|b> -> |a>|b + a>``."""
    return _two_register(state, src_reg, dst_reg, lambda a, b: b - a)


def apply_xor(state: StateVector, src_reg: str, dst_reg: str) -> StateVector:
    """``|a>|b> -> |a>|b xor a>``."""
    if state.layout.width(src_reg) > state.layout.width(dst_reg):
        raise ValueError("XOR source register wider than target")
    return _two_register(state, src_reg, dst_reg, lambda a, b: b ^ a)


def apply_oracle(state: StateVector, src_reg: str, dst_reg: str, table: Sequence[int]) -> StateVector:
    """``|a>|b> -> |a>|b xor f(a)>`` for a classical map given as a lookup table."""
    f = np.asarray(table, dtype=np.int64)
    if f.size != state.layout.dim(src_reg) or f.min() < 0 or f.max() >= state.layout.dim(dst_reg):
        raise ValueError("oracle table does not match the register sizes")
    return _two_register(state, src_reg, dst_reg, lambda a, b: b ^ f[a])


def project(state: StateVector, reg: str, value: int) -> tuple[float, StateVector | None]:
    """Probability of ``value`` on ``reg`` and the renormalised posterior."""
    ax = state.layout.axis(reg)
    idx = [slice(None)] * state.amps.ndim
    idx[ax] = value
    amps = np.zeros_like(state.amps)
    amps[tuple(idx)] = state.amps[tuple(idx)]
    p = float(np.sum(np.abs(amps) ** 2))
    if p == 0.0:
        return 0.0, None
    return p, StateVector(state.layout, amps / np.sqrt(p))


def measure(state: StateVector, reg: str, rng: np.random.Generator) -> MeasurementOutcome:
    n = state.norm()
    if abs(n - 1.0) > MEASURE_NORM_TOL:
        raise ValueError(f"cannot measure: state norm {n} deviates from 1")
    probs = state.probabilities(reg)
    top = int(np.argmax(probs))
    if probs[top] >= 1.0 - END_TO_END_TOL:
        value = top
    else:
        value = int(rng.choice(probs.size, p=probs / probs.sum()))
    p, post = project(state, reg, value)
    return MeasurementOutcome(reg, value, p, post)


def fidelity(s1: StateVector, s2: StateVector) -> float:
    """``|<s1|s2>|``; insensitive to global phase."""
    return float(abs(np.vdot(s1.flat(), s2.flat())))


def extend(state: StateVector, name: str, width: int, value: int = 0) -> StateVector:
    """Append a fresh register prepared in ``|value>``."""
    layout = RegisterLayout(state.layout.registers + ((name, width),))
    fresh = np.zeros(1 << width, dtype=np.complex128)
    fresh[value] = 1.0
    return StateVector(layout, np.multiply.outer(state.amps, fresh))


def discard(state: StateVector, reg: str) -> tuple[int, StateVector]:
    """Drop a register that sits in a definite basis state; returns its value."""
    probs = state.probabilities(reg)
    value = int(np.argmax(probs))
    if probs[value] < 1.0 - END_TO_END_TOL:
        raise ValueError(f"register {reg!r} is not in a basis state; cannot discard")
    ax = state.layout.axis(reg)
    layout = RegisterLayout(tuple(r for r in state.layout.registers if r[0] != reg))
    return value, StateVector(layout, np.take(state.amps, value, axis=ax))


def sample_counts(state: StateVector, reg: str, shots: int, rng: np.random.Generator) -> np.ndarray:
    """Outcome counts of ``shots`` fresh measurements of identically prepared copies."""
    probs = state.probabilities(reg)
    return rng.multinomial(shots, probs / probs.sum())
