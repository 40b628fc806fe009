"""Exact arithmetic over Z_{2^d}.

Everything here works on plain Python integers and ``fractions.Fraction``;
probabilities are exact rationals with power-of-two denominators.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

MAX_BITS = 32
BRUTEFORCE_MAX_BITS = 12


@dataclass(frozen=True)
class Modulus:
    d: int

    def __post_init__(self) -> None:
        if not 1 <= self.d <= MAX_BITS:
            raise ValueError(f"register width d={self.d} outside [1, {MAX_BITS}]")

    @property
    def D(self) -> int:
        return 1 << self.d

    def odd(self) -> range:
        return range(1, self.D, 2)


@dataclass(frozen=True)
class TwoAdicDecomp:
    """``value = 2**exponent * cofactor (mod D)`` with an odd cofactor."""

    exponent: int
    cofactor: int


def _as_modulus(mod: Modulus | int) -> Modulus:
    return mod if isinstance(mod, Modulus) else Modulus(mod)


def mod_inv(a: int, mod: Modulus | int) -> int:
    """Inverse of an odd ``a`` modulo ``2**d`` by Hensel lifting.

    ``x <- x * (2 - a x)`` doubles the number of correct low bits each step,
    starting from ``x = a`` which is already correct mod 8.
    """
    mod = _as_modulus(mod)
    if a % 2 == 0:
        raise ValueError("no inverse modulo power of two for even a")
    mask = mod.D - 1
    a &= mask
    x = a
    bits = 3
    while bits < mod.d:
        x = (x * (2 - a * x)) & mask
        bits *= 2
    return x & mask


def two_adic(a: int, mod: Modulus | int) -> TwoAdicDecomp:
    mod = _as_modulus(mod)
    a %= mod.D
    if a == 0:
        return TwoAdicDecomp(mod.d, 1)
    e = (a & -a).bit_length() - 1
    return TwoAdicDecomp(e, a >> e)


def derive_vn(v: int, v_list: list[int], m: int) -> int:
    """Last additive share so that ``4 * sum(v_i) == 4 v (mod 2**(m+2))``."""
    D = 1 << (m + 2)
    return ((4 * v - 4 * sum(v_list)) % D) // 4


def prop2_probability(a: int, c: int, mod: Modulus | int) -> Fraction:
    """Exact ``Pr_b[a b == c (mod D)]`` for ``b`` uniform on ``[0, D)``."""
    mod = _as_modulus(mod)
    da = two_adic(a, mod).exponent
    dc = two_adic(c, mod).exponent
    if dc < da:
        return Fraction(0)
    return Fraction(1, 1 << (mod.d - da))


def prop2_count_bruteforce(a: int, c: int, mod: Modulus | int) -> int:
    mod = _as_modulus(mod)
    if mod.d > BRUTEFORCE_MAX_BITS:
        raise ValueError(f"d={mod.d} too large for enumeration (max {BRUTEFORCE_MAX_BITS})")
    D = mod.D
    a %= D
    c %= D
    return sum(1 for b in range(D) if (a * b) % D == c)


def prop2_condition(a: int, b: int, c: int, mod: Modulus | int) -> bool:
    """Valuation criterion for solvability of ``a b == c``.

    ``d_a + d_b >= d`` when ``c == 0``; otherwise ``d_a + d_b == d_c`` and the
    odd cofactors agree modulo ``2**(d - d_c)``.
    """
    mod = _as_modulus(mod)
    A, B, C = (two_adic(z, mod) for z in (a, b, c))
    if C.exponent == mod.d:
        return A.exponent + B.exponent >= mod.d
    if A.exponent + B.exponent != C.exponent:
        return False
    low = (1 << (mod.d - C.exponent)) - 1
    return (A.cofactor * B.cofactor - C.cofactor) & low == 0


def solution_set(coeff: int, rhs: int, mod: Modulus | int) -> list[int]:
    """All ``j`` in ``[0, D)`` with ``coeff * j == rhs (mod D)``."""
    mod = _as_modulus(mod)
    D = mod.D
    return [j for j in range(D) if (coeff * j - rhs) % D == 0]


def prop2_sweep(d_max: int = 6) -> tuple[int, int]:
    """Compare the analytic probability with brute force for every ``(a, c)``.

    Returns ``(cases, mismatches)`` over ``d = 1 .. d_max``.
    """
    cases = bad = 0
    for d in range(1, d_max + 1):
        D = 1 << d
        for a in range(D):
            for c in range(D):
                cases += 1
                if prop2_probability(a, c, d) != Fraction(prop2_count_bruteforce(a, c, d), D):
                    bad += 1
    return cases, bad
