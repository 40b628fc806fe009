"""Pinned worked examples (m = 2, n = 4).

Each row lists the printed values. Where a printed value disagrees with the
defining formula the computed value wins and the row carries an erratum note.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .protocol import ProtocolParams, SamplingAlice, Transcript, run_protocol


@dataclass(frozen=True)
class Row:
    x: int
    y: int
    v_share: int
    c: tuple[int, int, int, int]
    k: tuple[int, int, int]
    r: tuple[int, int, int, int]
    M: int


@dataclass(frozen=True)
class Fixture:
    name: str
    v: int
    rows: tuple[Row, ...]
    output: int
    errata: dict = field(default_factory=dict)

    @property
    def params(self) -> ProtocolParams:
        return ProtocolParams(2, len(self.rows))

    @property
    def x(self) -> list[int]:
        return [r.x for r in self.rows]

    @property
    def y(self) -> list[int]:
        return [r.y for r in self.rows]

    def pinned(self) -> dict:
        return {
            "v_shares": [r.v_share for r in self.rows[:-1]],
            "c": [r.c for r in self.rows],
            "k": [r.k for r in self.rows],
        }


# errata keys are (round, field) with round counted from 1
TABLE_III = Fixture(
    "table3",
    v=1,
    rows=(
        Row(1, 0, 0, (2, 15, 9, 12), (5, 9, 5), (13, 13, 5, 1), 2),
        Row(0, 3, 11, (10, 6, 11, 3), (15, 5, 7), (1, 9, 1, 1), 12),
        Row(1, 1, 15, (10, 11, 3, 2), (1, 1, 1), (7, 7, 7, 9), 2),
        Row(2, 3, 13, (4, 9, 1, 6), (7, 9, 15), (3, 7, 11, 7), 8),
    ),
    output=0,
    errata={(4, "v_share"): 3},
)

TABLE_IV = Fixture(
    "table4",
    v=3,
    rows=(
        Row(2, 3, 14, (7, 3, 5, 1), (1, 7, 5), (13, 1, 2, 4), 4),
        Row(3, 1, 10, (1, 14, 5, 11), (5, 11, 7), (5, 12, 13, 5), 10),
        Row(1, 2, 15, (14, 12, 1, 9), (1, 3, 3), (13, 13, 5, 13), 6),
        Row(0, 1, 0, (4, 1, 1, 1), (13, 3, 15), (15, 6, 15, 10), 0),
    ),
    output=2,
    errata={(1, "r3"): 5, (1, "r4"): 2},
)

FIXTURES = {f.name: f for f in (TABLE_III, TABLE_IV)}


@dataclass
class Mismatch:
    round: int
    field: str
    printed: int
    computed: int
    erratum: bool


def replay(fx: Fixture, seed: int | None = 0, shots: int = 0,
           pinned: dict | None = None) -> tuple[Transcript, list[Mismatch], list[np.ndarray]]:
    """Run the pinned example and diff every intermediate against the table.

    With ``shots`` the final measurement of each round is repeated on
    identically prepared copies and the histograms are returned.
    """
    alice = SamplingAlice(shots, np.random.default_rng(seed)) if shots else None
    tr = run_protocol(fx.x, fx.y, fx.v, fx.params, alice=alice, seed=seed,
                      pinned=pinned or fx.pinned())
    diffs = []
    for i, (row, rec) in enumerate(zip(fx.rows, tr.rounds), start=1):
        got = {"v_share": tr.v_shares[i - 1], "M": rec.M}
        got.update(zip(("r1", "r2", "r3", "r4"), rec.r))
        want = {"v_share": row.v_share, "M": row.M}
        want.update(zip(("r1", "r2", "r3", "r4"), row.r))
        for key, printed in want.items():
            if got[key] != printed:
                expected = fx.errata.get((i, key))
                diffs.append(Mismatch(i, key, printed, got[key], expected == got[key]))
    return tr, diffs, alice.histograms if alice else []
