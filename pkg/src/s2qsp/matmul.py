"""Two-party matrix product built from one scalar-product run per output cell."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .protocol import ProtocolAbort, ProtocolParams, Transcript, run_protocol

HEADER = ["k", "n", "m"]


@dataclass
class MatrixInput:
    """``A`` (Alice, k x n), ``B`` (Bob, n x l) and Bob's mask ``V`` (k x l)."""

    A: np.ndarray
    B: np.ndarray
    V: np.ndarray
    m: int

    def __post_init__(self) -> None:
        self.A, self.B, self.V = (np.asarray(z, dtype=np.int64) for z in (self.A, self.B, self.V))
        if self.A.ndim != 2 or self.B.ndim != 2 or self.V.ndim != 2:
            raise ValueError("matrices must be 2-D")
        k, n = self.A.shape
        if self.B.shape[0] != n:
            raise ValueError(f"B needs {n} rows to match the columns of A, got {self.B.shape}")
        if self.V.shape != (k, self.B.shape[1]):
            raise ValueError(f"V must be {(k, self.B.shape[1])}, got {self.V.shape}")
        N = 1 << self.m
        for name, z in (("A", self.A), ("B", self.B), ("V", self.V)):
            if z.size and (z.min() < 0 or z.max() >= N):
                raise ValueError(f"entries of {name} must lie in [0, {N})")


@dataclass
class MatmulResult:
    U: np.ndarray
    runs: int
    cells: list[dict] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"U": self.U.tolist(), "runs": self.runs, "cells": self.cells}


class MatmulAbort(RuntimeError):
    def __init__(self, i: int, j: int, cause: ProtocolAbort):
        super().__init__(f"cell ({i}, {j}) aborted: {cause}")
        self.i, self.j, self.cause = i, j, cause


def plain_matmul_oracle(A, B, V, m: int) -> np.ndarray:
    A, B, V = (np.asarray(z, dtype=np.int64) for z in (A, B, V))
    return (A @ B + V) % (1 << m)


def run_matmul(A, B, V, m: int, seed: int | None = 0, keep_transcripts: bool = False) -> MatmulResult:
    """``U = A B + V (mod 2**m)``; each cell is a fresh protocol run on row ``i`` of A and column ``j`` of B."""
    inp = MatrixInput(A, B, V, m)
    k, n = inp.A.shape
    cols = inp.B.shape[1]
    params = ProtocolParams(m, n)
    seeds = np.random.SeedSequence(seed).generate_state(k * cols)
    U = np.zeros((k, cols), dtype=np.int64)
    cells = []
    for i in range(k):
        for j in range(cols):
            cell_seed = int(seeds[i * cols + j])
            try:
                tr = run_protocol(inp.A[i].tolist(), inp.B[:, j].tolist(), int(inp.V[i, j]),
                                  params, seed=cell_seed)
            except ProtocolAbort as err:
                raise MatmulAbort(i, j, err) from err
            U[i, j] = tr.output
            cell = {"i": i, "j": j, "seed": cell_seed, "output": tr.output}
            if keep_transcripts:
                cell["transcript"] = tr.to_dict()
            cells.append(cell)
    return MatmulResult(U, k * cols, cells)


def read_matrix(path: str | Path) -> tuple[np.ndarray, int]:
    """CSV with a ``k,n,m`` header, one dimension row, then the rows."""
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
    if [h.strip() for h in rows[0]] != HEADER:
        raise ValueError(f"{path}: expected header {','.join(HEADER)}")
    k, n, m = (int(v) for v in rows[1])
    body = np.array([[int(v) for v in r] for r in rows[2:]], dtype=np.int64).reshape(k, n)
    return body, m


def write_matrix(path: str | Path, M, m: int) -> None:
    M = np.asarray(M, dtype=np.int64)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(HEADER)
        w.writerow([M.shape[0], M.shape[1], m])
        w.writerows(M.tolist())
