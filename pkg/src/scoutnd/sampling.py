"""Unit-hypercube sample streams: seeded pseudo-random and scrambled Sobol.

A batch always covers the joint space of design and noise variables. Columns
are ordered design dimensions first, then noise dimensions; the same ordering
is used in the CSV dump.
"""
from __future__ import annotations

import csv
import enum
from dataclasses import dataclass

import numpy as np

from ._sobol_table import SOBOL_TABLE

BITS = 32
MAX_SOBOL_DIM = len(SOBOL_TABLE)
_MASK64 = (1 << 64) - 1


class Scheme(str, enum.Enum):
    PSEUDO = "PSEUDO"
    QMC = "QMC"


@dataclass(frozen=True)
class SampleBatch:
    u_design: np.ndarray
    u_noise: np.ndarray
    scheme: Scheme
    seed: int

    def __post_init__(self):
        if self.u_design.ndim != 2 or self.u_noise.ndim != 2:
            raise ValueError("batch arrays must be 2-D")
        if self.u_design.shape[0] != self.u_noise.shape[0] or self.u_design.shape[0] < 1:
            raise ValueError("u_design and u_noise need the same number S >= 1 of rows")
        for a in (self.u_design, self.u_noise):
            if a.size and (a.min() < 0.0 or a.max() >= 1.0):
                raise ValueError("batch entries must lie in [0, 1)")

    @property
    def size(self) -> int:
        return self.u_design.shape[0]

    def joint(self) -> np.ndarray:
        return np.hstack([self.u_design, self.u_noise])


def draw_pseudo(dim_total: int, S: int, seed: int) -> np.ndarray:
    """I.i.d. uniforms from a counter-based (Philox) generator."""
    if dim_total < 1 or S < 1:
        raise ValueError("dim_total and S must be >= 1")
    rng = np.random.Generator(np.random.Philox(seed & _MASK64))
    return rng.random((S, dim_total))


def _direction_numbers(dim_total: int) -> np.ndarray:
    """Direction integers ``v[j, k]`` for bit k (k=0 is the most significant)."""
    v = np.zeros((dim_total, BITS), dtype=np.uint64)
    for j in range(dim_total):
        poly, m_init = SOBOL_TABLE[j]
        m = [0] * BITS
        if j == 0:
            m = [1] * BITS
        else:
            s = poly.bit_length() - 1
            m[:s] = m_init
            for k in range(s, BITS):
                new = m[k - s] ^ (m[k - s] << s)
                for i in range(1, s):
                    if (poly >> (s - i)) & 1:
                        new ^= m[k - i] << i
                m[k] = new
        for k in range(BITS):
            v[j, k] = m[k] << (BITS - 1 - k)
    return v


def _mix64(z: np.ndarray) -> np.ndarray:
    # splitmix64 finalizer; uint64 arithmetic wraps mod 2**64.
    z = z ^ (z >> np.uint64(30))
    z = z * np.uint64(0xBF58476D1CE4E5B9)
    z = z ^ (z >> np.uint64(27))
    z = z * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


def _owen_scramble(ints: np.ndarray, seed: int) -> np.ndarray:
    """Nested uniform scramble of 32-bit digit strings, one column per dimension.

    The flip applied to bit k depends on the seed, the dimension and the
    unscrambled leading k bits, so every node of the base-2 digit tree gets an
    independent random permutation.
    """
    out = ints.copy()
    dim_total = ints.shape[1]
    with np.errstate(over="ignore"):
        dim_keys = _mix64(np.full(dim_total, seed & _MASK64, dtype=np.uint64)
                          + np.arange(1, dim_total + 1, dtype=np.uint64) * np.uint64(0x9E3779B97F4A7C15))
        for k in range(BITS):
            bit = np.uint64(BITS - 1 - k)
            prefix = ints >> (bit + np.uint64(1))
            node = prefix | (np.uint64(k) << np.uint64(40))
            flips = _mix64(_mix64(node) ^ dim_keys) & np.uint64(1)
            out ^= flips << bit
    return out


def sobol_ints(dim_total: int, S: int) -> np.ndarray:
    """First ``S`` Sobol points (gray-code order) as 32-bit integers."""
    if S < 1:
        raise ValueError("S must be >= 1")
    if not 1 <= dim_total <= MAX_SOBOL_DIM:
        raise ValueError(f"Sobol dimension {dim_total} outside supported range 1..{MAX_SOBOL_DIM}")
    if S > 2**BITS:
        raise ValueError("too many Sobol points requested")
    v = _direction_numbers(dim_total)
    n = np.arange(S, dtype=np.uint64)
    gray = n ^ (n >> np.uint64(1))
    out = np.zeros((S, dim_total), dtype=np.uint64)
    for k in range(BITS):
        on = ((gray >> np.uint64(k)) & np.uint64(1)).astype(bool)
        if not on.any():
            break
        # bit k of the index selects direction number for the (k+1)-th most significant digit
        out[on] ^= v[:, k]
    return out


def draw_sobol(dim_total: int, S: int, seed: int, scramble: bool = True) -> np.ndarray:
    """First ``S`` points of the Sobol sequence, optionally Owen-scrambled by ``seed``.

    No points are skipped; with scrambling the leading point is no longer the
    origin and every point is marginally uniform.
    """
    ints = sobol_ints(dim_total, S)
    if scramble:
        ints = _owen_scramble(ints, seed)
    return ints.astype(np.float64) / float(2**BITS)


def draw_batch(d: int, noise_dim: int, S: int, seed: int, scheme: Scheme = Scheme.PSEUDO) -> SampleBatch:
    scheme = Scheme(scheme)
    total = d + noise_dim
    if scheme is Scheme.QMC:
        u = draw_sobol(total, S, seed)
    else:
        u = draw_pseudo(total, S, seed)
    return SampleBatch(u[:, :d], u[:, d:], scheme, int(seed))


def star_discrepancy_proxy(points, boxes) -> float:
    """Max over anchored boxes ``[0, b)`` of ``|count/N - volume|``.

    ``boxes`` holds the upper corners, one row per box.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    boxes = np.atleast_2d(np.asarray(boxes, dtype=float))
    inside = np.all(points[None, :, :] < boxes[:, None, :], axis=2)
    frac = inside.sum(axis=1) / points.shape[0]
    vol = np.prod(boxes, axis=1)
    return float(np.max(np.abs(frac - vol)))


def write_batch_csv(batch: SampleBatch, path) -> None:
    u = batch.joint()
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["scheme", "seed", "S", "dim"])
        w.writerow([batch.scheme.value, batch.seed, batch.size, u.shape[1]])
        for row in u:
            w.writerow([repr(float(x)) for x in row])


def read_batch_csv(path, d: int) -> SampleBatch:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if len(rows) < 2 or rows[0] != ["scheme", "seed", "S", "dim"]:
        raise ValueError(f"{path}: not a sample batch file")
    scheme, seed, S, dim = rows[1][0], int(rows[1][1]), int(rows[1][2]), int(rows[1][3])
    u = np.array([[float(x) for x in r] for r in rows[2:]], dtype=float).reshape(-1, dim)
    if u.shape[0] != S:
        raise ValueError(f"{path}: header says S={S}, found {u.shape[0]} rows")
    return SampleBatch(u[:, :d], u[:, d:], Scheme(scheme), seed)
