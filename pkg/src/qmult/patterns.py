"""Arithmetic progressions with digit-sum constraints, and a weighted rotation average."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .numerics import DEFAULT_BUDGET, check_budget, expi_fixed, map_chunks, pairwise_sum, poly_phase_fixed, turn_to_fixed
from .seqcore import Sequence_, sum_of_digits_array

MAX_TABLE = 1 << 26
_M_BLOCK = 64


@dataclass(frozen=True)
class ModResidues:
    Q: int
    residues: tuple[int, ...]


@dataclass(frozen=True)
class IrrationalCells:
    alpha: float
    intervals: tuple[tuple[float, float], ...]


@dataclass(frozen=True)
class PatternSpec:
    """k-term progressions n, n+m, ..., n+(k-1)m with a constraint on each term.

    Intervals are left-closed and right-open.
    """

    q: int
    kind: ModResidues | IrrationalCells

    def __post_init__(self):
        if self.q < 2:
            raise ValueError("base q must be >= 2")
        kd = self.kind
        if isinstance(kd, ModResidues):
            if kd.Q < 1:
                raise ValueError("Q must be >= 1")
            if not kd.residues or any(not 0 <= r < kd.Q for r in kd.residues):
                raise ValueError("residues must lie in [0, Q)")
        else:
            if not kd.intervals:
                raise ValueError("need at least one interval")
            for a, b in kd.intervals:
                if not 0.0 <= a < b <= 1.0:
                    raise ValueError(f"interval [{a}, {b}) is not a nondegenerate subset of [0, 1)")

    @property
    def coprime(self) -> bool:
        """gcd(Q, q - 1) = 1, the condition under which every residue pattern occurs."""
        return not isinstance(self.kind, ModResidues) or math.gcd(self.kind.Q, self.q - 1) == 1

    @property
    def k(self) -> int:
        kd = self.kind
        return len(kd.residues) if isinstance(kd, ModResidues) else len(kd.intervals)


@dataclass
class CountReport:
    """Count of progressions in [0, N); density is count / N^2 (count / N when k = 1)."""

    N: int
    count: int
    density: float
    series: list[tuple[int, int]] = field(default_factory=list)

    @property
    def is_zero(self) -> bool:
        return self.count == 0


def _ap_pairs(N: int, k: int) -> int:
    if k == 1:
        return N
    return sum(N - (k - 1) * m for m in range(1, (N - 1) // (k - 1) + 1))


def _density(count: int, N: int, k: int) -> float:
    return count / N if k == 1 else count / (N * N)


def _ladder(N: int) -> list[int]:
    out, n = [], 1
    while n < N:
        out.append(n)
        n *= 2
    out.append(N)
    return out


def _count_with_masks(masks: np.ndarray, N: int, k: int, threads=1) -> tuple[int, np.ndarray]:
    """Count APs whose j-th term satisfies masks[j]; also a histogram of last terms."""
    if k == 1:
        ends = np.bincount(np.nonzero(masks[0][:N])[0], minlength=N)
        return int(ends.sum()), ends
    mmax = (N - 1) // (k - 1)

    def block(m0):
        hist = np.zeros(N, dtype=np.int64)
        for m in range(m0, min(m0 + _M_BLOCK, mmax + 1)):
            span = N - (k - 1) * m
            ok = masks[0][:span].copy()
            for j in range(1, k):
                ok &= masks[j][j * m:j * m + span]
            idx = np.nonzero(ok)[0]
            hist += np.bincount(idx + (k - 1) * m, minlength=N)
        return hist

    hists = map_chunks(block, range(1, mmax + 1, _M_BLOCK), threads)
    ends = np.sum(hists, axis=0) if hists else np.zeros(N, dtype=np.int64)
    return int(ends.sum()), ends


def _report(N: int, k: int, count: int, ends: np.ndarray) -> CountReport:
    cum = np.concatenate([[0], np.cumsum(ends)])
    series = [(n, int(cum[n])) for n in _ladder(N)]
    return CountReport(N, count, _density(count, N, k), series)


def _check_n(N: int, k: int, budget):
    if N < 1 or k < 1:
        raise ValueError("need N >= 1 and k >= 1")
    if N > MAX_TABLE:
        raise ValueError(f"N exceeds the digit-table limit {MAX_TABLE}")
    check_budget(_ap_pairs(N, k), budget, "progression count")


def count_ap_patterns(spec: PatternSpec, N: int, threads=1, budget: int | None = DEFAULT_BUDGET) -> CountReport:
    """Exact number of (n, m), m >= 1, n + (k-1)m < N, with s_q(n + jm) = r_j mod Q."""
    if not isinstance(spec.kind, ModResidues):
        return count_ap_cells(spec, N, threads, budget)
    k = spec.k
    _check_n(N, k, budget)
    res = sum_of_digits_array(spec.q, N) % spec.kind.Q
    masks = np.stack([res == r for r in spec.kind.residues])
    count, ends = _count_with_masks(masks, N, k, threads)
    return _report(N, k, count, ends)


def count_ap_cells(spec: PatternSpec, N: int, threads=1, budget: int | None = DEFAULT_BUDGET) -> CountReport:
    """Exact number of k-APs with alpha s_q(n + jm) mod 1 in I_j."""
    if not isinstance(spec.kind, IrrationalCells):
        raise TypeError("count_ap_cells needs an IrrationalCells spec")
    k = spec.k
    _check_n(N, k, budget)
    sd = sum_of_digits_array(spec.q, N)
    # s_q(n) < 64 q, so the float product is exact enough for cell tests
    frac = np.mod(spec.kind.alpha * sd.astype(np.float64), 1.0)
    masks = np.stack([(frac >= a) & (frac < b) for a, b in spec.kind.intervals])
    count, ends = _count_with_masks(masks, N, k, threads)
    return _report(N, k, count, ends)


def count_all_residue_patterns(q: int, Q: int, k: int, N: int, threads=1,
                               budget: int | None = DEFAULT_BUDGET) -> np.ndarray:
    """Counts for every residue tuple at once, indexed by sum_j r_j Q^j."""
    _check_n(N, k, budget)
    res = (sum_of_digits_array(q, N) % Q).astype(np.int64)
    size = Q ** k
    if k == 1:
        return np.bincount(res, minlength=size)
    mmax = (N - 1) // (k - 1)

    def block(m0):
        acc = np.zeros(size, dtype=np.int64)
        for m in range(m0, min(m0 + _M_BLOCK, mmax + 1)):
            span = N - (k - 1) * m
            code = res[:span].copy()
            for j in range(1, k):
                code += res[j * m:j * m + span] * Q ** j
            acc += np.bincount(code, minlength=size)
        return acc

    parts = map_chunks(block, range(1, mmax + 1, _M_BLOCK), threads)
    return np.sum(parts, axis=0)


# --------------------------------------------------------------------------
# weighted averages along a circle rotation
# --------------------------------------------------------------------------

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


def _check_integer_poly(coeffs: Sequence) -> list[int]:
    out = []
    for c in coeffs:
        if isinstance(c, (int, np.integer)):
            out.append(int(c))
        elif float(c).is_integer():
            out.append(int(c))
        else:
            raise ValueError(f"coefficient {c!r} is not an integer")
    while len(out) > 1 and out[-1] == 0:
        out.pop()
    if not out:
        out = [0]
    # nonnegative on N_0: check every n up to the Cauchy root bound, beyond
    # which the leading coefficient fixes the sign
    lead = out[-1]
    if len(out) > 1 and lead < 0:
        raise ValueError("polynomial is negative for large n")
    bound = 1 + max((abs(c) for c in out[:-1]), default=0) // abs(lead) if lead else 0
    n = np.arange(int(bound) + 2, dtype=object)
    vals = sum(c * n ** j for j, c in enumerate(out))
    if np.any(np.asarray(vals < 0, dtype=bool)):
        raise ValueError("polynomial takes negative values on the nonnegative integers")
    return out


def weighted_birkhoff_demo(f: Sequence_, coeffs: Sequence[int], theta: float = GOLDEN,
                           x0: float = 0.0, N: int = 1 << 16, threads=1) -> list[tuple[int, complex]]:
    """Partial averages E_{n<N'} f(n) e(x0 + p(n) theta) for N' = 1, 2, 4, ..., N.

    This is the weighted ergodic average for the rotation x -> x + theta with
    observable e(x).  p has integer coefficients and is evaluated mod 2^64,
    which is exact for the phase p(n) theta mod 1 at fixed-point resolution.
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    cs = _check_integer_poly(coeffs)
    th = np.uint64(turn_to_fixed(theta))
    x = np.uint64(turn_to_fixed(x0))
    cfix = [c % (1 << 64) for c in cs]

    n = np.arange(N, dtype=np.uint64)
    with np.errstate(over="ignore"):
        ph = f.phase_prefix(N) + poly_phase_fixed(cfix, n) * th + x
    terms = expi_fixed(ph)
    out = []
    for Np in _ladder(N):
        out.append((Np, complex(pairwise_sum(terms[:Np]) / Np)))
    return out
