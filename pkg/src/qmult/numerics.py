"""Low-level numerics shared by every module.

Phases are carried as 64-bit fixed-point turns: an unsigned integer ``u``
stands for the angle ``u / 2**64`` of a full turn.  Addition of phases is then
wrapping ``uint64`` addition, which is exact and associative, so products of
unimodular factors never drift.  Conversion to complex happens only where a
sum is formed.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, Sequence

import numpy as np

TURN = 1 << 64
_MASK = TURN - 1
_QUARTER_BITS = np.uint64(62)
_LOW_MASK = np.uint64((1 << 62) - 1)


class BudgetExceeded(RuntimeError):
    """Raised when an enumeration would visit more work units than allowed."""


DEFAULT_BUDGET = 10**9


def check_budget(work: int, budget: int | None, what: str, hint: str = "") -> None:
    if budget is not None and work > budget:
        msg = f"{what}: {work} work units exceed the budget of {budget}"
        if hint:
            msg += f" ({hint})"
        raise BudgetExceeded(msg)


# --------------------------------------------------------------------------
# fixed-point turns
# --------------------------------------------------------------------------

def turns_to_fixed(x) -> np.ndarray:
    """Map real turns to uint64 fixed point, reducing mod 1 first."""
    x = np.asarray(x, dtype=np.float64)
    frac = np.mod(x, 1.0)
    v = np.rint(np.ldexp(frac, 64))
    # frac can round up to exactly 1.0 for tiny negative inputs
    v = np.where(v >= float(TURN), 0.0, v)
    return v.astype(np.uint64)


def turn_to_fixed(x: float) -> int:
    """Scalar version of :func:`turns_to_fixed`, as a Python int."""
    return int(round(math.ldexp(float(x) % 1.0, 64))) & _MASK


def fixed_to_turns(u) -> np.ndarray | float:
    u = np.asarray(u, dtype=np.uint64)
    t = np.ldexp(u.astype(np.float64), -64)
    # values within 2**-53 of a full turn round up to 1.0
    t = np.where(t >= 1.0, 0.0, t)
    return t if t.ndim else float(t)


def expi_fixed(u) -> np.ndarray:
    """e(u / 2**64) for uint64 phases.

    The two top bits select the quadrant and are applied as an exact
    rotation, so quarter turns (and in particular +-1, +-i) come out exact.
    """
    u = np.asarray(u, dtype=np.uint64)
    quad = (u >> _QUARTER_BITS).astype(np.int64)
    y = np.ldexp((u & _LOW_MASK).astype(np.float64), -64) * (2.0 * math.pi)
    c = np.cos(y)
    s = np.sin(y)
    re = np.choose(quad, [c, -s, -c, s])
    im = np.choose(quad, [s, c, -s, -c])
    return re + 1j * im


def expi_turns(x) -> np.ndarray:
    """e(x) = exp(2 pi i x) for real turns ``x``."""
    return expi_fixed(turns_to_fixed(x))


def poly_phase_fixed(coeffs_fixed: Sequence[int], n) -> np.ndarray:
    """Fixed-point phase of sum_j c_j n^j mod 1 for integer ``n``.

    ``coeffs_fixed`` are uint64 fixed-point coefficients.  All arithmetic is
    wrapping uint64, which is exact modulo one turn.
    """
    n = np.asarray(n)
    nu = n.astype(np.uint64) if n.dtype != np.uint64 else n
    acc = np.zeros(nu.shape, dtype=np.uint64)
    power = np.ones(nu.shape, dtype=np.uint64)
    with np.errstate(over="ignore"):
        for j, c in enumerate(coeffs_fixed):
            if j:
                power = power * nu
            if c:
                acc = acc + np.uint64(c) * power
    return acc


# --------------------------------------------------------------------------
# deterministic summation
# --------------------------------------------------------------------------

def pairwise_sum(x, axis: int = -1):
    """Pairwise summation with TwoSum error compensation.

    The reduction tree depends only on the length of ``x`` along ``axis``, so
    the result is bit-reproducible regardless of how callers partition work.
    Works for real and complex input (TwoSum is exact componentwise).
    """
    x = np.moveaxis(np.asarray(x), axis, -1)
    n = x.shape[-1]
    if n == 0:
        return np.zeros(x.shape[:-1], dtype=x.dtype if x.dtype.kind in "fc" else float)[()]
    if x.dtype.kind not in "fc":
        x = x.astype(np.float64)
    size = 1 << (n - 1).bit_length()
    if size != n:
        pad = [(0, 0)] * (x.ndim - 1) + [(0, size - n)]
        x = np.pad(x, pad)
    err_total = None
    while x.shape[-1] > 1:
        a = x[..., 0::2]
        b = x[..., 1::2]
        s = a + b
        bb = s - a
        e = (a - (s - bb)) + (b - bb)
        err_total = e if err_total is None else err_total[..., 0::2] + err_total[..., 1::2] + e
        x = s
    out = x[..., 0]
    if err_total is not None:
        out = out + err_total[..., 0]
    return out[()] if np.ndim(out) == 0 else out


def mean(x, axis: int = -1):
    x = np.asarray(x)
    return pairwise_sum(x, axis=axis) / x.shape[axis]


# --------------------------------------------------------------------------
# partitioned execution
# --------------------------------------------------------------------------

def resolve_threads(threads: int | str | None) -> int:
    if threads in (None, "auto"):
        import os
        return os.cpu_count() or 1
    t = int(threads)
    if t < 1:
        raise ValueError("threads must be >= 1")
    return t


def map_chunks(fn: Callable, chunks: Iterable, threads: int | str | None = 1) -> list:
    """Apply ``fn`` to each chunk, returning results in chunk order.

    Chunking is decided by the caller independently of ``threads``, so the
    downstream reduction sees the same inputs in the same order either way.
    """
    chunks = list(chunks)
    t = resolve_threads(threads)
    if t == 1 or len(chunks) <= 1:
        return [fn(c) for c in chunks]
    with ThreadPoolExecutor(max_workers=t) as pool:
        return list(pool.map(fn, chunks))


# --------------------------------------------------------------------------
# golden-section maximisation (vectorised over independent brackets)
# --------------------------------------------------------------------------

_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


def golden_max(fun: Callable[[np.ndarray], np.ndarray], lo, hi, iters: int = 60):
    """Maximise ``fun`` on each bracket ``[lo_i, hi_i]`` independently.

    ``fun`` must be vectorised.  Returns ``(x_best, f_best)`` where the best
    point is taken over every abscissa evaluated, not just the final bracket.
    """
    a = np.array(lo, dtype=np.float64, copy=True)
    b = np.array(hi, dtype=np.float64, copy=True)
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc = fun(c)
    fd = fun(d)
    best_x = np.where(fc >= fd, c, d)
    best_f = np.maximum(fc, fd)
    for _ in range(iters):
        left = fc >= fd
        # keep [a, d] where the left probe is better, else [c, b]
        b = np.where(left, d, b)
        a = np.where(left, a, c)
        new_c = b - _INVPHI * (b - a)
        new_d = a + _INVPHI * (b - a)
        fd_next = np.where(left, fc, np.nan)
        fc_next = np.where(left, np.nan, fd)
        c_eval = np.where(left, new_c, new_d)
        fe = fun(c_eval)
        fc = np.where(left, fe, fc_next)
        fd = np.where(left, fd_next, fe)
        c = new_c
        d = new_d
        better = fe > best_f
        best_x = np.where(better, c_eval, best_x)
        best_f = np.where(better, fe, best_f)
    return best_x, best_f
