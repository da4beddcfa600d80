"""Correlation coefficients gamma_r = lim E_{n<N} f(n + r) conj f(n) and their mean square."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .expsums import fit_loglog
from .numerics import expi_fixed, pairwise_sum
from .seqcore import QMultSeq, Sequence_, shift

_DIRECT_WORK = 1 << 27


@dataclass
class CorrelationSeries:
    gamma: np.ndarray
    errors: np.ndarray
    method: str
    params: dict = field(default_factory=dict)


def _finite_many(v: np.ndarray, R: int, N: int) -> np.ndarray:
    """E_{n<N} v(n + r) conj v(n) for r < R; v has length >= N + R - 1."""
    if R * N <= _DIRECT_WORK:
        base = np.conj(v[:N])
        out = np.empty(R, dtype=np.complex128)
        for r in range(R):
            out[r] = pairwise_sum(v[r:r + N] * base)
        return out / N
    # sum_n conj v(n) v(n + r) = ifft(FFT(v) conj FFT(v[:N]))[r]; M avoids wrap-around
    M = 1 << (2 * N + R).bit_length()
    corr = np.fft.ifft(np.fft.fft(v[:N + R - 1], M) * np.conj(np.fft.fft(v[:N], M)))
    return corr[:R] / N


def gamma_finite(f: Sequence_, r: int, N: int) -> complex:
    """E_{n<N} f(n + r) conj f(n) by direct summation."""
    if r < 0 or N < 1:
        raise ValueError("need r >= 0 and N >= 1")
    v = f.values(N + r)
    return complex(pairwise_sum(v[r:] * np.conj(v[:N])) / N)


def gamma_finite_many(f: Sequence_, R: int, N: int) -> CorrelationSeries:
    """gamma_r at scale N for all r < R; errors are |gamma_r(N) - gamma_r(N/q)|.

    Small problems are summed directly (exact for +-1 valued f); large ones
    go through an FFT.
    """
    if R < 1 or N < 1:
        raise ValueError("need R >= 1 and N >= 1")
    v = f.values(N + R)
    g = _finite_many(v, R, N)
    Nc = max(N // f.q, 1)
    coarse = _finite_many(v, R, Nc)
    return CorrelationSeries(g, np.abs(g - coarse), "finite", {"N": N})


def gamma1_series(f: QMultSeq, depth: int) -> tuple[complex, float]:
    """gamma_1 = sum_l sum_{a=1}^{q-1} q^-(l+1) f(a q^l) conj f(a q^l - 1).

    Grouping n by the exact power of q dividing n + 1: if n + 1 = a q^l mod
    q^(l+1) with 1 <= a < q then f(n+1) conj f(n) = f(a q^l) conj f(a q^l - 1).
    The omitted levels carry total weight q^-depth.
    """
    if depth < 1:
        raise ValueError("depth must be >= 1")
    q = f.q
    total = 0j
    terms = []
    for l in range(depth):
        a = np.arange(1, q)
        top = np.array([f.phase_of(int(x) * q ** l) for x in a], dtype=np.uint64)
        low = np.array([f.phase_of(int(x) * q ** l - 1) for x in a], dtype=np.uint64)
        with np.errstate(over="ignore"):
            vals = expi_fixed(top - low)
        terms.append(pairwise_sum(vals) * float(q) ** (-(l + 1)))
    # smallest terms first
    for t in reversed(terms):
        total += t
    return complex(total), float(q) ** (-depth)


def _block_exponent(q: int, r: int) -> int:
    k = 0
    while q ** k <= r:
        k += 1
    return k


def gamma_series(f: QMultSeq, r: int, depth: int) -> tuple[complex, float]:
    """gamma_r from the q-adic block decomposition, with a tail bound.

    With q^k the least power exceeding r, write n = q^k m + b.  Pairs with
    b + r < q^k contribute f(b + r) conj f(b); the others cross one block
    boundary and contribute f(b + r - q^k) conj f(b) times the step
    correlation of S^k f, i.e. its gamma_1.  Hence
        gamma_r = q^-k [A_r + (C_r - A_r) gamma_1(S^k f)]
    with A_r the linear and C_r the cyclic correlation over one block.
    """
    if r < 0:
        raise ValueError("r must be >= 0")
    if r == 0:
        return 1 + 0j, 0.0
    if r == 1:
        return gamma1_series(f, depth)
    k = _block_exponent(f.q, r)
    g1, tail = gamma1_series(shift(f, k), depth)
    return _blocked(f.values(f.q ** k), r, g1), tail * r / f.q ** k


def _blocked(v: np.ndarray, r: int, g1: complex) -> complex:
    Qk = v.size
    c = np.conj(v)
    A = pairwise_sum(v[r:] * c[:Qk - r])
    W = pairwise_sum(v[:r] * c[Qk - r:])
    return complex((A + W * g1) / Qk)


def gamma_series_many(f: QMultSeq, R: int, depth: int) -> CorrelationSeries:
    g = np.empty(R, dtype=np.complex128)
    e = np.empty(R)
    cache = {}
    for r in range(R):
        if r <= 1:
            g[r], e[r] = gamma_series(f, r, depth)
            continue
        k = _block_exponent(f.q, r)
        if k not in cache:
            cache[k] = (gamma1_series(shift(f, k), depth), f.values(f.q ** k))
        (g1, tail), v = cache[k]
        g[r] = _blocked(v, r, g1)
        e[r] = tail * r / v.size
    return CorrelationSeries(g, e, "series", {"depth": depth})


def parse_method(text: str) -> tuple[str, int]:
    """'finite:N=1048576' or 'series:depth=30'."""
    name, _, arg = text.partition(":")
    name = name.strip().lower()
    key, _, val = arg.partition("=")
    defaults = {"finite": ("N", 1 << 20), "series": ("depth", 30)}
    if name not in defaults:
        raise ValueError(f"unknown method {name!r}; use finite:N=... or series:depth=...")
    want, default = defaults[name]
    if not arg:
        return name, default
    if key.strip() != want:
        raise ValueError(f"method {name} takes {want}=..., got {arg!r}")
    n = int(val)
    if n < 1:
        raise ValueError(f"{want} must be >= 1")
    return name, n


def correlations(f: Sequence_, R: int, method: str = "series:depth=30") -> CorrelationSeries:
    name, n = parse_method(method)
    if name == "series":
        if not isinstance(f, QMultSeq):
            raise TypeError("the series method needs a q-multiplicative table")
        return gamma_series_many(f, R, n)
    return gamma_finite_many(f, R, n)


@dataclass
class DensityReport:
    value: float
    ladder: list[tuple[int, float]]
    decay_exponent: float
    series: CorrelationSeries


def bertrandias_density(f: Sequence_, R: int, method: str = "series:depth=30",
                        fit_from: int = 16) -> DensityReport:
    """E_{r<R} |gamma_r|^2 with the ladder over R' = q, q^2, ... <= R.

    decay_exponent is c in E_{r<R'} |gamma_r|^2 ~ R'^-c, fitted by least
    squares over ladder points with R' >= fit_from.
    """
    if R < 1:
        raise ValueError("R must be >= 1")
    cs = correlations(f, R, method)
    sq = np.abs(cs.gamma) ** 2
    cum = np.cumsum(sq)
    ladder = []
    Rp = f.q
    while Rp <= R:
        ladder.append((Rp, float(cum[Rp - 1] / Rp)))
        Rp *= f.q
    value = float(cum[R - 1] / R)
    pts = [(Rp, d) for Rp, d in ladder if Rp >= fit_from]
    c = decay_exponent(pts)
    return DensityReport(value, ladder, c, cs)


def decay_exponent(points) -> float:
    """c with density ~ R^-c by least squares in log-log; nan if under two points."""
    if len(points) < 2:
        return float("nan")
    # fit_loglog fits log(R d) against log R, slope 1 - c
    slope, _ = fit_loglog(points)
    return 1.0 - slope
