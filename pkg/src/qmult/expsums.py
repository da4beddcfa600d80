"""Exponential sums twisted by q-multiplicative sequences.

Conventions: correlations are ``E_{n<N} f(n) e(p(n))`` with ``e(x) = exp(2 pi i x)``.
For linear phases on a q-multiplicative sequence the modulus factorises over
digit levels, which drives both the product formula and the digit-wise sup
search.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .numerics import (
    DEFAULT_BUDGET,
    check_budget,
    expi_fixed,
    fixed_to_turns,
    golden_max,
    map_chunks,
    pairwise_sum,
    poly_phase_fixed,
    turn_to_fixed,
    turns_to_fixed,
)
from .seqcore import QMultSeq, Sequence_

CHUNK = 1 << 16


class Method(str, enum.Enum):
    DIRECT = "direct"
    PRODUCT = "product"
    BEAM = "beam"
    GRID = "grid"


@dataclass(frozen=True)
class PolyPhase:
    """p(n) = sum_j coeffs[j] n^j, coefficients in turns."""

    coeffs: tuple[float, ...]

    def __post_init__(self):
        c = tuple(float(x) for x in self.coeffs)
        if not c:
            c = (0.0,)
        if not all(math.isfinite(x) for x in c):
            raise ValueError("polynomial coefficients must be finite")
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def linear(cls, alpha: float, beta: float = 0.0) -> "PolyPhase":
        return cls((beta, alpha))

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def fixed(self) -> list[int]:
        return [turn_to_fixed(c) for c in self.coeffs]

    def phases(self, n) -> np.ndarray:
        return poly_phase_fixed(self.fixed(), n)

    def __call__(self, n: int) -> float:
        return float(fixed_to_turns(self.phases(np.array([n], dtype=np.uint64))[0]))


@dataclass
class NormReport:
    """Per-scale values and a log-log fit of N * value against N."""

    scales: list[tuple[int, float]]
    fitted_exponent: float
    fit_residual: float
    method: Method
    arguments: list[float] = field(default_factory=list)


# --------------------------------------------------------------------------
# direct sums
# --------------------------------------------------------------------------

def _direct_mean(f: Sequence_, N: int, start: int, extra, threads=1) -> complex:
    """E_{n<N} f(start + n) e(extra(n)) with ``extra`` giving uint64 phases.

    Work is split into fixed CHUNK-sized blocks; each block is reduced
    pairwise and the block sums are reduced pairwise again, so the result
    does not depend on ``threads``.
    """
    if N < 1:
        raise ValueError("N must be >= 1")

    def block(lo):
        hi = min(lo + CHUNK, N)
        n = np.arange(lo, hi, dtype=np.uint64)
        with np.errstate(over="ignore"):
            ph = f.phases(n + np.uint64(start))
            if extra is not None:
                ph = ph + extra(n)
        return pairwise_sum(expi_fixed(ph))

    sums = map_chunks(block, range(0, N, CHUNK), threads)
    return complex(pairwise_sum(np.array(sums, dtype=np.complex128)) / N)


def phase_correlation(f: Sequence_, p: PolyPhase | None, N: int, threads=1) -> complex:
    """E_{n<N} f(n) e(p(n)) by direct compensated summation."""
    if N < 1:
        raise ValueError("N must be >= 1")
    extra = None if p is None else p.phases
    return _direct_mean(f, N, 0, extra, threads)


def shifted_correlation(f: Sequence_, M: int, p: PolyPhase | None, N: int, threads=1) -> complex:
    """E_{n<N} f(n + M) e(p(n))."""
    if M < 0 or N < 0:
        raise ValueError("M and N must be nonnegative")
    if N == 0:
        raise ValueError("N must be >= 1")
    extra = None if p is None else p.phases
    return _direct_mean(f, N, M, extra, threads)


# --------------------------------------------------------------------------
# factorised linear correlations
# --------------------------------------------------------------------------

def _level_moduli(f: QMultSeq, u: np.ndarray, K: int) -> np.ndarray:
    """|E_{a<q} f(a q^l) e(a q^l alpha)| for alpha = u / 2**64, shape (len(u), K)."""
    q = f.q
    u = np.asarray(u, dtype=np.uint64).reshape(-1)
    out = np.empty((u.size, K))
    a = np.arange(q, dtype=np.uint64)
    x = u.copy()
    qq = np.uint64(q)
    with np.errstate(over="ignore"):
        for l in range(K):
            ph = f.row(l)[None, :] + a[None, :] * x[:, None]
            out[:, l] = np.abs(expi_fixed(ph).sum(axis=1)) / q
            x = x * qq
    return out


def _factor_moduli_at(f: QMultSeq, l: int, x_turns: np.ndarray) -> np.ndarray:
    """Level-l factor as a function of x = q^l alpha mod 1."""
    a = np.arange(f.q, dtype=np.uint64)
    with np.errstate(over="ignore"):
        ph = f.row(l)[None, :] + a[None, :] * turns_to_fixed(x_turns)[:, None]
    return np.abs(expi_fixed(ph).sum(axis=1)) / f.q


def linear_correlation_product(f: QMultSeq, alpha: float, K: int) -> float:
    """|E_{n<q^K} f(n) e(alpha n)| as a product of K digit factors."""
    if K < 0:
        raise ValueError("K must be >= 0")
    if K == 0:
        return 1.0
    m = _level_moduli(f, np.array([turn_to_fixed(alpha)], dtype=np.uint64), K)
    return float(np.prod(m[0]))


def linear_correlation_product_many(f: QMultSeq, alphas, K: int) -> np.ndarray:
    alphas = np.asarray(alphas, dtype=np.float64)
    if K == 0:
        return np.ones(alphas.shape)
    m = _level_moduli(f, turns_to_fixed(alphas), K)
    return np.prod(m, axis=1).reshape(alphas.shape)


def correlation_grid(f: QMultSeq, K: int, budget: int | None = DEFAULT_BUDGET) -> np.ndarray:
    """Product values at every alpha = b / q^K, b < q^K."""
    M = f.q ** K
    check_budget(M * max(K, 1) * f.q, budget, "correlation grid")
    return linear_correlation_product_many(f, np.arange(M) / M, K)


def trig_product_gtm(tau: float, alpha: float, n: int) -> float:
    """prod_{j<n} |cos pi (2^j alpha + tau)|."""
    if n < 0:
        raise ValueError("n must be >= 0")
    a = turn_to_fixed(alpha)
    t = turn_to_fixed(tau)
    out = 1.0
    for j in range(n):
        # half-angle of the fixed-point phase 2^j alpha + tau
        x = ((a << j) + t) & ((1 << 64) - 1)
        out *= abs(math.cos(math.pi * math.ldexp(x, -64)))
    return out


def greedy_digit_factors(f: QMultSeq, K: int) -> tuple[float, np.ndarray]:
    """Digit-by-digit choice of alpha with each new factor maximised.

    Digits of alpha are fixed from the least significant (position K) up;
    choosing digit j settles the level j-1 factor.  Averaging the squared
    factor over the q choices gives exactly 1/q, so each chosen factor is at
    least q**-0.5.  Returns alpha and the factors indexed by level.
    """
    q = f.q
    x = 0.0
    factors = np.ones(K)
    d = np.arange(q)
    for l in range(K - 1, -1, -1):
        cand = (d + x) / q
        vals = _factor_moduli_at(f, l, cand)
        k = int(np.argmax(vals))
        factors[l] = vals[k]
        x = float(cand[k])
    return x, factors


def _beam_finals(f: QMultSeq, K: int, beam: int):
    """Survivors of one beam pass of the given width: (q-adic numerators, alphas)."""
    q = f.q
    xs = np.zeros(1)
    score = np.ones(1)
    ids = np.zeros(1, dtype=object)  # numerator of alpha * q^K read digit by digit
    d = np.arange(q)
    for l in range(K - 1, -1, -1):
        cand = ((d[None, :] + xs[:, None]) / q).reshape(-1)
        # digit chosen now sits at q-adic position l + 1 of alpha
        cid = (ids[:, None] + d[None, :].astype(object) * q ** (K - 1 - l)).reshape(-1)
        sc = (score[:, None] * _factor_moduli_at(f, l, cand).reshape(-1, q)).reshape(-1)
        order = np.lexsort((cid.astype(float), -sc))[:beam]
        xs, score, ids = cand[order], sc[order], cid[order]
    return ids, xs


def sup_linear_correlation(f: QMultSeq, K: int, beam: int = 64, refine: bool = True):
    """Lower bound for sup_alpha |E_{n<q^K} f(n) e(alpha n)| with its argument.

    Beam search over the q-adic digits of alpha, least significant first,
    scoring partial products of the digit factors.  Survivors of every width
    1..beam are pooled, so the reported value never decreases as ``beam``
    grows; once ``beam >= q^K`` the pool is every q-adic rational with
    denominator q^K.  Each pooled point is polished by golden section within
    one grid step and the value is recomputed at the returned alpha.
    Cost is O(beam^2 K q).
    """
    if K < 0 or beam < 1:
        raise ValueError("need K >= 0 and beam >= 1")
    if K == 0:
        return 0.0, 1.0
    q = f.q
    widths = beam if K * math.log(q) > 40 else min(beam, q ** K)
    pool: dict[int, float] = {}
    for w in range(1, widths + 1):
        ids, xs = _beam_finals(f, K, w)
        for i, x in zip(ids, xs):
            pool.setdefault(int(i), float(x))
    keys = sorted(pool)
    xs = np.array([pool[k] for k in keys])
    vals = linear_correlation_product_many(f, xs, K)
    if refine:
        h = float(q) ** -K
        rx, _ = golden_max(lambda a: linear_correlation_product_many(f, a, K), xs - h, xs + h, iters=50)
        rx = np.mod(rx, 1.0)
        rv = linear_correlation_product_many(f, rx, K)
        better = rv > vals
        xs = np.where(better, rx, xs)
        vals = np.where(better, rv, vals)
    k = int(np.argmax(vals))  # first maximum in numerator order
    return float(xs[k]), float(vals[k])


# --------------------------------------------------------------------------
# polynomial phases
# --------------------------------------------------------------------------

def _poly_moduli(v: np.ndarray, n: np.ndarray, coeff_sets: Sequence[Sequence[float]]) -> np.ndarray:
    out = np.empty(len(coeff_sets))
    for i, cs in enumerate(coeff_sets):
        ph = poly_phase_fixed([turn_to_fixed(c) for c in cs], n)
        out[i] = abs(pairwise_sum(v * expi_fixed(ph))) / v.size
    return out


def _best_linear(v: np.ndarray, n: np.ndarray, higher: Sequence[float], pad: int):
    """Best alpha_1 for fixed higher coefficients: FFT profile, then golden polish."""
    N = v.size
    w = v
    if any(higher):
        w = v * expi_fixed(poly_phase_fixed([0, 0] + [turn_to_fixed(c) for c in higher], n))
    spec = np.abs(np.fft.ifft(w, pad)) * pad / N  # |E w(n) e(k n / pad)|
    k = int(np.argmax(spec))
    h = 1.0 / pad
    fun = lambda a: _poly_moduli(v, n, [[0.0, float(x), *higher] for x in a])
    rx, rv = golden_max(fun, np.array([k / pad - h]), np.array([k / pad + h]), iters=40)
    if rv[0] > spec[k]:
        return float(rx[0]) % 1.0, float(rv[0])
    return k / pad, float(spec[k])


def sup_poly_correlation(f: Sequence_, d: int, N: int, grid_density: int = 64,
                         sweeps: int = 3, budget: int | None = DEFAULT_BUDGET):
    """Lower bound for sup over real p of degree <= d of |E_{n<N} f(n) e(p(n))|.

    The linear coefficient is profiled exactly on a fine FFT grid for every
    point of a ``grid_density``-per-axis grid over the higher coefficients;
    the best point is then improved by coordinate-wise golden section.  The
    constant term is set so that the correlation is real and nonnegative.
    """
    if d < 1:
        raise ValueError("degree must be >= 1")
    if N < 1:
        raise ValueError("N must be >= 1")
    pad = 4 << max(N - 1, 1).bit_length()
    combos = grid_density ** (d - 1)
    check_budget(combos * pad * max(1, int(math.log2(pad))), budget, "polynomial grid",
                 "lower grid_density or degree")
    v = f.values(N)
    n = np.arange(N, dtype=np.uint64)
    grid = np.arange(grid_density) / grid_density
    best_c, best_v = None, -1.0
    for idx in np.ndindex(*([grid_density] * (d - 1))):
        higher = [float(grid[i]) for i in idx]
        a1, val = _best_linear(v, n, higher, pad)
        if val > best_v + 1e-15:
            best_c, best_v = [0.0, a1, *higher], val
    h = 1.0 / grid_density
    for _ in range(sweeps):
        before = best_v
        for j in range(1, d + 1):
            if j == 1:
                a1, val = _best_linear(v, n, best_c[2:], pad)
                if val > best_v:
                    best_c[1], best_v = a1, val
                continue
            c0 = best_c[j]

            def fun(a, j=j):
                sets = []
                for x in a:
                    cs = list(best_c)
                    cs[j] = float(x)
                    sets.append(cs)
                return _poly_moduli(v, n, sets)

            rx, rv = golden_max(fun, np.array([c0 - h]), np.array([c0 + h]), iters=40)
            if rv[0] > best_v:
                best_c[j], best_v = float(rx[0]) % 1.0, float(rv[0])
        h /= 4
        if best_v - before < 1e-13:
            break
    c = phase_correlation(f, PolyPhase(tuple(best_c)), N)
    best_c[0] = (-math.atan2(c.imag, c.real) / (2 * math.pi)) % 1.0
    return PolyPhase(tuple(best_c)), abs(c)


# --------------------------------------------------------------------------
# Cesaro means and constants
# --------------------------------------------------------------------------

def level_means(f: QMultSeq, T: int) -> np.ndarray:
    """E_{a<q} f(a q^t) for t < T."""
    return np.array([expi_fixed(f.row(t)).sum() / f.q for t in range(T)])


def cesaro_mean(f: QMultSeq, L: int) -> complex:
    """prod_{t<L} E_{a<q} f(a q^t); equals E_{n<q^L} f(n) exactly."""
    if L < 0:
        raise ValueError("L must be >= 0")
    out = 1.0 + 0j
    for m in level_means(f, L):
        out *= m
    return complex(out)


def delange_criterion(f: QMultSeq, T: int) -> float:
    """sum_{t<T} (1 - Re E_{a<q} f(a q^t))."""
    if T < 1:
        raise ValueError("T must be >= 1")
    return float(np.sum(1.0 - level_means(f, T).real))


def _mrs_product(tau: float, x: np.ndarray) -> np.ndarray:
    return np.abs(np.cos(np.pi * (x + tau)) * np.cos(np.pi * (2 * x + tau)))


def mrs_factor_bound(tau: float, grid: int = 1 << 16) -> float:
    """max_x |cos pi(x + tau) cos pi(2x + tau)| on a grid plus local golden refinement."""
    if not 0.0 <= tau < 1.0:
        raise ValueError("tau must lie in [0, 1)")
    grid = max(int(grid), 1 << 16)
    x = np.arange(grid) / grid
    y = _mrs_product(tau, x)
    top = np.argsort(-y, kind="stable")[:16]
    h = 1.0 / grid
    _, rv = golden_max(lambda t: _mrs_product(tau, t), x[top] - h, x[top] + h, iters=60)
    return float(max(y.max(), rv.max()))


BETA_RANGE = (0.43, 0.57)


def beta_closed_form(tau: float) -> float:
    """beta(tau) = 1/2 ln |cos pi(1/3 + tau) cos pi(2/3 + tau)|, natural log."""
    lo, hi = BETA_RANGE
    if not lo < tau < hi:
        raise ValueError(f"closed form only valid for {lo} < tau < {hi}")
    return 0.5 * math.log(abs(math.cos(math.pi * (1 / 3 + tau)) * math.cos(math.pi * (2 / 3 + tau))))


def gelfond_exponent_closed_form(tau: float) -> float:
    """1 + beta(tau) / ln 2, the exponent predicted by the closed form."""
    return 1.0 + beta_closed_form(tau) / math.log(2.0)


def fit_loglog(scales: Sequence[tuple[int, float]]) -> tuple[float, float]:
    """Least-squares slope of log(N value) against log N, with RMS residual.

    Zero values are skipped; fewer than two usable points gives -inf.
    """
    pts = [(N, v) for N, v in scales if v > 0]
    if len(pts) < 2:
        return -math.inf, math.nan
    x = np.log([float(N) for N, _ in pts])
    y = np.log([N * v for N, v in pts])
    A = np.vstack([x, np.ones_like(x)]).T
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - A @ coef
    return float(coef[0]), float(np.sqrt(np.mean(resid**2)))


def fit_gelfond_exponent(f: Sequence_, L_range: Sequence[int], degree: int = 1,
                         beam: int = 64, grid_density: int = 64) -> NormReport:
    """Sup correlations at N = q^L and the fitted Gelfond-type exponent."""
    Ls = sorted(set(int(L) for L in L_range))
    if len(Ls) < 3:
        raise ValueError("need at least 3 levels to fit an exponent")
    scales, args = [], []
    if degree == 1 and isinstance(f, QMultSeq):
        method = Method.BEAM
        for L in Ls:
            a, v = sup_linear_correlation(f, L, beam)
            scales.append((f.q ** L, v))
            args.append(a)
    else:
        method = Method.GRID
        for L in Ls:
            p, v = sup_poly_correlation(f, degree, f.q ** L, grid_density)
            scales.append((f.q ** L, v))
            args.append(p.coeffs[1])
    slope, resid = fit_loglog(scales)
    return NormReport(scales, slope, resid, method, args)
