"""Sequence representations: q-multiplicative phase tables and digital evaluators.

A q-multiplicative sequence is determined by the values f(a q^t), so it is
stored as a table of phases (in fixed-point turns) indexed by level ``t`` and
digit ``a``, together with a policy for levels beyond the stored ones.
Evaluation sums the phases of the nonzero digits; ``f(n)`` is the
exponential of that sum.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .numerics import (
    TURN,
    expi_fixed,
    fixed_to_turns,
    poly_phase_fixed,
    turn_to_fixed,
    turns_to_fixed,
)

_MASK = TURN - 1


# --------------------------------------------------------------------------
# tail policies
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Ones:
    """Rows beyond the table are all zero phase (f(a q^t) = 1)."""


@dataclass(frozen=True)
class RepeatLast:
    """Rows beyond the table copy the last stored row."""


@dataclass(frozen=True)
class Periodic:
    """Rows beyond the table cycle through the last ``period`` stored rows."""

    period: int

    def __post_init__(self):
        if self.period < 1:
            raise ValueError("period must be >= 1")


TailPolicy = Ones | RepeatLast | Periodic


def sum_of_digits(q: int, n: int) -> int:
    """Sum of the base-``q`` digits of ``n``."""
    if q < 2:
        raise ValueError("base must be >= 2")
    if n < 0:
        raise ValueError("n must be nonnegative")
    total = 0
    while n:
        n, d = divmod(n, q)
        total += d
    return total


def sum_of_digits_array(q: int, N: int) -> np.ndarray:
    """s_q(n) for all n < N, built level by level."""
    s = np.zeros(1, dtype=np.int64)
    while s.size < N:
        s = np.concatenate([s + a for a in range(q)])
    return s[:N]


def digits(q: int, n: int) -> list[int]:
    out = []
    while n:
        n, d = divmod(n, q)
        out.append(d)
    return out


# --------------------------------------------------------------------------
# evaluators
# --------------------------------------------------------------------------

class Sequence_:
    """Common surface of all sequence evaluators.

    Subclasses provide ``phases(n)`` returning uint64 fixed-point turns for an
    integer array ``n``; everything else is derived.
    """

    q: int

    def phases(self, n) -> np.ndarray:  # pragma: no cover - abstract
        raise NotImplementedError

    def phase_prefix(self, N: int) -> np.ndarray:
        return self.phases(np.arange(N, dtype=np.uint64))

    def values(self, N: int, start: int = 0) -> np.ndarray:
        """Complex values f(start), ..., f(start + N - 1)."""
        if start == 0:
            return expi_fixed(self.phase_prefix(N))
        return expi_fixed(self.phases(np.arange(start, start + N, dtype=np.uint64)))

    def __call__(self, n: int) -> complex:
        if n < 0:
            raise ValueError("sequences are indexed by nonnegative integers")
        return complex(expi_fixed(self.phase_of(n)))

    def phase_of(self, n: int) -> int:
        return int(self.phases(np.array([n], dtype=np.uint64))[0])

    def turn(self, n: int) -> float:
        """Phase of f(n) in turns, in [0, 1)."""
        return float(fixed_to_turns(self.phase_of(n)))


@dataclass(frozen=True, eq=False)
class QMultSeq(Sequence_):
    """q-multiplicative sequence stored as a T x q table of fixed-point phases.

    ``table[t, a]`` is the phase of f(a q^t).  Column 0 is forced to zero
    since f(0) = 1.  Instances are immutable.
    """

    q: int
    table: np.ndarray
    tail: TailPolicy = field(default_factory=RepeatLast)
    name: str = ""

    def __post_init__(self):
        if self.q < 2:
            raise ValueError("base q must be >= 2")
        t = np.asarray(self.table)
        if t.dtype != np.uint64:
            t = turns_to_fixed(t)
        if t.ndim != 2 or t.shape[1] != self.q or t.shape[0] < 1:
            raise ValueError(f"table must have shape (T>=1, q={self.q}), got {t.shape}")
        if np.any(t[:, 0] != 0):
            raise ValueError("table[t][0] must be 0 (f(0) = 1)")
        if isinstance(self.tail, Periodic) and self.tail.period > t.shape[0]:
            raise ValueError("periodic tail longer than the stored table")
        t = t.copy()
        t.setflags(write=False)
        object.__setattr__(self, "table", t)

    @classmethod
    def from_turns(cls, q: int, rows, tail: TailPolicy | None = None, name: str = "") -> "QMultSeq":
        rows = np.asarray(rows, dtype=np.float64)
        return cls(q, turns_to_fixed(rows), tail if tail is not None else RepeatLast(), name)

    @property
    def levels(self) -> int:
        return self.table.shape[0]

    @property
    def table_turns(self) -> np.ndarray:
        return fixed_to_turns(self.table)

    def _row_index(self, t: int) -> int | None:
        T = self.levels
        if t < T:
            return t
        if isinstance(self.tail, Ones):
            return None
        if isinstance(self.tail, RepeatLast):
            return T - 1
        p = self.tail.period
        return T - p + (t - T) % p

    def row(self, t: int) -> np.ndarray:
        """Phases of f(a q^t) for a < q (uint64)."""
        i = self._row_index(t)
        if i is None:
            return np.zeros(self.q, dtype=np.uint64)
        return self.table[i]

    def rows(self, K: int) -> np.ndarray:
        return np.stack([self.row(t) for t in range(K)]) if K else np.zeros((0, self.q), np.uint64)

    def phases(self, n) -> np.ndarray:
        n = np.array(n, dtype=np.uint64, copy=True)
        acc = np.zeros(n.shape, dtype=np.uint64)
        q = np.uint64(self.q)
        t = 0
        with np.errstate(over="ignore"):
            while np.any(n):
                d = (n % q).astype(np.intp)
                acc = acc + self.row(t)[d]
                n //= q
                t += 1
        return acc

    def phase_of(self, n: int) -> int:
        acc = 0
        t = 0
        while n:
            n, d = divmod(n, self.q)
            if d:
                acc += int(self.row(t)[d])
            t += 1
        return acc & _MASK

    def phase_prefix(self, N: int) -> np.ndarray:
        ph = np.zeros(1, dtype=np.uint64)
        t = 0
        with np.errstate(over="ignore"):
            while ph.size < N:
                r = self.row(t)
                ph = np.concatenate([ph + r[a] for a in range(self.q)])
                t += 1
        return ph[:N]

    def shift(self, l: int) -> "QMultSeq":
        return shift(self, l)

    def __repr__(self):
        label = self.name or "QMultSeq"
        return f"<{label} q={self.q} levels={self.levels} tail={self.tail}>"


@dataclass(frozen=True, eq=False)
class DigitalSeq(Sequence_):
    """Unimodular sequence given by a vectorised phase function.

    Used for sequences without a q-multiplicative table (Rudin-Shapiro,
    polynomial phases, products of sequences).  ``phase_fn`` maps a uint64
    array of indices to uint64 fixed-point phases.
    """

    q: int
    phase_fn: Callable[[np.ndarray], np.ndarray]
    name: str = ""

    def phases(self, n) -> np.ndarray:
        return self.phase_fn(np.asarray(n, dtype=np.uint64))

    def __repr__(self):
        return f"<{self.name or 'DigitalSeq'} q={self.q}>"


# --------------------------------------------------------------------------
# operations
# --------------------------------------------------------------------------

def evaluate(f: Sequence_, n: int) -> complex:
    return f(n)


def shift(f: QMultSeq, l: int) -> QMultSeq:
    """S^l f, the q-multiplicative sequence n -> f(q^l n)."""
    if l < 0:
        raise ValueError("shift must be nonnegative")
    if l == 0:
        return f
    T = f.levels
    if isinstance(f.tail, Periodic):
        p = f.tail.period
        new_T = max(T - l, 0) + p
    else:
        new_T = max(T - l, 1)
    rows = np.stack([f.row(t + l) for t in range(new_T)])
    name = f"S^{l}({f.name})" if f.name else ""
    return QMultSeq(f.q, rows, f.tail, name)


def twist(f: Sequence_, coeffs: Sequence[float], name: str = "") -> DigitalSeq:
    """The product sequence n -> f(n) e(p(n)) with p given by real coefficients."""
    cf = [turn_to_fixed(c) for c in coeffs]

    def fn(n):
        with np.errstate(over="ignore"):
            return f.phases(n) + poly_phase_fixed(cf, n)

    return DigitalSeq(f.q, fn, name or f"{getattr(f, 'name', '') or 'f'}*e(p)")


def poly_phase_seq(coeffs: Sequence[float], q: int = 2) -> DigitalSeq:
    """n -> e(sum_j coeffs[j] n^j)."""
    cf = [turn_to_fixed(c) for c in coeffs]
    return DigitalSeq(q, lambda n: poly_phase_fixed(cf, n), f"poly{tuple(coeffs)}")


def linear_phase_seq(alpha: float, beta: float = 0.0, q: int = 2) -> DigitalSeq:
    return poly_phase_seq([beta, alpha], q)


# --------------------------------------------------------------------------
# constructors
# --------------------------------------------------------------------------

def _strong_table(q: int, phases_fixed: Sequence[int]) -> np.ndarray:
    row = np.zeros((1, q), dtype=np.uint64)
    row[0, 1:] = np.asarray(phases_fixed, dtype=np.uint64)
    return row


def thue_morse() -> QMultSeq:
    return gen_thue_morse(0.5, name="tm")


def gen_thue_morse(tau: float, name: str = "") -> QMultSeq:
    _check_unit("tau", tau)
    return QMultSeq(2, _strong_table(2, [turn_to_fixed(tau)]), RepeatLast(), name or f"gtm(tau={tau!r})")


def digit_sum_phase(q: int, alpha: float) -> QMultSeq:
    """n -> e(alpha s_q(n))."""
    _check_base(q)
    _check_unit("alpha", alpha)
    a = turn_to_fixed(alpha)
    return QMultSeq(q, _strong_table(q, [(k * a) & _MASK for k in range(1, q)]), RepeatLast(),
                    f"digitsum(q={q},alpha={alpha!r})")


def digit_sum_mod(q: int, p: int, Q: int) -> QMultSeq:
    """n -> e(p s_q(n) / Q)."""
    _check_base(q)
    if Q < 1 or not 0 <= p < Q:
        raise ValueError("need Q >= 1 and 0 <= p < Q")
    # k p / Q rounded directly, so multiples land on the nearest fixed-point turn
    phases = [((k * p % Q) * TURN + Q // 2) // Q & _MASK for k in range(1, q)]
    return QMultSeq(q, _strong_table(q, phases), RepeatLast(), f"dsmod(q={q},p={p},Q={Q})")


def strong(q: int, phases: Sequence[float]) -> QMultSeq:
    """Strongly q-multiplicative sequence with f(a) = e(phases[a-1])."""
    _check_base(q)
    if len(phases) != q - 1:
        raise ValueError(f"strong sequence needs q-1 = {q - 1} phases, got {len(phases)}")
    for ph in phases:
        _check_unit("phase", ph)
    return QMultSeq(q, _strong_table(q, [turn_to_fixed(x) for x in phases]), RepeatLast(),
                    f"strong(q={q})")


def periodic(q: int, p: int) -> QMultSeq:
    """n -> e(n p / (q - 1)), the periodic strongly q-multiplicative family."""
    _check_base(q)
    if not 0 <= p < q - 1:
        raise ValueError("need 0 <= p < q - 1")
    den = q - 1
    phases = [((a * p % den) * TURN + den // 2) // den & _MASK for a in range(1, q)]
    return QMultSeq(q, _strong_table(q, phases), RepeatLast(), f"periodic(q={q},p={p})")


def linear_phase_table(q: int, alpha: float, levels: int | None = None) -> QMultSeq:
    """n -> e(alpha n) as a q-multiplicative table (exact for n < q^levels)."""
    _check_base(q)
    if levels is None:
        levels = math.ceil(64 / math.log2(q))
    a = turn_to_fixed(alpha)
    rows = np.zeros((levels, q), dtype=np.uint64)
    for t in range(levels):
        qt = pow(q, t, TURN)
        for d in range(1, q):
            rows[t, d] = (d * qt * a) & _MASK
    return QMultSeq(q, rows, Ones(), f"linear(q={q},alpha={alpha!r})")


def splitmix64(seed: int, count: int) -> list[int]:
    """SplitMix64 stream (Steele, Lea, Flood 2014) as Python ints.

    state += 0x9E3779B97F4A7C15, then the output is the state passed through
    z ^= z >> 30; z *= 0xBF58476D1CE4E5B9; z ^= z >> 27; z *= 0x94D049BB133111EB;
    z ^= z >> 31 (all mod 2**64).
    """
    state = seed & _MASK
    out = []
    for _ in range(count):
        state = (state + 0x9E3779B97F4A7C15) & _MASK
        z = state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
        out.append(z ^ (z >> 31))
    return out


def random_qmult(q: int, levels: int, seed: int, tail: TailPolicy | None = None) -> QMultSeq:
    """Random phases f(a q^t), a >= 1, drawn row by row from SplitMix64(seed).

    A 64-bit output is used directly as a fixed-point turn, i.e. uniform on
    the circle at 2**-64 resolution.
    """
    _check_base(q)
    if levels < 1:
        raise ValueError("levels must be >= 1")
    draws = splitmix64(seed, levels * (q - 1))
    rows = np.zeros((levels, q), dtype=np.uint64)
    rows[:, 1:] = np.asarray(draws, dtype=np.uint64).reshape(levels, q - 1)
    return QMultSeq(q, rows, tail if tail is not None else RepeatLast(),
                    f"random(q={q},levels={levels},seed={seed})")


def _rudin_shapiro_phases(n: np.ndarray) -> np.ndarray:
    n = np.asarray(n, dtype=np.uint64)
    pairs = n & (n >> np.uint64(1))
    parity = np.zeros(n.shape, dtype=np.uint64)
    one = np.uint64(1)
    while np.any(pairs):
        parity ^= pairs & one
        pairs = pairs >> one
    return parity << np.uint64(63)


def rudin_shapiro() -> DigitalSeq:
    """(-1)^(number of occurrences of the block 11 in binary n)."""
    return DigitalSeq(2, _rudin_shapiro_phases, "rudin-shapiro")


def _check_base(q):
    if not isinstance(q, (int, np.integer)) or q < 2:
        raise ValueError(f"base q must be an integer >= 2, got {q!r}")


def _check_unit(label, x):
    if not 0.0 <= float(x) < 1.0:
        raise ValueError(f"{label} must lie in [0, 1), got {x!r}")


# --------------------------------------------------------------------------
# SeqSpec mini-language:  name[:key=value{,key=value}], lists ';'-separated
# --------------------------------------------------------------------------

_SPEC_NAMES = {
    "tm": "ThueMorse",
    "gtm": "GenThueMorse",
    "digitsum": "DigitSumPhase",
    "dsmod": "DigitSumModQ",
    "strong": "Strong",
    "random": "Random",
    "periodic": "Periodic",
    "rudin-shapiro": "RudinShapiro",
}

_SPEC_KEYS = {
    "tm": {},
    "gtm": {"tau": float},
    "digitsum": {"q": int, "alpha": float},
    "dsmod": {"q": int, "p": int, "Q": int},
    "strong": {"q": int, "phases": "floats"},
    "random": {"q": int, "levels": int, "seed": int},
    "periodic": {"q": int, "p": int},
    "rudin-shapiro": {},
}

_SPEC_DEFAULTS = {
    "gtm": {"tau": 0.5},
    "digitsum": {"q": 2},
    "dsmod": {"q": 2},
    "random": {"q": 2, "levels": 32, "seed": 0},
    "periodic": {"p": 1},
}


class SpecError(ValueError):
    """Malformed or out-of-range sequence spec."""


@dataclass(frozen=True)
class SeqSpec:
    """A named sequence constructor with its parameters."""

    name: str
    params: tuple = ()

    @property
    def kind(self) -> str:
        return _SPEC_NAMES[self.name]

    def param_dict(self) -> dict:
        return dict(self.params)

    def __str__(self):
        if not self.params:
            return self.name
        parts = []
        for k, v in self.params:
            if isinstance(v, tuple):
                v = ";".join(repr(x) for x in v)
            elif isinstance(v, float):
                v = repr(v)
            parts.append(f"{k}={v}")
        return f"{self.name}:" + ",".join(parts)


_NAME_RE = re.compile(r"^[a-z][a-z0-9-]*$")


def parse_spec(text: str) -> SeqSpec:
    text = text.strip()
    name, _, rest = text.partition(":")
    name = name.strip().lower()
    if not _NAME_RE.match(name) or name not in _SPEC_KEYS:
        raise SpecError(f"unknown sequence {name!r}; expected one of {', '.join(_SPEC_KEYS)}")
    keys = _SPEC_KEYS[name]
    params = dict(_SPEC_DEFAULTS.get(name, {}))
    if rest.strip():
        for item in rest.split(","):
            k, eq, v = item.partition("=")
            k = k.strip()
            if not eq or k not in keys:
                raise SpecError(f"{name}: unknown or malformed key {item.strip()!r}")
            kind = keys[k]
            try:
                if kind == "floats":
                    params[k] = tuple(float(x) for x in v.split(";") if x.strip())
                else:
                    params[k] = kind(v.strip())
            except ValueError as exc:
                raise SpecError(f"{name}: bad value for {k}: {v!r}") from exc
    missing = [k for k in keys if k not in params]
    if missing:
        raise SpecError(f"{name}: missing parameter(s) {', '.join(missing)}")
    spec = SeqSpec(name, tuple((k, params[k]) for k in keys))
    try:
        build(spec)
    except ValueError as exc:
        raise SpecError(f"{name}: {exc}") from exc
    return spec


def build(spec: SeqSpec | str) -> Sequence_:
    """Construct the sequence named by ``spec``."""
    if isinstance(spec, str):
        spec = parse_spec(spec)
    p = spec.param_dict()
    n = spec.name
    if n == "tm":
        return thue_morse()
    if n == "gtm":
        return gen_thue_morse(p["tau"])
    if n == "digitsum":
        return digit_sum_phase(p["q"], p["alpha"])
    if n == "dsmod":
        return digit_sum_mod(p["q"], p["p"], p["Q"])
    if n == "strong":
        return strong(p["q"], list(p["phases"]))
    if n == "random":
        return random_qmult(p["q"], p["levels"], p["seed"])
    if n == "periodic":
        return periodic(p["q"], p["p"])
    if n == "rudin-shapiro":
        return rudin_shapiro()
    raise SpecError(f"unknown sequence {n!r}")
