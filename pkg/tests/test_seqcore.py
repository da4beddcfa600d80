import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qmult import seqcore
from qmult.seqcore import (
    Ones,
    Periodic,
    QMultSeq,
    RepeatLast,
    SpecError,
    build,
    evaluate,
    parse_spec,
    shift,
    sum_of_digits,
    sum_of_digits_array,
)

import oracles


def test_thue_morse_small_values():
    f = seqcore.thue_morse()
    assert evaluate(f, 3) == pytest.approx(1)
    assert evaluate(f, 0) == 1
    np.testing.assert_allclose(f.values(512), oracles.tm_values(512), atol=1e-15)


def test_digit_sum_mod_lands_on_one():
    f = seqcore.digit_sum_mod(2, 1, 3)
    assert abs(evaluate(f, 7) - 1) < 1e-15


def test_rudin_shapiro_against_block_count():
    f = seqcore.rudin_shapiro()
    assert evaluate(f, 3) == pytest.approx(-1)
    np.testing.assert_allclose(f.values(1024), oracles.rudin_shapiro_values(1024), atol=1e-15)


@pytest.mark.parametrize("q,n,want", [(2, 3, 2), (10, 999, 27), (2, 0, 0), (7, 48, 12)])
def test_sum_of_digits(q, n, want):
    assert sum_of_digits(q, n) == want


@pytest.mark.parametrize("q", [2, 3, 5, 10])
def test_sum_of_digits_array(q):
    N = 3000
    want = [oracles.digit_sum(n, q) for n in range(N)]
    np.testing.assert_array_equal(sum_of_digits_array(q, N), want)


def test_gtm_half_is_thue_morse():
    a = seqcore.gen_thue_morse(0.5).values(1 << 12)
    b = seqcore.thue_morse().values(1 << 12)
    np.testing.assert_array_equal(a, b)


@pytest.mark.parametrize("tau", [0.1, 0.3333, 0.77])
def test_gtm_against_oracle(tau):
    np.testing.assert_allclose(seqcore.gen_thue_morse(tau).values(700), oracles.gtm_values(tau, 700), atol=1e-12)


@pytest.mark.parametrize("q,p", [(3, 1), (5, 2), (7, 3)])
def test_strong_periodic_family(q, p):
    f = seqcore.strong(q, [(a * p / (q - 1)) % 1.0 for a in range(1, q)])
    n = np.arange(2000)
    want = np.exp(2j * np.pi * ((n * p) % (q - 1)) / (q - 1))
    np.testing.assert_allclose(f.values(2000), want, atol=1e-12)
    np.testing.assert_allclose(seqcore.periodic(q, p).values(2000), want, atol=1e-15)


def test_random_table_matches_digit_product():
    f = seqcore.random_qmult(3, 6, seed=11)
    turns = f.table_turns
    want = [oracles.qmult_value(turns, 3, n) for n in range(3 ** 7)]
    np.testing.assert_allclose(f.values(3 ** 7), want, atol=1e-12)


def test_splitmix_reference_output():
    # published first output of SplitMix64 from state 0
    assert seqcore.splitmix64(0, 1)[0] == 0xE220A8397B1DCDAF


@settings(max_examples=60, deadline=None)
@given(q=st.integers(2, 6), seed=st.integers(0, 2**32), t=st.integers(0, 5),
       m=st.integers(0, 10**6), n=st.integers(0, 10**3))
def test_q_multiplicativity(q, seed, t, m, n):
    f = seqcore.random_qmult(q, 8, seed)
    m = m % q ** t
    big = n * q ** t
    lhs = evaluate(f, m + big)
    assert abs(lhs - evaluate(f, m) * evaluate(f, big)) < 1e-12


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32), l=st.integers(0, 6), n=st.integers(0, 5000))
def test_shift_is_dilation(seed, l, n):
    f = seqcore.random_qmult(2, 16, seed)
    assert abs(evaluate(shift(f, l), n) - evaluate(f, n * 2 ** l)) < 1e-12


def test_shift_examples():
    f = seqcore.thue_morse()
    np.testing.assert_array_equal(shift(f, 0).table, f.table)
    np.testing.assert_array_equal(shift(f, 5).values(256), f.values(256))
    g = seqcore.random_qmult(2, 16, 3)
    assert evaluate(shift(g, 3), 1) == evaluate(g, 8)


def test_phase_prefix_equals_pointwise():
    f = seqcore.random_qmult(5, 4, 9, tail=Periodic(2))
    n = np.arange(5 ** 6, dtype=np.uint64)
    np.testing.assert_array_equal(f.phase_prefix(n.size), f.phases(n))
    assert all(f.phase_of(int(k)) == int(f.phases(np.array([k], np.uint64))[0]) for k in range(0, 15000, 97))


def test_tail_policies():
    rows = [[0.0, 0.1], [0.0, 0.2], [0.0, 0.3]]
    ones = QMultSeq.from_turns(2, rows, Ones())
    rep = QMultSeq.from_turns(2, rows, RepeatLast())
    per = QMultSeq.from_turns(2, rows, Periodic(2))
    assert np.all(ones.row(5) == 0)
    np.testing.assert_array_equal(rep.row(7), rep.row(2))
    # periodic tail cycles rows 1, 2, 1, 2, ...
    np.testing.assert_array_equal(per.row(3), per.row(1))
    np.testing.assert_array_equal(per.row(4), per.row(2))
    with pytest.raises(ValueError):
        QMultSeq.from_turns(2, rows, Periodic(4))


def test_table_validation():
    with pytest.raises(ValueError):
        QMultSeq.from_turns(2, [[0.1, 0.2]])
    with pytest.raises(ValueError):
        QMultSeq.from_turns(3, [[0.0, 0.2]])


def test_linear_phase_table():
    f = seqcore.linear_phase_table(3, 0.3)
    n = np.arange(3 ** 8)
    np.testing.assert_allclose(f.values(n.size), np.exp(2j * np.pi * 0.3 * n), atol=1e-9)


def test_twist_and_poly_seq():
    g = seqcore.twist(seqcore.thue_morse(), [0.0, 0.25])
    want = oracles.tm_values(64) * np.exp(2j * np.pi * 0.25 * np.arange(64))
    np.testing.assert_allclose(g.values(64), want, atol=1e-12)
    p = seqcore.poly_phase_seq([0.1, 0.0, 0.25])
    assert abs(evaluate(p, 3) - oracles.e(0.1 + 0.25 * 9)) < 1e-12


@pytest.mark.parametrize("text", ["tm", "gtm:tau=0.25", "digitsum:q=3,alpha=0.125", "dsmod:q=2,p=1,Q=3",
                                  "strong:q=3,phases=0.5;0.25", "random:q=3,levels=7,seed=4",
                                  "periodic:q=5,p=2", "rudin-shapiro"])
def test_spec_roundtrip(text):
    spec = parse_spec(text)
    assert parse_spec(str(spec)) == spec
    a, b = build(spec), build(str(spec))
    np.testing.assert_array_equal(a.values(200), b.values(200))


@pytest.mark.parametrize("text", ["nope", "gtm:tau=1.5", "gtm:rho=0.1", "dsmod:q=2,p=3,Q=3",
                                  "strong:q=3,phases=0.5", "periodic:q=3,p=2", "digitsum:q=1,alpha=0.1",
                                  "random:q=2,levels=0", "gtm:tau"])
def test_spec_errors(text):
    with pytest.raises(SpecError):
        parse_spec(text)
