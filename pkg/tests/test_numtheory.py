import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from specfactor.errors import PreconditionError
from specfactor.numtheory import (
    Factorization,
    PrimeTable,
    SpectrumSpec,
    factor_oracle,
    goldbach_check,
    pnt_ratio,
    sieve,
    spectrum_values,
    two_copy_spectrum,
)


def trial_is_prime(n):
    if n < 2:
        return False
    d = 2
    while d * d <= n:
        if n % d == 0:
            return False
        d += 1
    return True


def test_sieve_first_eight():
    assert list(sieve(8)) == [2, 3, 5, 7, 11, 13, 17, 19]


def test_sieve_single():
    assert list(sieve(1)) == [2]


def test_sieve_32_contains_67():
    primes = list(sieve(32))
    assert primes[-2:] == [127, 131]
    assert 67 in primes
    assert primes == [n for n in range(2, 132) if trial_is_prime(n)]


def test_sieve_complete_against_trial_division():
    primes = list(sieve(2000))
    assert primes == [n for n in range(2, primes[-1] + 1) if trial_is_prime(n)]


def test_sieve_large_entries_are_prime():
    table = sieve(10**5)
    p = table.primes
    assert p.size == 10**5 and p[0] == 2 and np.all(np.diff(p) > 0)
    small = [q for q in range(2, math.isqrt(int(p[-1])) + 1) if trial_is_prime(q)]
    for q in small:
        assert not np.any((p % q == 0) & (p != q)), q


def test_sieve_errors():
    with pytest.raises(PreconditionError):
        sieve(0)
    with pytest.raises(PreconditionError):
        sieve(100, cap=50)


def test_prime_table_lookup_and_json():
    table = sieve(16)
    assert table.index(53) == 15
    assert 49 not in table and 47 in table
    with pytest.raises(KeyError):
        table.index(4)
    again = PrimeTable.from_dict(json.loads(json.dumps(table.to_dict())))
    assert list(again) == list(table)


@pytest.mark.parametrize(
    "n, factors",
    [(231, {3: 1, 7: 1, 11: 1}), (13, {13: 1}), (360, {2: 3, 3: 2, 5: 1}), (2, {2: 1}), (1 << 20, {2: 20})],
)
def test_factor_oracle_examples(n, factors):
    assert factor_oracle(n).factors == factors


def test_factor_oracle_rejects_small():
    with pytest.raises(PreconditionError):
        factor_oracle(1)
    with pytest.raises(PreconditionError):
        factor_oracle(1 << 64)


@settings(max_examples=400, deadline=None)
@given(st.integers(min_value=2, max_value=10**6))
def test_factor_oracle_round_trip(n):
    fac = factor_oracle(n)
    assert fac.product() == n
    assert all(trial_is_prime(p) and a >= 1 for p, a in fac.factors.items())


def test_factorization_json_keys_are_strings():
    data = factor_oracle(360).to_dict()
    assert data["factors"] == {"2": 3, "3": 2, "5": 1}
    assert Factorization.from_dict(json.loads(json.dumps(data))) == factor_oracle(360)


def test_spectrum_examples():
    np.testing.assert_allclose(spectrum_values(SpectrumSpec("log-primes", 3)), np.log([2, 3, 5]), rtol=0, atol=0)
    np.testing.assert_array_equal(spectrum_values(SpectrumSpec("integers", 4)), [2, 3, 4, 5])
    np.testing.assert_array_equal(
        spectrum_values(SpectrumSpec("log-integers", 3, include_unity=True)), [0.0, math.log(2), math.log(3)]
    )


@given(st.sampled_from(["log-primes", "log-integers", "primes", "integers"]), st.integers(1, 300), st.booleans())
def test_spectrum_strictly_increasing(kind, levels, unity):
    if unity and "integers" not in kind:
        unity = False
    e = spectrum_values(SpectrumSpec(kind, levels, include_unity=unity))
    assert e.size == levels and e.dtype == np.float64
    assert np.all(np.diff(e) > 0)


def test_spectrum_validation():
    with pytest.raises(PreconditionError):
        SpectrumSpec("custom", 0, values=(1.0, 1.0))
    with pytest.raises(PreconditionError):
        SpectrumSpec("log-primes", 0)
    with pytest.raises(PreconditionError):
        SpectrumSpec("bogus", 3)
    assert SpectrumSpec("custom", 0, values=(0, 1, 3)).levels == 3


def test_prime_number_theorem_scale():
    assert abs(pnt_ratio(10**4) - 1) < 0.2


def test_goldbach_examples():
    assert goldbach_check(10, 4).all_covered
    r = goldbach_check(4, 1)
    assert r.witnesses == {4: (2, 2)}
    # the first two primes cannot reach 8 = 3 + 5
    assert goldbach_check(8, 1).uncovered == [8]


def test_goldbach_pairs_are_exhaustive_search():
    primes = list(sieve(32))
    r = goldbach_check(100, 5)
    for e in range(4, 101, 2):
        brute = any(p + q == e for p in primes for q in primes)
        assert (e in r.witnesses) == brute
        if brute:
            p, q = r.witnesses[e]
            assert p + q == e and p in primes and q in primes


def test_two_copy_spectrum_d2():
    out = two_copy_spectrum(2)
    primes = [2, 3, 5, 7]
    assert out["integers_match"]
    assert out["products"] == sorted({p * q for p in primes for q in primes})
    assert {4, 6, 10, 9, 15, 25} <= set(out["products"])
    assert out["max_log_deviation"] < 1e-14


def test_goldbach_errors():
    with pytest.raises(PreconditionError):
        goldbach_check(7, 3)
    with pytest.raises(PreconditionError):
        goldbach_check(2, 3)
