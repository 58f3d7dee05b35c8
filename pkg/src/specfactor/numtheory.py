"""Prime tables, a trial-division factorization oracle, and spectrum builders.

Everything here is a pure function of its inputs.  Energies are natural
logarithms stored as float64.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import PreconditionError

#: Largest prime count :func:`sieve` will produce unless told otherwise.
DEFAULT_SIEVE_CAP = 1 << 24

#: Factorization inputs are treated as 64-bit unsigned integers.
MAX_N = (1 << 64) - 1

SPECTRUM_KINDS = ("log-primes", "log-integers", "primes", "integers", "custom")


@dataclass(frozen=True)
class PrimeTable:
    """The first ``m`` primes in increasing order."""

    primes: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.primes, dtype=np.int64)
        arr.setflags(write=False)
        object.__setattr__(self, "primes", arr)

    @property
    def m(self) -> int:
        return int(self.primes.size)

    @property
    def cutoff(self) -> int:
        """Largest integer the device built on this table can factor."""
        return self.m

    def __len__(self):
        return self.m

    def __getitem__(self, i):
        return int(self.primes[i])

    def __iter__(self):
        return (int(p) for p in self.primes)

    def __contains__(self, p) -> bool:
        i = int(np.searchsorted(self.primes, p))
        return i < self.m and int(self.primes[i]) == p

    def index(self, p: int) -> int:
        """Zero-based position of prime ``p``; raises ``KeyError`` if absent."""
        i = int(np.searchsorted(self.primes, p))
        if i >= self.m or int(self.primes[i]) != p:
            raise KeyError(p)
        return i

    def to_dict(self) -> dict:
        return {"schema": 1, "m": self.m, "primes": [int(p) for p in self.primes]}

    @classmethod
    def from_dict(cls, data: dict) -> "PrimeTable":
        primes = [int(p) for p in data["primes"]]
        if len(primes) != int(data["m"]):
            raise PreconditionError("prime table length does not match its 'm' field")
        return cls(np.array(primes, dtype=np.int64))


def _nth_prime_upper_bound(m: int) -> int:
    # Rosser: p_m < m (ln m + ln ln m) for m >= 6
    if m < 6:
        return 15
    return int(m * (math.log(m) + math.log(math.log(m)))) + 3


def sieve(m: int, cap: int = DEFAULT_SIEVE_CAP) -> PrimeTable:
    """Return the first ``m`` primes via the sieve of Eratosthenes.

    Raises
    ------
    PreconditionError
        If ``m < 1`` or ``m`` exceeds ``cap``.
    """
    if m < 1:
        raise PreconditionError(f"sieve needs m >= 1, got {m}")
    if m > cap:
        raise PreconditionError(f"sieve of {m} primes exceeds the configured cap {cap}")
    limit = _nth_prime_upper_bound(m)
    is_prime = np.ones(limit + 1, dtype=bool)
    is_prime[:2] = False
    for p in range(2, math.isqrt(limit) + 1):
        if is_prime[p]:
            is_prime[p * p :: p] = False
    primes = np.flatnonzero(is_prime)[:m]
    return PrimeTable(primes)


@dataclass(frozen=True)
class Factorization:
    """Prime factorization ``n = prod(p ** alpha)``."""

    n: int
    factors: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "factors", dict(sorted((int(p), int(a)) for p, a in self.factors.items())))

    @property
    def primes(self) -> list[int]:
        return list(self.factors)

    @property
    def k(self) -> int:
        """Number of distinct primes."""
        return len(self.factors)

    @property
    def total_multiplicity(self) -> int:
        """Sum of the multiplicities (number of prime factors with repetition)."""
        return sum(self.factors.values())

    def product(self) -> int:
        out = 1
        for p, a in self.factors.items():
            out *= p**a
        return out

    def to_dict(self) -> dict:
        return {"n": self.n, "factors": {str(p): a for p, a in self.factors.items()}}

    @classmethod
    def from_dict(cls, data: dict) -> "Factorization":
        return cls(int(data["n"]), {int(p): int(a) for p, a in data["factors"].items()})

    def __str__(self):
        parts = [f"{p}^{a}" if a > 1 else str(p) for p, a in self.factors.items()]
        return " * ".join(parts)


def factor_oracle(n: int) -> Factorization:
    """Trial-division factorization; ground truth for the measurement simulator."""
    n = int(n)
    if n < 2:
        raise PreconditionError(f"factorization needs n >= 2, got {n}")
    if n > MAX_N:
        raise PreconditionError(f"n = {n} does not fit in 64 unsigned bits")
    factors: dict[int, int] = {}
    rest = n
    for p in (2, 3):
        while rest % p == 0:
            factors[p] = factors.get(p, 0) + 1
            rest //= p
    p = 5
    while p * p <= rest:
        for q in (p, p + 2):
            while rest % q == 0:
                factors[q] = factors.get(q, 0) + 1
                rest //= q
        p += 6
    if rest > 1:
        factors[rest] = factors.get(rest, 0) + 1
    return Factorization(n, factors)


def is_prime(n: int) -> bool:
    n = int(n)
    if n < 2:
        return False
    return factor_oracle(n).factors == {n: 1}


@dataclass(frozen=True)
class SpectrumSpec:
    """Recipe for an ordered list of energy levels.

    ``kind`` is one of ``log-primes``, ``log-integers``, ``primes``,
    ``integers`` or ``custom``.  Integer kinds start at 2 unless
    ``include_unity`` is set, in which case they start at 1 (log 1 = 0).
    """

    kind: str
    levels: int
    include_unity: bool = False
    values: tuple | None = None

    def __post_init__(self):
        if self.kind not in SPECTRUM_KINDS:
            raise PreconditionError(f"unknown spectrum kind {self.kind!r}")
        if self.kind == "custom":
            if self.values is None:
                raise PreconditionError("custom spectrum needs explicit values")
            vals = tuple(float(v) for v in self.values)
            object.__setattr__(self, "values", vals)
            object.__setattr__(self, "levels", len(vals))
            if any(b <= a for a, b in zip(vals, vals[1:])):
                raise PreconditionError("custom spectrum must be strictly increasing")
        if self.levels < 1:
            raise PreconditionError("spectrum needs at least one level")
        if self.include_unity and self.kind not in ("log-integers", "integers"):
            raise PreconditionError("include_unity only applies to integer spectra")


def spectrum_values(spec: SpectrumSpec) -> np.ndarray:
    """Strictly increasing float64 energies described by ``spec``."""
    m = spec.levels
    if spec.kind == "custom":
        return np.array(spec.values, dtype=np.float64)
    if spec.kind in ("primes", "log-primes"):
        base = sieve(m).primes.astype(np.float64)
    else:
        start = 1 if spec.include_unity else 2
        base = np.arange(start, start + m, dtype=np.float64)
    if spec.kind.startswith("log-"):
        return np.log(base)
    return base


@dataclass
class GoldbachReport:
    max_even: int
    d: int
    witnesses: dict  # even -> (p, q) with p <= q
    uncovered: list

    @property
    def all_covered(self) -> bool:
        return not self.uncovered

    def to_dict(self) -> dict:
        return {
            "max_even": self.max_even,
            "d": self.d,
            "all_covered": self.all_covered,
            "witnesses": {str(e): list(pq) for e, pq in self.witnesses.items()},
            "uncovered": list(self.uncovered),
        }


def goldbach_check(max_even: int, d: int) -> GoldbachReport:
    """Which even numbers in ``[4, max_even]`` are ``p + q`` with both primes
    drawn from the first ``2**d`` primes."""
    if max_even < 4 or max_even % 2:
        raise PreconditionError("max_even must be an even integer >= 4")
    if d < 0:
        raise PreconditionError("d must be non-negative")
    table = sieve(1 << d)
    primes = list(table)
    pset = set(primes)
    witnesses, uncovered = {}, []
    for e in range(4, max_even + 1, 2):
        hit = next(((p, e - p) for p in primes if p <= e - p and (e - p) in pset), None)
        if hit is None:
            uncovered.append(e)
        else:
            witnesses[e] = hit
    return GoldbachReport(max_even, d, witnesses, uncovered)


def two_copy_spectrum(d: int) -> dict:
    """Compare the two-copy spectrum ``{ln p + ln q}`` with ``{ln(p q)}``.

    Levels are indexed by ordered pairs of table primes, so the multiset has
    ``4**d`` entries.  Each summed energy is mapped back to an integer by
    exponentiation; ``integers_match`` says those integers are exactly the
    products ``p q``.
    """
    primes = sieve(1 << d).primes
    logs = np.log(primes.astype(np.float64))
    summed = (logs[:, None] + logs[None, :]).ravel()
    products = (primes[:, None] * primes[None, :]).ravel()
    recovered = np.rint(np.exp(summed)).astype(np.int64)
    deviation = np.abs(summed - np.log(products.astype(np.float64)))
    return {
        "d": d,
        "levels": int(summed.size),
        "integers_match": bool(np.array_equal(np.sort(recovered), np.sort(products))),
        "max_log_deviation": float(deviation.max()),
        "products": sorted(set(int(v) for v in products)),
    }


def pnt_ratio(n: int) -> float:
    """``p_n / (n ln n)``, which tends to 1."""
    return sieve(n)[n - 1] / (n * math.log(n))

