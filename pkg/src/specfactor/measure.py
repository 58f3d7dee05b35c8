"""Projective-measurement factorization, simulated.

The Hamiltonian ``H = H1 + H2`` has levels ``ln p + ln m``.  For an integer
``N`` with ``k`` distinct prime factors the level ``ln N`` is ``k``-fold
degenerate, spanned by ``|ln p_a>|ln (N/p_a)>``.  Measuring ``H1`` on a state
of that manifold returns one prime factor with Born probability ``|c_a|^2``.

The simulator asks :func:`~specfactor.numtheory.factor_oracle` which
branches exist.  That stands in for nature knowing the degeneracy of the
level.  The protocol's own bookkeeping (measurement and division counts)
never reads the oracle.

The ``H2`` spectrum includes ``ln 1 = 0``, so a prime ``N`` has the single
branch ``|ln N>|ln 1>``.

Randomness comes from ``numpy.random.Generator`` (PCG64) seeded per run.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import PreconditionError
from .numtheory import Factorization, PrimeTable, factor_oracle

VARIANTS = ("A", "B")
NORM_TOL = 1e-12


def make_rng(seed=None) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.PCG64(seed))


def haar_amplitudes(k: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform point on the unit sphere of ``C^k``."""
    z = rng.standard_normal(k) + 1j * rng.standard_normal(k)
    return z / np.linalg.norm(z)


@dataclass(frozen=True)
class Branch:
    prime: int
    cofactor: int

    @property
    def energies(self) -> tuple[float, float]:
        return float(np.log(self.prime)), float(np.log(self.cofactor))


@dataclass
class BranchState:
    """Normalised superposition over the degenerate manifold of ``ln N``."""

    n: int
    branches: list
    amplitudes: np.ndarray

    def __post_init__(self):
        self.amplitudes = np.asarray(self.amplitudes, dtype=np.complex128)
        if len(self.branches) != self.amplitudes.size:
            raise PreconditionError("one amplitude per branch required")
        if not self.branches:
            raise PreconditionError("empty manifold")
        norm = float(np.sum(np.abs(self.amplitudes) ** 2))
        if abs(norm - 1.0) > NORM_TOL:
            raise PreconditionError(f"amplitudes are not normalised (sum |c|^2 = {norm!r})")

    @property
    def k(self) -> int:
        return len(self.branches)

    @property
    def primes(self) -> list[int]:
        return [b.prime for b in self.branches]

    def probabilities(self) -> np.ndarray:
        p = np.abs(self.amplitudes) ** 2
        return p / p.sum()


def _check_range(n: int, table: PrimeTable) -> None:
    if not 2 <= n <= table.cutoff:
        raise PreconditionError(f"N = {n} outside the device range [2, {table.cutoff}]")


def manifold_branches(n: int, table: PrimeTable) -> list[Branch]:
    n = int(n)
    _check_range(n, table)
    fac = factor_oracle(n)
    for p in fac.primes:
        if p not in table:
            raise PreconditionError(f"prime factor {p} of {n} is not in the prime table")
    return [Branch(p, n // p) for p in fac.primes]


def build_manifold(n: int, table: PrimeTable, rng=None, amplitudes=None) -> BranchState:
    """Degenerate manifold of ``ln n``: one branch per distinct prime factor.

    Amplitudes are taken from ``amplitudes`` (must be normalised) or drawn
    Haar-uniformly from ``rng``.
    """
    branches = manifold_branches(n, table)
    if amplitudes is None:
        amplitudes = haar_amplitudes(len(branches), make_rng(rng))
    return BranchState(int(n), branches, amplitudes)


@dataclass(frozen=True)
class Outcome:
    prime: int
    probability: float
    draw: float
    collapsed: BranchState


def measure_h1_detail(state: BranchState, rng) -> Outcome:
    """Born-rule measurement of ``H1``, keeping the probability and the uniform draw."""
    rng = make_rng(rng)
    probs = state.probabilities()
    cdf = np.cumsum(probs)
    u = float(rng.random())
    i = int(np.searchsorted(cdf / cdf[-1], u, side="right"))
    i = min(i, state.k - 1)
    while probs[i] == 0.0:  # u landed on the closing edge of the cdf
        i -= 1
    amps = np.zeros(state.k, dtype=np.complex128)
    amps[i] = 1.0
    collapsed = BranchState(state.n, list(state.branches), amps)
    return Outcome(state.branches[i].prime, float(probs[i]), u, collapsed)


def measure_h1(state: BranchState, rng) -> tuple[int, BranchState]:
    """Measure ``H1``: returns the observed prime and the collapsed state."""
    out = measure_h1_detail(state, rng)
    return out.prime, out.collapsed


@dataclass(frozen=True)
class MeasurementRecord:
    step: int
    prime: int
    prob: float
    before: int
    after: int
    draw: float

    def to_dict(self) -> dict:
        return {
            "step": self.step,
            "prime": self.prime,
            "prob": self.prob,
            "before": self.before,
            "after": self.after,
            "draw": self.draw,
        }


@dataclass
class FactorizationRun:
    n: int
    variant: str
    seed: int | None
    trace: list = field(default_factory=list)
    result: Factorization | None = None
    divisions: int = 0

    @property
    def measurements(self) -> int:
        return len(self.trace)

    def to_dict(self) -> dict:
        return {
            "schema": 1,
            "n": self.n,
            "variant": self.variant,
            "seed": self.seed,
            "steps": [r.to_dict() for r in self.trace],
            "result": self.result.to_dict()["factors"],
            "counts": {"measurements": self.measurements, "divisions": self.divisions},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def factorize(n: int, variant: str, table: PrimeTable, seed=None, amplitudes=None) -> FactorizationRun:
    """Run the measurement protocol on ``n``.

    Variant ``A`` measures once per prime factor counted with multiplicity,
    re-preparing a Haar-random manifold on ``n / p`` after each outcome.
    Variant ``B`` measures once per distinct prime and strips each observed
    prime by repeated classical division.

    ``amplitudes`` (optional) fixes the first manifold only.
    """
    if variant not in VARIANTS:
        raise PreconditionError(f"variant must be 'A' or 'B', got {variant!r}")
    n = int(n)
    _check_range(n, table)
    rng = make_rng(seed)
    run = FactorizationRun(n, variant, seed if not isinstance(seed, np.random.Generator) else None)
    found: dict[int, int] = {}
    current = n
    step = 0
    while current > 1:
        state = build_manifold(current, table, rng, amplitudes if step == 0 else None)
        out = measure_h1_detail(state, rng)
        p = out.prime
        after = current // p
        run.divisions += 1
        found[p] = found.get(p, 0) + 1
        if variant == "B":
            while after % p == 0:
                after //= p
                run.divisions += 1
                found[p] += 1
        step += 1
        run.trace.append(MeasurementRecord(step, p, out.probability, current, after, out.draw))
        current = after
    run.result = Factorization(n, found)
    return run


def primality_test(n: int, table: PrimeTable, rng=None) -> bool:
    """One measurement of ``H1``: ``n`` is prime iff the outcome is ``n`` itself."""
    rng = make_rng(rng)
    prime, _ = measure_h1(build_manifold(n, table, rng), rng)
    return prime == int(n)


@dataclass
class PathNode:
    """Node of the outcome tree; ``children`` maps an observed prime to the next node."""

    n: int
    found: dict
    children: dict = field(default_factory=dict)

    @property
    def is_leaf(self) -> bool:
        return not self.children

    def leaves(self):
        if self.is_leaf:
            yield self
        for child in self.children.values():
            yield from child.leaves()

    def paths(self, prefix=()):
        """Every root-to-leaf sequence of observed primes."""
        if self.is_leaf:
            yield prefix
        for p, child in self.children.items():
            yield from child.paths(prefix + (p,))

    def to_dict(self) -> dict:
        out = {"n": self.n}
        if self.is_leaf:
            out["factorization"] = {str(p): a for p, a in sorted(self.found.items())}
        else:
            out["children"] = [{"prime": p, "node": c.to_dict()} for p, c in self.children.items()]
        return out


def enumerate_paths(n: int, table: PrimeTable, variant: str = "B") -> PathNode:
    """Tree of every possible outcome sequence.

    Edges carry the observed prime.  Each leaf holds the factorization that
    path accumulates.
    """
    if variant not in VARIANTS:
        raise PreconditionError(f"variant must be 'A' or 'B', got {variant!r}")
    n = int(n)
    _check_range(n, table)

    def grow(current: int, found: dict) -> PathNode:
        node = PathNode(current, found)
        if current == 1:
            return node
        for p in (b.prime for b in manifold_branches(current, table)):
            after, got = current // p, dict(found)
            got[p] = got.get(p, 0) + 1
            while variant == "B" and after % p == 0:
                after //= p
                got[p] += 1
            node.children[p] = grow(after, got)
        return node

    return grow(n, {})


def path_edges(root: PathNode) -> list[dict]:
    """Flatten the tree into edges with path-style node ids (``231/3/7``)."""
    edges = []

    def walk(node: PathNode, ident: str):
        for p, child in node.children.items():
            cid = f"{ident}/{p}"
            edges.append({"parent": ident, "child": cid, "parent_n": node.n, "child_n": child.n, "prime": p})
            walk(child, cid)

    walk(root, str(root.n))
    return edges


@dataclass
class WindowPreparation:
    iterations: int
    draws: list
    state: BranchState


def prepare_from_window(n: int, delta: int, table: PrimeTable, weights=None, rng=None, amplitudes=None) -> WindowPreparation:
    """Prepare ``|ln n>`` by repeated energy measurements of a windowed state.

    The window state has amplitude ``weights[i]`` on ``|ln (n - delta + i)>``
    (uniform if omitted).  Measuring ``H`` collapses it onto one integer;
    this repeats until the outcome is ``n``.  The iteration count is
    geometric with mean ``1 / |gamma_n|^2``.
    """
    n, delta = int(n), int(delta)
    if delta < 0:
        raise PreconditionError("window half-width must be >= 0")
    lo, hi = n - delta, n + delta
    if lo < 2 or hi > table.cutoff:
        raise PreconditionError(f"window [{lo}, {hi}] leaves the device range [2, {table.cutoff}]")
    size = 2 * delta + 1
    if weights is None:
        weights = np.full(size, 1 / np.sqrt(size))
    gamma = np.asarray(weights, dtype=np.complex128)
    if gamma.size != size:
        raise PreconditionError(f"need {size} window weights, got {gamma.size}")
    probs = np.abs(gamma) ** 2
    if abs(probs.sum() - 1.0) > 1e-9:
        raise PreconditionError("window weights are not normalised")
    if probs[delta] == 0.0:
        raise PreconditionError(f"weight of N = {n} is zero; preparation would never halt")
    rng = make_rng(rng)
    ints = np.arange(lo, hi + 1)
    draws = []
    while True:
        got = int(rng.choice(ints, p=probs / probs.sum()))
        draws.append(got)
        if got == n:
            break
    return WindowPreparation(len(draws), draws, build_manifold(n, table, rng, amplitudes))
