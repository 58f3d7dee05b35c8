"""Diagonal multi-spin operators with integer, prime or log-prime spectra.

Basis states of a ``d``-qubit register are bitmasks ``b``; bit ``j-1`` is the
occupation ``n_j`` of qubit ``j``.  An operator

    O = sum_S j_S prod_{i in S} N_i

(``S`` ranging over all subsets of ``{1..d}``, the empty one included) is
diagonal with ``O|b> = e(b)|b>`` where ``e(b) = sum_{S subset of b} j_S``.
This is the zeta transform on the subset lattice, and the couplings follow
from the target eigenvalues by its inverse, the Moebius transform.  Both run
in ``O(d 2^d)``.  No dense ``2^d x 2^d`` matrix is ever built except in the
cross-check :func:`solve_couplings_dense`.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from itertools import combinations

import numpy as np

from .errors import PreconditionError
from .numtheory import sieve

MAX_D = 24
TARGET_KINDS = ("primes", "log-primes")
ORDERS = ("lexicographic", "reference")

# Within-popcount order of the two-qubit terms in the d = 3 reference operator.
# The d = 2, 4, 5 reference operators list subsets lexicographically.
_REFERENCE_D3_PAIRS = ((1, 2), (2, 3), (1, 3))


def _check_d(d: int, lo: int = 0) -> None:
    if not lo <= d <= MAX_D:
        raise PreconditionError(f"qubit count d must lie in [{lo}, {MAX_D}], got {d}")


def mask_to_subset(mask: int) -> tuple[int, ...]:
    """Bitmask -> 1-based qubit indices, e.g. ``0b101 -> (1, 3)``."""
    out, i = [], 1
    while mask:
        if mask & 1:
            out.append(i)
        mask >>= 1
        i += 1
    return tuple(out)


def subset_to_mask(subset) -> int:
    mask = 0
    for i in subset:
        mask |= 1 << (i - 1)
    return mask


def mask_bits(mask: int, d: int) -> str:
    """Bit string with qubit ``d`` leftmost and qubit 1 rightmost."""
    return format(mask, f"0{d}b") if d else ""


def _as_transform_input(values) -> tuple[np.ndarray, int]:
    a = np.array(values)
    if a.ndim != 1:
        raise PreconditionError("expected a one-dimensional array")
    d = a.size.bit_length() - 1
    if a.size != 1 << d:
        raise PreconditionError(f"length {a.size} is not a power of two")
    if a.dtype.kind in "iub":
        a = a.astype(np.int64)
    else:
        a = a.astype(np.float64)
    return a, d


def zeta_transform(values) -> np.ndarray:
    """``out[b] = sum over S subset of b of values[S]``."""
    a, d = _as_transform_input(values)
    for i in range(d):
        v = a.reshape(-1, 2, 1 << i)
        v[:, 1, :] += v[:, 0, :]
    return a


def mobius_transform(values) -> np.ndarray:
    """Inverse of :func:`zeta_transform`:
    ``out[S] = sum over T subset of S of (-1)^|S - T| values[T]``."""
    a, d = _as_transform_input(values)
    for i in range(d):
        v = a.reshape(-1, 2, 1 << i)
        v[:, 1, :] -= v[:, 0, :]
    return a


def build_o2_diagonal(d: int) -> np.ndarray:
    """Eigenvalues of ``2 + sum_j 2^(j-1) N_j``: entry ``b`` is ``b + 2``."""
    _check_d(d, lo=1)
    return np.arange(2, (1 << d) + 2, dtype=np.int64)


@dataclass(frozen=True)
class Assignment:
    """Bijection basis state ``b`` -> index into the sorted target list."""

    target_index: np.ndarray
    order: str = "custom"

    def __post_init__(self):
        idx = np.asarray(self.target_index, dtype=np.int64)
        if not np.array_equal(np.sort(idx), np.arange(idx.size)):
            raise PreconditionError("assignment is not a bijection")
        object.__setattr__(self, "target_index", idx)

    @property
    def d(self) -> int:
        return self.target_index.size.bit_length() - 1

    def states_in_order(self) -> np.ndarray:
        """Basis states sorted by the target they receive."""
        return np.argsort(self.target_index, kind="stable")


def _group_order(d: int, size: int, order: str) -> list[tuple[int, ...]]:
    subsets = list(combinations(range(1, d + 1), size))
    if order == "reference" and d == 3 and size == 2:
        return list(_REFERENCE_D3_PAIRS)
    return subsets


def canonical_assignment(d: int, order: str = "lexicographic") -> Assignment:
    """Targets in increasing order go to states sorted by popcount, then by
    ``order`` within each popcount group.

    ``lexicographic`` compares the sorted qubit tuples.  ``reference`` follows
    the reference operators, which differ from lexicographic only in the
    two-qubit terms of the ``d = 3`` case: ``{1,2}, {2,3}, {1,3}``.
    """
    _check_d(d)
    if order not in ORDERS:
        raise PreconditionError(f"unknown within-group order {order!r}")
    idx = np.empty(1 << d, dtype=np.int64)
    pos = 0
    for size in range(d + 1):
        for subset in _group_order(d, size, order):
            idx[subset_to_mask(subset)] = pos
            pos += 1
    return Assignment(idx, order)


@dataclass
class CouplingSet:
    """Couplings ``j_S`` indexed by bitmask, with the target they encode."""

    d: int
    j: np.ndarray
    target: str = "primes"
    assignment: Assignment | None = None

    def __post_init__(self):
        if self.j.shape != (1 << self.d,):
            raise PreconditionError(f"need exactly 2^{self.d} couplings, got {self.j.shape}")

    def coefficient(self, subset) -> float:
        return self.j[subset_to_mask(subset)].item()

    def entries(self) -> list[dict]:
        """One record per coupling, ordered by popcount then lexicographically."""
        masks = sorted(range(1 << self.d), key=lambda m: (bin(m).count("1"), mask_to_subset(m)))
        return [
            {"mask": m, "bits": mask_bits(m, self.d), "subset": list(mask_to_subset(m)), "j": self.j[m].item()}
            for m in masks
        ]

    def to_dict(self) -> dict:
        return {
            "schema": 1,
            "d": self.d,
            "target": self.target,
            "assignment": None if self.assignment is None else {
                "order": self.assignment.order,
                "target_index": self.assignment.target_index.tolist(),
            },
            "entries": self.entries(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "CouplingSet":
        d = int(data["d"])
        values = [e["j"] for e in data["entries"]]
        integral = all(float(v).is_integer() for v in values)
        j = np.zeros(1 << d, dtype=np.int64 if integral else np.float64)
        for e in data["entries"]:
            mask = subset_to_mask(e["subset"]) if "subset" in e else int(e["mask"])
            j[mask] = e["j"]
        a = data.get("assignment")
        assignment = None if a is None else Assignment(np.array(a["target_index"]), a.get("order", "custom"))
        return cls(d, j, data.get("target", "primes"), assignment)


def target_values(d: int, target: str = "primes") -> np.ndarray:
    """The first ``2^d`` primes, or their natural logs."""
    if target not in TARGET_KINDS:
        raise PreconditionError(f"unknown target kind {target!r}")
    primes = sieve(1 << d).primes
    return primes.copy() if target == "primes" else np.log(primes.astype(np.float64))


def _assigned_eigenvalues(d, targets, assignment):
    t = np.asarray(targets)
    if t.shape != (1 << d,):
        raise PreconditionError(f"need exactly 2^{d} = {1 << d} targets, got {t.size}")
    if assignment is None:
        assignment = canonical_assignment(d)
    if assignment.d != d:
        raise PreconditionError("assignment is for a different register size")
    return t[assignment.target_index], assignment


def solve_couplings(d: int, targets, assignment: Assignment | None = None, target: str = "primes") -> CouplingSet:
    """Couplings whose operator puts ``targets[assignment[b]]`` on state ``b``.

    Integer targets give exact integer couplings.
    """
    _check_d(d)
    e, assignment = _assigned_eigenvalues(d, targets, assignment)
    return CouplingSet(d, mobius_transform(e), target, assignment)


def solve_couplings_dense(d: int, targets, assignment: Assignment | None = None) -> np.ndarray:
    """Same couplings from a dense ``2^d x 2^d`` linear solve; for cross-checks only."""
    if not 0 <= d <= 10:
        raise PreconditionError("dense solve is limited to d <= 10")
    e, _ = _assigned_eigenvalues(d, targets, assignment)
    b = np.arange(1 << d)
    # A[b, S] = 1 iff S is a subset of b
    a = ((b[:, None] & b[None, :]) == b[None, :]).astype(np.float64)
    return np.linalg.solve(a, e.astype(np.float64))


def eigenvalues_from_couplings(cs: CouplingSet) -> np.ndarray:
    """Diagonal of the operator: ``e(b) = sum_{S subset of b} j_S``."""
    return zeta_transform(cs.j)


def synthesize(d: int, target: str = "primes", order: str = "lexicographic") -> CouplingSet:
    """Couplings for the first ``2^d`` primes (or logs) under a canonical assignment."""
    return solve_couplings(d, target_values(d, target), canonical_assignment(d, order), target)


def reference_tables() -> dict[int, CouplingSet]:
    """Reference coefficient tables for ``d = 2..5``, keyed by ``d``."""
    text = resources.files("specfactor").joinpath("fixtures/reference_tables.json").read_text()
    raw = json.loads(text)
    return {int(d): CouplingSet.from_dict(t) for d, t in raw["tables"].items()}


def verify_couplings(cs: CouplingSet) -> dict:
    """Check that ``cs`` has the first ``2^d`` primes (or logs) as its spectrum."""
    ev = eigenvalues_from_couplings(cs)
    expected = target_values(cs.d, cs.target)
    if cs.target == "primes":
        ok = bool(np.array_equal(np.sort(ev), expected))
        err = float(np.abs(np.sort(ev) - expected).max())
    else:
        err = float(np.abs(np.sort(ev) - expected).max())
        ok = err <= 1e-12 * max(1.0, float(np.abs(expected).max()))
    missing = sorted(set(expected.tolist()) - set(ev.tolist())) if cs.target == "primes" else []
    return {"d": cs.d, "target": cs.target, "multiset_match": ok, "max_abs_error": err, "missing": missing}
