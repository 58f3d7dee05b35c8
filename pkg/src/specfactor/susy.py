"""One-dimensional potentials with prescribed spectra from iterated SUSY QM.

Units are hbar = 1, 2m = 1, so every Hamiltonian is ``-d^2/dx^2 + V(x)``.

Construction, for targets ``e_0 < e_1 < ... < e_M``:

* spacings ``E_k = e_{M-k} - e_M`` (all negative), ``k = 1..M``;
* superpotentials solve ``W_k' = E_k + W_k^2 - V_{k-1}`` with ``W_k(0) = 0``;
* partner potentials ``V_k = 2 E_k + 2 W_k^2 - V_{k-1}``, ``V_0 = 0``.

``V_M`` carries bound states at ``E_1 .. E_M`` below a continuum that starts
at 0.  The continuum edge plays the role of the top target ``e_M``; a
constant offset moves the ground state onto ``e_0``.

Because ``V_{k-1}`` is an algebraic function of ``W_1 .. W_{k-1}``, the
ladder is integrated as one lower-triangular system, so the RK4 stages of
``W_k`` see consistent mid-step values of every earlier superpotential.
The potentials are even and every ``W_k`` is odd, so the integration runs
on ``x >= 0`` and is mirrored.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.linalg import eigh_tridiagonal

from .errors import NumericalError, PreconditionError

DEFAULT_HALF_WIDTH = 12.0
DEFAULT_INTERVALS = 512  # half-line steps: h = L / 512
BLOWUP = 1e6

LLOYD_VARIANTS = ("upper", "transposed", "riccati")


@dataclass(frozen=True)
class Grid:
    """Uniform symmetric grid on ``[-half_width, half_width]`` containing 0."""

    half_width: float = DEFAULT_HALF_WIDTH
    step: float | None = None

    def __post_init__(self):
        if self.half_width <= 0:
            raise PreconditionError("grid half-width must be positive")
        step = self.step if self.step is not None else self.half_width / DEFAULT_INTERVALS
        if step <= 0:
            raise PreconditionError("grid step must be positive")
        n = round(self.half_width / step)
        if n < 2 or abs(n * step - self.half_width) > 1e-9 * self.half_width:
            raise PreconditionError("half-width must be an integer multiple (>= 2) of the step")
        object.__setattr__(self, "step", float(step))

    @property
    def n_half(self) -> int:
        return round(self.half_width / self.step)

    @property
    def nodes(self) -> np.ndarray:
        n = self.n_half
        return np.arange(-n, n + 1) * self.step

    def refined(self) -> "Grid":
        return Grid(self.half_width, self.step / 2)


def _partner_potentials(spacings: np.ndarray, w: np.ndarray) -> np.ndarray:
    """``V_1 .. V_M`` from the recurrence, vectorised over trailing axes.

    ``V_k = sum_{j<=k} (-1)^(k-j) t_j`` with ``t_j = 2 (E_j + W_j^2)``.
    """
    m = spacings.shape[0]
    sign = np.where(np.arange(1, m + 1) % 2 == 0, 1.0, -1.0)
    sign = sign.reshape((m,) + (1,) * (w.ndim - 1))
    t = 2.0 * (spacings.reshape(sign.shape) + w * w)
    return sign * np.cumsum(sign * t, axis=0)


def _previous_potentials(spacings: np.ndarray, w: np.ndarray) -> np.ndarray:
    """``V_0 .. V_{M-1}``: the potential each ``W_k`` sees."""
    v = _partner_potentials(spacings, w)
    out = np.zeros_like(w)
    out[1:] = v[:-1]
    return out


def _ladder_rhs(spacings, w):
    return spacings + w * w - _previous_potentials(spacings, w)


def _rk4_half_line(spacings: np.ndarray, h: float, n: int, blowup: float) -> tuple[np.ndarray, np.ndarray]:
    """Integrate the ladder on ``x = 0, h, .., n h``.

    Returns the trajectory ``(M, n+1)`` and, per ``k``, the last node index
    at which ``W_1 .. W_k`` are all finite and below ``blowup``.
    """
    m = spacings.size
    traj = np.empty((m, n + 1))
    y = np.zeros(m)
    traj[:, 0] = y
    with np.errstate(over="ignore", invalid="ignore"):
        for i in range(n):
            k1 = _ladder_rhs(spacings, y)
            k2 = _ladder_rhs(spacings, y + 0.5 * h * k1)
            k3 = _ladder_rhs(spacings, y + 0.5 * h * k2)
            k4 = _ladder_rhs(spacings, y + h * k3)
            y = y + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
            traj[:, i + 1] = y
    bad = ~np.isfinite(traj) | (np.abs(traj) >= blowup)
    # W_k is garbage once any earlier superpotential has diverged
    bad = np.logical_or.accumulate(bad, axis=0)
    last_good = np.where(bad.any(axis=1), bad.argmax(axis=1) - 1, n)
    return traj, last_good


def _derivative(values: np.ndarray, h: float) -> np.ndarray:
    """Five-point centred first derivative along the last axis (interior only)."""
    f = values
    return (f[..., :-4] - 8 * f[..., 1:-3] + 8 * f[..., 3:-1] - f[..., 4:]) / (12.0 * h)


@dataclass
class SuperpotentialSet:
    """Gridded superpotentials ``W_1 .. W_M`` on the common valid sub-grid."""

    targets: np.ndarray
    spacings: np.ndarray  # E_1 .. E_M
    grid: Grid
    x: np.ndarray  # valid sub-grid nodes
    w: np.ndarray  # shape (M, len(x))
    valid_half_width: np.ndarray  # per k

    @property
    def m(self) -> int:
        return int(self.spacings.size)

    @property
    def h(self) -> float:
        return self.grid.step

    def partner_potentials(self) -> np.ndarray:
        """``V_1 .. V_M`` on ``x`` via the step recurrence."""
        return _partner_potentials(self.spacings, self.w)

    def derivatives(self) -> tuple[np.ndarray, np.ndarray]:
        """``(x_interior, W')`` by centred finite differences."""
        return self.x[2:-2], _derivative(self.w, self.h)

    def riccati_residuals(self) -> np.ndarray:
        """``W_k' - (E_k + W_k^2 - V_{k-1})`` on the interior nodes, shape (M, n)."""
        _, dw = self.derivatives()
        w = self.w[:, 2:-2]
        prev = _previous_potentials(self.spacings, self.w)[:, 2:-2]
        return dw - (self.spacings[:, None] + w * w - prev)


def build_superpotentials(
    targets,
    grid: Grid | None = None,
    *,
    blowup: float = BLOWUP,
    min_half_width: float | None = None,
) -> SuperpotentialSet:
    """Solve the Riccati ladder for a strictly increasing list of target levels.

    Parameters
    ----------
    targets : sequence of float
        ``e_0 .. e_M``.  Only differences matter; ``e_0`` is subtracted.
    grid : Grid, optional
        Fixed grid.  When omitted, ``h = 12 / 512`` and the half-width starts
        at 12 and doubles until the weakest level's tail and the potential
        both die out inside the box (see :func:`auto_grid`).
    blowup : float
        ``|W_k|`` above this marks divergence and clips the valid sub-grid.
    min_half_width : float, optional
        Smallest acceptable valid half-width, default ``L / 4``.

    Raises
    ------
    NumericalError
        If some ``W_k`` diverges before ``min_half_width``.
    """
    e = np.asarray(targets, dtype=np.float64).ravel()
    if e.size < 1:
        raise PreconditionError("need at least one target level")
    if np.any(np.diff(e) <= 0):
        raise PreconditionError("targets must be strictly increasing")
    if grid is None:
        return auto_grid(targets, blowup=blowup, min_half_width=min_half_width)
    if min_half_width is None:
        min_half_width = grid.half_width / 4
    e = e - e[0]
    m = e.size - 1
    spacings = e[m - 1 :: -1] - e[m] if m else np.zeros(0)
    n = grid.n_half
    h = grid.step

    if m == 0:
        return SuperpotentialSet(np.asarray(targets, float), spacings, grid, grid.nodes, np.zeros((0, 2 * n + 1)), np.zeros(0))

    traj, last_good = _rk4_half_line(spacings, h, n, blowup)
    per_k = last_good * h
    keep = int(last_good.min())
    if keep * h < min_half_width:
        k = int(np.argmin(last_good)) + 1
        raise NumericalError(
            f"superpotential W_{k} diverged at |x| = {(keep + 1) * h:.4g}, "
            f"before the minimum half-width {min_half_width:g}"
        )
    half = traj[:, : keep + 1]
    w = np.concatenate([-half[:, :0:-1], half], axis=1)
    x = np.arange(-keep, keep + 1) * h
    return SuperpotentialSet(np.asarray(targets, float), spacings, grid, x, w, per_k)


def auto_grid(
    targets,
    *,
    step: float = DEFAULT_HALF_WIDTH / DEFAULT_INTERVALS,
    tail: float = 12.0,
    edge_tol: float = 1e-9,
    max_doublings: int = 8,
    **kwargs,
) -> SuperpotentialSet:
    """Build superpotentials on a box wide enough for the requested spectrum.

    Starts from ``L = 12`` and doubles until ``kappa_1 L >= tail``, where
    ``kappa_1^2`` is the smallest binding energy, and ``|V_M| <= edge_tol``
    at the walls.
    """
    e = np.asarray(targets, dtype=np.float64).ravel()
    half = DEFAULT_HALF_WIDTH
    if e.size > 1:
        kappa = math.sqrt(e[-1] - e[-2])
        while kappa * half < tail:
            half *= 2
    for _ in range(max_doublings + 1):
        sps = build_superpotentials(e, Grid(half, step), **kwargs)
        if sps.m == 0 or sps.x[-1] < half - 0.5 * step:
            return sps
        edge = unrolled_potential(sps)[[0, -1]]
        if np.abs(edge).max() <= edge_tol:
            return sps
        half *= 2
    raise NumericalError(f"potential still {np.abs(edge).max():.3g} at |x| = {half / 2:g}; spectrum too dense")


def unrolled_potential(sps: SuperpotentialSet) -> np.ndarray:
    """``V_M = 2 sum_k (-1)^(M-k) (E_k + W_k^2)`` without the offset."""
    m = sps.m
    if m == 0:
        return np.zeros_like(sps.x)
    sign = (-1.0) ** (m - np.arange(1, m + 1))
    return 2.0 * np.sum(sign[:, None] * (sps.spacings[:, None] + sps.w**2), axis=0)


@dataclass
class PotentialTable:
    """Gridded ``V(x)`` including its constant offset, plus provenance."""

    x: np.ndarray
    v: np.ndarray
    targets: np.ndarray
    offset: float
    step: float
    residual_max: float | None = None
    meta: dict = field(default_factory=dict)

    @property
    def threshold(self) -> float:
        """Continuum edge of the shifted potential; stands in for the top target."""
        return self.offset

    @property
    def half_width(self) -> float:
        return float(self.x[-1])

    def metadata(self) -> dict:
        out = {
            "schema": 1,
            "targets": [float(t) for t in self.targets],
            "offset": float(self.offset),
            "analytic_offset": float(self.targets[-1]),
            "valid_subgrid": [float(self.x[0]), float(self.x[-1])],
            "step": float(self.step),
            "nodes": int(self.x.size),
            "riccati_residual_max": None if self.residual_max is None else float(self.residual_max),
        }
        out.update(self.meta)
        return out

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["x", "V"])
            for xi, vi in zip(self.x, self.v):
                writer.writerow([repr(float(xi)), repr(float(vi))])

    def write_metadata(self, path) -> None:
        Path(path).write_text(json.dumps(self.metadata(), indent=2, sort_keys=True) + "\n")

    @classmethod
    def read_csv(cls, path, metadata: dict | None = None) -> "PotentialTable":
        """Load ``x, V`` columns; targets and offset come from ``metadata`` if given.

        Without metadata the offset is estimated from the potential at the
        grid edges.
        """
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        if not rows or [c.strip() for c in rows[0]] != ["x", "V"]:
            raise PreconditionError(f"{path}: expected a header row 'x,V'")
        data = np.array([[float(a), float(b)] for a, b in rows[1:]])
        x, v = data[:, 0], data[:, 1]
        steps = np.diff(x)
        if x.size < 5 or np.ptp(steps) > 1e-9 * max(1.0, abs(steps[0])):
            raise PreconditionError(f"{path}: x must be a uniform grid of at least 5 nodes")
        if metadata is not None:
            targets = np.asarray(metadata["targets"], float)
            offset = float(metadata["offset"])
        else:
            targets = np.zeros(0)
            offset = float(0.5 * (v[0] + v[-1]))
        return cls(x, v, targets, offset, float(steps.mean()))


def _lowest_eigenvalues(v: np.ndarray, h: float, n_levels: int) -> np.ndarray:
    # Dirichlet walls at the first and last node
    inner = v[1:-1]
    if n_levels > inner.size:
        raise NumericalError("grid has fewer interior nodes than requested levels")
    diag = 2.0 / h**2 + inner
    off = np.full(inner.size - 1, -1.0 / h**2)
    return eigh_tridiagonal(diag, off, select="i", select_range=(0, n_levels - 1), eigvals_only=True)


def _solve(v: np.ndarray, h: float, n_levels: int, extrapolate: bool, conv_tol: float) -> np.ndarray:
    fine = _lowest_eigenvalues(v, h, n_levels)
    if not extrapolate:
        return fine
    coarse = _lowest_eigenvalues(v[::2], 2 * h, n_levels)
    gap = np.abs(fine - coarse)
    if gap.max() > conv_tol:
        worst = int(gap.argmax())
        raise NumericalError(
            f"grid too coarse: level {worst} moves by {gap[worst]:.3g} between h and 2h "
            f"(tolerance {conv_tol:g})"
        )
    # second-order stencil: Richardson removes the h^2 term
    return (4.0 * fine - coarse) / 3.0


def eigen_solve(pt: PotentialTable, n_levels: int, *, extrapolate: bool = True, conv_tol: float = 5e-2) -> np.ndarray:
    """Lowest ``n_levels`` eigenvalues of ``-d^2/dx^2 + V`` on the table's grid.

    Three-point finite differences with Dirichlet walls at the grid edges.
    With ``extrapolate`` the problem is also solved on every other node and
    the two results are Richardson-combined; if they disagree by more than
    ``conv_tol`` the grid is declared too coarse.
    """
    if n_levels < 1:
        raise PreconditionError("n_levels must be >= 1")
    if pt.targets.size and n_levels > pt.targets.size:
        raise PreconditionError(f"asked for {n_levels} levels but the table was built for {pt.targets.size}")
    return _solve(pt.v, pt.step, n_levels, extrapolate, conv_tol)


def assemble_potential(sps: SuperpotentialSet, *, offset: float | None = None) -> PotentialTable:
    """Assemble ``V_M`` from the superpotentials and shift it.

    Unless ``offset`` is given, it is fixed empirically so the numerically
    computed ground state lands on ``targets[0]``.
    """
    raw = unrolled_potential(sps)
    e0 = float(sps.targets[0])
    if offset is None:
        if sps.m == 0:
            offset = e0
        else:
            ground = _solve(raw, sps.h, 1, True, np.inf)[0]
            offset = e0 - float(ground)
    resid = float(np.abs(sps.riccati_residuals()).max()) if sps.m else 0.0
    return PotentialTable(sps.x.copy(), raw + offset, sps.targets.copy(), float(offset), sps.h, resid)


def recovered_spectrum(pt: PotentialTable, **kwargs) -> np.ndarray:
    """Bound levels of ``pt`` followed by the continuum edge.

    The result lines up with ``pt.targets`` entry for entry.
    """
    n_bound = pt.targets.size - 1
    if n_bound < 0:
        raise PreconditionError("table carries no target list")
    if n_bound == 0:
        return np.array([pt.threshold])
    bound = eigen_solve(pt, n_bound, **kwargs)
    if bound[-1] >= pt.threshold:
        raise NumericalError(
            f"only {int(np.sum(bound < pt.threshold))} of {n_bound} levels are bound; "
            "widen the grid or refine the step"
        )
    return np.append(bound, pt.threshold)


def build_potential(targets, grid: Grid | None = None, **kwargs) -> PotentialTable:
    """Convenience pipeline: superpotentials then assembled, shifted potential."""
    return assemble_potential(build_superpotentials(targets, grid, **kwargs))


# --- Lloyd form -----------------------------------------------------------


def lloyd_matrix(w: np.ndarray, variant: str = "upper") -> np.ndarray:
    """Matrix ``f(W)`` of ``W' + f(W) W = b``; ``w`` has shape (M,) or (M, n).

    Indices are 1-based in the formulas below.

    ``upper``
        ``f_ab = 0`` for ``a > b``, ``-W_a`` on the diagonal,
        ``(-1)^a 2 W_b`` for ``a < b``.
    ``transposed``
        Same entries moved below the diagonal: ``(-1)^a 2 W_b`` for ``a > b``.
    ``riccati``
        Read off the ladder directly: ``(-1)^(a-b-1) 2 W_b`` for ``a > b``.
    """
    if variant not in LLOYD_VARIANTS:
        raise PreconditionError(f"unknown Lloyd variant {variant!r}")
    w = np.asarray(w, dtype=np.float64)
    m = w.shape[0]
    a = np.arange(1, m + 1)[:, None]
    b = np.arange(1, m + 1)[None, :]
    if variant == "upper":
        mask, sign = a < b, (-1.0) ** a
    elif variant == "transposed":
        mask, sign = a > b, (-1.0) ** a
    else:
        mask, sign = a > b, (-1.0) ** (a - b - 1)
    coef = np.where(mask, 2.0 * sign, 0.0)  # (M, M)
    wb = w[None, :, ...]  # column index carries W_b
    coef = coef.reshape(coef.shape + (1,) * (w.ndim - 1))
    f = coef * wb
    diag = np.arange(m)
    f[diag, diag] = -w
    return f


def lloyd_vector(spacings) -> np.ndarray:
    """``b_k = E_k + sum_{i=1}^{k-1} (-1)^i 2 E_{k-i}``."""
    e = np.asarray(spacings, dtype=np.float64)
    b = e.copy()
    for k in range(e.size):
        for i in range(1, k + 1):
            b[k] += (-1) ** i * 2.0 * e[k - i]
    return b


@dataclass
class LloydSystem:
    """``f`` and ``b`` at one node, with the residual against the trajectory."""

    m: int
    x: float
    variant: str
    w: np.ndarray
    dw: np.ndarray
    f: np.ndarray
    b: np.ndarray

    @property
    def residual(self) -> np.ndarray:
        return self.dw + self.f @ self.w - self.b

    def to_dict(self) -> dict:
        return {
            "schema": 1,
            "m": self.m,
            "x": self.x,
            "variant": self.variant,
            "W": self.w.tolist(),
            "dW": self.dw.tolist(),
            "f": self.f.tolist(),
            "b": self.b.tolist(),
            "residual": self.residual.tolist(),
        }


def build_lloyd_system(sps: SuperpotentialSet, x: float, variant: str = "upper") -> LloydSystem:
    """Instantiate the Lloyd-form system at grid node ``x``.

    ``W'`` comes from centred differences of the integrated trajectory, so
    ``x`` must be at least two nodes inside the valid sub-grid.
    """
    xi, dw = sps.derivatives()
    idx = int(np.argmin(np.abs(xi - x)))
    if abs(xi[idx] - x) > 1e-9 * max(1.0, abs(x)):
        raise PreconditionError(f"x = {x} is not an interior node of the valid sub-grid")
    w = sps.w[:, idx + 2]
    return LloydSystem(sps.m, float(xi[idx]), variant, w, dw[:, idx], lloyd_matrix(w, variant), lloyd_vector(sps.spacings))


def lloyd_residuals(sps: SuperpotentialSet, variant: str = "upper") -> np.ndarray:
    """Residual ``W' + f(W) W - b`` at every interior node, shape (M, n)."""
    _, dw = sps.derivatives()
    w = sps.w[:, 2:-2]
    f = lloyd_matrix(w, variant)
    fw = np.einsum("abn,bn->an", f, w)
    return dw + fw - lloyd_vector(sps.spacings)[:, None]


def lloyd_equivalence_report(sps: SuperpotentialSet, tol: float = 1e-4) -> dict:
    """Compare every Lloyd variant against the integrated ladder.

    Reports the largest residual of each variant and of the bare Riccati
    equations, and lists the variants that stay below ``tol``.
    """
    worst = {v: float(np.abs(lloyd_residuals(sps, v)).max()) for v in LLOYD_VARIANTS}
    riccati = float(np.abs(sps.riccati_residuals()).max())
    return {
        "m": sps.m,
        "tol": tol,
        "riccati_residual_max": riccati,
        "variant_residual_max": worst,
        "satisfied": [v for v in LLOYD_VARIANTS if worst[v] < tol],
        "b": lloyd_vector(sps.spacings).tolist(),
    }


def well_profile(pt: PotentialTable, bins: int = 16, noise: float = 1e-10) -> dict:
    """Shape summary of a symmetric well.

    ``strictly_monotone`` asks that ``V`` never rises while walking from an
    edge to the centre (steps smaller than ``noise`` ignored).
    ``coarse_monotone`` asks the same of ``V`` averaged over ``bins``
    equal-width blocks per side, which tolerates short-range ripples.
    """
    v = pt.v - pt.threshold
    c = pt.x.size // 2
    right = v[c:]
    left = v[c::-1]
    strict = bool(np.all(np.diff(right) >= -noise) and np.all(np.diff(left) >= -noise))
    n = (right.size // bins) * bins
    coarse_r = right[:n].reshape(bins, -1).mean(axis=1)
    coarse_l = left[:n].reshape(bins, -1).mean(axis=1)
    coarse = bool(np.all(np.diff(coarse_r) >= -noise) and np.all(np.diff(coarse_l) >= -noise))
    return {
        "min": float(v.min()),
        "argmin_x": float(pt.x[int(np.argmin(v))]),
        "max_above_threshold": float(v.max()),
        "parity_error": float(np.abs(v - v[::-1]).max()),
        "strictly_monotone": strict,
        "coarse_monotone": coarse,
    }

