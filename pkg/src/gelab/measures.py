"""Binned size distributions and the measure-level functionals used by
the solvers and diagnostics.

A SizeDistribution stores per-bin number density (number per unit volume
of state space); the number carried by bin i is counts[i] * width[i].
Atomic initial data keeps its exact positions: an atom is assigned wholly
to the bin containing it and that bin's pivot is relocated to the atom,
with the bin flagged atomic so interval queries treat it as a point mass.

Bins and dyadic cells are half-open on the left, (lo, hi], matching the
convention that the working volume range is (0, v_max].
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    DomainError,
    EmptyMeasureError,
    GelabError,
    SeparationUndecidedError,
)

# relative slack granted to the moment-root inequality check
_ROOT_INEQ_RTOL = 1e-12


@dataclass(frozen=True, eq=False)
class Grid:
    """Volume grid: edges of length n+1, pivots of length n inside bins."""

    edges: np.ndarray
    pivots: np.ndarray

    def __post_init__(self) -> None:
        edges = np.asarray(self.edges, dtype=float)
        pivots = np.asarray(self.pivots, dtype=float)
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "pivots", pivots)
        if edges.ndim != 1 or edges.size < 2:
            raise DomainError("grid needs at least two edges")
        if edges[0] <= 0 or np.any(np.diff(edges) <= 0):
            raise DomainError("grid edges must be positive and increasing")
        if pivots.shape != (edges.size - 1,):
            raise DomainError("grid needs one pivot per bin")
        if np.any(pivots <= edges[:-1]) or np.any(pivots > edges[1:]):
            raise DomainError("each pivot must lie inside its bin")

    @classmethod
    def from_edges(cls, edges) -> "Grid":
        """Grid with geometric-midpoint pivots."""
        edges = np.asarray(edges, dtype=float)
        pivots = np.sqrt(edges[:-1] * edges[1:])
        return cls(edges=edges, pivots=pivots)

    @property
    def n_bins(self) -> int:
        return self.edges.size - 1

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.edges)

    def locate(self, v: float) -> int:
        """Bin index with edges[i] < v <= edges[i+1]."""
        if not (self.edges[0] < v <= self.edges[-1]):
            raise DomainError(f"volume {v!r} outside grid range "
                              f"({self.edges[0]!r}, {self.edges[-1]!r}]")
        return int(np.searchsorted(self.edges, v, side="left")) - 1


@dataclass(eq=False)
class SizeDistribution:
    """Number density per bin plus the mass removed past the grid top."""

    grid: Grid
    counts: np.ndarray
    gel_mass: float = 0.0
    atomic: np.ndarray | None = None

    def __post_init__(self) -> None:
        counts = np.asarray(self.counts, dtype=float)
        if counts.shape != (self.grid.n_bins,):
            raise DomainError("counts must have one entry per bin")
        if np.any(counts < 0) or not np.all(np.isfinite(counts)):
            raise DomainError("counts must be finite and nonnegative")
        if self.gel_mass < 0:
            raise DomainError("gel_mass must be nonnegative")
        self.counts = counts
        if self.atomic is None:
            self.atomic = np.zeros(self.grid.n_bins, dtype=bool)
        else:
            self.atomic = np.asarray(self.atomic, dtype=bool)
            if self.atomic.shape != (self.grid.n_bins,):
                raise DomainError("atomic mask must have one entry per bin")

    def copy(self) -> "SizeDistribution":
        return SizeDistribution(grid=self.grid, counts=self.counts.copy(),
                                gel_mass=self.gel_mass,
                                atomic=self.atomic.copy())

    @property
    def bin_numbers(self) -> np.ndarray:
        """Number carried by each bin."""
        return self.counts * self.grid.widths


@dataclass(frozen=True)
class SeparatedPair:
    """Two support points whose balls of radius `separation` are disjoint
    with gap at least `separation`, each carrying positive mass."""

    lower: float
    upper: float
    separation: float

    def __post_init__(self) -> None:
        if not (0 < self.lower < self.upper):
            raise DomainError("separated pair needs 0 < lower < upper")
        if not self.separation > 0:
            raise DomainError("separation must be positive")
        if self.upper - self.lower < 3.0 * self.separation:
            raise DomainError("balls would overlap or close the gap")


@dataclass(frozen=True)
class SingleAtom:
    """Dyadic search outcome: all mass sits at one point."""

    position: float


def from_atoms(grid: Grid, atoms) -> SizeDistribution:
    """Distribution from point masses [(volume, weight), ...].

    Each atom lands wholly in its containing bin; a bin holding atoms has
    its pivot moved to their mass-weighted position and is flagged atomic.
    """
    counts = np.zeros(grid.n_bins)
    weight_sum = np.zeros(grid.n_bins)
    pos_sum = np.zeros(grid.n_bins)
    for v, w in atoms:
        if w < 0:
            raise DomainError("atom weights must be nonnegative")
        if w == 0:
            continue
        i = grid.locate(float(v))
        weight_sum[i] += w
        pos_sum[i] += w * v
    if not np.any(weight_sum > 0):
        raise EmptyMeasureError("no atoms with positive weight")
    widths = grid.widths
    occupied = weight_sum > 0
    counts[occupied] = weight_sum[occupied] / widths[occupied]
    pivots = grid.pivots.copy()
    pivots[occupied] = pos_sum[occupied] / weight_sum[occupied]
    atomic = occupied.copy()
    relocated = Grid(edges=grid.edges, pivots=pivots)
    return SizeDistribution(grid=relocated, counts=counts, atomic=atomic)


def from_density(grid: Grid, density, quad_order: int = 16
                 ) -> SizeDistribution:
    """Distribution whose bin numbers are per-bin integrals of `density`.

    density: vectorized callable on volumes.  Gauss-Legendre of fixed
    order per bin keeps the construction deterministic.
    """
    nodes, weights = np.polynomial.legendre.leggauss(quad_order)
    lo = grid.edges[:-1][:, None]
    hi = grid.edges[1:][:, None]
    mid = 0.5 * (hi + lo)
    half = 0.5 * (hi - lo)
    samples = mid + half * nodes[None, :]
    values = np.asarray(density(samples), dtype=float)
    bin_numbers = np.sum(values * weights[None, :], axis=1) * half[:, 0]
    if np.any(bin_numbers < 0):
        raise DomainError("density must be nonnegative on the grid")
    counts = bin_numbers / grid.widths
    return SizeDistribution(grid=grid, counts=counts)


# -- moments and cutoffs ----------------------------------------------------


def moment(dist: SizeDistribution, m: float) -> float:
    """Sum of pivot^m * counts * width; m = 0 gives number, m = 1 the
    tracked in-domain mass."""
    if not (m >= 0 and math.isfinite(m)):
        raise DomainError("moment order must be finite and nonnegative")
    return float(np.sum(dist.grid.pivots ** m * dist.bin_numbers))


def truncated_moment(dist: SizeDistribution, R: float, m: float) -> float:
    """Sum of (pivot - R)^m over bins with pivot >= R."""
    if R < 0:
        raise DomainError("truncation point must be nonnegative")
    if not m > 0:
        raise DomainError("truncated moment order must be positive")
    pivots = dist.grid.pivots
    sel = pivots >= R
    return float(np.sum((pivots[sel] - R) ** m * dist.bin_numbers[sel]))


def cutoff_pair(dist: SizeDistribution, R: float) -> tuple[float, float]:
    """Mass split (I_R, J_R) against the ramp cutoff.

    The cutoff is 1 on (0, R], falls linearly to 0 on (R, R+1], and
    vanishes beyond.  J_R weighs mass by the cutoff, I_R by its
    complement.  I_R is summed directly (it may be exponentially small);
    J_R is the exact float complement against moment(dist, 1), so
    I_R + J_R reproduces the first moment.
    """
    if R < 0:
        raise DomainError("cutoff radius must be nonnegative")
    contrib = dist.grid.pivots * dist.bin_numbers
    tail_w = np.clip(dist.grid.pivots - R, 0.0, 1.0)
    i_r = float(np.sum(contrib * tail_w))
    m1 = float(np.sum(contrib))
    j_r = m1 - i_r
    return i_r, j_r


def _interval_number(dist: SizeDistribution, lo: float, hi: float,
                     closed_left: bool) -> float:
    """Number mass in (lo, hi] (closed_left makes it [lo, hi])."""
    pivots = dist.grid.pivots
    numbers = dist.bin_numbers
    e_lo = dist.grid.edges[:-1]
    e_hi = dist.grid.edges[1:]
    if closed_left:
        in_atoms = (pivots >= lo) & (pivots <= hi)
    else:
        in_atoms = (pivots > lo) & (pivots <= hi)
    overlap = np.clip(np.minimum(e_hi, hi) - np.maximum(e_lo, lo), 0.0, None)
    per_bin = np.where(dist.atomic,
                       np.where(in_atoms, numbers, 0.0),
                       dist.counts * overlap)
    return float(np.sum(per_bin))


def ball_mass(dist: SizeDistribution, center: float, radius: float) -> float:
    """Number mass inside the closed ball [center - radius, center + radius],
    clamped to positive volumes.  Atomic bins count all-or-nothing at
    their pivot; density bins contribute in proportion to the overlap."""
    if not radius > 0:
        raise DomainError("ball radius must be positive")
    if not math.isfinite(center):
        raise DomainError("ball center must be finite")
    lo = max(center - radius, 0.0)
    hi = center + radius
    if hi <= 0:
        return 0.0
    return _interval_number(dist, lo, hi, closed_left=True)


# -- dyadic separated-mass search -------------------------------------------


def _occupied_cell_range(dist: SizeDistribution, horizon: float, depth: int
                         ) -> tuple[int, int] | None:
    """Lowest and highest dyadic cell index (j*w, (j+1)*w] carrying mass.

    Only the extremes matter for the gap test, so cells in between are
    never enumerated (a wide bin at depth 40 would cover ~1e12 of them).
    """
    n_cells = 2 ** depth
    width = horizon / n_cells
    numbers = dist.bin_numbers
    jmin: int | None = None
    jmax: int | None = None

    def _absorb(lo_idx: int, hi_idx: int) -> None:
        nonlocal jmin, jmax
        jmin = lo_idx if jmin is None else min(jmin, lo_idx)
        jmax = hi_idx if jmax is None else max(jmax, hi_idx)

    for i in range(dist.grid.n_bins):
        if numbers[i] <= 0:
            continue
        if dist.atomic[i]:
            p = dist.grid.pivots[i]
            if 0 < p <= horizon:
                j = min(int(math.ceil(p / width)) - 1, n_cells - 1)
                _absorb(max(j, 0), max(j, 0))
        else:
            a = dist.grid.edges[i]
            b = min(dist.grid.edges[i + 1], horizon)
            if b <= a:
                continue
            first = max(int(math.floor(a / width)), 0)
            last = min(int(math.ceil(b / width)) - 1, n_cells - 1)
            if last >= first:
                _absorb(first, last)
    if jmin is None:
        return None
    return jmin, jmax


def _cell_support_point(dist: SizeDistribution, lo: float, hi: float
                        ) -> float:
    """A support point of the heaviest bin slice inside (lo, hi]."""
    best_mass = 0.0
    best_point = None
    numbers = dist.bin_numbers
    for i in range(dist.grid.n_bins):
        if numbers[i] <= 0:
            continue
        if dist.atomic[i]:
            p = dist.grid.pivots[i]
            if lo < p <= hi and numbers[i] > best_mass:
                best_mass = numbers[i]
                best_point = p
        else:
            a = max(dist.grid.edges[i], lo)
            b = min(dist.grid.edges[i + 1], hi)
            if b > a:
                mass = dist.counts[i] * (b - a)
                if mass > best_mass:
                    best_mass = mass
                    best_point = 0.5 * (a + b)
    if best_point is None:
        raise GelabError("internal: occupied cell lost its support point")
    return float(best_point)


def find_separated_mass_pair(dist: SizeDistribution,
                             horizon: float | None = None,
                             max_depth: int = 40,
                             max_extensions: int = 1
                             ) -> SeparatedPair | SingleAtom:
    """Dyadic dichotomy on (0, horizon]: either two separated mass
    clusters or a single atom.

    Splits (0, horizon] into 2^n cells for n = 1, 2, ... and stops at the
    first depth where two occupied cells have index gap >= 2, returning
    their support points with separation a quarter cell width (half the
    cell width of the next depth), which keeps the two balls disjoint
    with a gap of at least one separation radius.  If every depth down to
    max_depth shows a single occupied cell, the mass is a point; when
    mass also sits beyond the horizon the horizon is doubled (at most
    max_extensions times) and the search rerun, since the point plus the
    outside mass must separate at some depth.  Anything else is reported
    as undecided rather than guessed.
    """
    if horizon is None:
        occupied = dist.bin_numbers > 0
        if not np.any(occupied):
            raise EmptyMeasureError("distribution carries no mass")
        horizon = float(dist.grid.edges[1:][occupied][-1])
    if not horizon > 0:
        raise DomainError("horizon must be positive")
    if max_depth < 1:
        raise DomainError("max_depth must be at least 1")

    total_in = _interval_number(dist, 0.0, horizon, closed_left=False)
    if total_in <= 0:
        raise EmptyMeasureError(f"no mass in (0, {horizon!r}]")

    for _ in range(max_extensions + 1):
        single_at_every_depth = True
        atom_position: float | None = None
        for depth in range(1, max_depth + 1):
            cell_range = _occupied_cell_range(dist, horizon, depth)
            if cell_range is None:
                raise EmptyMeasureError(f"no mass in (0, {horizon!r}]")
            j1, j2 = cell_range
            width = horizon / 2 ** depth
            if j2 - j1 >= 2:
                x1 = _cell_support_point(dist, j1 * width, (j1 + 1) * width)
                x2 = _cell_support_point(dist, j2 * width, (j2 + 1) * width)
                return SeparatedPair(lower=x1, upper=x2,
                                     separation=width / 4.0)
            if j2 != j1:
                single_at_every_depth = False
            else:
                atom_position = _cell_support_point(dist, j1 * width,
                                                    (j1 + 1) * width)
        if not single_at_every_depth:
            raise SeparationUndecidedError(
                f"mass straddles dyadic boundaries down to depth "
                f"{max_depth} without separating")
        beyond = _interval_number(dist, horizon, math.inf, closed_left=False)
        if beyond <= 0:
            return SingleAtom(position=float(atom_position))
        horizon *= 2.0
    raise SeparationUndecidedError(
        f"mass remains beyond the horizon after {max_extensions} "
        f"extension(s)")


# -- moment-root inequality ---------------------------------------------------


@dataclass(frozen=True)
class MomentRootCheck:
    """lhs = truncated_moment^(1/m), rhs = R * tail_number^(1/m)."""

    R: float
    m: float
    lhs: float
    rhs: float
    holds: bool


def moment_root_inequality_check(dist: SizeDistribution, R: float,
                                 m: float) -> MomentRootCheck:
    """Check M_{R,m}^(1/m) >= R * N_{2R}^(1/m) with N the number mass at
    pivots >= 2R.  Holds with equality slack 1e-12 relative."""
    if not R > 0:
        raise DomainError("R must be positive")
    if not m >= 1:
        raise DomainError("m must be at least 1")
    lhs = truncated_moment(dist, R, m) ** (1.0 / m)
    pivots = dist.grid.pivots
    tail_number = float(np.sum(dist.bin_numbers[pivots >= 2.0 * R]))
    rhs = R * tail_number ** (1.0 / m)
    holds = lhs >= rhs * (1.0 - _ROOT_INEQ_RTOL)
    return MomentRootCheck(R=R, m=m, lhs=lhs, rhs=rhs, holds=holds)


# -- CSV round trip -----------------------------------------------------------


def _fmt(x) -> str:
    # repr of a Python float is the shortest string that round-trips exactly
    return repr(float(x))


def distribution_to_csv(dist: SizeDistribution, path) -> None:
    """Write bin_lower,bin_upper,pivot,count rows under a # gel_mass header."""
    lines = [f"# gel_mass={_fmt(dist.gel_mass)}"]
    if np.any(dist.atomic):
        idx = ",".join(str(i) for i in np.flatnonzero(dist.atomic))
        lines.append(f"# atomic_bins={idx}")
    lines.append("bin_lower,bin_upper,pivot,count")
    e = dist.grid.edges
    for i in range(dist.grid.n_bins):
        lines.append(f"{_fmt(e[i])},{_fmt(e[i + 1])},{_fmt(dist.grid.pivots[i])},"
                     f"{_fmt(dist.counts[i])}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def distribution_from_csv(path) -> SizeDistribution:
    gel_mass = 0.0
    atomic_idx: list[int] = []
    rows: list[tuple[float, float, float, float]] = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                body = line[1:].strip()
                if body.startswith("gel_mass="):
                    gel_mass = float(body.split("=", 1)[1])
                elif body.startswith("atomic_bins="):
                    spec = body.split("=", 1)[1]
                    atomic_idx = [int(s) for s in spec.split(",") if s]
                continue
            if line.startswith("bin_lower"):
                continue
            parts = line.split(",")
            rows.append((float(parts[0]), float(parts[1]),
                         float(parts[2]), float(parts[3])))
    if not rows:
        raise EmptyMeasureError(f"no bins found in {path}")
    edges = np.array([r[0] for r in rows] + [rows[-1][1]])
    pivots = np.array([r[2] for r in rows])
    counts = np.array([r[3] for r in rows])
    atomic = np.zeros(len(rows), dtype=bool)
    atomic[atomic_idx] = True
    grid = Grid(edges=edges, pivots=pivots)
    return SizeDistribution(grid=grid, counts=counts, gel_mass=gel_mass,
                            atomic=atomic)
