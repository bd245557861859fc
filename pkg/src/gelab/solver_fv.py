"""Sectional (fixed-pivot) solver for binary coagulation.

The population lives on a geometric grid of volume bins, each represented
by a pivot.  A coalescence of pivots p_i + p_j produces volume s; the new
particle is split between the two pivots bracketing s with fractions chosen
so that both particle number and particle volume are conserved exactly.
Products between the last pivot and the grid ceiling are split against a
virtual pivot at the ceiling whose share leaves the resolved population and
is booked as gel mass; products beyond the ceiling leave wholesale.  Time
stepping is explicit Euler under a stability cap on the per-bin depletion
rate, so bin numbers can never be driven negative.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, StepRejectedError
from .initial import InitSpec
from .kernels import Kernel
from .measures import Grid, SizeDistribution

STATUS_COMPLETED = "completed"
STATUS_GELATION_RUNAWAY = "gelation_runaway"


def build_grid(v_min: float, v_max: float, bins_per_decade: int) -> Grid:
    """Geometric grid anchored so the top edge is exactly v_max.

    The bin count is the smallest n with v_max * 10^(-n/bins_per_decade)
    <= v_min (up to a tiny rounding guard), so the bottom edge lands at or
    just below v_min.
    """
    if not (0 < v_min < v_max) or not np.isfinite(v_max):
        raise DomainError(f"need 0 < v_min < v_max, got [{v_min}, {v_max}]")
    if bins_per_decade < 1 or bins_per_decade != int(bins_per_decade):
        raise DomainError(
            f"bins_per_decade must be a positive integer, got {bins_per_decade}")
    bpd = int(bins_per_decade)
    n = math.ceil(bpd * math.log10(v_max / v_min) - 1e-9)
    n = max(n, 1)
    edges = v_max * 10.0 ** ((np.arange(n + 1) - n) / bpd)
    edges[-1] = v_max
    return Grid.from_edges(edges)


@dataclass(frozen=True)
class FvConfig:
    v_min: float
    v_max: float
    bins_per_decade: int
    t_end: float
    n_samples: int = 50
    dt_safety: float = 0.5
    gel_stop_fraction: float | None = None

    def __post_init__(self):
        if not (self.t_end > 0 and np.isfinite(self.t_end)):
            raise DomainError(f"t_end must be positive, got {self.t_end}")
        if self.n_samples < 1:
            raise DomainError(
                f"n_samples must be positive, got {self.n_samples}")
        if not (0 < self.dt_safety <= 1.0):
            raise DomainError(
                f"dt_safety must lie in (0, 1], got {self.dt_safety}")
        if self.gel_stop_fraction is not None and not (
                0 < self.gel_stop_fraction <= 1.0):
            raise DomainError(
                f"gel_stop_fraction must lie in (0, 1], got "
                f"{self.gel_stop_fraction}")


class FvTables:
    """Precomputed coupling tables for one kernel on one grid.

    Pivot positions are static, so the kernel matrix and the redistribution
    targets of every unordered pivot pair are computed once.
    """

    def __init__(self, kernel: Kernel, grid: Grid):
        self.kernel = kernel
        self.grid = grid
        p = grid.pivots
        nb = grid.n_bins
        self.rate_matrix = kernel.evaluate(p[:, None], p[None, :])

        iu, ju = np.triu_indices(nb)
        self.pair_i = iu
        self.pair_j = ju
        # unordered-pair event rate = coeff * N_i * N_j
        self.pair_coeff = self.rate_matrix[iu, ju] * np.where(iu == ju, 0.5, 1.0)

        s = p[iu] + p[ju]
        v_max = grid.edges[-1]
        dest_lo = np.zeros(len(s), dtype=int)
        dest_hi = np.zeros(len(s), dtype=int)
        frac_lo = np.zeros(len(s))
        frac_hi = np.zeros(len(s))
        gel_coeff = np.zeros(len(s))

        overflow = s > v_max
        gel_coeff[overflow] = s[overflow]

        top = (~overflow) & (s > p[-1])
        if np.any(top):
            b = (s[top] - p[-1]) / (v_max - p[-1])
            dest_lo[top] = nb - 1
            frac_lo[top] = 1.0 - b
            gel_coeff[top] = b * v_max

        inner = s <= p[-1]
        if np.any(inner):
            k = np.searchsorted(p, s[inner], side="right") - 1
            k = np.minimum(k, nb - 2)
            b = (s[inner] - p[k]) / (p[k + 1] - p[k])
            dest_lo[inner] = k
            dest_hi[inner] = k + 1
            frac_lo[inner] = 1.0 - b
            frac_hi[inner] = b

        self.dest_lo = dest_lo
        self.dest_hi = dest_hi
        self.frac_lo = frac_lo
        self.frac_hi = frac_hi
        self.gel_coeff = gel_coeff
        self.pair_sum = s

    def depletion_rates(self, numbers: np.ndarray) -> np.ndarray:
        """Per-bin fractional depletion rate lambda_i = sum_j K_ij N_j."""
        return self.rate_matrix @ numbers

    def stability_dt(self, numbers: np.ndarray,
                     dt_safety: float = 0.5) -> float:
        lam = self.depletion_rates(numbers)
        lmax = float(lam.max()) if lam.size else 0.0
        return dt_safety / lmax if lmax > 0 else math.inf


def step(tables: FvTables, numbers: np.ndarray, gel_mass: float,
         dt: float, dt_safety: float = 0.5) -> tuple[np.ndarray, float]:
    """One explicit Euler step.  Rejects dt above the stability bound."""
    if not (dt > 0 and np.isfinite(dt)):
        raise DomainError(f"dt must be positive and finite, got {dt}")
    lam = tables.depletion_rates(numbers)
    lmax = float(lam.max()) if lam.size else 0.0
    dt_max = dt_safety / lmax if lmax > 0 else math.inf
    # tiny slack so dt == dt_max from the same formula is accepted
    if dt > dt_max * (1 + 1e-12):
        raise StepRejectedError(dt, dt_max)
    nb = len(numbers)
    pr = tables.pair_coeff * numbers[tables.pair_i] * numbers[tables.pair_j]
    gain = (np.bincount(tables.dest_lo, weights=pr * tables.frac_lo,
                        minlength=nb)
            + np.bincount(tables.dest_hi, weights=pr * tables.frac_hi,
                          minlength=nb))
    new_numbers = numbers + dt * (gain - numbers * lam)
    new_gel = gel_mass + dt * float(pr @ tables.gel_coeff)
    return new_numbers, new_gel


@dataclass
class Trajectory:
    """Sampled history of a sectional run."""

    times: np.ndarray
    states: list[SizeDistribution]
    m0: np.ndarray
    m1_in: np.ndarray
    gel_mass: np.ndarray
    status: str
    kernel_form: str
    steps_taken: int = 0
    tables: FvTables | None = field(default=None, repr=False)

    @property
    def final_state(self) -> SizeDistribution:
        return self.states[-1]

    def state_at(self, t: float) -> SizeDistribution:
        """Last sampled state at or before t."""
        idx = int(np.searchsorted(self.times, t, side="right")) - 1
        if idx < 0:
            raise DomainError(f"t={t} precedes the first sample")
        return self.states[idx]


def run(kernel: Kernel, init: InitSpec | SizeDistribution,
        config: FvConfig) -> Trajectory:
    grid = build_grid(config.v_min, config.v_max, config.bins_per_decade)
    if isinstance(init, SizeDistribution):
        if len(init.grid.edges) != len(grid.edges) or not np.array_equal(
                init.grid.edges, grid.edges):
            raise DomainError("initial state lives on a different grid")
        state0 = init.copy()
    else:
        state0 = init.to_distribution(grid)
    grid = state0.grid  # atom binning may have relocated pivots

    tables = FvTables(kernel, grid)
    numbers = state0.bin_numbers.copy()
    numbers0 = numbers.copy()
    counts0 = state0.counts.copy()
    init_atomic = state0.atomic.copy()
    gel = float(state0.gel_mass)
    m1_0 = float(numbers @ grid.pivots)

    sample_times = np.linspace(0.0, config.t_end, config.n_samples + 1)
    times: list[float] = []
    states: list[SizeDistribution] = []
    m0s: list[float] = []
    m1s: list[float] = []
    gels: list[float] = []
    status = STATUS_COMPLETED
    steps = 0

    def record(t: float):
        # a state that never moved keeps its original counts (and atom
        # flags) to the bit; anything evolved is a plain density
        if np.array_equal(numbers, numbers0):
            snap = SizeDistribution(grid=grid, counts=counts0.copy(),
                                    gel_mass=gel, atomic=init_atomic.copy())
        else:
            snap = SizeDistribution(grid=grid, counts=numbers / grid.widths,
                                    gel_mass=gel)
        times.append(t)
        states.append(snap)
        m0s.append(float(numbers.sum()))
        m1s.append(float(numbers @ grid.pivots))
        gels.append(gel)

    t = 0.0
    record(t)
    stop = False
    for target in sample_times[1:]:
        while t < target and not stop:
            dt_max = tables.stability_dt(numbers, config.dt_safety)
            dt = min(dt_max, target - t)
            numbers, gel = step(tables, numbers, gel, dt, config.dt_safety)
            t += dt
            steps += 1
            if (config.gel_stop_fraction is not None and m1_0 > 0
                    and gel >= config.gel_stop_fraction * m1_0):
                status = STATUS_GELATION_RUNAWAY
                stop = True
        record(t)
        if stop:
            break

    return Trajectory(times=np.array(times), states=states,
                      m0=np.array(m0s), m1_in=np.array(m1s),
                      gel_mass=np.array(gels), status=status,
                      kernel_form=kernel.form, steps_taken=steps,
                      tables=tables)


def trajectory_to_csv(traj: Trajectory, path) -> None:
    lines = ["time,M0,M1_in,gel_mass"]
    for k in range(len(traj.times)):
        lines.append(",".join(
            repr(float(x)) for x in
            (traj.times[k], traj.m0[k], traj.m1_in[k], traj.gel_mass[k])))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


# -- weak-form consistency ------------------------------------------------------


class HatOnBall:
    """Plateau-1 hat centered on a ball, falling linearly to 0 at r_out."""

    def __init__(self, center: float, r_in: float, r_out: float):
        if not (0 < r_in < r_out < center):
            raise DomainError(
                f"need 0 < r_in < r_out < center, got ({center}, {r_in}, "
                f"{r_out})")
        self.center = center
        self.r_in = r_in
        self.r_out = r_out
        self.support_upper = center + r_out

    def __call__(self, v):
        d = np.abs(np.asarray(v, dtype=float) - self.center)
        out = np.clip((self.r_out - d) / (self.r_out - self.r_in), 0.0, 1.0)
        return out


class PowerTruncated:
    """v^order below the cutoff, zero beyond it."""

    def __init__(self, order: float, cutoff: float):
        if not (order >= 0 and np.isfinite(order)):
            raise DomainError(f"order must be nonnegative, got {order}")
        if not (cutoff > 0 and np.isfinite(cutoff)):
            raise DomainError(f"cutoff must be positive, got {cutoff}")
        self.order = order
        self.cutoff = cutoff
        self.support_upper = cutoff

    def __call__(self, v):
        v = np.asarray(v, dtype=float)
        return np.where(v <= self.cutoff, v ** self.order, 0.0)


def weak_form_residual(traj: Trajectory, test_fn) -> float:
    """End-to-end defect of the sampled trajectory in the weak form.

    Integrates the pair-interaction functional phi(p_i+p_j) - phi(p_i) -
    phi(p_j) against the sampled states (trapezoid in time) and compares
    with the net change of the phi-moment.  The test function must be
    supported inside the resolved volume range.
    """
    if traj.tables is None:
        raise DomainError("trajectory carries no coupling tables")
    tables = traj.tables
    grid = tables.grid
    if test_fn.support_upper > grid.edges[-1]:
        raise DomainError(
            f"test function support reaches {test_fn.support_upper}, beyond "
            f"the resolved range {grid.edges[-1]}")
    phi_p = test_fn(grid.pivots)
    theta = test_fn(tables.pair_sum) - phi_p[tables.pair_i] - phi_p[tables.pair_j]

    rhs = np.empty(len(traj.times))
    q = np.empty(len(traj.times))
    for k, dist in enumerate(traj.states):
        numbers = dist.bin_numbers
        pr = tables.pair_coeff * numbers[tables.pair_i] * numbers[tables.pair_j]
        rhs[k] = float(pr @ theta)
        q[k] = float(phi_p @ numbers)
    integral = np.trapezoid(rhs, traj.times)
    return float(abs(q[-1] - q[0] - integral))
