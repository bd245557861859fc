"""Post-processing: gel onset, tail decay fits, blow-up bounds, cascades.

Everything here consumes solver output (trajectories, distributions) and
produces small result records suitable for CSV export.  The blow-up bound
assembles an explicit a-priori limit on how long a state with a heavy tail
can keep existing; its constant chain is returned factor by factor so a
report can show exactly where the number came from.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, InsufficientDataError
from .kernels import KernelParams
from .measures import SizeDistribution, ball_mass, cutoff_pair, \
    truncated_moment
from .solver_fv import Trajectory


def gelation_time_from_series(times: np.ndarray, gel_mass: np.ndarray,
                              initial_mass: float,
                              epsilon: float = 0.01) -> float | None:
    """First time the gel ledger reaches epsilon * initial mass.

    Linear interpolation between the bracketing samples; None when the
    series never crosses.
    """
    times = np.asarray(times, dtype=float)
    gel = np.asarray(gel_mass, dtype=float)
    if times.shape != gel.shape or times.ndim != 1 or len(times) == 0:
        raise DomainError("times and gel_mass must be matching 1-d arrays")
    if not (0 < epsilon < 1):
        raise DomainError(f"epsilon must lie in (0, 1), got {epsilon}")
    if not (initial_mass > 0 and np.isfinite(initial_mass)):
        raise DomainError(
            f"initial_mass must be positive, got {initial_mass}")
    target = epsilon * initial_mass
    above = np.flatnonzero(gel >= target)
    if len(above) == 0:
        return None
    k = int(above[0])
    if k == 0:
        return float(times[0])
    t0, t1 = times[k - 1], times[k]
    g0, g1 = gel[k - 1], gel[k]
    if g1 == g0:
        return float(t1)
    return float(t0 + (target - g0) * (t1 - t0) / (g1 - g0))


# -- tail decay -----------------------------------------------------------------


@dataclass(frozen=True)
class TailFit:
    """Least-squares fit of log I(R) against R^(gamma-1)."""

    decay_rate: float
    log_prefactor: float
    r_squared: float
    r_values: tuple[float, ...]
    i_values: tuple[float, ...]

    @property
    def n_points(self) -> int:
        return len(self.r_values)


def fit_exponential_tail(r_values, i_values, gamma: float) -> TailFit:
    """Fit I(R) = C exp(-c R^(gamma-1)); returns c, log C and r^2."""
    r = np.asarray(r_values, dtype=float)
    i = np.asarray(i_values, dtype=float)
    if not (gamma > 1 and np.isfinite(gamma)):
        raise DomainError(f"gamma must exceed 1, got {gamma}")
    if r.shape != i.shape or r.ndim != 1:
        raise DomainError("R and I arrays must match and be 1-d")
    if len(r) < 3:
        raise InsufficientDataError(
            f"need at least 3 tail points, got {len(r)}")
    if np.any(i <= 0) or np.any(r <= 0):
        raise DomainError("tail fit needs positive R and I values")
    x = r ** (gamma - 1.0)
    y = np.log(i)
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_res = float(resid @ resid)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    return TailFit(decay_rate=float(-slope), log_prefactor=float(intercept),
                   r_squared=r2, r_values=tuple(map(float, r)),
                   i_values=tuple(map(float, i)))


def tail_decay_fit(dist: SizeDistribution, gamma: float,
                   r_values) -> TailFit:
    """Fit the distribution's far-tail mass functional across cutoffs."""
    pairs = []
    for r in r_values:
        i_r, _ = cutoff_pair(dist, float(r))
        if i_r > 0:
            pairs.append((float(r), i_r))
    if len(pairs) < 3:
        raise InsufficientDataError(
            f"only {len(pairs)} cutoffs carry positive tail mass; need 3")
    r, i = zip(*pairs)
    return fit_exponential_tail(np.array(r), np.array(i), gamma)


# -- blow-up bound ---------------------------------------------------------------


@dataclass(frozen=True)
class BlowupBound:
    """A-priori latest survival time implied by a heavy truncated moment."""

    t_reference: float
    cutoff: float
    order: float
    k_m: float
    moment_value: float
    rate_constant: float
    bound: float
    constant_chain: dict
    warn_cutoff_below_crossover: bool
    warn_thin_reservoir: bool


_NEEDED_PARAMS = ("gamma", "crossover", "h_low", "g_low", "vanish_order")


def blowup_time_bound(dist: SizeDistribution, t: float, cutoff: float,
                      order: float, params: KernelParams,
                      v0: float) -> BlowupBound:
    """Latest time the solution can survive, from the state at time t.

    order is the moment order m > 1; v0 is the mass scale assumed present
    below the cutoff (feeding the cascade).  The bound degrades to +inf
    when the truncated moment vanishes.
    """
    for name in _NEEDED_PARAMS:
        if getattr(params, name) is None:
            raise DomainError(
                f"kernel parameter {name} is required for the blow-up bound")
    gamma = params.gamma
    if not (gamma > 1):
        raise DomainError(f"homogeneity must exceed 1, got {gamma}")
    if not (order > 1 and np.isfinite(order)):
        raise DomainError(f"moment order must exceed 1, got {order}")
    if not (cutoff > 0 and np.isfinite(cutoff)):
        raise DomainError(f"cutoff must be positive, got {cutoff}")
    if not (v0 > 0 and np.isfinite(v0)):
        raise DomainError(f"v0 must be positive, got {v0}")
    if not (t >= 0 and np.isfinite(t)):
        raise DomainError(f"reference time must be nonnegative, got {t}")

    k_m = (gamma - 1.0) / (order - 1.0)
    c_k = 0.5 * params.h_low * params.g_low / 6.0 ** params.vanish_order
    mass_factor = (1.0 + v0) ** (-(gamma - 1.0))
    rate_constant = c_k * order * v0 * mass_factor
    m_val = truncated_moment(dist, cutoff, order)

    if m_val > 0:
        bound = t + m_val ** (-k_m) / (rate_constant * k_m)
    else:
        bound = math.inf

    reservoir_cutoff = max(cutoff / 2.0 - 1.0, 0.0)
    _, j_reservoir = cutoff_pair(dist, reservoir_cutoff)

    chain = {
        "gamma": gamma,
        "order": order,
        "k_m": k_m,
        "h_low": params.h_low,
        "g_low": params.g_low,
        "vanish_order": params.vanish_order,
        "c_K": c_k,
        "v0": v0,
        "mass_factor": mass_factor,
        "rate_constant": rate_constant,
        "moment": m_val,
        "reservoir_mass": j_reservoir,
    }
    return BlowupBound(
        t_reference=float(t), cutoff=float(cutoff), order=float(order),
        k_m=float(k_m), moment_value=float(m_val),
        rate_constant=float(rate_constant), bound=float(bound),
        constant_chain=chain,
        warn_cutoff_below_crossover=bool(cutoff < params.crossover),
        warn_thin_reservoir=bool(j_reservoir < v0 / 2.0),
    )


# -- positivity cascade -----------------------------------------------------------


@dataclass(frozen=True)
class CascadeProbe:
    """Mass found in balls along the arithmetic ladder x2 + j*x1."""

    sample_time: float
    centers: tuple[float, ...]
    radii: tuple[float, ...]
    masses: tuple[float, ...]

    @property
    def all_positive(self) -> bool:
        return all(m > 0 for m in self.masses)


def positivity_cascade_probe(traj: Trajectory, pair, t: float,
                             n_steps: int) -> CascadeProbe:
    """Measure ball masses at x2 + j*x1 for j = 1..n_steps at time t.

    pair carries the two separated support points (lower/upper) and their
    separation scale; the first ladder ball is widened to 5/2 times the
    separation, later ones use the bare separation.
    """
    if n_steps < 1:
        raise DomainError(f"need at least one ladder step, got {n_steps}")
    if not (pair.separation > 0):
        raise DomainError("pair separation must be positive")
    idx = int(np.searchsorted(traj.times, t, side="right")) - 1
    if idx < 0:
        raise DomainError(f"t={t} precedes the first sample")
    state = traj.states[idx]
    centers = []
    radii = []
    masses = []
    for j in range(1, n_steps + 1):
        c = j * pair.lower + pair.upper
        r = 2.5 * pair.separation if j == 1 else pair.separation
        centers.append(float(c))
        radii.append(float(r))
        masses.append(ball_mass(state, c, r))
    return CascadeProbe(sample_time=float(traj.times[idx]),
                        centers=tuple(centers), radii=tuple(radii),
                        masses=tuple(masses))


def cascade_to_csv(probe: CascadeProbe, path) -> None:
    lines = [f"# sample_time={probe.sample_time!r}",
             "step,center,radius,ball_mass"]
    for k in range(len(probe.centers)):
        lines.append(f"{k + 1}," + ",".join(
            repr(float(x)) for x in
            (probe.centers[k], probe.radii[k], probe.masses[k])))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def tail_fit_to_csv(fit: TailFit, path) -> None:
    lines = [f"# decay_rate={fit.decay_rate!r}",
             f"# log_prefactor={fit.log_prefactor!r}",
             f"# r_squared={fit.r_squared!r}",
             "cutoff,tail_mass"]
    for r, i in zip(fit.r_values, fit.i_values):
        lines.append(f"{r!r},{i!r}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
