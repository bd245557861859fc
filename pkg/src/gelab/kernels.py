"""Coagulation kernels and certification of their structural bounds.

Every kernel here is symmetric and nonnegative on (0, inf)^2.  For the
homogeneous families we factor

    K(v, w) = h(v, w) * g(v / (v + w)),    h(v, w) = (v + w)**gamma,

so the simplex profile is g(x) = K(x, 1 - x).  Kernels that vanish on
the diagonal have g(1/2) = 0; the certifier samples the declared bounds
(lower/upper envelopes of h against v**gamma + w**gamma, positivity on
compact boxes, the g envelope with its vanishing order) and reports one
PASS/FAIL row per bound with a witness point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DomainError, IndeterminateError, UnsupportedFormError

FORM_DIFFERENTIAL_SEDIMENTATION = "differential_sedimentation"
FORM_SUM = "sum"
FORM_POWER_DIFFERENCE = "power_difference"
FORM_ABS_DIFFERENCE = "abs_difference"
FORM_COMPOSED = "composed"

KNOWN_FORMS = (
    FORM_DIFFERENTIAL_SEDIMENTATION,
    FORM_SUM,
    FORM_POWER_DIFFERENCE,
    FORM_ABS_DIFFERENCE,
    FORM_COMPOSED,
)

# Probe pairs for scaling-exponent estimation; deliberately incommensurate
# so degenerate kernels cannot vanish on all of them by accident.
_SCALING_PROBES = ((1.0, 2.0), (0.5, 3.0), (1.3, 2.7), (0.25, 0.75))
_SCALING_FACTORS = (2.0, 3.0)
_SCALING_TOL = 1e-9


@dataclass(frozen=True)
class KernelParams:
    """Declared structural constants for a kernel family.

    gamma         homogeneity degree
    crossover     sum v + w above which the lower h envelope is asserted
    h_low, h_high envelope constants for h against v**gamma + w**gamma
    g_low, g_high envelope constants for the simplex profile
    vanish_order  order of the zero of g at x = 1/2
    Fields left as None are derived from sampled data by the certifier.
    """

    gamma: float | None = None
    crossover: float | None = None
    h_low: float | None = None
    h_high: float | None = None
    g_low: float | None = None
    g_high: float | None = None
    vanish_order: float | None = None

    def __post_init__(self) -> None:
        for name in ("crossover", "h_low", "h_high", "g_low", "g_high",
                     "vanish_order"):
            value = getattr(self, name)
            if value is not None and not value > 0:
                raise DomainError(f"KernelParams.{name} must be positive, "
                                  f"got {value}")
        if self.h_low is not None and self.h_high is not None:
            if self.h_low > self.h_high:
                raise DomainError("KernelParams requires h_low <= h_high")
        if self.g_low is not None and self.g_high is not None:
            if self.g_low > self.g_high:
                raise DomainError("KernelParams requires g_low <= g_high")


@dataclass(frozen=True, eq=False)
class Kernel:
    """A coagulation rate kernel.

    Use the classmethod factories; the constructor fields mirror whatever
    the form needs (exponents for the closed forms, node/value tables for
    the composed form).
    """

    form: str
    gamma_exponent: float | None = None
    d1: float | None = None
    d2: float | None = None
    h_nodes: np.ndarray | None = None
    h_values: np.ndarray | None = None
    g_nodes: np.ndarray | None = None
    g_values: np.ndarray | None = None
    params: KernelParams | None = None

    # -- factories ---------------------------------------------------------

    @classmethod
    def differential_sedimentation(cls, params: KernelParams | None = None
                                   ) -> "Kernel":
        """|v^(2/3) - w^(2/3)| (v^(1/3) + w^(1/3))^2, homogeneity 4/3."""
        if params is None:
            params = KernelParams(gamma=4.0 / 3.0, crossover=2.0,
                                  h_low=0.5, h_high=2.0 ** (4.0 / 3.0),
                                  g_high=2.0, vanish_order=1.0)
        return cls(form=FORM_DIFFERENTIAL_SEDIMENTATION, params=params)

    @classmethod
    def sum_kernel(cls, gamma: float) -> "Kernel":
        """v^gamma + w^gamma.  Does not vanish on the diagonal."""
        return cls(form=FORM_SUM, gamma_exponent=float(gamma))

    @classmethod
    def power_difference(cls, d1: float, d2: float) -> "Kernel":
        """|v^d1 - w^d1| (v^d2 + w^d2), homogeneity d1 + d2."""
        if d1 < 0 or d2 < 0:
            raise DomainError("power_difference requires d1, d2 >= 0")
        return cls(form=FORM_POWER_DIFFERENCE, d1=float(d1), d2=float(d2))

    @classmethod
    def abs_difference(cls, d1: float, d2: float) -> "Kernel":
        """|v - w|^d1 (v^d2 + w^d2), homogeneity d1 + d2."""
        if d1 < 0 or d2 < 0:
            raise DomainError("abs_difference requires d1, d2 >= 0")
        return cls(form=FORM_ABS_DIFFERENCE, d1=float(d1), d2=float(d2))

    @classmethod
    def composed(cls, h_nodes, h_values, g_nodes, g_values) -> "Kernel":
        """Tabulated kernel h(v + w) * g(v / (v + w)).

        h is interpolated log-log over positive nodes (power-law segments,
        end segments extrapolated), g linearly over [0, 1].  The g table
        is read at min(x, 1 - x), so only the left half matters.
        """
        h_nodes = np.asarray(h_nodes, dtype=float)
        h_values = np.asarray(h_values, dtype=float)
        g_nodes = np.asarray(g_nodes, dtype=float)
        g_values = np.asarray(g_values, dtype=float)
        if h_nodes.ndim != 1 or h_nodes.shape != h_values.shape:
            raise DomainError("h table must be two 1-d arrays of equal size")
        if g_nodes.ndim != 1 or g_nodes.shape != g_values.shape:
            raise DomainError("g table must be two 1-d arrays of equal size")
        if h_nodes.size < 1 or g_nodes.size < 1:
            raise DomainError("composed kernel tables must be non-empty")
        if np.any(h_nodes <= 0) or np.any(np.diff(h_nodes) <= 0):
            raise DomainError("h nodes must be positive and increasing")
        if np.any(np.diff(g_nodes) <= 0):
            raise DomainError("g nodes must be increasing")
        if np.any(h_values < 0) or np.any(g_values < 0):
            raise DomainError("kernel tables must be nonnegative")
        return cls(form=FORM_COMPOSED, h_nodes=h_nodes, h_values=h_values,
                   g_nodes=g_nodes, g_values=g_values)

    @classmethod
    def constant(cls, rate: float = 1.0) -> "Kernel":
        """Constant control kernel K = rate (flat composed tables)."""
        if not rate > 0:
            raise DomainError("constant kernel rate must be positive")
        return cls.composed([1.0, 2.0], [rate, rate], [0.0, 1.0], [1.0, 1.0])

    # -- evaluation --------------------------------------------------------

    def _raw(self, a, b):
        """Kernel value on canonically ordered arguments a <= b, a, b >= 0."""
        if self.form == FORM_DIFFERENTIAL_SEDIMENTATION:
            return (b ** (2.0 / 3.0) - a ** (2.0 / 3.0)) * \
                   (a ** (1.0 / 3.0) + b ** (1.0 / 3.0)) ** 2
        if self.form == FORM_SUM:
            g = self.gamma_exponent
            return a ** g + b ** g
        if self.form == FORM_POWER_DIFFERENCE:
            return (b ** self.d1 - a ** self.d1) * \
                   (a ** self.d2 + b ** self.d2)
        if self.form == FORM_ABS_DIFFERENCE:
            return (b - a) ** self.d1 * (a ** self.d2 + b ** self.d2)
        if self.form == FORM_COMPOSED:
            flat = self._flat_composed_value()
            if flat is not None:
                return np.full(np.broadcast_shapes(np.shape(a), np.shape(b)),
                               flat)
            s = a + b
            logh = np.interp(np.log(s), np.log(self.h_nodes),
                             np.log(np.maximum(self.h_values, 1e-300)))
            # extrapolate with the end-segment power laws
            if self.h_nodes.size >= 2:
                ln = np.log(self.h_nodes)
                lv = np.log(np.maximum(self.h_values, 1e-300))
                lo_slope = (lv[1] - lv[0]) / (ln[1] - ln[0])
                hi_slope = (lv[-1] - lv[-2]) / (ln[-1] - ln[-2])
                ls = np.log(s)
                logh = np.where(ls < ln[0], lv[0] + lo_slope * (ls - ln[0]),
                                logh)
                logh = np.where(ls > ln[-1], lv[-1] + hi_slope * (ls - ln[-1]),
                                logh)
            h = np.exp(logh)
            x = np.where(s > 0, a / np.where(s > 0, s, 1.0), 0.5)
            g = np.interp(x, self.g_nodes, self.g_values)
            return h * g
        raise UnsupportedFormError(f"unknown kernel form {self.form!r}")

    def _flat_composed_value(self) -> float | None:
        """Constant value of a flat composed table, or None.

        Matches the interpolation path to the bit: flat log-log h reduces
        to exp(log(max(h0, tiny))) and flat g to g0 everywhere.
        """
        cached = self.__dict__.get("_flat_cache", False)
        if cached is not False:
            return cached
        flat = None
        if np.all(self.h_values == self.h_values[0]) and \
                np.all(self.g_values == self.g_values[0]):
            h0 = float(np.exp(np.log(max(float(self.h_values[0]), 1e-300))))
            flat = h0 * float(self.g_values[0])
        object.__setattr__(self, "_flat_cache", flat)
        return flat

    def evaluate(self, v, vprime):
        """Rate K(v, vprime).  Symmetric bit-for-bit under argument swap.

        Accepts scalars or broadcastable arrays; every volume must be
        positive and finite.
        """
        v_arr = np.asarray(v, dtype=float)
        w_arr = np.asarray(vprime, dtype=float)
        if not (np.all(np.isfinite(v_arr)) and np.all(np.isfinite(w_arr))):
            raise DomainError("kernel arguments must be finite")
        if np.any(v_arr <= 0) or np.any(w_arr <= 0):
            raise DomainError("kernel arguments must be positive")
        a = np.minimum(v_arr, w_arr)
        b = np.maximum(v_arr, w_arr)
        out = self._raw(a, b)
        if np.isscalar(v) and np.isscalar(vprime):
            return float(out)
        return out

    def g_profile(self, x):
        """Simplex profile g(x) = K(x, 1 - x) / (x + (1 - x))**gamma.

        Defined for x in [0, 1]; evaluated at min(x, 1 - x) so the
        symmetry g(x) = g(1 - x) is bit-exact.  Raises for a composed
        kernel whose tabulated h is not a power law (the profile is only
        meaningful for homogeneous kernels).
        """
        x_arr = np.asarray(x, dtype=float)
        if np.any(x_arr < 0) or np.any(x_arr > 1) or \
                not np.all(np.isfinite(x_arr)):
            raise DomainError("g_profile argument must lie in [0, 1]")
        if self.form == FORM_COMPOSED:
            ests = self._scaling_estimates()
            if max(ests) - min(ests) > _SCALING_TOL:
                raise UnsupportedFormError(
                    "composed kernel is not homogeneous; no simplex profile")
        xm = np.minimum(x_arr, 1.0 - x_arr)
        if self.form == FORM_SUM:
            g = self.gamma_exponent
            out = xm ** g + (1.0 - xm) ** g
        else:
            out = self._raw(xm, 1.0 - xm)
        if np.isscalar(x):
            return float(out)
        return out

    # -- homogeneity -------------------------------------------------------

    @property
    def closed_form_homogeneity(self) -> float | None:
        """Exact scaling exponent where the form fixes one, else None."""
        if self.form == FORM_DIFFERENTIAL_SEDIMENTATION:
            return 4.0 / 3.0
        if self.form == FORM_SUM:
            return self.gamma_exponent
        if self.form in (FORM_POWER_DIFFERENCE, FORM_ABS_DIFFERENCE):
            return self.d1 + self.d2
        return None

    @property
    def vanishes_on_diagonal(self) -> bool:
        return self.evaluate(1.0, 1.0) == 0.0

    def _scaling_estimates(self) -> list[float]:
        ests = []
        for (v, w) in _SCALING_PROBES:
            base = self.evaluate(v, w)
            if base <= 0:
                continue
            for lam in _SCALING_FACTORS:
                scaled = self.evaluate(lam * v, lam * w)
                if scaled <= 0:
                    continue
                ests.append(math.log(scaled / base) / math.log(lam))
        if not ests:
            raise IndeterminateError(
                "kernel vanished on every scaling probe pair; "
                "homogeneity is indeterminate")
        return ests


def homogeneity_degree(kernel: Kernel) -> float:
    """Numerically estimated scaling exponent of the kernel.

    Median of log-ratio estimates over fixed probe pairs; agrees with the
    closed-form degree to ~1e-12 for the built-in forms.  Raises
    IndeterminateError if the kernel vanishes on every probe pair.
    """
    return float(np.median(kernel._scaling_estimates()))


# -- certification ---------------------------------------------------------

@dataclass(frozen=True)
class SamplingSpec:
    """Sampling plan for bound certification.

    The x-grid is rounded up to 2**k + 1 points so every sample has an
    exactly representable complement 1 - x; the mirror-symmetry check is
    then bit-exact instead of drowning in last-ulp noise.
    """

    v_lo: float = 1e-3
    v_hi: float = 1e3
    n_v: int = 200
    n_x: int = 10_000
    x_exclusion: float = 1e-6   # skip |x - 1/2| below this in the g ratio
    compact_ranges: tuple[float, ...] = (10.0, 100.0)
    scaling_tol: float = 1e-9

    def __post_init__(self) -> None:
        if not (0 < self.v_lo < self.v_hi):
            raise DomainError("sampling requires 0 < v_lo < v_hi")
        if self.n_v < 2 or self.n_x < 10:
            raise DomainError("sampling grid too small to certify anything")

    def unit_grid(self) -> np.ndarray:
        k = max(4, math.ceil(math.log2(self.n_x - 1)))
        return np.linspace(0.0, 1.0, 2 ** k + 1)


@dataclass(frozen=True)
class BoundCheck:
    """One certified bound: PASS iff margin is nonnegative."""

    name: str
    status: str
    margin: float
    witness_v: float = math.nan
    witness_vprime: float = math.nan


@dataclass
class CertificateReport:
    """Outcome of certify_assumption: one row per bound plus the
    parameter set actually used (declared values filled in with derived
    ones)."""

    kernel_form: str
    checks: list[BoundCheck] = field(default_factory=list)
    compact_lower_bounds: dict[float, float] = field(default_factory=dict)
    effective_params: KernelParams | None = None

    @property
    def passed(self) -> bool:
        return all(c.status == "PASS" for c in self.checks)

    def csv_rows(self) -> list[str]:
        rows = ["bound_name,status,margin,witness_v,witness_vprime"]
        for c in self.checks:
            rows.append(f"{c.name},{c.status},{c.margin!r},"
                        f"{c.witness_v!r},{c.witness_vprime!r}")
        return rows


def _check(name: str, margin: float, wv: float = math.nan,
           wp: float = math.nan, strict: bool = False) -> BoundCheck:
    ok = margin > 0 if strict else margin >= 0
    return BoundCheck(name=name, status="PASS" if ok else "FAIL",
                      margin=float(margin), witness_v=float(wv),
                      witness_vprime=float(wp))


def certify_assumption(kernel: Kernel,
                       declared: KernelParams | None = None,
                       sampling: SamplingSpec | None = None,
                       require_diagonal_vanishing: bool = True
                       ) -> CertificateReport:
    """Sample the kernel and certify each declared structural bound.

    Missing declared constants are derived from the sampled extrema with
    a factor-of-two safety margin (g_low is half the measured minimum of
    g(x) / |x - 1/2|**vanish_order, and symmetrically for the rest); the
    derived set is returned in effective_params.  Certification is
    evidence, not proof: it reports the worst sampled point per bound.
    """
    if declared is None:
        declared = kernel.params if kernel.params is not None \
            else KernelParams()
    if sampling is None:
        sampling = SamplingSpec()

    report = CertificateReport(kernel_form=kernel.form)

    # sampled grid, log-spaced
    v = np.geomspace(sampling.v_lo, sampling.v_hi, sampling.n_v)
    vv, ww = np.meshgrid(v, v, indexing="ij")
    k_grid = kernel.evaluate(vv, ww)

    # symmetry (bit-exact by construction, still sampled)
    asym = np.abs(k_grid - kernel.evaluate(ww, vv))
    scale = max(float(np.max(k_grid)), 1e-300)
    i_sym = np.unravel_index(np.argmax(asym), asym.shape)
    report.checks.append(_check("symmetry", -float(np.max(asym)) / scale,
                                vv[i_sym], ww[i_sym]))

    # nonnegativity
    i_neg = np.unravel_index(np.argmin(k_grid), k_grid.shape)
    report.checks.append(_check("nonnegativity", float(np.min(k_grid)),
                                vv[i_neg], ww[i_neg]))

    # homogeneity against the declared degree
    gamma = declared.gamma
    derived = {}
    try:
        gamma_est = homogeneity_degree(kernel)
    except IndeterminateError:
        gamma_est = math.nan
    if gamma is None:
        gamma = gamma_est
        derived["gamma"] = gamma
    ests = kernel._scaling_estimates()
    dev = max(abs(e - gamma) for e in ests) if math.isfinite(gamma) \
        else math.inf
    report.checks.append(_check("homogeneity", sampling.scaling_tol - dev,
                                _SCALING_PROBES[0][0], _SCALING_PROBES[0][1]))

    # canonical factor h = (v + w)**gamma and the comparison sum
    h_grid = (vv + ww) ** gamma
    s_grid = vv ** gamma + ww ** gamma
    ratio = h_grid / s_grid

    crossover = declared.crossover
    if crossover is None:
        crossover = 2.0
        derived["crossover"] = crossover

    h_low = declared.h_low
    if h_low is None:
        h_low = 0.5 * float(np.min(ratio))
        derived["h_low"] = h_low
    h_high = declared.h_high
    if h_high is None:
        h_high = 2.0 * float(np.max(ratio))
        derived["h_high"] = h_high

    # lower envelope of h beyond the crossover sum
    beyond = vv + ww > crossover
    if np.any(beyond):
        slack = ratio[beyond] / h_low - 1.0
        i_min = int(np.argmin(slack))
        wv = vv[beyond][i_min]
        wp = ww[beyond][i_min]
        report.checks.append(_check("h_lower_above_crossover",
                                    float(np.min(slack)), wv, wp))
    else:
        report.checks.append(_check("h_lower_above_crossover", math.inf))

    # upper envelope of h, everywhere
    slack_hi = 1.0 - ratio / h_high
    i_hi = np.unravel_index(np.argmin(slack_hi), slack_hi.shape)
    report.checks.append(_check("h_upper", float(np.min(slack_hi)),
                                vv[i_hi], ww[i_hi]))

    # positivity of h on compact boxes [1/R, R]^2
    for r in sampling.compact_ranges:
        if r <= 1:
            raise DomainError("compact positivity range must exceed 1")
        vr = np.geomspace(1.0 / r, r, max(sampling.n_v // 2, 16))
        va, vb = np.meshgrid(vr, vr, indexing="ij")
        h_box = (va + vb) ** gamma
        c_r = float(np.min(h_box))
        report.compact_lower_bounds[float(r)] = c_r
        i_box = np.unravel_index(np.argmin(h_box), h_box.shape)
        report.checks.append(_check(f"compact_positivity_R{r:g}", c_r,
                                    va[i_box], vb[i_box], strict=True))

    # simplex profile bounds
    x = sampling.unit_grid()
    try:
        g_vals = kernel.g_profile(x)
    except UnsupportedFormError:
        report.checks.append(_check("g_envelope", -math.inf))
        report.effective_params = replace(declared, **derived)
        return report

    g_high = declared.g_high
    if g_high is None:
        g_high = 2.0 * float(np.max(g_vals))
        derived["g_high"] = g_high
    i_gmax = int(np.argmax(g_vals))
    report.checks.append(_check("g_upper", 1.0 - float(np.max(g_vals)) / g_high,
                                x[i_gmax], 1.0 - x[i_gmax]))

    vanish_order = declared.vanish_order
    dist = np.abs(x - 0.5)
    away = dist >= sampling.x_exclusion
    if vanish_order is None:
        # slope of log g against log |x - 1/2| near the diagonal
        near = (dist > 1e-5) & (dist < 1e-2) & (g_vals > 0)
        if np.count_nonzero(near) >= 10:
            slope = np.polyfit(np.log(dist[near]), np.log(g_vals[near]), 1)[0]
            vanish_order = max(1.0, round(float(slope), 2))
        else:
            vanish_order = 1.0
        derived["vanish_order"] = vanish_order

    g_ratio = g_vals[away] / dist[away] ** vanish_order
    g_low = declared.g_low
    if g_low is None:
        g_low = 0.5 * float(np.min(g_ratio))
        derived["g_low"] = g_low
    slack_g = g_ratio / g_low - 1.0
    i_gl = int(np.argmin(slack_g))
    report.checks.append(_check("g_lower", float(np.min(slack_g)),
                                x[away][i_gl], 1.0 - x[away][i_gl]))

    # profile symmetry, bit-exact on the dyadic grid (x[i] + x[-1-i] == 1)
    g_sym = np.abs(g_vals - g_vals[::-1])
    i_gs = int(np.argmax(g_sym))
    report.checks.append(_check("g_symmetric", -float(np.max(g_sym)),
                                x[i_gs], x[x.size - 1 - i_gs]))

    if require_diagonal_vanishing:
        k_diag = kernel.evaluate(1.0, 1.0)
        report.checks.append(_check("diagonal_vanishing", -k_diag, 1.0, 1.0))

    # combined growth envelope K <= g_high * h_high * (v**gamma + w**gamma)
    envelope = 1.0 - k_grid / (g_high * h_high * s_grid)
    i_env = np.unravel_index(np.argmin(envelope), envelope.shape)
    report.checks.append(_check("growth_envelope", float(np.min(envelope)),
                                vv[i_env], ww[i_env]))

    # declared parameter domain: gamma > 1, crossover > 1, ordered envelopes
    dom_ok = (gamma > 1.0 and crossover > 1.0 and h_low > 0 and g_low > 0
              and h_high >= h_low and g_high >= g_low and vanish_order >= 1.0)
    slack_dom = min(gamma - 1.0, crossover - 1.0, h_low, h_high - h_low,
                    g_low, g_high - g_low, vanish_order - 1.0)
    report.checks.append(BoundCheck(
        name="param_domain", status="PASS" if dom_ok else "FAIL",
        margin=float(slack_dom)))

    report.effective_params = KernelParams(
        gamma=gamma, crossover=crossover, h_low=h_low, h_high=h_high,
        g_low=g_low, g_high=g_high, vanish_order=vanish_order)
    return report
