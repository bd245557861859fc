"""Initial size distributions shared by the deterministic and stochastic solvers.

Each spec can be realized two ways: binned onto a grid (for the sectional
solver) or sampled as individual particle volumes (for the event-driven
solver).  Binning uses closed-form bin integrals so the only error is the
grid itself; sampling uses inverse-transform draws so a fixed generator
state reproduces the same particle list bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .measures import Grid, SizeDistribution, from_atoms

KIND_DIRAC = "dirac"
KIND_EXPONENTIAL = "exponential"
KIND_UNIFORM = "uniform"


@dataclass(frozen=True)
class InitSpec:
    """A named initial condition.

    kind is one of dirac / exponential / uniform.  Dirac states carry
    explicit (volume, weight) atoms; the other two are densities with a
    total number.  Mass outside a target grid's range is discarded at
    binning time, so grids should cover the support.
    """

    kind: str
    atoms: tuple[tuple[float, float], ...] = ()
    scale: float = 1.0
    lower: float = 0.0
    upper: float = 0.0
    number: float = 1.0

    @classmethod
    def dirac(cls, atoms) -> InitSpec:
        pts = tuple((float(v), float(w)) for v, w in atoms)
        if not pts:
            raise DomainError("dirac init needs at least one atom")
        for v, w in pts:
            if not (v > 0 and np.isfinite(v)):
                raise DomainError(f"atom volume must be positive, got {v}")
            if not (w > 0 and np.isfinite(w)):
                raise DomainError(f"atom weight must be positive, got {w}")
        return cls(kind=KIND_DIRAC, atoms=pts,
                   number=float(sum(w for _, w in pts)))

    @classmethod
    def monodisperse(cls, volume: float = 1.0, number: float = 1.0) -> InitSpec:
        return cls.dirac([(volume, number)])

    @classmethod
    def exponential(cls, scale: float, number: float = 1.0) -> InitSpec:
        if not (scale > 0 and np.isfinite(scale)):
            raise DomainError(f"scale must be positive, got {scale}")
        if not (number > 0 and np.isfinite(number)):
            raise DomainError(f"number must be positive, got {number}")
        return cls(kind=KIND_EXPONENTIAL, scale=float(scale),
                   number=float(number))

    @classmethod
    def uniform(cls, lower: float, upper: float,
                number: float = 1.0) -> InitSpec:
        if not (0 < lower < upper) or not np.isfinite(upper):
            raise DomainError(
                f"need 0 < lower < upper, got [{lower}, {upper}]")
        if not (number > 0 and np.isfinite(number)):
            raise DomainError(f"number must be positive, got {number}")
        return cls(kind=KIND_UNIFORM, lower=float(lower), upper=float(upper),
                   number=float(number))

    def to_distribution(self, grid: Grid) -> SizeDistribution:
        if self.kind == KIND_DIRAC:
            return from_atoms(grid, self.atoms)
        e = grid.edges
        if self.kind == KIND_EXPONENTIAL:
            numbers = self.number * (np.exp(-e[:-1] / self.scale)
                                     - np.exp(-e[1:] / self.scale))
        elif self.kind == KIND_UNIFORM:
            overlap = np.clip(np.minimum(e[1:], self.upper)
                              - np.maximum(e[:-1], self.lower), 0.0, None)
            numbers = self.number * overlap / (self.upper - self.lower)
        else:
            raise DomainError(f"unknown init kind {self.kind!r}")
        return SizeDistribution(grid=grid, counts=numbers / grid.widths)

    def sample_particles(self, rng: np.random.Generator,
                         n: int) -> np.ndarray:
        """Draw n particle volumes.

        Dirac specs apportion by largest remainder so bin counts are exact
        and the total is exactly n; densities use inverse transforms.
        """
        if n < 1:
            raise DomainError(f"need at least one particle, got {n}")
        if self.kind == KIND_DIRAC:
            weights = np.array([w for _, w in self.atoms])
            volumes = np.array([v for v, _ in self.atoms])
            quota = n * weights / weights.sum()
            base = np.floor(quota).astype(int)
            frac = quota - base
            short = n - int(base.sum())
            # ties broken toward lower atom index (stable sort)
            order = np.argsort(-frac, kind="stable")
            base[order[:short]] += 1
            return np.repeat(volumes, base)
        u = rng.random(n)
        if self.kind == KIND_EXPONENTIAL:
            return -self.scale * np.log1p(-u)
        if self.kind == KIND_UNIFORM:
            return self.lower + (self.upper - self.lower) * u
        raise DomainError(f"unknown init kind {self.kind!r}")
