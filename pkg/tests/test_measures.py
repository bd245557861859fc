"""Distributions, moments, cutoff splits, balls, and the dyadic search."""

from __future__ import annotations

import math

import numpy as np
import pytest

from gelab.errors import (
    DomainError,
    EmptyMeasureError,
    SeparationUndecidedError,
)
from gelab.measures import (
    Grid,
    SeparatedPair,
    SingleAtom,
    SizeDistribution,
    ball_mass,
    cutoff_pair,
    distribution_from_csv,
    distribution_to_csv,
    find_separated_mass_pair,
    from_atoms,
    from_density,
    moment,
    moment_root_inequality_check,
    truncated_moment,
)


def geometric_grid(v_min: float, v_max: float, n: int) -> Grid:
    return Grid.from_edges(np.geomspace(v_min, v_max, n + 1))


def random_atomic(rng, grid: Grid, n_atoms: int) -> SizeDistribution:
    lo, hi = grid.edges[0], grid.edges[-1]
    vols = np.exp(rng.uniform(np.log(lo * 1.0001), np.log(hi), size=n_atoms))
    weights = rng.uniform(0.1, 2.0, size=n_atoms)
    return from_atoms(grid, list(zip(vols, weights)))


# -- grid ---------------------------------------------------------------------


def test_grid_validation():
    with pytest.raises(DomainError):
        Grid.from_edges([1.0])
    with pytest.raises(DomainError):
        Grid.from_edges([0.0, 1.0])
    with pytest.raises(DomainError):
        Grid.from_edges([1.0, 1.0, 2.0])
    with pytest.raises(DomainError):
        Grid(edges=np.array([1.0, 2.0]), pivots=np.array([2.5]))


def test_grid_locate_half_open():
    g = Grid.from_edges([1.0, 2.0, 4.0])
    assert g.locate(2.0) == 0      # right edge belongs to the bin
    assert g.locate(2.1) == 1
    assert g.locate(4.0) == 1
    with pytest.raises(DomainError):
        g.locate(1.0)              # left edge of the first bin is outside
    with pytest.raises(DomainError):
        g.locate(5.0)


# -- moments ------------------------------------------------------------------


def test_moment_of_binned_atom():
    g = geometric_grid(0.5, 8.0, 12)
    d = from_atoms(g, [(2.0, 3.0)])
    assert moment(d, 1) == pytest.approx(6.0, rel=1e-14)
    assert moment(d, 0) == pytest.approx(3.0, rel=1e-14)
    assert moment(d, 2) == pytest.approx(12.0, rel=1e-14)


def test_moment_exponential_density_quadrature_oracle():
    g = geometric_grid(1e-3, 40.0, 340)
    d = from_density(g, lambda v: np.exp(-v))
    # oracle: fine trapezoid of v^2 e^-v over the grid range
    v = np.geomspace(1e-3, 40.0, 400_001)
    oracle = np.trapezoid(v ** 2 * np.exp(-v), v)
    assert moment(d, 2) == pytest.approx(oracle, rel=1e-3)


def test_moment_empty_distribution_is_zero():
    g = geometric_grid(1.0, 10.0, 4)
    d = SizeDistribution(grid=g, counts=np.zeros(4))
    for m in (0, 1, 2.5):
        assert moment(d, m) == 0.0


def test_moment_rejects_bad_order():
    g = geometric_grid(1.0, 10.0, 4)
    d = SizeDistribution(grid=g, counts=np.zeros(4))
    with pytest.raises(DomainError):
        moment(d, -1.0)
    with pytest.raises(DomainError):
        moment(d, math.inf)


def test_truncated_moment_hand_value():
    g = geometric_grid(0.5, 16.0, 20)
    d = from_atoms(g, [(5.0, 2.0)])
    assert truncated_moment(d, 2.0, 2.0) == pytest.approx(18.0, rel=1e-14)
    assert truncated_moment(d, 6.0, 2.0) == 0.0


# -- cutoff pair --------------------------------------------------------------


def test_cutoff_pair_midpoint_atom_exact():
    # atom at R + 1/2 on a dyadic-width bin: both halves are exact floats
    g = Grid.from_edges([2.0, 2.5, 3.0])
    d = from_atoms(g, [(2.5, 1.0)])
    i_r, j_r = cutoff_pair(d, 2.0)
    assert i_r == 1.25
    assert j_r == 1.25


def test_cutoff_pair_mass_below_cutoff():
    g = geometric_grid(0.5, 32.0, 24)
    d = from_atoms(g, [(1.0, 1.0), (2.0, 0.5)])
    i_r, j_r = cutoff_pair(d, 10.0)
    assert i_r == 0.0
    assert j_r == moment(d, 1)


def test_cutoff_pair_conservation_property():
    rng = np.random.default_rng(2024)
    for _ in range(300):
        n = int(rng.integers(3, 30))
        g = geometric_grid(0.1, float(rng.uniform(5, 500)), n)
        d = random_atomic(rng, g, int(rng.integers(1, 12)))
        r = float(rng.uniform(0.0, g.edges[-1]))
        i_r, j_r = cutoff_pair(d, r)
        assert i_r >= 0.0 and j_r >= 0.0
        assert i_r + j_r == moment(d, 1)


# -- ball mass ----------------------------------------------------------------


def test_ball_mass_atom():
    g = geometric_grid(0.5, 16.0, 10)
    d = from_atoms(g, [(3.5, 2.0)])
    assert ball_mass(d, 3.5, 0.1) == 2.0
    assert ball_mass(d, 5.0, 0.1) == 0.0


def test_ball_mass_uniform_density_overlap():
    g = Grid.from_edges(np.linspace(1.0, 2.0, 9))
    d = from_density(g, lambda v: np.ones_like(v))
    assert ball_mass(d, 1.5, 0.25) == pytest.approx(0.5, rel=1e-14)
    # clamped at zero volume
    assert ball_mass(d, 1.0, 0.5) == pytest.approx(0.5, rel=1e-14)


def test_ball_mass_rejects_bad_radius():
    g = geometric_grid(1.0, 10.0, 4)
    d = SizeDistribution(grid=g, counts=np.zeros(4))
    with pytest.raises(DomainError):
        ball_mass(d, 2.0, 0.0)
    with pytest.raises(DomainError):
        ball_mass(d, 2.0, -1.0)


# -- dyadic separation search -------------------------------------------------


def test_two_atoms_separate_at_depth_two():
    g = geometric_grid(0.5, 8.0, 16)
    d = from_atoms(g, [(1.0, 1.0), (2.5, 1.0)])
    pair = find_separated_mass_pair(d, horizon=4.0)
    assert isinstance(pair, SeparatedPair)
    assert pair.lower == 1.0
    assert pair.upper == 2.5
    # quarter of the cell width at depth 2 (cells of width 1)
    assert pair.separation == 0.25
    assert ball_mass(d, pair.lower, pair.separation) > 0
    assert ball_mass(d, pair.upper, pair.separation) > 0


def test_uniform_density_needs_depth_three():
    # aligned eighth-width bins on [1, 2]; depth 2 cells (0.5,1],(1,1.5],
    # (1.5,2] hold only adjacent mass, depth 3 separates cells 4 and 7
    g = Grid.from_edges(np.linspace(1.0, 2.0, 9))
    d = from_density(g, lambda v: np.ones_like(v))
    pair = find_separated_mass_pair(d, horizon=2.0)
    assert isinstance(pair, SeparatedPair)
    assert pair.separation == pytest.approx(0.25 / 4.0)
    assert 1.0 < pair.lower <= 1.25
    assert 1.75 < pair.upper <= 2.0


def test_single_atom_outcome():
    g = geometric_grid(0.5, 8.0, 16)
    d = from_atoms(g, [(3.0, 2.0)])
    out = find_separated_mass_pair(d, horizon=8.0, max_depth=20)
    assert isinstance(out, SingleAtom)
    assert out.position == 3.0


def test_horizon_extension_finds_outside_mass():
    g = geometric_grid(0.5, 32.0, 24)
    d = from_atoms(g, [(3.0, 1.0), (7.0, 1.0)])
    # (0, 4] holds a single atom; doubling the horizon reveals the pair
    pair = find_separated_mass_pair(d, horizon=4.0)
    assert isinstance(pair, SeparatedPair)
    assert pair.lower == 3.0
    assert pair.upper == 7.0


def test_extension_cap_reports_undecided():
    g = geometric_grid(0.5, 32.0, 24)
    d = from_atoms(g, [(3.0, 1.0), (7.0, 1.0)])
    with pytest.raises(SeparationUndecidedError):
        find_separated_mass_pair(d, horizon=4.0, max_extensions=0)


def test_straddling_masses_undecided():
    # two bins hugging the midline boundary from both sides never show an
    # index gap of 2 at any depth
    g = Grid.from_edges([1.0, 2.0, 3.0])
    d = from_atoms(g, [(2.0 - 1e-9, 1.0), (2.0 + 1e-9, 1.0)])
    with pytest.raises(SeparationUndecidedError):
        find_separated_mass_pair(d, horizon=4.0, max_depth=12)


def test_empty_horizon_errors():
    g = geometric_grid(1.0, 10.0, 4)
    d = SizeDistribution(grid=g, counts=np.zeros(4))
    with pytest.raises(EmptyMeasureError):
        find_separated_mass_pair(d, horizon=4.0)
    d2 = from_atoms(g, [(8.0, 1.0)])
    with pytest.raises(EmptyMeasureError):
        find_separated_mass_pair(d2, horizon=2.0, max_extensions=0)


def test_separated_pair_property_random_atoms():
    rng = np.random.default_rng(55)
    found = 0
    for _ in range(200):
        g = geometric_grid(0.25, 64.0, 40)
        d = random_atomic(rng, g, int(rng.integers(2, 8)))
        try:
            out = find_separated_mass_pair(d)
        except SeparationUndecidedError:
            continue
        if isinstance(out, SeparatedPair):
            found += 1
            # balls disjoint with gap >= separation and both carry mass
            assert out.upper - out.lower >= 3.0 * out.separation
            assert ball_mass(d, out.lower, out.separation) > 0
            assert ball_mass(d, out.upper, out.separation) > 0
    assert found > 100  # separation is the typical outcome


# -- moment-root inequality ----------------------------------------------------


def test_moment_root_hand_value():
    g = geometric_grid(0.5, 16.0, 20)
    d = from_atoms(g, [(5.0, 2.0)])
    chk = moment_root_inequality_check(d, 2.0, 2.0)
    assert chk.lhs == pytest.approx(math.sqrt(18.0), rel=1e-14)
    assert chk.rhs == pytest.approx(2.0 * math.sqrt(2.0), rel=1e-14)
    assert chk.holds


def test_moment_root_property_random():
    rng = np.random.default_rng(777)
    for _ in range(300):
        g = geometric_grid(0.1, 200.0, 35)
        d = random_atomic(rng, g, int(rng.integers(1, 15)))
        r = float(rng.choice([1.0, 2.0, 4.0]))
        m = float(rng.choice([2.0, 5.0, 10.0]))
        assert moment_root_inequality_check(d, r, m).holds


# -- csv ----------------------------------------------------------------------


def test_distribution_csv_round_trip(tmp_path):
    g = geometric_grid(0.5, 16.0, 12)
    d = from_atoms(g, [(1.0, 1.0), (2.5, 0.4)])
    d.gel_mass = 0.125
    path = tmp_path / "dist.csv"
    distribution_to_csv(d, path)
    d2 = distribution_from_csv(path)
    assert np.array_equal(d2.counts, d.counts)
    assert np.array_equal(d2.grid.edges, d.grid.edges)
    assert np.array_equal(d2.grid.pivots, d.grid.pivots)
    assert np.array_equal(d2.atomic, d.atomic)
    assert d2.gel_mass == d.gel_mass
    assert moment(d2, 1) == moment(d, 1)
    text = path.read_text()
    assert text.startswith("# gel_mass=")
    assert "bin_lower,bin_upper,pivot,count" in text
