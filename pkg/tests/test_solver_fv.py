"""Sectional solver: grid anchoring, conservation ledgers, analytic controls."""

from __future__ import annotations

import math

import numpy as np
import pytest

from gelab.errors import DomainError, StepRejectedError
from gelab.initial import InitSpec
from gelab.kernels import Kernel
from gelab.measures import moment
from gelab.solver_fv import (
    FvConfig,
    FvTables,
    HatOnBall,
    PowerTruncated,
    STATUS_COMPLETED,
    STATUS_GELATION_RUNAWAY,
    build_grid,
    run,
    step,
    trajectory_to_csv,
    weak_form_residual,
)


# -- grid ---------------------------------------------------------------------


def test_build_grid_anchored_at_ceiling():
    g = build_grid(0.1, 10.0, 4)
    assert g.n_bins == 8
    assert g.edges[-1] == 10.0
    assert g.edges[0] == pytest.approx(0.1, rel=1e-12)

    g2 = build_grid(1.0, 10.0, 1)
    assert g2.n_bins == 1
    assert g2.edges[0] == pytest.approx(1.0, rel=1e-12)
    assert g2.edges[-1] == 10.0

    g3 = build_grid(1.0, 100.0, 3)
    assert g3.n_bins == 6


def test_build_grid_covers_v_min():
    for v_min, v_max, bpd in [(0.3, 470.0, 7), (1e-3, 12.0, 5), (2.0, 3.0, 16)]:
        g = build_grid(v_min, v_max, bpd)
        assert g.edges[0] <= v_min * (1 + 1e-9)
        assert g.edges[-1] == v_max
        ratios = g.edges[1:] / g.edges[:-1]
        assert ratios == pytest.approx(10.0 ** (1.0 / bpd), rel=1e-12)


def test_build_grid_validation():
    with pytest.raises(DomainError):
        build_grid(0.0, 10.0, 4)
    with pytest.raises(DomainError):
        build_grid(10.0, 1.0, 4)
    with pytest.raises(DomainError):
        build_grid(0.1, 10.0, 0)


# -- single step ---------------------------------------------------------------


def test_step_rejects_unstable_dt():
    kernel = Kernel.constant(1.0)
    grid = build_grid(0.5, 64.0, 4)
    tables = FvTables(kernel, grid)
    numbers = np.full(grid.n_bins, 1.0)
    dt_max = tables.stability_dt(numbers, dt_safety=0.5)
    assert dt_max == pytest.approx(0.5 / numbers.sum(), rel=1e-12)
    with pytest.raises(StepRejectedError) as exc:
        step(tables, numbers, 0.0, dt_max * 1.5)
    assert exc.value.admissible_dt == pytest.approx(dt_max, rel=1e-12)
    # at the bound the step is accepted
    step(tables, numbers, 0.0, dt_max)


def test_step_balances_number_and_mass():
    rng = np.random.default_rng(11)
    kernel = Kernel.differential_sedimentation()
    # support far below the ceiling: no gel flux, mass exactly redistributed
    grid = build_grid(0.5, 1e6, 6)
    tables = FvTables(kernel, grid)
    numbers = np.zeros(grid.n_bins)
    numbers[:10] = rng.uniform(0.0, 1.0, 10)
    pr = tables.pair_coeff * numbers[tables.pair_i] * numbers[tables.pair_j]
    dt = tables.stability_dt(numbers)
    new_numbers, new_gel = step(tables, numbers, 0.0, dt)
    m0_expected = numbers.sum() - dt * pr.sum()
    assert new_numbers.sum() == pytest.approx(m0_expected, rel=1e-12)
    m1_before = numbers @ grid.pivots
    m1_after = new_numbers @ grid.pivots
    assert m1_after == pytest.approx(m1_before, rel=1e-12)
    assert new_gel == 0.0
    assert np.all(new_numbers >= 0)


def test_step_gel_ledger_closes():
    kernel = Kernel.sum_kernel(1.0)
    grid = build_grid(0.5, 16.0, 4)
    tables = FvTables(kernel, grid)
    numbers = np.zeros(grid.n_bins)
    numbers[grid.locate(10.0)] = 2.0  # pair sums overflow the ceiling
    numbers[grid.locate(9.0)] = 1.0
    dt = tables.stability_dt(numbers)
    new_numbers, new_gel = step(tables, numbers, 0.0, dt)
    assert new_gel > 0
    total_before = numbers @ grid.pivots
    total_after = new_numbers @ grid.pivots + new_gel
    assert total_after == pytest.approx(total_before, rel=1e-12)


# -- analytic controls ----------------------------------------------------------


def test_monodisperse_state_is_a_fixed_point():
    # the rate vanishes on the diagonal, so equal-size particles never merge
    kernel = Kernel.differential_sedimentation()
    config = FvConfig(v_min=0.1, v_max=100.0, bins_per_decade=8,
                      t_end=0.5, n_samples=5)
    traj = run(kernel, InitSpec.monodisperse(volume=1.0, number=1.0), config)
    first = traj.states[0]
    last = traj.states[-1]
    assert np.array_equal(last.counts, first.counts)  # bit-for-bit
    assert np.array_equal(last.atomic, first.atomic)
    assert last.gel_mass == 0.0
    assert traj.status == STATUS_COMPLETED
    assert traj.steps_taken > 0
    assert np.all(traj.m0 == traj.m0[0])
    assert np.all(traj.m1_in == traj.m1_in[0])


def test_constant_kernel_matches_riccati_decay():
    # K = 1: M0' = -M0^2/2, so M0(t) = M0(0)/(1 + M0(0) t/2)
    kernel = Kernel.constant(1.0)
    config = FvConfig(v_min=0.5, v_max=2000.0, bins_per_decade=6,
                      t_end=2.0, n_samples=20, dt_safety=0.01)
    traj = run(kernel, InitSpec.monodisperse(volume=1.0, number=1.0), config)
    exact = 1.0 / (1.0 + traj.times / 2.0)
    assert traj.m0 == pytest.approx(exact, rel=5e-3)
    total = traj.m1_in + traj.gel_mass
    assert total == pytest.approx(np.full_like(total, traj.m1_in[0]),
                                  rel=1e-10)


def test_additive_kernel_exponential_number_decay():
    # K = v + w: M0(t) = M0(0) exp(-M1 t) while everything stays resolved
    kernel = Kernel.sum_kernel(1.0)
    config = FvConfig(v_min=0.5, v_max=1e4, bins_per_decade=6,
                      t_end=1.0, n_samples=10, dt_safety=0.05)
    traj = run(kernel, InitSpec.monodisperse(volume=1.0, number=1.0), config)
    exact = np.exp(-traj.times)
    assert traj.m0 == pytest.approx(exact, rel=2e-2)
    assert traj.gel_mass[-1] < 5e-3 * traj.m1_in[0]
    total = traj.m1_in + traj.gel_mass
    assert total == pytest.approx(np.full_like(total, traj.m1_in[0]),
                                  rel=1e-10)


def test_gel_stop_flags_runaway():
    kernel = Kernel.sum_kernel(1.0)
    config = FvConfig(v_min=0.5, v_max=8.0, bins_per_decade=4,
                      t_end=50.0, n_samples=100, dt_safety=0.2,
                      gel_stop_fraction=0.5)
    traj = run(kernel, InitSpec.monodisperse(volume=1.0, number=1.0), config)
    assert traj.status == STATUS_GELATION_RUNAWAY
    assert traj.gel_mass[-1] >= 0.5 * traj.m1_in[0]
    assert traj.times[-1] < 50.0


# -- trajectory plumbing ---------------------------------------------------------


def test_run_accepts_prebinned_state_and_rejects_foreign_grid():
    kernel = Kernel.constant(1.0)
    config = FvConfig(v_min=0.5, v_max=64.0, bins_per_decade=4,
                      t_end=0.1, n_samples=2)
    grid = build_grid(0.5, 64.0, 4)
    state = InitSpec.monodisperse(1.0, 1.0).to_distribution(grid)
    traj = run(kernel, state, config)
    assert traj.m0[0] == pytest.approx(1.0, rel=1e-14)

    other = build_grid(0.5, 64.0, 5)
    foreign = InitSpec.monodisperse(1.0, 1.0).to_distribution(other)
    with pytest.raises(DomainError):
        run(kernel, foreign, config)


def test_state_at_picks_last_sample():
    kernel = Kernel.constant(1.0)
    config = FvConfig(v_min=0.5, v_max=64.0, bins_per_decade=4,
                      t_end=1.0, n_samples=4)
    traj = run(kernel, InitSpec.monodisperse(1.0, 1.0), config)
    assert traj.state_at(0.3) is traj.states[1]
    assert traj.state_at(1.0) is traj.states[-1]
    with pytest.raises(DomainError):
        traj.state_at(-0.1)


def test_trajectory_csv(tmp_path):
    kernel = Kernel.constant(1.0)
    config = FvConfig(v_min=0.5, v_max=64.0, bins_per_decade=4,
                      t_end=0.2, n_samples=2)
    traj = run(kernel, InitSpec.monodisperse(1.0, 1.0), config)
    path = tmp_path / "traj.csv"
    trajectory_to_csv(traj, path)
    lines = path.read_text().strip().split("\n")
    assert lines[0] == "time,M0,M1_in,gel_mass"
    assert len(lines) == len(traj.times) + 1
    assert float(lines[1].split(",")[1]) == traj.m0[0]


# -- weak form -------------------------------------------------------------------


def test_weak_form_mass_functional_near_zero():
    # phi(v) = v below the ceiling: the pair functional cancels exactly
    # while nothing reaches the ceiling, so the defect is pure quadrature
    kernel = Kernel.constant(1.0)
    config = FvConfig(v_min=0.5, v_max=2000.0, bins_per_decade=6,
                      t_end=1.0, n_samples=20, dt_safety=0.02)
    traj = run(kernel, InitSpec.monodisperse(1.0, 1.0), config)
    res = weak_form_residual(traj, PowerTruncated(1.0, 2000.0))
    assert res < 1e-6


def test_weak_form_counting_functional_shrinks_under_refinement():
    kernel = Kernel.constant(1.0)
    counting = PowerTruncated(0.0, 2000.0)
    residuals = []
    for refine in (1, 2):
        config = FvConfig(v_min=0.5, v_max=2000.0, bins_per_decade=6,
                          t_end=1.0, n_samples=16 * refine,
                          dt_safety=0.04 / refine)
        traj = run(kernel, InitSpec.monodisperse(1.0, 1.0), config)
        residuals.append(weak_form_residual(traj, counting))
    assert residuals[0] > residuals[1] > 0
    assert residuals[0] / residuals[1] > 1.5


def test_weak_form_rejects_support_beyond_ceiling():
    kernel = Kernel.constant(1.0)
    config = FvConfig(v_min=0.5, v_max=64.0, bins_per_decade=4,
                      t_end=0.1, n_samples=2)
    traj = run(kernel, InitSpec.monodisperse(1.0, 1.0), config)
    with pytest.raises(DomainError):
        weak_form_residual(traj, PowerTruncated(1.0, 100.0))
    with pytest.raises(DomainError):
        weak_form_residual(traj, HatOnBall(center=63.0, r_in=1.0, r_out=2.0))


def test_hat_test_function_shape():
    hat = HatOnBall(center=3.5, r_in=0.1, r_out=0.3)
    assert hat(3.5) == 1.0
    assert hat(3.45) == 1.0
    assert hat(np.array([3.9, 3.3])) == pytest.approx([0.0, 0.5], abs=1e-12)
    with pytest.raises(DomainError):
        HatOnBall(center=1.0, r_in=0.5, r_out=0.4)
