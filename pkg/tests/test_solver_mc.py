"""Stochastic solver: exact stasis, reproducibility, mean-field controls."""

from __future__ import annotations

import numpy as np
import pytest

from gelab.errors import DomainError
from gelab.initial import InitSpec
from gelab.kernels import Kernel
from gelab.solver_mc import (
    EventLog,
    detect_gelation,
    ensemble_gelation,
    ensemble_to_csv,
    event_log_to_csv,
    replica_rng,
    simulate,
)


def test_monodisperse_diagonal_vanishing_is_frozen():
    # every pair rate is exactly zero, so not a single event fires
    kernel = Kernel.differential_sedimentation()
    volumes = np.full(500, 1.0)
    log = simulate(kernel, volumes, t_end=10.0, rng=np.random.default_rng(3))
    assert log.n_events == 0
    assert log.final_max_volume == 1.0
    assert log.end_time == 10.0
    assert detect_gelation(log, theta=0.2) is None


def test_bitwise_reproducible_given_seed():
    kernel = Kernel.sum_kernel(1.0)
    spec = InitSpec.uniform(1.0, 2.0)
    logs = []
    for _ in range(2):
        rng = replica_rng(123, 0)
        volumes = spec.sample_particles(rng, 300)
        logs.append(simulate(kernel, volumes, t_end=2.0, rng=rng))
    assert np.array_equal(logs[0].times, logs[1].times)
    assert np.array_equal(logs[0].v_merged, logs[1].v_merged)

    rng_b = replica_rng(123, 1)
    volumes_b = spec.sample_particles(rng_b, 300)
    log_b = simulate(kernel, volumes_b, t_end=2.0, rng=rng_b)
    assert not np.array_equal(logs[0].times, log_b.times)


def test_mass_conserved_and_events_ordered():
    kernel = Kernel.sum_kernel(1.0)
    rng = replica_rng(7, 0)
    volumes = InitSpec.uniform(0.5, 1.5).sample_particles(rng, 400)
    log = simulate(kernel, volumes, t_end=3.0, rng=rng)
    assert log.n_events > 0
    assert np.all(np.diff(log.times) > 0)
    assert np.all(log.v_small <= log.v_large)
    assert log.v_merged == pytest.approx(log.v_small + log.v_large, rel=1e-15)
    # replay the merges: final total volume must close the ledger
    final_total = log.total_volume  # coalescence conserves volume exactly
    remaining = volumes.sum() - log.v_small.sum() - log.v_large.sum() \
        + log.v_merged.sum()
    assert remaining == pytest.approx(final_total, rel=1e-12)


def test_constant_kernel_half_life_matches_mean_field():
    # K = 1: the count reaches n0/2 at t = 2 on average, sd well under 0.1
    kernel = Kernel.constant(1.0)
    n0 = 2000
    rng = replica_rng(99, 0)
    volumes = np.full(n0, 1.0)
    log = simulate(kernel, volumes, t_end=10.0, rng=rng)
    assert log.n_events >= n0 // 2
    t_half = float(log.times[n0 // 2 - 1])
    assert t_half == pytest.approx(2.0, abs=0.25)


def test_detect_gelation_paths():
    base = dict(times=np.array([0.5, 1.0, 2.0]),
                v_small=np.array([1.0, 1.0, 2.0]),
                v_large=np.array([1.0, 2.0, 3.0]),
                v_merged=np.array([2.0, 3.0, 5.0]),
                end_time=4.0)
    log = EventLog(n_initial=10, total_volume=10.0,
                   max_initial_volume=1.0, **base)
    # threshold 2.5: crossed by the second merge (volume 3)
    assert detect_gelation(log, theta=0.25) == 1.0
    # threshold 0.5: the initial state already qualifies
    assert detect_gelation(log, theta=0.05) == 0.0
    # threshold 8: never reached
    assert detect_gelation(log, theta=0.8) is None
    with pytest.raises(DomainError):
        detect_gelation(log, theta=0.0)


def test_ensemble_deterministic_and_censoring():
    kernel = Kernel.differential_sedimentation()
    spec = InitSpec.monodisperse(1.0, 1.0)
    # frozen dynamics: every replica is censored
    res = ensemble_gelation(kernel, spec, n_particles=50, replicas=4,
                            t_end=1.0, theta=0.2, master_seed=5)
    assert res.censored_count == 4
    assert res.median_time is None

    mixed = InitSpec.dirac([(1.0, 3.0), (2.5, 1.0)])
    r1 = ensemble_gelation(kernel, mixed, n_particles=200, replicas=4,
                           t_end=50.0, theta=0.2, master_seed=11)
    r2 = ensemble_gelation(kernel, mixed, n_particles=200, replicas=4,
                           t_end=50.0, theta=0.2, master_seed=11)
    assert r1 == r2
    assert all(t is None or t > 0 for t in r1.times)


def test_simulate_validation():
    kernel = Kernel.constant(1.0)
    rng = np.random.default_rng(0)
    with pytest.raises(DomainError):
        simulate(kernel, np.array([]), 1.0, rng)
    with pytest.raises(DomainError):
        simulate(kernel, np.array([1.0, -2.0]), 1.0, rng)
    with pytest.raises(DomainError):
        simulate(kernel, np.array([1.0, 2.0]), 0.0, rng)
    # a single particle has nothing to do
    log = simulate(kernel, np.array([2.0]), 1.0, rng)
    assert log.n_events == 0


def test_event_log_csv(tmp_path):
    kernel = Kernel.sum_kernel(1.0)
    rng = replica_rng(21, 0)
    volumes = InitSpec.uniform(1.0, 2.0).sample_particles(rng, 100)
    log = simulate(kernel, volumes, t_end=1.0, rng=rng)
    path = tmp_path / "events.csv"
    event_log_to_csv(log, path)
    lines = path.read_text().strip().split("\n")
    assert lines[0] == f"# n_initial={log.n_initial}"
    assert "event_index,time,v_small,v_large,v_merged" in lines
    assert len(lines) == 5 + log.n_events


def test_ensemble_csv(tmp_path):
    kernel = Kernel.differential_sedimentation()
    spec = InitSpec.monodisperse(1.0, 1.0)
    res = ensemble_gelation(kernel, spec, n_particles=20, replicas=3,
                            t_end=0.5, theta=0.2, master_seed=1)
    path = tmp_path / "ensemble.csv"
    ensemble_to_csv(res, path)
    text = path.read_text()
    assert "replica,tgel_or_censored,largest_final_particle" in text
    assert text.count(",censored,") == 3
