"""Command line front end.

Scenarios are driven by a flat, line-oriented config file: one
``section.key = value`` assignment per line, ``#`` comments allowed.
Unknown keys are rejected by name so typos cannot silently fall back to
defaults.  Every run writes its delimited outputs, its figures, and a
``manifest.json`` recording the config digest, tool version, seed, wall
time, and produced files.

Exit codes: 0 success, 2 config problem, 3 certification failure,
4 runtime failure (a run that could not produce its result).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time
from pathlib import Path

from . import __version__
from .diagnostics import (
    cascade_to_csv,
    gelation_time_from_series,
    positivity_cascade_probe,
)
from .errors import ConfigError, GelabError
from .initial import InitSpec
from .kernels import Kernel, SamplingSpec, certify_assumption
from .measures import SeparatedPair, SingleAtom, find_separated_mass_pair
from .reporting import (
    plot_cascade,
    plot_largest_history,
    plot_moment_history,
    plot_sweep,
)
from .solver_fv import FvConfig, run as run_fv, trajectory_to_csv
from .solver_mc import (
    detect_gelation,
    ensemble_to_csv,
    event_log_to_csv,
    EnsembleResult,
    replica_rng,
    simulate,
)
from .measures import distribution_to_csv

SCENARIOS = ("simulate_fv", "simulate_mc", "sweep_vmax", "sweep_n",
             "certify_kernel", "cascade_probe")

KERNEL_FORMS = ("differential_sedimentation", "sum", "power_difference",
                "abs_difference")

# every key the config language understands: key -> parser name
_KNOWN_KEYS = {
    "kernel.form": "choice",
    "kernel.gamma": "float",
    "kernel.d1": "float",
    "kernel.d2": "float",
    "init.kind": "choice",
    "init.volume": "float",
    "init.number": "float",
    "init.atoms": "atoms",
    "init.scale": "float",
    "init.lower": "float",
    "init.upper": "float",
    "fv.v_min": "float",
    "fv.v_max": "float",
    "fv.bins_per_decade": "int",
    "fv.t_end": "float",
    "fv.n_samples": "int",
    "fv.dt_safety": "float",
    "fv.gel_stop_fraction": "float",
    "mc.n_particles": "int",
    "mc.replicas": "int",
    "mc.t_end": "float",
    "mc.theta": "float",
    "gel.epsilon": "float",
    "sweep.v_max_values": "float_list",
    "sweep.n_values": "int_list",
    "cascade.t": "float",
    "cascade.n_steps": "int",
    "cascade.horizon": "float",
    "cascade.max_extensions": "int",
    "certify.n_v": "int",
    "certify.n_x": "int",
    "certify.require_diagonal_vanishing": "bool",
}


def parse_config(text: str) -> dict[str, str]:
    """Parse the flat config language into a key -> raw value map."""
    entries: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(
                f"config line {lineno}: expected 'section.key = value', "
                f"got {raw.strip()!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if "." not in key or not all(key.split(".")):
            raise ConfigError(
                f"config line {lineno}: key must look like section.key, "
                f"got {key!r}")
        if key not in _KNOWN_KEYS:
            raise ConfigError(
                f"config line {lineno}: unknown key {key!r}")
        if key in entries:
            raise ConfigError(
                f"config line {lineno}: duplicate key {key!r}")
        if not value:
            raise ConfigError(f"config line {lineno}: empty value for {key}")
        entries[key] = value
    return entries


def _get_float(entries, key, default=None, required=False):
    if key not in entries:
        if required:
            raise ConfigError(f"missing required config key {key}")
        return default
    try:
        return float(entries[key])
    except ValueError:
        raise ConfigError(
            f"config key {key}: expected a number, got {entries[key]!r}")


def _get_int(entries, key, default=None, required=False):
    if key not in entries:
        if required:
            raise ConfigError(f"missing required config key {key}")
        return default
    try:
        return int(entries[key])
    except ValueError:
        raise ConfigError(
            f"config key {key}: expected an integer, got {entries[key]!r}")


def _get_bool(entries, key, default):
    if key not in entries:
        return default
    value = entries[key].lower()
    if value in ("true", "yes", "1"):
        return True
    if value in ("false", "no", "0"):
        return False
    raise ConfigError(
        f"config key {key}: expected true/false, got {entries[key]!r}")


def _get_float_list(entries, key):
    if key not in entries:
        raise ConfigError(f"missing required config key {key}")
    try:
        values = [float(tok) for tok in entries[key].split(",") if tok.strip()]
    except ValueError:
        raise ConfigError(
            f"config key {key}: expected comma-separated numbers, got "
            f"{entries[key]!r}")
    if not values:
        raise ConfigError(f"config key {key}: empty list")
    return values


def _get_int_list(entries, key):
    values = _get_float_list(entries, key)
    ints = [int(v) for v in values]
    if any(i != v for i, v in zip(ints, values)):
        raise ConfigError(f"config key {key}: expected integers")
    return ints


def build_kernel(entries) -> Kernel:
    form = entries.get("kernel.form")
    if form is None:
        raise ConfigError("missing required config key kernel.form")
    if form not in KERNEL_FORMS:
        raise ConfigError(
            f"kernel.form must be one of {', '.join(KERNEL_FORMS)}; "
            f"got {form!r}")
    if form == "differential_sedimentation":
        return Kernel.differential_sedimentation()
    if form == "sum":
        return Kernel.sum_kernel(_get_float(entries, "kernel.gamma",
                                            required=True))
    d1 = _get_float(entries, "kernel.d1", required=True)
    d2 = _get_float(entries, "kernel.d2", required=True)
    if form == "power_difference":
        return Kernel.power_difference(d1, d2)
    return Kernel.abs_difference(d1, d2)


def build_init(entries) -> InitSpec:
    kind = entries.get("init.kind")
    if kind is None:
        raise ConfigError("missing required config key init.kind")
    number = _get_float(entries, "init.number", default=1.0)
    if kind == "monodisperse":
        return InitSpec.monodisperse(
            volume=_get_float(entries, "init.volume", default=1.0),
            number=number)
    if kind == "dirac":
        raw = entries.get("init.atoms")
        if raw is None:
            raise ConfigError("init.kind=dirac needs init.atoms "
                              "(volume:weight pairs, comma separated)")
        atoms = []
        for tok in raw.split(","):
            tok = tok.strip()
            if not tok:
                continue
            if ":" not in tok:
                raise ConfigError(
                    f"init.atoms: expected volume:weight, got {tok!r}")
            v_str, _, w_str = tok.partition(":")
            try:
                atoms.append((float(v_str), float(w_str)))
            except ValueError:
                raise ConfigError(
                    f"init.atoms: expected numbers in {tok!r}")
        return InitSpec.dirac(atoms)
    if kind == "exponential":
        return InitSpec.exponential(
            scale=_get_float(entries, "init.scale", required=True),
            number=number)
    if kind == "uniform":
        return InitSpec.uniform(
            lower=_get_float(entries, "init.lower", required=True),
            upper=_get_float(entries, "init.upper", required=True),
            number=number)
    raise ConfigError(
        f"init.kind must be monodisperse, dirac, exponential or uniform; "
        f"got {kind!r}")


def build_fv_config(entries, v_max: float | None = None) -> FvConfig:
    return FvConfig(
        v_min=_get_float(entries, "fv.v_min", required=True),
        v_max=v_max if v_max is not None
        else _get_float(entries, "fv.v_max", required=True),
        bins_per_decade=_get_int(entries, "fv.bins_per_decade",
                                 required=True),
        t_end=_get_float(entries, "fv.t_end", required=True),
        n_samples=_get_int(entries, "fv.n_samples", default=50),
        dt_safety=_get_float(entries, "fv.dt_safety", default=0.5),
        gel_stop_fraction=_get_float(entries, "fv.gel_stop_fraction"),
    )


# -- scenarios -------------------------------------------------------------------


def scenario_simulate_fv(entries, out: Path, seed: int) -> dict:
    kernel = build_kernel(entries)
    init = build_init(entries)
    config = build_fv_config(entries)
    epsilon = _get_float(entries, "gel.epsilon", default=0.01)
    traj = run_fv(kernel, init, config)
    files = []
    trajectory_to_csv(traj, out / "trajectory.csv")
    files.append("trajectory.csv")
    distribution_to_csv(traj.final_state, out / "final_state.csv")
    files.append("final_state.csv")
    plot_moment_history(traj, out / "moment_history.svg")
    files.append("moment_history.svg")
    t_gel = gelation_time_from_series(traj.times, traj.gel_mass,
                                      float(traj.m1_in[0]), epsilon)
    return {"status": traj.status, "files": files,
            "t_gel": t_gel, "steps": traj.steps_taken}


def scenario_simulate_mc(entries, out: Path, seed: int) -> dict:
    kernel = build_kernel(entries)
    init = build_init(entries)
    n = _get_int(entries, "mc.n_particles", required=True)
    replicas = _get_int(entries, "mc.replicas", default=1)
    t_end = _get_float(entries, "mc.t_end", required=True)
    theta = _get_float(entries, "mc.theta", default=0.2)
    times = []
    largest = []
    first_log = None
    for rep in range(replicas):
        rng = replica_rng(seed, rep)
        volumes = init.sample_particles(rng, n)
        log = simulate(kernel, volumes, t_end, rng)
        if rep == 0:
            first_log = log
        times.append(detect_gelation(log, theta))
        largest.append(log.final_max_volume)
    result = EnsembleResult(n_particles=n, replicas=replicas, theta=theta,
                            t_end=t_end, times=tuple(times),
                            largest_final=tuple(largest))
    files = []
    ensemble_to_csv(result, out / "ensemble.csv")
    files.append("ensemble.csv")
    event_log_to_csv(first_log, out / "events_rep0.csv")
    files.append("events_rep0.csv")
    if first_log.n_events > 0:
        plot_largest_history(first_log, out / "largest_history.svg")
        files.append("largest_history.svg")
    med = result.median_time
    return {"status": "completed", "files": files,
            "median_t_gel": med, "censored": result.censored_count}


def scenario_sweep_vmax(entries, out: Path, seed: int) -> dict:
    kernel = build_kernel(entries)
    init = build_init(entries)
    v_values = _get_float_list(entries, "sweep.v_max_values")
    epsilon = _get_float(entries, "gel.epsilon", default=0.01)
    onsets = []
    rows = ["v_max,t_gel_or_censored,status"]
    for v_max in v_values:
        config = build_fv_config(entries, v_max=v_max)
        traj = run_fv(kernel, init, config)
        t_gel = gelation_time_from_series(traj.times, traj.gel_mass,
                                          float(traj.m1_in[0]), epsilon)
        onsets.append(t_gel)
        t_str = "censored" if t_gel is None else repr(float(t_gel))
        rows.append(f"{float(v_max)!r},{t_str},{traj.status}")
    files = []
    (out / "sweep_vmax.csv").write_text("\n".join(rows) + "\n")
    files.append("sweep_vmax.csv")
    if any(t is not None for t in onsets):
        plot_sweep(v_values, onsets, "resolved ceiling v_max",
                   out / "onset_vs_vmax.svg")
        files.append("onset_vs_vmax.svg")
    return {"status": "completed", "files": files,
            "onsets": [None if t is None else float(t) for t in onsets]}


def scenario_sweep_n(entries, out: Path, seed: int) -> dict:
    kernel = build_kernel(entries)
    init = build_init(entries)
    n_values = _get_int_list(entries, "sweep.n_values")
    replicas = _get_int(entries, "mc.replicas", required=True)
    t_end = _get_float(entries, "mc.t_end", required=True)
    theta = _get_float(entries, "mc.theta", default=0.2)
    medians = []
    rows = ["n_particles,median_tgel_or_censored,censored_count"]
    for n in n_values:
        times = []
        for rep in range(replicas):
            rng = replica_rng(seed, rep)
            volumes = init.sample_particles(rng, n)
            log = simulate(kernel, volumes, t_end, rng)
            times.append(detect_gelation(log, theta))
        result = EnsembleResult(n_particles=n, replicas=replicas,
                                theta=theta, t_end=t_end, times=tuple(times),
                                largest_final=())
        med = result.median_time
        medians.append(med)
        med_str = "censored" if med is None else repr(float(med))
        rows.append(f"{n},{med_str},{result.censored_count}")
    files = []
    (out / "sweep_n.csv").write_text("\n".join(rows) + "\n")
    files.append("sweep_n.csv")
    if any(m is not None for m in medians):
        plot_sweep(n_values, medians, "particle count n",
                   out / "onset_vs_n.svg")
        files.append("onset_vs_n.svg")
    return {"status": "completed", "files": files,
            "medians": [None if m is None else float(m) for m in medians]}


def scenario_certify_kernel(entries, out: Path, seed: int) -> dict:
    kernel = build_kernel(entries)
    kwargs = {}
    n_v = _get_int(entries, "certify.n_v")
    n_x = _get_int(entries, "certify.n_x")
    if n_v is not None or n_x is not None:
        base = SamplingSpec()
        kwargs["sampling"] = SamplingSpec(
            n_v=n_v if n_v is not None else base.n_v,
            n_x=n_x if n_x is not None else base.n_x)
    kwargs["require_diagonal_vanishing"] = _get_bool(
        entries, "certify.require_diagonal_vanishing", True)
    report = certify_assumption(kernel, **kwargs)
    (out / "certificate.csv").write_text(
        "\n".join(report.csv_rows()) + "\n")
    status = "PASS" if report.passed else "FAIL"
    failed = [c.name for c in report.checks if c.status == "FAIL"]
    return {"status": status, "files": ["certificate.csv"],
            "failed_checks": failed, "passed": report.passed}


def scenario_cascade_probe(entries, out: Path, seed: int) -> dict:
    kernel = build_kernel(entries)
    init = build_init(entries)
    config = build_fv_config(entries)
    t_probe = _get_float(entries, "cascade.t", required=True)
    n_steps = _get_int(entries, "cascade.n_steps", default=3)
    horizon = _get_float(entries, "cascade.horizon")
    max_ext = _get_int(entries, "cascade.max_extensions", default=1)
    traj = run_fv(kernel, init, config)
    found = find_separated_mass_pair(traj.states[0], horizon=horizon,
                                     max_extensions=max_ext)
    if isinstance(found, SingleAtom):
        raise GelabError(
            f"initial state is a single atom at {found.position}; the "
            f"two-point ladder needs separated mass")
    assert isinstance(found, SeparatedPair)
    probe = positivity_cascade_probe(traj, found, t_probe, n_steps)
    files = []
    cascade_to_csv(probe, out / "cascade.csv")
    files.append("cascade.csv")
    plot_cascade(probe, out / "cascade.svg")
    files.append("cascade.svg")
    return {"status": "completed", "files": files,
            "pair": {"lower": found.lower, "upper": found.upper,
                     "separation": found.separation},
            "ball_masses": [float(m) for m in probe.masses],
            "all_positive": probe.all_positive}


_RUNNERS = {
    "simulate_fv": scenario_simulate_fv,
    "simulate_mc": scenario_simulate_mc,
    "sweep_vmax": scenario_sweep_vmax,
    "sweep_n": scenario_sweep_n,
    "certify_kernel": scenario_certify_kernel,
    "cascade_probe": scenario_cascade_probe,
}


def _write_manifest(out: Path, scenario: str, config_path: Path,
                    seed: int, wall: float, summary: dict) -> None:
    digest = hashlib.sha256(config_path.read_bytes()).hexdigest()
    manifest = {
        "tool": "gelab",
        "version": __version__,
        "scenario": scenario,
        "config": str(config_path),
        "config_sha256": digest,
        "seed": seed,
        "wall_seconds": round(wall, 3),
        "summary": summary,
    }
    with open(out / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def main(argv=None) -> int:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True,
                        help="path to the flat config file")
    common.add_argument("--out", default="gelab_out",
                        help="output directory (created if missing)")
    common.add_argument("--seed", type=int, default=0,
                        help="master seed (unsigned 64-bit)")
    common.add_argument("--threads", type=int, default=None,
                        help="best-effort cap on numeric library threads")
    parser = argparse.ArgumentParser(
        prog="gelab",
        description="coagulation laboratory: deterministic and stochastic "
                    "solvers with gelation diagnostics")
    sub = parser.add_subparsers(dest="scenario", required=True)
    for name in SCENARIOS:
        sub.add_parser(name, parents=[common])
    args = parser.parse_args(argv)

    if args.threads is not None:
        if args.threads < 1:
            print("error: --threads must be positive", file=sys.stderr)
            return 2
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS",
                    "MKL_NUM_THREADS"):
            os.environ[var] = str(args.threads)
    if not (0 <= args.seed < 2 ** 64):
        print("error: --seed must fit in an unsigned 64-bit integer",
              file=sys.stderr)
        return 2

    config_path = Path(args.config)
    try:
        text = config_path.read_text()
    except OSError as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return 2

    out = Path(args.out)
    started = time.monotonic()
    try:
        entries = parse_config(text)
        out.mkdir(parents=True, exist_ok=True)
        summary = _RUNNERS[args.scenario](entries, out, args.seed)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except GelabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        if out.is_dir():
            _write_manifest(out, args.scenario, config_path, args.seed,
                            time.monotonic() - started,
                            {"status": f"failed: {exc}", "files": []})
        return 4

    _write_manifest(out, args.scenario, config_path, args.seed,
                    time.monotonic() - started, summary)
    print(f"{args.scenario}: {summary['status']} "
          f"({len(summary['files'])} file(s) in {out})")
    if args.scenario == "certify_kernel" and not summary["passed"]:
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
