"""Figure rendering for run reports.

Figures are drawn headlessly and written as SVG next to the delimited
output.  Rendering is deterministic: the Agg backend needs no display,
the SVG hash salt is pinned, and the date stamp is stripped, so the same
inputs produce byte-identical files.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
matplotlib.rcParams["svg.hashsalt"] = "gelab"

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)
import numpy as np  # noqa: E402

from .diagnostics import CascadeProbe, TailFit  # noqa: E402
from .errors import ReportError  # noqa: E402
from .solver_fv import Trajectory  # noqa: E402

_SAVE_KW = {"format": "svg", "metadata": {"Date": None}}


def _finish(fig, path) -> None:
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)


def plot_moment_history(traj: Trajectory, path) -> None:
    """Number, resolved mass, and gel mass against time."""
    if len(traj.times) == 0:
        raise ReportError("trajectory has no samples to plot")
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    ax.plot(traj.times, traj.m0, label="number", color="tab:blue")
    ax.plot(traj.times, traj.m1_in, label="resolved mass", color="tab:green")
    ax.plot(traj.times, traj.gel_mass, label="gel mass", color="tab:red")
    ax.set_xlabel("time")
    ax.set_ylabel("moment")
    ax.set_title(f"moment history ({traj.kernel_form}, {traj.status})")
    ax.legend()
    fig.tight_layout()
    _finish(fig, path)


def plot_sweep(x_values, t_values, x_label: str, path) -> None:
    """Gelation onset against a swept parameter, log-log, skipping holes."""
    pairs = [(float(x), float(t)) for x, t in zip(x_values, t_values)
             if t is not None and np.isfinite(t) and t > 0]
    if not pairs:
        raise ReportError("sweep produced no finite onset times to plot")
    xs, ts = zip(*pairs)
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    ax.loglog(xs, ts, marker="o", color="tab:blue")
    ax.set_xlabel(x_label)
    ax.set_ylabel("gel onset time")
    ax.set_title(f"onset vs {x_label}")
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    _finish(fig, path)


def plot_tail_fit(fit: TailFit, gamma: float, path) -> None:
    """Tail mass against R^(gamma-1) with the fitted line, semi-log."""
    if fit.n_points == 0:
        raise ReportError("tail fit carries no points")
    x = np.asarray(fit.r_values) ** (gamma - 1.0)
    y = np.asarray(fit.i_values)
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    ax.semilogy(x, y, "o", color="tab:blue", label="measured")
    xs = np.linspace(x.min(), x.max(), 100)
    ax.semilogy(xs, np.exp(fit.log_prefactor - fit.decay_rate * xs),
                "-", color="tab:orange",
                label=f"rate {fit.decay_rate:.3g}, r2 {fit.r_squared:.4f}")
    ax.set_xlabel(f"R^(gamma-1), gamma={gamma:.4g}")
    ax.set_ylabel("tail mass I(R)")
    ax.set_title("stretched-exponential tail fit")
    ax.legend()
    fig.tight_layout()
    _finish(fig, path)


def plot_largest_history(log, path) -> None:
    """Running maximum particle volume of one stochastic run, per event."""
    if log.n_events == 0:
        raise ReportError("event log is empty; nothing to plot")
    history = log.largest_history()
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    ax.step(log.times, history, where="post", color="tab:blue")
    ax.axhline(log.total_volume, color="tab:red", linestyle="--", alpha=0.6,
               label="total volume")
    ax.set_yscale("log")
    ax.set_xlabel("time")
    ax.set_ylabel("largest particle volume")
    ax.set_title(f"largest particle (n0={log.n_initial})")
    ax.legend()
    fig.tight_layout()
    _finish(fig, path)


def plot_cascade(probe: CascadeProbe, path) -> None:
    """Ball masses along the arithmetic ladder, log scale."""
    if len(probe.masses) == 0:
        raise ReportError("cascade probe is empty")
    steps = np.arange(1, len(probe.masses) + 1)
    masses = np.asarray(probe.masses)
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    positive = masses > 0
    if np.any(positive):
        ax.bar(steps[positive], masses[positive], color="tab:blue",
               label="ball mass")
        ax.set_yscale("log")
    if np.any(~positive):
        for s in steps[~positive]:
            ax.axvline(s, color="tab:red", linestyle=":", alpha=0.6)
    ax.set_xticks(steps)
    ax.set_xlabel("ladder step")
    ax.set_ylabel("mass in ball")
    ax.set_title(f"cascade at t={probe.sample_time:.4g}")
    fig.tight_layout()
    _finish(fig, path)
