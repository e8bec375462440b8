"""Figure renderers: stateless CSV-to-image transforms."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from . import io as fio
from . import reference as ref


@dataclass(frozen=True)
class FigureSpec:
    """Input CSVs, layout and reference-curve selection for one figure."""

    inputs: dict              # role -> csv path
    out_stem: str             # output path without extension
    reference: str = "exp1"   # exp1 | closed_form | geometric | none
    xlabel: str = "z"
    ylabel: str = "density"
    bins: int = 60
    z_max: float = 8.0


def _save(fig, out_stem):
    paths = [f"{out_stem}.png", f"{out_stem}.svg"]
    for p in paths:
        fig.savefig(p, dpi=150)
    plt.close(fig)
    return paths


def _weighted_hist(locs, weights, bins, z_max):
    """Bin representation of a sub-probability measure on [0, z_max].

    Returns (centers, density, widths, plotted_mass) with the invariant
    sum(density * widths) == plotted_mass to float accuracy.
    """
    locs = np.asarray(locs, dtype=float)
    weights = np.asarray(weights, dtype=float)
    finite = np.isfinite(locs) & (locs <= z_max)
    edges = np.linspace(0.0, z_max, bins + 1)
    hist, _ = np.histogram(locs[finite], bins=edges, weights=weights[finite])
    widths = np.diff(edges)
    density = hist / widths
    mass = float(hist.sum())
    integral = float(np.sum(density * widths))
    if abs(integral - mass) > 1e-6:
        raise RuntimeError(
            f"histogram normalization broken: {integral} vs {mass}")
    centers = 0.5 * (edges[:-1] + edges[1:])
    return centers, density, widths, mass


def render_overlay(spec):
    """Panels (one per time): pooled embedded-measure histogram, dual
    ensemble histogram, and the reference density curve."""
    measures = fio.read_measures(spec.inputs["measures"])
    states = fio.read_states(spec.inputs["states"]) if "states" in spec.inputs else {}
    gz, gf = fio.read_curve(spec.inputs["golden"])
    ref.check_golden("exp1 density", gf, ref.exp1_density(gz))

    times = sorted(measures)
    fig, axes = plt.subplots(1, len(times), figsize=(4.2 * len(times), 3.4),
                             sharey=True)
    if len(times) == 1:
        axes = [axes]
    for ax, t in zip(np.atleast_1d(axes), times):
        reps = measures[t]
        locs, wgts = [], []
        for atoms in reps.values():
            for z, w in atoms:
                locs.append(z)
                wgts.append(w / len(reps))
        c, dens, wd, mass = _weighted_hist(locs, wgts, spec.bins, spec.z_max)
        ax.bar(c, dens, width=wd, alpha=0.45, color="tab:blue",
               label=f"particle system ({len(reps)} replicas)")
        if t in states:
            s = np.asarray(states[t], dtype=float)
            sw = np.full(s.size, 1.0 / s.size)
            c2, dens2, wd2, _ = _weighted_hist(s, sw, spec.bins, spec.z_max)
            ax.step(np.concatenate([[0.0], c2 + wd2 / 2]),
                    np.concatenate([[dens2[0]], dens2]),
                    color="0.4", label="jump diffusion")
        if spec.reference == "exp1":
            zs = np.linspace(1e-3, spec.z_max, 400)
            ax.plot(zs, ref.exp1_density(zs), color="tab:green", lw=1.6,
                    label="Exp(1)")
        ax.set_title(f"t = {t:g}")
        ax.set_xlabel(spec.xlabel)
    np.atleast_1d(axes)[0].set_ylabel(spec.ylabel)
    np.atleast_1d(axes)[0].legend(fontsize=7)
    fig.tight_layout()
    return _save(fig, spec.out_stem)


def render_convergence(spec):
    """Log-log battery error against system size with a 1/L guide."""
    rows = fio.read_report(spec.inputs["report"])
    worst = {}
    for L, tid, err in rows:
        worst[L] = max(worst.get(L, 0.0), err)
    Ls = np.array(sorted(worst))
    errs = np.array([worst[L] for L in Ls])
    fig, ax = plt.subplots(figsize=(4.2, 3.4))
    ax.loglog(Ls, errs, "o-", label="battery max error")
    guide = errs[0] * (Ls[0] / Ls)
    ax.loglog(Ls, guide, "--", color="0.6", label="~ 1/L")
    ax.set_xlabel("L")
    ax.set_ylabel("max generator error")
    ax.legend(fontsize=8)
    fig.tight_layout()
    return _save(fig, spec.out_stem)


def render_pmf(spec, gamma=1.0):
    """Exact size-biased pmf bars against the geometric limit."""
    ns, ps = fio.read_pmf(spec.inputs["pmf"])
    if "geometric" in spec.inputs:
        gn, gp = fio.read_pmf(spec.inputs["geometric"])
        ref.check_golden("geometric pmf", gp, ref.geometric_pmf(gn, gamma))
    else:
        gn, gp = ns, list(ref.geometric_pmf(ns, gamma))
    fig, ax = plt.subplots(figsize=(4.2, 3.4))
    ax.bar(np.array(ns) - 0.18, ps, width=0.36, label="exact pmf")
    ax.bar(np.array(gn) + 0.18, gp, width=0.36, label="geometric limit")
    ax.set_xlabel("occupation n")
    ax.set_ylabel("probability")
    ax.set_yscale("log")
    ax.legend(fontsize=8)
    fig.tight_layout()
    return _save(fig, spec.out_stem)


def render_moments(spec, system="MASS", theta=1.0, m0=1.0, alpha0=0.0):
    """Moment trajectories from CSV against the locally computed ODE."""
    series = fio.read_moments(spec.inputs["moments"])
    ts = np.asarray(series["t"])
    fig, ax = plt.subplots(figsize=(4.2, 3.4))
    for col, vals in series.items():
        if col == "t":
            continue
        ax.plot(ts, vals, "o", ms=4, label=f"{col} (csv)")
    dense = np.linspace(ts.min(), max(ts.max(), ts.min() + 1e-9), 200)
    if system == "MASS":
        ax.plot(dense, 1.0 - (1.0 - alpha0) * np.exp(-dense), "-",
                label="ODE solution")
    elif system == "MACRO_MEAN":
        mstar = 1.0 / (1.0 + theta)
        ax.plot(dense, mstar + (m0 - mstar) * np.exp(-2 * (1 + theta) * dense),
                "-", label="ODE solution")
    ax.set_xlabel("t")
    ax.set_ylabel("moment")
    ax.legend(fontsize=8)
    fig.tight_layout()
    return _save(fig, spec.out_stem)
