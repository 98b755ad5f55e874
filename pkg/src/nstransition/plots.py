"""Static SVG figures for sweep and regime reports."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .leray_diagnostics import Regime  # noqa: E402

# Fixed id salt and text-as-text keep SVG output byte-stable and greppable.
_RC = {
    "svg.hashsalt": "nstransition",
    "svg.fonttype": "none",
    "font.size": 10,
    "axes.linewidth": 0.8,
    "lines.linewidth": 1.2,
}

_REGIME_COLORS = {
    Regime.LAMINAR: "#4c72b0",
    Regime.CRITICAL_EQUILIBRIUM: "#55a868",
    Regime.SINGULARITY_ONSET: "#c44e52",
    Regime.TRANSITION_INSTANT: "#dd8452",
    Regime.FULLY_TURBULENT: "#8172b3",
}


def _save(fig, path, timestamp):
    metadata = {"Creator": "nstransition"}
    if not timestamp:
        metadata["Date"] = None
    fig.savefig(path, format="svg", metadata=metadata)
    plt.close(fig)


def slope_label(slope):
    return f"slope = {slope:+.2f}".replace("-", "−")


def sweep_figure(points, fit, path, fit_against="re", timestamp=True):
    """Log-log scatter of the sweep with the fitted power law overlaid.

    ``points`` are the ``(x, y)`` pairs that were fitted; ``fit`` may be None
    when too few runs succeeded.
    """
    xlabel, ylabel = (("Re", r"$\tau_{trans} = t_{trans}/t_c$") if fit_against == "re"
                      else (r"$t_\nu = L^2/\nu$", r"$t_{trans}$"))
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(5.0, 3.8))
        if points:
            x, y = np.array(points, dtype=float).T
            ax.loglog(x, y, "o", color="k", ms=5, label="runs")
            if fit is not None:
                xs = np.geomspace(x.min(), x.max(), 50)
                ax.loglog(xs, fit.prefactor_k1 * xs**fit.exponent, "-", color="#c44e52",
                          label=f"fit, $R^2$ = {fit.r_squared:.4f}")
                ax.text(0.05, 0.08, slope_label(fit.exponent), transform=ax.transAxes, gid="slope")
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        if points:
            ax.legend(frameon=False, loc="best")
        fig.tight_layout()
        _save(fig, path, timestamp)


def regime_strip_chart(records, path, timestamp=True):
    """Indicator trace above a coloured strip of regime labels."""
    t = np.array([r.time for r in records])
    ind = np.array([r.singularity_indicator for r in records])
    with plt.rc_context(_RC):
        fig, (ax, strip) = plt.subplots(
            2, 1, sharex=True, figsize=(6.0, 3.6), gridspec_kw={"height_ratios": [3, 1]})
        ax.plot(t, ind, "-", color="k")
        ax.set_ylabel("relative H1 norm")
        ax.set_ylim(0, 1.05)
        edges = np.empty(len(t) + 1)
        if len(t) > 1:
            mid = 0.5 * (t[1:] + t[:-1])
            edges[1:-1] = mid
            edges[0] = t[0] - (mid[0] - t[0])
            edges[-1] = t[-1] + (t[-1] - mid[-1])
        else:
            edges[:] = (t[0] - 0.5, t[0] + 0.5)
        for k, rec in enumerate(records):
            strip.axvspan(edges[k], edges[k + 1], color=_REGIME_COLORS[rec.regime_label], lw=0)
        strip.set_yticks([])
        strip.set_xlabel("time")
        handles = [plt.Rectangle((0, 0), 1, 1, color=c) for c in _REGIME_COLORS.values()]
        fig.legend(handles, [r.value for r in _REGIME_COLORS], loc="upper center", ncol=3,
                   frameon=False, fontsize=8)
        fig.tight_layout(rect=(0, 0, 1, 0.86))
        _save(fig, path, timestamp)
