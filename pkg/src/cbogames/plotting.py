"""Matplotlib figures written next to the CSV output of each experiment."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

__all__ = ["render_report", "STYLE"]

STYLE = {
    "figure.figsize": (5.5, 3.6),
    "font.size": 9,
    "axes.labelsize": 9,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "savefig.dpi": 150,
}


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return path


def _loglog_with_fit(ax, x, y, err, fit, label):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    ax.errorbar(x, y, yerr=err, fmt="o", ms=4, capsize=2, label=label)
    if fit is not None:
        xs = np.geomspace(x.min(), x.max(), 50)
        ax.plot(xs, np.exp(fit.intercept) * xs ** fit.slope, "--",
                label=f"fit slope {fit.slope:.3f}")
        ref = y[0] * (xs / x[0]) ** -0.5
        ax.plot(xs, ref, ":", color="gray", label="slope -1/2")
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.legend()


def plot_variance(report, path):
    t = np.asarray(report.series["time"])
    v = np.asarray(report.series["V"])
    fig, ax = plt.subplots()
    for m in range(v.shape[1] - 1):
        ax.semilogy(t, v[:, m], lw=0.8, label=f"V_{m + 1}")
    ax.semilogy(t, v[:, -1], "k", lw=1.4, label="V")
    prm = report.config["params"]
    rate = (2 * prm["lam"] - prm["sigma"] ** 2) / 2
    ax.semilogy(t, v[0, -1] * np.exp(-rate * t), "r--", lw=1, label=f"V(0) exp(-{rate:g} t)")
    ax.set_xlabel("t")
    ax.set_ylabel("variance")
    ax.legend()
    return _save(fig, path)


def plot_mf_rate(report, path):
    fig, ax = plt.subplots()
    _loglog_with_fit(ax, report.series["N"], report.series["gap"], report.series["gap_stderr"],
                     report.fits.get("gap"), "coupling gap")
    ax.set_xlabel("N")
    ax.set_ylabel("gap")
    return _save(fig, path)


def plot_iid(report, path):
    fig, ax = plt.subplots()
    _loglog_with_fit(ax, report.series["N"], report.series["err"], report.series["err_stderr"],
                     report.fits.get("err"), "weighted-mean error")
    ax.set_xlabel("N")
    ax.set_ylabel("error")
    return _save(fig, path)


def plot_stability(report, path):
    r = np.asarray(report.series["ratio"], dtype=float)
    fig, ax = plt.subplots()
    ax.plot(np.arange(r.size), r, ".", ms=2, alpha=0.6)
    ax.plot(np.arange(r.size), np.maximum.accumulate(r), "k-", lw=1, label="running max")
    ax.set_xlabel("trial")
    ax.set_ylabel("consensus difference / sum of W_p")
    ax.legend()
    return _save(fig, path)


def plot_moments(report, path):
    rows = np.asarray(report.series["rows"], dtype=float)
    fig, ax = plt.subplots()
    ax.bar([f"{x:g}" for x in rows[:, 0]], rows[:, 1])
    ax.set_xlabel("xi")
    ax.set_ylabel("kappa_hat")
    return _save(fig, path)


def plot_consensus(report, path):
    t = np.asarray(report.series["time"])
    c = np.asarray(report.series["consensus"])
    fig, ax = plt.subplots()
    for m in range(c.shape[1]):
        ax.plot(t, np.linalg.norm(c[:, m], axis=-1), label=f"|consensus {m + 1}|")
    ax.set_xlabel("t")
    ax.set_yscale("log")
    ax.legend()
    return _save(fig, path)


_PLOTS = {
    "variance-decay": ("v_trace.png", plot_variance),
    "mf-rate": ("mf_rate.png", plot_mf_rate),
    "iid-consensus": ("iid.png", plot_iid),
    "stability-probe": ("stability.png", plot_stability),
    "moment-monitor": ("moments.png", plot_moments),
    "simulate": ("consensus.png", plot_consensus),
}


def render_report(report, directory) -> list:
    """Render the figures for ``report`` into ``directory``; returns written paths."""
    if report.name not in _PLOTS:
        return []
    fname, fn = _PLOTS[report.name]
    with plt.rc_context(STYLE):
        return [fn(report, Path(directory) / fname)]
