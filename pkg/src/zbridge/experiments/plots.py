"""Static figures.  Every entry point goes through ``render`` so a plotting
problem is logged and swallowed; the CSVs are the authoritative output."""

from __future__ import annotations

import logging

import numpy as np

log = logging.getLogger(__name__)

__all__ = ["render"]


def _plt():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def render(fn, path, *args, **kwargs):
    """Call ``fn(plt, path, ...)``; return ``path`` on success and ``None`` on any failure."""
    try:
        plt = _plt()
        fig = fn(plt, *args, **kwargs)
        fig.savefig(path, dpi=110, bbox_inches="tight", metadata={"Software": None})
        plt.close(fig)
        return str(path)
    except Exception as exc:  # noqa: BLE001 - plots must never fail a scenario
        log.warning("plot %s skipped: %s", path, exc)
        return None


def z_curve(plt, s, z, estimates):
    """``estimates``: rows ``(N, s_m, mean, se)``."""
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(s, z, "k-", lw=1.5, label="quadrature")
    for N in sorted({r[0] for r in estimates}):
        rows = [r for r in estimates if r[0] == N]
        ax.errorbar([r[1] for r in rows], [r[2] for r in rows], yerr=[2 * r[3] for r in rows], fmt="o",
                    ms=3, capsize=2, label=f"schedule, N={N}")
    ax.set_xlabel("s")
    ax.set_ylabel("Z(s)")
    ax.legend()
    return fig


def error_surface(plt, M_list, N_list, mae, predicted_sd):
    M, N = np.meshgrid(np.asarray(M_list, float), np.asarray(N_list, float), indexing="ij")
    fig, axes = plt.subplots(1, 2, figsize=(10, 4), sharey=True)
    for ax, val, title in zip(axes, (mae, predicted_sd), ("empirical mean |Z1_bar - Z1|", "predicted sd(log Z1_bar)")):
        with np.errstate(divide="ignore", invalid="ignore"):
            lv = np.log10(np.where(val > 0, val, np.nan))
        if np.all(np.isfinite(lv)) and min(lv.shape) > 1:
            cs = ax.contourf(M, N, lv, levels=12, cmap="viridis")
            fig.colorbar(cs, ax=ax, label="log10")
        else:
            ax.scatter(M.ravel(), N.ravel(), c=lv.ravel(), cmap="viridis")
        m_fine = np.linspace(M.min(), M.max(), 100)
        for cost in sorted({float(m * n) for m in M_list for n in N_list}):
            ax.plot(m_fine, cost / m_fine, "w--", lw=0.6)
        ax.set_xscale("log")
        ax.set_yscale("log")
        ax.set_xlim(M.min(), M.max())
        ax.set_ylim(N.min(), N.max())
        ax.set_xlabel("M")
        ax.set_title(title, fontsize=9)
    axes[0].set_ylabel("N")
    return fig


def psi_curves(plt, x, curves):
    """``curves``: mapping ``label -> list of psi arrays``, one per stage."""
    fig, axes = plt.subplots(1, len(curves), figsize=(5 * len(curves), 3.5), squeeze=False)
    for ax, (label, arrs) in zip(axes[0], curves.items()):
        for m, a in enumerate(arrs):
            ax.plot(x, a, lw=1, label=f"m={m}")
        ax.set_title(label, fontsize=9)
        ax.set_xlabel("x")
        ax.set_ylim(-0.02, 1.02)
    axes[0][0].set_ylabel("survival probability")
    axes[0][-1].legend(fontsize=7)
    return fig


def survival(plt, traj):
    """``traj``: mapping ``label -> (s_m, mean fraction)``."""
    fig, ax = plt.subplots(figsize=(6, 4))
    for label, (s, frac) in traj.items():
        ax.plot(s, frac, "o-", ms=3, label=label)
    ax.set_xlabel("s")
    ax.set_ylabel("N_m / N_0")
    ax.legend(fontsize=8)
    return fig


def boxplots(plt, panels):
    """``panels``: list of ``(title, s_m, samples per stage, oracle per stage)``."""
    fig, axes = plt.subplots(1, len(panels), figsize=(5 * len(panels), 4), squeeze=False)
    for ax, (title, s, data, oracle) in zip(axes[0], panels):
        width = 0.6 * float(np.min(np.diff(s))) if len(s) > 1 else 0.1
        ax.boxplot(data, positions=s, widths=width, manage_ticks=False)
        ax.plot(s, oracle, "r*", ms=7, label="quadrature")
        ax.set_title(title, fontsize=9)
        ax.set_xlabel("s")
    axes[0][0].set_ylabel("Z_s estimate")
    axes[0][0].legend(fontsize=8)
    return fig


def filter_raster(plt, times, xgrid, dens, truth, particles, collapse_times=()):
    fig, ax = plt.subplots(figsize=(9, 4))
    ax.pcolormesh(times, xgrid, dens.T, shading="nearest", cmap="magma")
    ax.plot(times, truth, "o", mfc="none", mec="c", ms=4, label="truth")
    for t, p in zip(times, particles):
        ax.plot(np.full(len(p), t), p, "w.", ms=1.5)
    for t in collapse_times:
        ax.axvline(t, color="r", lw=0.8)
    ax.set_xlabel("time")
    ax.set_ylabel("x")
    ax.legend(fontsize=8)
    return fig


def tracks(plt, panels):
    """``panels``: list of ``(title, times, truth, [(label, mean, std, collapse_mask)])``."""
    fig, axes = plt.subplots(len(panels), 1, figsize=(9, 3.2 * len(panels)), squeeze=False)
    for ax, (title, times, truth, series) in zip(axes[:, 0], panels):
        ax.plot(times, truth, "k.", ms=4, label="truth")
        for label, mean, std, coll in series:
            line, = ax.plot(times, mean, lw=1.2, label=label)
            ax.fill_between(times, mean - std, mean + std, color=line.get_color(), alpha=0.2)
            if np.any(coll):
                ax.plot(np.asarray(times)[coll], np.asarray(mean)[coll], "x", color=line.get_color(), ms=6)
        ax.set_title(title, fontsize=9)
        ax.legend(fontsize=7)
    axes[-1, 0].set_xlabel("time")
    return fig


def z_ratio(plt, series):
    """``series``: mapping ``label -> (times, ratio)``."""
    fig, ax = plt.subplots(figsize=(8, 3))
    for label, (t, r) in series.items():
        ax.plot(t, r, "o-", ms=3, label=label)
    ax.axhline(1.0, color="k", lw=0.8)
    ax.set_xlabel("time")
    ax.set_ylabel("Z_bar / Z_quadrature")
    ax.legend(fontsize=8)
    return fig
