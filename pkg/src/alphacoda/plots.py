"""Static PNG figures for the report verb (Agg backend, reproducible bytes)."""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

STYLE = {
    "figure.figsize": (8.0, 3.4),
    "figure.dpi": 100,
    "font.size": 9,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "legend.frameon": False,
    "svg.hashsalt": "alphacoda",
}
# strip the matplotlib version so identical data gives identical files
PNG_META = {"Software": None}


def _save(fig, path):
    fig.savefig(path, format="png", metadata=PNG_META)
    plt.close(fig)


def _label(tag):
    return "alpha" if str(tag).startswith("alpha") else str(tag).upper()


def error_panels(df, x, path, title):
    """Two panels (RMSE, MAE) against ``x`` with one line per transform."""
    with plt.rc_context(STYLE):
        fig, axes = plt.subplots(1, 2, sharex=True)
        for tag, grp in df.groupby("transform", sort=True):
            grp = grp.sort_values(x)
            for ax, col in zip(axes, ("rmse", "mae")):
                ax.plot(grp[x], grp[col], marker="o" if x == "horizon" else None, ms=3, lw=1.2,
                        label=_label(tag))
        for ax, col in zip(axes, ("RMSE (%)", "MAE (%)")):
            ax.set_xlabel(x.capitalize())
            ax.set_ylabel(col)
        axes[0].legend()
        fig.suptitle(title)
        fig.tight_layout()
        _save(fig, path)


def dx_panel(ages, observed, forecasts, path, title):
    """Observed d_x (x 100 000) against forecasts for one year."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(5.0, 3.4))
        ax.plot(ages, observed * 1e5, color="k", lw=1.5, label="observed")
        for tag, dx in forecasts:
            ax.plot(ages, dx * 1e5, lw=1.0, ls="--", label=_label(tag))
        ax.set_xlabel("Age")
        ax.set_ylabel("d_x (radix 100 000)")
        ax.set_title(title)
        ax.legend()
        fig.tight_layout()
        _save(fig, path)
