"""Figure rendering for the report paths.

The simulate and integrate commands write a PNG next to their CSV output:
observable averages over time, with shaded ±2 stderr bands for simulation
ensembles.  Rendering is headless (Agg backend).
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

_STYLE = {
    "figure.figsize": (6.4, 4.0),
    "axes.grid": True,
    "grid.alpha": 0.3,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "legend.frameon": False,
    "savefig.dpi": 150,
}


def plot_timeseries(path, grid, series, bands=None, title=None, ylabel="average count"):
    """Render observable trajectories to ``path``.

    ``series`` maps a label to a list of values on ``grid``; ``bands``
    optionally maps the same labels to stderr half-widths.
    """
    with matplotlib.rc_context(_STYLE):
        fig, ax = plt.subplots()
        for label, values in series.items():
            (line,) = ax.plot(grid, values, label=label)
            if bands and label in bands:
                halfwidth = bands[label]
                lo = [v - 2 * h for v, h in zip(values, halfwidth)]
                hi = [v + 2 * h for v, h in zip(values, halfwidth)]
                ax.fill_between(grid, lo, hi, color=line.get_color(), alpha=0.2, linewidth=0)
        ax.set_xlabel("time")
        ax.set_ylabel(ylabel)
        if title:
            ax.set_title(title)
        ax.legend(loc="best")
        fig.tight_layout()
        fig.savefig(path)
        plt.close(fig)
    return path
