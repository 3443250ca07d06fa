"""Figures written next to the CSV outputs. Uses the Agg backend so it works
without a display."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

STYLE = {
    "figure.figsize": (6.4, 4.0),
    "figure.dpi": 100,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "grid.linestyle": "--",
    "axes.spines.top": False,
    "axes.spines.right": False,
    "font.size": 10,
}


def _save(fig, path) -> None:
    fig.tight_layout()
    # fixed metadata keeps the PNG bytes reproducible
    fig.savefig(path, metadata={"Software": None})
    plt.close(fig)


def plot_rltl(hist: dict, path, title: str = "Row-level temporal locality") -> None:
    """Bar chart of the qualifying fraction per window."""
    labels = [f"{w:g}" for w in hist["windows_ms"]]
    fracs = [100.0 * f for f in hist["fractions"]]
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        bars = ax.bar(labels, fracs, color="#4c72b0")
        for b, f in zip(bars, fracs):
            ax.text(b.get_x() + b.get_width() / 2, f + 1, f"{f:.1f}", ha="center",
                    va="bottom", fontsize=8)
        ax.set_ylim(0, 105)
        ax.set_xlabel("window t (ms)")
        ax.set_ylabel("activations within t of prior PRE (%)")
        ax.set_title(f"{title} ({hist['total']} activations)")
        _save(fig, path)


def plot_sweep(results, axis: str, path) -> None:
    """Two panels: hit rate and performance against the swept axis.

    Performance is weighted speedup for multi-core points and IPC otherwise,
    shown relative to the first point of the sweep.
    """
    labels = [str(cid.split("=", 1)[1]) for cid, _, _ in results]
    hit = [rep.hit_rate for _, _, rep in results]
    perf = [rep.weighted_speedup if len(rep.ipc) > 1 and rep.weighted_speedup is not None
            else rep.ipc[0] for _, _, rep in results]
    rel = [p / perf[0] if perf[0] else 0.0 for p in perf]
    xlabel = {"entries": "HCRAC entries", "duration": "caching duration (ms)",
              "advisor": "advisor"}[axis]
    with plt.rc_context(STYLE):
        fig, (a1, a2) = plt.subplots(1, 2, figsize=(9.6, 3.8))
        if axis == "advisor":
            a1.bar(labels, hit, color="#55a868")
            a2.bar(labels, rel, color="#c44e52")
            for a in (a1, a2):
                a.tick_params(axis="x", rotation=30)
        else:
            a1.plot(labels, hit, "o-", color="#55a868")
            a2.plot(labels, rel, "s-", color="#c44e52")
        a1.set_ylim(0, 1.05)
        a1.set_xlabel(xlabel)
        a1.set_ylabel("hit rate")
        a2.set_xlabel(xlabel)
        a2.set_ylabel(f"performance vs {labels[0]}")
        a2.axhline(1.0, color="grey", linewidth=0.8)
        _save(fig, path)
