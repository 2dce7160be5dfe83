"""Figure rendering for run reports and benchmarks (headless matplotlib)."""

from __future__ import annotations

import csv

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

_STYLE = {
    "figure.figsize": (8.0, 5.0),
    "figure.dpi": 110,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "axes.labelsize": 10,
    "font.size": 10,
    "legend.fontsize": 9,
}


def _read_stats_csv(path):
    rows = []
    with open(path) as fh:
        for rec in csv.DictReader(fh):
            rows.append((int(rec["sites_inserted"]), float(rec["sweep_x"]),
                         int(rec["online_tetrahedra"]), int(rec["evicted_total"]),
                         int(rec["resident_bytes"])))
    return rows


def render_stats_figure(stats_csv, png_path) -> None:
    """Online-tetrahedron timeline and resident-memory curve of a run."""
    rows = _read_stats_csv(stats_csv)
    with plt.rc_context(_STYLE):
        fig, (ax1, ax2) = plt.subplots(2, 1, sharex=True)
        if rows:
            ins = [r[0] for r in rows]
            online = [r[2] for r in rows]
            evicted = [r[3] for r in rows]
            resident = [r[4] / (1 << 20) for r in rows]
            ax1.plot(ins, online, lw=1.2, color="tab:blue", label="online tetrahedra")
            ax1.plot(ins, evicted, lw=1.0, color="tab:gray", ls="--",
                     label="evicted (cumulative)")
            ax1.legend(loc="upper left")
            ax2.plot(ins, resident, lw=1.2, color="tab:red")
        ax1.set_ylabel("tetrahedra")
        ax2.set_ylabel("resident [MiB]")
        ax2.set_xlabel("sites inserted")
        fig.suptitle("sweep timeline")
        fig.tight_layout()
        fig.savefig(png_path)
        plt.close(fig)


def render_bench_figure(rows, png_path) -> None:
    """Peak online counts across box lengths and offlining modes."""
    with plt.rc_context(_STYLE):
        fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9.0, 4.0))
        imp = [r for r in rows if r.offlining == "improved"]
        dxs = sorted({r.dx for r in imp})
        base = [r for r in imp if r.dx in dxs]
        ax1.plot([r.dx for r in base], [r.peak_online for r in base],
                 "o-", color="tab:blue", label="peak online")
        ax1.plot([r.dx for r in base], [r.total_created for r in base],
                 "s--", color="tab:gray", label="total created")
        ax1.set_xlabel("box length")
        ax1.set_ylabel("tetrahedra")
        ax1.set_yscale("log")
        ax1.legend()
        modes = {}
        for r in rows:
            modes.setdefault(r.offlining, r)
        names = list(modes)
        ax2.bar(names, [modes[m].peak_online for m in names],
                color=["tab:blue" if m == "improved" else "tab:orange" for m in names])
        ax2.set_ylabel("peak online tetrahedra")
        fig.suptitle("offlining benchmarks")
        fig.tight_layout()
        fig.savefig(png_path)
        plt.close(fig)
