"""Command-line interface.

Exit codes: 0 success, 2 configuration error, 3 I/O error,
4 verification failure.
"""

from __future__ import annotations

import logging
import os
import sys

import click

from . import extsort, oracle, pipeline, siteio

logger = logging.getLogger("sweepdt")


def _fail(code: int, message: str):
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


@click.group()
@click.option("-v", "--verbose", is_flag=True, help="enable debug logging")
def main(verbose: bool):
    """Out-of-core 3D Delaunay tessellation and Voronoi volumes."""
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s")


@main.command()
@click.argument("input_path", type=click.Path())
@click.option("--out-dir", "-o", required=True, type=click.Path())
@click.option("--format", "input_format", default="auto",
              type=click.Choice(["auto", "binary", "csv"]))
@click.option("--budget-mb", default=256, show_default=True,
              help="memory budget for the sort stage (MiB)")
@click.option("--trim", "trim_fraction", default=0.04, show_default=True,
              help="fraction of the sweep-coordinate tails to drop")
@click.option("--grid-resolution", default=None, type=int,
              help="override the (y,z) locator grid resolution")
@click.option("--cadence", default=1024, show_default=True,
              help="insertions between eviction passes")
@click.option("--offlining", default="improved", show_default=True,
              type=click.Choice(["improved", "naive", "off"]))
@click.option("--volume-workers", default=1, show_default=True)
@click.option("--pca/--no-pca", "use_pca", default=True, show_default=True)
@click.option("--stats-interval", default=1024, show_default=True)
@click.option("--text-output", is_flag=True, help="write CSV instead of binary outputs")
@click.option("--keep-spill", is_flag=True, help="write the offlined-tetrahedron audit file")
@click.option("--sort-outputs-by-id", is_flag=True,
              help="reorder output files by site id (diff-friendly)")
@click.option("--figure/--no-figure", "render_figure", default=True, show_default=True)
def run(input_path, out_dir, input_format, budget_mb, trim_fraction,
        grid_resolution, cadence, offlining, volume_workers, use_pca,
        stats_interval, text_output, keep_spill, sort_outputs_by_id,
        render_figure):
    """Tessellate a site table and emit edges, volumes, and stats."""
    cfg = pipeline.RunConfig(
        input_path=input_path,
        out_dir=out_dir,
        input_format=input_format,
        budget_bytes=budget_mb << 20,
        trim_fraction=trim_fraction,
        grid_resolution=grid_resolution,
        cadence=cadence,
        offlining=offlining,
        volume_workers=volume_workers,
        use_pca=use_pca,
        stats_interval=stats_interval,
        text_output=text_output,
        keep_spill=keep_spill,
        sort_outputs_by_id=sort_outputs_by_id,
        render_figure=render_figure,
    )
    try:
        cfg.validate()
    except pipeline.ConfigError as exc:
        _fail(2, str(exc))
    try:
        report = pipeline.run_pipeline(cfg)
    except pipeline.ConfigError as exc:
        _fail(2, str(exc))
    except (pipeline.StageError, OSError, siteio.SiteFileError) as exc:
        _fail(3, str(exc))
    click.echo(report.to_json(), nl=False)


@main.command()
@click.option("--kind", default="box", show_default=True,
              type=click.Choice(["box", "shell", "lattice"]))
@click.option("--out", "-o", required=True, type=click.Path())
@click.option("--dx", default=1.0, show_default=True)
@click.option("--dy", default=1.0, show_default=True)
@click.option("--dz", default=1.0, show_default=True)
@click.option("--density", default=1e5, show_default=True)
@click.option("--n", default=100000, show_default=True, help="site count (shell)")
@click.option("--k", default=9, show_default=True, help="lattice points per axis")
@click.option("--jitter", default=1e-6, show_default=True)
@click.option("--seed", default=0, show_default=True)
def generate(kind, out, dx, dy, dz, density, n, k, jitter, seed):
    """Write a synthetic binary site table."""
    try:
        if kind == "box":
            recs = oracle.generate_box(
                oracle.SyntheticBoxSpec(dx=dx, dy=dy, dz=dz, density=density,
                                        seed=seed))
        elif kind == "shell":
            recs = oracle.generate_shell(n, seed=seed)
        else:
            recs = oracle.jittered_lattice(k, jitter=jitter, seed=seed)
        siteio.write_sites(out, recs)
    except OSError as exc:
        _fail(3, str(exc))
    click.echo(f"wrote {len(recs)} sites to {out}")


@main.command()
@click.option("--n", default=200, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--out", type=click.Path(), default=None,
              help="also write the verification report as JSON")
def verify(n, seed, out):
    """Cross-validate a kernel run against the brute-force oracles."""
    try:
        rep = pipeline.verify(n, seed=seed)
    except oracle.SizeLimitError as exc:
        _fail(2, str(exc))
    click.echo(rep.to_json(), nl=False)
    if out:
        with open(out, "w") as fh:
            fh.write(rep.to_json())
    if not rep.passed:
        sys.exit(4)


@main.command("bench-deltax")
@click.option("--out-dir", "-o", required=True, type=click.Path())
@click.option("--density", default=1e5, show_default=True)
@click.option("--deltas", default="2,4,8", show_default=True)
@click.option("--mode-dx", default=8.0, show_default=True)
@click.option("--mode-n", default=1_000_000, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--figure/--no-figure", "render_figure", default=True, show_default=True)
def bench_deltax(out_dir, density, deltas, mode_dx, mode_n, seed, render_figure):
    """Measure peak memory across box lengths and offlining modes."""
    try:
        dxs = tuple(float(d) for d in deltas.split(","))
    except ValueError:
        _fail(2, f"bad --deltas list: {deltas!r}")
    result = pipeline.bench_deltax(out_dir, deltas=dxs, density=density,
                                   mode_dx=mode_dx, mode_n=mode_n, seed=seed,
                                   render_figure=render_figure)
    for dx, vals in sorted(result["deltas"].items()):
        click.echo(f"dx={dx}: peak_online={vals['peak_online']} "
                   f"created={vals['total_created']}")
    click.echo(f"improved peak={result['improved_peak']} "
               f"naive peak={result['naive_peak']} "
               f"ratio={result['improved_vs_naive_ratio']:.3f}")


@main.command("stats-plot")
@click.argument("stats_csv", type=click.Path())
@click.option("--out", "-o", default=None, type=click.Path(),
              help="figure path (default: alongside the CSV)")
@click.option("--csv-out", default=None, type=click.Path(),
              help="normalized copy of the timeline CSV")
def stats_plot(stats_csv, out, csv_out):
    """Render the sweep timeline figure from a stats CSV."""
    from . import plotting
    if not os.path.exists(stats_csv):
        _fail(3, f"no such file: {stats_csv}")
    png = out or os.path.splitext(stats_csv)[0] + ".png"
    try:
        rows = plotting._read_stats_csv(stats_csv)
        if csv_out:
            with open(csv_out, "w") as fh:
                fh.write(",".join(pipeline._StatsLog.COLUMNS) + "\n")
                for ins, sx, online, evicted, resident in rows:
                    fh.write(f"{ins},{sx!r},{online},{evicted},{resident}\n")
        plotting.render_stats_figure(stats_csv, png)
    except OSError as exc:
        _fail(3, str(exc))
    click.echo(f"wrote {png}")


@main.command("sort")
@click.argument("input_path", type=click.Path())
@click.argument("output_path", type=click.Path())
@click.option("--budget-mb", default=256, show_default=True)
@click.option("--scratch-dir", default=None, type=click.Path())
def sort_cmd(input_path, output_path, budget_mb, scratch_dir):
    """Externally sort a site table by sweep coordinate."""
    if budget_mb < 64:
        _fail(2, "memory budget must be at least 64 MiB")
    scratch = scratch_dir or (os.path.dirname(os.path.abspath(output_path)) or ".")
    try:
        rep = extsort.external_sort(input_path, budget_mb << 20, scratch, output_path)
    except (OSError, ValueError, siteio.SiteFileError) as exc:
        _fail(3, str(exc))
    click.echo(f"sorted {rep.records} records in {rep.runs} runs "
               f"(accounted peak {rep.peak_accounted_bytes / (1 << 20):.1f} MiB)")


if __name__ == "__main__":
    main()
