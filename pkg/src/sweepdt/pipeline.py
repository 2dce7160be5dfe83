"""End-to-end runs: ingest, transform/trim, external sort, sweep, outputs.

Stages stream into each other through files under a scratch directory;
the sweep stage is the single mutator of the frontier, edge extraction
happens inline in finalization order, and cell volumes can fan out to a
worker pool whose results are written back in submission order, so the
output bytes do not depend on the worker count.
"""

from __future__ import annotations

import json
import logging
import math
import os
import time
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, asdict
from typing import Optional

import numpy as np

from . import dual, extsort, oracle, pca, siteio
from .kernel import Frontier, GHOST_COUNT
from .pca import BoundingBox

logger = logging.getLogger(__name__)

MIN_BUDGET = 64 << 20


class ConfigError(ValueError):
    pass


class StageError(RuntimeError):
    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage
        self.cause = cause


@dataclass
class RunConfig:
    input_path: str
    out_dir: str
    input_format: str = "auto"           # binary | csv | auto (by extension)
    budget_bytes: int = 256 << 20
    trim_fraction: float = 0.04
    grid_resolution: Optional[int] = None
    cadence: int = 1024
    offlining: str = "improved"          # improved | naive | off
    volume_workers: int = 1
    use_pca: bool = True
    stats_interval: int = 1024
    text_output: bool = False
    keep_spill: bool = False
    sort_outputs_by_id: bool = False
    render_figure: bool = True
    seed: int = 0
    exact_quantile_cap: int = 4_000_000

    def validate(self) -> None:
        if self.budget_bytes < MIN_BUDGET:
            raise ConfigError("memory budget must be at least 64 MiB")
        if not 0.0 <= self.trim_fraction < 0.5:
            raise ConfigError("trim fraction must be in [0, 0.5)")
        if self.cadence < 1:
            raise ConfigError("eviction cadence must be >= 1")
        if self.stats_interval < 1:
            raise ConfigError("stats interval must be >= 1")
        if self.offlining not in ("improved", "naive", "off"):
            raise ConfigError(f"unknown offlining mode {self.offlining!r}")
        if self.volume_workers < 1:
            raise ConfigError("volume worker count must be >= 1")
        if self.input_format not in ("auto", "binary", "csv"):
            raise ConfigError(f"unknown input format {self.input_format!r}")


@dataclass
class RunReport:
    sites_read: int = 0
    sites_trimmed: int = 0
    duplicates: int = 0
    inserted: int = 0
    tets_created: int = 0
    tets_evicted: int = 0
    ghost_tets_created: int = 0
    edges_emitted: int = 0
    volumes_emitted: int = 0
    bounded_cells: int = 0
    hull_cells: int = 0
    peak_online_tets: int = 0
    peak_resident_bytes: int = 0
    sort_runs: int = 0
    sort_peak_bytes: int = 0
    average_degree: float = 0.0
    stage_seconds: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True) + "\n"


class _StatsLog:
    """Timeline of frontier samples, written as CSV."""

    COLUMNS = ("sites_inserted", "sweep_x", "online_tetrahedra",
               "evicted_total", "resident_bytes")

    def __init__(self):
        self.rows: list[tuple] = []

    def sample(self, frontier: Frontier) -> None:
        self.rows.append((frontier.inserted, frontier.sweep_x,
                          frontier.online_real, frontier.evicted_real,
                          frontier.resident_bytes()))

    def write(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(",".join(self.COLUMNS) + "\n")
            for ins, sx, online, evicted, resident in self.rows:
                fh.write(f"{ins},{sx!r},{online},{evicted},{resident}\n")


class _VolumeStage:
    """Cell-volume computation with optional workers.

    Results are written strictly in submission (finalization) order, so
    any worker count produces identical bytes.
    """

    def __init__(self, writer: dual.VolumeWriter, workers: int):
        self.writer = writer
        self.workers = workers
        self.bounded = 0
        self.hull = 0
        if workers > 1:
            self.pool = ThreadPoolExecutor(max_workers=workers)
            self.window: deque = deque()
            self.window_cap = workers * 8
        else:
            self.pool = None

    def submit(self, site) -> None:
        if self.pool is None:
            self._write(site.site_id, dual.cell_volume(site))
        else:
            self.window.append((site.site_id, self.pool.submit(dual.cell_volume, site)))
            while len(self.window) >= self.window_cap:
                sid, fut = self.window.popleft()
                self._write(sid, fut.result())

    def _write(self, site_id: int, volume: float) -> None:
        if volume == dual.UNBOUNDED_VOLUME:
            self.hull += 1
        else:
            self.bounded += 1
        self.writer.write(site_id, volume)

    def close(self) -> None:
        if self.pool is not None:
            while self.window:
                sid, fut = self.window.popleft()
                self._write(sid, fut.result())
            self.pool.shutdown()


def _resolve_format(cfg: RunConfig) -> str:
    if cfg.input_format != "auto":
        return cfg.input_format
    return "csv" if str(cfg.input_path).lower().endswith(".csv") else "binary"


def _transform_chunk(chunk: np.ndarray, centroid, rot: pca.Rotation3) -> np.ndarray:
    out = chunk.copy()
    xyz = np.column_stack([chunk["x"], chunk["y"], chunk["z"]])
    xyz = (xyz - np.asarray(centroid)) @ rot.matrix().T
    out["x"] = xyz[:, 0]
    out["y"] = xyz[:, 1]
    out["z"] = xyz[:, 2]
    return out


def run_pipeline(cfg: RunConfig) -> RunReport:
    """Execute the full pipeline; returns the run report.

    Writes edges, volumes, the stats timeline, the transform header and
    report.json into cfg.out_dir (plus a rendered stats figure unless
    disabled).
    """
    cfg.validate()
    report = RunReport()
    times: dict[str, float] = {}
    os.makedirs(cfg.out_dir, exist_ok=True)
    scratch = os.path.join(cfg.out_dir, "scratch")
    os.makedirs(scratch, exist_ok=True)
    chunk_records = max(1, (4 << 20) // siteio.RECORD_SIZE)
    # present while outputs are partial; removed on success
    marker = os.path.join(cfg.out_dir, "_INCOMPLETE")
    open(marker, "w").close()

    # -- ingest ---------------------------------------------------------------
    t0 = time.perf_counter()
    stage = "ingest"
    try:
        fmt = _resolve_format(cfg)
        if fmt == "csv":
            binary_input = os.path.join(scratch, "input.bin")
            siteio.csv_to_binary(cfg.input_path, binary_input)
        else:
            binary_input = cfg.input_path
        report.sites_read = siteio.count_records(binary_input)

        if cfg.use_pca and report.sites_read >= 4:
            acc = pca.MomentAccumulator()
            for chunk in siteio.iter_chunks(binary_input, chunk_records):
                acc.add(np.column_stack([chunk["x"], chunk["y"], chunk["z"]]))
            mean, cov = acc.covariance()
            if np.any(np.abs(cov) > 0):
                evals, evecs = np.linalg.eigh(cov)
                order = np.argsort(evals)[::-1]
                axes = evecs[:, order].T.copy()
                for i in (0, 1):
                    k = int(np.argmax(np.abs(axes[i])))
                    if axes[i][k] < 0:
                        axes[i] = -axes[i]
                axes[2] = np.cross(axes[0], axes[1])
                rot = pca.Rotation3((tuple(axes[0]), tuple(axes[1]), tuple(axes[2])))
                centroid = tuple(mean.tolist())
            else:
                rot, centroid = pca.IDENTITY_ROTATION, (0.0, 0.0, 0.0)
        else:
            rot, centroid = pca.IDENTITY_ROTATION, (0.0, 0.0, 0.0)
    except (OSError, ValueError) as exc:
        raise StageError(stage, exc) from exc
    times["ingest"] = time.perf_counter() - t0

    # -- transform + trim -------------------------------------------------------
    t0 = time.perf_counter()
    stage = "transform"
    try:
        transformed = os.path.join(scratch, "transformed.bin")
        coords: list[np.ndarray] = []
        rng = np.random.default_rng(cfg.seed ^ 0x5EED)
        cap = cfg.exact_quantile_cap
        reservoir = np.empty(0)
        seen = 0
        exact_ok = report.sites_read <= cap
        with open(transformed, "wb") as out:
            for chunk in siteio.iter_chunks(binary_input, chunk_records):
                tchunk = _transform_chunk(chunk, centroid, rot)
                tchunk.tofile(out)
                if exact_ok:
                    coords.append(tchunk["x"].copy())
                else:
                    # reservoir sample for the streaming quantile estimate
                    xs = tchunk["x"]
                    fill = min(cap - len(reservoir), len(xs))
                    if fill > 0:
                        reservoir = np.concatenate([reservoir, xs[:fill]])
                        xs = xs[fill:]
                    if len(xs):
                        pos = seen + fill + np.arange(len(xs))
                        take = rng.random(len(xs)) < cap / (pos + 1)
                        repl = rng.integers(0, cap, size=int(take.sum()))
                        reservoir[repl] = xs[take]
                seen += len(chunk)
        if report.sites_read == 0:
            trim_lo, trim_hi = 0.0, 0.0
        elif exact_ok:
            trim_lo, trim_hi = pca.trim_interval(np.concatenate(coords),
                                                 cfg.trim_fraction)
        else:
            trim_lo, trim_hi = pca.trim_interval(reservoir, cfg.trim_fraction)
        del coords

        header = pca.TransformHeader(centroid, rot, trim_lo, trim_hi,
                                     cfg.trim_fraction)
        pca.write_header(os.path.join(cfg.out_dir, "transform.json"), header)

        kept_path = os.path.join(scratch, "kept.bin")
        lo = np.array([math.inf] * 3)
        hi = np.array([-math.inf] * 3)
        kept = 0
        with open(kept_path, "wb") as out:
            for chunk in siteio.iter_chunks(transformed, chunk_records):
                mask = (chunk["x"] >= trim_lo) & (chunk["x"] <= trim_hi)
                sel = chunk[mask]
                if sel.size:
                    sel.tofile(out)
                    kept += sel.size
                    for i, col in enumerate(("x", "y", "z")):
                        lo[i] = min(lo[i], sel[col].min())
                        hi[i] = max(hi[i], sel[col].max())
        report.sites_trimmed = report.sites_read - kept
        os.remove(transformed)
    except (OSError, ValueError) as exc:
        raise StageError(stage, exc) from exc
    times["transform"] = time.perf_counter() - t0

    # -- external sort ----------------------------------------------------------
    t0 = time.perf_counter()
    stage = "sort"
    try:
        sorted_path = os.path.join(scratch, "sorted.bin")
        sort_report = extsort.external_sort(kept_path, cfg.budget_bytes,
                                            scratch, sorted_path)
        report.sort_runs = sort_report.runs
        report.sort_peak_bytes = sort_report.peak_accounted_bytes
        os.remove(kept_path)
    except (OSError, ValueError) as exc:
        raise StageError(stage, exc) from exc
    times["sort"] = time.perf_counter() - t0

    # -- sweep + dual outputs ----------------------------------------------------
    t0 = time.perf_counter()
    stage = "sweep"
    ext = "csv" if cfg.text_output else "bin"
    edge_writer = dual.EdgeWriter(os.path.join(cfg.out_dir, f"edges.{ext}"),
                                  text=cfg.text_output)
    volume_writer = dual.VolumeWriter(os.path.join(cfg.out_dir, f"volumes.{ext}"),
                                      text=cfg.text_output)
    spill_fh = None
    stats = _StatsLog()
    try:
        if kept == 0:
            box = BoundingBox((0.0, 0.0, 0.0), (1.0, 1.0, 1.0))
        else:
            box = BoundingBox(tuple(lo.tolist()), tuple(hi.tolist()))
        expected_online = int(round(max(kept, 1) ** (2.0 / 3.0)))
        vol_stage = _VolumeStage(volume_writer, cfg.volume_workers)
        finalized_idx: set[int] = set()
        degree_sum = 0

        if cfg.keep_spill:
            spill_fh = open(os.path.join(cfg.out_dir, "offlined.bin"), "wb")

            def tet_sink(ids, center):
                rec = np.zeros(1, dtype=np.dtype([("v", "<u4", 4), ("c", "<f8", 3)]))
                rec["v"][0] = ids
                rec["c"][0] = center
                rec.tofile(spill_fh)
        else:
            tet_sink = None

        def site_sink(site):
            nonlocal degree_sum
            edges = dual.extract_edges(site, finalized_idx)
            finalized_idx.add(site.index)
            degree_sum += len(site.neighbors_idx)
            edge_writer.write(edges)
            vol_stage.submit(site)

        frontier = Frontier(box,
                            offlining=cfg.offlining,
                            cadence=cfg.cadence,
                            grid_resolution=cfg.grid_resolution,
                            expected_online_sites=expected_online,
                            site_sink=site_sink,
                            tet_sink=tet_sink)
        peak_resident = frontier.resident_bytes()
        since_stats = 0
        for chunk in siteio.iter_chunks(sorted_path, chunk_records):
            for sid, x, y, z in chunk.tolist():
                frontier.insert(sid, x, y, z)
                since_stats += 1
                if since_stats >= cfg.stats_interval:
                    since_stats = 0
                    stats.sample(frontier)
                    rb = frontier.resident_bytes()
                    if rb > peak_resident:
                        peak_resident = rb
        frontier.drain()
        if frontier.inserted:
            stats.sample(frontier)
        vol_stage.close()
        edge_writer.close()
        volume_writer.close()
        if spill_fh is not None:
            spill_fh.close()
            spill_fh = None

        report.duplicates = frontier.duplicates
        report.inserted = frontier.inserted
        report.tets_created = frontier.created_real
        report.tets_evicted = frontier.evicted_real
        report.ghost_tets_created = frontier.created_ghost
        report.peak_online_tets = frontier.peak_online_real
        report.peak_resident_bytes = max(peak_resident, frontier.resident_bytes())
        report.edges_emitted = edge_writer.count
        report.volumes_emitted = volume_writer.count
        report.bounded_cells = vol_stage.bounded
        report.hull_cells = vol_stage.hull
        if report.inserted != report.sites_read - report.sites_trimmed - report.duplicates:
            raise RuntimeError("site accounting mismatch")
        if degree_sum != 2 * report.edges_emitted:
            raise RuntimeError("edge accounting mismatch: sum of degrees != 2*edges")
        if report.inserted:
            report.average_degree = degree_sum / report.inserted
        os.remove(sorted_path)
    except (OSError, ValueError) as exc:
        raise StageError(stage, exc) from exc
    finally:
        if spill_fh is not None:
            spill_fh.close()
    times["sweep"] = time.perf_counter() - t0

    # -- reports -----------------------------------------------------------------
    stats_path = os.path.join(cfg.out_dir, "stats.csv")
    stats.write(stats_path)
    if cfg.sort_outputs_by_id:
        _sort_outputs(cfg, ext)
    report.stage_seconds = {k: round(v, 3) for k, v in times.items()}
    with open(os.path.join(cfg.out_dir, "report.json"), "w") as fh:
        fh.write(report.to_json())
    if cfg.render_figure:
        from . import plotting
        plotting.render_stats_figure(stats_path,
                                     os.path.join(cfg.out_dir, "stats.png"))
    os.remove(marker)
    try:
        os.rmdir(scratch)
    except OSError:
        pass
    return report


def _sort_outputs(cfg: RunConfig, ext: str) -> None:
    """Optional diff-friendly post-pass: order outputs by site id."""
    if cfg.text_output:
        return
    epath = os.path.join(cfg.out_dir, f"edges.{ext}")
    edges = dual.read_edges(epath)
    edges = edges[np.lexsort((edges["id_b"], edges["id_a"]))]
    edges.tofile(epath)
    vpath = os.path.join(cfg.out_dir, f"volumes.{ext}")
    vols = dual.read_volumes(vpath)
    vols = vols[np.argsort(vols["id"], kind="stable")]
    vols.tofile(vpath)


# -- cross-validation ----------------------------------------------------------


@dataclass
class VerifyReport:
    n: int
    seed: int
    tets_kernel: int = 0
    tets_oracle: int = 0
    tets_match: bool = False
    edges_match: bool = False
    hull_match: bool = False
    volumes_checked: int = 0
    worst_volume_rel: float = 0.0
    volumes_ok: bool = False
    passed: bool = False

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True) + "\n"


def verify(n: int, seed: int = 0, volume_rel_tol: float = 1e-6,
           offlining: str = "improved", cadence: int = 256,
           check_volumes: bool = True) -> VerifyReport:
    """Cross-validate a kernel run against the brute-force oracles.

    Generates n uniform sites, runs the sweep kernel, and compares the
    tetrahedron set, edge set, hull set, and (unless disabled) every
    bounded cell volume against the independent references.
    """
    rep = VerifyReport(n=n, seed=seed)
    if n == 0:
        rep.tets_match = rep.edges_match = rep.hull_match = True
        rep.volumes_ok = rep.passed = True
        return rep
    rng = np.random.default_rng(seed)
    recs = siteio.sites_from_arrays(np.arange(n, dtype=np.uint32),
                                    *(rng.random((3, n))))
    recs = extsort.sort_in_memory(recs)
    pts = [(float(r["x"]), float(r["y"]), float(r["z"])) for r in recs]
    box = pca.bounding_box(pts)

    sites = {}
    frontier = Frontier(box, offlining=offlining, cadence=cadence,
                        site_sink=lambda s: sites.__setitem__(s.index, s))
    for rec, p in zip(recs, pts):
        frontier.insert(int(rec["id"]), *p)
    frontier.drain()

    k_tets = set()
    k_edges = set()
    k_hull = set()
    volumes = {}
    for idx, s in sites.items():
        i = idx - GHOST_COUNT
        if s.hull_flag:
            k_hull.add(i)
        else:
            volumes[i] = dual.cell_volume(s)
        for verts, _c, ghost in s.incident:
            if not ghost:
                k_tets.add(tuple(sorted(v - GHOST_COUNT for v in verts)))
        for nb in s.neighbors_idx:
            a, b = i, nb - GHOST_COUNT
            k_edges.add((a, b) if a < b else (b, a))

    ref = oracle.delaunay_oracle(pts, box=box)
    rep.tets_kernel = len(k_tets)
    rep.tets_oracle = len(ref.tets)
    rep.tets_match = k_tets == set(ref.tets)
    rep.edges_match = k_edges == set(ref.edges)
    rep.hull_match = k_hull == set(ref.hull)

    worst = 0.0
    ok = True
    if check_volumes:
        for i, kv in sorted(volumes.items()):
            ov = oracle.voronoi_volume_oracle(i, pts, box=box)
            if ov == oracle.UNBOUNDED or kv <= 0:
                ok = False
                continue
            rel = abs(kv - ov) / ov
            worst = max(worst, rel)
            if rel > volume_rel_tol:
                ok = False
        rep.volumes_checked = len(volumes)
    rep.worst_volume_rel = worst
    rep.volumes_ok = ok
    rep.passed = rep.tets_match and rep.edges_match and rep.hull_match and ok
    return rep


# -- synthetic workload benchmarks ----------------------------------------------


@dataclass
class BoxRunStats:
    dx: float
    density: float
    n: int
    offlining: str
    peak_online: int
    total_created: int
    evicted: int
    inserted: int
    duplicates: int
    wall_seconds: float


def run_box_workload(dx: float, density: float, seed: int = 0,
                     offlining: str = "improved", cadence: int = 1024,
                     stats: Optional[_StatsLog] = None) -> BoxRunStats:
    """Homogeneous-box kernel run without the file pipeline around it."""
    spec = oracle.SyntheticBoxSpec(dx=dx, density=density, seed=seed)
    recs = extsort.sort_in_memory(oracle.generate_box(spec))
    box = BoundingBox(
        (float(recs["x"].min()), float(recs["y"].min()), float(recs["z"].min())),
        (float(recs["x"].max()), float(recs["y"].max()), float(recs["z"].max())))
    expected_online = int(round(len(recs) ** (2.0 / 3.0)))
    frontier = Frontier(box, offlining=offlining, cadence=cadence,
                        expected_online_sites=expected_online,
                        site_sink=lambda s: None)
    t0 = time.perf_counter()
    since = 0
    for sid, x, y, z in recs.tolist():
        frontier.insert(sid, x, y, z)
        since += 1
        if stats is not None and since >= 1024:
            since = 0
            stats.sample(frontier)
    frontier.drain()
    if stats is not None:
        stats.sample(frontier)
    wall = time.perf_counter() - t0
    return BoxRunStats(dx=dx, density=density, n=len(recs), offlining=offlining,
                       peak_online=frontier.peak_online_real,
                       total_created=frontier.created_real,
                       evicted=frontier.evicted_real,
                       inserted=frontier.inserted,
                       duplicates=frontier.duplicates,
                       wall_seconds=round(wall, 3))


def bench_deltax(out_dir, deltas=(2.0, 4.0, 8.0), density: float = 1e5,
                 mode_dx: float = 8.0, mode_n: int = 1_000_000,
                 seed: int = 0, render_figure: bool = True) -> dict:
    """Box-scaling measurements: memory vs box length, improved vs naive.

    Runs the delta-x family at fixed density with improved offlining,
    then the improved/naive pair at mode_dx sized for mode_n sites.
    Emits bench.csv (and a figure) under out_dir.
    """
    os.makedirs(out_dir, exist_ok=True)
    rows: list[BoxRunStats] = []
    for dx in deltas:
        rows.append(run_box_workload(dx, density, seed=seed, offlining="improved"))
        logger.info("bench dx=%s: peak_online=%d created=%d",
                    dx, rows[-1].peak_online, rows[-1].total_created)
    mode_density = mode_n / mode_dx
    pair = {}
    for mode in ("improved", "naive"):
        pair[mode] = run_box_workload(mode_dx, mode_density, seed=seed,
                                      offlining=mode)
        rows.append(pair[mode])
        logger.info("bench mode=%s: peak_online=%d", mode, pair[mode].peak_online)

    csv_path = os.path.join(out_dir, "bench.csv")
    with open(csv_path, "w") as fh:
        fh.write("dx,density,n,offlining,peak_online,total_created,evicted,"
                 "inserted,duplicates,wall_seconds\n")
        for r in rows:
            fh.write(f"{r.dx!r},{r.density!r},{r.n},{r.offlining},{r.peak_online},"
                     f"{r.total_created},{r.evicted},{r.inserted},{r.duplicates},"
                     f"{r.wall_seconds!r}\n")

    result = {
        "deltas": {r.dx: {"peak_online": r.peak_online,
                          "total_created": r.total_created}
                   for r in rows if r.offlining == "improved" and r.dx in deltas
                   and r.density == density},
        "improved_peak": pair["improved"].peak_online,
        "naive_peak": pair["naive"].peak_online,
        "improved_vs_naive_ratio": (pair["improved"].peak_online
                                    / max(1, pair["naive"].peak_online)),
        "csv": csv_path,
    }
    if render_figure:
        from . import plotting
        png = os.path.join(out_dir, "bench.png")
        plotting.render_bench_figure(rows, png)
        result["figure"] = png
    with open(os.path.join(out_dir, "bench.json"), "w") as fh:
        json.dump({k: v for k, v in result.items() if k != "deltas"}
                  | {"deltas": {str(k): v for k, v in result["deltas"].items()}},
                  fh, indent=2, sort_keys=True)
        fh.write("\n")
    return result
