"""Delaunay edges and Voronoi cell volumes from finalized sites.

A finalized site arrives with its complete set of incident tetrahedra
(vertex indices plus circumcenters).  Its Voronoi cell is assembled
facet by facet: the circumcenters of the tetrahedra around the Delaunay
edge (s, n) form the polygon dual to that edge, and the cell volume is
the sum of the pyramids those polygons span with apex s.  Hull sites
(flagged by ghost-incident tetrahedra) have unbounded cells and are
reported with a sentinel volume instead.
"""

from __future__ import annotations

from typing import Iterable

import numpy as np

from .geometry import Point3, tet_volume
from .kernel import GHOST_COUNT, FinalizedSite

EDGE_DTYPE = np.dtype([("id_a", "<u4"), ("id_b", "<u4")])
VOLUME_DTYPE = np.dtype([("id", "<u4"), ("volume", "<f8")])
UNBOUNDED_VOLUME = -1.0

# circumcenters closer than this fraction of the cell scale collapse
# into one polygon vertex before fanning (cospherical clusters)
MERGE_EPS = 1e-12


class OpenRingError(RuntimeError):
    """The tetrahedra around a Delaunay edge do not close into a ring."""


def extract_edges(site: FinalizedSite, already_finalized) -> list[tuple[int, int]]:
    """Edges (id_a < id_b) for neighbors of ``site`` that already finalized.

    Both endpoints of an edge finalize exactly once, so emitting at the
    later finalization yields each edge exactly once over a run.
    ``already_finalized`` supports ``in`` over insertion indices.
    """
    out = []
    sid = site.site_id
    for nidx, nid in zip(site.neighbors_idx, site.neighbors_id):
        if nidx in already_finalized:
            out.append((sid, nid) if sid < nid else (nid, sid))
    return out


def _edge_ring(site: FinalizedSite, n: int) -> list[Point3]:
    """Circumcenters around Delaunay edge (site, n), in ring order."""
    s = site.index
    wing_map: dict[int, list[int]] = {}
    tets = []
    for verts, center, ghost in site.incident:
        if n not in verts:
            continue
        if ghost:
            raise OpenRingError(f"edge ({s}, {n}) touches a ghost tetrahedron")
        wings = [v for v in verts if v != s and v != n]
        if len(wings) != 2:
            raise OpenRingError(f"tetrahedron {verts} malformed around edge ({s}, {n})")
        k = len(tets)
        tets.append((wings[0], wings[1], center))
        for w in wings:
            wing_map.setdefault(w, []).append(k)
    if not tets:
        raise OpenRingError(f"no tetrahedra around edge ({s}, {n})")
    for w, owners in wing_map.items():
        if len(owners) != 2:
            raise OpenRingError(f"edge ({s}, {n}): wing {w} seen {len(owners)} times")

    ring = [0]
    cur_wing = tets[0][1]
    while len(ring) < len(tets):
        owners = wing_map[cur_wing]
        nxt = owners[1] if owners[0] == ring[-1] else owners[0]
        if nxt == ring[0]:
            break
        ring.append(nxt)
        wa, wb, _ = tets[nxt]
        cur_wing = wb if wa == cur_wing else wa
    if len(ring) != len(tets):
        raise OpenRingError(f"edge ({s}, {n}): ring closed early "
                            f"({len(ring)} of {len(tets)} tetrahedra)")
    return [tets[k][2] for k in ring]


def facet_polygon(site: FinalizedSite, n: int) -> list[Point3]:
    """Voronoi facet dual to Delaunay edge (site, n).

    Vertices are the circumcenters of the tetrahedra sharing the edge,
    ordered by ring adjacency.  Only valid for interior (non-hull)
    cells, where the ring provably closes.
    """
    if site.hull_flag:
        raise OpenRingError(f"site {site.index} is a hull site")
    return _edge_ring(site, n)


def _merged(polygon: list[Point3], eps: float) -> list[Point3]:
    if len(polygon) < 2:
        return polygon
    out = [polygon[0]]
    for p in polygon[1:]:
        q = out[-1]
        if max(abs(p[0] - q[0]), abs(p[1] - q[1]), abs(p[2] - q[2])) > eps:
            out.append(p)
    while len(out) > 1:
        p, q = out[0], out[-1]
        if max(abs(p[0] - q[0]), abs(p[1] - q[1]), abs(p[2] - q[2])) > eps:
            break
        out.pop()
    return out


def cell_volume(site: FinalizedSite) -> float:
    """Voronoi cell volume of a finalized site (sentinel when unbounded).

    Pyramid decomposition: one pyramid per Delaunay neighbor, apex at
    the site, base the dual facet polygon, each fanned into
    tetrahedra.  Near-identical circumcenters are merged first so
    degenerate slivers cannot poison the fan.
    """
    if site.hull_flag:
        return UNBOUNDED_VOLUME
    apex = site.position
    scale = 0.0
    for _verts, center, _ghost in site.incident:
        d = max(abs(center[0] - apex[0]), abs(center[1] - apex[1]),
                abs(center[2] - apex[2]))
        if d > scale:
            scale = d
    eps = MERGE_EPS * scale
    total = 0.0
    for n in site.neighbors_idx:
        poly = _merged(_edge_ring(site, n), eps)
        if len(poly) < 3:
            continue
        p0 = poly[0]
        for i in range(1, len(poly) - 1):
            total += tet_volume(apex, p0, poly[i], poly[i + 1])
    return total


def facet_count(site: FinalizedSite) -> int:
    """Number of facets of a bounded cell (one per Delaunay neighbor)."""
    if site.hull_flag:
        raise OpenRingError(f"site {site.index} is a hull site")
    count = 0
    for n in site.neighbors_idx:
        _edge_ring(site, n)
        count += 1
    return count


# -- output files -------------------------------------------------------------


class EdgeWriter:
    """Buffered writer of 8-byte edge records (or CSV when text=True)."""

    def __init__(self, path, text: bool = False, buffer_records: int = 65536):
        self.text = text
        self.path = path
        self.fh = open(path, "w" if text else "wb")
        self.buf: list[tuple[int, int]] = []
        self.buffer_records = buffer_records
        self.count = 0
        if text:
            self.fh.write("id_a,id_b\n")

    def write(self, edges: Iterable[tuple[int, int]]) -> None:
        self.buf.extend(edges)
        if len(self.buf) >= self.buffer_records:
            self.flush()

    def flush(self) -> None:
        if self.buf:
            self.count += len(self.buf)
            if self.text:
                self.fh.writelines(f"{a},{b}\n" for a, b in self.buf)
            else:
                np.array(self.buf, dtype=EDGE_DTYPE).tofile(self.fh)
            self.buf.clear()

    def close(self) -> None:
        self.flush()
        self.fh.close()


class VolumeWriter:
    """Buffered writer of 12-byte (id, volume) records (or CSV)."""

    def __init__(self, path, text: bool = False, buffer_records: int = 65536):
        self.text = text
        self.path = path
        self.fh = open(path, "w" if text else "wb")
        self.buf: list[tuple[int, float]] = []
        self.buffer_records = buffer_records
        self.count = 0
        if text:
            self.fh.write("id,volume\n")

    def write(self, site_id: int, volume: float) -> None:
        self.buf.append((site_id, volume))
        if len(self.buf) >= self.buffer_records:
            self.flush()

    def flush(self) -> None:
        if self.buf:
            self.count += len(self.buf)
            if self.text:
                self.fh.writelines(f"{i},{v!r}\n" for i, v in self.buf)
            else:
                np.array(self.buf, dtype=VOLUME_DTYPE).tofile(self.fh)
            self.buf.clear()

    def close(self) -> None:
        self.flush()
        self.fh.close()


def read_edges(path) -> np.ndarray:
    return np.fromfile(path, dtype=EDGE_DTYPE)


def read_volumes(path) -> np.ndarray:
    return np.fromfile(path, dtype=VOLUME_DTYPE)
