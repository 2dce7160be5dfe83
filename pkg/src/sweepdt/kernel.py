"""Plane-sweep incremental Delaunay kernel.

Sites arrive sorted by their sweep coordinate (x after the principal
transform).  Each insertion locates a seed tetrahedron through a
coarse (y, z) grid plus a remembering visibility walk, grows the cavity
of circumspheres that contain the new site, and retriangulates the
hole as the star of the site.  Every tetrahedron carries an offlining
threshold: the largest sweep coordinate at which any future site could
still fall inside its circumsphere.  Once the sweep passes a
tetrahedron's threshold it is evicted ("offlined") and handed
downstream; when a site loses its last online tetrahedron its Delaunay
star is provably complete and it is emitted as a finalized site.

Topological decisions all go through the exact predicates in
``geometry``; cached circumspheres only feed thresholds and output
circumcenters.  The bootstrap super-simplex uses four far-away ghost
sites (insertion indices 0..3); tetrahedra touching a ghost are never
evicted before the final drain and are filtered from all outputs, which
also marks convex-hull sites (their cells are unbounded).
"""

from __future__ import annotations

import heapq
import logging
import math
from array import array
from typing import Callable, NamedTuple, Optional

from .geometry import (
    NEGATIVE,
    POSITIVE,
    Circumsphere,
    Point3,
    circumsphere,
    orient3d,
    perturbed_insphere,
)
from .pca import BoundingBox

logger = logging.getLogger(__name__)

GHOST_COUNT = 4

_FREE = 0
_ONLINE = 1
_OFFLINED = 2

# Face opposite vertex i of a positively oriented tet (v0, v1, v2, v3),
# ordered so the remaining vertex (and the cavity interior) lies on the
# positive side of the face.
_FACE = ((2, 1, 3), (0, 2, 3), (1, 0, 3), (0, 1, 2))

# Directed base edge covered by each side face of a new tet
# (f0, f1, f2, p): side face opposite f0 spans edge f1->f2, etc.
_BASE_EDGE_SLOT = ((0, 1, 2), (1, 2, 0), (2, 0, 1))


class DegenerateBoxError(ValueError):
    pass


class UnsortedInputError(ValueError):
    pass


class FrontierInvariantError(RuntimeError):
    """The online region lost an invariant (walk escape, stale cavity, ...)."""


class FinalizedSite(NamedTuple):
    """A site whose Delaunay star is complete.

    ``index`` is the insertion (perturbation) index; ``neighbors_idx``
    and ``neighbors_id`` are parallel tuples of the real Delaunay
    neighbors, sorted by insertion index.  ``incident`` holds one entry
    per incident tetrahedron: (vertex insertion indices, circumcenter,
    touches-ghost flag).
    """

    index: int
    site_id: int
    position: Point3
    neighbors_idx: tuple[int, ...]
    neighbors_id: tuple[int, ...]
    incident: tuple
    hull_flag: bool


GHOST_SCALE = 1e6


def ghost_vertices(box: BoundingBox, scale: float = GHOST_SCALE) -> tuple[Point3, Point3, Point3, Point3]:
    """Bootstrap ghost sites: a regular tetrahedron far outside the box.

    The default reach (1e6 box diameters) keeps even huge hull-sliver
    circumspheres ghost-free, so the real part of the tessellation is
    the true Delaunay complex of the sites except in astronomically
    degenerate configurations.  Shared by the kernel and the reference
    oracles so both tessellate exactly the same point set.
    """
    lo, hi = box
    if not all(map(math.isfinite, (*lo, *hi))):
        raise DegenerateBoxError("non-finite bounding box")
    if lo[0] > hi[0] or lo[1] > hi[1] or lo[2] > hi[2]:
        raise DegenerateBoxError("inverted bounding box")
    cx = (lo[0] + hi[0]) / 2.0
    cy = (lo[1] + hi[1]) / 2.0
    cz = (lo[2] + hi[2]) / 2.0
    diam = box.diameter
    reach = scale * (diam if diam > 0.0 else 1.0)
    r3 = 1.0 / math.sqrt(3.0)
    g0 = (cx + reach * r3, cy + reach * r3, cz + reach * r3)
    g1 = (cx + reach * r3, cy - reach * r3, cz - reach * r3)
    g2 = (cx - reach * r3, cy + reach * r3, cz - reach * r3)
    g3 = (cx - reach * r3, cy - reach * r3, cz + reach * r3)
    if orient3d(g0, g1, g2, g3) != POSITIVE:
        g0, g1 = g1, g0
    return g0, g1, g2, g3


def offline_threshold(sphere: Circumsphere, box: BoundingBox) -> float:
    """Largest sweep coordinate inside box ∩ closed circumball.

    Once the sweep passes this value no future in-box site can fall
    inside the sphere.  Returns -inf when the ball misses the box in
    the (y, z) plane entirely.
    """
    (cx, cy, cz), _radius, r2 = sphere
    lo, hi = box
    ny = min(max(cy, lo[1]), hi[1])
    nz = min(max(cz, lo[2]), hi[2])
    dy = cy - ny
    dz = cz - nz
    s2 = dy * dy + dz * dz
    rem = r2 - s2
    if rem < 0.0:
        return -math.inf
    return min(hi[0], cx + math.sqrt(rem))


def naive_threshold(sphere: Circumsphere) -> float:
    """Plain sweep-past-the-sphere condition: center.x + radius."""
    return sphere.center[0] + sphere.radius


def bootstrap(box: BoundingBox, **kwargs) -> "Frontier":
    """Fresh frontier holding only the ghost super-simplex over ``box``."""
    return Frontier(box, **kwargs)


class SweepGrid:
    """Static (y, z) grid of hints into the online tessellation.

    Each cell remembers one recently created tetrahedron near that
    (y, z) location; entries go stale when their tetrahedron is
    offlined or recycled and are repaired lazily on lookup.
    """

    def __init__(self, box: BoundingBox, resolution: int):
        self.res = max(1, int(resolution))
        self.lo_y = box.lo[1]
        self.lo_z = box.lo[2]
        ey = box.hi[1] - box.lo[1]
        ez = box.hi[2] - box.lo[2]
        self.inv_y = self.res / ey if ey > 0 else 0.0
        self.inv_z = self.res / ez if ez > 0 else 0.0
        self.cells = array("q", [-1]) * (self.res * self.res)

    def _cell(self, y: float, z: float) -> int:
        iy = int((y - self.lo_y) * self.inv_y)
        iz = int((z - self.lo_z) * self.inv_z)
        res = self.res
        if iy < 0:
            iy = 0
        elif iy >= res:
            iy = res - 1
        if iz < 0:
            iz = 0
        elif iz >= res:
            iz = res - 1
        return iy * res + iz

    def update(self, y: float, z: float, tid: int) -> None:
        self.cells[self._cell(y, z)] = tid

    def lookup(self, y: float, z: float, is_online) -> int:
        """Return an online tet id near (y, z), or -1 if none found here."""
        cells = self.cells
        res = self.res
        c = self._cell(y, z)
        tid = cells[c]
        if tid >= 0 and is_online(tid):
            return tid
        iy, iz = divmod(c, res)
        for ring in (1, 2):
            for dy in range(-ring, ring + 1):
                yy = iy + dy
                if yy < 0 or yy >= res:
                    continue
                for dz in range(-ring, ring + 1):
                    if max(abs(dy), abs(dz)) != ring:
                        continue
                    zz = iz + dz
                    if zz < 0 or zz >= res:
                        continue
                    tid = cells[yy * res + zz]
                    if tid >= 0 and is_online(tid):
                        return tid
        return -1


class Frontier:
    """The online part of the tessellation plus its support structures."""

    def __init__(self, box: BoundingBox, *,
                 offlining: str = "improved",
                 cadence: int = 1024,
                 grid_resolution: Optional[int] = None,
                 expected_online_sites: int = 4096,
                 ghost_scale: float = GHOST_SCALE,
                 site_sink: Optional[Callable[[FinalizedSite], None]] = None,
                 tet_sink: Optional[Callable[[tuple, Point3], None]] = None):
        if offlining not in ("improved", "naive", "off"):
            raise ValueError(f"unknown offlining mode {offlining!r}")
        if cadence < 1:
            raise ValueError("eviction cadence must be >= 1")
        self.box = box
        self.offlining = offlining
        self.cadence = cadence
        self.site_sink = site_sink
        self.tet_sink = tet_sink
        self.eps_guard = 1e-9 * max(box.diameter, 1e-300)

        # site table: ghosts first, then sites in insertion order, so a
        # site's table index doubles as its perturbation index
        self._sx = array("d")
        self._sy = array("d")
        self._sz = array("d")
        self._sid = array("L")
        self._incident = array("q")

        # tetrahedron store, flat arrays with slot recycling
        self._tv = array("q")
        self._tn = array("q")
        self._tcx = array("d")
        self._tcy = array("d")
        self._tcz = array("d")
        self._tr2 = array("d")
        self._tthr = array("d")
        self._tghost = bytearray()
        self._tstate = bytearray()
        self._free: list[int] = []

        self._online: dict[int, None] = {}
        self._heap: list[tuple[float, int]] = []
        self._pending: dict[int, list] = {}
        self._pending_records = 0
        self._hint = -1
        self._walk_salt = 0x9E3779B9

        self.sweep_x = -math.inf
        self.inserted = 0
        self.duplicates = 0
        self.created_real = 0
        self.created_ghost = 0
        self.destroyed_real = 0
        self.destroyed_ghost = 0
        self.evicted_real = 0
        self.evicted_ghost = 0
        self.online_real = 0
        self.peak_online_real = 0
        self.finalized = 0
        self._since_evict = 0

        if grid_resolution is None:
            grid_resolution = max(4, min(2048, math.isqrt(max(1, expected_online_sites)) + 1))
        self.grid = SweepGrid(box, grid_resolution)

        g = ghost_vertices(box, ghost_scale)
        for gx, gy, gz in g:
            self._sx.append(gx)
            self._sy.append(gy)
            self._sz.append(gz)
            self._sid.append(0)
            self._incident.append(0)
        tid = self._alloc(0, 1, 2, 3)
        self._tn[0:4] = array("q", (-1, -1, -1, -1))
        self._hint = tid

    # -- site / tet plumbing ------------------------------------------------

    def _point(self, i: int) -> Point3:
        return (self._sx[i], self._sy[i], self._sz[i])

    def ext_id(self, i: int) -> int:
        return self._sid[i]

    def _is_online(self, tid: int) -> bool:
        return self._tstate[tid] == _ONLINE

    @property
    def n_tet_slots(self) -> int:
        return len(self._tstate)

    def _alloc(self, v0: int, v1: int, v2: int, v3: int) -> int:
        a = self._point(v0)
        b = self._point(v1)
        c = self._point(v2)
        d = self._point(v3)
        sphere = circumsphere(a, b, c, d)
        ghost = v0 < GHOST_COUNT or v1 < GHOST_COUNT or v2 < GHOST_COUNT or v3 < GHOST_COUNT
        if ghost or self.offlining == "off":
            thr = math.inf
        elif self.offlining == "improved":
            thr = offline_threshold(sphere, self.box)
        else:
            thr = naive_threshold(sphere)
        if self._free:
            tid = self._free.pop()
            o = 4 * tid
            self._tv[o] = v0
            self._tv[o + 1] = v1
            self._tv[o + 2] = v2
            self._tv[o + 3] = v3
            self._tn[o:o + 4] = array("q", (-1, -1, -1, -1))
            self._tcx[tid], self._tcy[tid], self._tcz[tid] = sphere.center
            self._tr2[tid] = sphere.radius_sq
            self._tthr[tid] = thr
            self._tghost[tid] = 1 if ghost else 0
            self._tstate[tid] = _ONLINE
        else:
            tid = len(self._tstate)
            self._tv.extend((v0, v1, v2, v3))
            self._tn.extend((-1, -1, -1, -1))
            cxx, cyy, czz = sphere.center
            self._tcx.append(cxx)
            self._tcy.append(cyy)
            self._tcz.append(czz)
            self._tr2.append(sphere.radius_sq)
            self._tthr.append(thr)
            self._tghost.append(1 if ghost else 0)
            self._tstate.append(_ONLINE)
        self._online[tid] = None
        inc = self._incident
        inc[v0] += 1
        inc[v1] += 1
        inc[v2] += 1
        inc[v3] += 1
        if ghost:
            self.created_ghost += 1
        else:
            self.created_real += 1
            self.online_real += 1
            if self.online_real > self.peak_online_real:
                self.peak_online_real = self.online_real
            if thr != math.inf:
                heapq.heappush(self._heap, (thr, tid))
        return tid

    # -- point location -----------------------------------------------------

    def _start_tet(self, y: float, z: float) -> int:
        tid = self.grid.lookup(y, z, self._is_online)
        if tid >= 0:
            return tid
        if self._hint >= 0 and self._tstate[self._hint] == _ONLINE:
            return self._hint
        for tid in self._online:
            return tid
        raise FrontierInvariantError("no online tetrahedron to start a walk from")

    def locate(self, p: Point3) -> int:
        """Walk to the tetrahedron whose closed hull contains p.

        Remembering visibility walk driven by exact orientation tests;
        the step cap (online count) turns a would-be cycle into a fatal
        invariant error instead of a hang.
        """
        tv = self._tv
        tn = self._tn
        sx = self._sx
        sy = self._sy
        sz = self._sz
        tid = self._start_tet(p[1], p[2])
        prev = -1
        cap = len(self._online) + len(self._pending) + 16
        steps = 0
        salt = self._walk_salt
        while True:
            steps += 1
            if steps > cap:
                raise FrontierInvariantError("visibility walk exceeded the online count")
            salt = (salt * 1103515245 + 12345) & 0x7FFFFFFF
            start = (salt >> 16) & 3
            o = 4 * tid
            moved = False
            for k in range(4):
                i = (start + k) & 3
                n = tn[o + i]
                if n == prev and prev != -1:
                    continue
                fa, fb, fc = _FACE[i]
                va = tv[o + fa]
                vb = tv[o + fb]
                vc = tv[o + fc]
                if orient3d((sx[va], sy[va], sz[va]),
                            (sx[vb], sy[vb], sz[vb]),
                            (sx[vc], sy[vc], sz[vc]), p) == NEGATIVE:
                    if n == -1:
                        raise FrontierInvariantError("walk left the super-simplex")
                    prev = tid
                    tid = n
                    moved = True
                    break
            if not moved:
                self._walk_salt = salt
                return tid

    def locate_seed(self, p: Point3) -> int:
        """Online tetrahedron whose circumsphere contains p (spec surface)."""
        tid = self.locate(p)
        if self._tstate[tid] != _ONLINE:
            raise FrontierInvariantError("walk ended on an offlined tetrahedron")
        return tid

    # -- insertion ----------------------------------------------------------

    def insert(self, site_id: int, x: float, y: float, z: float) -> Optional[int]:
        """One sweep step: locate, carve cavity, re-star, advance, evict.

        Returns the new site's insertion index, or None when the
        coordinates duplicate an already inserted site.
        """
        if x < self.sweep_x:
            raise UnsortedInputError(
                f"site {site_id} at sweep {x} arrived after sweep {self.sweep_x}")
        p = (x, y, z)
        tid = self.locate(p)
        o = 4 * tid
        tv = self._tv
        sx = self._sx
        sy = self._sy
        sz = self._sz
        for j in range(4):
            v = tv[o + j]
            if sx[v] == x and sy[v] == y and sz[v] == z:
                self.duplicates += 1
                logger.warning("duplicate site %d at (%r, %r, %r) rejected",
                               site_id, x, y, z)
                return None
        if self._tstate[tid] != _ONLINE:
            raise FrontierInvariantError("containing tetrahedron is not online")

        idx = len(self._sx)
        self._sx.append(x)
        self._sy.append(y)
        self._sz.append(z)
        self._sid.append(site_id)
        self._incident.append(0)

        cavity, boundary = self._grow_cavity(tid, p, idx)
        self._retriangulate(cavity, boundary, p, idx)

        self.sweep_x = x
        self.inserted += 1
        self._since_evict += 1
        if self._since_evict >= self.cadence:
            self.evict(x)
        return idx

    def _grow_cavity(self, seed: int, p: Point3, pidx: int):
        """Connected set of online tets whose circumspheres contain p.

        Returns (cavity tids, boundary faces); each boundary face is
        (va, vb, vc, outside_tid, outside_slot) oriented with p on the
        positive side.
        """
        tv = self._tv
        tn = self._tn
        sx = self._sx
        sy = self._sy
        sz = self._sz
        tstate = self._tstate

        def conflicts(t: int) -> bool:
            o4 = 4 * t
            a = tv[o4]
            b = tv[o4 + 1]
            c = tv[o4 + 2]
            d = tv[o4 + 3]
            return perturbed_insphere(
                (sx[a], sy[a], sz[a]), (sx[b], sy[b], sz[b]),
                (sx[c], sy[c], sz[c]), (sx[d], sy[d], sz[d]), p,
                a, b, c, d, pidx) == POSITIVE

        if not conflicts(seed):
            raise FrontierInvariantError(
                "seed tetrahedron does not conflict with the new site")
        in_cavity = {seed}
        tested: dict[int, bool] = {}
        stack = [seed]
        cavity = [seed]
        boundary = []
        while stack:
            t = stack.pop()
            o4 = 4 * t
            for i in range(4):
                n = tn[o4 + i]
                if n == -1:
                    fa, fb, fc = _FACE[i]
                    boundary.append((tv[o4 + fa], tv[o4 + fb], tv[o4 + fc], -1, -1))
                    continue
                if n in in_cavity:
                    continue
                hit = tested.get(n)
                if hit is None:
                    st = tstate[n]
                    if st == _FREE:
                        raise FrontierInvariantError("cavity reached a recycled slot")
                    hit = conflicts(n)
                    if hit and st == _OFFLINED:
                        raise FrontierInvariantError(
                            "offlined tetrahedron re-entered a cavity")
                    tested[n] = hit
                if hit:
                    in_cavity.add(n)
                    cavity.append(n)
                    stack.append(n)
                else:
                    fa, fb, fc = _FACE[i]
                    no = 4 * n
                    slot = -1
                    for j in range(4):
                        if tn[no + j] == t:
                            slot = j
                            break
                    boundary.append((tv[o4 + fa], tv[o4 + fb], tv[o4 + fc], n, slot))
        return cavity, boundary

    def _retriangulate(self, cavity, boundary, p: Point3, pidx: int) -> None:
        tn = self._tn
        inc = self._incident
        # free the cavity before allocating so slots recycle immediately
        tv = self._tv
        for t in cavity:
            o4 = 4 * t
            for j in range(4):
                inc[tv[o4 + j]] -= 1
            if self._tghost[t]:
                self.destroyed_ghost += 1
            else:
                self.destroyed_real += 1
                self.online_real -= 1
            self._tstate[t] = _FREE
            del self._online[t]
            self._free.append(t)

        edge_slots: dict[tuple[int, int], tuple[int, int]] = {}
        last = -1
        for va, vb, vc, out_tid, out_slot in boundary:
            tid = self._alloc(va, vb, vc, pidx)
            o4 = 4 * tid
            tn[o4 + 3] = out_tid
            if out_tid != -1:
                tn[4 * out_tid + out_slot] = tid
            base = (va, vb, vc)
            for ea, eb, slot in _BASE_EDGE_SLOT:
                u = base[ea]
                w = base[eb]
                partner = edge_slots.pop((w, u), None)
                if partner is None:
                    edge_slots[(u, w)] = (tid, slot)
                else:
                    ptid, pslot = partner
                    tn[o4 + slot] = ptid
                    tn[4 * ptid + pslot] = tid
            last = tid
        if edge_slots:
            raise FrontierInvariantError("cavity boundary surface is not closed")
        self.grid.update(p[1], p[2], last)
        self._hint = last

    # -- eviction and finalization -------------------------------------------

    def evict(self, sweep_x: float) -> int:
        """Offline every tetrahedron whose threshold the sweep has passed."""
        self._since_evict = 0
        finalize: list[int] = []
        count = 0
        heap = self._heap
        tstate = self._tstate
        tthr = self._tthr
        if math.isinf(sweep_x) and sweep_x > 0:
            for tid in sorted(self._online):
                self._offline(tid, finalize)
                count += 1
            heap.clear()
        else:
            cutoff = sweep_x - self.eps_guard
            while heap and heap[0][0] < cutoff:
                thr, tid = heapq.heappop(heap)
                if tstate[tid] != _ONLINE or tthr[tid] != thr:
                    continue
                self._offline(tid, finalize)
                count += 1
        if finalize:
            finalize.sort()
            sink = self.site_sink
            for idx in finalize:
                site = self._finalize_site(idx)
                if sink is not None:
                    sink(site)
        return count

    def drain(self) -> int:
        """End of stream: evict everything, finalizing every site."""
        return self.evict(math.inf)

    def _offline(self, tid: int, finalize: list[int]) -> None:
        self._tstate[tid] = _OFFLINED
        del self._online[tid]
        o4 = 4 * tid
        tv = self._tv
        verts = (tv[o4], tv[o4 + 1], tv[o4 + 2], tv[o4 + 3])
        center = (self._tcx[tid], self._tcy[tid], self._tcz[tid])
        ghost = bool(self._tghost[tid])
        if ghost:
            self.evicted_ghost += 1
        else:
            self.evicted_real += 1
            self.online_real -= 1
            if self.tet_sink is not None:
                self.tet_sink(tuple(self._sid[v] for v in verts), center)
        rec = (verts, center, ghost)
        inc = self._incident
        pending = self._pending
        for v in verts:
            inc[v] -= 1
            if v >= GHOST_COUNT:
                bucket = pending.get(v)
                if bucket is None:
                    pending[v] = [rec]
                else:
                    bucket.append(rec)
                self._pending_records += 1
                if inc[v] == 0:
                    finalize.append(v)

    def _finalize_site(self, idx: int) -> FinalizedSite:
        recs = self._pending.pop(idx)
        self._pending_records -= len(recs)
        nbr: set[int] = set()
        hull = False
        for verts, _center, ghost in recs:
            if ghost:
                hull = True
            for v in verts:
                if v >= GHOST_COUNT and v != idx:
                    nbr.add(v)
        nbr_idx = tuple(sorted(nbr))
        site = FinalizedSite(
            index=idx,
            site_id=self._sid[idx],
            position=self._point(idx),
            neighbors_idx=nbr_idx,
            neighbors_id=tuple(self._sid[v] for v in nbr_idx),
            incident=tuple(recs),
            hull_flag=hull,
        )
        self.finalized += 1
        return site

    # -- accounting and validation --------------------------------------------

    def resident_bytes(self) -> int:
        """Deterministic size estimate of the live frontier structures.

        Counts the tet store (4 verts + 4 neighbors at 8 bytes, 5
        doubles, 2 state bytes per slot), the site table (3 doubles,
        id, counter), grid cells, heap entries and pending offlined
        records (~88 bytes each); intentionally an internal model, not
        OS RSS.
        """
        tets = len(self._tstate) * (8 * 8 + 5 * 8 + 2)
        sites = len(self._sx) * (3 * 8 + 4 + 8)
        grid = len(self.grid.cells) * 8
        heap = len(self._heap) * 24
        pend = self._pending_records * 88
        return tets + sites + grid + heap + pend

    def online_tetrahedra(self) -> list[int]:
        return sorted(self._online)

    def tet_vertices(self, tid: int) -> tuple[int, int, int, int]:
        o4 = 4 * tid
        return (self._tv[o4], self._tv[o4 + 1], self._tv[o4 + 2], self._tv[o4 + 3])

    def tet_neighbors(self, tid: int) -> tuple[int, int, int, int]:
        o4 = 4 * tid
        return (self._tn[o4], self._tn[o4 + 1], self._tn[o4 + 2], self._tn[o4 + 3])

    def tet_is_ghost(self, tid: int) -> bool:
        return bool(self._tghost[tid])

    def tet_threshold(self, tid: int) -> float:
        return self._tthr[tid]

    def site_point(self, idx: int) -> Point3:
        return self._point(idx)

    def n_sites(self) -> int:
        return len(self._sx)

    def check_invariants(self, after_evict: bool = False) -> None:
        """Expensive structural checks used by the test suite."""
        for tid in self._online:
            verts = self.tet_vertices(tid)
            pts = [self._point(v) for v in verts]
            if orient3d(*pts) != POSITIVE:
                raise FrontierInvariantError(f"tet {tid} not positively oriented")
            for i, n in enumerate(self.tet_neighbors(tid)):
                if n == -1:
                    continue
                if self._tstate[n] == _FREE:
                    raise FrontierInvariantError(f"tet {tid} points at a freed slot")
                back = [j for j in range(4) if self.tet_neighbors(n)[j] == tid]
                if len(back) != 1:
                    raise FrontierInvariantError(
                        f"neighbor symmetry broken between {tid} and {n}")
                mine = set(verts) - {verts[i]}
                theirs = set(self.tet_vertices(n)) - {self.tet_vertices(n)[back[0]]}
                if mine != theirs:
                    raise FrontierInvariantError(
                        f"shared face mismatch between {tid} and {n}")
            if (after_evict and not self._tghost[tid]
                    and self._tthr[tid] < self.sweep_x - self.eps_guard):
                raise FrontierInvariantError(f"tet {tid} overdue for eviction")
