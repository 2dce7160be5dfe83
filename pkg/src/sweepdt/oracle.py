"""Independent references for tests: brute-force Delaunay, clipped
Voronoi volumes, and synthetic workload generators.

The Delaunay reference accepts exactly the 4-subsets whose circumsphere
contains no other point under the same symbolic perturbation the sweep
kernel uses (ghosts occupy perturbation indices 0..3, input points
follow in list order).  Tiny inputs are enumerated exhaustively; larger
ones are built by face pivoting, and every accepted tetrahedron is
re-verified against the defining empty-circumsphere property, so the
construction strategy cannot change the result, only the running time.

Voronoi volumes come from successive half-space clipping of a huge seed
cube, optionally in exact rational arithmetic (no square roots touch
the clipping path, so lattice volumes come out exact).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import cmp_to_key
from typing import NamedTuple, Optional, Sequence

import numpy as np

from .geometry import (
    NEGATIVE,
    POSITIVE,
    ZERO,
    Point3,
    circumsphere,
    orient3d,
    perturbed_insphere,
)
from .kernel import GHOST_COUNT, ghost_vertices
from .pca import BoundingBox, bounding_box
from .siteio import sites_from_arrays

_EXHAUSTIVE_LIMIT = 40
_DEFAULT_LIMIT = 2000
_VOL_LIMIT = 5000


class OracleError(RuntimeError):
    pass


class SizeLimitError(ValueError):
    pass


class OracleTessellation(NamedTuple):
    """Delaunay reference output over the ghost-augmented point set.

    ``tets`` holds the real tetrahedra as sorted 4-tuples of input
    indices; ``edges`` the real-real Delaunay edges (including those
    carried only by ghost-incident tetrahedra); ``hull`` the input
    indices adjacent to a ghost; ``internal_tets`` every tetrahedron in
    internal indexing (ghosts 0..3, inputs offset by 4).
    """

    tets: frozenset
    edges: frozenset
    hull: frozenset
    internal_tets: frozenset


def _internal_points(points: Sequence[Point3], box: Optional[BoundingBox]):
    if box is None:
        box = bounding_box(points)
    ghosts = ghost_vertices(box)
    pts = [tuple(map(float, g)) for g in ghosts]
    pts.extend(tuple(map(float, p)) for p in points)
    return pts, box


def _oriented(pts, tet):
    """Tet as an index tuple ordered positively; None when coplanar."""
    a, b, c, d = tet
    s = orient3d(pts[a], pts[b], pts[c], pts[d])
    if s == ZERO:
        return None
    if s == NEGATIVE:
        return (a, b, d, c)
    return (a, b, c, d)


def _tet_is_empty(P: np.ndarray, pts, tet) -> bool:
    """Exact perturbed empty-circumsphere test of an oriented tet.

    Floating screening against all points with a conservative band;
    every point inside or near the band goes through the exact
    perturbed predicate.
    """
    a, b, c, d = tet
    sphere = circumsphere(pts[a], pts[b], pts[c], pts[d])
    center = np.array(sphere.center)
    r2 = sphere.radius_sq
    diff = P - center
    dist2 = np.einsum("ij,ij->i", diff, diff)
    residual = max(abs(dist2[v] - r2) for v in tet)
    band = 1e-9 * (dist2 + r2) + 16.0 * residual + 1e-300
    suspects = np.nonzero(dist2 - r2 < band)[0]
    pa, pb, pc, pd = pts[a], pts[b], pts[c], pts[d]
    for j in suspects:
        j = int(j)
        if j == a or j == b or j == c or j == d:
            continue
        if perturbed_insphere(pa, pb, pc, pd, pts[j], a, b, c, d, j) == POSITIVE:
            return False
    return True


def _tri_circum(P: np.ndarray, u: int, v: int, w: int):
    """Circumcenter and squared radius of a triangle in 3D (float)."""
    a = P[v] - P[u]
    b = P[w] - P[u]
    aa = a @ a
    bb = b @ b
    ab = a @ b
    det = aa * bb - ab * ab
    if det == 0.0:
        return None, math.inf
    alpha = 0.5 * (aa * bb - ab * bb) / det
    beta = 0.5 * (aa * bb - ab * aa) / det
    c = P[u] + alpha * a + beta * b
    off = alpha * a + beta * b
    return c, float(off @ off)


def _outer_candidates(P: np.ndarray, pts, u: int, v: int, w: int):
    """Indices strictly on the positive-orientation side of face (u, v, w)."""
    m = np.cross(P[w] - P[u], P[v] - P[u])
    h = (P - P[u]) @ m
    scale = float(np.max(np.abs(h)))
    if scale == 0.0:
        return np.empty(0, dtype=int)
    band = 1e-9 * scale
    sure = h > band
    ambiguous = np.nonzero(np.abs(h) <= band)[0]
    extra = []
    for j in ambiguous:
        j = int(j)
        if j in (u, v, w):
            continue
        if orient3d(pts[u], pts[v], pts[w], pts[j]) == POSITIVE:
            extra.append(j)
    out = np.nonzero(sure)[0].tolist()
    out.extend(extra)
    for x in (u, v, w):
        if x in out:
            out.remove(x)
    return np.array(sorted(set(out)), dtype=int)


def _pivot(P: np.ndarray, pts, u: int, v: int, w: int) -> int:
    """Delaunay successor of oriented face (u, v, w), or -1 at the hull.

    Floating pivot values pick a near-minimal band of candidates; an
    exact tournament with the perturbed predicate settles the winner.
    """
    cand = _outer_candidates(P, pts, u, v, w)
    if cand.size == 0:
        return -1
    c_f, r2_f = _tri_circum(P, u, v, w)
    if c_f is None:
        raise OracleError(f"degenerate pivot face ({u}, {v}, {w})")
    m = np.cross(P[w] - P[u], P[v] - P[u])
    m = m / np.linalg.norm(m)
    g = P[cand] - c_f
    denom = g @ m
    denom = np.where(denom <= 0.0, 1e-300, denom)
    t = (np.einsum("ij,ij->i", g, g) - r2_f) / (2.0 * denom)
    tmin = float(np.min(t))
    spread = float(np.max(t) - tmin) + math.sqrt(max(r2_f, 0.0))
    band = 1e-7 * (abs(tmin) + spread) + 1e-12
    short = [int(cand[k]) for k in np.nonzero(t <= tmin + band)[0]]
    best = short[0]
    for c in short[1:]:
        if perturbed_insphere(pts[u], pts[v], pts[w], pts[best], pts[c],
                              u, v, w, best, c) == POSITIVE:
            best = c
    return best


def _face_outward(tet, slot):
    """Face of positively oriented tet opposite vertex ``slot``,
    oriented so the unknown (outside) side is positive."""
    # inward-positive faces per slot, then swap two vertices to flip
    faces = ((2, 1, 3), (0, 2, 3), (1, 0, 3), (0, 1, 2))
    fa, fb, fc = faces[slot]
    return (tet[fa], tet[fc], tet[fb])


def _pivot_tessellation(P: np.ndarray, pts) -> set:
    seed = _seed_tet(P, pts)
    tets = {tuple(sorted(seed))}
    open_faces: dict[tuple, tuple] = {}

    def push_faces(tet):
        for slot in range(4):
            face = _face_outward(tet, slot)
            key = tuple(sorted(face))
            if key in open_faces:
                del open_faces[key]
            else:
                open_faces[key] = face

    push_faces(seed)
    while open_faces:
        key, face = next(iter(open_faces.items()))
        del open_faces[key]
        u, v, w = face
        d = _pivot(P, pts, u, v, w)
        if d == -1:
            if not all(x < GHOST_COUNT for x in face):
                raise OracleError(f"open face {face} is not on the ghost hull")
            continue
        tet = (u, v, w, d)
        if not _tet_is_empty(P, pts, tet):
            d = _exhaustive_successor(P, pts, u, v, w)
            tet = (u, v, w, d)
            if not _tet_is_empty(P, pts, tet):
                raise OracleError(f"pivot produced a non-empty tet {tet}")
        skey = tuple(sorted(tet))
        if skey in tets:
            raise OracleError(f"tet {skey} reached twice; face bookkeeping broken")
        tets.add(skey)
        for slot in range(4):
            face2 = _face_outward(tet, slot)
            key2 = tuple(sorted(face2))
            if key2 == key:
                continue
            if key2 in open_faces:
                del open_faces[key2]
            else:
                open_faces[key2] = face2
    return tets


def _exhaustive_successor(P: np.ndarray, pts, u: int, v: int, w: int) -> int:
    """Fallback pivot: exact tournament over every outer candidate."""
    cand = [int(c) for c in _outer_candidates(P, pts, u, v, w)]
    if not cand:
        raise OracleError("exhaustive pivot found no candidates")
    best = cand[0]
    for c in cand[1:]:
        if perturbed_insphere(pts[u], pts[v], pts[w], pts[best], pts[c],
                              u, v, w, best, c) == POSITIVE:
            best = c
    return best


def _seed_tet(P: np.ndarray, pts):
    """A first Delaunay tetrahedron, verified against the definition."""
    n = len(pts)
    reals = np.arange(GHOST_COUNT, n)
    order = np.lexsort((P[reals, 2], P[reals, 1], P[reals, 0]))
    i0 = int(reals[order[0]])
    diff = P - P[i0]
    d2 = np.einsum("ij,ij->i", diff, diff)
    d2[i0] = math.inf
    i1 = int(np.argmin(d2))

    radii = []
    for j in range(n):
        if j in (i0, i1):
            continue
        _c, r2 = _tri_circum(P, i0, i1, j)
        if math.isfinite(r2):
            radii.append((r2, j))
    radii.sort()
    for _r2, j in radii:
        for face in ((i0, i1, j), (i0, j, i1)):
            d = _pivot(P, pts, *face)
            if d == -1:
                continue
            tet = (*face, d)
            if _tet_is_empty(P, pts, tet):
                return tet
    raise OracleError("could not construct a verified seed tetrahedron")


def delaunay_oracle(points: Sequence[Point3], box: Optional[BoundingBox] = None,
                    limit: int = _DEFAULT_LIMIT) -> OracleTessellation:
    """All empty-circumsphere 4-subsets of the ghost-augmented input.

    Points receive perturbation indices 4..n+3 in list order (ghosts
    take 0..3), matching the kernel's insertion indexing when the list
    is sorted the way the kernel inserts.
    """
    if len(points) > limit:
        raise SizeLimitError(f"{len(points)} points exceed the oracle guard {limit}")
    pts, _box = _internal_points(points, box)
    P = np.array(pts, dtype=float)
    n = len(pts)

    if len(points) <= _EXHAUSTIVE_LIMIT:
        internal = set()
        for tet in itertools.combinations(range(n), 4):
            oriented = _oriented(pts, tet)
            if oriented is None:
                continue
            if _tet_is_empty(P, pts, oriented):
                internal.add(tuple(sorted(tet)))
    else:
        internal = _pivot_tessellation(P, pts)

    real_tets = set()
    edges = set()
    hull = set()
    for tet in internal:
        reals = [v - GHOST_COUNT for v in tet if v >= GHOST_COUNT]
        if len(reals) == 4:
            real_tets.add(tuple(sorted(reals)))
        else:
            hull.update(reals)
        for i in range(len(reals)):
            for j in range(i + 1, len(reals)):
                a, b = reals[i], reals[j]
                edges.add((a, b) if a < b else (b, a))
    return OracleTessellation(frozenset(real_tets), frozenset(edges),
                              frozenset(hull), frozenset(internal))


# -- half-space clipped Voronoi volumes ---------------------------------------


def _angular_sorted(points, g):
    """Order coplanar points cyclically around their centroid.

    Works for floats and Fractions alike: affine 2D coordinates in the
    cutting plane, then a half-plane + cross-sign comparator.
    """
    zero = points[0][0] * 0
    gx, gy, gz = g
    if gx == zero and gy == zero:
        e1 = (g[2] * 0 + 1, zero, zero)
    else:
        e1 = (-gy, gx, zero)
    e2 = (g[1] * e1[2] - g[2] * e1[1],
          g[2] * e1[0] - g[0] * e1[2],
          g[0] * e1[1] - g[1] * e1[0])
    k = len(points)
    cx = sum(p[0] for p in points) / k
    cy = sum(p[1] for p in points) / k
    cz = sum(p[2] for p in points) / k
    flat = []
    for p in points:
        dx, dy, dz = p[0] - cx, p[1] - cy, p[2] - cz
        flat.append((dx * e1[0] + dy * e1[1] + dz * e1[2],
                     dx * e2[0] + dy * e2[1] + dz * e2[2], p))

    def half(q):
        return 0 if (q[1] > zero or (q[1] == zero and q[0] > zero)) else 1

    def cmp(a, b):
        ha, hb = half(a), half(b)
        if ha != hb:
            return -1 if ha < hb else 1
        cross = a[0] * b[1] - a[1] * b[0]
        if cross > zero:
            return -1
        if cross < zero:
            return 1
        return 0

    flat.sort(key=cmp_to_key(cmp))
    return [p for _x, _y, p in flat]


def _dedup(points, tol):
    out = []
    for p in points:
        dup = False
        for q in out:
            if (abs(p[0] - q[0]) <= tol and abs(p[1] - q[1]) <= tol
                    and abs(p[2] - q[2]) <= tol):
                dup = True
                break
        if not dup:
            out.append(p)
    return out


def _clip(faces, g, h, tol, tag):
    """Cut a convex polytope with half-space g.x <= h; add a cap face."""
    new_faces = []
    cap_pts = []
    cut = False
    for verts, ftag in faces:
        svals = [g[0] * v[0] + g[1] * v[1] + g[2] * v[2] - h for v in verts]
        if max(svals) <= tol:
            new_faces.append((verts, ftag))
            continue
        cut = True
        if min(svals) >= -tol:
            continue
        out = []
        m = len(verts)
        for i in range(m):
            v0, s0 = verts[i], svals[i]
            v1, s1 = verts[(i + 1) % m], svals[(i + 1) % m]
            if s0 <= tol:
                out.append(v0)
                if s0 >= -tol:
                    cap_pts.append(v0)
            if (s0 < -tol and s1 > tol) or (s0 > tol and s1 < -tol):
                t = s0 / (s0 - s1)
                ip = (v0[0] + t * (v1[0] - v0[0]),
                      v0[1] + t * (v1[1] - v0[1]),
                      v0[2] + t * (v1[2] - v0[2]))
                out.append(ip)
                cap_pts.append(ip)
        if len(out) >= 3:
            new_faces.append((out, ftag))
    if cut:
        cap = _dedup(cap_pts, tol)
        if len(cap) >= 3:
            new_faces.append((_angular_sorted(cap, g), tag))
    return new_faces


def _poly_volume(faces):
    verts = [v for f, _t in faces for v in f]
    k = len(verts)
    cx = sum(v[0] for v in verts) / k
    cy = sum(v[1] for v in verts) / k
    cz = sum(v[2] for v in verts) / k
    vol = verts[0][0] * 0
    for f, _tag in faces:
        x0, y0, z0 = f[0][0] - cx, f[0][1] - cy, f[0][2] - cz
        for i in range(1, len(f) - 1):
            x1, y1, z1 = f[i][0] - cx, f[i][1] - cy, f[i][2] - cz
            x2, y2, z2 = f[i + 1][0] - cx, f[i + 1][1] - cy, f[i + 1][2] - cz
            det = (x0 * (y1 * z2 - z1 * y2)
                   - y0 * (x1 * z2 - z1 * x2)
                   + z0 * (x1 * y2 - y1 * x2))
            vol += abs(det)
    return vol / 6


def _seed_cube(center, half):
    cx, cy, cz = center
    corners = {}
    for sx in (-1, 1):
        for sy in (-1, 1):
            for sz in (-1, 1):
                corners[(sx, sy, sz)] = (cx + sx * half, cy + sy * half, cz + sz * half)

    def quad(keys):
        return [corners[k] for k in keys]

    faces = [
        quad([(1, -1, -1), (1, 1, -1), (1, 1, 1), (1, -1, 1)]),
        quad([(-1, -1, -1), (-1, -1, 1), (-1, 1, 1), (-1, 1, -1)]),
        quad([(-1, 1, -1), (-1, 1, 1), (1, 1, 1), (1, 1, -1)]),
        quad([(-1, -1, -1), (1, -1, -1), (1, -1, 1), (-1, -1, 1)]),
        quad([(-1, -1, 1), (1, -1, 1), (1, 1, 1), (-1, 1, 1)]),
        quad([(-1, -1, -1), (-1, 1, -1), (1, 1, -1), (1, -1, -1)]),
    ]
    return [(f, ("seed",)) for f in faces]


def clip_cell(i: int, pts: Sequence[Point3], seed_center: Point3, seed_half,
              exact: bool = False, prune: int = 64):
    """Clip the cell of pts[i] against every other point's bisector.

    Returns (volume, seed_survived).  In exact mode all arithmetic is
    rational and the volume is exact for rational inputs.
    """
    if exact:
        pts = [tuple(Fraction(x) for x in p) for p in pts]
        seed_center = tuple(Fraction(x) for x in seed_center)
        seed_half = Fraction(seed_half)
        tol = Fraction(0)
    else:
        pts = [tuple(map(float, p)) for p in pts]
        tol = 1e-12 * float(seed_half)

    pi = pts[i]
    faces = _seed_cube(seed_center, seed_half)

    others = [j for j in range(len(pts)) if j != i]
    fl = np.array([[float(pts[j][0]), float(pts[j][1]), float(pts[j][2])]
                   for j in others], dtype=float).reshape(-1, 3)
    fpi = np.array([float(pi[0]), float(pi[1]), float(pi[2])])
    d2 = np.einsum("ij,ij->i", fl - fpi, fl - fpi)
    order = [others[k] for k in np.argsort(d2, kind="stable")]

    def bisector(j):
        pj = pts[j]
        g = (pj[0] - pi[0], pj[1] - pi[1], pj[2] - pi[2])
        h = ((pj[0] * pj[0] + pj[1] * pj[1] + pj[2] * pj[2])
             - (pi[0] * pi[0] + pi[1] * pi[1] + pi[2] * pi[2])) / 2
        if not exact:
            norm = math.sqrt(g[0] * g[0] + g[1] * g[1] + g[2] * g[2])
            g = (g[0] / norm, g[1] / norm, g[2] / norm)
            h = h / norm
        return g, h

    done = set()
    for j in order[:prune]:
        g, h = bisector(j)
        faces = _clip(faces, g, h, tol, ("bis", j))
        done.add(j)

    # anything the pruned pass missed still gets clipped until clean
    for _round in range(64):
        violated = []
        verts = [v for f, _t in faces for v in f]
        for j in order:
            if j in done:
                continue
            g, h = bisector(j)
            if any(g[0] * v[0] + g[1] * v[1] + g[2] * v[2] - h > tol for v in verts):
                violated.append(j)
        if not violated:
            break
        for j in violated:
            g, h = bisector(j)
            faces = _clip(faces, g, h, tol, ("bis", j))
            done.add(j)
    else:
        raise OracleError("half-space pruning failed to converge")

    seed_survived = any(tag[0] == "seed" for _f, tag in faces)
    return _poly_volume(faces), seed_survived


UNBOUNDED = -1.0


def voronoi_volume_oracle(i: int, points: Sequence[Point3],
                          box: Optional[BoundingBox] = None,
                          include_ghosts: bool = True,
                          exact: bool = False,
                          seed_factor: float = 1e4,
                          limit: int = _VOL_LIMIT) -> float:
    """Voronoi cell volume of points[i] by half-space intersection.

    With ghosts included the construction matches the kernel's
    ghost-augmented tessellation; the huge seed cube only survives for
    genuinely unbounded cells, reported as the sentinel -1.0.
    """
    if len(points) > limit:
        raise SizeLimitError(f"{len(points)} points exceed the oracle guard {limit}")
    if include_ghosts:
        pts, _box = _internal_points(points, box)
        idx = i + GHOST_COUNT
    else:
        pts = [tuple(map(float, p)) for p in points]
        idx = i
    # The seed cube scales with the input sites, not the ghosts: bounded
    # cells live at data scale while ghost-limited hull cells reach far
    # beyond the cube, so seed survival cleanly flags them unbounded.
    arr = np.asarray(points, dtype=float).reshape(-1, 3)
    lo = arr.min(axis=0)
    hi = arr.max(axis=0)
    diam = float(np.linalg.norm(hi - lo))
    half = seed_factor * max(diam, 1.0)
    center = tuple(((lo + hi) / 2.0).tolist())
    vol, seed_survived = clip_cell(idx, pts, center, half, exact=exact)
    if seed_survived:
        return UNBOUNDED
    return float(vol)


# -- synthetic workloads -------------------------------------------------------


@dataclass(frozen=True)
class SyntheticBoxSpec:
    """Homogeneous box workload: extents, density, RNG seed."""

    dx: float
    dy: float = 1.0
    dz: float = 1.0
    density: float = 1e5
    seed: int = 0

    @property
    def count(self) -> int:
        return int(round(self.density * self.dx * self.dy * self.dz))


def generate_box(spec: SyntheticBoxSpec) -> np.ndarray:
    """Uniform sites in the box, deterministic in the seed."""
    rng = np.random.default_rng(spec.seed)
    pts = rng.random((spec.count, 3))
    pts[:, 0] *= spec.dx
    pts[:, 1] *= spec.dy
    pts[:, 2] *= spec.dz
    return sites_from_arrays(np.arange(spec.count, dtype=np.uint32),
                             pts[:, 0], pts[:, 1], pts[:, 2])


def generate_shell(n: int, seed: int = 0, radius: float = 1.0,
                   center: Point3 = (0.0, 0.0, 0.0)) -> np.ndarray:
    """Adversarial workload: sites on (the float rounding of) a sphere."""
    rng = np.random.default_rng(seed)
    v = rng.normal(size=(n, 3))
    v /= np.linalg.norm(v, axis=1)[:, None]
    v = v * radius + np.asarray(center)
    return sites_from_arrays(np.arange(n, dtype=np.uint32), v[:, 0], v[:, 1], v[:, 2])


def jittered_lattice(k: int, spacing: float = 1.0, jitter: float = 1e-6,
                     seed: int = 0) -> np.ndarray:
    """k^3 cubic lattice with a small uniform jitter."""
    rng = np.random.default_rng(seed)
    axes = np.arange(k, dtype=float) * spacing
    gx, gy, gz = np.meshgrid(axes, axes, axes, indexing="ij")
    pts = np.column_stack([gx.ravel(), gy.ravel(), gz.ravel()])
    pts += rng.uniform(-jitter, jitter, size=pts.shape)
    return sites_from_arrays(np.arange(len(pts), dtype=np.uint32),
                             pts[:, 0], pts[:, 1], pts[:, 2])
