"""Geometric predicates with exact decisions, plus numeric constructions.

The two predicates that drive all topological decisions (`orient3d`,
`insphere`) are evaluated with a floating-point fast path guarded by a
static forward-error bound; whenever the bound cannot certify the sign,
the determinant is re-evaluated exactly over arbitrary-precision
integers (every finite double is a dyadic rational, so a common
power-of-two rescaling makes the computation exact).

Constructions (`circumsphere`, `tet_volume`) are plain floating point:
their results feed thresholds and Voronoi vertices, never topological
decisions.

Points are plain ``(x, y, z)`` tuples of floats throughout.
"""

from __future__ import annotations

import math
from typing import NamedTuple, Sequence

Point3 = tuple[float, float, float]

POSITIVE = 1
ZERO = 0
NEGATIVE = -1

# Half-ulp of the double format; the error-bound coefficients below are
# the standard static-filter constants for the 3x3 and 4x4 determinant
# forms evaluated with one common subtraction per row.
_EPS = 2.0 ** -53
_O3D_BOUND = (7.0 + 56.0 * _EPS) * _EPS
_ISP_BOUND = (16.0 + 224.0 * _EPS) * _EPS


class DegenerateSimplexError(ValueError):
    """Four supposedly independent points are coplanar."""


class Circumsphere(NamedTuple):
    center: Point3
    radius: float
    radius_sq: float


def _scaled_ints(vals: Sequence[float]) -> list[int]:
    """Map floats to integers under one common power-of-two scale.

    The scale preserves every value exactly, so determinant signs
    computed from the results are the true signs.
    """
    nums = []
    shifts = []
    maxk = 0
    for v in vals:
        n, d = v.as_integer_ratio()
        k = d.bit_length() - 1
        nums.append(n)
        shifts.append(k)
        if k > maxk:
            maxk = k
    return [n << (maxk - k) for n, k in zip(nums, shifts)]


def _orient3d_exact(a: Point3, b: Point3, c: Point3, d: Point3) -> int:
    s = _scaled_ints((a[0], a[1], a[2], b[0], b[1], b[2],
                      c[0], c[1], c[2], d[0], d[1], d[2]))
    adx = s[0] - s[9]
    ady = s[1] - s[10]
    adz = s[2] - s[11]
    bdx = s[3] - s[9]
    bdy = s[4] - s[10]
    bdz = s[5] - s[11]
    cdx = s[6] - s[9]
    cdy = s[7] - s[10]
    cdz = s[8] - s[11]
    det = (adz * (bdx * cdy - cdx * bdy)
           + bdz * (cdx * ady - adx * cdy)
           + cdz * (adx * bdy - bdx * ady))
    if det > 0:
        return POSITIVE
    if det < 0:
        return NEGATIVE
    return ZERO


def _insphere_exact(a: Point3, b: Point3, c: Point3, d: Point3, e: Point3) -> int:
    s = _scaled_ints((a[0], a[1], a[2], b[0], b[1], b[2], c[0], c[1], c[2],
                      d[0], d[1], d[2], e[0], e[1], e[2]))
    ex, ey, ez = s[12], s[13], s[14]
    aex = s[0] - ex
    aey = s[1] - ey
    aez = s[2] - ez
    bex = s[3] - ex
    bey = s[4] - ey
    bez = s[5] - ez
    cex = s[6] - ex
    cey = s[7] - ey
    cez = s[8] - ez
    dex = s[9] - ex
    dey = s[10] - ey
    dez = s[11] - ez
    ab = aex * bey - bex * aey
    bc = bex * cey - cex * bey
    cd = cex * dey - dex * cey
    da = dex * aey - aex * dey
    ac = aex * cey - cex * aey
    bd = bex * dey - dex * bey
    abc = aez * bc - bez * ac + cez * ab
    bcd = bez * cd - cez * bd + dez * bc
    cda = cez * da + dez * ac + aez * cd
    dab = dez * ab + aez * bd + bez * da
    alift = aex * aex + aey * aey + aez * aez
    blift = bex * bex + bey * bey + bez * bez
    clift = cex * cex + cey * cey + cez * cez
    dlift = dex * dex + dey * dey + dez * dez
    det = (dlift * abc - clift * dab) + (blift * cda - alift * bcd)
    if det > 0:
        return POSITIVE
    if det < 0:
        return NEGATIVE
    return ZERO


def orient3d(a: Point3, b: Point3, c: Point3, d: Point3, abs=abs) -> int:
    """Sign of the orientation determinant of tetrahedron (a, b, c, d).

    POSITIVE when (a, b, c) appear counterclockwise seen from d, ZERO
    when the four points are coplanar.  The decision is exact.
    """
    adx = a[0] - d[0]
    ady = a[1] - d[1]
    adz = a[2] - d[2]
    bdx = b[0] - d[0]
    bdy = b[1] - d[1]
    bdz = b[2] - d[2]
    cdx = c[0] - d[0]
    cdy = c[1] - d[1]
    cdz = c[2] - d[2]
    bdxcdy = bdx * cdy
    cdxbdy = cdx * bdy
    cdxady = cdx * ady
    adxcdy = adx * cdy
    adxbdy = adx * bdy
    bdxady = bdx * ady
    det = (adz * (bdxcdy - cdxbdy)
           + bdz * (cdxady - adxcdy)
           + cdz * (adxbdy - bdxady))
    permanent = ((abs(bdxcdy) + abs(cdxbdy)) * abs(adz)
                 + (abs(cdxady) + abs(adxcdy)) * abs(bdz)
                 + (abs(adxbdy) + abs(bdxady)) * abs(cdz))
    err = _O3D_BOUND * permanent
    if det > err:
        return POSITIVE
    if -det > err:
        return NEGATIVE
    return _orient3d_exact(a, b, c, d)


def _insphere_sign(a: Point3, b: Point3, c: Point3, d: Point3, e: Point3,
                   abs=abs) -> int:
    """Exact sign of the insphere determinant; no orientation check."""
    ex, ey, ez = e
    aex = a[0] - ex
    aey = a[1] - ey
    aez = a[2] - ez
    bex = b[0] - ex
    bey = b[1] - ey
    bez = b[2] - ez
    cex = c[0] - ex
    cey = c[1] - ey
    cez = c[2] - ez
    dex = d[0] - ex
    dey = d[1] - ey
    dez = d[2] - ez
    ab = aex * bey - bex * aey
    bc = bex * cey - cex * bey
    cd = cex * dey - dex * cey
    da = dex * aey - aex * dey
    ac = aex * cey - cex * aey
    bd = bex * dey - dex * bey
    abc = aez * bc - bez * ac + cez * ab
    bcd = bez * cd - cez * bd + dez * bc
    cda = cez * da + dez * ac + aez * cd
    dab = dez * ab + aez * bd + bez * da
    alift = aex * aex + aey * aey + aez * aez
    blift = bex * bex + bey * bey + bez * bez
    clift = cex * cex + cey * cey + cez * cez
    dlift = dex * dex + dey * dey + dez * dez
    det = (dlift * abc - clift * dab) + (blift * cda - alift * bcd)

    aezp = abs(aez)
    bezp = abs(bez)
    cezp = abs(cez)
    dezp = abs(dez)
    axby = abs(aex * bey)
    bxay = abs(bex * aey)
    bxcy = abs(bex * cey)
    cxby = abs(cex * bey)
    cxdy = abs(cex * dey)
    dxcy = abs(dex * cey)
    dxay = abs(dex * aey)
    axdy = abs(aex * dey)
    axcy = abs(aex * cey)
    cxay = abs(cex * aey)
    bxdy = abs(bex * dey)
    dxby = abs(dex * bey)
    permanent = (((cxdy + dxcy) * bezp + (dxby + bxdy) * cezp + (bxcy + cxby) * dezp) * alift
                 + ((dxay + axdy) * cezp + (axcy + cxay) * dezp + (cxdy + dxcy) * aezp) * blift
                 + ((axby + bxay) * dezp + (bxdy + dxby) * aezp + (dxay + axdy) * bezp) * clift
                 + ((bxcy + cxby) * aezp + (cxay + axcy) * bezp + (axby + bxay) * cezp) * dlift)
    err = _ISP_BOUND * permanent
    if det > err:
        return POSITIVE
    if -det > err:
        return NEGATIVE
    return _insphere_exact(a, b, c, d, e)


def insphere(a: Point3, b: Point3, c: Point3, d: Point3, e: Point3) -> int:
    """Exact sphere test: is e inside the circumsphere of (a, b, c, d)?

    Requires (a, b, c, d) positively oriented.  POSITIVE means strictly
    inside, ZERO cospherical, NEGATIVE strictly outside.
    """
    if orient3d(a, b, c, d) == ZERO:
        raise DegenerateSimplexError("insphere of a coplanar quadruple")
    return _insphere_sign(a, b, c, d, e)


def _insphere_tie(a: Point3, b: Point3, c: Point3, d: Point3, e: Point3,
                  ia: int, ib: int, ic: int, id_: int, ie: int) -> int:
    """Resolve an exactly cospherical five-point configuration.

    The perturbation contributes, per point, its lift-column cofactor;
    the largest insertion index dominates.  Cofactor signs alternate
    with the row position of the point in the determinant.
    """
    order = sorted(((ia, 0), (ib, 1), (ic, 2), (id_, 3), (ie, 4)), reverse=True)
    rows = (a, b, c, d, e)
    for _, pos in order:
        others = tuple(rows[i] for i in range(5) if i != pos)
        o = orient3d(*others)
        if o != ZERO:
            return o if pos == 1 or pos == 3 else -o
    raise DegenerateSimplexError("perturbed insphere of a coplanar quadruple")


def perturbed_insphere(a: Point3, b: Point3, c: Point3, d: Point3, e: Point3,
                       ia: int, ib: int, ic: int, id_: int, ie: int) -> int:
    """Sphere test under symbolic perturbation by insertion index.

    Cospherical ties are resolved as if each point were lifted off the
    paraboloid by an infinitesimal that grows with its insertion index,
    so the latest-inserted of the five ends up strictly outside.  The
    returned sign is never ZERO when (a, b, c, d) is non-degenerate,
    which makes every downstream decision deterministic.  Insertion
    indices must be pairwise distinct.
    """
    s = _insphere_sign(a, b, c, d, e)
    if s != ZERO:
        return s
    return _insphere_tie(a, b, c, d, e, ia, ib, ic, id_, ie)


def circumsphere(a: Point3, b: Point3, c: Point3, d: Point3) -> Circumsphere:
    """Center and radius of the sphere through four points.

    A floating-point construction: the center solves the equidistance
    system by Cramer's rule on the edge vectors from a.  Raises
    DegenerateSimplexError when the four points are exactly coplanar.
    """
    ax, ay, az = a
    bax = b[0] - ax
    bay = b[1] - ay
    baz = b[2] - az
    cax = c[0] - ax
    cay = c[1] - ay
    caz = c[2] - az
    dax = d[0] - ax
    day = d[1] - ay
    daz = d[2] - az
    b2 = bax * bax + bay * bay + baz * baz
    c2 = cax * cax + cay * cay + caz * caz
    d2 = dax * dax + day * day + daz * daz
    # 2 * det of the edge matrix; zero exactly when coplanar.
    xcd = cay * daz - caz * day
    ycd = caz * dax - cax * daz
    zcd = cax * day - cay * dax
    denom = 2.0 * (bax * xcd + bay * ycd + baz * zcd)
    if denom == 0.0 or orient3d(a, b, c, d) == ZERO:
        raise DegenerateSimplexError("circumsphere of a coplanar quadruple")
    xbd = bay * daz - baz * day
    ybd = baz * dax - bax * daz
    zbd = bax * day - bay * dax
    xbc = bay * caz - baz * cay
    ybc = baz * cax - bax * caz
    zbc = bax * cay - bay * cax
    ox = (b2 * xcd - c2 * xbd + d2 * xbc) / denom
    oy = (b2 * ycd - c2 * ybd + d2 * ybc) / denom
    oz = (b2 * zcd - c2 * zbd + d2 * zbc) / denom
    radius_sq = ox * ox + oy * oy + oz * oz
    return Circumsphere((ax + ox, ay + oy, az + oz), math.sqrt(radius_sq), radius_sq)


def tet_volume(a: Point3, b: Point3, c: Point3, d: Point3) -> float:
    """Unsigned volume of tetrahedron (a, b, c, d): |det| / 6."""
    bax = b[0] - a[0]
    bay = b[1] - a[1]
    baz = b[2] - a[2]
    cax = c[0] - a[0]
    cay = c[1] - a[1]
    caz = c[2] - a[2]
    dax = d[0] - a[0]
    day = d[1] - a[1]
    daz = d[2] - a[2]
    det = (bax * (cay * daz - caz * day)
           + bay * (caz * dax - cax * daz)
           + baz * (cax * day - cay * dax))
    return abs(det) / 6.0
