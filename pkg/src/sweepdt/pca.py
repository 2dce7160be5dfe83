"""Sweep-direction selection, coordinate transform, and tail trimming.

The sweep direction is the first principal axis of the point cloud.
Rotating the data so that axis becomes x keeps the online region as
thin as possible; volumes are preserved because the transform is a
proper rotation (no scaling).  Trimming a small fraction of the sweep
coordinate's distribution tails tightens the bounding box, which makes
offlining thresholds kick in earlier.
"""

from __future__ import annotations

import json
from typing import Iterable, NamedTuple

import numpy as np

from .geometry import Point3


class DegenerateSampleError(ValueError):
    """Covariance carries no directional information (rank 0)."""


class Rotation3(NamedTuple):
    """Row-orthonormal proper rotation, rows ordered by descending variance."""

    rows: tuple[Point3, Point3, Point3]

    def apply(self, p: Point3, centroid: Point3) -> Point3:
        px = p[0] - centroid[0]
        py = p[1] - centroid[1]
        pz = p[2] - centroid[2]
        r0, r1, r2 = self.rows
        return (r0[0] * px + r0[1] * py + r0[2] * pz,
                r1[0] * px + r1[1] * py + r1[2] * pz,
                r2[0] * px + r2[1] * py + r2[2] * pz)

    def invert(self, p: Point3, centroid: Point3) -> Point3:
        r0, r1, r2 = self.rows
        return (r0[0] * p[0] + r1[0] * p[1] + r2[0] * p[2] + centroid[0],
                r0[1] * p[0] + r1[1] * p[1] + r2[1] * p[2] + centroid[1],
                r0[2] * p[0] + r1[2] * p[1] + r2[2] * p[2] + centroid[2])

    def matrix(self) -> np.ndarray:
        return np.array(self.rows, dtype=float)


IDENTITY_ROTATION = Rotation3(((1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (0.0, 0.0, 1.0)))


class BoundingBox(NamedTuple):
    lo: Point3
    hi: Point3

    @property
    def diameter(self) -> float:
        dx = self.hi[0] - self.lo[0]
        dy = self.hi[1] - self.lo[1]
        dz = self.hi[2] - self.lo[2]
        return float(np.sqrt(dx * dx + dy * dy + dz * dz))

    def inflated(self, pad: float) -> "BoundingBox":
        return BoundingBox((self.lo[0] - pad, self.lo[1] - pad, self.lo[2] - pad),
                           (self.hi[0] + pad, self.hi[1] + pad, self.hi[2] + pad))

    def contains(self, p: Point3) -> bool:
        return (self.lo[0] <= p[0] <= self.hi[0]
                and self.lo[1] <= p[1] <= self.hi[1]
                and self.lo[2] <= p[2] <= self.hi[2])


def bounding_box(points: Iterable[Point3]) -> BoundingBox:
    arr = np.asarray(list(points) if not isinstance(points, np.ndarray) else points,
                     dtype=float)
    if arr.size == 0:
        raise ValueError("bounding box of an empty point set")
    lo = arr.min(axis=0)
    hi = arr.max(axis=0)
    return BoundingBox(tuple(lo.tolist()), tuple(hi.tolist()))


class MomentAccumulator:
    """Streaming first/second moments; mergeable across chunks."""

    def __init__(self):
        self.n = 0
        self.sum = np.zeros(3)
        self.sum_outer = np.zeros((3, 3))

    def add(self, chunk: np.ndarray) -> None:
        pts = np.asarray(chunk, dtype=float).reshape(-1, 3)
        self.n += pts.shape[0]
        self.sum += pts.sum(axis=0)
        self.sum_outer += pts.T @ pts

    def merge(self, other: "MomentAccumulator") -> None:
        self.n += other.n
        self.sum += other.sum
        self.sum_outer += other.sum_outer

    def covariance(self) -> tuple[np.ndarray, np.ndarray]:
        if self.n == 0:
            raise DegenerateSampleError("no points accumulated")
        mean = self.sum / self.n
        cov = self.sum_outer / self.n - np.outer(mean, mean)
        return mean, cov


def principal_axes(sample) -> tuple[Point3, Rotation3]:
    """Centroid and principal rotation of a point sample.

    Rows of the rotation are covariance eigenvectors sorted by
    descending eigenvalue.  The first two rows are sign-normalized so
    their largest-magnitude component is positive; the third row is
    their cross product, which pins the determinant to +1 (when the two
    conventions conflict, the proper-rotation invariant wins).
    """
    pts = np.asarray(sample, dtype=float).reshape(-1, 3)
    if pts.shape[0] < 4:
        raise ValueError("need at least 4 sample points")
    acc = MomentAccumulator()
    acc.add(pts)
    mean, cov = acc.covariance()
    if not np.any(np.abs(cov) > 0):
        raise DegenerateSampleError("all sample points identical")
    evals, evecs = np.linalg.eigh(cov)
    order = np.argsort(evals)[::-1]
    axes = evecs[:, order].T.copy()
    for i in (0, 1):
        k = int(np.argmax(np.abs(axes[i])))
        if axes[i][k] < 0:
            axes[i] = -axes[i]
    axes[2] = np.cross(axes[0], axes[1])
    rot = Rotation3((tuple(axes[0].tolist()),
                     tuple(axes[1].tolist()),
                     tuple(axes[2].tolist())))
    return tuple(mean.tolist()), rot


def transform(p: Point3, centroid: Point3, r: Rotation3) -> Point3:
    """Map p into sweep coordinates; the first output axis is the sweep axis."""
    return r.apply(p, centroid)


def inverse_transform(p: Point3, centroid: Point3, r: Rotation3) -> Point3:
    return r.invert(p, centroid)


def trim_interval(sweep_coords, fraction: float) -> tuple[float, float]:
    """Two-sided nearest-rank trim bounds on the sweep coordinate.

    Keeps the inclusive interval [lo, hi] where lo and hi sit at sorted
    ranks floor(n*fraction/2) and n-1-floor(n*fraction/2); callers drop
    sites strictly outside.  fraction == 0 keeps everything.
    """
    if not 0.0 <= fraction < 0.5:
        raise ValueError("trim fraction must be in [0, 0.5)")
    if isinstance(sweep_coords, np.ndarray):
        coords = sweep_coords.astype(float).ravel()
    else:
        coords = np.array(list(sweep_coords), dtype=float)
    if coords.size == 0:
        raise ValueError("trim interval of an empty stream")
    coords = np.sort(coords)
    k = int(np.floor(coords.size * fraction / 2.0))
    return float(coords[k]), float(coords[coords.size - 1 - k])


class TransformHeader(NamedTuple):
    """On-disk record of the sweep transform, for mapping outputs back."""

    centroid: Point3
    rotation: Rotation3
    trim_lo: float
    trim_hi: float
    trim_fraction: float

    def to_json(self) -> str:
        return json.dumps(
            {
                "centroid": list(self.centroid),
                "rotation": [list(row) for row in self.rotation.rows],
                "trim_interval": [self.trim_lo, self.trim_hi],
                "trim_fraction": self.trim_fraction,
            },
            indent=2,
            sort_keys=True,
        ) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "TransformHeader":
        obj = json.loads(text)
        rot = Rotation3(tuple(tuple(row) for row in obj["rotation"]))
        lo, hi = obj["trim_interval"]
        return cls(tuple(obj["centroid"]), rot, lo, hi, obj["trim_fraction"])


def write_header(path, header: TransformHeader) -> None:
    with open(path, "w") as fh:
        fh.write(header.to_json())


def read_header(path) -> TransformHeader:
    with open(path) as fh:
        return TransformHeader.from_json(fh.read())
