"""Binary site-table format and CSV ingestion.

A site file is a headerless sequence of little-endian 28-byte records:
a 4-byte unsigned id followed by three 8-byte doubles.  The CSV variant
is ``id,x,y,z`` with an optional header line.
"""

from __future__ import annotations

import os

import numpy as np

SITE_DTYPE = np.dtype([("id", "<u4"), ("x", "<f8"), ("y", "<f8"), ("z", "<f8")])
RECORD_SIZE = SITE_DTYPE.itemsize  # 28


class SiteFileError(ValueError):
    """Malformed site file (size not a whole number of records)."""


def count_records(path) -> int:
    size = os.stat(path).st_size
    if size % RECORD_SIZE:
        raise SiteFileError(f"{path}: size {size} is not a multiple of {RECORD_SIZE}")
    return size // RECORD_SIZE


def read_sites(path) -> np.ndarray:
    count_records(path)
    return np.fromfile(path, dtype=SITE_DTYPE)


def write_sites(path, records: np.ndarray) -> None:
    np.asarray(records, dtype=SITE_DTYPE).tofile(path)


def iter_chunks(path, chunk_records: int):
    """Yield successive record arrays of at most chunk_records each."""
    total = count_records(path)
    with open(path, "rb") as fh:
        done = 0
        while done < total:
            n = min(chunk_records, total - done)
            chunk = np.fromfile(fh, dtype=SITE_DTYPE, count=n)
            if chunk.size == 0:
                break
            done += chunk.size
            yield chunk


def sites_from_arrays(ids, xs, ys, zs) -> np.ndarray:
    out = np.empty(len(ids), dtype=SITE_DTYPE)
    out["id"] = ids
    out["x"] = xs
    out["y"] = ys
    out["z"] = zs
    return out


def csv_to_binary(csv_path, bin_path) -> int:
    """Convert an ``id,x,y,z`` text table to the binary format.

    Returns the number of records written.  A first line that does not
    parse as numbers is treated as a header and skipped.
    """
    skip = 0
    with open(csv_path) as fh:
        first = fh.readline()
    if first:
        parts = first.strip().split(",")
        try:
            int(parts[0]), float(parts[1]), float(parts[2]), float(parts[3])
        except (ValueError, IndexError):
            skip = 1
    raw = np.loadtxt(csv_path, delimiter=",", skiprows=skip, ndmin=2)
    if raw.size and raw.shape[1] != 4:
        raise SiteFileError(f"{csv_path}: expected 4 columns, got {raw.shape[1]}")
    recs = sites_from_arrays(raw[:, 0].astype(np.uint32), raw[:, 1], raw[:, 2], raw[:, 3])
    write_sites(bin_path, recs)
    return len(recs)


def binary_to_csv(bin_path, csv_path, header: bool = True) -> int:
    recs = read_sites(bin_path)
    with open(csv_path, "w") as fh:
        if header:
            fh.write("id,x,y,z\n")
        for rec in recs:
            fh.write(f"{int(rec['id'])},{rec['x']!r},{rec['y']!r},{rec['z']!r}\n")
    return len(recs)
