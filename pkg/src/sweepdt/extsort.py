"""External merge sort of site tables under a memory budget.

Run generation sorts budget-sized chunks in memory and spills them to
scratch files; a single k-way merge pass then produces the output.  The
sort order is (x, y, z, id), so equal sweep coordinates still have a
reproducible total order, which in turn pins down the insertion order
(and with it every symbolic-perturbation decision) downstream.
"""

from __future__ import annotations

import heapq
import os
import tempfile
from concurrent.futures import ThreadPoolExecutor
from typing import NamedTuple

import numpy as np

from .siteio import RECORD_SIZE, SITE_DTYPE, count_records

# A sorted chunk needs the records themselves plus key copies and the
# permutation while lexsorting; size chunks so the whole working set
# fits the budget.
_CHUNK_OVERHEAD_FACTOR = 3
_MERGE_BUFFER_RECORDS = 8192


class SortReport(NamedTuple):
    records: int
    runs: int
    peak_accounted_bytes: int
    budget: int


class ScratchSpaceError(OSError):
    pass


def _sort_chunk(chunk: np.ndarray) -> np.ndarray:
    order = np.lexsort((chunk["id"], chunk["z"], chunk["y"], chunk["x"]))
    return chunk[order]


class _RunReader:
    """Buffered reader over one sorted run, yielding plain tuples."""

    def __init__(self, path, buffer_records: int):
        self.fh = open(path, "rb")
        self.buffer_records = buffer_records
        self.buf: list[tuple] = []
        self.pos = 0

    def refill(self) -> bool:
        arr = np.fromfile(self.fh, dtype=SITE_DTYPE, count=self.buffer_records)
        if arr.size == 0:
            self.fh.close()
            return False
        self.buf = arr.tolist()
        self.pos = 0
        return True

    def next_rec(self):
        if self.pos >= len(self.buf):
            if not self.refill():
                return None
        rec = self.buf[self.pos]
        self.pos += 1
        return rec


def external_sort(input_path, budget_bytes: int, scratch_dir, output_path,
                  workers: int = 1) -> SortReport:
    """Sort a site file by (x, y, z, id) within a memory budget.

    ``budget_bytes`` governs chunk sizing for run generation and the
    merge buffers; the report carries the internally accounted peak.
    Budgets below 1 MiB are rejected (callers that promise the public
    64 MiB floor enforce it at the configuration layer).
    """
    if budget_bytes < 1 << 20:
        raise ValueError("sort budget must be at least 1 MiB")
    total = count_records(input_path)
    workers = max(1, workers)
    chunk_records = max(1, budget_bytes // (RECORD_SIZE * _CHUNK_OVERHEAD_FACTOR * workers))
    peak = 0

    run_paths: list[str] = []
    os.makedirs(scratch_dir, exist_ok=True)
    run_dir = tempfile.mkdtemp(prefix="sortruns_", dir=scratch_dir)

    def spill(chunk: np.ndarray, path: str) -> None:
        _sort_chunk(chunk).tofile(path)

    try:
        with open(input_path, "rb") as fh, ThreadPoolExecutor(max_workers=workers) as pool:
            pending = []
            while True:
                chunk = np.fromfile(fh, dtype=SITE_DTYPE, count=chunk_records)
                if chunk.size == 0:
                    break
                path = os.path.join(run_dir, f"run{len(run_paths):05d}.bin")
                run_paths.append(path)
                pending.append(pool.submit(spill, chunk, path))
                if len(pending) >= workers:
                    pending.pop(0).result()
                # records + key copies + permutation, per in-flight chunk
                live = min(len(pending) + 1, workers)
                peak = max(peak, live * chunk.size * RECORD_SIZE * _CHUNK_OVERHEAD_FACTOR)
            for fut in pending:
                fut.result()
    except OSError as exc:
        raise ScratchSpaceError(f"run generation failed: {exc}") from exc

    if not run_paths:
        open(output_path, "wb").close()
        os.rmdir(run_dir)
        return SortReport(0, 0, peak, budget_bytes)

    if len(run_paths) == 1:
        os.replace(run_paths[0], output_path)
        os.rmdir(run_dir)
        return SortReport(total, 1, peak, budget_bytes)

    buffer_records = max(1024, min(_MERGE_BUFFER_RECORDS,
                                   budget_bytes // (2 * RECORD_SIZE * len(run_paths))))
    readers = [_RunReader(p, buffer_records) for p in run_paths]
    heap = []
    for ridx, reader in enumerate(readers):
        rec = reader.next_rec()
        if rec is not None:
            sid, x, y, z = rec
            heap.append((x, y, z, sid, ridx))
    heapq.heapify(heap)

    out_buf: list[tuple] = []
    written = 0
    merge_peak = (len(run_paths) + 1) * buffer_records * RECORD_SIZE * 2
    peak = max(peak, merge_peak)
    with open(output_path, "wb") as out:
        while heap:
            x, y, z, sid, ridx = heapq.heappop(heap)
            out_buf.append((sid, x, y, z))
            rec = readers[ridx].next_rec()
            if rec is not None:
                nsid, nx, ny, nz = rec
                heapq.heappush(heap, (nx, ny, nz, nsid, ridx))
            if len(out_buf) >= buffer_records:
                np.array(out_buf, dtype=SITE_DTYPE).tofile(out)
                written += len(out_buf)
                out_buf.clear()
        if out_buf:
            np.array(out_buf, dtype=SITE_DTYPE).tofile(out)
            written += len(out_buf)

    for p in run_paths:
        try:
            os.remove(p)
        except OSError:
            pass
    try:
        os.rmdir(run_dir)
    except OSError:
        pass
    if written != total:
        raise ScratchSpaceError(f"merge produced {written} of {total} records")
    return SortReport(total, len(run_paths), peak, budget_bytes)


def sort_in_memory(records: np.ndarray) -> np.ndarray:
    """Reference order for tests: same key, no budget."""
    return _sort_chunk(np.asarray(records, dtype=SITE_DTYPE))
