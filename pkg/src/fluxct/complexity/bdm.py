"""Layered Block Decomposition Method over precomputed CTM tables.

The shipped tables (2x2, 3x3, 4x4 binary blocks) are the published 2-D
Turing-machine CTM estimates, expanded from canonical forms to every bit
pattern. Pattern keys are row-major bit strings.
"""

from __future__ import annotations

import gzip
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .._textio import content_lines, fmt, write_atomic
from ..errors import DataError, FormatError

_SHIPPED = {2: "ctm_2x2.txt", 3: "ctm_3x3.txt", 4: "ctm_4x4.txt.gz"}


@dataclass(frozen=True)
class CTMTable:
    """CTM value (bits) per binary block, keyed by the block's integer code.

    The code reads the block row-major with the first cell as the most
    significant bit, so it matches the bit-string key in the text format.
    """

    block_edge: int
    values: dict

    def __post_init__(self):
        if self.block_edge < 1:
            raise DataError("block edge must be positive")
        if not self.values:
            raise DataError("CTM table is empty")
        if any(v <= 0 for v in self.values.values()):
            raise DataError("CTM values must be positive")
        limit = 1 << (self.block_edge**2)
        if any(not 0 <= k < limit for k in self.values):
            raise DataError("CTM key out of range for the block size")

    @property
    def complete(self):
        return len(self.values) == 1 << (self.block_edge**2)

    @property
    def max_value(self):
        return max(self.values.values())

    def key_of(self, code):
        return format(code, f"0{self.block_edge**2}b")

    def __getitem__(self, pattern):
        if isinstance(pattern, str):
            pattern = int(pattern, 2)
        return self.values[pattern]


def parse_ctm(text, path=None):
    lines = list(content_lines(text))
    if not lines:
        raise FormatError("empty CTM file", path, 1)
    lineno, header = lines[0]
    parts = header.split()
    if len(parts) != 2 or parts[0] != "CTM":
        raise FormatError("expected header 'CTM <block_edge>'", path, lineno)
    try:
        edge = int(parts[1])
    except ValueError:
        raise FormatError("block edge must be an integer", path, lineno) from None
    nbits = edge * edge
    values = {}
    for lineno, line in lines[1:]:
        cols = line.split()
        if len(cols) != 2 or len(cols[0]) != nbits or set(cols[0]) - {"0", "1"}:
            raise FormatError(f"expected '<{nbits}-bit string> <ctm_bits>'", path, lineno)
        try:
            values[int(cols[0], 2)] = float(cols[1])
        except ValueError:
            raise FormatError("CTM value is not a number", path, lineno) from None
    try:
        return CTMTable(edge, values)
    except DataError as exc:
        raise FormatError(str(exc), path) from None


def format_ctm(table):
    rows = [f"CTM {table.block_edge}"]
    rows += [f"{table.key_of(k)} {fmt(table.values[k])}" for k in sorted(table.values)]
    return "\n".join(rows) + "\n"


def read_ctm(path):
    path = Path(path)
    raw = path.read_bytes()
    if path.suffix == ".gz":
        raw = gzip.decompress(raw)
    return parse_ctm(raw.decode("utf-8"), path)


def write_ctm(path, table):
    write_atomic(path, format_ctm(table))


def shipped_ctm(block_edge=2):
    """Load a bundled CTM table (edge 2, 3 or 4)."""
    try:
        name = _SHIPPED[block_edge]
    except KeyError:
        raise DataError(f"no bundled CTM table for {block_edge}x{block_edge} blocks") from None
    raw = resources.files("fluxct.data").joinpath(name).read_bytes()
    if name.endswith(".gz"):
        raw = gzip.decompress(raw)
    return parse_ctm(raw.decode("utf-8"), name)


def quantize_levels(data, q, value_range=None):
    """Map values onto integer levels 0..q-1 over `value_range` (default min..max)."""
    a = np.asarray(data, dtype=float)
    lo, hi = (float(a.min()), float(a.max())) if value_range is None else map(float, value_range)
    if hi <= lo:
        return np.zeros(a.shape, dtype=np.int64)
    levels = np.floor((np.clip(a, lo, hi) - lo) / (hi - lo) * q).astype(np.int64)
    return np.clip(levels, 0, q - 1)


def block_codes(binary, block_size, offset):
    """Integer codes of all complete blocks taken every `offset` pixels."""
    b = np.asarray(binary, dtype=np.int64)
    if b.shape[0] < block_size or b.shape[1] < block_size:
        return np.zeros(0, dtype=np.int64)
    win = sliding_window_view(b, (block_size, block_size))[::offset, ::offset]
    flat = win.reshape(-1, block_size * block_size)
    weights = 1 << np.arange(block_size * block_size - 1, -1, -1, dtype=np.int64)
    return flat @ weights


def layer_block_counts(img, block_size, offset, q, value_range=None, slicing="cumulative"):
    """Occurrence count of every distinct block across all q binary layers.

    ``slicing="cumulative"`` makes layer l the pixels with level >= l;
    ``"equality"`` makes it the pixels with level == l.
    """
    if slicing not in ("cumulative", "equality"):
        raise DataError(f"unknown layer slicing {slicing!r}")
    data = getattr(img, "data", img)
    levels = quantize_levels(data, q, value_range)
    totals = {}
    for layer in range(q):
        mask = levels >= layer if slicing == "cumulative" else levels == layer
        codes, counts = np.unique(block_codes(mask, block_size, offset), return_counts=True)
        for c, n in zip(codes.tolist(), counts.tolist()):
            totals[c] = totals.get(c, 0) + n
    return totals


def layered_bdm(img, ctm, block_size=None, offset=None, q=256, value_range=None,
                slicing="cumulative", fallback=False):
    """Layered BDM in bits: sum over distinct blocks of ``CTM(block) + log2(count)``.

    Parameters
    ----------
    img : ImageGrid or 2-D array
    ctm : CTMTable
    block_size : int
        Must equal ``ctm.block_edge`` (default).
    offset : int
        Block stride, ``1 <= offset <= block_size`` (default: block_size).
    q : int
        Number of quantisation levels, one binary layer each.
    value_range : (lo, hi), optional
        Fixed quantisation range; min..max of the image when omitted.
    fallback : bool
        Charge unknown blocks the table's maximum instead of raising.
    """
    block_size = ctm.block_edge if block_size is None else block_size
    offset = block_size if offset is None else offset
    if block_size != ctm.block_edge:
        raise DataError(f"block size {block_size} does not match CTM table edge {ctm.block_edge}")
    if not 1 <= offset <= block_size:
        raise DataError("offset must lie in [1, block_size]")
    if q < 2:
        raise DataError("need at least two quantisation levels")
    counts = layer_block_counts(img, block_size, offset, q, value_range, slicing)
    total = 0.0
    for code in sorted(counts):
        value = ctm.values.get(code)
        if value is None:
            if not fallback:
                raise DataError(f"block {ctm.key_of(code)} missing from CTM table")
            value = ctm.max_value
        total += value + math.log2(counts[code])
    return total


def bdm_from_counts(counts, ctm):
    return sum(ctm.values[c] + math.log2(n) for c, n in sorted(counts.items()))
