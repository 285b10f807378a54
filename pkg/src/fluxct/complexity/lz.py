"""Lempel-Ziv pattern complexity and LZW compressed length."""

from __future__ import annotations

import math

import numpy as np

from ..errors import DataError
from .stats import as_series


def binarize_by_mean(series):
    """1 where a sample is >= the series mean, else 0."""
    s = as_series(series)
    return (s >= s.mean()).astype(np.uint8)


def lz76_phrase_count(bits):
    """Number of phrases c(N) in the Lempel-Ziv (1976) parsing.

    A new phrase is extended while it can still be copied from the text that
    precedes its last symbol; an unfinished phrase at the end counts as one.
    """
    s = "".join("1" if b else "0" for b in np.asarray(bits).ravel())
    n = len(s)
    if n == 0:
        return 0
    c = 1
    i = 1  # start of the current phrase
    while i < n:
        length = 1
        # An occurrence of a longer phrase is also one of its prefix, so the
        # search resumes from the last hit and first grows along it.
        pos = 0
        while i + length <= n:
            pos = s.find(s[i : i + length], pos, i + length - 1)
            if pos < 0:
                break
            while i + length < n and s[pos + length] == s[i + length]:
                length += 1
            length += 1
        c += 1
        i += length
    return c


def lz_complexity(bits):
    """Normalised complexity ``C_k = c(N) log2(N) / N``."""
    b = np.asarray(bits).ravel()
    n = b.size
    if n < 2:
        raise DataError("LZ complexity needs at least two symbols")
    return lz76_phrase_count(b) * math.log2(n) / n


LZW_CODE_BITS = 12


def lzw_codes(data):
    """LZW code stream with a 256-entry initial dictionary.

    The dictionary holds at most ``2**12`` entries and is reset to the 256 byte
    literals once full.
    """
    data = bytes(data)
    if not data:
        raise DataError("LZW input is empty")
    limit = 1 << LZW_CODE_BITS
    table = {bytes([i]): i for i in range(256)}
    codes = []
    w = b""
    for byte in data:
        wc = w + bytes([byte])
        if wc in table:
            w = wc
            continue
        codes.append(table[w])
        if len(table) < limit:
            table[wc] = len(table)
        else:
            table = {bytes([i]): i for i in range(256)}
        w = bytes([byte])
    codes.append(table[w])
    return codes


def lzw_compressed_length(data):
    """Length in bits of the fixed 12-bit LZW encoding of `data`."""
    return len(lzw_codes(data)) * LZW_CODE_BITS


def lzw_decode(codes):
    """Inverse of :func:`lzw_codes`; used to check the encoder round-trips."""
    limit = 1 << LZW_CODE_BITS
    table = {i: bytes([i]) for i in range(256)}
    out = bytearray()
    prev = None
    for code in codes:
        if code in table:
            entry = table[code]
        elif prev is not None and code == len(table):
            entry = prev + prev[:1]
        else:
            raise DataError(f"invalid LZW code {code}")
        out += entry
        if prev is not None:
            if len(table) < limit:
                table[len(table)] = prev + entry[:1]
            else:
                table = {i: bytes([i]) for i in range(256)}
                prev = entry
                continue
        prev = entry
    return bytes(out)
