"""Morphological richness and the power spectrum of its threshold signal."""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..errors import DataError, NumericError
from .stats import as_series

N_CONFIGURATIONS = 512
_WEIGHTS = 1 << np.arange(8, -1, -1, dtype=np.int64)


def window_patterns(binary):
    """Set of 3x3 pattern codes over all stride-1 windows."""
    b = np.asarray(getattr(binary, "data", binary))
    if b.ndim != 2 or b.shape[0] < 3 or b.shape[1] < 3:
        raise DataError("morphological richness needs a 2-D image of at least 3x3")
    bits = (b != 0).astype(np.int64)
    codes = sliding_window_view(bits, (3, 3)).reshape(-1, 9) @ _WEIGHTS
    return set(np.unique(codes).tolist())


def morphological_richness(binary):
    """Fraction of the 512 possible 3x3 binary configurations present."""
    return len(window_patterns(binary)) / N_CONFIGURATIONS


def mr_signal(img, n_thresholds=64):
    """Richness of the image binarised (``>= t``) at evenly spaced thresholds min..max."""
    data = np.asarray(getattr(img, "data", img), dtype=float)
    if n_thresholds < 8:
        raise DataError("need at least 8 thresholds")
    lo, hi = float(data.min()), float(data.max())
    if hi == lo:
        raise NumericError("richness signal is undefined for a constant image")
    thresholds = np.linspace(lo, hi, n_thresholds)
    return np.array([morphological_richness(data >= t) for t in thresholds])


def dft(series):
    """Direct O(N^2) discrete Fourier transform, ``F_k = sum_t s_t exp(-2 pi i k t / N)``."""
    s = as_series(series)
    n = s.size
    t = np.arange(n)
    out = np.empty(n, dtype=complex)
    step = max(1, (1 << 22) // n)
    for k0 in range(0, n, step):
        k = np.arange(k0, min(n, k0 + step))
        # Reducing k*t mod N first keeps the phase argument small and exact.
        phase = np.exp(-2j * np.pi * (np.outer(k, t) % n) / n)
        out[k0 : k0 + k.size] = phase @ s
    return out


def power_spectrum(series, method="direct"):
    """One-sided power ``|F_k|^2 / N`` for ``k = 0 .. N // 2``."""
    s = as_series(series)
    if s.size < 4:
        raise DataError("power spectrum needs at least 4 samples")
    if method == "direct":
        f = dft(s)
    elif method == "fft":
        f = np.fft.fft(s)
    else:
        raise DataError(f"unknown DFT method {method!r}")
    return np.abs(f[: s.size // 2 + 1]) ** 2 / s.size


def two_sided_total(power, n):
    """Sum of ``|F_k|^2 / N`` over all N bins, rebuilt from the one-sided power."""
    p = np.asarray(power, dtype=float)
    if n % 2 == 0:
        return float(p[0] + 2 * p[1:-1].sum() + p[-1])
    return float(p[0] + 2 * p[1:].sum())
