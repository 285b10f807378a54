"""Histogram binning, correlation measures and LOWESS smoothing."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata

from ..errors import DataError, NumericError


def as_series(values):
    """Flatten images (row-major) or sequences to a finite 1-D float array."""
    data = getattr(values, "data", values)
    s = np.asarray(data, dtype=float).ravel()
    if s.size == 0:
        raise DataError("series is empty")
    if not np.all(np.isfinite(s)):
        raise DataError("series contains non-finite values")
    return s


@dataclass(frozen=True)
class Histogram:
    edges: np.ndarray
    counts: np.ndarray

    @property
    def centres(self):
        return 0.5 * (self.edges[1:] + self.edges[:-1])


def scott_bins(series):
    """Scott's normal reference rule: width ``3.5 sigma / n^(1/3)`` and bin count.

    Sigma is the sample standard deviation (ddof=1).
    """
    s = as_series(series)
    n = s.size
    if n < 2:
        raise DataError("Scott's rule needs at least two samples")
    sigma = float(np.std(s, ddof=1))
    if sigma == 0:
        raise NumericError("Scott's rule is undefined for a constant series")
    h = 3.5 * sigma / n ** (1.0 / 3.0)
    k = max(1, math.ceil((s.max() - s.min()) / h))
    return h, k


def scott_histogram(series):
    s = as_series(series)
    h, k = scott_bins(s)
    edges = s.min() + h * np.arange(k + 1)
    edges[-1] = max(edges[-1], s.max())
    counts, _ = np.histogram(s, bins=edges)
    return Histogram(edges, counts)


def digitize_scott(series):
    """Scott-bin index of every sample."""
    s = as_series(series)
    hist = scott_histogram(s)
    idx = np.searchsorted(hist.edges, s, side="right") - 1
    return np.clip(idx, 0, hist.counts.size - 1)


def pearson(x, y):
    x, y = as_series(x), as_series(y)
    if x.size != y.size:
        raise DataError("series lengths differ")
    if x.size < 2:
        raise DataError("correlation needs at least two samples")
    dx = x - x.mean()
    dy = y - y.mean()
    sxx = float(np.dot(dx, dx))
    syy = float(np.dot(dy, dy))
    if sxx == 0 or syy == 0:
        raise NumericError("correlation is undefined for a constant series")
    r = float(np.dot(dx, dy)) / math.sqrt(sxx * syy)
    return min(1.0, max(-1.0, r))


def spearman(x, y):
    """Pearson correlation of mid-ranks."""
    x, y = as_series(x), as_series(y)
    if x.size != y.size:
        raise DataError("series lengths differ")
    if x.size < 3:
        raise DataError("rank correlation needs at least three samples")
    return pearson(rankdata(x), rankdata(y))


def nonconstructability(hu_i, cct):
    """Correlation of a per-interval HU image with the conventional image."""
    if hu_i.shape != cct.shape:
        raise DataError("image dimensions differ")
    return pearson(hu_i, cct)


def generative_complexity(whu_i, cct):
    """Correlation of a flux-weighted HU image with the conventional image."""
    if whu_i.shape != cct.shape:
        raise DataError("image dimensions differ")
    return pearson(whu_i, cct)


def binned_correlation(image, reference, min_count=3):
    """Per-Scott-bin correlation of `image` against `reference`.

    Pixels are grouped by the Scott bin of their `image` value; bins with fewer
    than `min_count` pixels or a constant side are skipped.

    Returns
    -------
    centres, values : ndarray
    """
    x, y = as_series(image), as_series(reference)
    hist = scott_histogram(x)
    idx = digitize_scott(x)
    centres, values = [], []
    for b in range(hist.counts.size):
        sel = idx == b
        if sel.sum() < min_count:
            continue
        xs, ys = x[sel], y[sel]
        if np.ptp(xs) == 0 or np.ptp(ys) == 0:
            continue
        centres.append(hist.centres[b])
        values.append(pearson(xs, ys))
    return np.array(centres), np.array(values)


def lowess(x, y, frac=0.9):
    """Locally weighted linear regression with tricube weights.

    Each point is fitted from its ``ceil(frac * n)`` nearest neighbours in x.
    No robustness iterations.
    """
    x, y = as_series(x), as_series(y)
    n = x.size
    if y.size != n:
        raise DataError("series lengths differ")
    if n < 3:
        raise DataError("LOWESS needs at least three points")
    if not 0 < frac <= 1:
        raise DataError("frac must lie in (0, 1]")
    k = min(n, max(2, math.ceil(frac * n)))
    fitted = np.empty(n)
    for i in range(n):
        d = np.abs(x - x[i])
        h = np.partition(d, k - 1)[k - 1]
        if h == 0:
            w = (d == 0).astype(float)
        else:
            u = np.clip(d / h, 0.0, 1.0)
            w = (1 - u**3) ** 3
        sw = w.sum()
        mx = np.dot(w, x) / sw
        my = np.dot(w, y) / sw
        dx = x - mx
        var = np.dot(w, dx * dx)
        if var <= 1e-300:
            fitted[i] = my
        else:
            slope = np.dot(w, dx * (y - my)) / var
            fitted[i] = my + slope * (x[i] - mx)
    return fitted
