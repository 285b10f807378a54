"""Regularity statistics over 1-D series. All logarithms are natural.

Template distances are Chebyshev (max-abs) throughout.
"""

from __future__ import annotations

import math

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..errors import DataError, InsufficientMatchesError
from .stats import as_series

# Element budget per block when forming pairwise distance matrices.
_BLOCK_ELEMENTS = 1 << 23


def default_tolerance(series, factor=0.2):
    """``factor * std`` (population std)."""
    return factor * float(np.std(as_series(series)))


def _templates(s, m, count=None):
    t = sliding_window_view(s, m)
    return t if count is None else t[:count]


def _match_counts(s, m, n_m, n_m1, r, strict):
    """Per template, how many templates (itself included) lie within r.

    Returns counts for the first `n_m` templates of length m (against each
    other) and the first `n_m1 <= n_m` templates of length m + 1. Chebyshev
    matching of length-k templates is the AND of k shifted single-sample
    matches, so the longer templates reuse the shorter ones' match matrix.
    """
    out_m = np.empty(n_m, dtype=np.int64)
    out_m1 = np.empty(n_m1, dtype=np.int64)
    cmp = np.less if strict else np.less_equal
    step = max(1, _BLOCK_ELEMENTS // max(n_m, 1))
    buf = np.empty((min(step, n_m), n_m))
    hit = np.empty(buf.shape, dtype=bool)
    match = np.empty(buf.shape, dtype=bool)
    for start in range(0, n_m, step):
        stop = min(n_m, start + step)
        rows = stop - start
        d, h, mt = buf[:rows], hit[:rows], match[:rows]
        for k in range(m):
            col = s[k : k + n_m]
            np.subtract(col[start:stop, None], col[None, :], out=d)
            np.abs(d, out=d)
            cmp(d, r, out=h if k else mt)
            if k:
                mt &= h
        out_m[start:stop] = np.count_nonzero(mt, axis=1)
        if start < n_m1:
            stop1 = min(stop, n_m1)
            rows1 = stop1 - start
            col = s[m : m + n_m1]
            d1, h1 = buf[:rows1, :n_m1], hit[:rows1, :n_m1]
            np.subtract(col[start:stop1, None], col[None, :], out=d1)
            np.abs(d1, out=d1)
            cmp(d1, r, out=h1)
            h1 &= mt[:rows1, :n_m1]
            out_m1[start:stop1] = np.count_nonzero(h1, axis=1)
    return out_m, out_m1


def _check(s, m, r):
    if m < 1:
        raise DataError("embedding dimension must be >= 1")
    if s.size <= m + 1:
        raise DataError(f"series of length {s.size} too short for m={m}")
    if not r > 0:
        raise DataError("tolerance r must be positive")


def approximate_entropy(series, m=2, r=None):
    """Pincus' ApEn: ``Phi^m(r) - Phi^(m+1)(r)``, self-matches included, ``d <= r``."""
    s = as_series(series)
    r = default_tolerance(s) if r is None else r
    if r == 0 and np.ptp(s) == 0:
        return 0.0
    _check(s, m, r)
    n = s.size
    c_m, c_m1 = _match_counts(s, m, n - m + 1, n - m, r, strict=False)
    phi_m = float(np.mean(np.log(c_m / (n - m + 1))))
    phi_m1 = float(np.mean(np.log(c_m1 / (n - m))))
    return phi_m - phi_m1


def sample_entropy(series, m=2, r=None):
    """Richman-Moorman SampEn ``-ln(A/B)``.

    B counts pairs of length-m templates closer than r (``d < r``), A the
    same for length m+1; both use the first ``N - m`` templates and exclude
    self-matches. A constant series with ``r > 0`` gives ``A = B`` and 0;
    with ``r = 0`` no pair qualifies and the estimate is undefined.
    """
    s = as_series(series)
    r = default_tolerance(s) if r is None else r
    if r == 0:
        # Nothing is strictly closer than zero, so neither A nor B can count a pair.
        raise InsufficientMatchesError("insufficient matches (A=0, B=0) at r=0; SampEn undefined")
    _check(s, m, r)
    n = s.size
    count = n - m
    c_m, c_m1 = _match_counts(s, m, count, count, r, strict=True)
    b = int(c_m.sum() - count)
    a = int(c_m1.sum() - count)
    if a == 0 or b == 0:
        raise InsufficientMatchesError(f"insufficient matches (A={a}, B={b}); SampEn undefined")
    return -math.log(a / b)


def _fuzzy_phi(s, k, count, n_grad, r):
    t = _templates(s, k, count)
    t = t - t.mean(axis=1, keepdims=True)
    n = t.shape[0]
    cols = [np.ascontiguousarray(t[:, j]) for j in range(k)]
    total = 0.0
    step = max(1, _BLOCK_ELEMENTS // n)
    buf = np.empty((min(step, n), n))
    tmp = np.empty_like(buf)
    for start in range(0, n, step):
        stop = min(n, start + step)
        d, e = buf[: stop - start], tmp[: stop - start]
        np.subtract(cols[0][start:stop, None], cols[0][None, :], out=d)
        np.abs(d, out=d)
        for c in cols[1:]:
            np.subtract(c[start:stop, None], c[None, :], out=e)
            np.abs(e, out=e)
            np.maximum(d, e, out=d)
        np.power(d, n_grad, out=d)
        d *= -1.0 / r
        np.exp(d, out=d)
        total += float(d.sum()) - (stop - start)  # drop j == i
    return total / (n * (n - 1))


def fuzzy_entropy(series, m=2, n_grad=2, r=None):
    """FuzzyEn ``ln phi^m - ln phi^(m+1)`` with similarity ``exp(-d^n / r)``.

    Templates are mean-centred; the first ``N - m`` templates are used at
    both lengths.
    """
    s = as_series(series)
    r = default_tolerance(s) if r is None else r
    if r == 0 and np.ptp(s) == 0:
        return 0.0
    _check(s, m, r)
    if n_grad < 1:
        raise DataError("similarity gradient must be >= 1")
    count = s.size - m
    pm = _fuzzy_phi(s, m, count, n_grad, r)
    pm1 = _fuzzy_phi(s, m + 1, count, n_grad, r)
    if pm <= 0 or pm1 <= 0:
        raise InsufficientMatchesError("fuzzy similarity underflowed to zero")
    return math.log(pm) - math.log(pm1)


def ordinal_patterns(series, order):
    """Lehmer-code index of the ordinal pattern of every window (stable ties)."""
    s = as_series(series)
    w = sliding_window_view(s, order)
    ranks = np.argsort(w, axis=1, kind="stable")
    codes = np.zeros(w.shape[0], dtype=np.int64)
    for i in range(order):
        smaller = np.sum(ranks[:, i + 1 :] < ranks[:, i : i + 1], axis=1)
        codes = codes * (order - i) + smaller
    return codes


def permutation_entropy(series, order=4):
    """Shannon entropy of ordinal-pattern frequencies over ``T - n + 1`` windows."""
    s = as_series(series)
    if not 2 <= order <= 7:
        raise DataError("permutation order must lie in [2, 7]")
    if s.size < order + 1:
        raise DataError(f"series of length {s.size} too short for order {order}")
    _, counts = np.unique(ordinal_patterns(s, order), return_counts=True)
    return _shannon(counts)


def _shannon(counts):
    p = np.asarray(counts, dtype=float)
    p = p[p > 0] / p.sum()
    return float(max(0.0, -np.sum(p * np.log(p))))


def conditional_entropy(joint):
    """``H(Y|X) = sum p(x,y) ln(p(x) / p(x,y))`` for a count table indexed [x, y]."""
    c = np.asarray(joint, dtype=float)
    if c.ndim != 2 or np.any(c < 0) or c.sum() <= 0:
        raise DataError("joint table must be a non-negative 2-D array with positive total")
    p = c / c.sum()
    px = p.sum(axis=1, keepdims=True)
    nz = p > 0
    ratio = np.where(nz, np.broadcast_to(px, p.shape) / np.where(nz, p, 1.0), 1.0)
    return float(max(0.0, np.sum(p[nz] * np.log(ratio[nz]))))


def joint_counts(x_labels, y_labels):
    x = np.asarray(x_labels).ravel()
    y = np.asarray(y_labels).ravel()
    if x.size != y.size:
        raise DataError("label arrays differ in length")
    _, xi = np.unique(x, return_inverse=True)
    _, yi = np.unique(y, return_inverse=True)
    table = np.zeros((xi.max() + 1, yi.max() + 1), dtype=np.int64)
    np.add.at(table, (xi, yi), 1)
    return table


def uniform_quantize(series, levels):
    s = as_series(series)
    lo, hi = s.min(), s.max()
    if hi == lo:
        return np.zeros(s.size, dtype=np.int64)
    q = np.floor((s - lo) / (hi - lo) * levels).astype(np.int64)
    return np.clip(q, 0, levels - 1)


def corrected_conditional_entropy(series, l_max=8, bins=6):
    """Porta's corrected conditional entropy.

    Returns
    -------
    minimum : float
        ``min_L CCE(L)``.
    profile : list of dict
        Per L: block entropy, conditional entropy CE, singleton fraction perc
        and CCE = CE + perc * E(1).
    """
    if bins < 2 or l_max < 2:
        raise DataError("CCE needs bins >= 2 and l_max >= 2")
    symbols = uniform_quantize(series, bins)
    if symbols.size <= l_max:
        raise DataError("series shorter than the largest pattern length")
    prev = 0.0
    e1 = None
    profile = []
    for length in range(1, l_max + 1):
        windows = sliding_window_view(symbols, length)
        codes = np.zeros(windows.shape[0], dtype=np.int64)
        for k in range(length):
            codes = codes * bins + windows[:, k]
        _, counts = np.unique(codes, return_counts=True)
        e_l = _shannon(counts)
        if e1 is None:
            e1 = e_l
        # Sliding-window block entropies can dip by rounding-level amounts.
        ce = max(0.0, e_l - prev)
        perc = float(np.sum(counts == 1)) / windows.shape[0]
        profile.append(dict(L=length, entropy=e_l, ce=ce, perc=perc, cce=ce + perc * e1))
        prev = e_l
    return min(p["cce"] for p in profile), profile
