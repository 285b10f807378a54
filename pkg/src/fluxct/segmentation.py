"""Fuzzy c-means clustering of pixel values and image-quality metrics."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import DataError, NumericError

PSNR_REPORT_CAP_DB = 99.0


@dataclass(frozen=True)
class FcmResult:
    centers: np.ndarray
    memberships: np.ndarray
    objective_trace: tuple
    n_iter: int
    shape: tuple = None

    @property
    def labels(self):
        return defuzzify(self)

    def label_image(self):
        lab = defuzzify(self)
        return lab.reshape(self.shape) if self.shape is not None else lab


def _memberships(x, centers, m):
    d = np.abs(x[:, None] - centers[None, :])
    zero = d == 0
    w = np.empty_like(d)
    hit = zero.any(axis=1)
    if np.any(~hit):
        dd = d[~hit]
        expo = 2.0 / (m - 1.0)
        # w_ij = 1 / sum_k (d_ij / d_ik)^expo, computed via the row minimum for range safety.
        ratio = (dd.min(axis=1, keepdims=True) / dd) ** expo
        w[~hit] = ratio / ratio.sum(axis=1, keepdims=True)
    if np.any(hit):
        # A pixel sitting on a centre belongs wholly to the first such centre.
        first = np.argmax(zero[hit], axis=1)
        rows = np.zeros((first.size, centers.size))
        rows[np.arange(first.size), first] = 1.0
        w[hit] = rows
    return w


def _objective(x, centers, w, m):
    return float(np.sum(w**m * (x[:, None] - centers[None, :]) ** 2))


def fcm(img, c=4, m=2.0, tol=1e-5, max_iter=300, seed=0):
    """Fuzzy c-means on pixel values.

    Memberships start from seeded random rows normalised to one. Each
    iteration recomputes centres as ``w^m``-weighted means, then memberships
    from the centre distances; the loop stops once no centre moves more than
    `tol` times the data range or after `max_iter` iterations. Measuring the
    shift relative to the range makes labels invariant under affine rescaling
    of the input. The objective is recorded after every membership update.
    """
    data = getattr(img, "data", img)
    shape = np.shape(data)
    x = np.asarray(data, dtype=float).ravel()
    if c < 2:
        raise DataError("need at least two clusters")
    if not m > 1:
        raise DataError("fuzzifier m must exceed 1")
    if x.size < c:
        raise DataError("fewer pixels than clusters")
    if np.unique(x).size < c:
        raise NumericError(f"fewer than {c} distinct values; cannot form {c} clusters")
    scale = float(np.ptp(x))
    rng = np.random.default_rng(seed)
    w = rng.random((x.size, c))
    w /= w.sum(axis=1, keepdims=True)
    centers = None
    trace = []
    it = 0
    for it in range(1, max_iter + 1):
        wm = w**m
        new_centers = (wm.T @ x) / wm.sum(axis=0)
        w = _memberships(x, new_centers, m)
        trace.append(_objective(x, new_centers, w, m))
        shift = np.inf if centers is None else float(np.max(np.abs(new_centers - centers))) / scale
        centers = new_centers
        if shift < tol:
            break
    return FcmResult(centers, w, tuple(trace), it, tuple(shape))


def defuzzify(res):
    """Arg-max membership per pixel; ties go to the lowest cluster index."""
    return np.argmax(res.memberships, axis=1)


def ordered_labels(res):
    """Labels renumbered so cluster 0 has the smallest centre."""
    order = np.argsort(res.centers, kind="stable")
    rank = np.empty_like(order)
    rank[order] = np.arange(order.size)
    return rank[defuzzify(res)]


# -- metrics ------------------------------------------------------------------


def _pair(a, b):
    a = np.asarray(getattr(a, "data", a), dtype=float)
    b = np.asarray(getattr(b, "data", b), dtype=float)
    if a.shape != b.shape:
        raise DataError(f"image shapes differ: {a.shape} vs {b.shape}")
    return a, b


def normalize01(img):
    """Min-max scale to [0, 1]; constant images map to zeros."""
    a = np.asarray(getattr(img, "data", img), dtype=float)
    lo, hi = a.min(), a.max()
    if hi == lo:
        return np.zeros_like(a)
    return (a - lo) / (hi - lo)


def mse(a, b):
    a, b = _pair(a, b)
    return float(np.mean((a - b) ** 2))


def psnr(a, b, max_value=1.0):
    """``10 log10(MAX^2 / MSE)`` in dB; ``inf`` for identical images."""
    err = mse(a, b)
    if err == 0:
        return math.inf
    return 10.0 * math.log10(max_value**2 / err)


def psnr_for_report(value):
    return min(value, PSNR_REPORT_CAP_DB)


def ssim(a, b, window=8, k1=0.01, k2=0.03, dynamic_range=1.0):
    """Mean SSIM over all stride-1 windows of a uniform `window` x `window` kernel."""
    a, b = _pair(a, b)
    if window > min(a.shape):
        raise DataError("SSIM window larger than the image")
    c1 = (k1 * dynamic_range) ** 2
    c2 = (k2 * dynamic_range) ** 2
    wa = sliding_window_view(a, (window, window))
    wb = sliding_window_view(b, (window, window))
    mu_a = wa.mean(axis=(-2, -1))
    mu_b = wb.mean(axis=(-2, -1))
    var_a = (wa * wa).mean(axis=(-2, -1)) - mu_a * mu_a
    var_b = (wb * wb).mean(axis=(-2, -1)) - mu_b * mu_b
    cov = (wa * wb).mean(axis=(-2, -1)) - mu_a * mu_b
    num = (2 * mu_a * mu_b + c1) * (2 * cov + c2)
    den = (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2)
    # Rounding can push identical windows a hair past 1.
    return float(np.clip(np.mean(num / den), -1.0, 1.0))


# FSIM constants. T2 is the published 160 for 8-bit data rescaled to [0, 1].
FSIM_SCALES = 4
FSIM_ORIENTATIONS = 4
FSIM_MIN_WAVELENGTH = 6.0
FSIM_MULT = 2.0
FSIM_SIGMA_ONF = 0.55
FSIM_K = 2.0
FSIM_T1 = 0.85
FSIM_T2 = 160.0 / 255.0**2


def _lowpass(rows, cols, cutoff=0.45, order=15):
    fy = np.fft.fftfreq(rows)[:, None]
    fx = np.fft.fftfreq(cols)[None, :]
    radius = np.sqrt(fx**2 + fy**2)
    return 1.0 / (1.0 + (radius / cutoff) ** (2 * order))


def phase_congruency(img):
    """Kovesi-style phase congruency from a log-Gabor bank.

    Energy along each orientation is summed over scales, reduced by a noise
    threshold estimated from the finest scale, and normalised by the summed
    amplitudes across all orientations.
    """
    a = np.asarray(getattr(img, "data", img), dtype=float)
    rows, cols = a.shape
    spectrum = np.fft.fft2(a)
    fy = np.fft.fftfreq(rows)[:, None]
    fx = np.fft.fftfreq(cols)[None, :]
    radius = np.sqrt(fx**2 + fy**2)
    radius[0, 0] = 1.0
    theta = np.arctan2(-fy, fx)
    lp = _lowpass(rows, cols)
    eps = 1e-4

    energy_total = np.zeros_like(a)
    amp_total = np.zeros_like(a)
    for o in range(FSIM_ORIENTATIONS):
        angle = o * np.pi / FSIM_ORIENTATIONS
        ds = np.sin(theta) * math.cos(angle) - np.cos(theta) * math.sin(angle)
        dc = np.cos(theta) * math.cos(angle) + np.sin(theta) * math.sin(angle)
        dtheta = np.abs(np.arctan2(ds, dc))
        spread = np.exp(-(dtheta**2) / (2 * (np.pi / FSIM_ORIENTATIONS / 1.2) ** 2))
        sum_e = np.zeros_like(a)
        sum_o = np.zeros_like(a)
        sum_an = np.zeros_like(a)
        noise_tau = None
        for sc in range(FSIM_SCALES):
            wavelength = FSIM_MIN_WAVELENGTH * FSIM_MULT**sc
            fo = 1.0 / wavelength
            log_gabor = np.exp(-(np.log(radius / fo) ** 2) / (2 * math.log(FSIM_SIGMA_ONF) ** 2))
            log_gabor[0, 0] = 0.0
            eo = np.fft.ifft2(spectrum * log_gabor * lp * spread)
            an = np.abs(eo)
            sum_e += eo.real
            sum_o += eo.imag
            sum_an += an
            if sc == 0:
                noise_tau = np.median(an) / math.sqrt(math.log(4))
        energy = np.sqrt(sum_e**2 + sum_o**2)
        # Rayleigh noise model on the finest scale, carried across scales.
        total_tau = noise_tau * (1 - (1 / FSIM_MULT) ** FSIM_SCALES) / (1 - 1 / FSIM_MULT)
        mean_noise = total_tau * math.sqrt(math.pi / 2)
        sigma_noise = total_tau * math.sqrt((4 - math.pi) / 2)
        threshold = mean_noise + FSIM_K * sigma_noise
        energy_total += np.maximum(energy - threshold, 0.0)
        amp_total += sum_an
    return energy_total / (amp_total + eps)


def scharr_gradient(img):
    a = np.asarray(getattr(img, "data", img), dtype=float)
    kx = np.array([[3, 0, -3], [10, 0, -10], [3, 0, -3]], dtype=float) / 16.0
    p = np.pad(a, 1, mode="edge")
    win = sliding_window_view(p, (3, 3))
    gx = np.einsum("ijkl,kl->ij", win, kx)
    gy = np.einsum("ijkl,kl->ij", win, kx.T)
    return np.hypot(gx, gy)


def fsim(a, b):
    """Feature similarity: phase-congruency weighted mean of PC and gradient similarity."""
    a, b = _pair(a, b)
    if min(a.shape) < 32:
        raise DataError("FSIM needs images of at least 32x32")
    pc_a = phase_congruency(a)
    pc_b = phase_congruency(b)
    pc_m = np.maximum(pc_a, pc_b)
    denom = float(pc_m.sum())
    if denom <= 0:
        raise NumericError("FSIM undefined: no phase congruency in either image")
    g_a = scharr_gradient(a)
    g_b = scharr_gradient(b)
    s_pc = (2 * pc_a * pc_b + FSIM_T1) / (pc_a * pc_a + pc_b * pc_b + FSIM_T1)
    s_g = (2 * g_a * g_b + FSIM_T2) / (g_a * g_a + g_b * g_b + FSIM_T2)
    return float(np.sum(s_pc * s_g * pc_m) / denom)


FSIM_CONSTANTS = dict(
    scales=FSIM_SCALES,
    orientations=FSIM_ORIENTATIONS,
    min_wavelength=FSIM_MIN_WAVELENGTH,
    mult=FSIM_MULT,
    sigma_onf=FSIM_SIGMA_ONF,
    k=FSIM_K,
    t1=FSIM_T1,
    t2=FSIM_T2,
)


def quality_metrics(img, reference):
    """MSE/PSNR/SSIM/FSIM of min-max normalised images (dynamic range 1)."""
    a = normalize01(img)
    r = normalize01(reference)
    value = psnr(a, r, 1.0)
    return dict(
        mse=mse(a, r),
        psnr=psnr_for_report(value),
        psnr_infinite=math.isinf(value),
        ssim=ssim(a, r),
        fsim=fsim(a, r),
    )
