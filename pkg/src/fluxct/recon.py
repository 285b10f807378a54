"""Filtered back-projection producing the pixel-based attenuation matrix (PAM)."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ._textio import content_lines, fmt, write_atomic
from .errors import DataError, FormatError
from .projector import Mode


class Semantics(str, enum.Enum):
    LINEAR_ATTENUATION = "linear_attenuation_per_cm"
    HOUNSFIELD = "hounsfield"
    WEIGHTED_HOUNSFIELD = "weighted_hounsfield"
    LABELS = "labels"


@dataclass(frozen=True)
class ImageGrid:
    """2-D raster with a physical pixel size (mm) and a value-semantics tag."""

    data: np.ndarray
    pixel_size: float
    semantics: Semantics = Semantics.LINEAR_ATTENUATION

    def __post_init__(self):
        data = np.array(self.data, dtype=float)
        if data.ndim != 2 or min(data.shape) < 1:
            raise DataError("image must be a non-empty 2-D array")
        if not np.all(np.isfinite(data)):
            raise DataError("image values must be finite")
        if not self.pixel_size > 0:
            raise DataError("pixel size must be positive")
        data.flags.writeable = False
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "semantics", Semantics(self.semantics))

    @property
    def shape(self):
        return self.data.shape

    def with_data(self, data, semantics=None):
        return ImageGrid(data, self.pixel_size, self.semantics if semantics is None else semantics)


def ramlak_kernel(n, spacing=1.0):
    """Spatial Ram-Lak kernel for lags ``-(n-1) .. n-1``."""
    k = np.arange(-(n - 1), n)
    h = np.zeros(k.size)
    h[k == 0] = 1.0 / (4.0 * spacing**2)
    odd = k % 2 == 1
    h[odd] = -1.0 / (math.pi * k[odd] * spacing) ** 2
    return h


def ramp_filter(projection, spacing=1.0, window="ramlak"):
    """Filter one projection row by direct convolution with the Ram-Lak kernel.

    The result is scaled by `spacing` so that it approximates the continuous
    convolution integral. ``window="hamming"`` tapers the kernel with a Hamming
    window over its support.
    """
    p = np.asarray(projection, dtype=float)
    n = p.size
    if n < 2:
        raise DataError("ramp filter needs at least two detector samples")
    h = ramlak_kernel(n, spacing)
    if window == "hamming":
        h = h * np.hamming(h.size)
    elif window != "ramlak":
        raise DataError(f"unknown filter window {window!r}")
    full = np.convolve(p, h, mode="full")
    return spacing * full[n - 1 : 2 * n - 1]


def inverse_radon(sino, out_size=None, pixel_size=None, window="ramlak"):
    """Reconstruct a linear-attenuation image from a parallel sinogram.

    Detector offsets are in mm and values are line integrals of 1/cm
    coefficients over cm, so the filter works in cm. Angles should evenly
    cover a half or a full turn; the ``pi / n_angles`` factor is right in
    both cases.
    """
    g = sino.geometry
    if g.mode is not Mode.PARALLEL:
        raise DataError("inverse_radon needs a parallel sinogram; rebin fan data first")
    out_size = g.n_detectors if out_size is None else int(out_size)
    if out_size < 16:
        raise DataError("out_size must be >= 16")
    if pixel_size is None:
        pixel_size = g.n_detectors * g.detector_spacing / out_size
    spacing_cm = g.detector_spacing / 10.0

    coords = (np.arange(out_size) - (out_size - 1) / 2) * pixel_size
    x, y = np.meshgrid(coords, -coords)
    offsets = g.offsets
    image = np.zeros((out_size, out_size))
    for a, deg in enumerate(g.angles_deg):
        q = ramp_filter(sino.data[a], spacing_cm, window)
        th = math.radians(deg)
        s = x * math.cos(th) + y * math.sin(th)
        image += np.interp(s, offsets, q, left=0.0, right=0.0)
    image *= math.pi / g.n_angles
    return ImageGrid(image, pixel_size, Semantics.LINEAR_ATTENUATION)


# -- IMG / PGM formats --------------------------------------------------------


def format_image(img):
    h, w = img.shape
    header = f"IMG {w} {h} {fmt(img.pixel_size)} {img.semantics.value}"
    rows = [" ".join(fmt(v) for v in row) for row in img.data]
    return header + "\n" + "\n".join(rows) + "\n"


def parse_image(text, path=None):
    lines = list(content_lines(text))
    if not lines:
        raise FormatError("empty image file", path, 1)
    lineno, header = lines[0]
    parts = header.split()
    if len(parts) != 5 or parts[0] != "IMG":
        raise FormatError("expected header 'IMG <W> <H> <pixel_size_mm> <semantics>'", path, lineno)
    try:
        w, h, ps = int(parts[1]), int(parts[2]), float(parts[3])
        sem = Semantics(parts[4])
    except ValueError as exc:
        raise FormatError(f"bad header: {exc}", path, lineno) from None
    body = lines[1:]
    if len(body) != h:
        raise FormatError(f"expected {h} rows, found {len(body)}", path, lineno)
    data = np.empty((h, w))
    for r, (lineno, line) in enumerate(body):
        cols = line.split()
        if len(cols) != w:
            raise FormatError(f"expected {w} values, found {len(cols)}", path, lineno)
        try:
            data[r] = [float(c) for c in cols]
        except ValueError:
            raise FormatError("non-numeric pixel value", path, lineno) from None
    try:
        return ImageGrid(data, ps, sem)
    except DataError as exc:
        raise FormatError(str(exc), path) from None


def read_image(path):
    path = Path(path)
    return parse_image(path.read_text(encoding="utf-8"), path)


def write_image(path, img):
    write_atomic(path, format_image(img))


# 12-bit clinical HU range used for fixed 8-bit renderings.
CLINICAL_HU_RANGE = (-1024.0, 3071.0)


def to_uint8(img, value_range=CLINICAL_HU_RANGE, maxval=255):
    """Clip to `value_range` and map linearly onto integers ``0..maxval``.

    A fixed range keeps renderings of different images comparable; pass
    ``None`` to stretch each image over its own min..max instead.
    """
    data = np.asarray(getattr(img, "data", img), dtype=float)
    lo, hi = (float(data.min()), float(data.max())) if value_range is None else value_range
    if hi <= lo:
        return np.zeros(data.shape, dtype=np.uint8 if maxval < 256 else np.int64)
    scaled = np.rint((np.clip(data, lo, hi) - lo) / (hi - lo) * maxval)
    return scaled.astype(np.uint8 if maxval < 256 else np.int64)


def to_pgm(img, window=None, level=None, maxval=255):
    """Render an image as plain PGM (P2) text.

    `window`/`level` select the displayed value range ``level +- window/2``;
    values outside are clipped. Without them the image min/max is used.
    """
    if window is None or level is None:
        value_range = None
    else:
        value_range = (level - window / 2.0, level + window / 2.0)
    scaled = to_uint8(img, value_range, maxval)
    h, w = scaled.shape
    rows = [" ".join(str(v) for v in row) for row in scaled.tolist()]
    return f"P2\n{w} {h}\n{maxval}\n" + "\n".join(rows) + "\n"


def write_pgm(path, img, window=None, level=None):
    write_atomic(path, to_pgm(img, window, level))
