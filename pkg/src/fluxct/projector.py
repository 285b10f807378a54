"""Analytic (Beer-Lambert) forward projection of a phantom raster.

Rays are straight lines parameterised by a normal angle ``theta`` and a signed
offset ``s`` from the rotation centre: ``p(t) = s * n + t * u`` with
``n = (cos theta, sin theta)`` and ``u = (-sin theta, cos theta)``. A fan ray at
source angle ``beta`` and fan angle ``gamma`` is the line
``theta = beta + gamma``, ``s = D sin gamma`` with the source at ``D * u(beta)``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from ._textio import content_lines, fmt, write_atomic
from .errors import DataError, FormatError
from .physics import Material, default_materials, linear_attenuation

N_MATERIALS = len(Material)
TRANSMISSION_FLOOR = 1e-12


class Mode(str, enum.Enum):
    PARALLEL = "parallel"
    FAN = "fan"


@dataclass(frozen=True)
class Geometry:
    """Acquisition geometry.

    In parallel mode detectors sit at offsets ``(d - (n-1)/2) * detector_spacing``
    mm. In fan mode they are equiangular across `fan_angle` degrees, the source
    sits `source_distance` mm from the rotation centre and `detector_spacing`
    is informational (arc spacing at the centre).
    """

    mode: Mode = Mode.PARALLEL
    n_angles: int = 360
    angle_step: float = 1.0
    n_detectors: int = 256
    detector_spacing: float = 12.0 / 256
    fan_angle: float = 6.8
    source_distance: float = 150.0

    def __post_init__(self):
        object.__setattr__(self, "mode", Mode(self.mode))
        if self.n_angles < 1 or self.n_detectors < 1:
            raise DataError("geometry needs at least one angle and one detector")
        if self.detector_spacing <= 0 or self.angle_step <= 0:
            raise DataError("detector spacing and angle step must be positive")
        if self.mode is Mode.FAN and (self.fan_angle <= 0 or self.source_distance <= 0):
            raise DataError("fan mode needs a positive fan angle and source distance")

    @property
    def angles_deg(self):
        return np.arange(self.n_angles) * self.angle_step

    @property
    def offsets(self):
        """Parallel detector offsets (mm)."""
        return (np.arange(self.n_detectors) - (self.n_detectors - 1) / 2) * self.detector_spacing

    @property
    def gamma_step(self):
        """Fan angular detector pitch in radians."""
        return math.radians(self.fan_angle) / self.n_detectors

    @property
    def gammas(self):
        return (np.arange(self.n_detectors) - (self.n_detectors - 1) / 2) * self.gamma_step

    def ray_lines(self, angle_index):
        """(theta, s) arrays for all detectors at one angle."""
        base = math.radians(self.angles_deg[angle_index])
        if self.mode is Mode.PARALLEL:
            return np.full(self.n_detectors, base), self.offsets
        g = self.gammas
        return base + g, self.source_distance * np.sin(g)


def parallel_geometry(phantom, n_angles=360, angle_step=1.0):
    """Default desk-scale geometry: one detector per phantom column."""
    return Geometry(
        Mode.PARALLEL,
        n_angles=n_angles,
        angle_step=angle_step,
        n_detectors=phantom.shape[1],
        detector_spacing=phantom.pixel_size,
    )


def fan_geometry(n_detectors=256, n_angles=360, angle_step=1.0, fan_angle=6.8, source_distance=150.0):
    spacing = source_distance * math.radians(fan_angle) / n_detectors
    return Geometry(Mode.FAN, n_angles, angle_step, n_detectors, spacing, fan_angle, source_distance)


@dataclass(frozen=True)
class Sinogram:
    """Projected attenuation, ``-ln(transmission)``, shaped (n_angles, n_detectors)."""

    data: np.ndarray
    geometry: Geometry

    def __post_init__(self):
        data = np.array(self.data, dtype=float)
        g = self.geometry
        if data.shape != (g.n_angles, g.n_detectors):
            raise DataError(f"sinogram shape {data.shape} != ({g.n_angles}, {g.n_detectors})")
        if not np.all(np.isfinite(data)):
            raise DataError("sinogram entries must be finite")
        data.flags.writeable = False
        object.__setattr__(self, "data", data)


def _lines_path_lengths(phantom, theta, s, t_start=None):
    """Per-material chord lengths (cm) of many lines through the raster.

    Vectorised Siddon traversal: all grid-line crossings of every ray are
    gathered, clipped to the ray's in-grid interval, sorted, and each segment
    is charged to the cell holding its midpoint.
    """
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    s = np.atleast_1d(np.asarray(s, dtype=float))
    h, w = phantom.shape
    ps = phantom.pixel_size
    ex, ey = w * ps, h * ps
    c, sn = np.cos(theta), np.sin(theta)
    ox, oy = s * c, s * sn  # foot point of the line
    dx, dy = -sn, c  # unit direction

    eps = 1e-15
    xb = -ex / 2 + np.arange(w + 1) * ps
    yb = ey / 2 - np.arange(h + 1) * ps
    with np.errstate(divide="ignore", invalid="ignore"):
        tx = (xb[None, :] - ox[:, None]) / dx[:, None]
        ty = (yb[None, :] - oy[:, None]) / dy[:, None]
    vert = np.abs(dx) < eps  # ray parallel to the x boundaries
    horz = np.abs(dy) < eps

    inf = np.inf
    tx_lo = np.where(vert, -inf, np.minimum(tx[:, 0], tx[:, -1]))
    tx_hi = np.where(vert, inf, np.maximum(tx[:, 0], tx[:, -1]))
    ty_lo = np.where(horz, -inf, np.minimum(ty[:, 0], ty[:, -1]))
    ty_hi = np.where(horz, inf, np.maximum(ty[:, 0], ty[:, -1]))
    t_min = np.maximum(tx_lo, ty_lo)
    t_max = np.minimum(tx_hi, ty_hi)
    # Axis-parallel rays must also lie within the slab they never cross.
    miss = (vert & ((ox < -ex / 2) | (ox > ex / 2))) | (horz & ((oy < -ey / 2) | (oy > ey / 2)))
    if t_start is not None:
        t_min = np.maximum(t_min, np.asarray(t_start, dtype=float))
    miss |= ~(t_max > t_min)
    t_min = np.where(miss, 0.0, t_min)
    t_max = np.where(miss, 0.0, t_max)

    tx = np.where(vert[:, None], t_min[:, None], tx)
    ty = np.where(horz[:, None], t_min[:, None], ty)
    ts = np.concatenate([t_min[:, None], t_max[:, None], tx, ty], axis=1)
    ts = np.clip(ts, t_min[:, None], t_max[:, None])
    ts.sort(axis=1)
    seg = np.diff(ts, axis=1)
    tm = 0.5 * (ts[:, 1:] + ts[:, :-1])
    mx = ox[:, None] + tm * dx[:, None]
    my = oy[:, None] + tm * dy[:, None]
    col = np.clip(np.floor((mx + ex / 2) / ps).astype(np.int64), 0, w - 1)
    row = np.clip(np.floor((ey / 2 - my) / ps).astype(np.int64), 0, h - 1)
    mats = phantom.grid[row, col].astype(np.int64)
    seg_cm = seg / 10.0
    out = np.zeros((theta.size, N_MATERIALS))
    for m in range(N_MATERIALS):
        out[:, m] = np.where(mats == m, seg_cm, 0.0).sum(axis=1)
    return out


def ray_path_lengths(phantom, origin, direction):
    """Chord length (cm) of a ray through each material.

    Parameters
    ----------
    phantom : Phantom
    origin : (x, y) in mm
    direction : (dx, dy), any non-zero length

    Returns
    -------
    dict
        Material -> length in cm. The ray starts at `origin`; a miss gives zeros.
    """
    d = np.asarray(direction, dtype=float)
    norm = np.hypot(*d)
    if norm == 0:
        raise DataError("ray direction must be non-zero")
    ux, uy = d / norm
    theta = math.atan2(-ux, uy)
    o = np.asarray(origin, dtype=float)
    s = o[0] * math.cos(theta) + o[1] * math.sin(theta)
    t0 = o[0] * ux + o[1] * uy
    lengths = _lines_path_lengths(phantom, [theta], [s], t_start=[t0])[0]
    return {m: float(lengths[int(m)]) for m in Material}


def path_length_stack(phantom, geometry):
    """Per-material path lengths for every ray, shaped (n_angles, n_detectors, n_materials)."""
    out = np.empty((geometry.n_angles, geometry.n_detectors, N_MATERIALS))
    for a in range(geometry.n_angles):
        theta, s = geometry.ray_lines(a)
        out[a] = _lines_path_lengths(phantom, theta, s)
    return out


def _mu_matrix(materials, energies):
    """Linear attenuation (1/cm), shaped (n_energies, n_materials)."""
    energies = np.atleast_1d(np.asarray(energies, dtype=float))
    mu = np.zeros((energies.size, N_MATERIALS))
    for m in Material:
        table = materials[m]
        if table.density == 0:
            continue
        mu[:, int(m)] = linear_attenuation(table, energies)
    return mu


def mono_projection(phantom, geometry, energy, materials=None):
    """Monochromatic sinogram: sum over materials of mu(E) * chord length."""
    materials = default_materials() if materials is None else materials
    mu = _mu_matrix(materials, [energy])[0]
    lengths = path_length_stack(phantom, geometry)
    return Sinogram(lengths @ mu, geometry)


def poly_projection(phantom, geometry, spectrum, materials=None, floor=TRANSMISSION_FLOOR):
    """Polychromatic sinogram ``-ln(sum_E f(E) exp(-sum_m mu_m(E) L_m))``.

    Flux is renormalised to unit total. Transmission is clamped at `floor`
    before the log so opaque rays stay finite.
    """
    materials = default_materials() if materials is None else materials
    keep = spectrum.flux > 0
    if not np.any(keep):
        raise DataError("spectrum has no positive flux")
    energies = spectrum.grid[keep]
    weights = spectrum.flux[keep] / spectrum.flux[keep].sum()
    mu = _mu_matrix(materials, energies)  # (E, M)
    lengths = path_length_stack(phantom, geometry)
    out = np.empty(lengths.shape[:2])
    for a in range(lengths.shape[0]):
        x = lengths[a] @ mu.T  # (D, E)
        # log1p/expm1 keep air rays at exactly zero.
        deficit = np.expm1(-x) @ weights
        out[a] = -np.log1p(np.maximum(deficit, floor - 1.0))
    return Sinogram(out, geometry)


def fan_to_parallel_rebin(sino, n_detectors=None, detector_spacing=None):
    """Resample a fan sinogram onto parallel rays.

    Each parallel ray (theta, s) maps to fan coordinates ``gamma = asin(s / D)``,
    ``beta = theta - gamma`` and is bilinearly interpolated. Source angles wrap
    when the fan scan covers a full turn; samples outside the fan are zero.
    """
    g = sino.geometry
    if g.mode is not Mode.FAN:
        raise DataError("fan_to_parallel_rebin needs a fan-mode sinogram")
    n_det = g.n_detectors if n_detectors is None else int(n_detectors)
    if detector_spacing is None:
        s_max = g.source_distance * math.sin(g.gammas[-1])
        detector_spacing = 2 * s_max / max(n_det - 1, 1)
    out_geom = Geometry(Mode.PARALLEL, g.n_angles, g.angle_step, n_det, detector_spacing)

    theta = np.radians(out_geom.angles_deg)[:, None]
    s = out_geom.offsets[None, :]
    ratio = np.clip(s / g.source_distance, -1.0, 1.0)
    gamma = np.arcsin(ratio)
    beta = theta - gamma

    gi = gamma / g.gamma_step + (g.n_detectors - 1) / 2
    step = math.radians(g.angle_step)
    bi = beta / step
    full_turn = math.isclose(g.n_angles * g.angle_step, 360.0, rel_tol=1e-9)
    if full_turn:
        bi = np.mod(bi, g.n_angles)

    g0 = np.floor(gi).astype(np.int64)
    b0 = np.floor(bi).astype(np.int64)
    fg = gi - g0
    fb = bi - b0
    data = sino.data

    def sample(b, d):
        if full_turn:
            b = np.mod(b, g.n_angles)
        ok = (b >= 0) & (b < g.n_angles) & (d >= 0) & (d < g.n_detectors)
        vals = data[np.clip(b, 0, g.n_angles - 1), np.clip(d, 0, g.n_detectors - 1)]
        return np.where(ok, vals, 0.0)

    res = (
        (1 - fb) * (1 - fg) * sample(b0, g0)
        + (1 - fb) * fg * sample(b0, g0 + 1)
        + fb * (1 - fg) * sample(b0 + 1, g0)
        + fb * fg * sample(b0 + 1, g0 + 1)
    )
    return Sinogram(res, out_geom)


def scale_densities(materials, factor):
    return {m: replace(t, density=t.density * factor) for m, t in materials.items()}


# -- SINO text format ---------------------------------------------------------


def format_sinogram(sino):
    g = sino.geometry
    header = f"SINO {g.n_angles} {g.n_detectors} {fmt(g.angle_step)} {fmt(g.detector_spacing)}"
    if g.mode is Mode.FAN:
        header += f" fan {fmt(g.fan_angle)} {fmt(g.source_distance)}"
    rows = [" ".join(fmt(v) for v in row) for row in sino.data]
    return header + "\n" + "\n".join(rows) + "\n"


def parse_sinogram(text, path=None):
    lines = list(content_lines(text))
    if not lines:
        raise FormatError("empty sinogram file", path, 1)
    lineno, header = lines[0]
    parts = header.split()
    if len(parts) not in (5, 8) or parts[0] != "SINO":
        raise FormatError(
            "expected header 'SINO <n_angles> <n_detectors> <angle_step_deg> <detector_spacing_mm>'",
            path,
            lineno,
        )
    try:
        n_angles, n_det = int(parts[1]), int(parts[2])
        step, spacing = float(parts[3]), float(parts[4])
        kwargs = {}
        if len(parts) == 8:
            if parts[5] != "fan":
                raise ValueError(f"unknown geometry mode {parts[5]!r}")
            kwargs = dict(mode=Mode.FAN, fan_angle=float(parts[6]), source_distance=float(parts[7]))
        geom = Geometry(n_angles=n_angles, angle_step=step, n_detectors=n_det, detector_spacing=spacing, **kwargs)
    except (ValueError, DataError) as exc:
        raise FormatError(f"bad header: {exc}", path, lineno) from None
    body = lines[1:]
    if len(body) != n_angles:
        raise FormatError(f"expected {n_angles} data rows, found {len(body)}", path, lineno)
    data = np.empty((n_angles, n_det))
    for r, (lineno, line) in enumerate(body):
        cols = line.split()
        if len(cols) != n_det:
            raise FormatError(f"expected {n_det} values, found {len(cols)}", path, lineno)
        try:
            data[r] = [float(c) for c in cols]
        except ValueError:
            raise FormatError("non-numeric sinogram value", path, lineno) from None
    try:
        return Sinogram(data, geom)
    except DataError as exc:
        raise FormatError(str(exc), path) from None


def read_sinogram(path):
    path = Path(path)
    return parse_sinogram(path.read_text(encoding="utf-8"), path)


def write_sinogram(path, sino):
    write_atomic(path, format_sinogram(sino))
