"""Attenuation tables, the source spectrum model and the phantom raster.

Lengths in the phantom are millimetres; attenuation coefficients are per
centimetre, matching the usual NIST convention.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from ._textio import content_lines, fmt, write_atomic
from .errors import AttenuationRangeError, DataError, FormatError

# Outlier cutoff: flux below this energy is discarded.
MIN_ENERGY_KEV = 10.0
DEFAULT_KVP = 140.0
# Water-equivalent prefilter used by the pipeline; hardens the bare Kramers
# shape to a mean energy near 70 keV.
DEFAULT_PREFILTER_WATER_CM = 15.0

CYLINDER_RADIUS_MM = 5.0
TISSUE_EDGE_MM = 1.0


class Material(enum.IntEnum):
    AIR = 0
    WATER = 1
    LUNG = 2
    RIB_BONE = 3
    SKULL = 4

    @property
    def label(self):
        return self.name.lower()

    @classmethod
    def from_label(cls, label):
        try:
            return cls[label.upper()]
        except KeyError:
            raise DataError(f"unknown material {label!r}") from None


DENSITIES = {
    Material.AIR: 0.0,
    Material.WATER: 1.0,
    Material.LUNG: 0.26,
    Material.RIB_BONE: 1.92,
    Material.SKULL: 1.61,
}

# (material, centre x mm, centre y mm) of the three tissue inserts.
TISSUE_INSERTS = (
    (Material.RIB_BONE, 2.0, 2.0),
    (Material.LUNG, 0.0, 2.0),
    (Material.SKULL, -2.0, 2.0),
)


@dataclass(frozen=True)
class MaterialTable:
    """Tabulated mass attenuation coefficients for one material.

    Attributes
    ----------
    material : Material
    energies : tuple of float
        Strictly increasing photon energies in keV.
    mu_over_rho : tuple of float
        Mass attenuation coefficients in cm^2/g.
    density : float
        g/cm^3. Zero is allowed (air treated as vacuum).
    """

    material: Material
    energies: tuple
    mu_over_rho: tuple
    density: float

    def __post_init__(self):
        e = np.asarray(self.energies, dtype=float)
        v = np.asarray(self.mu_over_rho, dtype=float)
        if e.ndim != 1 or e.size == 0 or e.shape != v.shape:
            raise DataError("material table needs matching, non-empty energy/value columns")
        if np.any(np.diff(e) <= 0):
            raise DataError("material table energies must be strictly increasing")
        if np.any(v <= 0):
            raise DataError("mass attenuation values must be positive")
        if self.density < 0:
            raise DataError("density must be non-negative")

    def with_density(self, material, density):
        return MaterialTable(material, self.energies, self.mu_over_rho, float(density))


def mass_attenuation(table, energy):
    """Mass attenuation coefficient (cm^2/g) by log-log interpolation.

    Exact at tabulated energies. Accepts a scalar or an array of energies and
    raises :class:`AttenuationRangeError` rather than extrapolate.
    """
    e_tab = np.asarray(table.energies, dtype=float)
    v_tab = np.asarray(table.mu_over_rho, dtype=float)
    e = np.asarray(energy, dtype=float)
    if np.any(~np.isfinite(e)) or np.any(e < e_tab[0]) or np.any(e > e_tab[-1]):
        raise AttenuationRangeError(
            f"energy outside tabulated range [{e_tab[0]}, {e_tab[-1]}] keV: {energy}"
        )
    out = np.exp(np.interp(np.log(e), np.log(e_tab), np.log(v_tab)))
    # Return the table value verbatim at nodes; exp(log(v)) can be off by an ulp.
    idx = np.clip(np.searchsorted(e_tab, e), 0, e_tab.size - 1)
    on_node = e_tab[idx] == e
    out = np.where(on_node, v_tab[idx], out)
    return float(out) if out.ndim == 0 else out


def linear_attenuation(table, energy):
    """Linear attenuation coefficient in 1/cm, ``(mu/rho) * rho``."""
    return mass_attenuation(table, energy) * table.density


def read_material_table(path):
    """Parse a ``MAT <name> <density>`` text file."""
    path = Path(path)
    return parse_material_table(path.read_text(encoding="utf-8"), path)


def parse_material_table(text, path=None):
    lines = list(content_lines(text))
    if not lines:
        raise FormatError("empty material file", path)
    lineno, header = lines[0]
    parts = header.split()
    if len(parts) != 3 or parts[0] != "MAT":
        raise FormatError("expected header 'MAT <name> <density_g_cm3>'", path, lineno)
    try:
        material = Material.from_label(parts[1])
        density = float(parts[2])
    except (DataError, ValueError) as exc:
        raise FormatError(str(exc), path, lineno) from None
    energies, values = [], []
    for lineno, line in lines[1:]:
        cols = line.split()
        if len(cols) != 2:
            raise FormatError("expected '<energy_keV> <mu_over_rho>'", path, lineno)
        try:
            energies.append(float(cols[0]))
            values.append(float(cols[1]))
        except ValueError:
            raise FormatError(f"not a number: {line!r}", path, lineno) from None
    try:
        return MaterialTable(material, tuple(energies), tuple(values), density)
    except DataError as exc:
        raise FormatError(str(exc), path) from None


def format_material_table(table):
    rows = [f"MAT {table.material.label} {fmt(table.density)}"]
    rows += [f"{fmt(e)} {fmt(v)}" for e, v in zip(table.energies, table.mu_over_rho)]
    return "\n".join(rows) + "\n"


def write_material_table(path, table):
    write_atomic(path, format_material_table(table))


def water_table():
    """The shipped water table (energies 10-150 keV)."""
    text = resources.files("fluxct.data").joinpath("water.mat").read_text(encoding="utf-8")
    return parse_material_table(text, "water.mat")


def default_materials(water=None, overrides=None):
    """Material -> table map.

    Non-water materials reuse the water mass attenuation scaled by their own
    density unless a table is supplied in `overrides`.
    """
    water = water_table() if water is None else water
    tables = {m: water.with_density(m, rho) for m, rho in DENSITIES.items()}
    tables[Material.WATER] = water
    if overrides:
        tables.update(overrides)
    return tables


@dataclass(frozen=True)
class Spectrum:
    """Relative photon flux per energy bin (bin centres in keV)."""

    grid: np.ndarray
    flux: np.ndarray

    def __post_init__(self):
        grid = np.array(self.grid, dtype=float)
        flux = np.array(self.flux, dtype=float)
        if grid.ndim != 1 or grid.size == 0 or grid.shape != flux.shape:
            raise DataError("spectrum grid and flux must be matching 1-D arrays")
        if np.any(flux < 0):
            raise DataError("spectrum flux must be non-negative")
        flux[grid < MIN_ENERGY_KEV] = 0.0
        grid.flags.writeable = False
        flux.flags.writeable = False
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "flux", flux)

    @property
    def total(self):
        return float(self.flux.sum())

    def mean_energy(self):
        return float(np.dot(self.grid, self.flux) / self.flux.sum())


def default_grid(kvp=DEFAULT_KVP, step=1.0):
    return np.arange(MIN_ENERGY_KEV, kvp + 0.5 * step, step)


def kramers_spectrum(kvp=DEFAULT_KVP, grid=None, prefilter_water_cm=0.0, water=None):
    """Kramers bremsstrahlung approximation, flux ~ (kvp - E) / E, unit total.

    A non-zero `prefilter_water_cm` attenuates the shape by
    ``exp(-mu_water(E) * thickness)`` before normalisation, standing in for
    tube and body filtration.
    """
    if not 10.0 < kvp <= 150.0:
        raise DataError(f"kvp must lie in (10, 150] keV, got {kvp}")
    grid = default_grid(kvp) if grid is None else np.asarray(grid, dtype=float)
    if grid.size == 0:
        raise DataError("empty energy grid")
    flux = np.zeros_like(grid)
    inside = (grid >= MIN_ENERGY_KEV) & (grid <= kvp)
    flux[inside] = (kvp - grid[inside]) / grid[inside]
    if prefilter_water_cm:
        if prefilter_water_cm < 0:
            raise DataError("prefilter thickness must be non-negative")
        water = water_table() if water is None else water
        flux[inside] *= np.exp(-linear_attenuation(water, grid[inside]) * prefilter_water_cm)
    total = flux.sum()
    if total <= 0:
        raise DataError("energy grid has no support below kvp")
    return Spectrum(grid, flux / total)


def monochromatic_spectrum(energy):
    return Spectrum(np.array([float(energy)]), np.array([1.0]))


def flux_in_interval(spectrum, lo, hi):
    """Summed flux over bins with ``lo <= E <= hi``."""
    if not lo < hi:
        raise DataError(f"interval needs lo < hi, got ({lo}, {hi})")
    mask = (spectrum.grid >= lo) & (spectrum.grid <= hi)
    return float(spectrum.flux[mask].sum())


@dataclass(frozen=True)
class Phantom:
    """Material raster. Row 0 is the top edge (largest y); column 0 is the left edge."""

    grid: np.ndarray
    pixel_size: float

    def __post_init__(self):
        grid = np.array(self.grid, dtype=np.int8)
        if grid.ndim != 2:
            raise DataError("phantom grid must be 2-D")
        valid = {int(m) for m in Material}
        if not set(np.unique(grid).tolist()) <= valid:
            raise DataError("phantom grid holds unknown material codes")
        grid.flags.writeable = False
        object.__setattr__(self, "grid", grid)

    @property
    def shape(self):
        return self.grid.shape

    @property
    def extent(self):
        h, w = self.grid.shape
        return (w * self.pixel_size, h * self.pixel_size)

    def cell_centres(self):
        """(x, y) mm coordinate arrays of every cell centre, each shaped like the grid."""
        h, w = self.grid.shape
        ex, ey = self.extent
        xs = -ex / 2 + (np.arange(w) + 0.5) * self.pixel_size
        ys = ey / 2 - (np.arange(h) + 0.5) * self.pixel_size
        return np.meshgrid(xs, ys)

    def index_of(self, x, y):
        h, w = self.grid.shape
        ex, ey = self.extent
        col = int(np.floor((x + ex / 2) / self.pixel_size))
        row = int(np.floor((ey / 2 - y) / self.pixel_size))
        if not (0 <= row < h and 0 <= col < w):
            raise DataError(f"point ({x}, {y}) mm lies outside the phantom raster")
        return row, col

    def material_at(self, x, y):
        return Material(int(self.grid[self.index_of(x, y)]))

    def mask(self, material):
        return self.grid == int(material)

    def scaled_area(self, materials):
        """Area in mm^2 covered by the given materials."""
        hits = np.isin(self.grid, [int(m) for m in materials])
        return float(hits.sum()) * self.pixel_size**2


def build_phantom(resolution=256, extent=12.0):
    """Water cylinder (radius 5 mm) with lung, rib bone and skull 1x1 mm inserts.

    Parameters
    ----------
    resolution : int
        Pixels along each side (square raster).
    extent : float
        Side length of the field of view in mm.
    """
    if resolution < 32:
        raise DataError(f"resolution must be >= 32, got {resolution}")
    if extent < 2 * CYLINDER_RADIUS_MM + 2.0:
        raise DataError(f"extent {extent} mm too small for the 5 mm cylinder plus margin")
    ps = extent / resolution
    xs = -extent / 2 + (np.arange(resolution) + 0.5) * ps
    ys = extent / 2 - (np.arange(resolution) + 0.5) * ps
    x, y = np.meshgrid(xs, ys)
    grid = np.full((resolution, resolution), int(Material.AIR), dtype=np.int8)
    grid[x**2 + y**2 <= CYLINDER_RADIUS_MM**2] = int(Material.WATER)
    half = TISSUE_EDGE_MM / 2
    for material, cx, cy in TISSUE_INSERTS:
        inside = (np.abs(x - cx) <= half) & (np.abs(y - cy) <= half)
        grid[inside] = int(material)
    return Phantom(grid, ps)


def empty_phantom(resolution=64, extent=12.0):
    ps = extent / resolution
    return Phantom(np.zeros((resolution, resolution), dtype=np.int8), ps)
