"""Hounsfield conversion and flux weighting of the reconstructed PAM."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError
from .physics import linear_attenuation
from .recon import ImageGrid, Semantics

CONVENTIONAL_ENERGY_KEV = 70.0


def hounsfield(pam, mu_w):
    """``(mu - mu_w) / mu_w * 1000`` applied to every pixel."""
    if pam.semantics is not Semantics.LINEAR_ATTENUATION:
        raise DataError(f"hounsfield needs a linear-attenuation image, got {pam.semantics.value}")
    if not mu_w > 0:
        raise DataError(f"water attenuation must be positive, got {mu_w}")
    return pam.with_data((pam.data - mu_w) / mu_w * 1000.0, Semantics.HOUNSFIELD)


def weight_hu(hu, q):
    if hu.semantics is not Semantics.HOUNSFIELD:
        raise DataError(f"weight_hu needs a Hounsfield image, got {hu.semantics.value}")
    if not 0.0 <= q <= 1.0:
        raise DataError(f"weight must lie in [0, 1], got {q}")
    return hu.with_data(q * hu.data, Semantics.WEIGHTED_HOUNSFIELD)


@dataclass(frozen=True)
class EnhancedStack:
    """Conventional CT plus per-interval HU and flux-weighted HU images."""

    conventional: ImageGrid
    per_interval_hu: tuple
    per_interval_weighted: tuple
    intervals: object
    conventional_mu_w: float

    def __post_init__(self):
        n = len(self.intervals)
        if len(self.per_interval_hu) != n or len(self.per_interval_weighted) != n:
            raise DataError("stack lists must match the interval count")
        shapes = {img.shape for img in (self.conventional, *self.per_interval_hu, *self.per_interval_weighted)}
        if len(shapes) != 1:
            raise DataError("all stack images must share dimensions")


def enhance_pipeline(pam, intervals, water, conventional_energy=CONVENTIONAL_ENERGY_KEV):
    """Per-interval HU_i and wHU_i = q_i * HU_i, plus the conventional image.

    `intervals` must carry effective energies and weights. Water attenuation
    is re-derived from `water` at each effective energy.
    """
    hus, whus, filled = [], [], []
    for iv in intervals:
        if iv.effective_energy is None or iv.weight_q is None:
            raise DataError(f"interval ({iv.lo}, {iv.hi}) needs an effective energy and a weight")
        mu_w = float(linear_attenuation(water, iv.effective_energy))
        hu = hounsfield(pam, mu_w)
        hus.append(hu)
        whus.append(weight_hu(hu, iv.weight_q))
        filled.append(type(iv)(iv.lo, iv.hi, iv.effective_energy, mu_w, iv.weight_q))
    mu_c = float(linear_attenuation(water, conventional_energy))
    cct = hounsfield(pam, mu_c)
    return EnhancedStack(cct, tuple(hus), tuple(whus), type(intervals)(tuple(filled)), mu_c)


def weighted_sum(stack):
    """Pixelwise sum of all wHU_i."""
    return np.sum([img.data for img in stack.per_interval_weighted], axis=0)
