"""Complexity measures for CT images treated as series."""

from .bdm import CTMTable, layered_bdm, read_ctm, shipped_ctm, write_ctm
from .entropy import (
    approximate_entropy,
    conditional_entropy,
    corrected_conditional_entropy,
    fuzzy_entropy,
    permutation_entropy,
    sample_entropy,
)
from .lz import binarize_by_mean, lz_complexity, lzw_compressed_length
from .morphology import morphological_richness, mr_signal, power_spectrum
from .stats import (
    Histogram,
    generative_complexity,
    lowess,
    nonconstructability,
    pearson,
    scott_bins,
    scott_histogram,
    spearman,
)

__all__ = [
    "CTMTable",
    "Histogram",
    "approximate_entropy",
    "binarize_by_mean",
    "conditional_entropy",
    "corrected_conditional_entropy",
    "fuzzy_entropy",
    "generative_complexity",
    "layered_bdm",
    "lowess",
    "lz_complexity",
    "lzw_compressed_length",
    "morphological_richness",
    "mr_signal",
    "nonconstructability",
    "pearson",
    "permutation_entropy",
    "power_spectrum",
    "read_ctm",
    "sample_entropy",
    "scott_bins",
    "scott_histogram",
    "shipped_ctm",
    "spearman",
    "write_ctm",
]
