import math

import numpy as np
import pytest

from fluxct.complexity.bdm import (
    CTMTable,
    bdm_from_counts,
    block_codes,
    layer_block_counts,
    layered_bdm,
    quantize_levels,
    shipped_ctm,
)
from fluxct.complexity.lz import (
    binarize_by_mean,
    lz76_phrase_count,
    lz_complexity,
    lzw_codes,
    lzw_compressed_length,
    lzw_decode,
)
from fluxct.errors import DataError


# -- Lempel-Ziv 1976 -------------------------------------------------------------


def lz76_reference(bits):
    """Textbook parsing: extend the phrase while it occurs in the preceding text."""
    s = "".join(str(int(b)) for b in bits)
    n, c, i = len(s), 1, 1
    while i < n:
        k = 1
        while i + k <= n and s[i : i + k] in s[: i + k - 1]:
            k += 1
        c += 1
        i += k
    return c


def test_binarize_examples():
    assert binarize_by_mean(np.full(5, 2.0)).tolist() == [1] * 5
    assert binarize_by_mean([0.0, 10.0]).tolist() == [0, 1]
    assert binarize_by_mean([1, 2, 3, 4]).tolist() == [0, 0, 1, 1]


@pytest.mark.parametrize("n", [16, 1000, 2**14])
def test_all_zeros_two_phrases(n):
    assert lz76_phrase_count(np.zeros(n, dtype=int)) == 2
    assert lz_complexity(np.zeros(n, dtype=int)) == pytest.approx(2 * math.log2(n) / n)


def test_hand_parse():
    # 0 | 01 | 011 | 0111 ... is the classic growing example
    assert lz76_phrase_count([0, 0, 1, 0, 1, 1]) == lz76_reference([0, 0, 1, 0, 1, 1]) == 3


def test_matches_reference_parser(rng):
    for _ in range(300):
        n = int(rng.integers(2, 200))
        bits = (rng.random(n) < rng.random()).astype(int)
        assert lz76_phrase_count(bits) == lz76_reference(bits)


def test_alternating_and_random_calibration():
    n = 2**14
    assert lz_complexity(np.arange(n) % 2) < 0.01
    ck = lz_complexity(np.random.default_rng(5).integers(0, 2, n))
    assert 0.8 <= ck <= 1.2


def test_complement_invariance(rng):
    for _ in range(20):
        bits = rng.integers(0, 2, 500)
        assert lz_complexity(bits) == lz_complexity(1 - bits)


def test_lz_precondition():
    with pytest.raises(DataError):
        lz_complexity([1])


# -- LZW -------------------------------------------------------------------------


def test_lzw_run_collapse():
    assert lzw_compressed_length(bytes(4096)) < 0.1 * 4096 * 8


def test_lzw_incompressible():
    for seed in range(20):
        data = np.random.default_rng(seed).integers(0, 256, 4096, dtype=np.uint8).tobytes()
        assert lzw_compressed_length(data) / (len(data) * 8) > 0.9


def test_lzw_dictionary_reuse():
    x = (b"the quick brown fox jumps over the lazy dog " * 20)
    assert lzw_compressed_length(x + x) < 2 * lzw_compressed_length(x)


def test_lzw_round_trip_with_resets(rng):
    data = rng.integers(0, 4, 60000, dtype=np.uint8).tobytes()
    codes = lzw_codes(data)
    assert max(codes) < 4096
    assert lzw_decode(codes) == data


def test_lzw_empty_rejected():
    with pytest.raises(DataError):
        lzw_compressed_length(b"")


# -- BDM -------------------------------------------------------------------------


@pytest.mark.parametrize("edge,size", [(2, 16), (3, 512), (4, 65536)])
def test_shipped_tables_complete(edge, size):
    t = shipped_ctm(edge)
    assert t.block_edge == edge
    assert len(t.values) == size and t.complete
    assert min(t.values.values()) > 0
    assert t[0] == min(t.values.values())


def test_ctm_table_validation():
    with pytest.raises(DataError):
        CTMTable(2, {})
    with pytest.raises(DataError):
        CTMTable(2, {0: -1.0})
    with pytest.raises(DataError):
        CTMTable(2, {16: 1.0})
    with pytest.raises(DataError):
        shipped_ctm(5)


def test_block_codes_msb_first():
    b = np.array([[1, 0], [0, 0]])
    assert block_codes(b, 2, 2).tolist() == [0b1000]
    assert block_codes(np.ones((5, 5)), 2, 2).size == 4  # partial edge blocks dropped


def test_single_block_repeated():
    ctm = shipped_ctm(2)
    img = np.ones((4, 4))
    # every pixel sits at the top level, so both layers are all ones: 8 = 2^3 blocks of 1111
    assert layer_block_counts(img, 2, 2, 2, (0, 1)) == {0b1111: 8}
    assert layered_bdm(img, ctm, q=2, value_range=(0, 1)) == pytest.approx(ctm["1111"] + 3)


def test_two_distinct_blocks_once():
    ctm = shipped_ctm(2)
    img = np.array([[1.0, 0.0], [0.0, 0.0]])
    assert layered_bdm(img, ctm, q=2, value_range=(0, 1)) == pytest.approx(ctm["1111"] + ctm["1000"])


def test_formula_from_counts():
    ctm = shipped_ctm(2)
    counts = {0b0110: 4, 0b0001: 1}
    assert bdm_from_counts(counts, ctm) == pytest.approx(ctm[0b0110] + 2 + ctm[0b0001])


def test_constant_below_random():
    ctm = shipped_ctm(2)
    const = layered_bdm(np.full((32, 32), 5.0), ctm, q=256)
    for seed in range(20):
        noise = np.random.default_rng(seed).random((32, 32))
        assert const <= layered_bdm(noise, ctm, q=256)


def test_bdm_deterministic_and_offset(rng):
    ctm = shipped_ctm(2)
    img = rng.random((24, 24))
    assert layered_bdm(img, ctm, q=16) == layered_bdm(img, ctm, q=16)
    assert layered_bdm(img, ctm, q=16, offset=1) > layered_bdm(img, ctm, q=16)


def test_bdm_relabelling_invariance(rng):
    # levels rescaled within one quantisation cell keep the layer set
    ctm = shipped_ctm(2)
    img = rng.integers(0, 8, (16, 16)).astype(float)
    a = layered_bdm(img, ctm, q=8, value_range=(0, 8))
    b = layered_bdm(img + 0.5, ctm, q=8, value_range=(0, 8))
    assert a == b


def test_bdm_equality_slicing_differs(rng):
    ctm = shipped_ctm(2)
    img = rng.random((16, 16))
    assert layered_bdm(img, ctm, q=4, slicing="equality") != layered_bdm(img, ctm, q=4)
    with pytest.raises(DataError):
        layered_bdm(img, ctm, q=4, slicing="bands")


def test_bdm_preconditions(rng):
    ctm = shipped_ctm(2)
    img = rng.random((8, 8))
    with pytest.raises(DataError):
        layered_bdm(img, ctm, block_size=3)
    with pytest.raises(DataError):
        layered_bdm(img, ctm, offset=3)
    with pytest.raises(DataError):
        layered_bdm(img, ctm, q=1)


def test_partial_table_fallback():
    full = shipped_ctm(2)
    partial = CTMTable(2, {k: v for k, v in full.values.items() if k != 0b1111})
    img = np.ones((2, 2))
    with pytest.raises(DataError, match="missing"):
        layered_bdm(img, partial, q=2, value_range=(0, 1))
    assert layered_bdm(img, partial, q=2, value_range=(0, 1), fallback=True) == pytest.approx(partial.max_value + 1)


def test_quantize_levels():
    assert quantize_levels([0.0, 0.5, 1.0], 4).tolist() == [0, 2, 3]
    assert quantize_levels([3.0, 3.0], 4).tolist() == [0, 0]
