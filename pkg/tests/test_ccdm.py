import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pamlab.ccdm import (
    Composition,
    DmCode,
    ccdm_decode,
    ccdm_encode,
    composition_for,
    dm_code_for,
    dm_input_length,
    rate_loss,
)


def all_bitstrings(k):
    for r in range(2**k):
        yield np.array([int(b) for b in format(r, f"0{k}b")], dtype=np.uint8) if k else np.zeros(0, np.uint8)


class TestComposition:
    def test_counts_validation(self):
        with pytest.raises(ValueError):
            Composition(())
        with pytest.raises(ValueError):
            Composition((0, 0))
        with pytest.raises(ValueError):
            Composition((-1, 2))

    def test_sequence_count(self):
        assert Composition((2, 1, 1)).sequence_count() == 12
        assert Composition((5, 0, 0)).sequence_count() == 1

    def test_quantizer_uniform(self):
        assert composition_for([1 / 3, 1 / 3, 1 / 3], 3000).counts == (1000, 1000, 1000)

    def test_quantizer_single_mass(self):
        assert composition_for([1.0, 0.0, 0.0], 1).counts == (1, 0, 0)

    def test_quantizer_folded_optimum(self):
        comp = composition_for([0.4396, 0.2594, 0.3010], 3000)
        assert sum(comp.counts) == 3000
        for c, p in zip(comp.counts, (0.4396, 0.2594, 0.3010)):
            assert abs(c / 3000 - p) <= 1 / 3000

    @given(
        st.lists(st.floats(0.01, 1.0), min_size=2, max_size=5),
        st.integers(1, 500),
    )
    @settings(max_examples=60, deadline=None)
    def test_quantizer_properties(self, weights, n):
        p = np.array(weights) / sum(weights)
        comp = composition_for(p, n)
        assert sum(comp.counts) == n
        assert all(abs(c - n * pi) <= 1.0 + 1e-9 for c, pi in zip(comp.counts, p))


class TestInputLength:
    def test_known_values(self):
        assert dm_input_length(Composition((2, 1, 1))) == 3
        assert dm_input_length(Composition((7, 0, 0))) == 0

    def test_paper_block_length(self):
        comp = Composition((1000, 1000, 1000))
        k = dm_input_length(comp)
        loss = math.log2(3) - k / 3000
        assert k == 4743
        assert loss == pytest.approx(0.004, abs=0.001)

    def test_rate_loss_nonnegative_and_shrinking(self):
        losses = [rate_loss(Composition((n, n, n))) for n in (10, 100, 1000)]
        assert all(l >= 0 for l in losses)
        assert losses[0] > losses[1] > losses[2]

    def test_dm_code_validation(self):
        comp = Composition((2, 1, 1))
        DmCode(comp, 3, 0.1)
        with pytest.raises(ValueError):
            DmCode(comp, 4, 0.1)
        assert dm_code_for([0.5, 0.25, 0.25], 4).k == dm_input_length(composition_for([0.5, 0.25, 0.25], 4))


class TestRoundtrip:
    @pytest.mark.parametrize("counts", [(1, 1), (2, 1, 1), (2, 2, 2), (4, 3, 3)])
    def test_exhaustive_small(self, counts):
        comp = Composition(counts)
        k = dm_input_length(comp)
        assert k <= 12
        seen = set()
        for bits in all_bitstrings(k):
            seq = ccdm_encode(bits, comp)
            assert tuple(np.bincount(seq, minlength=len(counts)).tolist()) == counts
            seen.add(tuple(seq.tolist()))
            back = ccdm_decode(seq, comp)
            assert back is not None and np.array_equal(back, bits)
        assert len(seen) == 2**k  # injective

    def test_two_symbol_ordering(self):
        comp = Composition((1, 1))
        assert ccdm_encode([0], comp).tolist() == [0, 1]
        assert ccdm_encode([1], comp).tolist() == [1, 0]

    def test_degenerate_single_amplitude(self):
        comp = Composition((6, 0, 0))
        assert ccdm_encode(np.zeros(0, np.uint8), comp).tolist() == [0] * 6

    def test_sampled_large_block(self):
        comp = Composition((1000, 1000, 1000))
        k = dm_input_length(comp)
        rng = np.random.default_rng(5)
        for _ in range(25):
            bits = rng.integers(0, 2, k, dtype=np.uint8)
            seq = ccdm_encode(bits, comp)
            assert tuple(np.bincount(seq, minlength=3).tolist()) == comp.counts
            back = ccdm_decode(seq, comp)
            assert back is not None and np.array_equal(back, bits)

    @given(st.integers(0, 2**12 - 1))
    @settings(max_examples=40, deadline=None)
    def test_roundtrip_property(self, r):
        comp = Composition((4, 3, 3))
        k = dm_input_length(comp)
        bits = np.array([int(b) for b in format(r % 2**k, f"0{k}b")], dtype=np.uint8)
        seq = ccdm_encode(bits, comp)
        assert np.array_equal(ccdm_decode(seq, comp), bits)

    def test_wrong_length_input(self):
        with pytest.raises(ValueError):
            ccdm_encode([0, 1], Composition((2, 1, 1)))

    def test_wrong_composition_rejected(self):
        comp = Composition((2, 1, 1))
        with pytest.raises(ValueError):
            ccdm_decode([0, 0, 0, 0], comp)
        with pytest.raises(ValueError):
            ccdm_decode([0, 0, 1], comp)

    def test_out_of_image_flagged(self):
        # (2, 2) has 6 sequences but k = 2: the top two ranks decode to None
        comp = Composition((2, 2))
        k = dm_input_length(comp)
        assert k == 2
        images = {tuple(ccdm_encode(b, comp).tolist()) for b in all_bitstrings(k)}
        all_seqs = {
            (0, 0, 1, 1), (0, 1, 0, 1), (0, 1, 1, 0),
            (1, 0, 0, 1), (1, 0, 1, 0), (1, 1, 0, 0),
        }
        outside = all_seqs - images
        assert len(outside) == 2
        for seq in outside:
            assert ccdm_decode(np.array(seq), comp) is None
        for seq in images:
            assert ccdm_decode(np.array(seq), comp) is not None
