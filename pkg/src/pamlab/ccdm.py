"""Constant-composition distribution matcher.

Fixed-to-fixed invertible mapping between k uniform data bits and length-n
amplitude-index sequences whose symbol counts equal a prescribed
composition. The mapping subdivides the exact big-integer interval
[0, multinomial(n; counts)) proportionally to the remaining symbol counts,
in ascending symbol order, which makes encode/decode exact for any block
length without renormalization.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "Composition",
    "DmCode",
    "composition_for",
    "dm_input_length",
    "dm_code_for",
    "ccdm_encode",
    "ccdm_decode",
]


@dataclass(frozen=True)
class Composition:
    """Per-amplitude symbol counts of one matcher output block."""

    counts: tuple[int, ...]

    def __post_init__(self):
        if not self.counts:
            raise ValueError("empty composition")
        if any(c < 0 or c != int(c) for c in self.counts):
            raise ValueError(f"counts must be nonnegative integers: {self.counts}")
        if sum(self.counts) <= 0:
            raise ValueError("composition has zero total length")

    @property
    def n(self) -> int:
        return sum(self.counts)

    @property
    def num_symbols(self) -> int:
        return len(self.counts)

    def sequence_count(self) -> int:
        """Exact number of sequences with this composition (multinomial)."""
        total = 1
        remaining = self.n
        for c in self.counts:
            total *= math.comb(remaining, c)
            remaining -= c
        return total

    def empirical(self) -> tuple[float, ...]:
        return tuple(c / self.n for c in self.counts)


def composition_for(p_a, n: int) -> Composition:
    """Quantize a target amplitude distribution to an n-type composition.

    Largest-remainder rounding of n*p_a; remainder ties go to the lowest
    amplitude index, which keeps the result deterministic.
    """
    if n < 1:
        raise ValueError("block length must be >= 1")
    p = np.asarray(p_a, dtype=float)
    if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-9:
        raise ValueError("target must be a probability vector")
    scaled = n * p
    base = np.floor(scaled).astype(int)
    short = n - int(base.sum())
    # sort by descending remainder, ascending index on ties
    remainders = scaled - base
    order = sorted(range(len(p)), key=lambda i: (-remainders[i], i))
    for i in order[:short]:
        base[i] += 1
    return Composition(tuple(int(c) for c in base))


def dm_input_length(comp: Composition) -> int:
    """Input length k = floor(log2 multinomial(n; counts)), computed exactly."""
    total = comp.sequence_count()
    return total.bit_length() - 1


def rate_loss(comp: Composition, target=None) -> float:
    """Shaping rate loss H(target) - k/n in bits per amplitude.

    Without an explicit target the composition's own empirical distribution
    is used; in both cases the loss is nonnegative when the composition
    quantizes the target.
    """
    p = np.asarray(target if target is not None else comp.empirical(), dtype=float)
    h = float(-(p[p > 0] * np.log2(p[p > 0])).sum())
    return h - dm_input_length(comp) / comp.n


@dataclass(frozen=True)
class DmCode:
    """A fixed matcher: composition, input length and shaping loss."""

    composition: Composition
    k: int
    rate_loss: float

    def __post_init__(self):
        if self.k != dm_input_length(self.composition):
            raise ValueError("k does not match the composition")
        if self.rate_loss < -1e-12:
            raise ValueError("negative rate loss")


def dm_code_for(p_a, n: int) -> DmCode:
    """Matcher for a target amplitude distribution at block length n."""
    comp = composition_for(p_a, n)
    return DmCode(comp, dm_input_length(comp), rate_loss(comp, p_a))


def _bits_to_int(bits: np.ndarray) -> int:
    k = len(bits)
    if k == 0:
        return 0
    packed = np.packbits(bits.astype(np.uint8))
    return int.from_bytes(packed.tobytes(), "big") >> ((8 - k % 8) % 8)


def _int_to_bits(value: int, k: int) -> np.ndarray:
    if k == 0:
        return np.zeros(0, dtype=np.uint8)
    raw = format(value, f"0{k}b").encode()
    return (np.frombuffer(raw, dtype=np.uint8) - ord("0")).astype(np.uint8)


def ccdm_encode(bits, comp: Composition) -> np.ndarray:
    """Map k data bits to the amplitude-index sequence of rank int(bits).

    The output always has exactly the composition's symbol counts; the map
    is injective over all 2**k inputs.
    """
    bits = np.asarray(bits, dtype=np.uint8).reshape(-1)
    k = dm_input_length(comp)
    if len(bits) != k:
        raise ValueError(f"input must be {k} bits, got {len(bits)}")
    rank = _bits_to_int(bits)
    counts = list(comp.counts)
    total = comp.sequence_count()
    n = comp.n
    out = np.empty(n, dtype=np.int64)
    for pos in range(n):
        remaining = n - pos
        for sym, c in enumerate(counts):
            if c == 0:
                continue
            # sequences that continue with `sym`; exact by the multinomial
            # recursion total * c / remaining
            n_sym = total * c // remaining
            if rank < n_sym:
                out[pos] = sym
                counts[sym] -= 1
                total = n_sym
                break
            rank -= n_sym
        else:
            raise AssertionError("rank walk exhausted symbols")
    return out


def ccdm_decode(seq, comp: Composition) -> np.ndarray | None:
    """Recover the data bits from an amplitude-index sequence.

    Raises ValueError when the sequence does not have the expected
    composition; returns None when the composition is right but the
    sequence lies outside the encoder image (a detectable decoding error).
    """
    seq = np.asarray(seq, dtype=np.int64).reshape(-1)
    n = comp.n
    if len(seq) != n:
        raise ValueError(f"sequence length {len(seq)} != composition length {n}")
    observed = np.bincount(seq, minlength=comp.num_symbols) if len(seq) else np.zeros(0)
    if len(observed) != comp.num_symbols or tuple(observed.tolist()) != comp.counts:
        raise ValueError("sequence composition does not match the matcher composition")
    counts = list(comp.counts)
    total = comp.sequence_count()
    k = total.bit_length() - 1
    rank = 0
    for pos in range(n):
        remaining = n - pos
        sym = int(seq[pos])
        for other in range(sym):
            c = counts[other]
            if c:
                rank += total * c // remaining
        n_sym = total * counts[sym] // remaining
        counts[sym] -= 1
        total = n_sym
    if rank >= (1 << k):
        return None
    return _int_to_bits(rank, k)
