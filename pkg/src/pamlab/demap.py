"""Bit-LLR demappers for AWGN observations of labeled constellations.

LLR convention is log(P[bit=0 | y] / P[bit=1 | y]) throughout, clipped to
+-38. Priors enter as log-probabilities so shaped inputs demap exactly.
"""

from __future__ import annotations

import numpy as np
from scipy.special import logsumexp

from .constellations import Constellation
from .rates import psnr_to_sigma

__all__ = ["soft_bit_llrs", "hard_bit_llrs", "LLR_CLIP"]

LLR_CLIP = 38.0


def soft_bit_llrs(y, c: Constellation, log_prior, psnr_db: float) -> np.ndarray:
    """Exact per-bit LLRs for a block of received symbols.

    y has shape (n,) for 1-D constellations or (n, 2) for 2-D ones; the
    result has shape (n, m) with one column per label bit.
    """
    xs = c.coords()
    bits = c.label_bits()
    sigma = psnr_to_sigma(psnr_db)
    y = np.asarray(y, dtype=float)
    if c.dimension == 1:
        d2 = (y[:, None] - xs[:, 0][None, :]) ** 2
    else:
        d2 = ((y[:, None, :] - xs[None, :, :]) ** 2).sum(axis=2)
    ll = -d2 / (2 * sigma * sigma) + np.asarray(log_prior)[None, :]
    out = np.empty((len(y), bits.shape[1]))
    for k in range(bits.shape[1]):
        mask0 = bits[:, k] == 0
        out[:, k] = logsumexp(ll[:, mask0], axis=1) - logsumexp(ll[:, ~mask0], axis=1)
    return np.clip(out, -LLR_CLIP, LLR_CLIP)


def hard_bit_llrs(y, c: Constellation, log_prior, psnr_db: float, a: float) -> np.ndarray:
    """Bit-wise hard decisions mapped to constant-magnitude LLRs +-a.

    The decision is the sign of the exact soft LLR (MAP bit decision);
    the magnitude a is a detector design parameter, identical for all bit
    levels and symbols.
    """
    if a <= 0:
        raise ValueError("LLR magnitude a must be positive")
    soft = soft_bit_llrs(y, c, log_prior, psnr_db)
    return np.where(soft >= 0, a, -a)
