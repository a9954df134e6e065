"""Independent Monte-Carlo estimators used as test oracles.

These deliberately avoid the package's quadrature machinery: rates are
estimated from sampled channel realizations and plain posterior sums, so
they can cross-check the deterministic integrals.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import logsumexp

from pamlab.constellations import Constellation, InputDistribution
from pamlab.rates import psnr_to_sigma


def mc_rate_stats(
    c: Constellation,
    p: InputDistribution,
    psnr_db: float,
    n_samples: int,
    seed: int,
    chunk: int = 500_000,
):
    """Sampled estimates of every rate functional's raw ingredients.

    Returns a dict with (estimate, standard_error) for:
      mi        -- I(X;Y) per real dimension
      bmd       -- (H(X) - sum_k H(B_k|Y)) per real dimension (labeled only)
      delta     -- MAP symbol error probability
      epsilon   -- average MAP bit error probability (labeled only)
    """
    rng = np.random.default_rng(seed)
    xs = c.coords()
    probs = np.asarray(p.probs)
    with np.errstate(divide="ignore"):
        logp = np.where(probs > 0, np.log(np.maximum(probs, 1e-320)), -np.inf)
    sigma = psnr_to_sigma(psnr_db)
    bits = c.label_bits() if c.is_labeled else None
    m = bits.shape[1] if c.is_labeled else 0
    hx = p.entropy()

    mi_sum = mi_sq = 0.0
    hb_sum = np.zeros(m)
    hb_sq = np.zeros(m)
    sym_err = 0
    bit_err = np.zeros(m)
    done = 0
    while done < n_samples:
        n = min(chunk, n_samples - done)
        done += n
        idx = rng.choice(len(xs), size=n, p=probs)
        y = xs[idx] + sigma * rng.standard_normal((n, c.dimension))
        d2 = ((y[:, None, :] - xs[None, :, :]) ** 2).sum(axis=2)
        ll = -d2 / (2 * sigma * sigma) + logp[None, :]
        lognorm = logsumexp(ll, axis=1)
        lp = ll - lognorm[:, None]
        # mutual information samples: log2 posterior(true x) - log2 prior
        s = (lp[np.arange(n), idx] - logp[idx]) / math.log(2.0)
        mi_sum += s.sum()
        mi_sq += (s * s).sum()
        # MAP symbol decisions
        sym_err += int((lp.argmax(axis=1) != idx).sum())
        if c.is_labeled:
            post = np.exp(lp)
            for k in range(m):
                q0 = post[:, bits[:, k] == 0].sum(axis=1)
                q0 = np.clip(q0, 1e-320, 1.0)
                q1 = np.clip(1.0 - q0, 1e-320, 1.0)
                hk = -(q0 * np.log2(q0) + q1 * np.log2(q1))
                hb_sum[k] += hk.sum()
                hb_sq[k] += (hk * hk).sum()
                dec1 = q0 < 0.5  # LLR < 0 decides bit 1
                bit_err[k] += int((dec1 != (bits[idx, k] == 1)).sum())

    N = n_samples
    mi_mean = mi_sum / N
    mi_se = math.sqrt(max(mi_sq / N - mi_mean**2, 0.0) / N)
    out = {
        "mi": (mi_mean / c.dimension, mi_se / c.dimension),
        "delta": _prop(sym_err, N),
    }
    if c.is_labeled:
        hb_mean = hb_sum / N
        hb_var = np.maximum(hb_sq / N - hb_mean**2, 0.0)
        bmd = (hx - hb_mean.sum()) / c.dimension
        bmd_se = math.sqrt(hb_var.sum() / N) / c.dimension
        out["bmd"] = (bmd, bmd_se)
        eps = bit_err.sum() / (N * m)
        out["epsilon"] = (eps, math.sqrt(max(eps * (1 - eps), 1e-320) / (N * m)))
    return out


def _prop(k: int, n: int):
    p = k / n
    return p, math.sqrt(max(p * (1 - p), 1e-320) / n)
