"""Spectral-efficiency functionals on the peak-power-constrained AWGN channel.

Four achievable-rate functionals are computed by numerical integration:
soft-decision symbol-metric (mutual information), soft-decision bit-metric,
and their hard-decision counterparts built on the symbol / bit error
probabilities of the MAP detector. Conventions:

* amplitudes normalized to [0, 1]; noise variance per real dimension is
  sigma^2 = 10**(-psnr_db/10), i.e. PSNR = 1/sigma^2;
* two-dimensional constellations see independent noise of variance sigma^2
  per real dimension and their rates are divided by two, so every rate is
  in bits per real channel use.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq
from scipy.special import logsumexp, ndtr

from .constellations import Constellation, InputDistribution

__all__ = [
    "Quadrature",
    "RateCurve",
    "rate_sd_smd",
    "rate_sd_bmd",
    "rate_hd_smd",
    "rate_hd_bmd",
    "hd_symbol_stats",
    "hd_bit_stats",
    "psnr_at_rate",
    "optimize_input_smd",
    "optimize_input_bmd",
    "psnr_to_sigma",
]

LOG2 = math.log(2.0)


@dataclass(frozen=True)
class Quadrature:
    """Numerical integration settings.

    gauss_hermite places `nodes` Gauss-Hermite nodes around every
    constellation point (per dimension); trapezoid uses a uniform grid of
    `nodes` points spanning `range_sigmas` noise deviations beyond the
    amplitude range and serves as the independent cross-check integrator.
    """

    scheme: str = "gauss_hermite"
    nodes: int = 128
    range_sigmas: float = 8.0

    def __post_init__(self):
        if self.scheme not in ("gauss_hermite", "trapezoid"):
            raise ValueError(f"unknown quadrature scheme {self.scheme!r}")
        if self.nodes < 8:
            raise ValueError("need at least 8 quadrature nodes")
        if self.scheme == "trapezoid" and self.range_sigmas < 6:
            raise ValueError("trapezoid range must cover at least 6 sigma")


DEFAULT_QUAD = Quadrature()


def psnr_to_sigma(psnr_db: float) -> float:
    """Noise standard deviation per real dimension for a peak SNR in dB."""
    return 10.0 ** (-psnr_db / 20.0)


def _entropy_bits(pmf: np.ndarray, axis: int = -1) -> np.ndarray:
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(pmf > 0, pmf * np.log2(np.maximum(pmf, 1e-320)), 0.0)
    return -terms.sum(axis=axis)


def _binary_entropy(q: np.ndarray) -> np.ndarray:
    q = np.clip(q, 0.0, 1.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        t0 = np.where(q > 0, q * np.log2(np.maximum(q, 1e-320)), 0.0)
        t1 = np.where(q < 1, (1 - q) * np.log2(np.maximum(1 - q, 1e-320)), 0.0)
    return -(t0 + t1)


def _coords_logprior(c: Constellation, p: InputDistribution):
    p.check_matches(c)
    xs = c.coords()
    probs = np.asarray(p.probs, dtype=float)
    with np.errstate(divide="ignore"):
        logp = np.where(probs > 0, np.log(np.maximum(probs, 1e-320)), -np.inf)
    return xs, probs, logp


def _sq_dist(y: np.ndarray, xs: np.ndarray) -> np.ndarray:
    """Squared distances between nodes (..., dim) and points (M, dim)."""
    diff = y[..., None, :] - xs
    return (diff**2).sum(axis=-1)


def _gh_nodes_1d(nodes: int):
    t, w = np.polynomial.hermite.hermgauss(nodes)
    return t, w / math.sqrt(math.pi)


def _conditional_entropies(
    c: Constellation,
    p: InputDistribution,
    psnr_db: float,
    q: Quadrature,
    want_bits: bool,
):
    """Return (H(X|Y), per-bit H(B_k|Y)) in bits, by numerical integration."""
    xs, probs, logp = _coords_logprior(c, p)
    sigma = psnr_to_sigma(psnr_db)
    inv2s2 = 1.0 / (2.0 * sigma * sigma)
    dim = c.dimension
    bits = c.label_bits() if want_bits else None
    m = bits.shape[1] if want_bits else 0

    h_sym = 0.0
    h_bits = np.zeros(m)

    def accumulate(y, w):
        # y: (N, dim) nodes, w: (N,) outer weights (already include P_X terms
        # for gauss_hermite, or p_Y * dy for trapezoid)
        nonlocal h_sym, h_bits
        ll = -_sq_dist(y, xs) * inv2s2 + logp[None, :]
        lp = ll - logsumexp(ll, axis=1, keepdims=True)
        post = np.exp(lp)
        h_sym += float(w @ _entropy_bits(post, axis=1))
        if want_bits:
            for k in range(m):
                q0 = post[:, bits[:, k] == 0].sum(axis=1)
                h_bits[k] += float(w @ _binary_entropy(q0))

    if q.scheme == "gauss_hermite":
        t, w1 = _gh_nodes_1d(q.nodes)
        active = np.nonzero(probs > 0)[0]
        if dim == 1:
            y = xs[active, 0][:, None] + math.sqrt(2.0) * sigma * t[None, :]
            w = probs[active][:, None] * w1[None, :]
            accumulate(y.reshape(-1, 1), w.ravel())
        else:
            ty, tx = np.meshgrid(t, t, indexing="ij")
            offsets = math.sqrt(2.0) * sigma * np.stack([tx.ravel(), ty.ravel()], axis=1)
            w2 = np.outer(w1, w1).ravel()
            for j in active:
                accumulate(xs[j] + offsets, probs[j] * w2)
    else:
        lo = xs.min() - q.range_sigmas * sigma
        hi = xs.max() + q.range_sigmas * sigma
        grid = np.linspace(lo, hi, q.nodes)
        dy = grid[1] - grid[0]
        tw = np.full(q.nodes, dy)
        tw[0] = tw[-1] = dy / 2
        norm = (2 * math.pi * sigma * sigma) ** (-dim / 2)
        if dim == 1:
            y = grid[:, None]
            wt = tw
        else:
            gy, gx = np.meshgrid(grid, grid, indexing="ij")
            y = np.stack([gx.ravel(), gy.ravel()], axis=1)
            wt = np.outer(tw, tw).ravel()
        ll = -_sq_dist(y, xs) * inv2s2 + logp[None, :]
        p_y = norm * np.exp(logsumexp(ll, axis=1))
        # chunked accumulate to bound memory on 2-D grids
        w_all = wt * p_y
        for s in range(0, len(y), 262144):
            accumulate(y[s : s + 262144], w_all[s : s + 262144])

    return h_sym, h_bits


def rate_sd_smd(
    c: Constellation,
    p: InputDistribution,
    psnr_db: float,
    q: Quadrature = DEFAULT_QUAD,
) -> float:
    """Mutual information I(X;Y) in bits per real channel use."""
    h_cond, _ = _conditional_entropies(c, p, psnr_db, q, want_bits=False)
    return max(0.0, (p.entropy() - h_cond) / c.dimension)


def rate_sd_bmd(
    c: Constellation,
    p: InputDistribution,
    psnr_db: float,
    q: Quadrature = DEFAULT_QUAD,
) -> float:
    """Bit-metric decoding rate max(0, H(X) - sum_k H(B_k|Y)) per real
    channel use."""
    if not c.is_labeled:
        raise ValueError(f"constellation {c.name!r} has no labels for BMD")
    _, h_bits = _conditional_entropies(c, p, psnr_db, q, want_bits=True)
    return max(0.0, (p.entropy() - h_bits.sum()) / c.dimension)


# ---------------------------------------------------------------------------
# Hard-decision statistics. The MAP decision cells for a Gaussian channel
# are intervals (1-D) or convex polygons (2-D power cells), so error
# probabilities reduce to Gaussian measures of interval sections.


def _map_cells_1d(xs: np.ndarray, logp: np.ndarray, sigma: float):
    """Decision interval [lo, hi] of every point (empty as lo > hi)."""
    M = len(xs)
    lo = np.full(M, -np.inf)
    hi = np.full(M, np.inf)
    s2 = sigma * sigma
    for i in range(M):
        if logp[i] == -np.inf:
            lo[i], hi[i] = np.inf, -np.inf
            continue
        for j in range(M):
            if j == i or logp[j] == -np.inf:
                continue
            t = 0.5 * (xs[i] + xs[j]) + s2 * (logp[i] - logp[j]) / (xs[j] - xs[i])
            if xs[j] > xs[i]:
                hi[i] = min(hi[i], t)
            else:
                lo[i] = max(lo[i], t)
    return lo, hi


def _correct_prob_2d(xs, logp, sigma, i, span: float = 12.0, gl_order: int = 12):
    """Pr[MAP decision = i | X = x_i] for a 2-D constellation.

    The decision cell is a convex intersection of half-planes, so for a
    fixed first coordinate the section is the interval between two
    piecewise-linear envelopes. The first coordinate is split into panels
    at every pairwise crossing of the constraint lines (where the envelopes
    kink or the section empties); within a panel the integrand is smooth
    and Gauss-Legendre integration is exact to machine accuracy.
    """
    others = [j for j in range(len(xs)) if j != i and logp[j] > -np.inf]
    a = 2.0 * (xs[others] - xs[i])  # (J, 2)
    b = (xs[others] ** 2).sum(axis=1) - (xs[i] ** 2).sum() + 2 * sigma * sigma * (
        logp[i] - logp[others]
    )
    mu1, mu2 = xs[i]
    left, right = mu1 - span * sigma, mu1 + span * sigma
    upper = [(a1, a2, bj) for (a1, a2), bj in zip(a, b) if a2 > 0]
    lower = [(a1, a2, bj) for (a1, a2), bj in zip(a, b) if a2 < 0]
    for a1, a2, bj in zip(a[:, 0], a[:, 1], b):
        if a2 == 0:  # vertical boundary: pure slab constraint on y1
            if a1 > 0:
                right = min(right, bj / a1)
            else:
                left = max(left, bj / a1)
    if left >= right:
        return 0.0

    def crossings(f1, f2):
        # (b1 - a1 x)/c1 = (b2 - a2 x)/c2
        a1, c1, b1 = f1
        a2, c2, b2 = f2
        den = a2 * c1 - a1 * c2
        if den == 0:
            return None
        return (b2 * c1 - b1 * c2) / den

    cuts = {left, right}
    fams = upper + lower
    for p in range(len(fams)):
        for q_ in range(p + 1, len(fams)):
            x = crossings(fams[p], fams[q_])
            if x is not None and left < x < right:
                cuts.add(x)
    edges = sorted(cuts)

    t_gl, w_gl = np.polynomial.legendre.leggauss(gl_order)
    total = 0.0
    for p, q_ in zip(edges, edges[1:]):
        if q_ - p <= 0:
            continue
        y1 = (p + q_) / 2 + (q_ - p) / 2 * t_gl
        hi = np.full(y1.shape, np.inf)
        lo = np.full(y1.shape, -np.inf)
        for a1, a2, bj in upper:
            hi = np.minimum(hi, (bj - a1 * y1) / a2)
        for a1, a2, bj in lower:
            lo = np.maximum(lo, (bj - a1 * y1) / a2)
        sect = np.maximum(ndtr((hi - mu2) / sigma) - ndtr((lo - mu2) / sigma), 0.0)
        pdf = np.exp(-((y1 - mu1) ** 2) / (2 * sigma * sigma)) / (math.sqrt(2 * math.pi) * sigma)
        total += (q_ - p) / 2 * float(w_gl @ (pdf * sect))
    return total


def hd_symbol_stats(
    c: Constellation,
    p: InputDistribution,
    psnr_db: float,
    q: Quadrature = DEFAULT_QUAD,
) -> float:
    """Symbol error probability of the MAP symbol decision."""
    xs, probs, logp = _coords_logprior(c, p)
    sigma = psnr_to_sigma(psnr_db)
    correct = 0.0
    if c.dimension == 1:
        x1 = xs[:, 0]
        lo, hi = _map_cells_1d(x1, logp, sigma)
        meas = np.maximum(ndtr((hi - x1) / sigma) - ndtr((lo - x1) / sigma), 0.0)
        correct = float(probs @ meas)
    else:
        for i in np.nonzero(probs > 0)[0]:
            correct += probs[i] * _correct_prob_2d(xs, logp, sigma, i)
    return min(max(1.0 - correct, 0.0), 1.0)


def rate_hd_smd(
    c: Constellation,
    p: InputDistribution,
    psnr_db: float,
    q: Quadrature = DEFAULT_QUAD,
) -> float:
    """Hard-decision symbol-metric rate from the symbol error probability."""
    delta = hd_symbol_stats(c, p, psnr_db, q)
    M = c.size
    penalty = float(_binary_entropy(np.array(delta))) + delta * math.log2(M - 1)
    return max(0.0, (p.entropy() - penalty) / c.dimension)


def _bit_llr_on_grid(y, xs, logp, bits_k, inv2s2):
    """Exact bit-k log-likelihood ratio log P[b=0|y]/P[b=1|y] on nodes y."""
    ll = -_sq_dist(y, xs) * inv2s2 + logp[None, :]
    mask0 = bits_k == 0
    with np.errstate(divide="ignore"):
        l0 = logsumexp(ll[..., mask0], axis=-1)
        l1 = logsumexp(ll[..., ~mask0], axis=-1)
    return l0 - l1


def _wrong_measure_1d(grid, llr, mu, sigma, wrong_sign):
    """Gaussian measure (mean mu) of {y: sign(llr(y)) is the wrong bit}.

    grid/llr sample the LLR densely; each sign crossing is located by
    inverse linear interpolation (the LLR is smooth and locally near-linear
    at the grid resolution) and the set measure is summed from exact
    Gaussian interval probabilities.
    """
    sgn = llr >= 0  # True = decide bit 0
    flips = np.nonzero(sgn[1:] != sgn[:-1])[0]
    a, b = grid[flips], grid[flips + 1]
    fa, fb = llr[flips], llr[flips + 1]
    edges = a - fa * (b - a) / (fb - fa)
    bounds = np.concatenate([[-np.inf], edges, [np.inf]])
    total = 0.0
    for seg in range(len(bounds) - 1):
        decides_zero = bool(sgn[0]) ^ (seg % 2 == 1)
        if decides_zero != wrong_sign:
            continue
        total += ndtr((bounds[seg + 1] - mu) / sigma) - ndtr((bounds[seg] - mu) / sigma)
    return total


def hd_bit_stats(
    c: Constellation,
    p: InputDistribution,
    psnr_db: float,
    q: Quadrature = DEFAULT_QUAD,
) -> float:
    """Average bit error probability of the MAP (LLR-sign) bit decisions."""
    if not c.is_labeled:
        raise ValueError(f"constellation {c.name!r} has no labels for BMD")
    xs, probs, logp = _coords_logprior(c, p)
    bits = c.label_bits()
    m = bits.shape[1]
    sigma = psnr_to_sigma(psnr_db)
    inv2s2 = 1.0 / (2.0 * sigma * sigma)
    span = 10.0
    err_total = 0.0

    if c.dimension == 1:
        x1 = xs[:, 0]
        grid = np.linspace(x1.min() - span * sigma, x1.max() + span * sigma, 4001)
        for k in range(m):
            llr = _bit_llr_on_grid(grid[:, None], xs, logp, bits[:, k], inv2s2)
            for i in np.nonzero(probs > 0)[0]:
                # wrong decision is "0" when the true bit is 1
                wrong_is_zero = bits[i, k] == 1
                err_total += probs[i] * _wrong_measure_1d(grid, llr, x1[i], sigma, wrong_is_zero)
    else:
        err_total = _bit_error_2d(xs, probs, logp, bits, sigma, span)
    return err_total / m


def _panelized_nodes(lo: float, hi: float, sigma: float, features, order: int = 12):
    """Composite Gauss-Legendre nodes on [lo, hi], with panels split at the
    feature abscissas and no panel wider than a third of a noise deviation."""
    t, w = np.polynomial.legendre.leggauss(order)
    cuts = [lo] + [f for f in sorted(set(features)) if lo < f < hi] + [hi]
    ys, ws = [], []
    for a, b in zip(cuts, cuts[1:]):
        parts = max(1, int(math.ceil((b - a) / (sigma / 3.0))))
        for s in range(parts):
            p = a + (b - a) * s / parts
            q_ = a + (b - a) * (s + 1) / parts
            ys.append((p + q_) / 2 + (q_ - p) / 2 * t)
            ws.append((q_ - p) / 2 * w)
    return np.concatenate(ys), np.concatenate(ws)


def _bit_error_2d(xs, probs, logp, bits, sigma, span):
    """Sum over bit levels of the MAP bit error probability, 2-D case.

    For every outer abscissa the wrong-decision set of a bit is a union of
    intervals shared by all symbols; only its Gaussian measure differs per
    conditioning symbol. Outer integration is composite Gauss-Legendre on
    sigma-scaled panels anchored at the grid and mid-grid lines.
    """
    inv2s2 = 1.0 / (2.0 * sigma * sigma)
    m = bits.shape[1]
    lo1, hi1 = xs[:, 0].min() - span * sigma, xs[:, 0].max() + span * sigma
    uniq1 = np.unique(xs[:, 0])
    features = np.concatenate([uniq1, (uniq1[:-1] + uniq1[1:]) / 2])
    y1_nodes, y1_w = _panelized_nodes(lo1, hi1, sigma, features)
    n2 = int(min(1600, max(300, 12 * (np.ptp(xs[:, 1]) + 2 * span * sigma) / sigma)))
    g2 = np.linspace(xs[:, 1].min() - span * sigma, xs[:, 1].max() + span * sigma, n2)
    active = np.nonzero(probs > 0)[0]
    pdf_norm = 1.0 / (math.sqrt(2 * math.pi) * sigma)

    def refine(y1v, y2v, bk):
        # two Newton steps on the exact LLR along the second coordinate
        for _ in range(2):
            d2 = (y1v[:, None] - xs[None, :, 0]) ** 2 + (y2v[:, None] - xs[None, :, 1]) ** 2
            w = np.exp(logp[None, :] - d2 * inv2s2)
            w0, w1 = w[:, bk == 0], w[:, bk == 1]
            s0, s1 = w0.sum(axis=1), w1.sum(axis=1)
            val = np.log(np.maximum(s0, 1e-320)) - np.log(np.maximum(s1, 1e-320))
            g0 = (w0 * (xs[None, bk == 0, 1] - y2v[:, None])).sum(axis=1) / (sigma * sigma)
            g1 = (w1 * (xs[None, bk == 1, 1] - y2v[:, None])).sum(axis=1) / (sigma * sigma)
            grad = g0 / np.maximum(s0, 1e-320) - g1 / np.maximum(s1, 1e-320)
            step = np.where(np.abs(grad) > 1e-12, val / np.where(grad == 0, 1.0, grad), 0.0)
            y2v = y2v - np.clip(step, -2 * (g2[1] - g2[0]), 2 * (g2[1] - g2[0]))
        return y2v

    err = 0.0
    chunk = max(1, int(4e6 // (n2 * len(xs))))
    for k in range(m):
        bk = bits[:, k]
        wrong = np.zeros(len(active))
        for s in range(0, len(y1_nodes), chunk):
            y1 = y1_nodes[s : s + chunk]
            pts = np.stack(
                [np.repeat(y1, n2), np.tile(g2, len(y1))], axis=1
            ).reshape(len(y1), n2, 2)
            llr = _bit_llr_on_grid(pts, xs, logp, bk, inv2s2)
            sgn = llr >= 0
            for r in range(len(y1)):
                row = llr[r]
                flips = np.nonzero(sgn[r, 1:] != sgn[r, :-1])[0]
                a, b = g2[flips], g2[flips + 1]
                fa, fb = row[flips], row[flips + 1]
                edges = a - fa * (b - a) / (fb - fa)
                if len(edges):
                    edges = np.sort(refine(np.full(len(edges), y1[r]), edges, bk))
                bounds = np.concatenate([[-np.inf], edges, [np.inf]])
                z = ndtr((bounds[None, :] - xs[active, 1][:, None]) / sigma)
                seg = np.diff(z, axis=1)  # (A, n_segments)
                first_zero = bool(sgn[r, 0])
                # measure of the {decide 1} set per conditioning symbol
                m1 = seg[:, 1::2].sum(axis=1) if first_zero else seg[:, 0::2].sum(axis=1)
                wrong_r = np.where(bk[active] == 0, m1, 1.0 - m1)
                pdfs = pdf_norm * np.exp(-((y1[r] - xs[active, 0]) ** 2) * inv2s2)
                wrong += y1_w[s + r] * pdfs * wrong_r
        err += float(probs[active] @ wrong)
    return err


def rate_hd_bmd(
    c: Constellation,
    p: InputDistribution,
    psnr_db: float,
    q: Quadrature = DEFAULT_QUAD,
) -> float:
    """Hard-decision bit-metric rate max(0, H(X) - m*H2(eps))."""
    eps = hd_bit_stats(c, p, psnr_db, q)
    m = c.bits_per_symbol
    return max(0.0, (p.entropy() - m * float(_binary_entropy(np.array(eps)))) / c.dimension)


# ---------------------------------------------------------------------------


def psnr_at_rate(
    rate_fn,
    target_bpcu: float,
    bracket: tuple[float, float],
    tol_bpcu: float = 1e-5,
    max_iter: int = 200,
) -> float:
    """PSNR (dB) where a nondecreasing rate function crosses target_bpcu.

    rate_fn maps psnr_db -> bpcu and must be monotone nondecreasing on the
    bracket; bisection stops once |rate - target| <= tol_bpcu.
    """
    lo, hi = bracket
    r_lo, r_hi = rate_fn(lo), rate_fn(hi)
    if not (r_lo - tol_bpcu <= target_bpcu <= r_hi + tol_bpcu) or r_hi <= r_lo:
        raise ValueError(
            f"target {target_bpcu} bpcu not bracketed by rates "
            f"[{r_lo:.6f}, {r_hi:.6f}] on PSNR [{lo}, {hi}] dB"
        )
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        r = rate_fn(mid)
        if abs(r - target_bpcu) <= tol_bpcu:
            return mid
        if r < target_bpcu:
            lo = mid
        else:
            hi = mid
    raise RuntimeError(f"no convergence to rate {target_bpcu} within {max_iter} bisections")


# ---------------------------------------------------------------------------
# Input-distribution optimization.


def optimize_input_smd(
    c: Constellation,
    psnr_db: float,
    q: Quadrature = Quadrature("trapezoid", 4001, 10.0),
    tol: float = 1e-8,
    max_iter: int = 20000,
    lb_trace: list | None = None,
) -> InputDistribution:
    """Capacity-achieving input distribution on the fixed alphabet.

    Blahut-Arimoto fixed point on a discretized output; every iterate is
    symmetrized under the point reflection i <-> M-1-i and the iteration
    stops when the capacity upper/lower bound gap drops below tol (bits).
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if c.dimension != 1:
        raise ValueError("input optimization implemented for 1-D alphabets")
    xs = c.coords()[:, 0]
    order = np.argsort(xs)
    if not np.allclose(xs[order] + xs[order[::-1]], xs.max() + xs.min()):
        raise ValueError("alphabet is not reflection symmetric")
    sigma = psnr_to_sigma(psnr_db)
    # symmetric output grid keeps the reflection symmetry exact
    grid = np.linspace(xs.min() - q.range_sigmas * sigma, xs.max() + q.range_sigmas * sigma, q.nodes)
    dy = grid[1] - grid[0]
    tw = np.full(q.nodes, dy)
    tw[0] = tw[-1] = dy / 2
    w_mat = np.exp(-((grid[None, :] - xs[:, None]) ** 2) / (2 * sigma * sigma))
    w_mat /= math.sqrt(2 * math.pi) * sigma
    w_dy = w_mat * tw[None, :]  # (M, N), rows integrate to ~1

    M = len(xs)
    r = np.full(M, 1.0 / M)
    # reflection partner of point i (mirror in sorted order)
    partner = np.empty(M, dtype=int)
    partner[order] = order[::-1]

    with np.errstate(divide="ignore"):
        log_w = np.log(np.maximum(w_mat, 1e-320))

    for _ in range(max_iter):
        p_y = r @ w_dy  # (N,)
        with np.errstate(divide="ignore"):
            log_py = np.log(np.maximum(p_y / tw, 1e-320))
        # D(W(.|x) || p_Y) in bits for every x
        d = (w_dy * (log_w - log_py[None, :])).sum(axis=1) / LOG2
        lb = float(r @ d)
        ub = float(d.max())
        if lb_trace is not None:
            lb_trace.append(lb)
        if ub - lb < tol:
            break
        r = r * np.exp((d - d.max()) * LOG2)
        r /= r.sum()
        r = 0.5 * (r + r[partner])
    else:
        raise RuntimeError(f"Blahut-Arimoto did not converge within {max_iter} iterations")
    return InputDistribution(tuple(r.tolist()))


def optimize_input_bmd(
    c: Constellation,
    psnr_db: float,
    q: Quadrature = DEFAULT_QUAD,
    grid_steps: int = 200,
    polish_tol: float = 1e-7,
) -> InputDistribution:
    """Best reflection-symmetric input for the bit-metric rate.

    The sign bit stays uniform; the M/2 amplitude probabilities are the free
    parameters. The amplitude simplex is scanned on a coarse grid and the
    best cell is polished by coordinate descent. Supports M = 2 and M = 6.
    """
    if not c.is_labeled:
        raise ValueError("BMD optimization needs a labeled constellation")
    M = c.size
    if M == 2:
        return InputDistribution((0.5, 0.5))
    if M != 6 or c.dimension != 1:
        raise ValueError("BMD input optimization implemented for PAM-2 and PAM-6")

    def dist_from_amp(pa):
        clean = [max(0.0, v) for v in pa]
        s = 2.0 * math.fsum(clean)
        px = [clean[0] / s, clean[1] / s, clean[2] / s]
        return InputDistribution(tuple(px + px[::-1]))

    def objective(pa):
        return rate_sd_bmd(c, dist_from_amp(pa), psnr_db, q)

    # coarse stage: evaluate the whole amplitude simplex in vectorized batches
    ticks = np.linspace(0.0, 1.0, grid_steps)
    cand = [(a0, a1, 1.0 - a0 - a1) for a0 in ticks for a1 in ticks if a0 + a1 <= 1.0 + 1e-12]
    scores = _bmd_rate_batch_sym(c, np.array(cand), psnr_db, q)
    best_idx = int(np.argmax(scores))
    best_pa, best_val = cand[best_idx], float(scores[best_idx])

    # polish: coordinate descent with a golden-section line search per
    # coordinate, bracketed one grid cell around the incumbent
    gr = (math.sqrt(5.0) - 1.0) / 2.0
    pa = list(best_pa)
    step = 1.5 / (grid_steps - 1)
    for _ in range(12):
        before = best_val
        for coord in (0, 1):
            other = 1 - coord

            def f(v):
                rest = 1.0 - v - pa[other]
                if v < -1e-15 or rest < -1e-15:
                    return -1.0
                trial = [0.0, 0.0, 0.0]
                trial[coord], trial[other], trial[2] = v, pa[other], max(rest, 0.0)
                return objective(tuple(trial))

            a, b = max(0.0, pa[coord] - step), min(1.0 - pa[other], pa[coord] + step)
            c1, c2 = b - gr * (b - a), a + gr * (b - a)
            f1, f2 = f(c1), f(c2)
            while b - a > 1e-9:
                if f1 < f2:
                    a, c1, f1 = c1, c2, f2
                    c2 = a + gr * (b - a)
                    f2 = f(c2)
                else:
                    b, c2, f2 = c2, c1, f1
                    c1 = b - gr * (b - a)
                    f1 = f(c1)
            v = 0.5 * (a + b)
            val = f(v)
            if val > best_val:
                best_val = val
                pa[coord] = v
                pa[2] = max(1.0 - pa[0] - pa[1], 0.0)
        step /= 3.0
        if best_val - before < polish_tol:
            break
    return dist_from_amp(pa)


def _bmd_rate_batch_sym(c: Constellation, amp: np.ndarray, psnr_db: float, q: Quadrature):
    """BMD rates of many reflection-symmetric PAM-6 inputs at once.

    amp holds one (a0, a1, a2) amplitude distribution per row; the induced
    symbol distribution halves each mass onto the mirrored point pair. Only
    the priors change across candidates, so the Gauss-Hermite geometry is
    computed once and reused.
    """
    xs = c.coords()[:, 0]
    bits = c.label_bits()
    sigma = psnr_to_sigma(psnr_db)
    t, w1 = _gh_nodes_1d(q.nodes)
    nodes = (xs[:, None] + math.sqrt(2.0) * sigma * t[None, :]).ravel()  # (M*G,)
    # linear-space likelihood kernel; the diagonal self term keeps every
    # row sum strictly positive even when far tails underflow
    kern = np.exp(-((nodes[:, None] - xs[None, :]) ** 2) / (2 * sigma * sigma))
    M, G = len(xs), len(t)
    masks0 = [bits[:, k] == 0 for k in range(bits.shape[1])]

    amp = np.maximum(amp, 0.0)
    amp = amp / amp.sum(axis=1, keepdims=True)
    px = np.concatenate([amp / 2, amp[:, ::-1] / 2], axis=1)  # (C, M)
    rates = np.empty(len(amp))
    chunk = max(1, int(4e7 // (M * G * M)))
    for s in range(0, len(amp), chunk):
        pc = px[s : s + chunk]  # (B, M)
        wgt = pc[:, None, :] * kern[None, :, :]  # (B, M*G, M)
        tot = wgt.sum(axis=2)
        outer = (pc[:, :, None] * w1[None, None, :]).reshape(len(pc), M * G)
        h_bits = np.zeros(len(pc))
        for mask in masks0:
            with np.errstate(invalid="ignore"):
                q0 = np.where(tot > 0, wgt[:, :, mask].sum(axis=2) / np.maximum(tot, 1e-320), 0.5)
            h_bits += (outer * _binary_entropy(q0)).sum(axis=1)
        hx = _entropy_bits(pc, axis=1)
        rates[s : s + chunk] = np.maximum(0.0, hx - h_bits)
    return rates


# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RateCurve:
    """A sampled rate-vs-PSNR curve for one (constellation, input, metric)."""

    points: tuple[tuple[float, float], ...]
    metric: str
    constellation: str
    distribution: str

    def __post_init__(self):
        psnrs = [p for p, _ in self.points]
        if any(b <= a for a, b in zip(psnrs, psnrs[1:])):
            raise ValueError("PSNR grid must be strictly increasing")

    def write_tsv(self, path) -> None:
        """`psnr rate` header then one %.6f\\t%.6f row per point."""
        with open(path, "w") as f:
            f.write("psnr rate\n")
            for psnr, rate in self.points:
                f.write(f"{psnr:.6f}\t{rate:.6f}\n")


METRIC_FUNCS = {
    "sd_smd": rate_sd_smd,
    "sd_bmd": rate_sd_bmd,
    "hd_smd": rate_hd_smd,
    "hd_bmd": rate_hd_bmd,
}
