"""AWGN channel realization and the Monte-Carlo frame-error-rate engine.

Every frame draws its randomness from a counter-based stream keyed by
(seed, psnr index, frame index), so results are bit-identical however the
work is scheduled. Stop-rule checks happen at fixed batch boundaries.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from . import pas as pas_mod
from .constellations import Constellation, cross_qam32, framed_cross_qam32, pam_constellation
from .demap import hard_bit_llrs, soft_bit_llrs
from .ldpc import build_code, decode_bp_batch, encode as ldpc_encode
from .rates import psnr_to_sigma

__all__ = [
    "SimConfig",
    "FerPoint",
    "awgn",
    "hard_llrs",
    "line_search_a",
    "run_fer",
    "write_fer_tsv",
    "UNIFORM_AMPLITUDES",
    "FOLDED_OPTIMUM_AMPLITUDES",
]

SCHEMES = ("pas_pam6", "pam8_uniform", "cross_qam32", "framed_cross_qam32")
UNIFORM_AMPLITUDES = (1 / 3, 1 / 3, 1 / 3)
# fold of the optimized PAM-6 symbol distribution onto the amplitude levels
FOLDED_OPTIMUM_AMPLITUDES = (0.4396, 0.2594, 0.3010)
BATCH = 48


def awgn(x, psnr_db: float, rng) -> np.ndarray:
    """Add white Gaussian noise with variance 10^(-psnr/10) per real
    dimension; symbols are normalized to [0, 1] per dimension."""
    x = np.asarray(x, dtype=float)
    sigma = psnr_to_sigma(psnr_db)
    return x + sigma * rng.standard_normal(x.shape)


def hard_llrs(y, c: Constellation, prior, a: float, psnr_db: float) -> np.ndarray:
    """Sign of the exact MAP bit LLRs, mapped to +-a (same a everywhere)."""
    probs = np.asarray(prior, dtype=float)
    with np.errstate(divide="ignore"):
        logp = np.where(probs > 0, np.log(np.maximum(probs, 1e-320)), -np.inf)
    return hard_bit_llrs(y, c, logp, psnr_db, a)


@dataclass(frozen=True)
class SimConfig:
    """One Monte-Carlo experiment over a PSNR grid."""

    scheme: str
    psnr_grid_db: tuple[float, ...]
    decoding: str = "sd"  # sd | hd
    bp_iters: int = 0  # 0 = default (200 soft, 20 hard)
    min_frame_errors: int = 50
    min_frame_errors_high: int = 100  # applies while measured FER >= 1e-2
    max_frames: int = 1_000_000
    seed: int = 0
    hd_a: float | None = None
    n_symbols: int = 3000  # real channel uses per frame
    amplitude_target: tuple[float, ...] = UNIFORM_AMPLITUDES
    se_bpcu: float = 2.0

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}; pick one of {SCHEMES}")
        if not self.psnr_grid_db:
            raise ValueError("empty PSNR grid")
        if self.decoding not in ("sd", "hd"):
            raise ValueError("decoding must be 'sd' or 'hd'")
        if self.min_frame_errors < 1:
            raise ValueError("min_frame_errors must be >= 1")
        if self.bp_iters < 0:
            raise ValueError("bp_iters must be >= 1 (or 0 for the default)")

    @property
    def iters(self) -> int:
        return self.bp_iters if self.bp_iters else (200 if self.decoding == "sd" else 20)


@dataclass(frozen=True)
class FerPoint:
    """Measured frame error rate at one PSNR, with a Wilson 95% interval."""

    psnr_db: float
    frames: int
    frame_errors: int
    fer: float
    wilson_lo: float
    wilson_hi: float


def wilson_interval(errors: int, frames: int, z: float = 1.959963984540054):
    if frames == 0:
        return 0.0, 1.0
    p = errors / frames
    denom = 1 + z * z / frames
    center = (p + z * z / (2 * frames)) / denom
    half = z * math.sqrt(p * (1 - p) / frames + z * z / (4 * frames * frames)) / denom
    lo = 0.0 if errors == 0 else max(0.0, center - half)  # one-sided at the edges
    hi = 1.0 if errors == frames else min(1.0, center + half)
    return lo, hi


class _Modem:
    """Per-scheme transmit/demap context, built once per worker."""

    def __init__(self, cfg: SimConfig):
        self.cfg = cfg
        n = cfg.n_symbols
        if cfg.scheme == "pas_pam6":
            self.pas = pas_mod.pas_config_at_se(6, n, cfg.amplitude_target, cfg.se_bpcu)
            self.c = self.pas.constellation()
            self.prior = np.asarray(self.pas.symbol_distribution().probs)
            self.data_len = self.pas.data_len
            self.code = self.pas.code
        else:
            self.pas = None
            if cfg.scheme == "pam8_uniform":
                self.c = pam_constellation(8, "pas")
                self.n_sym = n
            elif cfg.scheme == "cross_qam32":
                self.c = cross_qam32()
                self.n_sym = n // 2
            else:
                self.c = framed_cross_qam32()
                self.n_sym = n // 2
            m = self.c.bits_per_symbol
            n_bits = self.n_sym * m
            k_bits = int(round(cfg.se_bpcu * n))
            self.code = build_code(n_bits, k_bits)
            self.data_len = k_bits
            self.prior = np.full(self.c.size, 1.0 / self.c.size)
            bits = self.c.label_bits()
            weights = 1 << np.arange(m - 1, -1, -1)
            lut = np.full(2**m, -1, dtype=np.int64)
            for i, row in enumerate(bits):
                lut[int((row * weights).sum())] = i
            if np.any(lut < 0):
                raise ValueError(f"{self.c.name} labels do not cover the label space")
            self._point_of_label = lut
            self._weights = weights
        with np.errstate(divide="ignore"):
            self.log_prior = np.where(
                self.prior > 0, np.log(np.maximum(self.prior, 1e-320)), -np.inf
            )

    def tx_frame(self, rng):
        """Returns (data_bits, tx_symbols)."""
        data = rng.integers(0, 2, self.data_len, dtype=np.uint8)
        if self.pas is not None:
            return data, pas_mod.pas_encode(self.pas, data)
        cw = ldpc_encode(self.code, data)
        m = self.c.bits_per_symbol
        labels = (cw.reshape(self.n_sym, m) * self._weights).sum(axis=1)
        pts = self._point_of_label[labels]
        coords = self.c.coords()[pts]
        return data, coords[:, 0] if self.c.dimension == 1 else coords

    def rx_llrs(self, y, psnr_db: float) -> np.ndarray:
        """Code-ordered LLR vector from received symbols."""
        cfg = self.cfg
        if cfg.decoding == "sd":
            sym_llrs = soft_bit_llrs(y, self.c, self.log_prior, psnr_db)
        else:
            if cfg.hd_a is None:
                raise ValueError("hard decoding needs hd_a (run line_search_a)")
            sym_llrs = hard_bit_llrs(y, self.c, self.log_prior, psnr_db, cfg.hd_a)
        if self.pas is not None:
            out = np.empty(self.code.n_bits)
            out[self.pas.interleaver()] = sym_llrs
            return out
        return sym_llrs.reshape(-1)

    def check_frame(self, decoded_bits, converged, data) -> bool:
        """True when the frame is in error."""
        if self.pas is not None:
            rec, ok = pas_mod.pas_extract(self.pas, decoded_bits, converged)
            return (not ok) or not np.array_equal(rec, data)
        info = decoded_bits[: self.code.k_bits]
        return not np.array_equal(info, data)


def _frame_rng(seed: int, point_idx: int, frame_idx: int):
    return np.random.Generator(np.random.Philox(np.random.SeedSequence((seed, point_idx, frame_idx))))


def _run_point(cfg: SimConfig, point_idx: int) -> FerPoint:
    modem = _Modem(cfg)
    psnr = cfg.psnr_grid_db[point_idx]
    frames = errors = 0
    while True:
        batch = []
        for fi in range(frames, frames + BATCH):
            rng = _frame_rng(cfg.seed, point_idx, fi)
            data, x = modem.tx_frame(rng)
            y = awgn(x, psnr, rng)
            batch.append((data, modem.rx_llrs(y, psnr)))
        llrs = np.stack([b[1] for b in batch])
        bits, conv, _ = decode_bp_batch(modem.code, llrs, cfg.iters)
        for (data, _), b, cv in zip(batch, bits, conv):
            errors += modem.check_frame(b, cv, data)
        frames += BATCH
        fer = errors / frames
        need = cfg.min_frame_errors_high if fer >= 1e-2 else cfg.min_frame_errors
        if errors >= need or frames >= cfg.max_frames:
            break
    lo, hi = wilson_interval(errors, frames)
    return FerPoint(psnr, frames, errors, errors / frames, lo, hi)


def run_fer(cfg: SimConfig, threads: int = 1) -> list[FerPoint]:
    """Simulate every grid point until the stop rule fires; deterministic
    for a fixed config and seed, independent of threads."""
    idxs = list(range(len(cfg.psnr_grid_db)))
    if threads > 1 and len(idxs) > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(_run_point, [cfg] * len(idxs), idxs))
    return [_run_point(cfg, i) for i in idxs]


def line_search_a(cfg: SimConfig, pilot_psnr_db: float, grid, pilot_frames: int = 200) -> float:
    """Pick the hard-decision LLR magnitude minimizing pilot-run FER.

    Every candidate sees the same frames and noise (fixed seed); ties go
    to the smaller magnitude.
    """
    grid = list(grid)
    if not grid:
        raise ValueError("empty line-search grid")
    base = replace(cfg, decoding="hd", hd_a=1.0, psnr_grid_db=(pilot_psnr_db,))
    modem = _Modem(base)
    cached = []
    for fi in range(pilot_frames):
        rng = _frame_rng(cfg.seed, 0, fi)
        data, x = modem.tx_frame(rng)
        cached.append((data, awgn(x, pilot_psnr_db, rng)))
    best_a, best_err = None, None
    for a in sorted(grid):
        mod_a = _Modem(replace(base, hd_a=float(a)))
        errors = 0
        for s in range(0, pilot_frames, BATCH):
            chunk = cached[s : s + BATCH]
            llrs = np.stack([mod_a.rx_llrs(y, pilot_psnr_db) for _, y in chunk])
            bits, conv, _ = decode_bp_batch(mod_a.code, llrs, base.iters)
            for (data, _), b, cv in zip(chunk, bits, conv):
                errors += mod_a.check_frame(b, cv, data)
        if best_err is None or errors < best_err:
            best_a, best_err = float(a), errors
    return best_a


def write_fer_tsv(points: list[FerPoint], path) -> None:
    """`psnr fer` TSV plus a .stats sidecar with frames/errors/intervals."""
    with open(path, "w") as f:
        f.write("psnr fer\n")
        for p in points:
            f.write(f"{p.psnr_db:.6f}\t{p.fer:.6e}\n")
    side = str(path) + ".stats"
    with open(side, "w") as f:
        f.write("psnr frames errors fer wilson_lo wilson_hi\n")
        for p in points:
            f.write(
                f"{p.psnr_db:.6f} {p.frames} {p.frame_errors} "
                f"{p.fer:.6e} {p.wilson_lo:.6e} {p.wilson_hi:.6e}\n"
            )
