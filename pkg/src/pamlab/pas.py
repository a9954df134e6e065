"""Probabilistic amplitude shaping for even-M PAM.

Transmit chain: k data bits feed the constant-composition matcher, whose
amplitude sequence is labeled and, together with gamma*n further data bits,
systematically FEC-encoded. The gamma*n data bits and the parity bits act
as uniform sign bits that mirror each amplitude onto the upper half of the
alphabet, so symbol i carries the code bits (S_i, b(A_i)).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import ccdm
from .ccdm import Composition
from .constellations import Constellation, InputDistribution, pam_constellation, pas_amplitude_labels
from .demap import soft_bit_llrs
from .ldpc import LdpcCode, build_code, decode_bp_batch

__all__ = [
    "PasConfig",
    "PasFrame",
    "make_pas_config",
    "pas_config_at_se",
    "pas_encode",
    "pas_encode_frame",
    "pas_decode",
    "pas_extract",
    "pas_bit_llrs",
    "overall_se",
]


@dataclass(frozen=True)
class PasConfig:
    """Fixed parameters of one shaped modem instance."""

    M: int
    n: int
    gamma_n: int
    composition: Composition
    code: LdpcCode

    def __post_init__(self):
        m = self.m
        if self.M < 4 or self.M % 2:
            raise ValueError("PAS needs an even alphabet size M >= 4")
        if self.composition.n != self.n:
            raise ValueError("composition length does not match the frame length")
        if self.composition.num_symbols != self.M // 2:
            raise ValueError("composition must cover the M/2 amplitude levels")
        if not 0 <= self.gamma_n <= self.n:
            raise ValueError("gamma*n must lie in [0, n]")
        if self.code.n_bits != m * self.n:
            raise ValueError(f"code length {self.code.n_bits} != m*n = {m * self.n}")
        if self.code.k_bits != (m - 1) * self.n + self.gamma_n:
            raise ValueError(
                f"code dimension {self.code.k_bits} != (m-1)*n + gamma*n = "
                f"{(m - 1) * self.n + self.gamma_n}"
            )

    @property
    def m(self) -> int:
        return math.ceil(math.log2(self.M))

    @property
    def gamma(self) -> float:
        return self.gamma_n / self.n

    @property
    def k_dm(self) -> int:
        return ccdm.dm_input_length(self.composition)

    @property
    def data_len(self) -> int:
        return self.k_dm + self.gamma_n

    def constellation(self) -> Constellation:
        return pam_constellation(self.M, "pas")

    def symbol_distribution(self) -> InputDistribution:
        """Symbol prior induced by the composition with uniform signs."""
        pa = self.composition.empirical()
        half = [v / 2 for v in pa]
        return InputDistribution(tuple(half + half[::-1]))

    def amplitude_label_bits(self) -> np.ndarray:
        labs = pas_amplitude_labels(self.M)
        return np.array([[int(b) for b in lab] for lab in labs], dtype=np.uint8)

    def code_position(self, symbol: int, level: int) -> int:
        """Code-bit index carried by a symbol's bit level (0 = sign bit)."""
        m = self.m
        if level == 0:
            if symbol < self.gamma_n:
                return (m - 1) * self.n + symbol
            return self.code.k_bits + (symbol - self.gamma_n)
        return (m - 1) * symbol + (level - 1)

    def interleaver(self) -> np.ndarray:
        """(n, m) matrix of code-bit indices in symbol-major order."""
        n, m = self.n, self.m
        idx = np.empty((n, m), dtype=np.int64)
        sym = np.arange(n)
        idx[: self.gamma_n, 0] = (m - 1) * n + sym[: self.gamma_n]
        idx[self.gamma_n :, 0] = self.code.k_bits + sym[self.gamma_n :] - self.gamma_n
        for j in range(1, m):
            idx[:, j] = (m - 1) * sym + (j - 1)
        return idx


@dataclass(frozen=True)
class PasFrame:
    """One encoded frame with its intermediate quantities."""

    data_bits: np.ndarray
    amplitudes: np.ndarray  # amplitude indices 0..M/2-1
    sign_bits: np.ndarray
    symbols: np.ndarray  # normalized levels in [0, 1]


def make_pas_config(M: int, n: int, composition: Composition, code: LdpcCode) -> PasConfig:
    gamma_n = code.k_bits - (math.ceil(math.log2(M)) - 1) * n
    return PasConfig(M, n, gamma_n, composition, code)


def pas_config_at_se(M: int, n: int, amplitude_target, se_bpcu: float = 2.0) -> PasConfig:
    """Pick composition, gamma and code so the overall SE hits se_bpcu.

    The matcher rate is fixed by the quantized composition, so gamma*n
    absorbs the remainder: k_dm + gamma*n = se * n must be an integer.
    """
    m = math.ceil(math.log2(M))
    comp = ccdm.composition_for(amplitude_target, n)
    k_dm = ccdm.dm_input_length(comp)
    total = se_bpcu * n
    if abs(total - round(total)) > 1e-9:
        raise ValueError(f"se * n = {total} is not an integer")
    gamma_n = int(round(total)) - k_dm
    if not 0 <= gamma_n <= n:
        raise ValueError(f"target SE {se_bpcu} needs gamma*n = {gamma_n} outside [0, n]")
    code = build_code(m * n, (m - 1) * n + gamma_n)
    return PasConfig(M, n, gamma_n, comp, code)


def _amplitude_level_lut(cfg: PasConfig) -> np.ndarray:
    """Map (m-1)-bit label integers to amplitude indices; -1 when invalid."""
    bits = cfg.amplitude_label_bits()
    m1 = bits.shape[1]
    lut = np.full(2**m1, -1, dtype=np.int64)
    weights = 1 << np.arange(m1 - 1, -1, -1)
    for amp, row in enumerate(bits):
        lut[int((row * weights).sum())] = amp
    return lut


def pas_encode_frame(cfg: PasConfig, data) -> PasFrame:
    """Full transmit chain; see pas_encode for the symbol-only variant."""
    from .ldpc import encode as ldpc_encode

    data = np.asarray(data, dtype=np.uint8).reshape(-1)
    if len(data) != cfg.data_len:
        raise ValueError(f"data must be {cfg.data_len} bits, got {len(data)}")
    amps = ccdm.ccdm_encode(data[: cfg.k_dm], cfg.composition)
    label_bits = cfg.amplitude_label_bits()[amps].reshape(-1)
    info = np.concatenate([label_bits, data[cfg.k_dm :]])
    codeword = ldpc_encode(cfg.code, info)
    parity = codeword[cfg.code.k_bits :]
    signs = np.concatenate([data[cfg.k_dm :], parity])
    levels = amps / (cfg.M - 1)
    symbols = np.where(signs == 0, levels, 1.0 - levels)
    return PasFrame(data, amps, signs, symbols)


def pas_encode(cfg: PasConfig, data) -> np.ndarray:
    """Encode data bits into the n shaped PAM symbols of one frame."""
    return pas_encode_frame(cfg, data).symbols


def pas_bit_llrs(y, cfg: PasConfig, psnr_db: float) -> np.ndarray:
    """(n, m) matrix of exact bit LLRs (sign bit first) for received y.

    The symbol prior is the composition's amplitude distribution times a
    uniform sign bit, matching what the decoder may assume about parity.
    """
    c = cfg.constellation()
    probs = np.asarray(cfg.symbol_distribution().probs)
    with np.errstate(divide="ignore"):
        logp = np.where(probs > 0, np.log(np.maximum(probs, 1e-320)), -np.inf)
    return soft_bit_llrs(np.asarray(y, dtype=float), c, logp, psnr_db)


def pas_extract(cfg: PasConfig, transmitted_bits, converged: bool):
    """Recover data bits from a hard decision on the transmitted word.

    Returns (data_bits, frame_ok); frame_ok requires decoder convergence,
    a valid label sequence of exactly the matcher composition, and matcher
    acceptance of the recovered amplitude sequence.
    """
    bits = np.asarray(transmitted_bits, dtype=np.uint8).reshape(-1)
    m1 = cfg.m - 1
    label_bits = bits[: m1 * cfg.n].reshape(cfg.n, m1)
    weights = 1 << np.arange(m1 - 1, -1, -1)
    amps = _amplitude_level_lut(cfg)[(label_bits * weights).sum(axis=1)]
    sign_data = bits[m1 * cfg.n : cfg.code.k_bits]

    frame_ok = bool(converged)
    dm_bits = np.zeros(cfg.k_dm, dtype=np.uint8)
    if np.any(amps < 0):
        frame_ok = False
    else:
        counts = np.bincount(amps, minlength=cfg.M // 2)
        if tuple(counts.tolist()) != cfg.composition.counts:
            frame_ok = False
        else:
            decoded = ccdm.ccdm_decode(amps, cfg.composition)
            if decoded is None:
                frame_ok = False
            else:
                dm_bits = decoded
    return np.concatenate([dm_bits, sign_data]), frame_ok


def pas_decode(cfg: PasConfig, symbol_llrs, bp_iters: int = 200):
    """Invert the PAS chain from per-symbol bit LLRs.

    symbol_llrs is (n, m) (or flat symbol-major) in the pas_bit_llrs
    arrangement; see pas_extract for the frame_ok semantics.
    """
    llrs = np.asarray(symbol_llrs, dtype=float).reshape(cfg.n, cfg.m)
    code_llrs = np.empty(cfg.code.n_bits)
    code_llrs[cfg.interleaver()] = llrs
    bits, conv, _ = decode_bp_batch(cfg.code, code_llrs[None, :], bp_iters)
    return pas_extract(cfg, bits[0], bool(conv[0]))


def overall_se(cfg: PasConfig) -> float:
    """Net spectral efficiency R_DM + 1 - m*(1 - R_FEC) in bpcu."""
    r_dm = cfg.k_dm / cfg.n
    pa = np.asarray(cfg.composition.empirical())
    h_a = float(-(pa[pa > 0] * np.log2(pa[pa > 0])).sum())
    if r_dm > h_a + 1e-12:
        raise AssertionError("matcher rate exceeds the amplitude entropy")
    return r_dm + 1.0 - cfg.m * (1.0 - cfg.code.rate)
