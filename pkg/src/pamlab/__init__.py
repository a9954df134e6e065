"""Coded-modulation laboratory for the peak-power-constrained AWGN channel."""

__version__ = "0.1.0"

from .ccdm import Composition, DmCode, ccdm_decode, ccdm_encode, composition_for, dm_input_length
from .channel import FerPoint, SimConfig, awgn, hard_llrs, line_search_a, run_fer
from .constellations import (
    Constellation,
    InputDistribution,
    cross_qam32,
    framed_cross_qam32,
    pam_constellation,
    qam36,
    read_constellation,
    write_constellation,
)
from .ldpc import LdpcCode, build_code, decode_bp, encode, export_alist
from .pas import (
    PasConfig,
    PasFrame,
    overall_se,
    pas_bit_llrs,
    pas_config_at_se,
    pas_decode,
    pas_encode,
)
from .rates import (
    Quadrature,
    RateCurve,
    hd_bit_stats,
    hd_symbol_stats,
    optimize_input_bmd,
    optimize_input_smd,
    psnr_at_rate,
    rate_hd_bmd,
    rate_hd_smd,
    rate_sd_bmd,
    rate_sd_smd,
)
from .search import SubsetSearchResult, search_subset_bmd_gray, search_subset_smd
