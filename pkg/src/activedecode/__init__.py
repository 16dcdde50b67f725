"""Weighted belief-propagation decoding of binary linear codes, trained with
actively selected channel words."""

from .bp import DecodeResult, DecoderConfig, bp_decode, bp_decode_batch
from .channel import awgn, hard_decision, llr, modulate_bpsk, snr_to_sigma
from .code import (CodeSpec, bch_code, builtin_code, hamming74, hamming_distance, load_code,
                   parse_alist, parse_dense, repetition, single_parity_check, syndrome, to_alist)
from .wbp import (ForwardRecord, WbpWeights, init_weights, load_weights, save_weights,
                  wbp_decode_batch, wbp_forward)

__version__ = "0.1.0"
