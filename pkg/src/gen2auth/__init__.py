"""Filtered-LFSR PRNG for EPC Gen2 tags, its statistical validation, and the
mutual-authentication protocol built on it."""

from .boolfn import FILTER, FilterProfile, analyze_filter, filter_eval
from .crc16 import crc16_compute, crc16_verify
from .lfsr import LfsrState, lfsr_clock, lfsr_new, lfsr_run, poly_is_primitive
from .prng import Prng, prng_keystream, prng_new, update_credential
from .protocol import (
    ServerKeystore,
    TagCredentials,
    TagState,
    compute_response,
    server_verify,
    session_keystream,
    tag_finalize,
    tag_respond,
)

__version__ = "0.1.0"
