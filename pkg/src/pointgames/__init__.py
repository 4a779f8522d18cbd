"""Exact point games, their ladder constructions, and a compiler to protocols."""

__version__ = "0.1.0"

from .exactmath import InputError, Polynomial, sturm_root_count, sign_on_shifted_axis
from .core import PointFn1D, PointFn2D, check_valid_fn_1d, check_transition_1d, check_transition_2d
from .games import TDPG, TIPG, RepeatBlock, verify_tdpg, verify_tipg, tipg_to_tdpg, tdpg_to_tipg
from .ladders import build_bias_sixth_tipg, build_family_tipg, search_family_params, continuum_cutoff
from .ddb import DDBGame, ddb_recursion, ddb_dual_bound_pb

__all__ = [
    "InputError", "Polynomial", "sturm_root_count", "sign_on_shifted_axis",
    "PointFn1D", "PointFn2D", "check_valid_fn_1d", "check_transition_1d", "check_transition_2d",
    "TDPG", "TIPG", "RepeatBlock", "verify_tdpg", "verify_tipg", "tipg_to_tdpg", "tdpg_to_tipg",
    "build_bias_sixth_tipg", "build_family_tipg", "search_family_params", "continuum_cutoff",
    "DDBGame", "ddb_recursion", "ddb_dual_bound_pb",
]
