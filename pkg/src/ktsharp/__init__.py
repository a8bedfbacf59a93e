"""Kt[#] and C-RASP: parsing, interpretation, translation and compilation to transformers."""

from .compiler import compile_formula, parallel_compose
from .interpreter import (crasp_accepts, end_satisfies, eval_count, eval_formula,
                          lm_assigns_nonzero, lm_greedy_decode, run_crasp)
from .parsing import parse_crasp, parse_kt, parse_lm, pretty_print
from .runtime import load_model, model_forward, save_model
from .syntax import desugar, modal_depth, normalize_comparison, pretty, to_canonical_dnf
from .translator import crasp_to_kt, desugar_binary_count, foc_nf_to_kt, kt_to_crasp

__version__ = "0.1.0"

__all__ = [
    "compile_formula", "parallel_compose", "crasp_accepts", "end_satisfies", "eval_count",
    "eval_formula", "lm_assigns_nonzero", "lm_greedy_decode", "run_crasp", "parse_crasp",
    "parse_kt", "parse_lm", "pretty_print", "load_model", "model_forward", "save_model",
    "desugar", "modal_depth", "normalize_comparison", "pretty", "to_canonical_dnf",
    "crasp_to_kt", "desugar_binary_count", "foc_nf_to_kt", "kt_to_crasp",
]
