"""Command-line interface: ``ktsharp <command> ...``.

Exit status is 0 on success or full agreement, 1 when a counterexample or
failing check is found, and 2 on usage, syntax or file errors.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import program as P
from .compiler import CompilationError, compile_formula, report
from .harness import all_strings, diff_test, random_strings
from .interpreter import (EmptyStringError, crasp_accepts, end_satisfies, formula_vector,
                          lm_assigns_nonzero, lm_greedy_decode, run_crasp, StuckDecodeError)
from .parsing import KtSyntaxError, format_crasp, format_kt, format_lm, load
from .runtime import ModelFormatError, ZeroVarianceError, load_model, model_forward, save_model
from .syntax import modal_depth
from .translator import crasp_to_kt, desugar_binary_count, foc_nf_to_kt, kt_to_crasp


class UsageError(Exception):
    pass


def _formula_of(path: str):
    """``(alphabet, formula)`` for any loadable file; programs go through translation."""
    kind, obj = load(path)
    if kind == "kt":
        return obj
    if kind == "crasp":
        return tuple(obj.alphabet), crasp_to_kt(obj)
    if kind == "foc":
        return tuple(obj.alphabet), foc_nf_to_kt(obj)
    raise UsageError(f"{path}: language-model files cannot be compiled; use 'decode'")


def _bool(x) -> str:
    return "true" if x else "false"


def cmd_parse(args) -> int:
    kind, obj = load(args.file)
    if kind == "kt":
        alphabet, f = obj
        print(format_kt(alphabet, f), end="")
        print(f"# modal depth {modal_depth(f)}")
    elif kind == "crasp":
        print(format_crasp(obj), end="")
    elif kind == "lm":
        print(format_lm(obj), end="")
    else:
        print(format_kt(obj.alphabet, foc_nf_to_kt(obj)), end="")
    return 0


def cmd_eval(args) -> int:
    kind, obj = load(args.file)
    w = args.string
    if kind == "lm":
        print(_bool(lm_assigns_nonzero(obj, w)))
        return 0
    if kind == "crasp":
        if args.positions:
            for name, v in run_crasp(obj, w).items():
                print(f"{name}: {' '.join(str(int(x)) for x in v)}")
            return 0
        print(_bool(crasp_accepts(obj, w)))
        return 0
    alphabet, f = obj if kind == "kt" else (obj.alphabet, foc_nf_to_kt(obj))
    if args.positions:
        print(" ".join(_bool(x) for x in formula_vector(f, w)))
        return 0
    print(_bool(end_satisfies(f, w)))
    return 0


def cmd_compile(args) -> int:
    alphabet, f = _formula_of(args.file)
    model = compile_formula(f, alphabet)
    save_model(model, args.output)
    print(f"wrote {args.output}: {len(model.blocks)} blocks, d = {model.d}")
    if args.report:
        text = report(f, alphabet, model)
        if args.report == "-":
            print(text, end="")
        else:
            Path(args.report).write_text(text, encoding="utf-8")
    return 0


def cmd_run(args) -> int:
    model = load_model(args.model)
    if not args.string:
        raise UsageError("the input string must be nonempty")
    A = model_forward(model, args.string)
    if args.stream:
        np.savetxt(sys.stdout, A, fmt="%+.6f")
        return 0
    if model.output is None:
        raise UsageError("model has no output subformula")
    odd, even = model.pair(model.output)
    print(_bool(A[even, -1] > A[odd, -1]))
    return 0


def cmd_translate(args) -> int:
    kind, obj = load(args.file)
    if args.to == "kt":
        if kind == "kt":
            alphabet, f = obj
        elif kind == "crasp":
            alphabet, f = obj.alphabet, crasp_to_kt(obj)
        elif kind == "foc":
            alphabet, f = obj.alphabet, foc_nf_to_kt(obj)
        else:
            raise UsageError("language-model files cannot be translated")
        print(format_kt(alphabet, f), end="")
        return 0
    if kind == "kt":
        alphabet, f = obj
        print(format_crasp(kt_to_crasp(f, alphabet)), end="")
    elif kind == "crasp":
        print(format_crasp(desugar_binary_count(obj)), end="")
    elif kind == "foc":
        print(format_crasp(kt_to_crasp(foc_nf_to_kt(obj), obj.alphabet)), end="")
    else:
        raise UsageError("language-model files cannot be translated")
    return 0


def cmd_diff(args) -> int:
    alphabet, f = _formula_of(args.file)
    model = load_model(args.model) if args.model else compile_formula(f, alphabet)
    if args.random is not None:
        words = random_strings(alphabet, args.random, args.max_len, args.seed)
    else:
        words = list(all_strings(alphabet, args.exhaustive))
    rep = diff_test(f, model, words, Path(args.file).name)
    if args.json:
        Path(args.json).write_text(rep.to_json(), encoding="utf-8")
    print(rep.summary())
    print(f"{rep.disagreements} disagreements")
    if rep.counterexample:
        c = rep.counterexample
        print(f"counterexample: {c['string']!r} at position {c['position']}: "
              f"{c['subformula']} expected {_bool(c['expected'])}")
        return 1
    return 0


def cmd_decode(args) -> int:
    kind, lm = load(args.file)
    if kind != "lm":
        raise UsageError(f"{args.file} is not a language-model file (.lm)")
    order = None
    if args.tie_break:
        text = args.tie_break
        if "," in text:
            order = [lm.eos if a == "EOS" else a for a in text.split(",")]
        else:
            order = list(text.replace("EOS", lm.eos))
    try:
        result = lm_greedy_decode(lm, args.prompt, args.max_steps, order)
    except StuckDecodeError as e:
        print(f"stuck: {e}", file=sys.stderr)
        return 1
    print(result.text)
    print(f"# stopped: {result.status}")
    return 0


def cmd_corpus(args) -> int:
    from .acceptance import run_all

    results = run_all(echo=lambda line: print(line, flush=True))
    failed = [r for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} criteria passed")
    return 1 if failed else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ktsharp", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("parse", help="parse a file and print its normalized form")
    p.add_argument("file")
    p.set_defaults(func=cmd_parse)

    p = sub.add_parser("eval", help="evaluate a formula or program on a string")
    p.add_argument("file")
    p.add_argument("string")
    p.add_argument("--positions", action="store_true", help="print values at every position")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("compile", help="compile a formula or program to a transformer")
    p.add_argument("file")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--report", metavar="PATH", help="write a compilation report ('-' for stdout)")
    p.set_defaults(func=cmd_compile)

    p = sub.add_parser("run", help="run a saved model on a string")
    p.add_argument("model")
    p.add_argument("string")
    p.add_argument("--stream", action="store_true", help="print the final residual stream")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("translate", help="translate between Kt[#] and C-RASP")
    p.add_argument("file")
    p.add_argument("--to", choices=["kt", "crasp"], required=True)
    p.set_defaults(func=cmd_translate)

    p = sub.add_parser("diff", help="compare a compiled model with the interpreter")
    p.add_argument("file")
    mode = p.add_mutually_exclusive_group()
    mode.add_argument("--exhaustive", type=int, metavar="L", default=None)
    mode.add_argument("--random", type=int, metavar="N", default=None)
    p.add_argument("--max-len", type=int, default=64)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--model", help="use a saved model instead of compiling")
    p.add_argument("--json", metavar="PATH", help="write the DiffReport as JSON")
    p.set_defaults(func=cmd_diff)

    p = sub.add_parser("decode", help="greedy decoding with a C-RASP language model")
    p.add_argument("file")
    p.add_argument("--prompt", required=True)
    p.add_argument("--max-steps", type=int, default=32)
    p.add_argument("--tie-break", help="symbol order, e.g. '$)(' or 'EOS,),('")
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("corpus", help="run the full acceptance suite")
    p.set_defaults(func=cmd_corpus)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "diff" and args.random is None and args.exhaustive is None:
        args.exhaustive = 6
    try:
        return args.func(args)
    except (UsageError, KtSyntaxError, P.ProgramError, ModelFormatError, CompilationError,
            EmptyStringError, OSError, ValueError) as e:
        print(f"ktsharp: error: {e}", file=sys.stderr)
        return 2
    except ZeroVarianceError as e:
        print(f"ktsharp: numeric error: {e}", file=sys.stderr)
        return 1
