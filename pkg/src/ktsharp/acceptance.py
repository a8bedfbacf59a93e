"""The nine acceptance checks, runnable from tests and from ``ktsharp corpus``."""

from __future__ import annotations

import random
import time
from dataclasses import dataclass

import numpy as np

from .compiler import compile_formula
from .harness import (ALPHABETS, all_strings, binary_count_oracle, corpus_entry, load_corpus,
                      diff_test, is_subsequence, naive_foc_holds, oracle_membership,
                      random_binary_program, random_core_formula, random_crasp, random_foc,
                      random_strings, strings_of_length, subsequence_formula)
from .interpreter import (Evaluator, crasp_accepts_batch, end_satisfies_batch,
                          lm_assigns_nonzero, lm_greedy_decode, run_crasp_batch)
from .parsing import parse_kt
from .shadow import rational_shadow_forward
from .syntax import modal_depth
from .translator import crasp_to_kt, desugar_binary_count, foc_nf_to_kt, kt_to_crasp

TABLE = ("astar_bstar", "astar_bstar_astar", "anbncn", "dyck1", "hello")


@dataclass
class CriterionResult:
    number: int
    title: str
    passed: bool
    detail: str
    seconds: float

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"[{status}] criterion {self.number}: {self.title} ({self.detail}; {self.seconds:.1f}s)"


def _timed(number: int, title: str):
    def wrap(fn):
        def run(**kwargs) -> CriterionResult:
            start = time.perf_counter()
            passed, detail = fn(**kwargs)
            return CriterionResult(number, title, passed, detail, time.perf_counter() - start)
        run.__name__ = fn.__name__
        run.__doc__ = fn.__doc__
        return run
    return wrap


def table_formulas() -> dict:
    return {lang: corpus_entry(f"{lang}.kt").obj for lang in TABLE}


def compiled_corpus() -> dict:
    """Name -> (formula, alphabet, language) for every formula the compiler is checked on."""
    out = {lang: (f, ALPHABETS[lang], lang) for lang, f in table_formulas().items()}
    dyck = corpus_entry("dyck1.crasp").obj
    out["dyck1.crasp (translated)"] = (crasp_to_kt(dyck), tuple(dyck.alphabet), "dyck1")
    return out


def corpus_formulas() -> dict:
    """Name -> (formula, alphabet, language) for every compilable corpus file."""
    out = {}
    for e in load_corpus():
        if e.kind == "kt":
            out[e.name] = (e.obj, e.alphabet, e.language)
        elif e.kind == "crasp":
            out[e.name] = (crasp_to_kt(e.obj), e.alphabet, e.language)
        elif e.kind == "foc":
            out[e.name] = (foc_nf_to_kt(e.obj), e.alphabet, e.language)
    return out


@_timed(1, "table formulas agree with independent oracles")
def criterion_1():
    bad = 0
    total = 0
    for lang, f in table_formulas().items():
        max_len = 10 if lang == "dyck1" else 8
        for n in range(1, max_len + 1):
            words = strings_of_length(ALPHABETS[lang], n)
            got = end_satisfies_batch(f, words)
            want = np.array([oracle_membership(lang, w) for w in words])
            bad += int((got != want).sum())
            total += len(words)
    return bad == 0, f"{total} strings, {bad} disagreements"


@_timed(2, "compiled transformers simulate every subformula")
def criterion_2(random_count: int = 1000, exhaustive_len: int = 8, random_len: int = 64,
                seed: int = 0):
    bad = 0
    checks = 0
    dev = 0.0
    for name, (f, alphabet, lang) in compiled_corpus().items():
        model = compile_formula(f, alphabet)
        words = list(all_strings(alphabet, exhaustive_len))
        words += random_strings(alphabet, random_count, random_len, seed, lang)
        report = diff_test(f, model, words, name)
        bad += report.disagreements
        checks += report.checks
        dev = max(dev, report.max_deviation)
    passed = bad == 0 and dev <= 1e-6
    return passed, f"{checks} checks, {bad} disagreements, max deviation {dev:.2g}"


@_timed(3, "block count equals modal depth")
def criterion_3(fuzzed: int = 200, seed: int = 3):
    formulas = [(f, a) for f, a, _ in corpus_formulas().values()]
    formulas += [(subsequence_formula(s), ("a", "b")) for s in ("ab", "aab", "abba")]
    rng = random.Random(seed)
    for _ in range(fuzzed):
        alphabet = ("a", "b")
        formulas.append((random_core_formula(rng, alphabet, rng.randint(0, 3)), alphabet))
    wrong = [f for f, a in formulas if len(compile_formula(f, a).blocks) != modal_depth(f)]
    return not wrong, f"{len(formulas)} formulas, {len(wrong)} mismatches"


def _agree(accept_a, accept_b, alphabet, max_len: int) -> int:
    bad = 0
    for n in range(1, max_len + 1):
        words = strings_of_length(alphabet, n)
        bad += int((accept_a(words) != accept_b(words)).sum())
    return bad


@_timed(4, "C-RASP and Kt[#] translations preserve acceptance")
def criterion_4(programs: int = 500, formulas: int = 500, max_len: int = 6, seed: int = 4):
    rng = random.Random(seed)
    alphabet = ("a", "b")
    bad_p = bad_f = 0
    for _ in range(programs):
        p = random_crasp(rng, alphabet, 8)
        f = crasp_to_kt(p)
        bad_p += _agree(lambda ws: crasp_accepts_batch(p, ws),
                        lambda ws: end_satisfies_batch(f, ws), alphabet, max_len) > 0
    for _ in range(formulas):
        f = random_core_formula(rng, alphabet, rng.randint(0, 3))
        p = kt_to_crasp(f, alphabet)
        bad_f += _agree(lambda ws: end_satisfies_batch(f, ws),
                        lambda ws: crasp_accepts_batch(p, ws), alphabet, max_len) > 0
    return bad_p + bad_f == 0, (f"{programs} programs ({bad_p} failing), "
                                f"{formulas} formulas ({bad_f} failing)")


@_timed(5, "subsequence formulas match the subsequence oracle")
def criterion_5(max_s: int = 4, max_len: int = 10):
    bad = 0
    depth_bad = 0
    patterns = list(all_strings("ab", max_s))
    for s in patterns:
        f = subsequence_formula(s)
        depth_bad += modal_depth(f) != len(s)
        for n in range(1, max_len + 1):
            words = strings_of_length("ab", n)
            got = end_satisfies_batch(f, words)
            bad += sum(bool(g) != is_subsequence(s, w) for g, w in zip(got, words))
    return bad + depth_bad == 0, (f"{len(patterns)} patterns, {bad} disagreements, "
                                  f"{depth_bad} depth mismatches")


@_timed(6, "binary counting desugars to ordinary counting")
def criterion_6(programs: int = 200, max_len: int = 6, seed: int = 6):
    rng = random.Random(seed)
    alphabet = ("a", "b")
    bad = 0
    for _ in range(programs):
        p = random_binary_program(rng, alphabet)
        q = desugar_binary_count(p)
        for n in range(1, max_len + 1):
            words = strings_of_length(alphabet, n)
            got = run_crasp_batch(q, words)["X"]
            for w, row in zip(words, got):
                if list(row) != binary_count_oracle(p, "X", w):
                    bad += 1
    return bad == 0, f"{programs} programs, {bad} mismatching strings"


@_timed(7, "FOC[+] normal forms embed at modal depth 1")
def criterion_7(instances: int = 50, max_len: int = 6, seed: int = 7):
    rng = random.Random(seed)
    alphabet = ("a", "b")
    bad = depth_bad = 0
    for _ in range(instances):
        nf = random_foc(rng, alphabet)
        f = foc_nf_to_kt(nf)
        depth_bad += modal_depth(f) != 1
        for n in range(1, max_len + 1):
            words = strings_of_length(alphabet, n)
            got = end_satisfies_batch(f, words)
            bad += sum(bool(g) != naive_foc_holds(nf, w) for g, w in zip(got, words))
    return bad + depth_bad == 0, f"{instances} instances, {bad} disagreements, {depth_bad} depth mismatches"


@_timed(8, "Dyck-1 language model")
def criterion_8(max_len: int = 10):
    lm = corpus_entry("dyck1.lm").obj
    bad = sum(lm_assigns_nonzero(lm, w) != oracle_membership("dyck1", w)
              for w in all_strings(lm.letters, max_len))
    order = [lm.eos, ")", "("]
    result = lm_greedy_decode(lm, "(", max_steps=64, tie_break=order)
    decoded_ok = result.status == "eos" and oracle_membership("dyck1", result.text)
    return bad == 0 and decoded_ok, (f"{bad} disagreements up to length {max_len}; "
                                     f"decode('(') = {result.text!r} ({result.status})")


@_timed(9, "exact rational shadow certifies the float runs")
def criterion_9(strings_per_model: int = 8, max_len: int = 512, seed: int = 9):
    worst = 0.0
    failures = []
    models = corpus_formulas()
    for name, (f, alphabet, lang) in models.items():
        model = compile_formula(f, alphabet)
        words = random_strings(alphabet, strings_per_model, max_len, seed, lang)
        words.append("".join(random.Random(seed).choice(alphabet) for _ in range(max_len)))
        for w in words:
            shadow = rational_shadow_forward(model, w)
            worst = max(worst, shadow.max_pre_ln1_error)
            ev = Evaluator(w)
            ok = shadow.gtz_exact and shadow.max_pre_ln1_error <= 1e-9
            for block in shadow.blocks:
                for key, ratio in block.count_ratios.items():
                    body = parse_kt(key[2:key.rindex("]@")], alphabet)
                    ok &= block.ratio_exact[key]
                    ok &= bool(ratio[0] == 0 and np.array_equal(ratio[1:], ev.count(body)[0]))
            if not ok:
                failures.append((name, w))
    return not failures, (f"{len(models)} models, {len(failures)} failing strings, "
                          f"max pre-LN float error {worst:.2g}")


CRITERIA = [criterion_1, criterion_2, criterion_3, criterion_4, criterion_5, criterion_6,
            criterion_7, criterion_8, criterion_9]


def run_all(echo=print) -> list[CriterionResult]:
    results = []
    for criterion in CRITERIA:
        result = criterion()
        if echo:
            echo(result.line())
        results.append(result)
    return results


__all__ = ["CriterionResult", "CRITERIA", "run_all", "table_formulas", "compiled_corpus",
           "corpus_formulas"]
