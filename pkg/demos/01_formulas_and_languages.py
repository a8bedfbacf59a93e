"""Counting formulas as language recognizers.

Walks through the five corpus formulas, evaluates them position by
position, and checks each one against a plain Python membership test.
Run with ``python3 demos/01_formulas_and_languages.py``.
"""

# %% imports
import numpy as np

from ktsharp.harness import (ALPHABETS, corpus_entry, oracle_membership, strings_of_length,
                             subsequence_formula)
from ktsharp.interpreter import end_satisfies_batch, formula_vector
from ktsharp.syntax import modal_depth, pretty

# %% the corpus formulas
table = {lang: corpus_entry(f"{lang}.kt").obj
         for lang in ("astar_bstar", "astar_bstar_astar", "anbncn", "dyck1", "hello")}
for lang, f in table.items():
    print(f"{lang:18s} depth {modal_depth(f)}  {pretty(f)[:70]}")

# %% truth values along a word
dyck = table["dyck1"]
w = "(()))("
print("\nDyck-1 at each prefix of", repr(w))
for i, v in enumerate(formula_vector(dyck, w), start=1):
    print(f"  {w[:i]:8s} {v}")

# %% exhaustive comparison with the oracles
print("\nexhaustive agreement, lengths 1..8")
for lang, f in table.items():
    bad = total = 0
    for n in range(1, 9):
        words = strings_of_length(ALPHABETS[lang], n)
        got = end_satisfies_batch(f, words)
        want = np.array([oracle_membership(lang, x) for x in words])
        bad += int((got != want).sum())
        total += len(words)
    print(f"  {lang:18s} {total:6d} strings, {bad} disagreements")

# %% subsequence formulas: one counting level per letter
for s in ("ab", "aab", "abba"):
    f = subsequence_formula(s)
    words = strings_of_length("ab", 7)
    hits = int(end_satisfies_batch(f, words).sum())
    print(f"\ncontains {s!r} as a subsequence: depth {modal_depth(f)}, "
          f"{hits}/{len(words)} words of length 7")
    print("  ", pretty(f))
