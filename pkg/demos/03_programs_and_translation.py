"""C-RASP programs and their counting-formula translations.

The Dyck-1 program is translated to a formula and back, binary counting
is reduced to ordinary counting, and a counting normal form is embedded
as a depth-one formula.
"""

# %% imports
import numpy as np

from ktsharp.harness import binary_count_oracle, corpus_entry, strings_of_length
from ktsharp.interpreter import crasp_accepts_batch, end_satisfies_batch, run_crasp
from ktsharp.parsing import format_crasp, parse_crasp
from ktsharp.syntax import modal_depth, pretty
from ktsharp.translator import crasp_to_kt, desugar_binary_count, foc_nf_to_kt, kt_to_crasp

# %% the Dyck-1 program, one operation per line
program = corpus_entry("dyck1.crasp").obj
print(format_crasp(program))
for name, vec in run_crasp(program, "())(").items():
    print(f"  {name:8s} {vec}")

# %% program -> formula -> program
f = crasp_to_kt(program)
print("\nas a formula (depth %d):" % modal_depth(f))
print(" ", pretty(f))
back = kt_to_crasp(f, program.alphabet)
print("\nand back:")
print(format_crasp(back))

for n in range(1, 9):
    words = strings_of_length("()", n)
    a = crasp_accepts_batch(program, words)
    b = end_satisfies_batch(f, words)
    c = crasp_accepts_batch(back, words)
    assert np.array_equal(a, b) and np.array_equal(a, c)
print("all three agree on every word up to length 8")

# %% binary counting
binary = parse_crasp("""alphabet: a b
X(i) := #2[j <= i] (Q_a(i) & Q_b(j)) | (Q_b(i) & Q_a(j))
Y(i) := X(i) < 2
""")
plain = desugar_binary_count(binary)
print("\n" + format_crasp(plain))
w = "abbaab"
print("X on", w, "->", run_crasp(plain, w)["X"].tolist(),
      " double loop:", binary_count_oracle(binary, "X", w))

# %% a counting normal form at depth one
nf = corpus_entry("majority_balance.foc").obj
g = foc_nf_to_kt(nf)
print("\nmajority balance:", pretty(g), " depth", modal_depth(g))
words = strings_of_length("ab", 6)
print("balanced words of length 6:", int(end_satisfies_batch(g, words).sum()))
