"""Compiling Dyck-1 into a two-block transformer.

Shows the residual stream layout, the prefix-mean counts produced by
uniform attention, and a differential run against the interpreter.
"""

# %% imports
import numpy as np

from ktsharp.compiler import compile_formula, report
from ktsharp.harness import all_strings, corpus_entry, diff_test, random_strings
from ktsharp.runtime import accepts, model_forward

np.set_printoptions(precision=3, suppress=True, linewidth=120)

dyck = corpus_entry("dyck1.kt").obj
alphabet = ("(", ")")

# %% compile and inspect
model = compile_formula(dyck, alphabet)
print(report(dyck, alphabet, model))
print("blocks:", len(model.blocks), " d:", model.d)
for block in model.blocks:
    print("  FFN layer widths:", [W.shape for W, _ in block.ffn])

# %% counts hidden in the first block
w = "(()))("
_, traces = model_forward(model, w, trace=True)
pre = traces[1]["pre_ln1"]
ro, re = model.pair("<ref>")
for key, (odd, even, role) in model.dim_map.items():
    if role == "count" and key.endswith("@1"):
        ratio = pre[even - 1] / pre[re]
        print(f"{key:12s} count/reference = {ratio}")

# %% the final stream holds +-1 in every Boolean pair
A = model_forward(model, w)
o, e = model.pair(model.output)
print("\noutput pair over positions (BOS first):")
print(A[[o, e]])
print("accepts", repr(w), "->", accepts(model, w))

# %% differential testing
words = list(all_strings(alphabet, 8)) + random_strings(alphabet, 1000, 64, seed=0,
                                                         language="dyck1")
rep = diff_test(dyck, model, words, "dyck1")
print("\n" + rep.summary())
