"""Greedy decoding with the Dyck-1 next-symbol program.

Each letter (and the end marker) has a Boolean predicate saying whether it
may come next; greedy decoding picks the first allowed symbol in a fixed
preference order.
"""

# %% imports
from ktsharp.harness import all_strings, corpus_entry, oracle_membership
from ktsharp.interpreter import lm_assigns_nonzero, lm_greedy_decode
from ktsharp.parsing import format_lm

lm = corpus_entry("dyck1.lm").obj
print(format_lm(lm))

# %% support of the model equals Dyck-1
support = [w for w in all_strings(lm.letters, 10) if lm_assigns_nonzero(lm, w)]
assert all(oracle_membership("dyck1", w) for w in support)
print(len(support), "strings up to length 10 get nonzero probability, all balanced")

# %% decoding under different preferences
for prompt, order, steps in [("((", ["(", ")", lm.eos], 6),
                             ("()", [lm.eos, "(", ")"], 6),
                             ("(", [lm.eos, ")", "("], 64),
                             ("(((", [lm.eos, ")", "("], 64)]:
    result = lm_greedy_decode(lm, prompt, steps, order)
    print(f"prompt {prompt!r:6s} order {''.join(order)!r:6s} -> {result.text!r} ({result.status})")
