"""The nine acceptance criteria at their full sizes and tolerances.

Each criterion runs as its own test; the one-line verdicts are echoed as
they finish and repeated in the terminal summary.
"""

import pytest

from ktsharp.acceptance import CRITERIA

@pytest.mark.parametrize("criterion", CRITERIA, ids=lambda c: c.__name__)
def test_criterion(criterion, acceptance_log):
    result = criterion()
    acceptance_log.append(result)
    print(result.line())
    assert result.passed, result.line()
