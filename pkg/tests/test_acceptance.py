"""
Acceptance suite: one test per criterion at its stated tolerance. Each test
prints a single PASS/FAIL line, bypassing output capture.
"""

import os

import pytest

from fiolab.acceptance import CRITERIA, run_criterion

SEED = int(os.environ.get("FIOLAB_SEED", 0))


@pytest.mark.slow
@pytest.mark.parametrize("number", sorted(CRITERIA))
def test_criterion(number, capsys):
    res = run_criterion(number, SEED)
    with capsys.disabled():
        print("\n" + res.line())
    failing = [(c.name, c.value, c.relation, c.limit) for c in res.checks if not c.passed]
    assert res.passed, failing
