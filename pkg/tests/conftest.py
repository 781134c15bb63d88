import functools

import numpy as np
import pytest

from varimax import lookup, solve_el, solve_oc, solve_oc_initial_uncertainty

# criterion id -> (passed, detail), filled by test_acceptance.py
ACCEPTANCE_RESULTS: dict = {}


@functools.lru_cache(maxsize=None)
def el_solution(name: str):
    return solve_el(lookup(name))


@functools.lru_cache(maxsize=None)
def oc_solution(name: str, frozen=None):
    p = lookup(name)
    if frozen is not None:
        p = p.freeze(frozen)
    if p.additive_initial_uncertainty:
        return solve_oc_initial_uncertainty(p)
    return solve_oc(p)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for cid in sorted(ACCEPTANCE_RESULTS, key=lambda c: int(c.split()[0])):
        ok, detail = ACCEPTANCE_RESULTS[cid]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  criterion {cid}: {detail}")
