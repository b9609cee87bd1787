"""Acceptance gate: every criterion must pass at its stated tolerance.

Run with ``pytest tests/test_acceptance.py -v -s`` to see one line per
criterion, or ``codedcache selftest`` for the same outside pytest.
"""

import pytest

from codedcache import acceptance


@pytest.mark.parametrize(
    "number,name,func",
    acceptance.CRITERIA,
    ids=[f"{num:02d}_{name.replace(' ', '_')}" for num, name, _ in acceptance.CRITERIA],
)
def test_criterion(number, name, func):
    passed, detail = func()
    status = "PASS" if passed else "FAIL"
    print(f"criterion {number:2d} [{status}] {name}: {detail}")
    assert passed, f"criterion {number} ({name}): {detail}"
