"""Acceptance battery: every stated criterion at its stated tolerance.

Each test runs one numbered criterion through the shared verification
registry and prints its one-line verdict.  Results are cached per process,
so the reproducibility criterion reuses the earlier runs for its
same-thread-count half and only re-executes the battery at a second worker
count.
"""

import pytest

from hlab import verify


@pytest.mark.parametrize("number", list(range(1, 13)))
def test_criterion(number):
    result = verify.run_check(number)
    line = (
        f"{'PASS' if result.passed else 'FAIL'} criterion {result.number}: "
        f"{result.name} [{result.elapsed:.1f}s] {result.detail}"
    )
    print(line)
    assert result.passed, line
