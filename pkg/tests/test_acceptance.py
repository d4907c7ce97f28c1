"""Acceptance criteria; each test prints one PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py`` or ``python3 tests/test_acceptance.py``.
"""

import sys

import pytest

from nhmaryland.harness.checks import acceptance_checks
from nhmaryland.harness.config import DEFAULT_TOLERANCES

CRITERIA = acceptance_checks()


def summary_line(result) -> str:
    mark = "PASS" if result.passed else "FAIL"
    parts = [f"{m.name}={m.measured:.3g} ({m.relation} {m.tolerance:g})" for m in result.measurements]
    if result.error:
        parts.append(f"error: {result.error}")
    timing = f"{result.seconds:.1f}s"
    if result.runtime_limit is not None:
        timing += f" of {result.runtime_limit:g}s"
    return f"{mark} criterion {result.criterion}: {result.description} [{timing}] " + "; ".join(parts)


@pytest.mark.parametrize("check", CRITERIA, ids=[c.name for c in CRITERIA])
def test_criterion(check, capsys):
    result = check.run(dict(DEFAULT_TOLERANCES))
    with capsys.disabled():
        print("\n" + summary_line(result))
        if result.detail and not result.passed:
            print("    " + result.detail)
    assert result.passed, summary_line(result)


if __name__ == "__main__":
    results = [c.run(dict(DEFAULT_TOLERANCES)) for c in CRITERIA]
    for r in results:
        print(summary_line(r))
    sys.exit(0 if all(r.passed for r in results) else 1)
