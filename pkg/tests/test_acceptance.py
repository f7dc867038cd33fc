"""Acceptance criteria 1-11, each run through the same scenario code as ``treeprofile check``.

Every test appends a one-line PASS/FAIL summary that is printed at the end
of the session. Run standalone with ``python tests/test_acceptance.py``.
"""

import sys

import pytest

from treeprofile import scenarios

SLOW = {8, 9, 11}


def _case(num):
    marks = [pytest.mark.slow] if num in SLOW else []
    return pytest.param(num, marks=marks, id=f"{num:02d}-{_name(num)}")


def _name(num):
    return next(k for k, v in scenarios.NAMES.items() if v == num)


@pytest.mark.parametrize("num", [_case(i) for i in sorted(scenarios.SCENARIOS)])
def test_criterion(num, acceptance_log):
    res = scenarios.run(num)
    line = res.line()
    acceptance_log.append(line)
    print(line)
    failed = {k: v for k, v in res.measured.items() if not v.get("ok", True)}
    assert res.passed, f"{line}\n{failed}"


if __name__ == "__main__":
    ok = True
    for i in sorted(scenarios.SCENARIOS):
        res = scenarios.run(i)
        print(res.line(), flush=True)
        ok = ok and res.passed
    sys.exit(0 if ok else 1)
