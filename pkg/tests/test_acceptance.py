"""Acceptance criteria 1-17, one test each.

Every test prints a PASS/FAIL line; the lines are also repeated in the
terminal summary.  Run directly (``python3 tests/test_acceptance.py``) to
get only the table.
"""

import sys

import pytest

from linresp.acceptance import CHECKS, Context

# normalisation goes last so it also sees every density computed by the others
ORDER = [i for i in sorted(CHECKS) if i != 6] + [6]
LINES = {}


@pytest.fixture(scope="module")
def ctx():
    return Context()


@pytest.mark.parametrize("check_id", ORDER, ids=[f"criterion_{i:02d}" for i in ORDER])
def test_criterion(check_id, ctx):
    res = CHECKS[check_id](ctx)
    LINES[check_id] = res.line()
    print(res.line())
    assert res.passed, res.line()


def test_linear_response_agrees_with_birkhoff_oracle(ctx):
    # independent check of the resummed value used in criterion 7 (1e8-sample orbit average)
    from linresp.susceptibility import polynomial, psi1
    fam = ctx.conj19
    p = psi1(fam.base, ctx.dec19_fine, fam.X, fam.dX, polynomial([0.0, 0.0, 1.0]))
    assert p.psi1 == pytest.approx(-0.0221711857547101, abs=2e-5)


if __name__ == "__main__":
    from linresp.acceptance import run_checks
    results = run_checks()
    sys.exit(0 if all(r.passed for r in results) else 1)
