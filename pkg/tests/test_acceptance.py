"""One test per acceptance criterion, full tolerances and sample sizes.

Run with -v to get a pass/fail line per criterion.  The Monte Carlo
criterion honors GASKET_THREADS for its worker pool.
"""

import pytest

from gasket.acceptance import CRITERIA


@pytest.mark.parametrize("criterion", CRITERIA,
                         ids=[fn.__name__ for fn in CRITERIA])
def test_criterion(criterion):
    record = criterion(quick=False)
    assert record["passed"], (
        f"{record['id']} {record['title']} failed: {record['details']}"
    )
