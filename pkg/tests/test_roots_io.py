import math

import pytest
from hypothesis import given, strategies as st

from dde_fold._io import atomic_write_text, csv_text, fmt
from dde_fold.errors import ConvergenceError
from dde_fold.roots import newton_bisect


@given(st.floats(-5.0, 5.0), st.floats(0.5, 3.0))
def test_newton_bisect_matches_bisection(r, k):
    f = lambda x: math.tanh(k * (x - r))       # Newton alone overshoots for large |x - r|
    df = lambda x: k / math.cosh(k * (x - r)) ** 2
    root, _ = newton_bisect(f, df, -10.0, 10.0)
    lo, hi = -10.0, 10.0
    for _ in range(100):
        mid = 0.5 * (lo + hi)
        lo, hi = (mid, hi) if f(mid) < 0 else (lo, mid)
    assert root == pytest.approx(lo, abs=1e-14)


def test_secant_fallback_and_errors():
    root, _ = newton_bisect(lambda x: x ** 3 - 2.0, None, 0.0, 2.0)
    assert root == pytest.approx(2 ** (1 / 3), rel=1e-15)
    with pytest.raises(ConvergenceError):
        newton_bisect(lambda x: x * x + 1.0, None, -1.0, 1.0)
    with pytest.raises(ConvergenceError):
        newton_bisect(lambda x: x ** 3 - 2.0, None, 0.0, 2.0, maxiter=1)


def test_csv_format_round_trips_floats(tmp_path):
    v = 0.1 + 0.2
    assert float(fmt(v)) == v and fmt(3) == "3" and fmt(True) == "True"
    text = csv_text(("a", "b"), [(1.5, v)])
    assert text == f"a,b\n1.5,{v!r}\n"
    path = atomic_write_text(tmp_path / "sub" / "x.csv", text)
    assert path.read_text() == text
    assert [p.name for p in path.parent.iterdir()] == ["x.csv"]
