import cvxpy as cp
import numpy as np
import pytest

from etisac.conic import ConicProblem, solve_conic
from etisac.errors import Infeasible


def _lp(bound):
    x = cp.Variable(2, name="x")
    p = ConicProblem(objective=cp.sum(x), variables={"x": x})
    p.add("box", [x <= 1, x >= bound])
    return p


def test_solves_and_reports():
    sol = solve_conic(_lp(0.0))
    assert sol.objective == pytest.approx(2.0, abs=1e-6)
    assert sol.status == "optimal" and sol.iterations > 0
    assert sol.residual <= 1e-6


def test_infeasible_raises():
    with pytest.raises(Infeasible):
        solve_conic(_lp(2.0))


def test_groups_rows_and_dof():
    X = cp.Variable((3, 3), hermitian=True)
    t = cp.Variable()
    p = ConicProblem(objective=t, variables={"X": X, "t": t})
    p.add("psd", X >> 0)
    p.add("trace", [cp.real(cp.trace(X)) <= 1, t <= cp.real(X[0, 0])])
    assert p.n_rows("psd") == 9 and p.n_rows("trace") == 2 and p.n_rows("missing") == 0
    assert p.n_real_dof == 10
    assert solve_conic(p).objective == pytest.approx(1.0, abs=1e-6)


def test_dump_is_deterministic():
    a, b = _lp(0.0).dump_text(), _lp(0.0).dump_text()
    assert a == b and a.startswith("# conic problem")
    lines = a.splitlines()
    assert "objective" in lines and "A" in lines and "b" in lines
    assert np.isfinite(float(lines[lines.index("A") + 1].split()[2]))
