import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from floquet_lab.lattice import build_operator
from floquet_lab.newton import (
    LambdaBox,
    dense_eigenpairs_in_window,
    eigenvalue_asymptotics,
    init_newton,
    newton_step,
    resolvent_constant,
    solve_local_eigenpair,
)

DELTA = 0.05


def test_resolvent_constant():
    assert resolvent_constant(0.0) == 1.0
    assert resolvent_constant(0.1) == pytest.approx(1.25)
    assert resolvent_constant(0.5) == np.inf


@given(st.integers(2, 40), st.booleans())
def test_lambda_box_admissible_range(aj, neg):
    j = -aj if neg else aj
    lo, hi = aj, 2 * (aj - 1)
    for L in (lo, hi):
        lb = LambdaBox(j, L)
        assert lb.resonant_site == (j, -j * j)
        assert lb.box.site_count == (2 * L + 1) ** 2
    for L in (lo - 1, hi + 1):
        with pytest.raises(ValueError):
            LambdaBox(j, L)
    with pytest.raises(ValueError):
        LambdaBox(1 if not neg else -1, 3)


@given(st.integers(2, 40), st.booleans())
def test_lambda_box_contains_exactly_one_parabola_point(aj, neg):
    j = -aj if neg else aj
    for L in {aj, 2 * (aj - 1)}:
        box = LambdaBox(j, L).box
        on_parabola = [s for s in box.sites() if s.n + s.j**2 == 0]
        assert on_parabola == [(j, -j * j)]


def test_residual_identity_along_the_iteration():
    # F must stay equal to the true residual (H - E)u off the resonant row,
    # and the residual at the resonant row must vanish by construction
    lb = LambdaBox(8, 8)
    op = build_operator(lb.box, DELTA)
    state = init_newton(lb, DELTA)
    ri = op.index[lb.resonant_site]
    M = op.dense()
    for _ in range(4):
        resid = M @ state.u - state.E * state.u
        off = resid.copy()
        off[ri] = 0.0
        np.testing.assert_allclose(off, state.F, atol=1e-13)
        assert abs(resid[ri]) <= 1e-13
        assert state.u[ri] == 1.0
        state = newton_step(state, op)


def test_solver_agrees_with_dense_oracle():
    pair, cert = solve_local_eigenpair(LambdaBox(8, 8), DELTA)
    assert cert.converged
    dense = dense_eigenpairs_in_window(pair.box, DELTA)
    assert min(abs(p.E - pair.E) for p in dense) <= 1e-11
    op = build_operator(pair.box, DELTA)
    assert pair.residual_norm(op) <= 1e-12
    assert np.linalg.norm(pair.phi) == pytest.approx(1.0)


def test_certificate_contraction():
    pair, cert = solve_local_eigenpair(LambdaBox(12, 12), DELTA)
    r = cert.residual_norms
    assert r[0] == pytest.approx(2 * DELTA)
    assert all(b <= 0.5 * a for a, b in zip(r, r[1:]))
    assert cert.j0 == pytest.approx(4 * cert.C**2 * r[0])
    for k, dE in enumerate(cert.delta_E):
        assert abs(dE) <= cert.C / 12 * r[k]


def test_delta_zero_converges_immediately():
    pair, cert = solve_local_eigenpair(LambdaBox(10, 10), 0.0)
    assert cert.converged and cert.iterations == 0
    assert pair.E == 0.0


def test_eigenvalue_sign_and_magnitude():
    # measured law: the local eigenvalue is +delta^2/(j^2 - 1) to leading
    # order (checked against the dense oracle elsewhere)
    for j in (10, 14):
        pair, _ = solve_local_eigenpair(LambdaBox(j, j), DELTA)
        assert pair.E == pytest.approx(DELTA**2 / (j * j - 1), rel=5e-3)
        assert pair.E > 0


def test_eigenvalue_even_in_j():
    a, _ = solve_local_eigenpair(LambdaBox(9, 9), DELTA)
    b, _ = solve_local_eigenpair(LambdaBox(-9, 9), DELTA)
    assert a.E == pytest.approx(b.E, abs=1e-15)


def test_asymptotics_fit():
    fit = eigenvalue_asymptotics(DELTA, range(10, 21))
    assert not fit.failures
    assert abs(fit.scaled_leading) == pytest.approx(1.0, rel=0.01)
    # the fitted correction term is dominated by the 1/delta^2 expansion of
    # delta^2/(j^2-1), so a4 ~ 1/delta^2 at this coupling
    assert fit.a4_estimate == pytest.approx(1.0 / DELTA**2, rel=0.05)


def test_asymptotics_fit_box_rule_independence():
    f1 = eigenvalue_asymptotics(DELTA, range(10, 16), L_rule="minimal")
    f2 = eigenvalue_asymptotics(DELTA, range(10, 16), L_rule="maximal")
    assert f1.leading_coeff == pytest.approx(f2.leading_coeff, abs=1e-10)


def test_eigenpair_export(tmp_path):
    pair, _ = solve_local_eigenpair(LambdaBox(6, 6), DELTA)
    p = tmp_path / "pair.csv"
    pair.export_csv(p)
    lines = p.read_text().splitlines()
    assert lines[0] == "j,n,value"
    assert len(lines) == 1 + pair.box.site_count
