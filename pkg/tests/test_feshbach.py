import numpy as np
import pytest

from floquet_lab.errors import ResolventSingularError
from floquet_lab.feshbach import (
    FIVE_SITE_ORDER,
    dense_spectrum,
    effective_5x5_series,
    effective_operator,
    spectral_membership,
    verify_h1,
    zero_multiplicity,
)
from floquet_lab.lattice import LatticeBox, Site, resonant_sites

DELTA = 0.1
BOX = LatticeBox.square(Site(0, 0), 5)


def test_effective_operator_is_symmetric_on_the_resonant_set():
    eff = effective_operator(BOX, DELTA, 0.0)
    assert eff.dim == len(resonant_sites(BOX, 0.0, DELTA)) == 5
    np.testing.assert_allclose(eff.matrix, eff.matrix.T, atol=0)
    assert tuple(eff.resonant_sites) == FIVE_SITE_ORDER


def test_membership_matches_dense_oracle():
    _, evals, _ = dense_spectrum(BOX, DELTA)
    window = evals[np.abs(evals) <= 2 * DELTA]
    assert window.size > 0
    for E in window:
        w = spectral_membership(BOX, DELTA, float(E))
        assert w.is_member, f"missed dense eigenvalue {E}"
        assert w.smallest_singular_value < w.tol
    # midpoints between adjacent window eigenvalues are not in the spectrum
    mids = (window[1:] + window[:-1]) / 2
    for E in mids:
        if np.min(np.abs(evals - E)) < 1e-6:
            continue
        assert not spectral_membership(BOX, DELTA, float(E)).is_member


def test_membership_witness_vector_is_a_near_null_vector():
    _, evals, _ = dense_spectrum(BOX, DELTA)
    E = float(evals[np.abs(evals) <= 2 * DELTA][0])
    w = spectral_membership(BOX, DELTA, E)
    r = np.linalg.norm(w.effective.matrix @ w.vector)
    assert r <= 10 * max(w.smallest_singular_value, 1e-15)


def test_series_agreement_is_third_order():
    diffs = []
    for d in (0.02, 0.08):
        eff = effective_operator(LatticeBox.square(Site(0, 0), 8), d, 0.0)
        diffs.append(np.abs(eff.matrix - (0.0 - effective_5x5_series(d))).max())
    slope = np.log(diffs[1] / diffs[0]) / np.log(4.0)
    assert slope == pytest.approx(3.0, abs=0.2)


def test_series_eigenvalues_split_into_linear_and_quadratic():
    d = 0.04
    mags = np.sort(np.abs(np.linalg.eigvalsh(effective_5x5_series(d))))
    # three O(d^2) eigenvalues below two O(d) ones
    assert mags[2] < 10 * d * d < mags[3]


def test_resolvent_guard_triggers():
    with pytest.raises(ResolventSingularError):
        effective_operator(BOX, DELTA, 0.0, singular_tol=1e6)


def test_no_resonant_sites_rejected():
    box = LatticeBox.square(Site(10, 10), 1)
    with pytest.raises(ValueError):
        effective_operator(box, DELTA, 0.0)


def test_verify_h1_reference_point():
    rep = verify_h1(DELTA, 3)
    # the gap at 0 is delta^2/3 to leading order
    assert rep.dist_to_nonzero == pytest.approx(DELTA**2 / 3, abs=5e-5)
    assert rep.zero_multiplicity == 0
    assert rep.passed
    assert all(abs(e) <= 2 * DELTA for e in rep.window_eigenvalues)


def test_verify_h1_json(tmp_path):
    rep = verify_h1(DELTA, 3)
    p = tmp_path / "h1.json"
    rep.to_json(p)
    assert p.stat().st_size > 0


def test_zero_multiplicity():
    assert zero_multiplicity(np.array([0.0, 1e-14, 1e-3])) == 2
    assert zero_multiplicity(np.array([0.5, -0.5])) == 0


def test_delta_zero_trivial_spectrum():
    _, evals, _ = dense_spectrum(LatticeBox.square(Site(0, 0), 4), 0.0)
    assert np.allclose(evals, np.round(evals))
