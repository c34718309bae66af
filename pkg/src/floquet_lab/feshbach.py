"""Feshbach/Grushin reduction onto the resonant parabola.

For a box operator H and spectral parameter E in the central window
[-2*delta, 2*delta], the effective operator on the resonant set is the
Schur complement

    Ht(E) = E - H00 - H0c (E - Hcc)^{-1} Hc0,

where the 0-block is the parabola n + j^2 = 0 inside the box and the
c-block is everything else.  E belongs to the spectrum of H iff 0 belongs
to the spectrum of Ht(E); this replaces an eigenproblem on thousands of
sites by one on a handful.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import ResolventSingularError
from .lattice import LatticeBox, Site, build_operator, resonant_sites

__all__ = [
    "EffectiveOperator",
    "MembershipWitness",
    "H1Report",
    "effective_operator",
    "effective_5x5_series",
    "spectral_membership",
    "verify_h1",
    "dense_spectrum",
    "zero_multiplicity",
]

# Second-order coefficient matrix of the effective operator at E = 0 in
# the site order {(0,0), (1,-1), (-1,-1), (2,-4), (-2,-4)}.  The diagonal
# entries are sums of 1/(n + j^2) over the off-parabola neighbors of each
# resonant site; for (+-2, -4) the four neighbors give
# 1/2 - 1/6 + 1/4 - 1/4 = 1/3 with an overall minus sign.
_M1 = np.array(
    [
        [0, 1, 1, 0, 0],
        [1, 0, 0, 0, 0],
        [1, 0, 0, 0, 0],
        [0, 0, 0, 0, 0],
        [0, 0, 0, 0, 0],
    ],
    dtype=float,
)
_M2 = np.array(
    [
        [1, 0, 0, 0, 0],
        [0, 1 / 4, -1 / 2, 0, 0],
        [0, -1 / 2, 1 / 4, 0, 0],
        [0, 0, 0, -1 / 3, 0],
        [0, 0, 0, 0, -1 / 3],
    ],
    dtype=float,
)

FIVE_SITE_ORDER = (Site(0, 0), Site(1, -1), Site(-1, -1), Site(2, -4), Site(-2, -4))


@dataclass(frozen=True)
class EffectiveOperator:
    """Schur complement on the resonant set, plus the conditioning it used."""

    resonant_sites: tuple
    energy: float
    matrix: np.ndarray
    delta: float
    cc_min_singular_value: float

    @property
    def dim(self) -> int:
        return len(self.resonant_sites)

    def smallest_singular_value(self) -> float:
        return float(la.svdvals(self.matrix)[-1])

    def as_dict(self) -> dict:
        return {
            "sites": [list(s) for s in self.resonant_sites],
            "energy": self.energy,
            "delta": self.delta,
            "matrix": self.matrix.tolist(),
            "cc_min_singular_value": self.cc_min_singular_value,
        }


def _cc_min_singular_value(A: sp.spmatrix, lu: spla.SuperLU) -> float:
    """Smallest singular value of A, exact for small blocks, estimated via
    the factorization otherwise."""
    if A.shape[0] <= 1500:
        return float(la.svdvals(A.toarray())[-1])
    # 1 / ||A^{-1}||_1 is a lower-bound estimate adequate as a guard.
    inv_norm = spla.onenormest(
        spla.LinearOperator(A.shape, matvec=lu.solve, rmatvec=lambda v: lu.solve(v, "T"))
    )
    return 1.0 / inv_norm


def effective_operator(
    box: LatticeBox,
    delta: float,
    E: float,
    singular_tol: float = 1e-8,
) -> EffectiveOperator:
    """Schur complement of the box operator onto the parabola sites.

    Raises ResolventSingularError when E is numerically on the spectrum of
    the non-resonant block.
    """
    res = resonant_sites(box, 0.0, delta)
    if not res:
        raise ValueError("box contains no resonant parabola sites")
    op = build_operator(box, delta)
    p_idx = np.array([op.index[s] for s in res])
    mask = np.ones(op.dim, dtype=bool)
    mask[p_idx] = False
    c_idx = np.nonzero(mask)[0]

    H = op.matrix.tocsc()
    H00 = H[np.ix_(p_idx, p_idx)].toarray()
    H0c = H[np.ix_(p_idx, c_idx)].tocsc()
    Hc0 = H[np.ix_(c_idx, p_idx)].toarray()
    Hcc = H[np.ix_(c_idx, c_idx)].tocsc()

    A = (E * sp.identity(len(c_idx), format="csc") - Hcc).tocsc()
    try:
        lu = spla.splu(A)
    except RuntimeError as exc:
        raise ResolventSingularError(E, 0.0) from exc
    smin = _cc_min_singular_value(A, lu)
    if smin < singular_tol:
        raise ResolventSingularError(E, smin)

    X = lu.solve(Hc0)
    resid = np.linalg.norm(A @ X - Hc0) / max(np.linalg.norm(Hc0), 1e-300)
    if resid > 1e-12:
        raise ResolventSingularError(E, smin)

    Ht = E * np.eye(len(res)) - H00 - (H0c @ X)
    Ht = 0.5 * (Ht + Ht.T)  # exact symmetry despite roundoff
    return EffectiveOperator(
        resonant_sites=tuple(res),
        energy=E,
        matrix=Ht,
        delta=delta,
        cc_min_singular_value=smin,
    )


def effective_5x5_series(delta: float) -> np.ndarray:
    """Second-order series A(delta) = delta*M1 - delta^2*M2 for the
    five-site resonant set, so that Ht(E) = E - A + O(delta^3)."""
    return delta * _M1 - delta * delta * _M2


@dataclass(frozen=True)
class MembershipWitness:
    is_member: bool
    smallest_singular_value: float
    vector: np.ndarray = field(repr=False)
    tol: float
    effective: EffectiveOperator

    def as_dict(self) -> dict:
        return {
            "is_member": self.is_member,
            "smallest_singular_value": self.smallest_singular_value,
            "tol": self.tol,
            "vector": self.vector.tolist(),
            "energy": self.effective.energy,
            "delta": self.effective.delta,
        }


def spectral_membership(
    box: LatticeBox, delta: float, E: float, tol: float | None = None
) -> MembershipWitness:
    """Decide E in sigma(H_box) via the smallest singular value of Ht(E)."""
    eff = effective_operator(box, delta, E)
    U, svals, Vt = la.svd(eff.matrix)
    smin = float(svals[-1])
    if tol is None:
        tol = 1e-9 * max(float(svals[0]), 1e-300)
    return MembershipWitness(
        is_member=smin < tol,
        smallest_singular_value=smin,
        vector=Vt[-1],
        tol=tol,
        effective=eff,
    )


def dense_spectrum(box: LatticeBox, delta: float):
    """Eigendecomposition of the assembled box operator (dense oracle)."""
    op = build_operator(box, delta)
    evals, evecs = la.eigh(op.dense())
    return op, evals, evecs


def zero_multiplicity(evals: np.ndarray, tol: float = 1e-12) -> int:
    return int(np.sum(np.abs(evals) < tol))


@dataclass(frozen=True)
class H1Report:
    """Spectral-gap check at 0 for the central box.

    ``passed`` uses the quantitative desk-scale form dist >= 0.1 * delta^2
    (the gap at 0 scales like delta^2); the asymptotic e^{-L0} threshold is
    reported alongside for reference.
    """

    delta: float
    L0: int
    box: LatticeBox
    dist_to_nonzero: float
    threshold: float
    passed: bool
    zero_multiplicity: int
    window_eigenvalues: tuple

    def as_dict(self) -> dict:
        j_lo, j_hi = self.box.j_range()
        return {
            "delta": self.delta,
            "L0": self.L0,
            "box": [j_lo, j_hi],
            "dist_to_nonzero": self.dist_to_nonzero,
            "threshold": self.threshold,
            "passed": self.passed,
            "zero_multiplicity": self.zero_multiplicity,
            "window_eigenvalues": list(self.window_eigenvalues),
        }

    def to_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.as_dict(), fh, indent=2)


def verify_h1(delta: float, L0: int, zero_tol: float = 1e-12) -> H1Report:
    """Distance from 0 to the nearest nonzero eigenvalue of the central box
    [-L0^2+1, L0^2-1]^2, compared against the e^{-L0} threshold."""
    hw = L0 * L0 - 1
    box = LatticeBox.square(Site(0, 0), hw)
    if box.site_count <= 6000:
        _, evals, _ = dense_spectrum(box, delta)
    else:
        op = build_operator(box, delta)
        k = min(60, op.dim - 2)
        evals = spla.eigsh(
            op.matrix.tocsc(), k=k, sigma=0.0, which="LM", return_eigenvectors=False
        )
    nonzero = np.abs(evals)[np.abs(evals) >= zero_tol]
    dist = float(nonzero.min()) if nonzero.size else math.inf
    threshold = math.exp(-L0)
    window = tuple(float(e) for e in np.sort(evals[np.abs(evals) <= 2 * delta]))
    return H1Report(
        delta=delta,
        L0=L0,
        box=box,
        dist_to_nonzero=dist,
        threshold=threshold,
        passed=dist >= 0.1 * delta * delta,
        zero_multiplicity=zero_multiplicity(evals, zero_tol),
        window_eigenvalues=window,
    )
