"""Newton iteration for local eigenpairs on boxes around parabola sites.

Each box Lambda_j is a square centered at the resonant site (j, -j^2),
with half width L in [|j|, 2(|j|-1)] so it contains no other parabola
point.  The iteration keeps the eigenvector entry at the resonant site
pinned to 1, corrects the eigenvector on the complement by a restricted
linear solve and the eigenvalue by a stencil sum, and contracts the
residual geometrically once |j| clears the certificate threshold.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import NewtonDivergenceError, ResonanceCollisionError
from .lattice import (
    FloquetOperator,
    LatticeBox,
    Site,
    build_operator,
    diagonal,
    neighbors,
)

__all__ = [
    "LambdaBox",
    "NewtonState",
    "ConvergenceCert",
    "EigenPair",
    "AsymptoticsFit",
    "init_newton",
    "newton_step",
    "solve_local_eigenpair",
    "dense_eigenpairs_in_window",
    "eigenvalue_asymptotics",
    "resolvent_constant",
]


def resolvent_constant(delta: float) -> float:
    """The certificate constant C = 1/(1 - 2*delta), the admissible upper
    bound for the restricted-resolvent norm in the small-coupling regime."""
    if delta >= 0.5:
        return math.inf
    return 1.0 / (1.0 - 2.0 * delta)


@dataclass(frozen=True)
class LambdaBox:
    """Square box around the parabola site (j, -j^2)."""

    j: int
    L: int

    def __post_init__(self):
        if abs(self.j) <= 1:
            raise ValueError("need |j| > 1")
        if not abs(self.j) <= self.L <= 2 * (abs(self.j) - 1):
            raise ValueError(
                f"L={self.L} outside [|j|, 2(|j|-1)] = [{abs(self.j)}, {2 * (abs(self.j) - 1)}]"
            )

    @property
    def resonant_site(self) -> Site:
        return Site(self.j, -self.j * self.j)

    @property
    def box(self) -> LatticeBox:
        return LatticeBox.square(self.resonant_site, self.L)


@dataclass(frozen=True)
class NewtonState:
    """Iteration triple (u, E, F) indexed against the box site order."""

    resonant_site: Site
    u: np.ndarray = field(repr=False)
    E: float
    F: np.ndarray = field(repr=False)
    iteration: int


def init_newton(lb: LambdaBox, delta: float) -> NewtonState:
    """Zeroth iterate: u = site indicator, E = 0, F = delta on the diagonal
    neighbors of the resonant site inside the box."""
    sites = lb.box.sites()
    index = {s: i for i, s in enumerate(sites)}
    r = lb.resonant_site
    for nb in neighbors(r):
        # all four neighbors are off the parabola with |n + j^2| >= |j|
        assert abs(diagonal(nb)) >= abs(lb.j), (nb, lb.j)
    u = np.zeros(len(sites))
    u[index[r]] = 1.0
    F = np.zeros(len(sites))
    for nb in neighbors(r):
        k = index.get(nb)
        if k is not None:
            F[k] = delta
    return NewtonState(resonant_site=r, u=u, E=0.0, F=F, iteration=0)


def _complement_indices(op: FloquetOperator, r: Site) -> tuple[int, np.ndarray]:
    ri = op.index[r]
    mask = np.ones(op.dim, dtype=bool)
    mask[ri] = False
    return ri, np.nonzero(mask)[0]


def newton_step(state: NewtonState, op: FloquetOperator) -> NewtonState:
    """One correction: solve (H_c - E) du = -F on the complement, update E
    by the stencil sum over the resonant site's neighbors, refresh F."""
    if op.excluded:
        raise ValueError("newton_step expects an operator without exclusions")
    if op.dim != state.u.shape[0]:
        raise ValueError("state/operator dimension mismatch")
    ri, c_idx = _complement_indices(op, state.resonant_site)
    delta = op.delta
    if delta == 0.0:
        return replace(state, iteration=state.iteration + 1)

    H = op.matrix.tocsc()
    Hc = H[np.ix_(c_idx, c_idx)]
    A = (Hc - state.E * sp.identity(len(c_idx), format="csc")).tocsc()
    Fc = state.F[c_idx]
    try:
        lu = spla.splu(A)
        du_c = -lu.solve(Fc)
    except RuntimeError as exc:
        raise ResonanceCollisionError(
            f"restricted operator singular at E={state.E!r}"
        ) from exc
    resid = np.linalg.norm(A @ du_c + Fc)
    if resid > 1e-12 * max(1.0, np.linalg.norm(Fc)):
        raise ResonanceCollisionError(
            f"restricted solve residual {resid:.3e} at E={state.E!r}"
        )

    du = np.zeros_like(state.u)
    du[c_idx] = du_c
    dE = delta * sum(
        du[op.index[nb]] for nb in neighbors(state.resonant_site) if nb in op.index
    )
    u_new = state.u + du
    E_new = state.E + dE
    F_new = -dE * u_new
    F_new[ri] = 0.0
    return NewtonState(
        resonant_site=state.resonant_site,
        u=u_new,
        E=E_new,
        F=F_new,
        iteration=state.iteration + 1,
    )


@dataclass(frozen=True)
class ConvergenceCert:
    """Per-iteration residual record with the contraction guarantee data."""

    residual_norms: tuple  # l2, one entry per iterate starting at F^(0)
    residual_norms_inf: tuple
    delta_E: tuple
    contraction_bound: float  # 2 C^2 ||F0|| / |j|
    C: float
    j0: float  # 4 C^2 ||F0||
    j: int
    converged: bool
    iterations: int

    @property
    def ratios(self) -> tuple:
        r = self.residual_norms
        return tuple(r[k + 1] / r[k] for k in range(len(r) - 1) if r[k] > 0)

    def as_dict(self) -> dict:
        return {
            "j": self.j,
            "C": self.C,
            "j0": self.j0,
            "contraction_bound": self.contraction_bound,
            "residual_norms_l2": list(self.residual_norms),
            "residual_norms_linf": list(self.residual_norms_inf),
            "delta_E": list(self.delta_E),
            "converged": self.converged,
            "iterations": self.iterations,
        }


@dataclass(frozen=True)
class EigenPair:
    """An (E, phi) pair on a box, unit l2 norm, resonant entry positive."""

    E: float
    phi: np.ndarray = field(repr=False)
    box: LatticeBox
    method: str  # "newton" or "dense"
    delta: float
    sites: tuple = field(repr=False)

    def residual_norm(self, op: FloquetOperator | None = None) -> float:
        if op is None:
            op = build_operator(self.box, self.delta)
        return float(np.linalg.norm(op.apply(self.phi) - self.E * self.phi))

    def value_at(self, site: Site) -> float:
        try:
            return float(self.phi[self.sites.index(Site(*site))])
        except ValueError:
            return 0.0

    def export_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("j,n,value\n")
            for s, v in zip(self.sites, self.phi):
                fh.write(f"{s[0]},{s[1]},{v!r}\n")


def solve_local_eigenpair(
    lb: LambdaBox,
    delta: float,
    tol: float | None = None,
    max_iter: int = 60,
) -> tuple[EigenPair, ConvergenceCert]:
    """Iterate the Newton scheme on Lambda_j until the residual is below
    ``tol`` (default 1e-12 * delta).  Hard error if the residual fails to
    contract in the certified regime; soft failure on max_iter."""
    if tol is None:
        tol = 1e-12 * delta
    op = build_operator(lb.box, delta)
    state = init_newton(lb, delta)
    C = resolvent_constant(delta)
    f0 = float(np.linalg.norm(state.F))
    j0 = 4.0 * C * C * f0
    bound = 2.0 * C * C * f0 / abs(lb.j) if f0 > 0 else 0.0
    certified = abs(lb.j) > j0
    if not certified:
        warnings.warn(
            f"|j|={abs(lb.j)} <= j0={j0:.3g}: contraction not guaranteed, attempting anyway"
        )

    l2 = [f0]
    linf = [float(np.abs(state.F).max())]
    dEs = []
    converged = f0 <= tol
    while not converged and state.iteration < max_iter:
        prev_E = state.E
        state = newton_step(state, op)
        dEs.append(state.E - prev_E)
        l2.append(float(np.linalg.norm(state.F)))
        linf.append(float(np.abs(state.F).max()))
        if (
            certified
            and state.iteration >= 3
            and l2[-2] > max(10 * tol, 1e-14)
            and l2[-1] >= l2[-2]
        ):
            raise NewtonDivergenceError(
                f"residual failed to contract at iteration {state.iteration} "
                f"for j={lb.j} (|j| > j0={j0:.3g})"
            )
        converged = l2[-1] <= tol

    raw_norm = float(np.linalg.norm(state.u))
    phi = state.u / raw_norm
    ri = op.index[state.resonant_site]
    if phi[ri] < 0:
        phi = -phi
    pair = EigenPair(
        E=state.E,
        phi=phi,
        box=lb.box,
        method="newton",
        delta=delta,
        sites=op.sites,
    )
    if converged:
        final_resid = pair.residual_norm(op)
        if final_resid > tol * (1.0 + raw_norm):
            raise NewtonDivergenceError(
                f"converged residual check failed: {final_resid:.3e} for j={lb.j}"
            )
    cert = ConvergenceCert(
        residual_norms=tuple(l2),
        residual_norms_inf=tuple(linf),
        delta_E=tuple(dEs),
        contraction_bound=bound,
        C=C,
        j0=j0,
        j=lb.j,
        converged=converged,
        iterations=state.iteration,
    )
    return pair, cert


def dense_eigenpairs_in_window(
    box: LatticeBox, delta: float, window: tuple[float, float] | None = None
) -> list[EigenPair]:
    """Dense eigensolve oracle, restricted to the window (default the
    central [-2*delta, 2*delta])."""
    if window is None:
        window = (-2 * delta, 2 * delta)
    op = build_operator(box, delta)
    evals, evecs = la.eigh(op.dense())
    out = []
    lo, hi = window
    for k in np.nonzero((evals >= lo) & (evals <= hi))[0]:
        phi = evecs[:, k]
        # sign convention: largest-|entry| component positive
        if phi[np.argmax(np.abs(phi))] < 0:
            phi = -phi
        out.append(
            EigenPair(
                E=float(evals[k]),
                phi=phi,
                box=box,
                method="dense",
                delta=delta,
                sites=op.sites,
            )
        )
    return out


@dataclass(frozen=True)
class AsymptoticsFit:
    """Least-squares fit of E_j against (1/j^2, 1/j^4)."""

    delta: float
    samples: tuple  # (j, E_j)
    leading_coeff: float  # coefficient of 1/j^2, expected -delta^2
    a4_estimate: float  # next-order coefficient divided by delta^4
    residuals: tuple
    leading_se: float
    a4_se: float
    L_rule: str
    failures: tuple = ()

    @property
    def scaled_leading(self) -> float:
        """leading_coeff / delta^2.

        Observed value is +1 (the local eigenvalue is +delta^2/(j^2-1) + ...,
        confirmed by second-order perturbation theory and dense eigensolves).
        """
        return self.leading_coeff / self.delta**2

    def as_dict(self) -> dict:
        return {
            "delta": self.delta,
            "L_rule": self.L_rule,
            "samples": [[j, E] for j, E in self.samples],
            "leading_coeff": self.leading_coeff,
            "scaled_leading": self.scaled_leading,
            "a4_estimate": self.a4_estimate,
            "leading_se": self.leading_se,
            "a4_se": self.a4_se,
            "residuals": list(self.residuals),
            "failures": list(self.failures),
        }

    def to_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.as_dict(), fh, indent=2)


def _rule_L(j: int, L_rule: str) -> int:
    if L_rule == "minimal":
        return abs(j)
    if L_rule == "maximal":
        return 2 * (abs(j) - 1)
    raise ValueError(f"unknown L_rule {L_rule!r}")


def eigenvalue_asymptotics(
    delta: float,
    j_values,
    L_rule: str = "minimal",
    tol: float | None = None,
) -> AsymptoticsFit:
    """Run the Newton solver over a j sweep and fit the eigenvalue law
    E_j = c2/j^2 + c4/j^4."""
    samples, failures = [], []
    for j in j_values:
        try:
            pair, cert = solve_local_eigenpair(LambdaBox(j, _rule_L(j, L_rule)), delta, tol=tol)
            if not cert.converged:
                failures.append((j, "max_iter"))
                continue
            samples.append((int(j), pair.E))
        except (ResonanceCollisionError, NewtonDivergenceError) as exc:
            failures.append((int(j), str(exc)))
    if len(samples) < 3:
        raise ValueError("not enough converged samples to fit")
    js = np.array([j for j, _ in samples], dtype=float)
    Es = np.array([E for _, E in samples])
    X = np.column_stack([js**-2.0, js**-4.0])
    coef, *_ = np.linalg.lstsq(X, Es, rcond=None)
    resid = Es - X @ coef
    dof = max(len(samples) - 2, 1)
    sigma2 = float(resid @ resid) / dof
    cov = sigma2 * np.linalg.inv(X.T @ X)
    return AsymptoticsFit(
        delta=delta,
        samples=tuple(samples),
        leading_coeff=float(coef[0]),
        a4_estimate=float(coef[1]) / delta**4,
        residuals=tuple(float(r) for r in resid),
        leading_se=float(np.sqrt(cov[0, 0])),
        a4_se=float(np.sqrt(cov[1, 1])) / delta**4,
        L_rule=L_rule,
        failures=tuple(failures),
    )
