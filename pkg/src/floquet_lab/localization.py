"""Localization diagnostics: decay fits, spectral scans, spacing reports.

Eigenvectors in the central window [-2*delta, 2*delta] concentrate either
near the origin site (0, [E]) or at a symmetric pair of parabola sites
(+-j, -j^2), with exponential tails.  This module classifies computed
eigenpairs against those two templates, fits decay rates and boundary
norms, and measures the eigenvalue spacing that underpins the dichotomy.

All lattice distances here are l1 on Z^2.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse.linalg as spla

from .errors import ClassificationError
from .lattice import FloquetOperator, LatticeBox, Site, build_operator
from .newton import (
    ConvergenceCert,
    EigenPair,
    LambdaBox,
    dense_eigenpairs_in_window,
    resolvent_constant,
    solve_local_eigenpair,
)

__all__ = [
    "DecayFit",
    "Classification",
    "SpacingReport",
    "ScanResult",
    "BoundaryReport",
    "decay_fit",
    "classify_spectrum",
    "local_spectrum_scan",
    "spacing_report",
    "boundary_norm_report",
    "embedding_residual",
    "parabola_separation",
    "window_eigenpairs",
]

#: Rate reported when the eigenvector has no resolvable tail (e.g. a bare
#: site indicator at delta = 0): any rate satisfies the envelope.
DEGENERATE_RATE = 50.0

# Amplitudes below this are treated as solver noise rather than signal.
# Dense eigensolves of quasi-degenerate window states leave roundoff
# artifacts around 1e-12 at distant wells, so the floor sits above that.
AMPLITUDE_FLOOR = 1e-10


def _l1(a: Site, b: Site) -> int:
    return abs(a[0] - b[0]) + abs(a[1] - b[1])


def parabola_separation(j: int, jp: int) -> int:
    """Sup-distance between the parabola points at j and j' (j != j'):
    2|j| for a symmetric pair, else (|j'| - |j|)(|j'| + |j|)."""
    if j == jp:
        raise ValueError("need distinct parabola points")
    if abs(j) == abs(jp):
        return 2 * abs(j)
    return abs(abs(jp) - abs(j)) * (abs(jp) + abs(j))


@dataclass(frozen=True)
class DecayFit:
    """Exponential-envelope fit |phi(x)| <= prefactor * sum_i e^{-rate*d_i(x)}."""

    centers: tuple
    rate: float
    prefactor: float
    max_violation: float
    kind: str  # "single" or "two"
    rate_ls: float  # least-squares slope before envelope adjustment
    n_sites: int

    def as_dict(self) -> dict:
        return {
            "centers": [list(c) for c in self.centers],
            "rate": self.rate,
            "prefactor": self.prefactor,
            "max_violation": self.max_violation,
            "kind": self.kind,
            "rate_ls": self.rate_ls,
            "n_sites": self.n_sites,
        }


def _envelope_fit(pair: EigenPair, centers: tuple) -> tuple[float, float, float, int]:
    """Fit rate/prefactor so the two-sided envelope dominates |phi|."""
    amp = np.abs(pair.phi)
    dists = np.array(
        [min(_l1(s, c) for c in centers) for s in pair.sites], dtype=float
    )
    sel = amp > AMPLITUDE_FLOOR
    d_sel, a_sel = dists[sel], amp[sel]
    if len(np.unique(d_sel)) < 2:
        rate_ls = rate = DEGENERATE_RATE
    else:
        slope, _ = np.polyfit(d_sel, np.log(a_sel), 1)
        rate_ls = -float(slope)
        rate = min(max(rate_ls, 1e-3), DEGENERATE_RATE)
    env = np.zeros_like(dists)
    for c in centers:
        with np.errstate(under="ignore"):
            env += np.exp(
                -rate * np.array([_l1(s, c) for s in pair.sites], dtype=float)
            )
    # prefactor chosen on resolvable sites so the envelope dominates there
    # exactly; far sites where the envelope underflows carry only noise.
    prefactor = float(np.max(amp[sel] / np.maximum(env[sel], 1e-300)))
    violation = float(np.max(amp - prefactor * env))
    return rate, prefactor, violation, int(sel.sum())


def decay_fit(pair: EigenPair, K_hint: float = 5.0, mass_threshold: float = 0.5) -> DecayFit:
    """Classify an eigenpair against the localization dichotomy and fit its
    exponential envelope.

    Single-center: more than half the l2 mass within l1 distance K_hint of
    (0, round(E)).  Otherwise two-center at the symmetric parabola pair
    carrying the largest amplitude; if neither template captures the mass,
    a ClassificationError with the mass distribution is raised.
    """
    amp2 = np.abs(pair.phi) ** 2
    total = float(amp2.sum())
    origin = Site(0, int(round(pair.E)))
    near_origin = sum(
        a for s, a in zip(pair.sites, amp2) if _l1(s, origin) <= K_hint
    )
    if near_origin / total > mass_threshold:
        centers = (origin,)
        kind = "single"
    else:
        best_j, best_amp = None, -1.0
        site_amp = dict(zip(pair.sites, np.abs(pair.phi)))
        j_hi = max(abs(s[0]) for s in pair.sites)
        for j in range(2, j_hi + 1):
            a = site_amp.get(Site(j, -j * j), 0.0) + site_amp.get(Site(-j, -j * j), 0.0)
            if a > best_amp:
                best_j, best_amp = j, a
        centers = tuple(
            c
            for c in (Site(best_j, -best_j**2), Site(-best_j, -best_j**2))
            if c in site_amp
        ) if best_j is not None else ()
        kind = "two"
        near_pair = sum(
            a
            for s, a in zip(pair.sites, amp2)
            if centers and min(_l1(s, c) for c in centers) <= K_hint
        )
        if not centers or near_pair / total <= mass_threshold:
            raise ClassificationError(
                f"eigenpair at E={pair.E!r} matches neither localization template",
                mass_distribution={
                    "near_origin": near_origin / total,
                    "near_pair": near_pair / total if centers else 0.0,
                    "centers_tried": [list(c) for c in centers],
                },
            )
    rate, prefactor, violation, n_sites = _envelope_fit(pair, centers)
    return DecayFit(
        centers=centers,
        rate=rate,
        prefactor=prefactor,
        max_violation=violation,
        kind=kind,
        rate_ls=rate,
        n_sites=n_sites,
    )


@dataclass(frozen=True)
class Classification:
    pair: EigenPair
    kind: str  # "single", "two", or "unclassified"
    fit: DecayFit | None
    error: str | None = None

    def as_csv_row(self) -> str:
        centers = ";".join(f"({c[0]},{c[1]})" for c in (self.fit.centers if self.fit else ()))
        rate = self.fit.rate if self.fit else float("nan")
        viol = self.fit.max_violation if self.fit else float("nan")
        return f"{self.pair.E!r},{self.kind},{centers},{rate!r},{viol!r}"


def window_eigenpairs(
    box: LatticeBox,
    delta: float,
    window: tuple[float, float] | None = None,
    max_dense: int = 15000,
) -> list[EigenPair]:
    """All eigenpairs of the box operator with eigenvalue in the window,
    dense for modest boxes, shift-invert around 0 otherwise."""
    if window is None:
        window = (-2 * delta, 2 * delta)
    if box.site_count <= max_dense:
        return dense_eigenpairs_in_window(box, delta, window)
    op = build_operator(box, delta)
    A = op.matrix.tocsc()
    k = min(op.dim - 2, 2 * (2 * box.half_width_j + 1) + 20)
    while True:
        evals, evecs = spla.eigsh(A, k=k, sigma=0.0, which="LM")
        # the window is fully captured once eigenvalues beyond it appear
        if (evals.min() < window[0] and evals.max() > window[1]) or k >= op.dim - 2:
            break
        k = min(2 * k, op.dim - 2)
    out = []
    for i in np.nonzero((evals >= window[0]) & (evals <= window[1]))[0]:
        phi = evecs[:, i]
        if phi[np.argmax(np.abs(phi))] < 0:
            phi = -phi
        out.append(
            EigenPair(
                E=float(evals[i]),
                phi=phi,
                box=box,
                method="dense",
                delta=delta,
                sites=op.sites,
            )
        )
    out.sort(key=lambda p: p.E)
    return out


def classify_spectrum(
    delta: float,
    box: LatticeBox,
    K_hint: float = 5.0,
    max_dense: int = 15000,
) -> list[Classification]:
    """Classify every eigenpair of the box with eigenvalue in the central
    window.  Unclassifiable pairs are recorded, not raised."""
    results = []
    for pair in window_eigenpairs(box, delta, max_dense=max_dense):
        try:
            fit = decay_fit(pair, K_hint=K_hint)
            results.append(Classification(pair=pair, kind=fit.kind, fit=fit))
        except ClassificationError as exc:
            results.append(
                Classification(pair=pair, kind="unclassified", fit=None, error=str(exc))
            )
    return results


def export_classification_csv(results: list[Classification], path) -> None:
    with open(path, "w") as fh:
        fh.write("E,class,centers,rate,max_violation\n")
        for r in results:
            fh.write(r.as_csv_row() + "\n")


@dataclass(frozen=True)
class ScanResult:
    """Window eigenpairs of the central box and of each local box."""

    delta: float
    j_max: int
    L0: int
    center_pairs: tuple  # eigenpairs of the central box in the window
    local_pairs: dict  # j -> EigenPair (signed j)
    certs: dict  # j -> ConvergenceCert for Newton solves
    failures: tuple = ()

    @property
    def lambdas(self) -> dict:
        return {j: p.E for j, p in self.local_pairs.items()}

    def export_csv(self, path) -> None:
        d2 = self.delta**2
        with open(path, "w") as fh:
            fh.write("j,lambda,lambda_scaled\n")
            for j in sorted(self.local_pairs):
                lam = self.local_pairs[j].E
                fh.write(f"{j},{lam!r},{lam * j * j / d2!r}\n")


def central_box(L0: int) -> LatticeBox:
    return LatticeBox.square(Site(0, 0), L0 * L0 - 1)


def local_spectrum_scan(
    delta: float,
    j_max: int,
    L0: int = 3,
    j_min: int = 3,
    L_rule: str = "minimal",
) -> ScanResult:
    """Eigenpairs in the central window: the central box (dense) plus every
    local box with j_min <= |j| <= j_max (Newton where certified, dense
    fallback otherwise)."""
    if not 0 < delta < 0.5:
        raise ValueError("need delta in (0, 1/2)")
    if delta >= 0.25:
        warnings.warn(
            f"delta={delta} >= 1/4: outside the regime where the scan is certified"
        )
    if j_max < 5:
        raise ValueError("need j_max >= 5")
    center = dense_eigenpairs_in_window(central_box(L0), delta)
    C = resolvent_constant(delta)
    j0 = 4 * C * C * (2 * delta)  # ||F0|| = 2*delta when all 4 neighbors lie inside
    local, certs, failures = {}, {}, []
    for aj in range(j_min, j_max + 1):
        for j in (aj, -aj):
            L = aj if L_rule == "minimal" else 2 * (aj - 1)
            lb = LambdaBox(j, L)
            try:
                if aj > j0:
                    pair, cert = solve_local_eigenpair(lb, delta)
                    certs[j] = cert
                else:
                    pairs = dense_eigenpairs_in_window(lb.box, delta)
                    if len(pairs) != 1:
                        failures.append((j, f"{len(pairs)} window eigenvalues"))
                        continue
                    pair = pairs[0]
                local[j] = pair
            except Exception as exc:  # noqa: BLE001 - per-box flagging
                failures.append((j, str(exc)))
    return ScanResult(
        delta=delta,
        j_max=j_max,
        L0=L0,
        center_pairs=tuple(center),
        local_pairs=local,
        certs=certs,
        failures=tuple(failures),
    )


@dataclass(frozen=True)
class SpacingReport:
    """Eigenvalue spacing of the local eigenvalues lambda_j."""

    delta: float
    mu_min: float  # smallest nonzero |eigenvalue| of the central box
    K_prime: float  # delta / sqrt(mu_min)
    gaps: tuple  # (j, j', gap) for |j| != |j'|
    min_gap_scaled: float  # min gap * min(|j|,|j'|)^3 / delta^2
    lambda_mu_gap: float  # min over j, mu of |lambda_j - mu|
    pairs_below_one: tuple

    def as_dict(self) -> dict:
        return {
            "delta": self.delta,
            "mu_min": self.mu_min,
            "K_prime": self.K_prime,
            "min_gap_scaled": self.min_gap_scaled,
            "lambda_mu_gap": self.lambda_mu_gap,
            "pairs_below_one": [list(p) for p in self.pairs_below_one],
            "gaps": [[j, jp, g] for j, jp, g in self.gaps],
        }

    def to_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.as_dict(), fh, indent=2)


def spacing_report(
    delta: float, j_max: int, L0: int = 3, scan: ScanResult | None = None
) -> SpacingReport:
    """Pairwise gaps of the lambda_j and their delta^2 / min(|j|,|j'|)^3 scaling."""
    if scan is None:
        scan = local_spectrum_scan(delta, j_max, L0=L0)
    mus = np.array([p.E for p in scan.center_pairs])
    nonzero = np.abs(mus)[np.abs(mus) > 1e-12]
    mu_min = float(nonzero.min())
    K_prime = delta / math.sqrt(mu_min)
    lam = scan.lambdas
    d2 = delta**2
    gaps, scaled = [], []
    pairs_below_one = []
    js = sorted(lam)
    for a in range(len(js)):
        for b in range(a + 1, len(js)):
            j, jp = js[a], js[b]
            if abs(j) == abs(jp):
                continue
            gap = abs(lam[j] - lam[jp])
            gaps.append((j, jp, gap))
            s = gap * min(abs(j), abs(jp)) ** 3 / d2
            scaled.append(s)
            if s < 1.0:
                pairs_below_one.append((j, jp, s))
    lambda_mu_gap = float(
        min(abs(lam[j] - mu) for j in js for mu in mus) if js and mus.size else math.inf
    )
    return SpacingReport(
        delta=delta,
        mu_min=mu_min,
        K_prime=K_prime,
        gaps=tuple(gaps),
        min_gap_scaled=float(min(scaled)) if scaled else math.inf,
        lambda_mu_gap=lambda_mu_gap,
        pairs_below_one=tuple(pairs_below_one),
    )


@dataclass(frozen=True)
class BoundaryReport:
    """Boundary l2 norms of local eigenvectors and the fitted decay exponent."""

    delta: float
    boundary_norms: tuple  # (j, norm)
    alpha_envelope: float  # min over j of -log(norm)/|j|; envelope holds exactly
    alpha_ls: float  # least-squares slope of -log(norm) vs |j|
    passed: bool

    def as_dict(self) -> dict:
        return {
            "delta": self.delta,
            "boundary_norms": [[j, b] for j, b in self.boundary_norms],
            "alpha_envelope": self.alpha_envelope,
            "alpha_ls": self.alpha_ls,
            "passed": self.passed,
        }


def boundary_norm_report(
    delta: float,
    j_values,
    L_rule: str = "minimal",
    alpha_floor: float = 0.05,
    scan: ScanResult | None = None,
) -> BoundaryReport:
    """||phi||_l2 on the rim of each local box, fitted against e^{-alpha |j|}."""
    norms = []
    for j in j_values:
        if scan is not None and j in scan.local_pairs:
            pair = scan.local_pairs[j]
        else:
            L = abs(j) if L_rule == "minimal" else 2 * (abs(j) - 1)
            pair, _ = solve_local_eigenpair(LambdaBox(j, L), delta)
        rim = set(pair.box.boundary_sites())
        b = math.sqrt(
            sum(v * v for s, v in zip(pair.sites, pair.phi) if s in rim)
        )
        norms.append((int(j), float(b)))
    logs = np.array([-math.log(max(b, 1e-300)) for _, b in norms])
    absj = np.array([abs(j) for j, _ in norms], dtype=float)
    alpha_env = float(np.min(logs / absj))
    alpha_ls = float(np.polyfit(absj, logs, 1)[0]) if len(norms) > 1 else alpha_env
    return BoundaryReport(
        delta=delta,
        boundary_norms=tuple(norms),
        alpha_envelope=alpha_env,
        alpha_ls=alpha_ls,
        passed=alpha_env > alpha_floor,
    )


def embedding_residual(pair: EigenPair, big_op: FloquetOperator) -> float:
    """||(H_big - E) phi|| after zero-padding phi into a larger box."""
    v = np.zeros(big_op.dim)
    for s, val in zip(pair.sites, pair.phi):
        k = big_op.index.get(s)
        if k is None:
            raise ValueError(f"site {s} of the eigenpair not inside the big box")
        v[k] = val
    return float(np.linalg.norm(big_op.apply(v) - pair.E * v))
