"""Finite restrictions of the lattice operator diag(n + j^2) + delta * (diagonal hopping).

Sites live on Z^2 with coordinates (j, n): j is the spatial Fourier index,
n the temporal one.  The unperturbed diagonal at (j, n) is n + j^2 and the
perturbation couples (j, n) to (j', n') exactly when |j - j'| = 1 and
|n - n'| = 1, with amplitude delta.

Boxes are axis-aligned rectangles; site enumeration is row-major: n
ascending, then j ascending.  All vectors index against that order.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple

import numpy as np
import scipy.sparse as sp

__all__ = [
    "Site",
    "LatticeBox",
    "FloquetOperator",
    "hopping",
    "diagonal",
    "build_operator",
    "resonant_sites",
    "parabola_points",
    "neighbors",
]

#: Offsets reachable by one hop of the perturbation.
HOP_OFFSETS = ((-1, -1), (-1, 1), (1, -1), (1, 1))


class Site(NamedTuple):
    """A lattice point (j, n): spatial index j, temporal index n."""

    j: int
    n: int


def diagonal(a: Site) -> int:
    """Unperturbed diagonal entry n + j^2 at site ``a``."""
    return a[1] + a[0] * a[0]


def hopping(a: Site, b: Site, delta: float) -> float:
    """Coupling between sites ``a`` and ``b``: delta on diagonal neighbors, else 0."""
    if abs(a[0] - b[0]) == 1 and abs(a[1] - b[1]) == 1:
        return delta
    return 0.0


def neighbors(a: Site) -> list[Site]:
    """The four diagonal neighbors of ``a`` (not filtered to any box)."""
    return [Site(a[0] + dj, a[1] + dn) for dj, dn in HOP_OFFSETS]


@dataclass(frozen=True)
class LatticeBox:
    """Axis-aligned rectangle of sites around ``center``.

    Membership: |j - center.j| <= half_width_j and |n - center.n| <= half_width_n.
    """

    center: Site
    half_width_j: int
    half_width_n: int

    def __post_init__(self):
        if self.half_width_j < 0 or self.half_width_n < 0:
            raise ValueError("half widths must be nonnegative")

    @classmethod
    def square(cls, center: Site, half_width: int) -> "LatticeBox":
        return cls(Site(*center), half_width, half_width)

    @classmethod
    def from_ranges(cls, j_min: int, j_max: int, n_min: int, n_max: int) -> "LatticeBox":
        """Smallest box covering [j_min, j_max] x [n_min, n_max].

        Ranges must have an integer center, i.e. even extent.
        """
        if (j_min + j_max) % 2 or (n_min + n_max) % 2:
            raise ValueError("ranges must be symmetric about an integer center")
        cj, cn = (j_min + j_max) // 2, (n_min + n_max) // 2
        return cls(Site(cj, cn), j_max - cj, n_max - cn)

    def contains(self, a: Site) -> bool:
        return (
            abs(a[0] - self.center[0]) <= self.half_width_j
            and abs(a[1] - self.center[1]) <= self.half_width_n
        )

    @property
    def site_count(self) -> int:
        return (2 * self.half_width_j + 1) * (2 * self.half_width_n + 1)

    def sites(self) -> list[Site]:
        """All member sites, row-major: n ascending, then j ascending."""
        cj, cn = self.center
        return [
            Site(j, n)
            for n in range(cn - self.half_width_n, cn + self.half_width_n + 1)
            for j in range(cj - self.half_width_j, cj + self.half_width_j + 1)
        ]

    def j_range(self) -> tuple[int, int]:
        return (self.center[0] - self.half_width_j, self.center[0] + self.half_width_j)

    def n_range(self) -> tuple[int, int]:
        return (self.center[1] - self.half_width_n, self.center[1] + self.half_width_n)

    def boundary_sites(self) -> list[Site]:
        """Sites on the rim of the rectangle (extremal j or n coordinate)."""
        j_lo, j_hi = self.j_range()
        n_lo, n_hi = self.n_range()
        return [
            s
            for s in self.sites()
            if s[0] in (j_lo, j_hi) or s[1] in (n_lo, n_hi)
        ]


@dataclass(frozen=True)
class FloquetOperator:
    """Assembled restriction of diag(n + j^2) + delta * hopping to a box.

    ``sites`` are the active sites (box members minus ``excluded``) in the
    deterministic row-major order; ``matrix`` is the symmetric sparse
    operator on that index set.  Immutable after construction.
    """

    box: LatticeBox
    delta: float
    excluded: frozenset
    sites: tuple
    matrix: sp.csr_matrix = field(repr=False)
    index: dict = field(repr=False)

    @property
    def dim(self) -> int:
        return len(self.sites)

    def apply(self, v: np.ndarray) -> np.ndarray:
        """Matrix-vector product via the assembled sparse form."""
        v = np.asarray(v)
        if v.shape[0] != self.dim:
            raise ValueError(f"vector has dimension {v.shape[0]}, operator {self.dim}")
        return self.matrix @ v

    def apply_matrix_free(self, v: np.ndarray) -> np.ndarray:
        """Matrix-vector product from the stencil, no assembled matrix."""
        v = np.asarray(v)
        if v.shape[0] != self.dim:
            raise ValueError(f"vector has dimension {v.shape[0]}, operator {self.dim}")
        out = np.empty_like(v, dtype=np.result_type(v.dtype, float))
        for i, s in enumerate(self.sites):
            acc = diagonal(s) * v[i]
            for nb in neighbors(s):
                k = self.index.get(nb)
                if k is not None:
                    acc += self.delta * v[k]
            out[i] = acc
        return out

    def dense(self) -> np.ndarray:
        """Dense assembly; intended for modest boxes used as oracles."""
        if self.dim > 20000:
            warnings.warn(f"dense assembly of a {self.dim}-site operator")
        return self.matrix.toarray()

    def export_coo(self, path) -> None:
        """Write the operator as coordinate triples with a geometry header."""
        coo = self.matrix.tocoo()
        j_lo, j_hi = self.box.j_range()
        n_lo, n_hi = self.box.n_range()
        excl = sorted(self.excluded)
        with open(path, "w") as fh:
            fh.write(f"# box j:[{j_lo},{j_hi}] n:[{n_lo},{n_hi}]\n")
            fh.write(f"# delta {self.delta!r}\n")
            fh.write(f"# excluded {' '.join(f'({s[0]},{s[1]})' for s in excl) or '-'}\n")
            fh.write(f"# sites {self.dim} (row-major by n then j, excluded removed)\n")
            for a, b, val in zip(coo.row, coo.col, coo.data):
                fh.write(f"{a} {b} {float(val)!r}\n")


def build_operator(
    box: LatticeBox, delta: float, excluded: Iterable[Site] = ()
) -> FloquetOperator:
    """Assemble the restricted operator on ``box`` minus ``excluded``.

    delta >= 1/4 is allowed but flagged: the small-coupling estimates the
    toolkit verifies assume delta < 1/4.
    """
    if delta < 0:
        raise ValueError("delta must be nonnegative")
    if delta >= 0.25:
        warnings.warn(f"delta={delta} >= 1/4 is outside the small-coupling regime")
    excluded = frozenset(Site(*s) for s in excluded)
    bad = [s for s in excluded if not box.contains(s)]
    if bad:
        raise ValueError(f"excluded sites outside the box: {sorted(bad)}")

    sites = tuple(s for s in box.sites() if s not in excluded)
    index = {s: i for i, s in enumerate(sites)}
    rows, cols, vals = [], [], []
    for i, s in enumerate(sites):
        rows.append(i)
        cols.append(i)
        vals.append(float(diagonal(s)))
        for nb in neighbors(s):
            k = index.get(nb)
            if k is not None:
                rows.append(i)
                cols.append(k)
                vals.append(delta)
    matrix = sp.csr_matrix(
        (vals, (rows, cols)), shape=(len(sites), len(sites)), dtype=float
    )
    return FloquetOperator(
        box=box, delta=delta, excluded=excluded, sites=sites, matrix=matrix, index=index
    )


def resonant_sites(box: LatticeBox, E: float, delta: float) -> list[Site]:
    """Member sites with |n + j^2 - E| <= 2*delta, sorted by |j| (then j desc).

    For E = 0 and delta < 1/4 this is the piece of the parabola n + j^2 = 0
    inside the box.
    """
    hits = [s for s in box.sites() if abs(diagonal(s) - E) <= 2 * delta]
    hits.sort(key=lambda s: (abs(s[0]), -s[0], s[1]))
    return hits


def parabola_points(j_max: int) -> list[Site]:
    """The resonance parabola {(j, -j^2)} for |j| <= j_max, sorted by |j|."""
    pts = [Site(j, -j * j) for j in range(-j_max, j_max + 1)]
    pts.sort(key=lambda s: (abs(s[0]), -s[0]))
    return pts
