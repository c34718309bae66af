"""Time integration of the driven Schrodinger equation on the torus and
its cross-validation against the Bloch-wave (space-time eigenmode) basis.

The equation is i du/dt = -Laplacian u + V(x,t) u with the resonant
potential V(x,t) = 2*delta*(cos(x+t) + cos(x-t)) = 4*delta*cos(x)*cos(t),
normalized so the lattice hopping amplitude is exactly delta.  The sign
convention is u(t) = e^{-iHt} u(0), so a single free mode j evolves as
e^{-i j^2 t}.

The integrator is Strang splitting: exact kinetic phases in Fourier, the
exact potential phase at the substep midpoint on the spatial grid.  Each
factor is unitary, so the l2 norm is conserved to roundoff.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as la

from .lattice import LatticeBox, Site, build_operator
from .newton import EigenPair

__all__ = [
    "FourierState",
    "Trajectory",
    "BlochBasis",
    "potential_on_grid",
    "evolve",
    "sobolev_norm",
    "build_bloch_basis",
    "bloch_reconstruct",
]

PERIOD = 2.0 * math.pi


@dataclass(frozen=True)
class FourierState:
    """Spatial Fourier coefficients u_hat_j, j in [-J, J], at one instant."""

    coeffs: np.ndarray = field(repr=False)  # complex, index j = -J..J
    time: float
    J: int

    def __post_init__(self):
        if len(self.coeffs) != 2 * self.J + 1:
            raise ValueError("coefficient vector must have length 2J+1")

    @classmethod
    def single_mode(cls, k: int, J: int, amplitude: complex = 1.0) -> "FourierState":
        if abs(k) > J:
            raise ValueError("mode outside truncation radius")
        c = np.zeros(2 * J + 1, dtype=complex)
        c[k + J] = amplitude
        return cls(coeffs=c, time=0.0, J=J)

    @classmethod
    def power_law(cls, p: float, J: int, support_radius: int | None = None) -> "FourierState":
        """u_hat_j = (1 + |j|)^{-p}, optionally truncated to |j| <= support_radius."""
        js = np.arange(-J, J + 1)
        c = (1.0 + np.abs(js)) ** (-p) + 0j
        if support_radius is not None:
            c[np.abs(js) > support_radius] = 0.0
        return cls(coeffs=c, time=0.0, J=J)

    def coeff(self, j: int) -> complex:
        return complex(self.coeffs[j + self.J]) if abs(j) <= self.J else 0.0

    def l2_norm(self) -> float:
        return float(np.linalg.norm(self.coeffs))


def sobolev_norm(state: FourierState, s: float) -> float:
    """sqrt( sum_j (1 + |j|^{2s}) |u_hat_j|^2 ).

    At s = 0 the weight is 2 for j != 0 (and 2 at j = 0, taking 0^0 = 1),
    so the norm is bounded by sqrt(2) times the l2 norm.
    """
    if s < 0:
        raise ValueError("need s >= 0")
    js = np.abs(np.arange(-state.J, state.J + 1)).astype(float)
    weights = 1.0 + js ** (2.0 * s)
    return float(np.sqrt(np.sum(weights * np.abs(state.coeffs) ** 2)))


def potential_on_grid(delta: float, t: float, grid_size: int) -> np.ndarray:
    """V(x, t) = 2*delta*(cos(x+t) + cos(x-t)) on an equispaced grid.

    The only nonzero space-time Fourier coefficients are delta at
    (j, n) = (+-1, +-1)."""
    if grid_size < 4 or grid_size & (grid_size - 1):
        raise ValueError("grid_size must be a power of two >= 4")
    x = 2.0 * math.pi * np.arange(grid_size) / grid_size
    return 2.0 * delta * (np.cos(x + t) + np.cos(x - t))


@dataclass(frozen=True)
class Trajectory:
    """Stroboscopic record of an evolve run."""

    times: np.ndarray = field(repr=False)  # period boundaries, t=0 included
    norms: dict = field(repr=False)  # s -> array of H^s norms over times
    l2_drift: float
    delta: float
    s_values: tuple
    steps_per_period: int
    flags: tuple
    states: tuple = field(repr=False, default=())  # optional stored FourierStates
    final_state: FourierState | None = field(repr=False, default=None)

    def boundedness(self, s: float, fraction: float = 0.1) -> tuple[float, float, float]:
        """(max over first fraction, max over last fraction, their ratio)."""
        vals = self.norms[s]
        k = max(int(len(vals) * fraction), 1)
        first, last = float(vals[:k].max()), float(vals[-k:].max())
        return first, last, last / first

    def apriori_envelope_ok(self, s: float, calibration_points: int = 10) -> bool:
        """Fit C_s on the first few records and check the polynomial bound
        ||u(t)||_{H^s} <= C_s (1 + |t|^s) ||u(0)||_{H^s} for the rest."""
        vals = self.norms[s]
        base = vals[0]
        envelope = (1.0 + np.abs(self.times) ** s) * base
        k = max(min(calibration_points, len(vals) - 1), 1)
        C_s = float(np.max(vals[: k + 1] / envelope[: k + 1]))
        return bool(np.all(vals <= C_s * envelope * (1.0 + 1e-12)))

    def export_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("t,s,h_s_norm,l2_drift\n")
            for s in self.s_values:
                for t, v in zip(self.times, self.norms[s]):
                    fh.write(f"{t!r},{s!r},{v!r},{self.l2_drift!r}\n")


def _fft_mode_numbers(m: int) -> np.ndarray:
    return np.fft.fftfreq(m, d=1.0 / m).astype(int)


def _next_pow2(n: int) -> int:
    m = 1
    while m < n:
        m *= 2
    return m


def evolve(
    u0: FourierState,
    delta: float,
    T: float,
    steps_per_period: int = 64,
    s_values=(1.0,),
    grid_size: int | None = None,
    store_states_every: int = 0,
) -> Trajectory:
    """Strang-split integration over T (a multiple of 2*pi), recording
    H^s norms at every period boundary.

    Flags "truncation unsafe" when more than 1e-6 of the mass sits in the
    top 10% of grid modes.
    """
    if steps_per_period < 64:
        raise ValueError("need steps_per_period >= 64")
    periods = T / PERIOD
    n_periods = int(round(periods))
    if n_periods < 1 or abs(periods - n_periods) > 1e-9 * max(1.0, periods):
        raise ValueError("T must be a positive multiple of 2*pi")
    m = grid_size if grid_size is not None else _next_pow2(max(4 * u0.J, 16))
    if m < 4 * u0.J or m & (m - 1):
        raise ValueError("grid_size must be a power of two >= 4J")

    modes = _fft_mode_numbers(m)
    psi_hat = np.zeros(m, dtype=complex)
    for j in range(-u0.J, u0.J + 1):
        psi_hat[j % m] = u0.coeffs[j + u0.J]

    dt = PERIOD / steps_per_period
    kin_half = np.exp(-0.5j * dt * modes.astype(float) ** 2)
    cosx = np.cos(2.0 * math.pi * np.arange(m) / m)
    J_store = m // 2 - 1
    order = np.concatenate([np.arange(-J_store, 0) % m, np.arange(0, J_store + 1)])

    def to_state(t: float) -> FourierState:
        return FourierState(coeffs=psi_hat[order].copy(), time=t, J=J_store)

    s_values = tuple(float(s) for s in s_values)
    norm0 = float(np.linalg.norm(psi_hat))
    times = [0.0]
    norms = {s: [sobolev_norm(to_state(0.0), s)] for s in s_values}
    states = [to_state(0.0)] if store_states_every else []
    drift = 0.0
    flags = set()
    top = np.abs(modes) >= 0.9 * (m // 2)

    t = 0.0
    for period in range(1, n_periods + 1):
        for k in range(steps_per_period):
            t_mid = t + 0.5 * dt
            psi_hat *= kin_half
            psi = np.fft.ifft(psi_hat)
            psi *= np.exp(-1j * dt * (4.0 * delta * math.cos(t_mid)) * cosx)
            psi_hat = np.fft.fft(psi)
            psi_hat *= kin_half
            t += dt
        t = period * PERIOD  # avoid dt roundoff accumulation in t
        times.append(t)
        st = to_state(t)
        for s in s_values:
            norms[s].append(sobolev_norm(st, s))
        drift = max(drift, abs(float(np.linalg.norm(psi_hat)) - norm0) / norm0)
        if float(np.sum(np.abs(psi_hat[top]) ** 2)) > 1e-6 * float(
            np.sum(np.abs(psi_hat) ** 2)
        ):
            flags.add("truncation unsafe")
        if store_states_every and period % store_states_every == 0:
            states.append(st)

    return Trajectory(
        times=np.array(times),
        norms={s: np.array(v) for s, v in norms.items()},
        l2_drift=drift,
        delta=delta,
        s_values=s_values,
        steps_per_period=steps_per_period,
        flags=tuple(sorted(flags)),
        states=tuple(states),
        final_state=to_state(t),
    )


@dataclass(frozen=True)
class BlochBasis:
    """Full eigenbasis of a truncated space-time operator.

    The n-range must cover the resonant parabola down to -J^2 for spectral
    studies (default N = J^2 + 4); for dynamics of initial data supported
    on low modes a much shorter n-range already reproduces the flow.
    """

    delta: float
    J: int
    N: int
    box: LatticeBox
    eigenvalues: np.ndarray = field(repr=False)
    eigenvectors: np.ndarray = field(repr=False)  # columns
    sites: tuple = field(repr=False)

    @property
    def dim(self) -> int:
        return len(self.eigenvalues)

    def site_index(self, j: int, n: int) -> int:
        return (n + self.N) * (2 * self.J + 1) + (j + self.J)

    def orthogonality_defect(self) -> float:
        G = self.eigenvectors.T @ self.eigenvectors
        return float(np.max(np.abs(G - np.eye(self.dim))))

    def embed(self, u0: FourierState) -> np.ndarray:
        """Lift spatial coefficients onto the n = 0 row of the box."""
        if u0.J > self.J:
            raise ValueError("initial state exceeds the basis j-range")
        v = np.zeros(self.dim, dtype=complex)
        for j in range(-u0.J, u0.J + 1):
            v[self.site_index(j, 0)] = u0.coeffs[j + u0.J]
        return v

    def completeness_defect(self, u0: FourierState) -> float:
        v = self.embed(u0)
        c = self.eigenvectors.T @ v
        return float(np.linalg.norm(v - self.eigenvectors @ c))

    def eigenpairs_in_window(self, lo: float, hi: float) -> list[EigenPair]:
        out = []
        for i in np.nonzero((self.eigenvalues >= lo) & (self.eigenvalues <= hi))[0]:
            phi = self.eigenvectors[:, i]
            if phi[np.argmax(np.abs(phi))] < 0:
                phi = -phi
            out.append(
                EigenPair(
                    E=float(self.eigenvalues[i]),
                    phi=phi,
                    box=self.box,
                    method="dense",
                    delta=self.delta,
                    sites=self.sites,
                )
            )
        out.sort(key=lambda p: p.E)
        return out


def build_bloch_basis(
    delta: float, J: int, N: int | None = None, max_dense: int = 8000
) -> BlochBasis:
    """Dense eigenbasis of the operator on [-J, J] x [-N, N]."""
    if N is None:
        N = J * J + 4
    box = LatticeBox(Site(0, 0), J, N)
    if box.site_count > max_dense:
        raise ValueError(
            f"box has {box.site_count} sites; dense eigensolve beyond {max_dense} "
            "is not feasible here - pass a smaller N"
        )
    op = build_operator(box, delta)
    evals, evecs = la.eigh(op.dense())
    return BlochBasis(
        delta=delta,
        J=J,
        N=N,
        box=box,
        eigenvalues=evals,
        eigenvectors=evecs,
        sites=op.sites,
    )


def bloch_reconstruct(
    basis: BlochBasis, u0: FourierState, t: float, defect_tol: float = 1e-4
) -> FourierState:
    """Evaluate the eigenmode expansion of the solution at time t:
    u_hat_j(t) = sum over modes of (u0_tilde, phi) e^{-iEt} sum_n phi(j,n) e^{int}."""
    defect = basis.completeness_defect(u0)
    if defect > defect_tol:
        raise ValueError(f"completeness defect {defect:.3e} exceeds {defect_tol:.1e}")
    v = basis.embed(u0)
    c = basis.eigenvectors.T @ v
    w = basis.eigenvectors @ (np.exp(-1j * basis.eigenvalues * t) * c)
    grid = w.reshape(2 * basis.N + 1, 2 * basis.J + 1)  # rows n, cols j
    phases = np.exp(1j * np.arange(-basis.N, basis.N + 1) * t)
    coeffs = phases @ grid
    return FourierState(coeffs=coeffs, time=t, J=basis.J)
