"""Hong-Ou-Mandel interference of the two-port biphoton.

The coincidence probability behind a 50:50 beamsplitter is::

    p(tau) = 1/2 - 1/2 Re sum_pq  int A*_pq(-w) A_qp(w) exp(2 i w tau) dw

which for the two-bin filter and a symmetric polarization state reduces to::

    p(tau) = 1/2 - V/2 sinc(dw tau) cos(2 w0 tau - phi_freq)
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import least_squares

from . import rng
from .source import SpectralBiphotonState

PS = 1e-12


class GridTooCoarseError(ValueError):
    pass


class FitError(RuntimeError):
    """Fit did not converge; ``last`` holds the final iterate (V, phi_freq)."""

    def __init__(self, msg: str, last: tuple[float, float] | None = None):
        super().__init__(msg)
        self.last = last


@dataclass(frozen=True)
class HomiParams:
    V: float
    phi_freq: float
    omega0: float
    delta_omega: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.V <= 1.0:
            raise ValueError(f"visibility must lie in [0, 1], got {self.V}")

    @classmethod
    def from_filter(cls, filt, V: float = 1.0) -> "HomiParams":
        return cls(V, filt.phi_freq, filt.omega0, filt.delta_omega)


@dataclass(frozen=True)
class HomiScan:
    delays: np.ndarray
    counts: np.ndarray
    pairs_per_point: float
    seed: int | None = None

    def __post_init__(self) -> None:
        d = np.asarray(self.delays, dtype=float)
        c = np.asarray(self.counts)
        if d.shape != c.shape or d.ndim != 1:
            raise ValueError("delays and counts must be 1-D arrays of equal length")
        if np.any(c < 0):
            raise ValueError("counts must be non-negative")
        object.__setattr__(self, "delays", d)
        object.__setattr__(self, "counts", c)

    @property
    def suspicious(self) -> np.ndarray:
        """Points whose counts exceed 1.5 N (not reachable by the model)."""
        return self.counts > 1.5 * self.pairs_per_point


@dataclass(frozen=True)
class HomiFit:
    V: float
    phi_freq: float
    V_sigma: float
    phi_freq_sigma: float
    chi2_reduced: float
    covariance: np.ndarray = field(repr=False)
    above_one: bool = False

    def report(self) -> dict:
        return {
            "V": self.V,
            "V_sigma": self.V_sigma,
            "phi_freq": self.phi_freq,
            "phi_freq_sigma": self.phi_freq_sigma,
            "chi2_reduced": self.chi2_reduced,
        }


def _sinc(x):
    return np.sinc(np.asarray(x) / math.pi)


def _model(tau, V, phi, omega0, delta_omega):
    return 0.5 - 0.5 * V * _sinc(delta_omega * tau) * np.cos(2.0 * omega0 * tau - phi)


def coincidence_probability_closed(tau, params: HomiParams):
    p = _model(np.asarray(tau, dtype=float), params.V, params.phi_freq, params.omega0, params.delta_omega)
    assert np.all((p >= -1e-12) & (p <= 1 + 1e-12))
    return float(p) if np.ndim(p) == 0 else p


def rotate_mode4(state: SpectralBiphotonState) -> SpectralBiphotonState:
    """Swap H and V of the mode-4 photon (the polarization controller before the BS)."""
    if state.kind != "post":
        raise ValueError("rotate_mode4 needs a two-port state")
    return replace(state, amplitudes=state.amplitudes[:, ::-1, :])


def exchange_integrand(state: SpectralBiphotonState) -> np.ndarray:
    """``sum_pq A*_pq(-w) A_qp(w)`` on the grid."""
    a = state.amplitudes
    return np.einsum("pqn,qpn->n", state.grid.mirror(a).conj(), a)


def quadrature_error(state: SpectralBiphotonState, g: np.ndarray | None = None) -> float:
    """Estimated error of the cellwise-constant integration of the exchange term.

    Curvature of the integrand inside the passbands plus the probability mass
    misplaced where a filter edge does not fall on a cell boundary.
    """
    g = exchange_integrand(state) if g is None else g
    h = state.grid.step
    nz = np.abs(g) > 0
    interior = nz[:-2] & nz[1:-1] & nz[2:]
    curvature = np.abs(g[2:] - 2 * g[1:-1] + g[:-2])[interior].sum() * h / 24.0
    misplaced = state.grid.edge_misalignment(state.filter.edges) * h * np.max(np.abs(g), initial=0.0) * 4
    return float(curvature + misplaced)


def coincidence_probability_numeric(state: SpectralBiphotonState, tau, max_error: float = 1e-4):
    """Coincidence probability from the spectral amplitudes.

    Each grid cell's integrand is held constant and the phase factor is
    integrated exactly over the cell, so top-hat filters whose edges sit on
    cell boundaries are integrated without discretization error.  Components
    whose polarizations differ between the two photons contribute only
    through their polarization overlap.
    """
    g = exchange_integrand(state)
    err = quadrature_error(state, g)
    if err > max_error:
        raise GridTooCoarseError(f"quadrature error estimate {err:.2e} exceeds {max_error:.1e}")
    tau_arr = np.atleast_1d(np.asarray(tau, dtype=float))
    h = state.grid.step
    w = state.grid.omega
    phase = np.exp(2j * np.outer(tau_arr, w))
    overlap = (phase @ g) * h * _sinc(h * tau_arr)
    p = 0.5 - 0.5 * overlap.real
    return float(p[0]) if np.ndim(tau) == 0 else p


def default_delays(step_ps: float = 0.25, half_range_ps: float = 10.0) -> np.ndarray:
    n = int(round(2 * half_range_ps / step_ps))
    return (np.arange(n + 1) * step_ps - half_range_ps) * PS


def simulate_scan(delays, params: HomiParams, pairs_per_point: float, seed: int,
                  noiseless: bool = False, path: str = "homi") -> HomiScan:
    """Poisson coincidence counts along a delay scan.

    ``noiseless=True`` returns the expected counts instead of samples.
    """
    if not pairs_per_point > 0:
        raise ValueError("pairs_per_point must be positive")
    delays = np.asarray(delays, dtype=float)
    mean = pairs_per_point * coincidence_probability_closed(delays, params)
    counts = np.asarray(mean, dtype=float) if noiseless else rng.poisson_counts(mean, seed, path)
    return HomiScan(delays, counts, pairs_per_point, seed)


V_UPPER = 1.05


def fit_scan(scan: HomiScan, omega0: float, delta_omega: float, max_nfev: int = 2000) -> HomiFit:
    """Weighted least-squares fit of (V, phi_freq) with Poisson weights.

    Starts from phi_freq in {0, pi/2, pi, 3pi/2} and keeps the lowest cost.
    """
    tau, counts, n = scan.delays, np.asarray(scan.counts, dtype=float), scan.pairs_per_point
    if tau.size < 8:
        raise ValueError(f"need at least 8 delay points, got {tau.size}")
    if np.ptp(tau) < math.pi / omega0:
        raise ValueError("delay scan must span at least one fringe period pi/omega0")
    if np.ptp(counts) == 0:
        raise ValueError("degenerate scan: all counts are equal")

    y = counts / n
    sigma = np.sqrt(np.maximum(counts, 1.0)) / n
    env = _sinc(delta_omega * tau)

    def resid(x):
        return (_model(tau, x[0], x[1], omega0, delta_omega) - y) / sigma

    def jac(x):
        V, phi = x
        arg = 2.0 * omega0 * tau - phi
        d_v = -0.5 * env * np.cos(arg)
        d_phi = -0.5 * V * env * np.sin(arg)
        return np.column_stack([d_v, d_phi]) / sigma[:, None]

    v0 = float(np.clip(2.0 * np.max(np.abs(y - 0.5)), 0.05, 1.0))
    best = None
    for phi0 in (0.0, 0.5 * math.pi, math.pi, 1.5 * math.pi):
        res = least_squares(resid, [v0, phi0], jac=jac, bounds=([0.0, -np.inf], [V_UPPER, np.inf]),
                            method="trf", x_scale=[1.0, 1.0], xtol=1e-14, ftol=1e-14, gtol=1e-14,
                            max_nfev=max_nfev)
        if best is None or res.cost < best.cost:
            best = res
    if best.status <= 0:
        raise FitError(f"fit did not converge: {best.message}", (float(best.x[0]), float(best.x[1])))
    V, phi = float(best.x[0]), float(best.x[1]) % (2 * math.pi)
    J = jac(best.x)
    cov = np.linalg.pinv(J.T @ J)
    dof = max(tau.size - 2, 1)
    chi2 = float(2.0 * best.cost / dof)
    return HomiFit(V, phi, float(math.sqrt(cov[0, 0])), float(math.sqrt(cov[1, 1])), chi2, cov,
                   above_one=V > 1.0)
