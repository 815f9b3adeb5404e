"""Frequency grids and the two-bin waveshaper filter.

All frequencies are angular (rad/s) detunings from the degeneracy frequency
``omega_p / 2`` unless a name says otherwise.  A positive detuning on a
two-photon amplitude always refers to the photon in spatial mode 3; its
partner sits at the mirrored detuning by energy conservation.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

C_LIGHT = 299_792_458.0
TWO_PI = 2.0 * math.pi
THZ = TWO_PI * 1e12  # angular frequency of 1 THz


@dataclass(frozen=True)
class SourceConstants:
    pump_wavelength: float = 778e-9
    degeneracy_wavelength: float = 1556e-9
    c: float = C_LIGHT

    @property
    def pump_omega(self) -> float:
        return TWO_PI * self.c / self.pump_wavelength

    @property
    def degeneracy_omega(self) -> float:
        return TWO_PI * self.c / self.degeneracy_wavelength


CONSTANTS = SourceConstants()


def nm_to_omega_width(width_nm: float, center_wavelength: float = CONSTANTS.degeneracy_wavelength) -> float:
    """Angular-frequency width of a ``width_nm`` passband at ``center_wavelength``."""
    return TWO_PI * C_LIGHT * width_nm * 1e-9 / center_wavelength**2


@dataclass(frozen=True)
class FrequencyGrid:
    """Uniform cell-centred grid of detunings, symmetric about zero.

    Point ``k`` is the centre of the cell ``[-span/2 + k h, -span/2 + (k+1) h]``
    with ``h = span / n_points``.  ``n_points`` is even, so zero is a cell
    boundary and index ``k`` mirrors to ``n_points - 1 - k``.
    """

    span: float
    n_points: int = 2048
    center: float = CONSTANTS.degeneracy_omega

    def __post_init__(self) -> None:
        if self.n_points < 64 or self.n_points % 2:
            raise ValueError(f"n_points must be even and >= 64, got {self.n_points}")
        if not self.span > 0:
            raise ValueError("span must be positive")

    @property
    def step(self) -> float:
        return self.span / self.n_points

    @property
    def omega(self) -> np.ndarray:
        k = np.arange(self.n_points)
        return -0.5 * self.span + (k + 0.5) * self.step

    @property
    def positive(self) -> slice:
        """Slice selecting the cells with positive detuning."""
        return slice(self.n_points // 2, self.n_points)

    def mirror(self, values: np.ndarray) -> np.ndarray:
        """Values at ``-omega`` (reverse along the last axis)."""
        return values[..., ::-1]

    def edge_misalignment(self, edges) -> float:
        """Largest distance, in cells, from any edge to the nearest cell boundary."""
        pos = (np.asarray(edges, dtype=float) + 0.5 * self.span) / self.step
        return float(np.max(np.abs(pos - np.round(pos)))) if np.size(pos) else 0.0


@dataclass(frozen=True)
class FilterSpec:
    """Two rectangular bins at ``+-omega0`` of width ``delta_omega``.

    Mode 4's photon in the upper bin picks up ``exp(i phi_freq)``; in the
    mode-3 detuning coordinate that is the lower bin.  Amplitude inside each
    bin is ``1/sqrt(2 delta_omega)`` so that the integrated power is 1.
    Bins are closed intervals.
    """

    omega0: float
    delta_omega: float
    phi_freq: float = 0.0
    contiguous: bool = False

    def __post_init__(self) -> None:
        if not self.delta_omega > 0:
            raise ValueError("delta_omega must be positive")
        if self.contiguous:
            if not math.isclose(self.omega0, 0.5 * self.delta_omega, rel_tol=1e-12):
                raise ValueError("a contiguous band needs omega0 == delta_omega / 2")
        elif not self.omega0 > 0.5 * self.delta_omega:
            raise ValueError(
                f"overlapping bins: omega0={self.omega0:.6g} must exceed delta_omega/2={0.5 * self.delta_omega:.6g}"
            )

    @property
    def amplitude(self) -> float:
        return 1.0 / math.sqrt(2.0 * self.delta_omega)

    @property
    def edges(self) -> tuple[float, float, float, float]:
        h = 0.5 * self.delta_omega
        return (-self.omega0 - h, -self.omega0 + h, self.omega0 - h, self.omega0 + h)

    def with_phase(self, phi_freq: float) -> "FilterSpec":
        return FilterSpec(self.omega0, self.delta_omega, phi_freq, self.contiguous)

    def default_grid(self, n_points: int = 2048) -> FrequencyGrid:
        return make_grid(self, n_points)


def make_two_bin_filter(omega0: float, delta_omega: float, phi_freq: float = 0.0) -> FilterSpec:
    return FilterSpec(float(omega0), float(delta_omega), float(phi_freq))


def contiguous_band(width: float, phi_freq: float = 0.0) -> FilterSpec:
    """A single passband of total ``width`` centred on degeneracy.

    Represented as two touching bins so that the upper and lower halves still
    act as the signal and idler bins.
    """
    return FilterSpec(0.25 * width, 0.5 * width, phi_freq, contiguous=True)


CHANNEL_SPACING_THZ = 0.4
CHANNEL_WIDTH_THZ = 0.4


def channel(n: int, phi_freq: float = 0.0) -> FilterSpec:
    """Channels 1..4: bins at +-0.4 n THz, 0.4 THz wide."""
    if n not in (1, 2, 3, 4):
        raise ValueError(f"channel must be 1..4, got {n!r}")
    return make_two_bin_filter(CHANNEL_SPACING_THZ * n * THZ, CHANNEL_WIDTH_THZ * THZ, phi_freq)


def transmission(filt: FilterSpec, omega) -> np.ndarray | complex:
    """Complex filter amplitude at detuning(s) ``omega``."""
    w = np.asarray(omega, dtype=float)
    h = 0.5 * filt.delta_omega
    upper = np.abs(w - filt.omega0) <= h
    lower = np.abs(w + filt.omega0) <= h
    if filt.contiguous:
        # the shared edge at zero belongs to the upper bin
        lower &= ~upper
    out = np.where(upper, filt.amplitude, 0.0).astype(complex)
    out = np.where(lower, filt.amplitude * np.exp(1j * filt.phi_freq), out)
    return complex(out) if out.ndim == 0 else out


def make_grid(filt: FilterSpec, n_points: int = 2048) -> FrequencyGrid:
    """Grid covering ``2 (omega0 + delta_omega)`` with bin edges on cell boundaries when possible.

    The span is rounded up to the smallest value for which every filter edge
    falls on a cell boundary; if the edge positions are incommensurate the
    plain span is used.
    """
    span_min = 2.0 * (filt.omega0 + filt.delta_omega)
    inner = filt.omega0 - 0.5 * filt.delta_omega
    m_max = int(math.floor(n_points * filt.delta_omega / span_min))
    for m in range(m_max, 0, -1):
        h = filt.delta_omega / m
        j = inner / h
        if abs(j - round(j)) < 1e-9 and n_points * h >= span_min * (1 - 1e-12):
            return FrequencyGrid(n_points * h, n_points)
    return FrequencyGrid(span_min, n_points)


def sampled(filt: FilterSpec, grid: FrequencyGrid) -> np.ndarray:
    return transmission(filt, grid.omega)


def power_integral(filt: FilterSpec, grid: FrequencyGrid) -> float:
    """Grid quadrature of the integrated filter power (1 for a resolved filter)."""
    return float(np.sum(np.abs(sampled(filt, grid)) ** 2) * grid.step)
