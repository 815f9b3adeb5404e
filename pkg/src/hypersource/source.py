"""Forward model of the bidirectionally pumped Sagnac-loop source.

Pipeline for one configuration::

    single_pass_state(1) -> apply_pmf_segments(1) --\
                                                     pbs_combine -> apply_waveshapers
    single_pass_state(2) -> apply_pmf_segments(2) --/

Amplitude arrays have shape ``(2, 2, N)`` with polarization index 0 = H,
1 = V.  Before the PBS (``kind="pre"``) the axes are (polarization of the
photon at ``+omega``, polarization of the photon at ``-omega``, ``omega``) and
only ``omega > 0`` is populated, so every physical pair is stored once.
After the PBS (``kind="post"``) the axes are (polarization in mode 3,
polarization in mode 4, detuning of the mode-3 photon) over the full grid.
"""
from __future__ import annotations

import math
from concurrent.futures import Executor
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Sequence

import numpy as np

from . import qmath
from .qmath import DensityMatrix
from .spectral import (
    C_LIGHT,
    CONSTANTS,
    THZ,
    FilterSpec,
    FrequencyGrid,
    contiguous_band,
    make_grid,
    make_two_bin_filter,
    nm_to_omega_width,
    transmission,
)

H, V = 0, 1

BEAT_LENGTH = 4e-3
#: Delta n from the PM1550 beat length: 1556 nm / 4 mm.
BEAT_LENGTH_BIREFRINGENCE = CONSTANTS.degeneracy_wavelength / BEAT_LENGTH
N_EFF = 1.444

#: Birefringence fitted to the reported length-mismatch degradations
#: (2 mm -> 2 %, 5 mm -> 10 % at 3.3 THz detuning, 1 nm bins).
#: Reproduced by :func:`calibrate_birefringence`.
CALIBRATED_BIREFRINGENCE = 1.3088e-3

SWEEP_DETUNING = 3.3 * THZ
SWEEP_WIDTH_NM = 1.0


class PostSelectionError(ArithmeticError):
    """No probability survives the one-photon-per-port post-selection."""


@dataclass(frozen=True)
class SpliceErrors:
    """Rotation errors (rad) at each splice plane, in the PPSF frame."""

    ppsf_l1: float = 0.0
    l1_l1p: float = 0.0
    l1p_pbs: float = 0.0
    ppsf_l2: float = 0.0
    l2_l2p: float = 0.0
    l2p_pbs: float = 0.0

    def arm(self, direction: int) -> tuple[float, float, float]:
        if direction == 1:
            return self.ppsf_l1, self.l1_l1p, self.l1p_pbs
        if direction == 2:
            return self.ppsf_l2, self.l2_l2p, self.l2p_pbs
        raise ValueError(f"direction must be 1 or 2, got {direction!r}")

    def total(self) -> float:
        """Quadrature sum of all splice errors."""
        return math.sqrt(sum(t * t for t in (
            self.ppsf_l1, self.l1_l1p, self.l1p_pbs, self.ppsf_l2, self.l2_l2p, self.l2p_pbs)))


@dataclass(frozen=True)
class SourceConfig:
    """Physical knobs of the source.  Lengths in metres, angles in radians."""

    L1: float = 1.0
    L1p: float = 1.0
    L2: float = 1.0
    L2p: float = 1.0
    splice: SpliceErrors = field(default_factory=SpliceErrors)
    pump_split: float = 0.5
    pump_phase1: float = 0.0
    pump_phase2: float = 0.0
    birefringence: float = BEAT_LENGTH_BIREFRINGENCE
    n_eff: float = N_EFF

    def __post_init__(self) -> None:
        for name in ("L1", "L1p", "L2", "L2p"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if not 0.0 <= self.pump_split <= 1.0:
            raise ValueError(f"pump_split must lie in [0, 1], got {self.pump_split}")
        if not self.birefringence > 0:
            raise ValueError("birefringence must be positive")

    @classmethod
    def from_mismatch(cls, length: float = 1.0, alpha1: float = 0.0, alpha2: float = 0.0,
                      beta: float = 0.0, **kwargs) -> "SourceConfig":
        """Lengths from ``L1`` and the mismatches ``L1' = L1 + alpha1``, ``L2 = L1 + beta``, ``L2' = L2 + alpha2``."""
        L2 = length + beta
        return cls(L1=length, L1p=length + alpha1, L2=L2, L2p=L2 + alpha2, **kwargs)

    @property
    def alpha1(self) -> float:
        return self.L1p - self.L1

    @property
    def alpha2(self) -> float:
        return self.L2p - self.L2

    @property
    def beta(self) -> float:
        return self.L2 - self.L1

    def arm_lengths(self, direction: int) -> tuple[float, float]:
        if direction == 1:
            return self.L1, self.L1p
        if direction == 2:
            return self.L2, self.L2p
        raise ValueError(f"direction must be 1 or 2, got {direction!r}")

    def pump(self, direction: int) -> tuple[float, float]:
        """(amplitude weight, phase) of the pump in ``direction``."""
        if direction == 1:
            return math.sqrt(self.pump_split), self.pump_phase1
        if direction == 2:
            return math.sqrt(1.0 - self.pump_split), self.pump_phase2
        raise ValueError(f"direction must be 1 or 2, got {direction!r}")


@dataclass(frozen=True)
class PmfDispersion:
    """Propagation constants linear in absolute angular frequency."""

    birefringence: float
    n_eff: float = N_EFF

    def k_h(self, omega_abs):
        return (self.n_eff + 0.5 * self.birefringence) * np.asarray(omega_abs) / C_LIGHT

    def k_v(self, omega_abs):
        return (self.n_eff - 0.5 * self.birefringence) * np.asarray(omega_abs) / C_LIGHT

    @classmethod
    def of(cls, config: SourceConfig) -> "PmfDispersion":
        return cls(config.birefringence, config.n_eff)


@dataclass(frozen=True)
class SpectralBiphotonState:
    grid: FrequencyGrid
    filter: FilterSpec
    amplitudes: np.ndarray
    kind: str = "post"
    discarded: float = 0.0

    def __post_init__(self) -> None:
        amp = np.array(self.amplitudes, dtype=complex, copy=True)
        if amp.shape != (2, 2, self.grid.n_points):
            raise ValueError(f"amplitudes must have shape (2, 2, {self.grid.n_points}), got {amp.shape}")
        if self.kind not in ("pre", "post"):
            raise ValueError(f"kind must be 'pre' or 'post', got {self.kind!r}")
        amp.setflags(write=False)
        object.__setattr__(self, "amplitudes", amp)

    def norm(self) -> float:
        return float(np.sum(np.abs(self.amplitudes) ** 2) * self.grid.step)

    def pair(self, name: str) -> np.ndarray:
        """Amplitude array for a polarization pair label such as ``"HV"``."""
        idx = {"H": H, "V": V}
        return self.amplitudes[idx[name[0]], idx[name[1]]]


def _check_on_grid(filt: FilterSpec, grid: FrequencyGrid) -> None:
    if max(abs(e) for e in filt.edges) > 0.5 * grid.span * (1 + 1e-12):
        raise ValueError("filter passband extends beyond the frequency grid")


def single_pass_state(direction: int, config: SourceConfig, filt: FilterSpec,
                      grid: FrequencyGrid | None = None) -> SpectralBiphotonState:
    """Type-II pair at one PPSF end: equal HV and VH terms with the pump phase."""
    grid = make_grid(filt) if grid is None else grid
    _check_on_grid(filt, grid)
    _, phase = config.pump(direction)
    mag = np.abs(transmission(filt, grid.omega))
    mag[: grid.n_points // 2] = 0.0
    amp = np.zeros((2, 2, grid.n_points), dtype=complex)
    amp[H, V] = amp[V, H] = np.exp(1j * phase) * mag
    return SpectralBiphotonState(grid, filt, amp, kind="pre")


def _arm_jones(direction: int, config: SourceConfig, omega_abs: np.ndarray) -> np.ndarray:
    """Per-frequency Jones matrices, shape (N, 2, 2), from the PPSF end to the PBS."""
    disp = PmfDispersion.of(config)
    L, Lp = config.arm_lengths(direction)
    t_ppsf, t_cross, t_pbs = config.splice.arm(direction)
    kh, kv = disp.k_h(omega_abs), disp.k_v(omega_abs)
    n = omega_abs.shape[0]
    seg1 = np.zeros((n, 2, 2), dtype=complex)
    seg1[:, H, H] = np.exp(1j * kh * L)
    seg1[:, V, V] = np.exp(1j * kv * L)
    # cross-spliced segment: PPSF-frame H travels on the fast axis
    seg2 = np.zeros((n, 2, 2), dtype=complex)
    seg2[:, H, H] = np.exp(1j * kv * Lp)
    seg2[:, V, V] = np.exp(1j * kh * Lp)
    return qmath.rotation(t_pbs) @ seg2 @ qmath.rotation(t_cross) @ seg1 @ qmath.rotation(t_ppsf)


def apply_pmf_segments(state: SpectralBiphotonState, config: SourceConfig,
                       direction: int) -> SpectralBiphotonState:
    """Propagate a pre-PBS state through L_X, the cross-splice and L_X'."""
    if state.kind != "pre":
        raise ValueError("apply_pmf_segments expects a pre-PBS state")
    w = state.grid.omega
    j_up = _arm_jones(direction, config, state.grid.center + w)
    j_lo = _arm_jones(direction, config, state.grid.center - w)
    amp = np.einsum("nac,nbd,cdn->abn", j_up, j_lo, state.amplitudes)
    return replace(state, amplitudes=amp)


# port reached by (direction, polarization): H of 1 and V of 2 exit at 3
_PORT = {(1, H): 3, (1, V): 4, (2, H): 4, (2, V): 3}


def pbs_combine(state1: SpectralBiphotonState, state2: SpectralBiphotonState,
                config: SourceConfig) -> SpectralBiphotonState:
    """Coherently superpose both directions at the PBS and post-select one photon per port.

    The returned state is renormalized; ``discarded`` holds the probability of
    both photons leaving through the same port.
    """
    if state1.grid != state2.grid:
        raise ValueError("states live on different frequency grids")
    grid = state1.grid
    post = np.zeros((2, 2, grid.n_points), dtype=complex)
    lost = 0.0
    for direction, st in ((1, state1), (2, state2)):
        weight, _ = config.pump(direction)
        for a in (H, V):
            for b in (H, V):
                amp = weight * st.amplitudes[a, b]
                pa, pb = _PORT[direction, a], _PORT[direction, b]
                if pa == pb:
                    lost += float(np.sum(np.abs(amp) ** 2) * grid.step)
                elif pa == 3:
                    post[a, b] += amp
                else:
                    post[b, a] += amp[::-1]
    kept = float(np.sum(np.abs(post) ** 2) * grid.step)
    if kept <= 1e-14:
        raise PostSelectionError("no two-port coincidences survive the PBS")
    total = kept + lost
    return SpectralBiphotonState(grid, state1.filter, post / math.sqrt(kept), kind="post",
                                 discarded=lost / total)


def apply_waveshapers(state: SpectralBiphotonState) -> SpectralBiphotonState:
    """Imprint the filter phase (``phi_freq`` on mode 4's upper-bin photon)."""
    if state.kind != "post":
        raise ValueError("waveshapers act on the two-port state")
    t = transmission(state.filter, state.grid.omega)
    phase = np.where(np.abs(t) > 0, np.exp(1j * np.angle(t)), 1.0)
    return replace(state, amplitudes=state.amplitudes * phase)


def output_state(config: SourceConfig, filt: FilterSpec,
                 grid: FrequencyGrid | None = None) -> SpectralBiphotonState:
    """Full pipeline: both directions, PMF propagation, PBS, waveshapers."""
    grid = make_grid(filt) if grid is None else grid
    arms = [apply_pmf_segments(single_pass_state(d, config, filt, grid), config, d) for d in (1, 2)]
    return apply_waveshapers(pbs_combine(arms[0], arms[1], config))


def polarization_rho_of(state: SpectralBiphotonState) -> DensityMatrix:
    """Trace out frequency by quadrature over the two-port state."""
    a = state.amplitudes.reshape(4, -1)
    return DensityMatrix.from_array(a @ a.conj().T * state.grid.step, qmath.POL_LABELS)


def hyper_rho_of(state: SpectralBiphotonState) -> DensityMatrix:
    """16-dim pol (x) frequency-bin density matrix.

    The frequency qubit pairs the detuning ``omega`` with its mirror
    ``-omega``: component ``si`` is the amplitude at ``+omega`` (mode 3 in the
    upper bin), ``is`` the amplitude at ``-omega``, integrated over
    ``omega > 0``.  ``ss`` and ``ii`` are empty by energy conservation.
    """
    grid = state.grid
    a = state.amplitudes.reshape(4, -1)
    pos = grid.positive
    v = np.zeros((16, grid.n_points // 2), dtype=complex)
    v[1::4] = a[:, pos]
    v[2::4] = grid.mirror(a)[:, pos]
    return DensityMatrix.from_array(v @ v.conj().T * grid.step, qmath.GLOBAL_LABELS)


def output_polarization_rho(config: SourceConfig, filt: FilterSpec,
                            grid: FrequencyGrid | None = None) -> DensityMatrix:
    return polarization_rho_of(output_state(config, filt, grid))


def output_frequency_rho(config: SourceConfig, filt: FilterSpec,
                         grid: FrequencyGrid | None = None) -> DensityMatrix:
    return qmath.partial_trace(hyper_rho_of(output_state(config, filt, grid)), "frequency")


def polarization_phase(config: SourceConfig, center: float = CONSTANTS.degeneracy_omega) -> float:
    """phi_pol = phi_p2 - phi_p1 + (k_H(s)+k_H(i)+k_V(s)+k_V(i)) beta, wrapped to [0, 2 pi)."""
    disp = PmfDispersion.of(config)
    ksum = 2.0 * (disp.k_h(center) + disp.k_v(center))
    return float((config.pump_phase2 - config.pump_phase1 + ksum * config.beta) % (2 * math.pi))


def ideal_hyper_state(phi_pol: float, phi_freq: float) -> np.ndarray:
    """(HV + e^{i phi_pol} VH)/sqrt2 (x) (si + e^{i phi_freq} is)/sqrt2 as a 16-vector."""
    pol = np.array([0, 1, np.exp(1j * phi_pol), 0], dtype=complex) / math.sqrt(2)
    freq = np.array([0, 1, np.exp(1j * phi_freq), 0], dtype=complex) / math.sqrt(2)
    return np.kron(pol, freq)


# ---------------------------------------------------------------- sweeps

SWEEP_AXES = ("alpha1_alpha2", "t1_t2", "pump", "bandwidth")


class SweepCellError(RuntimeError):
    def __init__(self, index: tuple[int, ...], cause: Exception):
        super().__init__(f"sweep cell {index} failed: {cause}")
        self.index = index
        self.cause = cause


def sweep_filter() -> FilterSpec:
    """Two 1 nm bins at +-3.3 THz detuning."""
    return make_two_bin_filter(SWEEP_DETUNING, nm_to_omega_width(SWEEP_WIDTH_NM))


def calibrated_config(**kwargs) -> SourceConfig:
    kwargs.setdefault("birefringence", CALIBRATED_BIREFRINGENCE)
    return SourceConfig(**kwargs)


def _cell_config(base: SourceConfig, axis: str, point: tuple[float, ...]) -> SourceConfig:
    if axis == "alpha1_alpha2":
        a1, a2 = point
        return replace(base, L1p=base.L1 + a1, L2p=base.L2 + a2)
    if axis == "t1_t2":
        t1, t2 = point
        return replace(base, splice=replace(base.splice, l1_l1p=t1, l2_l2p=t2))
    if axis == "pump":
        return replace(base, pump_split=point[0])
    if axis == "bandwidth":
        return base
    raise ValueError(f"unknown sweep axis {axis!r}; choose from {SWEEP_AXES}")


def _cell_filter(filt: FilterSpec, axis: str, point: tuple[float, ...]) -> FilterSpec:
    if axis == "bandwidth":
        if not point[0] > 0:
            raise ValueError("filter bandwidth must be positive")
        return contiguous_band(point[0], filt.phi_freq)
    return filt


def sweep_cell(base: SourceConfig, filt: FilterSpec, axis: str,
               point: tuple[float, ...], n_points: int = 2048) -> float:
    cfg = _cell_config(base, axis, point)
    f = _cell_filter(filt, axis, point)
    return qmath.concurrence(output_polarization_rho(cfg, f, make_grid(f, n_points)))


def _cell_job(args):
    base, filt, axis, index, point, n_points = args
    try:
        return sweep_cell(base, filt, axis, point, n_points)
    except Exception as exc:  # re-raised with the cell index
        raise SweepCellError(index, exc) from exc


def sweep_points(axis: str, values: Sequence) -> list[tuple[tuple[int, ...], tuple[float, ...]]]:
    """Cells in canonical (row-major) order for a 1-D or 2-D axis."""
    if axis in ("alpha1_alpha2", "t1_t2"):
        xs, ys = values
        return [((i, j), (float(x), float(y))) for i, x in enumerate(xs) for j, y in enumerate(ys)]
    if axis in ("pump", "bandwidth"):
        return [((i,), (float(x),)) for i, x in enumerate(values)]
    raise ValueError(f"unknown sweep axis {axis!r}; choose from {SWEEP_AXES}")


def sweep_concurrence(base: SourceConfig, axis: str, values: Sequence,
                      filt: FilterSpec | None = None, n_points: int = 2048,
                      executor: Executor | None = None) -> list[dict]:
    """Polarization concurrence on every cell of a parameter sweep.

    Returns one row per cell, ordered by cell index, with the cell's
    parameters and ``C``.  Cells are independent and may run on ``executor``.
    """
    filt = sweep_filter() if filt is None else filt
    cells = sweep_points(axis, values)
    jobs = [(base, filt, axis, idx, pt, n_points) for idx, pt in cells]
    mapper: Callable[..., Iterable] = executor.map if executor is not None else map
    results = list(mapper(_cell_job, jobs))
    names = {"alpha1_alpha2": ("alpha1", "alpha2"), "t1_t2": ("t1", "t2"),
             "pump": ("pump_split",), "bandwidth": ("bandwidth",)}[axis]
    rows = []
    for (idx, pt), c in zip(cells, results):
        row = {"index": idx}
        row.update(dict(zip(names, pt)))
        row["C"] = c
        rows.append(row)
    return rows


def degradation(base: SourceConfig, filt: FilterSpec, **changes) -> float:
    """1 - C for ``base`` with ``changes`` applied (relative to an ideal C of 1)."""
    cfg = replace(base, **changes)
    return 1.0 - qmath.concurrence(output_polarization_rho(cfg, filt))


def calibrate_birefringence(points: Sequence[tuple[float, float]] = ((2e-3, 0.02), (5e-3, 0.10)),
                            filt: FilterSpec | None = None, length: float = 1.0) -> float:
    """Least-squares fit of Delta n to (total length mismatch, degradation) pairs."""
    from scipy.optimize import minimize_scalar

    filt = sweep_filter() if filt is None else filt

    def loss(log_dn: float) -> float:
        dn = math.exp(log_dn)
        total = 0.0
        for alpha, target in points:
            cfg = SourceConfig.from_mismatch(length, alpha1=alpha, birefringence=dn)
            total += (1.0 - qmath.concurrence(output_polarization_rho(cfg, filt)) - target) ** 2
        return total

    res = minimize_scalar(loss, bounds=(math.log(1e-4), math.log(5e-3)), method="bounded",
                          options={"xatol": 1e-8})
    return float(math.exp(res.x))
