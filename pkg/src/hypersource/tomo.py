"""Polarization tomography, the frequency-bin estimator and the global fidelity bound."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from . import qmath, rng, sdp
from .qmath import DensityMatrix, waveplate

BASIS_LABELS = ("H", "V", "D", "A", "R", "L")

#: (hwp_angle, qwp_angle) in radians for each analyzer label.
ANALYZER_ANGLES = {
    "H": (0.0, 0.0),
    "V": (math.pi / 4, 0.0),
    "D": (math.pi / 8, 0.0),
    "A": (-math.pi / 8, 0.0),
    "R": (0.0, math.pi / 4),
    "L": (0.0, -math.pi / 4),
}

# Pauli basis each label measures and its eigenvalue sign
_PAULI_OF = {"H": (3, 1), "V": (3, -1), "D": (1, 1), "A": (1, -1), "R": (2, 1), "L": (2, -1)}


@dataclass(frozen=True)
class AnalyzerSetting:
    hwp_angle: float
    qwp_angle: float
    label: str = ""

    @classmethod
    def canonical(cls, label: str) -> "AnalyzerSetting":
        try:
            h, q = ANALYZER_ANGLES[label]
        except KeyError:
            raise ValueError(f"unknown analyzer label {label!r}") from None
        return cls(h, q, label)


def analyzer_projector(setting: AnalyzerSetting) -> np.ndarray:
    """Projector passed by HWP -> QWP -> H polarizer: ``|psi> = HWP^dag QWP^dag |H>``."""
    psi = waveplate("half", setting.hwp_angle).conj().T @ waveplate("quarter", setting.qwp_angle).conj().T
    psi = psi @ np.array([1.0, 0.0], dtype=complex)
    return np.outer(psi, psi.conj())


def pair_settings() -> list[tuple[str, str]]:
    """The 36 (mode 3, mode 4) analyzer label pairs in canonical order."""
    return list(itertools.product(BASIS_LABELS, BASIS_LABELS))


def pair_projector(a: str, b: str) -> np.ndarray:
    return np.kron(analyzer_projector(AnalyzerSetting.canonical(a)),
                   analyzer_projector(AnalyzerSetting.canonical(b)))


@dataclass(frozen=True)
class QstDataset:
    settings: tuple[tuple[str, str], ...]
    counts: np.ndarray
    pairs_per_setting: float
    seed: int | None = None

    def __post_init__(self) -> None:
        settings = tuple((str(a), str(b)) for a, b in self.settings)
        counts = np.asarray(self.counts)
        if len(settings) != 36 or counts.shape != (36,):
            raise ValueError("a QST dataset needs exactly 36 settings and 36 counts")
        if set(settings) != set(pair_settings()):
            raise ValueError("settings must cover every pair of H, V, D, A, R, L")
        if np.any(counts < 0):
            raise ValueError("counts must be non-negative")
        object.__setattr__(self, "settings", settings)
        object.__setattr__(self, "counts", counts)

    def count(self, a: str, b: str) -> float:
        return float(self.counts[self.settings.index((a, b))])


def expected_counts(rho, n: float) -> np.ndarray:
    arr = rho.data if isinstance(rho, DensityMatrix) else np.asarray(rho)
    probs = np.array([np.real(np.trace(arr @ pair_projector(a, b))) for a, b in pair_settings()])
    return n * np.clip(probs, 0.0, None)


def simulate_qst_counts(rho, pairs_per_setting: float, seed: int, noiseless: bool = False,
                        path: str = "qst") -> QstDataset:
    """Counts for all 36 settings, Poisson with mean ``N tr(rho P_a (x) P_b)``."""
    mean = expected_counts(rho, pairs_per_setting)
    counts = mean if noiseless else rng.poisson_counts(mean, seed, path)
    return QstDataset(tuple(pair_settings()), counts, pairs_per_setting, seed)


def _correlators(ds: QstDataset) -> np.ndarray:
    """Two-qubit Stokes parameters T[i, j] = <sigma_i (x) sigma_j> from basis-pair frequencies."""
    T = np.zeros((4, 4))
    T[0, 0] = 1.0
    single_a = np.zeros((4, 3))
    single_b = np.zeros((4, 3))
    groups: dict[tuple[int, int], list[tuple[int, int, float]]] = {}
    for (a, b), n in zip(ds.settings, ds.counts):
        (i, sa), (j, sb) = _PAULI_OF[a], _PAULI_OF[b]
        groups.setdefault((i, j), []).append((sa, sb, float(n)))
    for (i, j), rows in groups.items():
        total = sum(n for _, _, n in rows)
        if total <= 0:
            raise ValueError(f"no counts in the basis pair ({i}, {j})")
        T[i, j] = sum(sa * sb * n for sa, sb, n in rows) / total
        single_a[i, j - 1] = sum(sa * n for sa, _, n in rows) / total
        single_b[j, i - 1] = sum(sb * n for _, sb, n in rows) / total
    for k in (1, 2, 3):
        T[k, 0] = single_a[k].mean()
        T[0, k] = single_b[k].mean()
    return T


def linear_inversion(ds: QstDataset) -> np.ndarray:
    """Unconstrained Hermitian estimate (may have negative eigenvalues)."""
    T = _correlators(ds)
    rho = sum(T[i, j] * np.kron(qmath.PAULI[i], qmath.PAULI[j]) for i in range(4) for j in range(4))
    return rho / 4.0


def log_likelihood(rho: np.ndarray, ds: QstDataset) -> float:
    counts = np.asarray(ds.counts, dtype=float)
    probs = np.array([np.real(np.trace(rho @ pair_projector(a, b))) for a, b in ds.settings])
    mask = counts > 0
    if np.any(probs[mask] <= 0):
        return -math.inf
    return float(np.sum(counts[mask] * np.log(probs[mask])))


def mle_refine(rho0: np.ndarray, ds: QstDataset, max_iter: int = 500, tol: float = 1e-10) -> np.ndarray:
    """Diluted R rho R iterations with step halving; the likelihood never decreases."""
    projectors = np.array([pair_projector(a, b) for a, b in ds.settings])
    counts = np.asarray(ds.counts, dtype=float)
    total = counts.sum()
    rho = 0.999 * rho0 + 0.001 * np.eye(4) / 4
    ll = log_likelihood(rho, ds)
    eye = np.eye(4)
    for _ in range(max_iter):
        probs = np.real(np.einsum("kij,ji->k", projectors, rho))
        R = np.einsum("k,kij->ij", counts / np.maximum(probs, 1e-300), projectors) / total
        eps = 1.0
        improved = False
        while eps > 1e-8:
            G = eye + eps * R
            cand = G @ rho @ G.conj().T
            cand = 0.5 * (cand + cand.conj().T) / np.trace(cand).real
            ll_new = log_likelihood(cand, ds)
            if ll_new > ll:
                improved = True
                break
            eps *= 0.5
        if not improved:
            break
        gain = ll_new - ll
        rho, ll = cand, ll_new
        if gain < tol * max(1.0, abs(ll)):
            break
    return rho


def reconstruct(ds: QstDataset, mle: bool = False) -> DensityMatrix:
    """Linear inversion over the Pauli basis, projected to a physical state.

    With ``mle=True`` the projected estimate seeds a maximum-likelihood
    refinement.
    """
    if not np.any(np.asarray(ds.counts) > 0):
        raise ValueError("dataset has no counts")
    rho = qmath.project_to_physical(linear_inversion(ds)).data
    if mle:
        rho = mle_refine(np.array(rho), ds)
    return DensityMatrix.from_array(rho, qmath.POL_LABELS)


# ------------------------------------------------------- frequency estimator


@dataclass(frozen=True)
class FreqEstimate:
    V: float
    phi_freq: float
    p_omega: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.p_omega <= 1.0:
            raise ValueError(f"p_omega must lie in [0, 1], got {self.p_omega}")
        if self.V < 0:
            raise ValueError("visibility must be non-negative")


def freq_rho_from_homi(est: FreqEstimate) -> DensityMatrix:
    """Frequency-bin density matrix in the (ss, si, is, ii) basis.

    Populations p_omega and 1 - p_omega on si and is, coherence
    ``(V/2) exp(i phi_freq)``; projected to a physical state when V exceeds
    ``2 sqrt(p (1 - p))``.
    """
    p = est.p_omega
    m = np.zeros((4, 4), dtype=complex)
    m[1, 1] = p
    m[2, 2] = 1.0 - p
    m[1, 2] = 0.5 * est.V * np.exp(1j * est.phi_freq)
    m[2, 1] = np.conj(m[1, 2])
    if est.V > 2.0 * math.sqrt(p * (1.0 - p)):
        out = qmath.project_to_physical(m)
        return DensityMatrix(out.data, qmath.FREQ_LABELS)
    return DensityMatrix.from_array(m, qmath.FREQ_LABELS)


def freq_bin_fraction(counts_si: float, counts_is: float) -> float:
    """p_omega from bin-resolved coincidence counts."""
    total = counts_si + counts_is
    if total <= 0:
        raise ValueError("no bin-resolved coincidences")
    return counts_si / total


# -------------------------------------------------------------- SDP bound

PHI_P_PLUS = qmath.bell_state("phi+")
PSI_W_MINUS = np.array([0, 1, -1, 0], dtype=complex) / math.sqrt(2)


@dataclass(frozen=True)
class FidelityBound:
    value: float
    dual: float
    converged: bool
    iterations: int
    rho: np.ndarray


def fidelity_bound_problem(F_p: float, F_omega: float):
    """(C, A, b, slack) for the global-fidelity SDP in pol (x) freq ordering."""
    I4 = np.eye(4, dtype=complex)
    target = np.kron(PHI_P_PLUS, PSI_W_MINUS)
    C = np.outer(target, target.conj())
    ss = np.zeros(4, dtype=complex)
    ss[0] = 1
    ii = np.zeros(4, dtype=complex)
    ii[3] = 1
    A = [
        np.eye(16, dtype=complex),
        np.kron(np.outer(PHI_P_PLUS, PHI_P_PLUS.conj()), I4),
        np.kron(I4, np.outer(ss, ss)),
        np.kron(I4, np.outer(ii, ii)),
        np.kron(I4, np.outer(PSI_W_MINUS, PSI_W_MINUS.conj())),
    ]
    b = np.array([1.0, F_p, 0.0, 0.0, F_omega])
    slack = np.array([[0.0], [0.0], [0.0], [0.0], [-1.0]])
    return C, A, b, slack


def global_fidelity_lower_bound(F_p: float, F_omega: float, tol: float = 1e-9,
                                max_iter: int = 50_000) -> FidelityBound:
    """Smallest fidelity to Phi+ (x) Psi_w- consistent with the subsystem data.

    Constraints: polarization fidelity to Phi+ equals ``F_p``, frequency
    fidelity to Psi- at least ``F_omega``, no population in ss or ii.
    """
    for name, val in (("F_p", F_p), ("F_omega", F_omega)):
        if not 0.0 <= val <= 1.0:
            raise ValueError(f"infeasible constraints: {name}={val} is outside [0, 1]")
    C, A, b, slack = fidelity_bound_problem(F_p, F_omega)
    res = sdp.solve(C, A, b, slack, tol=tol, max_iter=max_iter)
    value = min(1.0, max(0.0, res.primal))
    return FidelityBound(value, res.dual, res.converged, res.iterations, res.X)
