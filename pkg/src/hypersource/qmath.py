"""Two-qubit linear algebra and entanglement metrics.

All matrices are plain complex ``numpy`` arrays wrapped in small immutable
containers.  The global basis ordering is polarization before frequency and,
inside each degree of freedom, spatial mode 3 before mode 4::

    polarization pair : HH, HV, VH, VV          (mode 3 letter first)
    frequency pair    : ss, si, is, ii          (s = upper bin, i = lower bin)
    global (16-dim)   : index = 4 * pol_index + freq_index
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

HERMITIAN_TOL = 1e-12
TRACE_TOL = 1e-12
PSD_TOL = 1e-10

POL_LABELS = ("HH", "HV", "VH", "VV")
FREQ_LABELS = ("ss", "si", "is", "ii")
GLOBAL_LABELS = tuple(f"{p}|{f}" for p in POL_LABELS for f in FREQ_LABELS)

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
PAULI = (np.eye(2, dtype=complex), SIGMA_X, SIGMA_Y, SIGMA_Z)

_SPIN_FLIP = np.kron(SIGMA_Y, SIGMA_Y)


class NonPhysicalStateError(ValueError):
    """Raised when a matrix violates the density-matrix invariants."""


@dataclass(frozen=True)
class DensityMatrix:
    """Hermitian, positive semidefinite, unit-trace matrix of dimension 4 or 16.

    The array is copied and marked read-only on construction.
    """

    data: np.ndarray
    basis_labels: tuple[str, ...] = field(default=())

    def __post_init__(self) -> None:
        arr = np.array(self.data, dtype=complex, copy=True)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1] or arr.shape[0] not in (4, 16):
            raise NonPhysicalStateError(f"density matrix must be 4x4 or 16x16, got {arr.shape}")
        herm_err = np.max(np.abs(arr - arr.conj().T))
        if herm_err > HERMITIAN_TOL:
            raise NonPhysicalStateError(f"matrix is not Hermitian (max deviation {herm_err:.3e})")
        tr = np.trace(arr).real
        if abs(tr - 1.0) > TRACE_TOL:
            raise NonPhysicalStateError(f"trace is {tr!r}, expected 1")
        lam_min = np.linalg.eigvalsh(arr).min()
        if lam_min < -PSD_TOL:
            raise NonPhysicalStateError(f"negative eigenvalue {lam_min:.3e}")
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)
        labels = tuple(self.basis_labels)
        if not labels:
            labels = POL_LABELS if arr.shape[0] == 4 else GLOBAL_LABELS
        if len(labels) != arr.shape[0]:
            raise ValueError("basis_labels length does not match dimension")
        object.__setattr__(self, "basis_labels", labels)

    @property
    def dim(self) -> int:
        return self.data.shape[0]

    @classmethod
    def from_array(cls, arr: np.ndarray, basis_labels: Sequence[str] = ()) -> "DensityMatrix":
        """Build from a numerically noisy array: symmetrize and renormalize first.

        Roundoff-level asymmetry and trace drift are removed; genuine
        violations (negative eigenvalues) are still rejected.
        """
        arr = np.asarray(arr, dtype=complex)
        arr = 0.5 * (arr + arr.conj().T)
        tr = np.trace(arr).real
        if tr <= 0:
            raise NonPhysicalStateError(f"non-positive trace {tr!r}")
        return cls(arr / tr, tuple(basis_labels))

    @classmethod
    def pure(cls, psi: np.ndarray, basis_labels: Sequence[str] = ()) -> "DensityMatrix":
        psi = np.asarray(psi, dtype=complex)
        psi = psi / np.linalg.norm(psi)
        return cls.from_array(np.outer(psi, psi.conj()), basis_labels)


def _as_array(rho) -> np.ndarray:
    return rho.data if isinstance(rho, DensityMatrix) else np.asarray(rho, dtype=complex)


def ket_to_dm(psi: np.ndarray) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex)
    return np.outer(psi, psi.conj())


def normalized(psi: Sequence[complex]) -> np.ndarray:
    """Return ``psi`` as a unit-norm complex vector (the PureState2Q container)."""
    psi = np.asarray(psi, dtype=complex)
    nrm = np.linalg.norm(psi)
    if nrm == 0:
        raise ValueError("zero state vector")
    return psi / nrm


def bell_state(name: str) -> np.ndarray:
    """Bell vectors in the HH, HV, VH, VV ordering ("phi+", "phi-", "psi+", "psi-")."""
    r = 1 / np.sqrt(2)
    table = {
        "phi+": [r, 0, 0, r],
        "phi-": [r, 0, 0, -r],
        "psi+": [0, r, r, 0],
        "psi-": [0, r, -r, 0],
    }
    try:
        return np.array(table[name], dtype=complex)
    except KeyError:
        raise ValueError(f"unknown Bell state {name!r}") from None


def _psd_sqrt(a: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(0.5 * (a + a.conj().T))
    # roundoff-level eigenvalues would otherwise leak sqrt(1e-16) ~ 1e-8 into the result
    w = np.where(w > 1e-13 * max(w.max(), 1.0), w, 0.0)
    return (v * np.sqrt(w)) @ v.conj().T


def concurrence(rho) -> float:
    """Wootters concurrence of a two-qubit density matrix.

    Uses the singular values of ``sqrt(rho) @ sqrt(rho_tilde)``, which are the
    square roots of the eigenvalues of ``rho @ rho_tilde`` but do not suffer
    from square-root amplification of roundoff.
    """
    arr = _as_array(rho)
    if arr.shape != (4, 4):
        raise ValueError(f"concurrence needs a 4x4 matrix, got {arr.shape}")
    lam_min = np.linalg.eigvalsh(0.5 * (arr + arr.conj().T)).min()
    if lam_min < -PSD_TOL:
        raise NonPhysicalStateError(f"concurrence of non-physical matrix (eigenvalue {lam_min:.3e})")
    sq = _psd_sqrt(arr)
    sq_tilde = _SPIN_FLIP @ sq.conj() @ _SPIN_FLIP
    lam = np.linalg.svd(sq @ sq_tilde, compute_uv=False)
    lam = np.sort(lam)[::-1]
    return float(min(1.0, max(0.0, lam[0] - lam[1] - lam[2] - lam[3])))


def fidelity_to_pure(rho, target: np.ndarray) -> float:
    """Overlap <psi|rho|psi> with a pure target (normalized internally)."""
    arr = _as_array(rho)
    psi = normalized(target)
    if psi.shape[0] != arr.shape[0]:
        raise ValueError(f"dimension mismatch: rho is {arr.shape[0]}, target is {psi.shape[0]}")
    val = psi.conj() @ arr @ psi
    if abs(val.imag) > 1e-10:
        raise NonPhysicalStateError(f"fidelity has imaginary part {val.imag:.3e}")
    return float(min(1.0, max(0.0, val.real)))


def partial_trace(rho, keep: str) -> DensityMatrix:
    """Reduce a 16-dim pol (x) freq state to one degree of freedom.

    ``keep`` is ``"polarization"`` or ``"frequency"``.
    """
    arr = _as_array(rho)
    if arr.shape != (16, 16):
        raise ValueError(f"partial_trace needs a 16x16 matrix, got {arr.shape}")
    t = arr.reshape(4, 4, 4, 4)
    if keep in ("polarization", "pol"):
        return DensityMatrix.from_array(np.einsum("ajbj->ab", t), POL_LABELS)
    if keep in ("frequency", "freq"):
        return DensityMatrix.from_array(np.einsum("jajb->ab", t), FREQ_LABELS)
    raise ValueError(f"unknown subsystem {keep!r}; use 'polarization' or 'frequency'")


def rotation(theta: float) -> np.ndarray:
    """Active rotation of a Jones vector by ``theta`` (H -> cos H + sin V)."""
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s], [s, c]], dtype=complex)


def waveplate(kind: str, theta: float) -> np.ndarray:
    """Jones matrix of a wave plate with its fast axis at ``theta`` from H.

    Conventions: ``HWP(theta) = R(theta) diag(1, -1) R(-theta)`` (determinant -1)
    and ``QWP(theta) = R(theta) diag(1, -i) R(-theta)``, so that ``QWP(pi/4)``
    turns H into (H + iV)/sqrt(2).
    """
    if kind in ("half", "hwp"):
        core = np.diag([1.0, -1.0]).astype(complex)
    elif kind in ("quarter", "qwp"):
        core = np.diag([1.0, -1j])
    else:
        raise ValueError(f"unknown wave plate {kind!r}")
    r = rotation(theta)
    return r @ core @ r.conj().T


def project_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection of a real vector onto the probability simplex."""
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    idx = np.arange(1, len(u) + 1)
    cond = u - css / idx > 0
    k = idx[cond][-1]
    theta = css[k - 1] / k
    return np.maximum(v - theta, 0.0)


def project_to_physical(h: np.ndarray) -> DensityMatrix:
    """Nearest unit-trace PSD matrix in Frobenius norm.

    Eigenvalues are projected onto the simplex (clip negatives and
    water-fill the removed weight), eigenvectors are kept.
    """
    arr = np.asarray(h.data if isinstance(h, DensityMatrix) else h, dtype=complex)
    if not np.any(arr):
        raise ValueError("cannot project the zero matrix to a density matrix")
    if np.max(np.abs(arr - arr.conj().T)) > 1e-8 * max(1.0, np.max(np.abs(arr))):
        raise ValueError("project_to_physical expects a Hermitian matrix")
    arr = 0.5 * (arr + arr.conj().T)
    w, v = np.linalg.eigh(arr)
    w = project_simplex(w)
    out = (v * w) @ v.conj().T
    labels = h.basis_labels if isinstance(h, DensityMatrix) else ()
    return DensityMatrix.from_array(out, labels)


def random_density_matrix(rng: np.random.Generator, dim: int = 4, rank: int | None = None) -> np.ndarray:
    """Random density matrix from the Ginibre ensemble (test helper)."""
    rank = dim if rank is None else rank
    g = rng.normal(size=(dim, rank)) + 1j * rng.normal(size=(dim, rank))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def random_unitary(rng: np.random.Generator, dim: int = 2) -> np.ndarray:
    z = (rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diagonal(r)
    return q * (d / np.abs(d))
