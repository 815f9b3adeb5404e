import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hypersource import qmath
from hypersource.qmath import DensityMatrix, NonPhysicalStateError

finite = st.floats(-1.0, 1.0, allow_nan=False)


def wootters_by_eigenvalues(rho):
    # textbook definition, used only as an oracle
    yy = np.kron(qmath.SIGMA_Y, qmath.SIGMA_Y)
    r = rho @ yy @ rho.conj() @ yy
    lam = np.sqrt(np.clip(np.sort(np.linalg.eigvals(r).real)[::-1], 0, None))
    return max(0.0, lam[0] - lam[1] - lam[2] - lam[3])


@pytest.mark.parametrize("name", ["phi+", "phi-", "psi+", "psi-"])
def test_bell_states_are_maximally_entangled(name):
    assert qmath.concurrence(qmath.ket_to_dm(qmath.bell_state(name))) == pytest.approx(1.0, abs=1e-12)


def test_product_and_mixed_have_zero_concurrence():
    hv = np.kron([1, 0], [0, 1]).astype(complex)
    assert qmath.concurrence(qmath.ket_to_dm(hv)) == pytest.approx(0.0, abs=1e-12)
    assert qmath.concurrence(np.eye(4) / 4) == 0.0


def test_werner_state_threshold():
    phi = qmath.ket_to_dm(qmath.bell_state("phi+"))
    for p in (0.2, 1 / 3, 0.5, 0.9):
        rho = p * phi + (1 - p) * np.eye(4) / 4
        assert qmath.concurrence(rho) == pytest.approx(max(0.0, (3 * p - 1) / 2), abs=1e-12)


@given(st.lists(st.tuples(finite, finite), min_size=4, max_size=4))
def test_pure_state_concurrence_matches_determinant(coefs):
    psi = np.array([complex(a, b) for a, b in coefs])
    if np.linalg.norm(psi) < 1e-3:
        return
    psi = qmath.normalized(psi)
    expected = 2 * abs(psi[0] * psi[3] - psi[1] * psi[2])
    assert qmath.concurrence(qmath.ket_to_dm(psi)) == pytest.approx(expected, abs=1e-7)


@given(st.integers(0, 2**32 - 1), st.integers(1, 4))
def test_concurrence_matches_eigenvalue_definition(seed, rank):
    rho = qmath.random_density_matrix(np.random.default_rng(seed), 4, rank)
    assert qmath.concurrence(rho) == pytest.approx(wootters_by_eigenvalues(rho), abs=1e-6)


@given(st.integers(0, 2**32 - 1))
def test_concurrence_invariant_under_local_unitaries(seed):
    g = np.random.default_rng(seed)
    rho = qmath.random_density_matrix(g, 4, 2)
    u = np.kron(qmath.random_unitary(g), qmath.random_unitary(g))
    c0 = qmath.concurrence(rho)
    assert 0.0 <= c0 <= 1.0
    assert qmath.concurrence(u @ rho @ u.conj().T) == pytest.approx(c0, abs=1e-9)


def test_concurrence_rejects_nonphysical():
    with pytest.raises(NonPhysicalStateError):
        qmath.concurrence(np.diag([1.2, -0.2, 0, 0]))
    with pytest.raises(ValueError):
        qmath.concurrence(np.eye(2) / 2)


def test_density_matrix_validation():
    with pytest.raises(NonPhysicalStateError):
        DensityMatrix(np.diag([1.2, -0.2, 0, 0]).astype(complex))
    with pytest.raises(ValueError):
        DensityMatrix(np.eye(4) / 3)
    with pytest.raises(ValueError):
        DensityMatrix(np.array([[0.5, 0.1], [0.2, 0.5]], dtype=complex))
    rho = DensityMatrix.pure(qmath.bell_state("psi-"), qmath.POL_LABELS)
    assert rho.dim == 4
    with pytest.raises(ValueError):
        rho.data[0, 0] = 0.0


def test_fidelity_to_pure():
    phi = qmath.bell_state("phi+")
    assert qmath.fidelity_to_pure(qmath.ket_to_dm(phi), phi) == pytest.approx(1.0)
    assert qmath.fidelity_to_pure(np.eye(4) / 4, phi) == pytest.approx(0.25)
    with pytest.raises(ValueError):
        qmath.fidelity_to_pure(np.eye(4) / 4, np.ones(2))


def test_partial_trace_of_product():
    g = np.random.default_rng(3)
    a = qmath.random_density_matrix(g, 4)
    b = qmath.random_density_matrix(g, 4)
    ab = np.kron(a, b)
    assert np.allclose(qmath.partial_trace(ab, "polarization").data, a)
    assert np.allclose(qmath.partial_trace(ab, "frequency").data, b)
    assert qmath.partial_trace(ab, "frequency").basis_labels == qmath.FREQ_LABELS
    with pytest.raises(ValueError):
        qmath.partial_trace(ab, "spin")


def test_waveplate_conventions():
    h = np.array([1, 0], dtype=complex)
    v = np.array([0, 1], dtype=complex)
    assert np.allclose(qmath.waveplate("half", math.pi / 4) @ h, v)
    r = qmath.waveplate("quarter", math.pi / 4) @ h
    # equal up to a global phase
    assert abs(np.vdot((h + 1j * v) / math.sqrt(2), r)) == pytest.approx(1.0)
    for kind, th in itertools.product(("half", "quarter"), (0.0, 0.3, 1.1)):
        w = qmath.waveplate(kind, th)
        assert np.allclose(w @ w.conj().T, np.eye(2))
    # two quarter-wave plates at the same angle make a half-wave plate
    q = qmath.waveplate("quarter", 0.4)
    assert np.allclose(q @ q, qmath.waveplate("half", 0.4))


def test_projection_oracle_grid_search():
    # nearest PSD unit-trace diagonal matrix to diag(1.2, -0.2, 0, 0) by brute force
    target = np.array([1.2, -0.2, 0.0, 0.0])
    best, best_d = None, np.inf
    steps = np.linspace(0, 1, 51)
    for a in steps:
        for b in steps:
            for c in steps:
                d = 1 - a - b - c
                if d < -1e-12:
                    continue
                dist = np.sum((np.array([a, b, c, d]) - target) ** 2)
                if dist < best_d:
                    best, best_d = np.array([a, b, c, max(d, 0)]), dist
    out = qmath.project_to_physical(np.diag(target)).data
    assert np.allclose(np.diag(out).real, best, atol=1e-9)
    assert np.allclose(np.diag(out).real, [1, 0, 0, 0])


@given(st.integers(0, 2**32 - 1))
def test_projection_idempotent_and_nearest(seed):
    g = np.random.default_rng(seed)
    rho = qmath.random_density_matrix(g, 4)
    assert np.allclose(qmath.project_to_physical(rho).data, rho, atol=1e-12)
    h = g.normal(size=(4, 4)) + 1j * g.normal(size=(4, 4))
    h = 0.5 * (h + h.conj().T)
    if abs(np.trace(h)) < 1e-6 and np.allclose(h, 0):
        return
    p = qmath.project_to_physical(h).data
    w = np.linalg.eigvalsh(p)
    assert w.min() > -1e-12 and np.trace(p).real == pytest.approx(1.0)
    # no random physical state is closer
    d0 = np.linalg.norm(p - h)
    for _ in range(20):
        assert np.linalg.norm(qmath.random_density_matrix(g, 4) - h) >= d0 - 1e-9


def test_project_zero_rejected():
    with pytest.raises(ValueError):
        qmath.project_to_physical(np.zeros((4, 4)))
