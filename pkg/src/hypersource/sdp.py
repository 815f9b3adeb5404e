"""Small dense SDP solver: ADMM on the dual (alternating projections with multiplier corrections).

Solves::

    minimize   <C, X>
    subject to <A_k, X> + c_k s = b_k     k = 1..m
               X Hermitian PSD,  s >= 0 (elementwise slack vector)

with ``<A, B> = Re tr(A^H B)``.  Adequate for 16 x 16 problems with a handful
of constraints; no sparse support.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class SdpResult:
    X: np.ndarray
    s: np.ndarray
    y: np.ndarray
    primal: float
    dual: float
    iterations: int
    converged: bool
    residual: float


def _inner(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.real(np.vdot(a, b)))


def _psd_part(v: np.ndarray) -> np.ndarray:
    w, u = np.linalg.eigh(0.5 * (v + v.conj().T))
    return (u * np.maximum(w, 0.0)) @ u.conj().T


def solve(C: np.ndarray, A: list[np.ndarray], b: np.ndarray, slack: np.ndarray | None = None,
          tol: float = 1e-9, max_iter: int = 50_000, mu: float = 1.0) -> SdpResult:
    """ADMM for the standard-form SDP above.

    ``slack`` is an ``(m, n_s)`` matrix of slack coefficients (``None`` for
    pure equality constraints).  Stops when the relative primal residual, dual
    residual and duality gap are all below ``tol``.
    """
    m = len(A)
    n = C.shape[0]
    b = np.asarray(b, dtype=float)
    Cs = np.zeros(0) if slack is None else np.zeros(slack.shape[1])
    Ks = np.zeros((m, 0)) if slack is None else np.asarray(slack, dtype=float)
    Astack = np.array(A, dtype=complex)

    def op(X, s):
        return np.real(np.einsum("kij,ij->k", Astack.conj(), X)) + Ks @ s

    def adj(y):
        return np.einsum("k,kij->ij", y, Astack), Ks.T @ y

    gram = np.real(np.einsum("kij,lij->kl", Astack.conj(), Astack)) + Ks @ Ks.T
    gram_inv = np.linalg.pinv(gram)

    X = np.eye(n, dtype=complex) / n
    s = np.zeros(Cs.shape)
    S = np.zeros_like(C, dtype=complex)
    Ss = np.zeros(Cs.shape)
    y = np.zeros(m)
    norm_b = 1.0 + np.linalg.norm(b)
    norm_c = 1.0 + np.linalg.norm(C)
    res = np.inf
    it = 0
    for it in range(1, max_iter + 1):
        y = gram_inv @ (mu * (b - op(X, s)) - op(S - C, Ss - Cs))
        ay, ays = adj(y)
        V = C - ay - mu * X
        Vs = Cs - ays - mu * s
        S = _psd_part(V)
        Ss = np.maximum(Vs, 0.0)
        X = (S - V) / mu
        s = (Ss - Vs) / mu

        if it % 10 == 0:
            pinf = np.linalg.norm(op(X, s) - b) / norm_b
            dinf = np.sqrt(np.linalg.norm(ay + S - C) ** 2 + np.linalg.norm(ays + Ss - Cs) ** 2) / norm_c
            pobj = _inner(C, X)
            dobj = float(b @ y)
            gap = abs(pobj - dobj) / (1.0 + abs(pobj) + abs(dobj))
            res = max(pinf, dinf, gap)
            if res < tol:
                break
            # 1/mu weights dual infeasibility; rebalance toward the larger residual
            if pinf > 10 * dinf:
                mu = min(mu * 2.0, 1e6)
            elif dinf > 10 * pinf:
                mu = max(mu / 2.0, 1e-6)
    X = 0.5 * (X + X.conj().T)
    return SdpResult(X, s, y, _inner(C, X), float(b @ y), it, res < tol, float(res))
