"""H-matrix reparametrization and assembly of the PEP matrix.

Matrices are numpy arrays: float64 in float mode, ``dtype=object`` holding
Fractions or mpf values otherwise, so the same code stays exact in rational
mode.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._num import DomainError, identity, zeros
from .certificate import CertificateBundle


@dataclass(frozen=True)
class PepMatrixSet:
    htilde: np.ndarray
    htilde_inv: np.ndarray
    A: np.ndarray
    B: np.ndarray
    h0: np.ndarray
    hN: np.ndarray
    S: np.ndarray
    S_sym: np.ndarray


def gd_schedule(N, gamma_L):
    """H for constant-stepsize GD: (gamma*L) times the N x N identity."""
    H = zeros(N, N, gamma_L)
    for k in range(N):
        H[k, k] = gamma_L
    return H


def build_htilde(H):
    """Unit lower-triangular H-tilde and its inverse (forward substitution).

    Row k >= 1 of H-tilde is (H[k-1, 0], ..., H[k-1, k-2], H[k-1, k-1] - 1, 1, 0, ...).
    """
    H = np.asarray(H)
    N = H.shape[0]
    if H.shape != (N, N):
        raise ValueError(f"H must be square, got shape {H.shape}")
    for i in range(N):
        for j in range(i + 1, N):
            if H[i, j] != 0:
                raise ValueError("H must be lower triangular")
    like = H[0, 0] if N else 0.0
    ht = identity(N + 1, like)
    for k in range(1, N + 1):
        for j in range(k):
            ht[k, j] = H[k - 1, j]
        ht[k, k - 1] = H[k - 1, k - 1] - 1

    inv = identity(N + 1, like)
    # column by column: ht @ inv[:, c] = e_c, unit diagonal
    for c in range(N + 1):
        for i in range(c + 1, N + 1):
            acc = like * 0
            for j in range(c, i):
                acc = acc + ht[i, j] * inv[j, c]
            inv[i, c] = -acc
    return ht, inv


def build_ab(cert: CertificateBundle, N=None):
    """A (gradient/iterate cross terms) and B (squared-distance terms) from the multipliers."""
    N = cert.N if N is None else N
    lam = cert.get
    like = cert.tau
    A = zeros(N + 1, N + 1, like)
    B = zeros(N + 1, N + 1, like)
    for k in range(1, N + 1):
        A[k, k] = lam(k - 1, k)
    for k in range(N):
        A[k, k + 1] = -lam(k + 1, k) - lam(N, k) if k <= N - 2 else -lam(N, N - 1)
        for j in range(k + 2, N + 1):
            A[k, j] = -lam(N, k)

    # e_k = sum_{j<k} lambda_{N,j}
    e = [like * 0]
    for k in range(1, N + 1):
        e.append(e[-1] + lam(N, k - 1))
    for i in range(1, N + 1):
        for j in range(1, N + 1):
            if i != j:
                B[i, j] = e[min(i, j)]
        if i <= N - 1:
            B[i, i] = lam(i - 1, i) + lam(i, i - 1) + e[i]
        else:
            B[i, i] = lam(N - 1, N) + e[N]
    return A, B


def assemble_pep_matrix(A, B, htilde_inv, kappa, tau, L):
    """S and its symmetric part.

    h0 and hN are the first and last rows of H-tilde inverse: with
    g = -L * Htilde^{-1} x those rows give g_0 and g_N in the x basis.
    """
    if kappa == 1:
        raise DomainError("kappa = 1 makes the distance coefficient singular")
    if not tau > 0:
        raise DomainError(f"tau must be positive, got {tau}")
    h0 = htilde_inv[0, :]
    hN = htilde_inv[-1, :]
    S = (
        A.T @ htilde_inv
        + B * (kappa / (2 * (1 - kappa)))
        + np.outer(h0, h0) / 2
        - np.outer(hN, hN) * (L / (2 * tau))
    )
    return S, (S + S.T) / 2, h0, hN


def build_pep_matrices(cert: CertificateBundle, kappa, H=None) -> PepMatrixSet:
    """Full matrix set for a GD certificate (or a custom H schedule)."""
    if H is None:
        H = gd_schedule(cert.N, 1 - cert.rho)
    ht, inv = build_htilde(H)
    A, B = build_ab(cert)
    S, S_sym, h0, hN = assemble_pep_matrix(A, B, inv, kappa, cert.tau, cert.L)
    return PepMatrixSet(ht, inv, A, B, h0, hN, S, S_sym)
