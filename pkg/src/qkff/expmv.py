"""Restarted Krylov evaluation of matrix exponentials acting on a vector.

Computes e^{scale*A} v for a linear operator A available only through a
matvec callable.  A Hermitian flag switches the small-problem exponential
to an eigendecomposition; the outer restart logic is shared.  Never builds
A itself, so the cost per segment is m matvecs plus O(m^2) orthogonalization.
"""
from __future__ import annotations

from typing import Callable

import numpy as np
import scipy.linalg

DEFAULT_KRYLOV_DIM = 30

Matvec = Callable[[np.ndarray], np.ndarray]


def _arnoldi(apply_op: Matvec, q0: np.ndarray, m: int):
    """Arnoldi factorization with one reorthogonalization pass.

    Returns (k, V, H, h_next) where V is dim x k orthonormal, H is the k x k
    projected operator, and h_next is the next off-diagonal element (0.0 on
    invariant-subspace breakdown, in which case the factorization is exact).
    """
    dim = q0.shape[0]
    k_max = min(m, dim)
    V = np.empty((dim, k_max), dtype=np.complex128)
    H = np.zeros((k_max + 1, k_max), dtype=np.complex128)
    V[:, 0] = q0
    scale_ref = 0.0
    for j in range(k_max):
        u = apply_op(V[:, j])
        for _ in range(2):  # modified Gram-Schmidt, then one refinement sweep
            for i in range(j + 1):
                c = np.vdot(V[:, i], u)
                u = u - c * V[:, i]
                H[i, j] += c
        hn = float(np.linalg.norm(u))
        H[j + 1, j] = hn
        scale_ref = max(scale_ref, float(np.max(np.abs(H[: j + 2, j]))))
        if hn <= 1e-12 * max(1.0, scale_ref):
            k = j + 1
            return k, V[:, :k], H[:k, :k], 0.0
        if j + 1 < k_max:
            V[:, j + 1] = u / hn
    return k_max, V, H[:k_max, :k_max], float(H[k_max, k_max - 1].real)


def _first_column_expm(Hk: np.ndarray, hermitian: bool):
    """Closure z -> first column of expm(z * Hk)."""
    if hermitian:
        w, U = scipy.linalg.eigh(0.5 * (Hk + Hk.conj().T))
        u0 = U[0, :].conj()

        def col(z: complex) -> np.ndarray:
            return U @ (np.exp(z * w) * u0)

    else:

        def col(z: complex) -> np.ndarray:
            return scipy.linalg.expm(z * Hk)[:, 0]

    return col


def krylov_expmv(
    apply_op: Matvec,
    v: np.ndarray,
    scale: complex,
    tol: float = 1e-10,
    m: int = DEFAULT_KRYLOV_DIM,
    hermitian: bool = False,
    max_segments: int = 4096,
) -> np.ndarray:
    """Evaluate e^{scale*A} v to roughly ``tol`` in the 2-norm.

    The interval is traversed in adaptively sized segments; each segment
    rebuilds a fresh Krylov basis of dimension at most ``m`` from the
    current vector (restarting).  Raises RuntimeError if the segment count
    cap is exhausted before reaching the end of the interval.
    """
    v = np.asarray(v, dtype=np.complex128)
    if tol <= 0:
        raise ValueError("tol must be positive")
    if scale == 0:
        return v.copy()
    w = v.copy()
    done = 0.0
    segments = 0
    eps_floor = 32.0 * np.finfo(np.float64).eps
    while done < 1.0:
        segments += 1
        if segments > max_segments:
            raise RuntimeError(
                f"matrix exponential did not converge within {max_segments} restarts"
            )
        beta = float(np.linalg.norm(w))
        if beta == 0.0:
            return w
        k, V, Hk, h_next = _arnoldi(apply_op, w / beta, m)
        col_full = _first_column_expm(Hk, hermitian)
        if h_next == 0.0:
            # invariant subspace: the projected exponential is exact for any
            # step, so finish the whole remaining interval at once
            w = V @ (beta * col_full(scale * (1.0 - done)))
            return w
        col_red = _first_column_expm(Hk[: k - 2, : k - 2], hermitian) if k > 2 else None
        # keep |scale|*ds*rho comfortably inside the Krylov approximation range
        rho = max(float(np.max(np.abs(Hk))), 1e-30)
        ds = min(1.0 - done, max(k / (4.0 * abs(scale) * rho), 1e-12))
        while True:
            z = scale * ds
            f_full = col_full(z)
            f_norm = float(np.linalg.norm(f_full))
            if col_red is None:
                est = 0.0
            else:
                pad = np.zeros(k, dtype=np.complex128)
                pad[: k - 2] = col_red(z)
                est = float(np.linalg.norm(f_full - pad))
            # tolerance is relative to the segment output (growing solutions
            # need relative control) and floored at roundoff, where further
            # step halving cannot improve the estimate
            allow = max(
                tol * max(ds, 1e-16) * max(1.0, f_norm), eps_floor * max(1.0, f_norm)
            )
            if est <= allow or ds <= 1e-12:
                break
            ds *= 0.5
        w = V @ (beta * f_full)
        done += ds
    return w
