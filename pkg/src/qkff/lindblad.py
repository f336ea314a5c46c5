"""Open-system dynamics through vectorization of the Lindblad equation.

Density matrices are column-stacked into 4^n vectors; the generator then
acts as -i I(x)H + i H^T(x)I + sum_k ( conj(L_k)(x)L_k - (1/2) I(x)L_k^dag L_k
- (1/2) (L_k^T conj(L_k))(x)I ), with the second tensor factor acting on the
fast (row) index.  The action is evaluated matrix-free by devectorizing and
applying the Pauli-sum factors to rows and columns, so the 4^n x 4^n matrix
is never formed outside the small dense-oracle cap.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.linalg

from . import pauli
from .expmv import krylov_expmv
from .krylov import FFSolution, _canonical_transform
from .pauli import PauliString, PauliSum
from .states import StateVector

LIOUVILLE_DENSE_CAP = 3


def _conj_sum(op: PauliSum) -> PauliSum:
    """Entrywise complex conjugate; each Y factor contributes a sign."""
    return PauliSum(
        tuple(
            PauliString(t.axes, t.coefficient.conjugate() * (-1.0) ** t.n_y)
            for t in op.terms
        ),
        op.n_qubits,
    )


def _transpose_sum(op: PauliSum) -> PauliSum:
    return PauliSum(
        tuple(
            PauliString(t.axes, t.coefficient * (-1.0) ** t.n_y) for t in op.terms
        ),
        op.n_qubits,
    )


def _adjoint_sum(op: PauliSum) -> PauliSum:
    return PauliSum(
        tuple(PauliString(t.axes, t.coefficient.conjugate()) for t in op.terms),
        op.n_qubits,
    )


def _left(op: PauliSum, r: np.ndarray) -> np.ndarray:
    """op @ r"""
    return pauli.apply(op, r)


def _right(op: PauliSum, r: np.ndarray) -> np.ndarray:
    """r @ op, via (op^T r^T)^T"""
    return pauli.apply(_transpose_sum(op), r.T).T


@dataclass(frozen=True)
class DensityVector:
    """Column-stacked density matrix: amps[j*2^n + i] = rho[i, j]."""

    amps: np.ndarray
    n: int

    def __post_init__(self) -> None:
        a = np.asarray(self.amps, dtype=np.complex128)
        if a.ndim != 1 or a.shape[0] != (1 << (2 * self.n)):
            raise ValueError(
                f"expected {1 << (2 * self.n)} amplitudes for {self.n} qubits, got shape {a.shape}"
            )
        object.__setattr__(self, "amps", a)

    @property
    def dim(self) -> int:
        return 1 << self.n

    def matrix(self) -> np.ndarray:
        return devectorize(self)

    def trace(self) -> complex:
        return complex(np.trace(self.matrix()))


@dataclass(frozen=True)
class LindbladSpec:
    """System Hamiltonian plus (operator, rate) collapse channels."""

    hamiltonian: PauliSum
    collapses: tuple[tuple[PauliSum, float], ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "collapses", tuple(self.collapses))
        pauli.require_hermitian(self.hamiltonian, "system Hamiltonian")
        for op, rate in self.collapses:
            if rate < 0:
                raise ValueError("collapse rates must be nonnegative")
            if op.n_qubits != self.hamiltonian.n_qubits:
                raise ValueError("collapse operator register size mismatch")

    @property
    def n_qubits(self) -> int:
        return self.hamiltonian.n_qubits


def vectorize(rho: np.ndarray) -> DensityVector:
    """Column-stack a 2^n x 2^n matrix into a DensityVector."""
    rho = np.asarray(rho, dtype=np.complex128)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise ValueError("density matrix must be square")
    n = int(round(np.log2(rho.shape[0])))
    if (1 << n) != rho.shape[0]:
        raise ValueError("density matrix dimension must be a power of two")
    return DensityVector(rho.flatten(order="F"), n)


def devectorize(v) -> np.ndarray:
    """Inverse of :func:`vectorize`; accepts a DensityVector or raw amplitudes."""
    if isinstance(v, DensityVector):
        amps, dim = v.amps, v.dim
    else:
        amps = np.asarray(v, dtype=np.complex128)
        dim = int(round(np.sqrt(amps.shape[0])))
        if dim * dim != amps.shape[0]:
            raise ValueError("amplitude count is not a perfect square")
    return amps.reshape((dim, dim), order="F")


def density_from_state(s: StateVector) -> DensityVector:
    """Pure-state density matrix |s><s| in vectorized form."""
    return vectorize(np.outer(s.amps, s.amps.conj()))


class LiouvillianOp:
    """Matrix-free Lindblad generator in the vectorized representation."""

    def __init__(self, spec: LindbladSpec):
        self.spec = spec
        self.n = spec.n_qubits
        self.h = spec.hamiltonian
        # rates folded into the jump operators: L_k = sqrt(gamma_k) A_k
        self.jumps = [op.scaled(np.sqrt(rate)) for op, rate in spec.collapses]
        self._jump_parts = [
            (L, _adjoint_sum(L), _conj_sum(L), _transpose_sum(L)) for L in self.jumps
        ]

    @property
    def dim(self) -> int:
        return 1 << (2 * self.n)

    def apply(self, amps: np.ndarray) -> np.ndarray:
        """Generator action on vectorized amplitudes."""
        r = devectorize(amps)
        out = -1j * _left(self.h, r) + 1j * _right(self.h, r)
        for L, Ld, Lc, Lt in self._jump_parts:
            lr = _left(L, r)
            out += pauli.apply(Lc, lr.T).T  # L r L^dag
            out -= 0.5 * _left(Ld, lr)  # (1/2) L^dag L r
            out -= 0.5 * pauli.apply(Lt, pauli.apply(Lc, r.T)).T  # (1/2) r L^dag L
        return out.flatten(order="F")

    def to_dense(self, cap: int = LIOUVILLE_DENSE_CAP) -> np.ndarray:
        """Dense generator built column-by-column from the matrix-free action."""
        if self.n > cap:
            raise ValueError(f"dense Liouvillian capped at {cap} qubits, got {self.n}")
        dim = self.dim
        out = np.empty((dim, dim), dtype=np.complex128)
        basis = np.zeros(dim, dtype=np.complex128)
        for j in range(dim):
            basis[j] = 1.0
            out[:, j] = self.apply(basis)
            basis[j] = 0.0
        return out


def build_liouvillian(spec: LindbladSpec) -> LiouvillianOp:
    return LiouvillianOp(spec)


def lindblad_exact_propagate(
    l: LiouvillianOp, rho0: DensityVector, t: float, tol: float = 1e-10
) -> DensityVector:
    """e^{Lt} rho0 via a restarted non-Hermitian Krylov exponential."""
    if t < 0:
        raise ValueError("propagation time must be nonnegative")
    if rho0.n != l.n:
        raise ValueError("register mismatch between state and generator")
    if t == 0.0:
        return DensityVector(rho0.amps.copy(), rho0.n)
    amps = krylov_expmv(l.apply, rho0.amps, scale=t, tol=tol, hermitian=False)
    return DensityVector(amps, rho0.n)


def _columnwise_expmv(apply_op, block: np.ndarray, scale: complex, tol: float) -> np.ndarray:
    out = np.empty_like(block)
    for j in range(block.shape[1]):
        out[:, j] = krylov_expmv(apply_op, block[:, j], scale=scale, tol=tol, hermitian=True)
    return out


def trotter_liouvillian_step(
    spec: LindbladSpec, tau: float, v: DensityVector, tol: float = 1e-12
) -> DensityVector:
    """One first-order splitting step of the vectorized generator.

    Fixed factor order: the unitary part e^{(-i I(x)H + i H^T(x)I) tau},
    then per collapse channel the contraction factor (the anticommutator
    half) and the jump factor e^{(conj(L)(x)L) tau}.  Every factor is an
    exact small-generator exponential applied matrix-free; the non-unitary
    factors act directly on the vectorized state.
    """
    if tau <= 0:
        raise ValueError("step size must be positive")
    if v.n != spec.n_qubits:
        raise ValueError("register mismatch between state and generator")
    h = spec.hamiltonian
    r = devectorize(v)

    def apply_h(x: np.ndarray) -> np.ndarray:
        return pauli.apply(h, x)

    # unitary factor: r -> e^{-iH tau} r e^{+iH tau}
    r = _columnwise_expmv(apply_h, r, -1j * tau, tol)
    r = np.conj(_columnwise_expmv(apply_h, np.conj(r.T), -1j * tau, tol)).T

    jumps = [op.scaled(np.sqrt(rate)) for op, rate in spec.collapses]
    for L in jumps:
        Ld = _adjoint_sum(L)
        Lc = _conj_sum(L)

        def apply_m(x: np.ndarray) -> np.ndarray:
            return pauli.apply(Ld, pauli.apply(L, x))

        # contraction factor: r -> e^{-tau M/2} r e^{-tau M/2}, M = L^dag L
        r = _columnwise_expmv(apply_m, r, -0.5 * tau, tol)
        r = np.conj(_columnwise_expmv(apply_m, np.conj(r.T), -0.5 * tau, tol)).T

        # jump factor on the stacked vector: generator rho -> L rho L^dag
        def apply_jump(x: np.ndarray) -> np.ndarray:
            m = devectorize(x)
            return pauli.apply(Lc, pauli.apply(L, m).T).T.flatten(order="F")

        vec = krylov_expmv(apply_jump, r.flatten(order="F"), scale=tau, tol=tol, hermitian=False)
        r = devectorize(vec)
    return DensityVector(r.flatten(order="F"), v.n)


def open_fast_forward(
    l: LiouvillianOp,
    basis: Sequence[DensityVector],
    c0: np.ndarray,
    svd_threshold: float = 1e-12,
) -> FFSolution:
    """Subspace propagation over vectorized density operators.

    Projects the generator and the Liouville-space Gram matrix onto the
    basis, regularizes the overlap inverse by eigenvalue truncation, and
    returns c(t) = e^{S^{-1} L_sub t} c(0).  The projected generator is not
    Hermitian, so each evaluation goes through a dense non-Hermitian
    exponential at subspace scale.
    """
    if not basis:
        raise ValueError("basis must be non-empty")
    B = np.stack([b.amps for b in basis], axis=1)
    c0 = np.asarray(c0, dtype=np.complex128)
    if c0.shape != (B.shape[1],):
        raise ValueError("c0 length must match the basis size")
    lb = np.empty_like(B)
    for j in range(B.shape[1]):
        lb[:, j] = l.apply(B[:, j])
    l_sub = B.conj().T @ lb
    s_sub = B.conj().T @ B
    x = _canonical_transform(s_sub, svd_threshold)
    generator = (x @ x.conj().T) @ l_sub
    c0_frozen = c0.copy()

    def coeffs(t: float) -> np.ndarray:
        if t == 0.0:
            return c0_frozen.copy()
        return scipy.linalg.expm(generator * t) @ c0_frozen

    return FFSolution(c0_frozen, generator, coeffs)


def liouvillian_chain(
    l: LiouvillianOp, rho0: DensityVector, m: int, tau: float, tol: float = 1e-10
) -> list[DensityVector]:
    """Real-time generator chain {e^{L k tau} rho0}, each vector normalized
    in the Liouville inner product; the usual subspace basis for
    :func:`open_fast_forward`."""
    if m < 1:
        raise ValueError("chain order must be at least 1")
    if tau <= 0:
        raise ValueError("chain spacing must be positive")
    out = []
    cur = rho0
    for k in range(m):
        if k > 0:
            cur = lindblad_exact_propagate(l, cur, tau, tol)
        nrm = float(np.linalg.norm(cur.amps))
        if nrm == 0.0:
            raise ValueError("chain hit the zero vector")
        out.append(DensityVector(cur.amps / nrm, cur.n))
    return out


def expectation(o: PauliSum, rho: DensityVector) -> float:
    """Tr(O rho) for a Hermitian observable."""
    pauli.require_hermitian(o, "observable")
    if o.n_qubits != rho.n:
        raise ValueError("register mismatch between observable and state")
    val = complex(np.trace(pauli.apply(o, devectorize(rho))))
    if abs(val.imag) > 1e-8:
        raise ValueError(f"observable expectation has imaginary part {val.imag:.3e}")
    return float(val.real)


def site_collapse(n: int, site: int, kind: str) -> PauliSum:
    """Single-site collapse shorthand: 'damping' (lowering), 'dephasing' (Z),
    or a named Pauli axis on ``site`` (1-based)."""
    if not (1 <= site <= n):
        raise ValueError(f"site {site} outside 1..{n}")
    pre, post = "I" * (site - 1), "I" * (n - site)
    if kind == "damping":
        return PauliSum(
            (
                PauliString(pre + "X" + post, 0.5),
                PauliString(pre + "Y" + post, 0.5j),
            ),
            n,
        )
    if kind == "dephasing":
        return PauliSum((PauliString(pre + "Z" + post, 1.0),), n)
    if kind in ("X", "Y", "Z"):
        return PauliSum((PauliString(pre + kind + post, 1.0),), n)
    raise ValueError(f"unknown collapse kind {kind!r}")
