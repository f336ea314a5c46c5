"""Weighted sums of Pauli strings, applied matrix-free to statevector amplitudes.

Operators are kept as flat term lists; no merging or simplification is ever
performed, so the term order written by a builder is the order seen by
product-formula propagators.  Qubit 1 is the most significant bit of the
basis-state label: the axes string ``"XIZ"`` acts with X on qubit 1 (leftmost)
and Z on qubit 3 (rightmost).
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

_VALID_AXES = frozenset("IXYZ")

_PAULI_1Q = {
    "I": np.eye(2, dtype=np.complex128),
    "X": np.array([[0, 1], [1, 0]], dtype=np.complex128),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=np.complex128),
    "Z": np.array([[1, 0], [0, -1]], dtype=np.complex128),
}

DENSE_CAP_DEFAULT = 8


@dataclass(frozen=True)
class PauliString:
    """A single N-qubit Pauli word with a complex weight.

    ``axes`` is a string over ``IXYZ`` read left-to-right as qubits 1..N.
    """

    axes: str
    coefficient: complex = 1.0 + 0.0j

    def __post_init__(self) -> None:
        if not self.axes:
            raise ValueError("Pauli string must act on at least one qubit")
        bad = set(self.axes) - _VALID_AXES
        if bad:
            raise ValueError(f"invalid Pauli axes {sorted(bad)} in {self.axes!r}")
        object.__setattr__(self, "coefficient", complex(self.coefficient))

    @property
    def n_qubits(self) -> int:
        return len(self.axes)

    @property
    def n_y(self) -> int:
        return self.axes.count("Y")


@dataclass(frozen=True)
class PauliSum:
    """Ordered sum of Pauli strings over a fixed register size."""

    terms: tuple[PauliString, ...]
    n_qubits: int

    def __post_init__(self) -> None:
        if self.n_qubits < 1:
            raise ValueError("register size must be positive")
        object.__setattr__(self, "terms", tuple(self.terms))
        for t in self.terms:
            if t.n_qubits != self.n_qubits:
                raise ValueError(
                    f"term {t.axes!r} acts on {t.n_qubits} qubits, expected {self.n_qubits}"
                )

    def __len__(self) -> int:
        return len(self.terms)

    @property
    def dim(self) -> int:
        return 1 << self.n_qubits

    def is_hermitian(self, tol: float = 1e-12) -> bool:
        """True when every coefficient is real to within ``tol``."""
        return all(abs(t.coefficient.imag) <= tol for t in self.terms)

    def scaled(self, factor: complex) -> "PauliSum":
        return PauliSum(
            tuple(PauliString(t.axes, factor * t.coefficient) for t in self.terms),
            self.n_qubits,
        )


def heisenberg_xyz(n: int, jx: float, jy: float, jz: float, h: float) -> PauliSum:
    """Open-chain XYZ Hamiltonian with a uniform longitudinal field.

    Emits 3(n-1) bond terms (XX, YY, ZZ grouped per bond, bonds in site
    order) followed by n single-site Z field terms.  Zero couplings are kept
    so the term count and ordering are independent of the parameter values.
    """
    if n < 2:
        raise ValueError("chain needs at least 2 sites")
    terms: list[PauliString] = []
    for i in range(n - 1):
        pre, post = "I" * i, "I" * (n - i - 2)
        terms.append(PauliString(pre + "XX" + post, jx))
        terms.append(PauliString(pre + "YY" + post, jy))
        terms.append(PauliString(pre + "ZZ" + post, jz))
    for i in range(n):
        terms.append(PauliString("I" * i + "Z" + "I" * (n - i - 1), h))
    return PauliSum(tuple(terms), n)


def from_triples(n: int, triples: Iterable[Sequence]) -> PauliSum:
    """Build a PauliSum from (axes, re, im) triples as accepted in run configs."""
    terms = []
    for entry in triples:
        axes, re, im = entry
        if len(axes) != n:
            raise ValueError(f"axes {axes!r} has length {len(axes)}, expected {n}")
        terms.append(PauliString(str(axes), complex(float(re), float(im))))
    if not terms:
        raise ValueError("operator needs at least one term")
    return PauliSum(tuple(terms), n)


@lru_cache(maxsize=None)
def _action_table(axes: str) -> tuple[np.ndarray, np.ndarray]:
    """Permutation and per-source-amplitude weight for one unit Pauli word.

    For a basis label b, the word maps |b> -> w[b] |b ^ x_mask| with
    w[b] = i^{#Y} * (-1)^{popcount(b & z_mask)}.
    """
    n = len(axes)
    dim = 1 << n
    x_mask = 0
    z_mask = 0
    n_y = 0
    for i, a in enumerate(axes):
        bit = 1 << (n - 1 - i)
        if a == "X":
            x_mask |= bit
        elif a == "Y":
            x_mask |= bit
            z_mask |= bit
            n_y += 1
        elif a == "Z":
            z_mask |= bit
    idx = np.arange(dim, dtype=np.intp)
    parity = np.zeros(dim, dtype=np.intp)
    b = 0
    zm = z_mask
    while zm:
        if zm & 1:
            parity ^= (idx >> b) & 1
        zm >>= 1
        b += 1
    weights = (1j ** (n_y & 3)) * (1.0 - 2.0 * parity).astype(np.complex128)
    perm = idx ^ x_mask
    return perm, weights


def apply(op: PauliSum, amps: np.ndarray) -> np.ndarray:
    """Apply ``op`` to amplitudes without materializing a matrix.

    ``amps`` may be a length-2^n vector or a (2^n, k) block; axis 0 indexes
    basis states.  The input is never modified.
    """
    a = np.asarray(amps, dtype=np.complex128)
    if a.shape[0] != op.dim:
        raise ValueError(
            f"state has {a.shape[0]} amplitudes, operator acts on {op.dim}"
        )
    out = np.zeros(a.shape, dtype=np.complex128)
    for t in op.terms:
        perm, w = _action_table(t.axes)
        if a.ndim == 1:
            out += t.coefficient * (w * a)[perm]
        else:
            out += t.coefficient * (w[:, None] * a)[perm]
    return out


def to_dense(op: PauliSum, cap: int = DENSE_CAP_DEFAULT) -> np.ndarray:
    """Kronecker-product assembly of ``op``; guarded by a register-size cap."""
    if op.n_qubits > cap:
        raise ValueError(f"dense form capped at {cap} qubits, got {op.n_qubits}")
    dim = op.dim
    out = np.zeros((dim, dim), dtype=np.complex128)
    for t in op.terms:
        m = np.ones((1, 1), dtype=np.complex128)
        for a in t.axes:
            m = np.kron(m, _PAULI_1Q[a])
        out += t.coefficient * m
    return out


def require_hermitian(op: PauliSum, what: str = "operator") -> None:
    if not op.is_hermitian():
        raise ValueError(f"{what} must be Hermitian (all coefficients real)")
