"""Statevectors and the three propagators: exact real-time, first-order
product formula, and the imaginary-time filter, plus overlaps and
probability-argmax reference selection."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from . import pauli
from .expmv import krylov_expmv
from .pauli import PauliSum, require_hermitian


@dataclass(frozen=True)
class StateVector:
    """2^n complex amplitudes over computational basis labels.

    Labels read qubit 1 as the most significant bit, so ``"01"`` is index 1.
    Treated as immutable: every operation returns a fresh vector.
    """

    amps: np.ndarray
    n: int

    def __post_init__(self) -> None:
        a = np.asarray(self.amps, dtype=np.complex128)
        if a.ndim != 1 or a.shape[0] != (1 << self.n):
            raise ValueError(
                f"expected {1 << self.n} amplitudes for {self.n} qubits, got shape {a.shape}"
            )
        object.__setattr__(self, "amps", a)

    @property
    def dim(self) -> int:
        return 1 << self.n

    def norm(self) -> float:
        return float(np.linalg.norm(self.amps))

    def normalized(self) -> "StateVector":
        nrm = self.norm()
        if nrm == 0.0:
            raise ValueError("cannot normalize the zero vector")
        return StateVector(self.amps / nrm, self.n)

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amps) ** 2


@dataclass(frozen=True)
class EvolutionParams:
    """Propagator knobs: exact-propagator tolerance, product-formula step
    count, and the imaginary-time step."""

    tol: float = 1e-10
    trotter_steps: int = 1
    dtau: float = 0.1

    def __post_init__(self) -> None:
        if self.tol <= 0:
            raise ValueError("tol must be positive")
        if self.trotter_steps < 1:
            raise ValueError("trotter_steps must be at least 1")
        if self.dtau <= 0:
            raise ValueError("dtau must be positive")


def basis_state(n: int, bits: str) -> StateVector:
    """Computational basis state from a bitstring (qubit 1 leftmost)."""
    if n < 1:
        raise ValueError("need at least one qubit")
    if len(bits) != n or set(bits) - {"0", "1"}:
        raise ValueError(f"invalid bitstring {bits!r} for {n} qubits")
    amps = np.zeros(1 << n, dtype=np.complex128)
    amps[int(bits, 2)] = 1.0
    return StateVector(amps, n)


def neel_state(n: int) -> StateVector:
    """Alternating basis state |0101...>, starting with 0 on qubit 1."""
    if n < 1:
        raise ValueError("need at least one qubit")
    return basis_state(n, "".join("01"[i % 2] for i in range(n)))


def inner(a: StateVector, b: StateVector) -> complex:
    """<a|b> with conjugation on the first argument."""
    if a.n != b.n:
        raise ValueError(f"register mismatch: {a.n} vs {b.n}")
    return complex(np.vdot(a.amps, b.amps))


def exact_evolve(h: PauliSum, s: StateVector, t: float, tol: float = 1e-10) -> StateVector:
    """e^{-iHt}|s> via a restarted Hermitian-Krylov exponential.

    Matrix-free: cost is propagator matvecs only, so register sizes well
    beyond the dense-oracle cap are fine.
    """
    require_hermitian(h, "Hamiltonian")
    if h.dim != s.dim:
        raise ValueError("register mismatch between Hamiltonian and state")
    if t == 0.0:
        return StateVector(s.amps.copy(), s.n)
    amps = krylov_expmv(
        lambda x: pauli.apply(h, x), s.amps, scale=-1j * t, tol=tol, hermitian=True
    )
    return StateVector(amps, s.n)


def trotter_evolve(h: PauliSum, s: StateVector, t: float, steps: int) -> StateVector:
    """First-order product formula in the Hamiltonian's stored term order.

    Each per-term factor e^{-i c P (t/steps)} is applied exactly through the
    closed form cos(theta) I - i sin(theta) P, so the only error is the
    splitting error.
    """
    require_hermitian(h, "Hamiltonian")
    if h.dim != s.dim:
        raise ValueError("register mismatch between Hamiltonian and state")
    if steps < 1:
        raise ValueError("steps must be at least 1")
    dt = t / steps
    tables = [
        (pauli._action_table(term.axes), term.coefficient.real) for term in h.terms
    ]
    a = s.amps.copy()
    for _ in range(steps):
        for (perm, w), c in tables:
            th = c * dt
            if th == 0.0:
                continue
            a = math.cos(th) * a - 1j * math.sin(th) * (w * a)[perm]
    return StateVector(a, s.n)


def imaginary_time_apply(
    h: PauliSum, shift: float, dtau: float, s: StateVector, tol: float = 1e-12
) -> StateVector:
    """Unnormalized e^{-dtau (H - shift)}|s>; normalization is the caller's call."""
    require_hermitian(h, "Hamiltonian")
    if h.dim != s.dim:
        raise ValueError("register mismatch between Hamiltonian and state")
    if dtau <= 0:
        raise ValueError("dtau must be positive")

    def op(x: np.ndarray) -> np.ndarray:
        return pauli.apply(h, x) - shift * x

    amps = krylov_expmv(op, s.amps, scale=-dtau, tol=tol, hermitian=True)
    return StateVector(amps, s.n)


def argmax_bitstring(s: StateVector, excluded: Iterable[str] = ()) -> str:
    """Basis label with the largest exact probability, skipping ``excluded``.

    Ties break toward the smallest integer label.  Probabilities are exact
    (no sampling), so repeated calls are deterministic.
    """
    probs = s.probabilities()
    n_masked = 0
    for b in excluded:
        if len(b) != s.n or set(b) - {"0", "1"}:
            raise ValueError(f"invalid excluded bitstring {b!r}")
        probs[int(b, 2)] = -1.0
        n_masked += 1
    if n_masked >= s.dim:
        raise ValueError("all basis labels are excluded")
    idx = int(np.argmax(probs))
    if probs[idx] < 0.0:
        raise ValueError("all basis labels are excluded")
    return format(idx, f"0{s.n}b")


def state_to_pairs(s: StateVector) -> list[list[float]]:
    """(re, im) pair list, the fixture serialization format."""
    return [[float(z.real), float(z.imag)] for z in s.amps]


def state_from_pairs(pairs: Sequence[Sequence[float]]) -> StateVector:
    n = int(round(math.log2(len(pairs))))
    if (1 << n) != len(pairs):
        raise ValueError("amplitude count is not a power of two")
    amps = np.array([complex(re, im) for re, im in pairs], dtype=np.complex128)
    return StateVector(amps, n)
