"""Krylov subspace construction and fast-forwarding.

Three builders populate a subspace: real-time chains seeded from
max-probability references (multi-reference Krylov), iterative growth by
imaginary-time-filtered correction vectors (the Davidson-style loop), and
the hybrid that chains every Davidson reference.  A subspace carries its
projected Hamiltonian D and overlap E; dynamics to arbitrary times come
from the subspace Schrodinger equation c(t) = exp(-i S^{-1} D t) c(0) with a
canonically orthogonalized (eigenvalue-truncated) overlap inverse.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
import scipy.linalg

from . import pauli
from .pauli import PauliSum, require_hermitian
from .states import (
    StateVector,
    argmax_bitstring,
    basis_state,
    exact_evolve,
    imaginary_time_apply,
    trotter_evolve,
)

PROVENANCE_KINDS = ("initial", "qdavidson-correction", "time-chain")


class OverlapRankError(RuntimeError):
    """Every overlap eigenvalue fell below the regularization cutoff."""


@dataclass(frozen=True)
class Provenance:
    """Where a basis vector came from: a seed, a correction, or chain power k
    of reference ``ref``."""

    kind: str
    ref: int = 0
    power: int = 0

    def __post_init__(self) -> None:
        if self.kind not in PROVENANCE_KINDS:
            raise ValueError(f"unknown provenance kind {self.kind!r}")


@dataclass(frozen=True)
class QDavidsonParams:
    """Thresholds for the correction loop and the overlap regularization.

    The imaginary-time step default is calibrated on the desk-scale
    benchmark suite; it is exposed in every run config.
    """

    eps: float = 1e-3
    dtau: float = 0.45
    svd_threshold: float = 1e-12
    max_dim: int = 64

    def __post_init__(self) -> None:
        if self.eps <= 0 or self.dtau <= 0 or self.svd_threshold <= 0 or self.max_dim <= 0:
            raise ValueError("all QDavidson parameters must be positive")
        if self.svd_threshold >= 1:
            raise ValueError("svd_threshold must be below 1")


@dataclass
class KrylovSubspace:
    """Ordered basis with cached projected Hamiltonian ``d`` and overlap ``e``.

    ``basis_matrix`` holds the basis vectors as columns; basis vectors are
    stored normalized.  Instances are treated as immutable: growth returns a
    new subspace.
    """

    basis_matrix: np.ndarray
    d: np.ndarray
    e: np.ndarray
    provenance: list[Provenance]
    n: int
    _obs_cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def dimension(self) -> int:
        return self.basis_matrix.shape[1]

    @property
    def basis(self) -> list[StateVector]:
        return [StateVector(self.basis_matrix[:, k].copy(), self.n) for k in range(self.dimension)]


@dataclass
class EigenSolution:
    """Solution of the regularized generalized eigenproblem, eigenvalues
    ascending and eigenvectors back-transformed to basis coordinates."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    retained_rank: int


@dataclass
class FFSolution:
    """Closed-form time-evolved coefficients over a fixed subspace."""

    c0: np.ndarray
    generator: np.ndarray
    _eval: Callable[[float], np.ndarray]

    def coefficients(self, t: float) -> np.ndarray:
        return self._eval(t)

    def __call__(self, t: float) -> np.ndarray:
        return self._eval(t)


@dataclass(frozen=True)
class ChainSpec:
    """How real-time chain links are generated: exact propagation to ``tol``
    or ``steps`` first-order product-formula steps per link."""

    kind: str = "exact"
    tol: float = 1e-12
    steps: int = 1

    def __post_init__(self) -> None:
        if self.kind not in ("exact", "trotter"):
            raise ValueError(f"unknown chain propagator {self.kind!r}")
        if self.tol <= 0 or self.steps < 1:
            raise ValueError("invalid chain propagator parameters")


@dataclass(frozen=True)
class StopRule:
    """Caller-supplied growth termination.

    When ``fidelity_target`` is set, growth stops once the fast-forwarded
    state at ``t_final`` reaches that overlap with ``exact_final``; otherwise
    a reference or iteration cap must bound the build.
    """

    max_references: int | None = None
    max_iterations: int | None = None
    fidelity_target: float | None = None
    t_final: float | None = None
    exact_final: StateVector | None = None

    def __post_init__(self) -> None:
        if self.fidelity_target is not None:
            if not (0 < self.fidelity_target <= 1):
                raise ValueError("fidelity_target must lie in (0, 1]")
            if self.t_final is None or self.exact_final is None:
                raise ValueError("fidelity_target needs t_final and exact_final")

    @property
    def has_target(self) -> bool:
        return self.fidelity_target is not None


@dataclass
class StepReport:
    eigenvalues: np.ndarray
    residues: np.ndarray
    added: int
    early_stop: bool = False


@dataclass
class BuildReport:
    """Counts and diagnostics from a subspace build.

    ``iterations`` counts full algorithm passes; ``references`` counts
    accumulated reference states (for the Davidson loop every basis vector
    is a reference).  ``fidelity_history`` records (dimension, fidelity)
    pairs at each stop-rule evaluation.
    """

    iterations: int
    references: int
    converged: bool
    eigenvalues: list[float] = field(default_factory=list)
    residues: list[float] = field(default_factory=list)
    fidelity_history: list[tuple[int, float]] = field(default_factory=list)


def _hermitize(a: np.ndarray) -> np.ndarray:
    return 0.5 * (a + a.conj().T)


def _as_matrix(basis) -> np.ndarray:
    if isinstance(basis, np.ndarray):
        if basis.ndim != 2:
            raise ValueError("basis array must be 2-d with vectors as columns")
        return np.asarray(basis, dtype=np.complex128)
    cols = list(basis)
    if not cols:
        raise ValueError("basis must be non-empty")
    n = cols[0].n
    for s in cols:
        if s.n != n:
            raise ValueError("basis states must share the register size")
    return np.stack([s.amps for s in cols], axis=1)


def build_subspace_matrices(h: PauliSum, basis) -> tuple[np.ndarray, np.ndarray]:
    """Projected Hamiltonian D_{kl} = <chi_k|H|chi_l> and overlap
    E_{kl} = <chi_k|chi_l>, Hermitized by averaging with the adjoint.

    Costs one H application per basis vector.
    """
    require_hermitian(h, "Hamiltonian")
    B = _as_matrix(basis)
    if B.shape[0] != h.dim:
        raise ValueError("register mismatch between Hamiltonian and basis")
    W = pauli.apply(h, B)
    d = B.conj().T @ W
    e = B.conj().T @ B
    return _hermitize(d), _hermitize(e)


def subspace_from_states(
    h: PauliSum, states, provenance: Sequence[Provenance] | None = None
) -> KrylovSubspace:
    """Wrap explicit basis states into a subspace with freshly built D and E."""
    B = _as_matrix(states)
    d, e = build_subspace_matrices(h, B)
    m = B.shape[1]
    if provenance is None:
        provenance = [Provenance("initial", ref=k) for k in range(m)]
    if len(provenance) != m:
        raise ValueError("provenance length must match the basis size")
    n = int(round(np.log2(B.shape[0])))
    return KrylovSubspace(B, d, e, list(provenance), n)


def _canonical_transform(e: np.ndarray, svd_threshold: float) -> np.ndarray:
    """Columns X with X^dag E X = I, truncating overlap eigenvalues below
    svd_threshold relative to the largest."""
    eh = _hermitize(np.asarray(e, dtype=np.complex128))
    w, u = scipy.linalg.eigh(eh)
    wmax = float(w[-1]) if w.size else 0.0
    if wmax <= 0.0:
        raise OverlapRankError("overlap matrix has no positive eigenvalues")
    keep = (w >= svd_threshold * wmax) & (w > 0.0)
    if not np.any(keep):
        raise OverlapRankError("all overlap eigenvalues fall below the cutoff")
    return u[:, keep] / np.sqrt(w[keep])


def regularized_solve(d: np.ndarray, e: np.ndarray, svd_threshold: float) -> EigenSolution:
    """Generalized eigenproblem D v = lambda E v via canonical orthogonalization.

    Small overlap eigendirections are discarded before inverting, so the
    retained rank can fall below the basis size for dependent bases.
    """
    d = np.asarray(d, dtype=np.complex128)
    e = np.asarray(e, dtype=np.complex128)
    if d.shape != e.shape or d.ndim != 2 or d.shape[0] != d.shape[1]:
        raise ValueError("d and e must be square matrices of equal size")
    x = _canonical_transform(e, svd_threshold)
    d_red = _hermitize(x.conj().T @ _hermitize(d) @ x)
    lam, y = scipy.linalg.eigh(d_red)
    return EigenSolution(lam, x @ y, x.shape[1])


def residue_norm(h: PauliSum, sub: KrylovSubspace, v: np.ndarray, lam: float) -> float:
    """Quadratic form <psi|(H-lam)^2|psi> for psi = sum_k v_k chi_k.

    Applies (H - lam) once per basis vector and accumulates the Gram form,
    avoiding any expansion of H^2 into terms.
    """
    B = sub.basis_matrix
    v = np.asarray(v, dtype=np.complex128)
    w = pauli.apply(h, B) - lam * B
    return float(np.linalg.norm(w @ v) ** 2)


def _extend(
    sub: KrylovSubspace, h: PauliSum, cols: Sequence[np.ndarray], provs: Sequence[Provenance]
) -> KrylovSubspace:
    """Append normalized columns, growing D and E by one row/column each."""
    Bm = sub.basis_matrix
    d = sub.d
    e = sub.e
    prov = list(sub.provenance)
    for col, pv in zip(cols, provs):
        hc = pauli.apply(h, col)
        m = Bm.shape[1]
        d2 = np.empty((m + 1, m + 1), dtype=np.complex128)
        e2 = np.empty((m + 1, m + 1), dtype=np.complex128)
        d2[:m, :m] = d
        e2[:m, :m] = e
        dcol = Bm.conj().T @ hc
        ecol = Bm.conj().T @ col
        d2[:m, m] = dcol
        d2[m, :m] = dcol.conj()
        d2[m, m] = np.vdot(col, hc).real
        e2[:m, m] = ecol
        e2[m, :m] = ecol.conj()
        e2[m, m] = np.vdot(col, col).real
        Bm = np.concatenate([Bm, col[:, None]], axis=1)
        d, e = d2, e2
        prov.append(pv)
    return KrylovSubspace(Bm, d, e, prov, sub.n)


def qdavidson_step(
    h: PauliSum,
    sub: KrylovSubspace,
    p: QDavidsonParams,
    stop_check: Callable[[KrylovSubspace], bool] | None = None,
) -> tuple[KrylovSubspace, StepReport]:
    """One full correction pass over the current subspace.

    Solves the regularized eigenproblem once and measures every retained
    eigenpair's residue.  Eigenpairs with residue above eps^2 are then
    visited in order of decreasing weight in the seed vector chi_0 (the
    dynamics being fast-forwarded starts there, so high-weight pairs matter
    first; ties fall back to ascending eigenvalue).  Each visited pair's
    eigenstate goes through the imaginary-time filter, and the filtered
    vector is appended (normalized) whenever its remainder outside the
    subspace *as it has grown so far* is at least eps; testing against the
    updated span collapses the near-parallel corrections of one pass into
    genuinely new directions.  Appends stop at ``p.max_dim``.
    ``stop_check``, when given, is evaluated after every append and ends the
    pass early once true.
    """
    if sub.dimension == 0:
        raise ValueError("subspace must be non-empty")
    if sub.dimension > p.max_dim:
        raise ValueError("subspace already exceeds max_dim")
    sol = regularized_solve(sub.d, sub.e, p.svd_threshold)
    B = sub.basis_matrix
    W = pauli.apply(h, B)
    lam = sol.eigenvalues
    vecs = sol.eigenvectors
    residues = np.empty(sol.retained_rank)
    for i in range(sol.retained_rank):
        rv = W @ vecs[:, i] - lam[i] * (B @ vecs[:, i])
        residues[i] = np.linalg.norm(rv) ** 2
    # |<psi_i|chi_0>|^2; stable sort keeps ascending-eigenvalue tie-breaking
    seed_weights = np.abs(vecs.conj().T @ sub.e[:, 0]) ** 2
    order = np.argsort(-seed_weights, kind="stable")
    current = sub
    added = 0
    early = False
    eps_sq = p.eps * p.eps
    for i in order:
        if residues[i] <= eps_sq:
            continue
        if current.dimension >= p.max_dim:
            break
        psi = B @ vecs[:, i]
        delta = imaginary_time_apply(h, float(lam[i]), p.dtau, StateVector(psi, sub.n))
        bc = current.basis_matrix
        x = _canonical_transform(current.e, p.svd_threshold)
        overlaps = bc.conj().T @ delta.amps
        perp = delta.amps - bc @ (x @ (x.conj().T @ overlaps))
        if np.linalg.norm(perp) < p.eps:
            continue
        col = delta.amps / np.linalg.norm(delta.amps)
        current = _extend(current, h, [col], [Provenance("qdavidson-correction")])
        added += 1
        if stop_check is not None and stop_check(current):
            early = True
            break
    return current, StepReport(lam, residues, added, early)


def _check_target(
    sub: KrylovSubspace,
    stop: StopRule,
    p: QDavidsonParams,
    history: list[tuple[int, float]],
) -> bool:
    if not stop.has_target:
        return False
    c0 = np.zeros(sub.dimension, dtype=np.complex128)
    c0[0] = 1.0
    ff = fast_forward(sub, c0, p)
    f, _ = fidelity(stop.exact_final, sub, ff(stop.t_final))
    history.append((sub.dimension, f))
    return f >= stop.fidelity_target


def _final_diagnostics(h: PauliSum, sub: KrylovSubspace, p: QDavidsonParams):
    sol = regularized_solve(sub.d, sub.e, p.svd_threshold)
    B = sub.basis_matrix
    W = pauli.apply(h, B)
    res = []
    for i in range(sol.retained_rank):
        rv = W @ sol.eigenvectors[:, i] - sol.eigenvalues[i] * (B @ sol.eigenvectors[:, i])
        res.append(float(np.linalg.norm(rv) ** 2))
    return [float(x) for x in sol.eigenvalues], res


def qdavidson_build(
    h: PauliSum,
    r0: StateVector,
    p: QDavidsonParams,
    stop: StopRule = StopRule(),
) -> tuple[KrylovSubspace, BuildReport]:
    """Grow a subspace from a single seed by repeated correction passes.

    Stops at the fixed point (a pass adds nothing), at ``p.max_dim``, at the
    iteration cap, or as soon as the fidelity target is met (checked after
    every appended vector).
    """
    sub = subspace_from_states(h, [r0.normalized()], [Provenance("initial")])
    history: list[tuple[int, float]] = []
    met = _check_target(sub, stop, p, history)
    check = None
    if stop.has_target and not met:
        check = lambda s: _check_target(s, stop, p, history)
    iterations = 0
    while not met:
        if sub.dimension >= p.max_dim:
            break
        if stop.max_iterations is not None and iterations >= stop.max_iterations:
            break
        sub_next, rep = qdavidson_step(h, sub, p, stop_check=check)
        iterations += 1
        sub = sub_next
        if rep.early_stop:
            met = True
            break
        if rep.added == 0:
            break
    eigenvalues, residues = _final_diagnostics(h, sub, p)
    converged = met if stop.has_target else True
    return sub, BuildReport(
        iterations, sub.dimension, converged, eigenvalues, residues, history
    )


def _chain_link(h: PauliSum, s: StateVector, tau: float, chain: ChainSpec) -> StateVector:
    if chain.kind == "exact":
        return exact_evolve(h, s, tau, chain.tol)
    return trotter_evolve(h, s, tau, chain.steps)


def _single_vector_subspace(h: PauliSum, col: np.ndarray, prov: Provenance, n: int) -> KrylovSubspace:
    B = col[:, None].copy()
    d, e = build_subspace_matrices(h, B)
    return KrylovSubspace(B, d, e, [prov], n)


def _grow_chain(
    sub: KrylovSubspace | None,
    h: PauliSum,
    ref: StateVector,
    ref_idx: int,
    seed_kind: str,
    m: int,
    tau: float,
    chain: ChainSpec,
    stop: StopRule,
    p: QDavidsonParams,
    history: list[tuple[int, float]],
) -> tuple[KrylovSubspace, bool, bool]:
    """Append ``ref``'s order-m chain one state at a time.

    With a fidelity target active, the target is checked after every
    appended vector, so the reported required dimension is the first
    passing basis size.  Returns (subspace, target_met, room_left).
    """
    cur = ref
    for k in range(m):
        if k > 0:
            cur = _chain_link(h, cur, tau, chain)
        col = cur.amps / np.linalg.norm(cur.amps)
        prov = (
            Provenance(seed_kind, ref_idx, 0)
            if k == 0
            else Provenance("time-chain", ref_idx, k)
        )
        if sub is None:
            sub = _single_vector_subspace(h, col, prov, ref.n)
        else:
            if sub.dimension >= p.max_dim:
                return sub, False, False
            sub = _extend(sub, h, [col], [prov])
        if _check_target(sub, stop, p, history):
            return sub, True, True
    return sub, False, True


def _validate_bounded(stop: StopRule, what: str) -> None:
    if not (stop.has_target or stop.max_references or stop.max_iterations):
        raise ValueError(f"{what} needs a stop rule with a target or a cap")


def mrk_build(
    h: PauliSum,
    r0: StateVector,
    m: int,
    tau: float,
    stop: StopRule,
    p: QDavidsonParams,
    chain: ChainSpec = ChainSpec(),
) -> tuple[KrylovSubspace, BuildReport]:
    """Multi-reference real-time-chain subspace.

    Seeds with ``r0``'s order-m chain, then repeatedly measures the last
    chain state, picks the highest-probability unused basis label as the next
    reference, and appends its order-m chain.  A fidelity target is checked
    after every appended vector; reference and dimension caps bound the build
    otherwise.
    """
    if m < 1:
        raise ValueError("chain order must be at least 1")
    if tau <= 0:
        raise ValueError("chain spacing must be positive")
    _validate_bounded(stop, "mrk_build")
    history: list[tuple[int, float]] = []
    sub, met, room = _grow_chain(
        None, h, r0.normalized(), 0, "initial", m, tau, chain, stop, p, history
    )
    used: set[str] = set()
    if float(np.max(r0.probabilities())) >= 1.0 - 1e-10:
        used.add(argmax_bitstring(r0))
    refs = 1
    while not met and room:
        if stop.max_references is not None and refs >= stop.max_references:
            break
        if stop.max_iterations is not None and refs >= stop.max_iterations:
            break
        if sub.dimension >= p.max_dim:
            break
        seed = StateVector(sub.basis_matrix[:, -1].copy(), sub.n)
        label = argmax_bitstring(seed, excluded=used)
        used.add(label)
        sub, met, room = _grow_chain(
            sub, h, basis_state(sub.n, label), refs, "initial", m, tau, chain, stop, p, history
        )
        refs += 1
    eigenvalues, residues = _final_diagnostics(h, sub, p)
    converged = met if stop.has_target else True
    return sub, BuildReport(refs, refs, converged, eigenvalues, residues, history)


def mrqd_build(
    h: PauliSum,
    r0: StateVector,
    m: int,
    tau: float,
    stop: StopRule,
    p: QDavidsonParams,
    chain: ChainSpec = ChainSpec(),
) -> tuple[KrylovSubspace, BuildReport]:
    """Hybrid build: correction vectors picked over the assembled subspace
    become new reference states, and every reference contributes an order-m
    real-time chain.

    Each outer iteration runs one correction update over the full assembled
    subspace (chains included), accepting the single best correction as the
    next reference, then grows that reference's order-m chain.  The stop
    rule is evaluated after every appended vector.  With m = 1 the chains
    are empty and the build reduces to one correction per iteration.
    """
    if m < 1:
        raise ValueError("chain order must be at least 1")
    if tau <= 0:
        raise ValueError("chain spacing must be positive")
    _validate_bounded(stop, "mrqd_build")
    history: list[tuple[int, float]] = []
    assembled, met, room = _grow_chain(
        None, h, r0.normalized(), 0, "initial", m, tau, chain, stop, p, history
    )
    references = 1
    iterations = 0
    while not met and room:
        if stop.max_iterations is not None and iterations >= stop.max_iterations:
            break
        if stop.max_references is not None and references >= stop.max_references:
            break
        if assembled.dimension + m > p.max_dim:
            break
        # a single-slot cap turns the pass into one correction update
        one = QDavidsonParams(
            eps=p.eps,
            dtau=p.dtau,
            svd_threshold=p.svd_threshold,
            max_dim=assembled.dimension + 1,
        )
        stepped, rep = qdavidson_step(h, assembled, one)
        iterations += 1
        if rep.added == 0:
            break
        idx = stepped.dimension - 1
        ref_id = references
        references += 1
        prov = list(stepped.provenance)
        prov[idx] = Provenance("qdavidson-correction", ref_id, 0)
        assembled = KrylovSubspace(
            stepped.basis_matrix, stepped.d, stepped.e, prov, stepped.n
        )
        if _check_target(assembled, stop, p, history):
            met = True
            break
        cur = StateVector(assembled.basis_matrix[:, idx].copy(), assembled.n)
        for k in range(1, m):
            cur = _chain_link(h, cur, tau, chain)
            if assembled.dimension >= p.max_dim:
                room = False
                break
            col = cur.amps / np.linalg.norm(cur.amps)
            assembled = _extend(
                assembled, h, [col], [Provenance("time-chain", ref_id, k)]
            )
            if _check_target(assembled, stop, p, history):
                met = True
                break
    eigenvalues, residues = _final_diagnostics(h, assembled, p)
    converged = met if stop.has_target else True
    return assembled, BuildReport(
        iterations, references, converged, eigenvalues, residues, history
    )


def fast_forward(sub: KrylovSubspace, c0: np.ndarray, p: QDavidsonParams) -> FFSolution:
    """Closed-form coefficient evolution c(t) = exp(-i S^{-1} D t) c(0).

    The overlap inverse is regularized by the same eigenvalue cutoff as the
    eigensolver; the projected Hamiltonian is diagonalized once, and each
    evaluation is a small dense contraction with no time stepping.  c(0)
    reproduces ``c0`` exactly, including any regularized-away component.
    """
    c0 = np.asarray(c0, dtype=np.complex128)
    if c0.shape != (sub.dimension,):
        raise ValueError("c0 length must match the subspace dimension")
    x = _canonical_transform(sub.e, p.svd_threshold)
    d = _hermitize(sub.d)
    d_red = _hermitize(x.conj().T @ d @ x)
    lam, y = scipy.linalg.eigh(d_red)
    s_inv = x @ x.conj().T
    generator = -1j * (s_inv @ d)
    drive = y.conj().T @ (x.conj().T @ (d @ c0))
    xy = x @ y
    c0_frozen = c0.copy()

    def coeffs(t: float) -> np.ndarray:
        # (exp(-i lam t) - 1)/lam evaluated stably through sinc
        g = -1j * t * np.exp(-0.5j * lam * t) * np.sinc(lam * t / (2.0 * np.pi))
        return c0_frozen + xy @ (g * drive)

    return FFSolution(c0_frozen, generator, coeffs)


def observable(sub: KrylovSubspace, o: PauliSum, c: np.ndarray) -> float:
    """Subspace expectation sum_{ij} c_i^* c_j <chi_i|O|chi_j>.

    The M x M observable matrix is built once per operator and cached on the
    subspace, so sweeping many times reuses it.
    """
    require_hermitian(o, "observable")
    if o.dim != (1 << sub.n):
        raise ValueError("register mismatch between observable and subspace")
    mat = sub._obs_cache.get(o)
    if mat is None:
        B = sub.basis_matrix
        mat = B.conj().T @ pauli.apply(o, B)
        sub._obs_cache[o] = mat
    c = np.asarray(c, dtype=np.complex128)
    val = complex(np.vdot(c, mat @ c))
    if abs(val.imag) > 1e-8:
        raise ValueError(f"observable expectation has imaginary part {val.imag:.3e}")
    return float(val.real)


def reconstruct(sub: KrylovSubspace, c: np.ndarray) -> StateVector:
    """The represented state sum_i c_i chi_i (not normalized)."""
    c = np.asarray(c, dtype=np.complex128)
    return StateVector(sub.basis_matrix @ c, sub.n)


def fidelity(exact: StateVector, sub: KrylovSubspace, c: np.ndarray) -> tuple[float, float]:
    """Raw overlap |<exact|psi_K>|^2 and the represented norm c^dag E c.

    The overlap is not normalized by the represented norm; the norm is
    returned as a regularization-drift diagnostic.
    """
    if exact.n != sub.n:
        raise ValueError("register mismatch")
    c = np.asarray(c, dtype=np.complex128)
    psi = sub.basis_matrix @ c
    f = float(abs(np.vdot(exact.amps, psi)) ** 2)
    nrm = float(np.real(np.vdot(c, sub.e @ c)))
    return f, nrm


def save_subspace(path, sub: KrylovSubspace, params: dict | None = None) -> None:
    """Checkpoint a subspace: JSON manifest plus binary blobs for the basis
    amplitudes and the D/E matrices."""
    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)
    np.save(root / "basis.npy", sub.basis_matrix)
    np.save(root / "d.npy", sub.d)
    np.save(root / "e.npy", sub.e)
    manifest = {
        "format": "qkff-subspace-v1",
        "n_qubits": sub.n,
        "dimension": sub.dimension,
        "provenance": [
            {"kind": p.kind, "ref": p.ref, "power": p.power} for p in sub.provenance
        ],
        "params": params or {},
    }
    (root / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))


def load_subspace(path) -> tuple[KrylovSubspace, dict]:
    """Load a checkpoint written by :func:`save_subspace`."""
    root = Path(path)
    manifest = json.loads((root / "manifest.json").read_text())
    if manifest.get("format") != "qkff-subspace-v1":
        raise ValueError(f"unrecognized checkpoint format in {root}")
    B = np.load(root / "basis.npy")
    d = np.load(root / "d.npy")
    e = np.load(root / "e.npy")
    prov = [
        Provenance(entry["kind"], entry["ref"], entry["power"])
        for entry in manifest["provenance"]
    ]
    n = int(manifest["n_qubits"])
    if B.shape != (1 << n, manifest["dimension"]) or len(prov) != B.shape[1]:
        raise ValueError(f"inconsistent checkpoint contents in {root}")
    return KrylovSubspace(B, d, e, prov, n), manifest.get("params", {})
