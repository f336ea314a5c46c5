"""Krylov-subspace fast-forwarding of closed- and open-system spin dynamics."""

from .pauli import PauliString, PauliSum, apply, from_triples, heisenberg_xyz, to_dense
from .states import (
    EvolutionParams,
    StateVector,
    argmax_bitstring,
    basis_state,
    exact_evolve,
    imaginary_time_apply,
    inner,
    neel_state,
    trotter_evolve,
)
from .krylov import (
    BuildReport,
    ChainSpec,
    EigenSolution,
    FFSolution,
    KrylovSubspace,
    OverlapRankError,
    Provenance,
    QDavidsonParams,
    StopRule,
    build_subspace_matrices,
    fast_forward,
    fidelity,
    load_subspace,
    mrk_build,
    mrqd_build,
    observable,
    qdavidson_build,
    qdavidson_step,
    reconstruct,
    regularized_solve,
    residue_norm,
    save_subspace,
    subspace_from_states,
)
from .lindblad import (
    DensityVector,
    LindbladSpec,
    LiouvillianOp,
    build_liouvillian,
    density_from_state,
    devectorize,
    expectation,
    lindblad_exact_propagate,
    liouvillian_chain,
    open_fast_forward,
    site_collapse,
    trotter_liouvillian_step,
    vectorize,
)

__version__ = "0.1.0"

__all__ = [
    "PauliString",
    "PauliSum",
    "apply",
    "from_triples",
    "heisenberg_xyz",
    "to_dense",
    "EvolutionParams",
    "StateVector",
    "argmax_bitstring",
    "basis_state",
    "exact_evolve",
    "imaginary_time_apply",
    "inner",
    "neel_state",
    "trotter_evolve",
    "BuildReport",
    "ChainSpec",
    "EigenSolution",
    "FFSolution",
    "KrylovSubspace",
    "OverlapRankError",
    "Provenance",
    "QDavidsonParams",
    "StopRule",
    "build_subspace_matrices",
    "fast_forward",
    "fidelity",
    "load_subspace",
    "mrk_build",
    "mrqd_build",
    "observable",
    "qdavidson_build",
    "qdavidson_step",
    "reconstruct",
    "regularized_solve",
    "residue_norm",
    "save_subspace",
    "subspace_from_states",
    "DensityVector",
    "LindbladSpec",
    "LiouvillianOp",
    "build_liouvillian",
    "density_from_state",
    "devectorize",
    "expectation",
    "lindblad_exact_propagate",
    "liouvillian_chain",
    "open_fast_forward",
    "site_collapse",
    "trotter_liouvillian_step",
    "vectorize",
    "__version__",
]
