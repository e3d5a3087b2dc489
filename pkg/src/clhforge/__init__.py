"""Approximate ground energies of commuting local Hamiltonians on locally-expanding
interaction graphs, with checkable witnesses and depth-two state preparation."""

from .algebra import (
    algebra_center,
    algebra_closure,
    block_tensor_factorization,
    bv_decompose_qudit,
    central_projectors,
    induced_algebra,
)
from .circuit import apply_circuit, build_circuit
from .graph import (
    build_interaction_graph,
    degree_one_fraction,
    isolation_penalty,
    local_expansion_error,
    neighbor_set,
)
from .isolation import ExactProver, LowestIndexOracle, isolate_term, run_isolation
from .model import (
    CLHInstance,
    LocalTerm,
    QuditInfo,
    detect_trivial_factor,
    energy_of_state,
    load_instance,
    save_instance,
    validate_instance,
)
from .oracle import assemble, full_spectrum, ground_energy, ground_projector, integrality_check
from .witness import load_witness, save_witness, verify_witness

__all__ = [
    "algebra_center",
    "algebra_closure",
    "block_tensor_factorization",
    "bv_decompose_qudit",
    "central_projectors",
    "induced_algebra",
    "apply_circuit",
    "build_circuit",
    "build_interaction_graph",
    "degree_one_fraction",
    "isolation_penalty",
    "local_expansion_error",
    "neighbor_set",
    "ExactProver",
    "LowestIndexOracle",
    "isolate_term",
    "run_isolation",
    "CLHInstance",
    "LocalTerm",
    "QuditInfo",
    "detect_trivial_factor",
    "energy_of_state",
    "load_instance",
    "save_instance",
    "validate_instance",
    "assemble",
    "full_spectrum",
    "ground_energy",
    "ground_projector",
    "integrality_check",
    "load_witness",
    "save_witness",
    "verify_witness",
]

__version__ = "0.1.0"
