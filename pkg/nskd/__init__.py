"""
nskd - Key Distribution Against Non-Signaling Adversaries

This package provides:
- Conditional boxes, non-signaling validation and depolarization (boxcore)
- Eavesdropper box partitions and their distance from uniform (partition)
- The XOR-distance linear program with exact dual certificates (lpcert)
- Key rates and an end-to-end protocol simulator (protocol)
- JSON formats and a command-line front end (serialization, cli)
"""

from .boxcore import (ConditionalBox, chsh_error, depolarize, is_local, make_isotropic_box,
                      make_pr_box, make_quantum_box, make_singlet_box, tensor_boxes,
                      validate_nonsignaling)
from .errors import (DimensionError, DomainError, InfeasibleError, NskdError, PreconditionError,
                     SolverError, UnboundedError)
from .lpcert import (build_xor_primal, certified_xor_bound, solve_lp, tensor_certificate,
                     verify_certificate)
from .partition import (BoxPartition, collective_attack, distance_from_uniform, product_attack,
                        single_box_attack, validate_partition)
from .protocol import ProtocolConfig, Transcript, key_rate, run_protocol

__version__ = "1.0.0"

__all__ = [
    "ConditionalBox", "chsh_error", "depolarize", "is_local", "make_isotropic_box", "make_pr_box",
    "make_quantum_box", "make_singlet_box", "tensor_boxes", "validate_nonsignaling",
    "DimensionError", "DomainError", "InfeasibleError", "NskdError", "PreconditionError",
    "SolverError", "UnboundedError",
    "build_xor_primal", "certified_xor_bound", "solve_lp", "tensor_certificate", "verify_certificate",
    "BoxPartition", "collective_attack", "distance_from_uniform", "product_attack",
    "single_box_attack", "validate_partition",
    "ProtocolConfig", "Transcript", "key_rate", "run_protocol",
]
