"""Time-domain simulator standing in for hardware."""

from .backend import BackendError, BackendModel, ReadoutIQ, parse_operator, pauli_expression
from .devices import cr_demo_backend, zx_test_backend
from .engine import SimResult, UnboundChannelError, evolve_superoperator, evolve_unitary, simulate

__all__ = [
    "BackendError",
    "BackendModel",
    "ReadoutIQ",
    "SimResult",
    "UnboundChannelError",
    "cr_demo_backend",
    "evolve_superoperator",
    "evolve_unitary",
    "parse_operator",
    "pauli_expression",
    "simulate",
    "zx_test_backend",
]
