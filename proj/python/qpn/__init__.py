"""Quantum Petri nets: annotated nets, unfolding, drop-condition checks and composition."""

from ._core import (
    FORMAT_VERSION,
    Net,
    QpnError,
    QuantumMap,
    certify,
    check_drop,
    compose,
    compose_parallel,
    evaluate,
    identity_map,
    join,
    max_dimension,
    oracle,
    set_max_dimension,
    tensor,
    unfold,
    validate,
    validate_join,
)

__all__ = [
    "FORMAT_VERSION",
    "Net",
    "QpnError",
    "QuantumMap",
    "certify",
    "check_drop",
    "compose",
    "compose_parallel",
    "evaluate",
    "identity_map",
    "join",
    "max_dimension",
    "oracle",
    "set_max_dimension",
    "tensor",
    "unfold",
    "validate",
    "validate_join",
]
