"""FSM-guided smart contract generation: SmartFSM model and checks, staged
prompting with compile/security feedback, risk scoring, and dataset tools."""

from .fsm import SmartFsm, extract_sets, parse_fsm, serialize_fsm
from .validate import CheckReport, ValidatorConfig, Violation, validate

__version__ = "0.1.0"

__all__ = [
    "CheckReport",
    "SmartFsm",
    "ValidatorConfig",
    "Violation",
    "extract_sets",
    "parse_fsm",
    "serialize_fsm",
    "validate",
]
