"""Online transaction admission for payment channels."""

__version__ = "0.1.0"

from .core import (  # noqa: E402
    ChannelConfig,
    Decision,
    PolicyKind,
    Reason,
    apply,
    exp_decide,
    greedy_decide,
    threshold_f,
    validate_config,
)

__all__ = [
    "ChannelConfig",
    "Decision",
    "PolicyKind",
    "Reason",
    "apply",
    "exp_decide",
    "greedy_decide",
    "threshold_f",
    "validate_config",
]
