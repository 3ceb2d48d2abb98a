"""Alert-flood distillation: templating, correlation graphs, incident
partitioning and factor-graph scoring with analyst evidence feedback."""

from .model import (
    Alert,
    AlertSource,
    GeneralizedAlert,
    Tactic,
    TransitionMatrix,
    default_transition_matrix,
)

__version__ = "0.1.0"

__all__ = [
    "Alert",
    "AlertSource",
    "GeneralizedAlert",
    "Tactic",
    "TransitionMatrix",
    "default_transition_matrix",
    "__version__",
]
