"""Conclusive fidelity membership decisions from informationally incomplete measurements."""
from __future__ import annotations

__version__ = "0.1.0"

from .membership import (MembershipDecision, Partition, ReferenceSpec, Side,  # noqa: E402
                         UnsolvablePovmError, decide, overlap_estimates, solvable_general,
                         solvable_pure, sweep)
from .optimizer import FitProblem, FitResult, LinearConstraint, Status, constrained_l1_fit  # noqa: E402
from .povm import BasisSetting, MeasurementRecord, Povm, povm_from_settings  # noqa: E402
from .states import fidelity, named_state, projector, werner_state  # noqa: E402

__all__ = [
    "BasisSetting", "FitProblem", "FitResult", "LinearConstraint", "MeasurementRecord",
    "MembershipDecision", "Partition", "Povm", "ReferenceSpec", "Side", "Status",
    "UnsolvablePovmError", "constrained_l1_fit", "decide", "fidelity", "named_state",
    "overlap_estimates", "povm_from_settings", "projector", "solvable_general", "solvable_pure",
    "sweep", "werner_state",
]
