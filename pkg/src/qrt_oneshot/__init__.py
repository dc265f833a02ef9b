"""One-shot resource theory toolkit: divergences and resource measures over
free sets, golden reference states, and one-shot formation and distillation
bounds with certified channel constructions."""
from .config import TOL, Tolerances
from .errors import CertificateError, PreconditionError
from .golden import find_golden_state, golden_thermo, verify_collapse
from .measures import (d_hypothesis, d_max, d_min, free_fidelity, free_robustness, rel_entropy,
                       resource_measure, smooth_measure)
from .tasks import (distillation_achievable, distillation_upper_bound, exact_conversion_feasible,
                    formation_achievable, formation_lower_bound, one_shot_rate_exact, sandwich_check)
from .theories import builtin_theory, classify_theory

__version__ = "0.1.0"

__all__ = [
    "TOL", "Tolerances", "CertificateError", "PreconditionError",
    "find_golden_state", "golden_thermo", "verify_collapse",
    "d_hypothesis", "d_max", "d_min", "free_fidelity", "free_robustness", "rel_entropy",
    "resource_measure", "smooth_measure",
    "distillation_achievable", "distillation_upper_bound", "exact_conversion_feasible",
    "formation_achievable", "formation_lower_bound", "one_shot_rate_exact", "sandwich_check",
    "builtin_theory", "classify_theory",
]
