"""Central numerical tolerances.

Every module reads its thresholds from a :class:`Tolerances` instance.  The
process-wide default can be switched with the ``QRT_TOL_PROFILE`` environment
variable, which holds either a profile name (``default``, ``strict``,
``loose``) or a path to a JSON object of field overrides.
"""
from __future__ import annotations

import dataclasses
import json
import os
from dataclasses import dataclass
from pathlib import Path

ENV_VAR = "QRT_TOL_PROFILE"


@dataclass(frozen=True)
class Tolerances:
    herm_tol: float = 1e-10
    psd_tol: float = 1e-9
    trace_tol: float = 1e-9
    tp_tol: float = 1e-9
    rank_tol: float = 1e-9
    support_tol: float = 1e-9
    eq_tol: float = 1e-8
    opt_tol: float = 1e-6
    # absolute slack, in bits, used when comparing measure values on a ladder
    ladder_slack: float = 1e-7
    # slack on the root-fidelity (or overlap) threshold of the feasibility oracle
    feas_tol: float = 1e-7
    membership_tol: float = 1e-7
    commutation_tol: float = 1e-8
    fidelity_slack: float = 1e-8
    # interior point stopping tolerances handed to the conic backend
    solver_gap: float = 1e-10
    solver_feas: float = 1e-10
    solver_max_iter: int = 300

    def replace(self, **changes) -> "Tolerances":
        return dataclasses.replace(self, **changes)


PROFILES: dict[str, Tolerances] = {
    "default": Tolerances(),
    "strict": Tolerances(psd_tol=1e-10, trace_tol=1e-10, tp_tol=1e-10,
                         eq_tol=1e-9, ladder_slack=1e-8, feas_tol=1e-8),
    "loose": Tolerances(psd_tol=1e-7, trace_tol=1e-7, tp_tol=1e-7,
                        eq_tol=1e-6, ladder_slack=1e-6, feas_tol=1e-6,
                        membership_tol=1e-6, commutation_tol=1e-6,
                        solver_gap=1e-8, solver_feas=1e-8),
}


def load_profile(spec: str) -> Tolerances:
    """Resolve a profile name or a JSON override file into tolerances."""
    if spec in PROFILES:
        return PROFILES[spec]
    path = Path(spec)
    if not path.is_file():
        raise ValueError(f"unknown tolerance profile {spec!r}")
    overrides = json.loads(path.read_text())
    base = PROFILES[overrides.pop("profile", "default")]
    valid = {f.name for f in dataclasses.fields(Tolerances)}
    unknown = set(overrides) - valid
    if unknown:
        raise ValueError(f"unknown tolerance fields: {sorted(unknown)}")
    return base.replace(**overrides)


def default_tolerances() -> Tolerances:
    spec = os.environ.get(ENV_VAR)
    return load_profile(spec) if spec else PROFILES["default"]


TOL = default_tolerances()
