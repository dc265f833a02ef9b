"""One-shot formation cost and distillation yield.

Three kinds of results live here:

* ladder bounds, where a threshold dimension is picked from the reference
  family by comparing a measure of the input state against measures of the
  reference states;
* achievability constructions, which build the corresponding channel as an
  explicit Choi matrix and verify it (:class:`ConversionCertificate`);
* an exact feasibility oracle over Choi matrices, used to sandwich the bounds.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import core
from .config import TOL, Tolerances
from .conic import Model, choi_apply, inner
from .core import ChannelChoi
from .errors import CertificateError, PreconditionError
from .measures import (INF, clean_state, free_cone, free_fidelity, free_robustness, lambda_measure,
                       log2, resource_measure, smooth_dmin_heuristic, smooth_measure)
from .theories import (DepolarizingPseudo, DiagonalSimplex, FreeStateSet, GibbsSingleton,
                       ReferenceFamily, RdMapSpec, SeparablePPT2x2, Theory, VertexPolytope,
                       ct_spread, membership, membership_residual, span_rank)

FORMATION_VARIANTS = ("dmax", "lr", "dmax_lambda")
FORMATION_MAPS = ("ct_map", "ffr_map", "comm_ct_map")
DISTILLATION_UPPER = ("ng", "comm", "input_error_dmin", "input_error_dh")
DISTILLATION_MAPS = ("robustness_map", "isotropic_map", "pseudo_comm_depol",
                     "input_error_robustness", "input_error_isotropic")


# ---------------------------------------------------------------------------
# reports


@dataclass
class BoundReport:
    """A ladder bound.

    ``rule`` names how ``d0`` is picked from ``ladder_values`` and
    ``threshold``: ``min_ge`` is the smallest d with value >= threshold,
    ``max_le`` the largest d with value <= threshold and ``max_ge`` the
    largest d with value >= threshold (all with ``slack``).
    """

    task: str
    direction: str
    variant: str
    d0: int | None
    value: float | None
    log_d0: float | None
    epsilon: float
    theory: str
    family: str
    ladder: tuple
    resource: float | None = None
    threshold: float | None = None
    ladder_values: dict = field(default_factory=dict)
    rule: str = ""
    slack: float = 0.0
    reason: str | None = None
    estimated: bool = False
    extra: dict = field(default_factory=dict)

    def recompute_d0(self) -> int | None:
        return pick_dimension(self.ladder, self.ladder_values, self.threshold, self.rule, self.slack)

    def to_json(self) -> dict:
        from .io import jsonable
        return jsonable({
            "task": self.task, "direction": self.direction, "variant": self.variant,
            "d0": self.d0, "value": self.value, "log_d0": self.log_d0, "bits": True,
            "epsilon": self.epsilon, "theory": self.theory, "family": self.family,
            "ladder": list(self.ladder), "resource": self.resource, "threshold": self.threshold,
            "ladder_values": {str(k): v for k, v in self.ladder_values.items()},
            "rule": self.rule, "slack": self.slack, "reason": self.reason,
            "estimated": self.estimated, "extra": self.extra})


@dataclass
class ConversionCertificate:
    channel: ChannelChoi
    construction: str
    min_choi_eig: float
    tp_residual: float
    freeness: dict
    commutation: float | None
    fidelity: float
    epsilon: float
    valid: bool
    failures: list = field(default_factory=list)

    def to_json(self) -> dict:
        from .io import jsonable, matrix_to_json
        return {"construction": self.construction,
                "choi": matrix_to_json(self.channel.J, kind="choi"),
                "d_in": self.channel.d_in, "d_out": self.channel.d_out,
                "min_choi_eig": jsonable(self.min_choi_eig), "tp_residual": jsonable(self.tp_residual),
                "freeness": jsonable(self.freeness), "commutation": jsonable(self.commutation),
                "fidelity": jsonable(self.fidelity), "epsilon": jsonable(self.epsilon),
                "valid": self.valid, "failures": list(self.failures)}


@dataclass
class OracleResult:
    feasible: bool
    fidelity: float
    threshold: float
    witness: ChannelChoi | None
    one_sided: bool
    op_class: str
    status: str = "optimal"

    def to_json(self) -> dict:
        from .io import jsonable, matrix_to_json
        return {"feasible": self.feasible, "fidelity": jsonable(self.fidelity),
                "threshold": jsonable(self.threshold), "one_sided": self.one_sided,
                "op_class": self.op_class, "status": self.status,
                "witness": None if self.witness is None else matrix_to_json(self.witness.J, kind="choi")}


@dataclass
class SandwichReport:
    task: str
    lower: float
    exact: float
    upper: float
    ok: bool
    diagnostic: str
    reports: dict = field(default_factory=dict)

    @property
    def triple(self) -> tuple[float, float, float]:
        return self.lower, self.exact, self.upper

    def to_json(self) -> dict:
        from .io import jsonable
        return jsonable({"task": self.task, "lower": self.lower, "exact": self.exact,
                         "upper": self.upper, "ok": self.ok, "diagnostic": self.diagnostic,
                         "reports": self.reports})


# ---------------------------------------------------------------------------
# ladder scans


def pick_dimension(ladder, values: dict, threshold, rule: str, slack: float) -> int | None:
    if threshold is None:
        return None
    if rule == "min_ge":
        hits = [d for d in ladder if d in values and values[d] >= threshold - slack]
        return min(hits) if hits else None
    if rule == "max_le":
        hits = [d for d in ladder if d in values and values[d] <= threshold + slack]
        return max(hits) if hits else None
    if rule == "max_ge":
        hits = [d for d in ladder if d in values and values[d] >= threshold - slack]
        return max(hits) if hits else None
    raise ValueError(f"unknown ladder rule {rule!r}")


def _scan(ladder, measure: Callable[[int], float], threshold: float, rule: str,
          slack: float) -> tuple[int | None, dict]:
    """Evaluate reference measures in scan order, stopping at the first hit.

    Ascending for ``min_*`` rules and descending for ``max_*`` rules, so every
    dimension that could beat the answer has been evaluated and echoed.
    """
    order = list(ladder) if rule.startswith("min") else list(reversed(ladder))
    values: dict = {}
    for d in order:
        values[d] = measure(d)
        if pick_dimension([d], values, threshold, rule, slack) is not None:
            return d, values
    return None, values


def _ratio(resource: float, measure: float, d: int) -> float:
    """resource / m with m = measure / log d."""
    if measure <= 0:
        return 0.0 if resource <= 0 else INF
    return resource * math.log2(d) / measure


def _as_theory(theory) -> Theory:
    if isinstance(theory, FreeStateSet):
        F = theory
        return Theory(getattr(F, "kind", "free_set"), F.dim,
                      lambda d: F if d == F.dim else _no_dim(F, d))
    return theory


def _context(theory, family: ReferenceFamily | None) -> tuple[Theory, ReferenceFamily]:
    theory = _as_theory(theory)
    family = family if family is not None else theory.family
    if family is None:
        raise PreconditionError("a reference family is required", "needs_family")
    return theory, family


def _no_dim(F, d):
    raise PreconditionError(f"free set has dimension {F.dim}, not {d}", "unsupported_dimension")


def _rd_at(theory: Theory, spec) -> Callable[[int], RdMapSpec]:
    if spec is None:
        if theory.rd_map_at is None:
            raise PreconditionError("this variant needs a resource destroying map", "needs_rd_map")
        return theory.rd_map
    if callable(spec) and not isinstance(spec, RdMapSpec):
        return spec
    return lambda d: spec if d == spec.dim else _rd_dim_error(spec, d)


def _rd_dim_error(spec, d):
    raise PreconditionError(f"resource destroying map acts on dimension {spec.dim}, not {d}",
                            "unsupported_dimension")


def _base(task, direction, variant, eps, theory, family, **kw) -> BoundReport:
    return BoundReport(task, direction, variant, None, None, None, float(eps), theory.ident(),
                       family.tag, tuple(family.ladder), **kw)


def _finish(rep: BoundReport, d0: int | None, value: float | None, reason: str = "ladder_exhausted"):
    rep.d0 = d0
    if d0 is None:
        rep.reason = reason
        return rep
    rep.log_d0 = math.log2(d0)
    rep.value = value
    return rep


def _is_ffr(F: FreeStateSet) -> bool:
    if isinstance(F, SeparablePPT2x2):
        return True
    if isinstance(F, VertexPolytope):
        return span_rank(F) == F.dim ** 2
    return F.dim == 1


def _is_affine(F: FreeStateSet) -> bool:
    return isinstance(F, (DiagonalSimplex, GibbsSingleton))


def _require_ct(theory: Theory, family: ReferenceFamily, ladder=None, tol: float = 1e-10) -> dict:
    spreads = {}
    for d in (ladder or family.ladder):
        spreads[d] = ct_spread(theory.free_set(d), family.state(d))
        if spreads[d] > tol:
            raise PreconditionError(f"reference state at d={d} has non-constant overlap with free "
                                    f"states (spread {spreads[d]:.3g})", "ct_fails")
    return spreads


def _state(rho, tol) -> np.ndarray:
    return core.density_matrix(rho, tol=tol)


# ---------------------------------------------------------------------------
# formation


def _neg_log_free_fidelity(theory: Theory, family: ReferenceFamily, tol) -> Callable[[int], float]:
    return lambda d: -log2(free_fidelity(family.state(d), theory.free_set(d), tol).value)


def formation_lower_bound(rho, theory, eps: float = 0.0, variant: str = "dmax",
                          family: ReferenceFamily | None = None, spec=None,
                          tol: Tolerances = TOL) -> BoundReport:
    """Smallest reference dimension whose resource reaches the smoothed
    resource of the target; the cost is at least log d0."""
    theory, family = _context(theory, family)
    rho = _state(rho, tol)
    n = rho.shape[0]
    F = theory.free_set(n)
    rep = _base("formation", "lower", variant, eps, theory, family, rule="min_ge",
                slack=tol.ladder_slack)
    if variant == "dmax":
        resource = smooth_measure(rho, F, eps, "dmax", tol=tol).value

        def measure(d):
            return resource_measure(family.state(d), theory.free_set(d), "dmax", tol=tol).value
    elif variant == "lr":
        if _is_affine(F):
            raise PreconditionError("log-robustness is infinite on affine free sets", "affine_theory")
        if not _is_ffr(F):
            raise PreconditionError("log-robustness bound needs finite free robustness", "needs_ffr")
        resource = smooth_measure(rho, F, eps, "lr", tol=tol).value

        def measure(d):
            return free_robustness(family.state(d), theory.free_set(d), tol).optimizer["LR"]
    elif variant == "dmax_lambda":
        rd = _rd_at(theory, spec)
        resource = lambda_measure(rho, rd(n), "dmax", eps, F=F, tol=tol).value

        def measure(d):
            return lambda_measure(family.state(d), rd(d), "dmax", F=theory.free_set(d), tol=tol).value
    else:
        raise PreconditionError(f"unknown formation variant {variant!r}", "bad_variant")
    rep.resource = rep.threshold = resource
    d0, values = _scan(family.ladder, measure, resource, "min_ge", tol.ladder_slack)
    rep.ladder_values = values
    return _finish(rep, d0, None if d0 is None else _ratio(resource, values[d0], d0))


def formation_achievable(rho, theory, eps: float = 0.0, variant: str = "ct_map",
                         family: ReferenceFamily | None = None, spec=None,
                         tol: Tolerances = TOL) -> tuple[BoundReport, ConversionCertificate | None]:
    """Build a formation channel from the smallest qualifying reference state.

    Returns the bound and the verified certificate (None when no dimension
    qualifies).  A construction that fails verification raises
    :class:`CertificateError`.
    """
    theory, family = _context(theory, family)
    if not family.is_pure():
        raise PreconditionError("formation maps need pure reference states", "reference_not_pure")
    rho = _state(rho, tol)
    n = rho.shape[0]
    F = theory.free_set(n)
    rep = _base("formation", "upper", variant, eps, theory, family, rule="min_ge",
                slack=tol.ladder_slack)
    spec_at = None
    if variant == "ct_map":
        rep.extra["ct_spread"] = _require_ct(theory, family)
        mrep = smooth_measure(rho, F, eps, "dmax", tol=tol)
        rho_eps, delta = mrep.optimizer.get("rho_eps", rho), mrep.optimizer.get("sigma")
    elif variant == "ffr_map":
        if _is_affine(F) or not _is_ffr(F):
            raise PreconditionError("the robustness formation map needs finite free robustness",
                                    "needs_ffr")
        mrep = smooth_measure(rho, F, eps, "lr", tol=tol)
        rho_eps, delta = mrep.optimizer.get("rho_eps", rho), mrep.optimizer.get("delta")
    elif variant == "comm_ct_map":
        rep.extra["ct_spread"] = _require_ct(theory, family)
        spec_at = _rd_at(theory, spec)
        if not spec_at(n).is_channel or spec_at(n).is_pseudo:
            raise PreconditionError("the commuting formation map needs a resource destroying channel",
                                    "needs_rd_channel")
        mrep = lambda_measure(rho, spec_at(n), "dmax", eps, F=F, tol=tol)
        rho_eps = mrep.optimizer.get("rho_eps", rho)
        delta = None
    else:
        raise PreconditionError(f"unknown formation map {variant!r}", "bad_variant")
    resource = mrep.value
    rep.resource = rep.threshold = resource
    rep.extra["measure"] = mrep.kind or variant
    if not math.isfinite(resource):
        return _finish(rep, None, None, "infinite_resource"), None
    d0, values = _scan(family.ladder, _neg_log_free_fidelity(theory, family, tol), resource,
                       "min_ge", tol.ladder_slack)
    rep.ladder_values = values
    if d0 is None:
        return _finish(rep, None, None), None
    down, _ = family.neighbors(d0)
    if down is not None:
        value = _ratio(resource, values[down], down) + math.log2(d0 / down)
        rep.extra["d0_down"] = down
    else:
        value = math.log2(d0)
        rep.extra["note"] = "no lower ladder neighbour; only the log d0 form applies"
    _finish(rep, d0, value)

    phi = family.state(d0)
    c = 2.0 ** -values[d0]
    if variant == "ffr_map":
        reject = delta
    else:
        if c >= 1 - 1e-12:
            raise PreconditionError("reference state is free", "free_reference")
        other = delta if variant == "ct_map" else clean_state(spec_at(n).apply(rho_eps))
        reject = (other - c * rho_eps) / (1 - c)
    E = two_outcome_channel(phi, rho_eps, reject)
    cert = certify(E, theory.free_set(d0), F, source=phi, target=rho, eps=eps,
                   construction=variant, segment=(phi, rho_eps, reject),
                   spec_in=None if spec_at is None else spec_at(d0),
                   spec_out=None if spec_at is None else spec_at(n), tol=tol)
    return rep, cert


# ---------------------------------------------------------------------------
# distillation


def distillation_upper_bound(rho, theory, eps: float = 0.0, variant: str = "ng",
                             family: ReferenceFamily | None = None, spec=None,
                             tol: Tolerances = TOL, seed: int = 0) -> BoundReport:
    theory, family = _context(theory, family)
    rho = _state(rho, tol)
    n = rho.shape[0]
    F = theory.free_set(n)
    task = "distillation-input-error" if variant.startswith("input_error") else "distillation"
    rep = _base(task, "upper", variant, eps, theory, family, slack=tol.ladder_slack)
    if variant == "ng":
        if not family.is_pure():
            raise PreconditionError("this bound needs pure reference states", "reference_not_pure")
        resource = resource_measure(rho, F, "dH", eps, tol).value
        rep.rule, threshold = "max_le", resource
        measure = _neg_log_free_fidelity(theory, family, tol)
    elif variant == "comm":
        if not family.is_pure():
            raise PreconditionError("this bound needs pure reference states", "reference_not_pure")
        rd = _rd_at(theory, spec)
        if not rd(n).is_channel or rd(n).is_pseudo:
            raise PreconditionError("the commuting bound needs a resource destroying channel",
                                    "needs_rd_channel")
        resource = lambda_measure(rho, rd(n), "dH", eps, tol=tol).value
        threshold = 2.0 ** -resource - 2 * math.sqrt(eps)
        rep.rule = "max_ge"
        rep.resource, rep.threshold = resource, threshold
        if threshold <= 0:
            return _finish(rep, None, None, "unbounded_by_criterion")

        def measure(d):
            return lambda_measure(family.state(d), rd(d), "f", tol=tol).value
    elif variant in ("input_error_dmin", "input_error_dh"):
        if variant == "input_error_dmin":
            resource = smooth_dmin_heuristic(rho, F, eps, tol, seed).value
            rep.estimated = eps > 0
        else:
            resource = resource_measure(rho, F, "dH", eps, tol).value
        rep.rule, threshold = "max_le", resource

        def measure(d):
            return resource_measure(family.state(d), theory.free_set(d), "dmin", tol=tol).value
    else:
        raise PreconditionError(f"unknown distillation bound {variant!r}", "bad_variant")
    rep.resource, rep.threshold = resource, threshold
    d0, values = _scan(family.ladder, measure, threshold, rep.rule, tol.ladder_slack)
    rep.ladder_values = values
    if d0 is None:
        return _finish(rep, None, None)
    if variant == "comm":
        m = -log2(values[d0])
        value = _ratio(-log2(threshold), m, d0)
    else:
        value = _ratio(resource, values[d0], d0)
    return _finish(rep, d0, value)


def isotropic_threshold(phi: np.ndarray, F: FreeStateSet, tol: Tolerances = TOL) -> float:
    """Smallest p with (1 - p) phi + p I/d in F."""
    d = phi.shape[0]
    if isinstance(F, GibbsSingleton):
        tau = F.gibbs_state()
        # (1-p) phi + p I/d = tau has at most one solution
        diff = np.eye(d) / d - phi
        k = np.argmax(np.abs(diff))
        p = float(((tau - phi).reshape(-1)[k] / diff.reshape(-1)[k]).real)
        ok = core.max_abs((1 - p) * phi + p * np.eye(d) / d - tau) <= tol.membership_tol
        return p if ok else INF
    m = Model(tol)
    p = m.free()
    x = free_cone(m, F)
    m.add_eq(x, phi + p * (np.eye(d) / d - phi))
    m.minimize(p)
    res = m.solve(require_optimal=False)
    if res.status != "optimal":
        return INF
    return float(res.objective)


def isotropic_dimensions(theory: Theory, family: ReferenceFamily, tol: Tolerances = TOL) -> dict:
    """Ladder dimensions where (I - Phi_d)/(d - 1) is free, with p~_d."""
    out = {}
    for d in family.ladder:
        F = theory.free_set(d)
        phi = family.state(d)
        if d < 2 or not membership(np.eye(d) / d, F, tol).inside:
            continue
        if membership_residual((np.eye(d) - phi) / (d - 1), F) > tol.membership_tol:
            continue
        out[d] = isotropic_threshold(phi, F, tol)
    return out


def two_outcome_channel(test: np.ndarray, accept: np.ndarray, reject: np.ndarray) -> ChannelChoi:
    """``E(w) = Tr(test w) accept + (1 - Tr(test w)) reject``."""
    test = core.herm(np.asarray(test, dtype=complex))
    eye = np.eye(test.shape[0])
    return ChannelChoi.measure_prepare([(test, core.herm(accept)), (eye - test, core.herm(reject))])


def isotropic_channel(test: np.ndarray, phi: np.ndarray) -> ChannelChoi:
    d = phi.shape[0]
    return two_outcome_channel(test, phi, (np.eye(d) - phi) / (d - 1))


def depolarizing_commutation_residual(E: ChannelChoi, p: float) -> float:
    s_in = DepolarizingPseudo(E.d_in, p).superop()
    s_out = DepolarizingPseudo(E.d_out, p).superop()
    s = E.superop()
    return core.max_abs(s_out @ s - s @ s_in)


def _test_operator(P: np.ndarray) -> np.ndarray:
    """Clip a numerically found test operator into 0 <= P <= I."""
    w, v = core.eigh_herm(P)
    return core.herm((v * np.clip(w, 0.0, 1.0)) @ v.conj().T)


def distillation_achievable(rho, theory, eps: float = 0.0, variant: str = "robustness_map",
                            family: ReferenceFamily | None = None, tol: Tolerances = TOL,
                            depolarizing_p: float = 0.5,
                            test_override: np.ndarray | None = None
                            ) -> tuple[BoundReport, ConversionCertificate | None]:
    """Distillation channel for the largest qualifying reference dimension.

    ``test_override`` replaces the optimal test operator; it exists to probe
    the trace condition of the pseudo-commuting construction.
    """
    theory, family = _context(theory, family)
    rho = _state(rho, tol)
    n = rho.shape[0]
    F = theory.free_set(n)
    input_error = variant.startswith("input_error")
    task = "distillation-input-error" if input_error else "distillation"
    rep = _base(task, "lower", variant, eps, theory, family, slack=tol.ladder_slack)
    if variant not in DISTILLATION_MAPS:
        raise PreconditionError(f"unknown distillation map {variant!r}", "bad_variant")
    robust = variant in ("robustness_map", "input_error_robustness")
    if robust and (_is_affine(F) or not _is_ffr(theory.free_set(family.ladder[-1]))):
        raise PreconditionError("the robustness distillation map needs finite free robustness",
                                "needs_ffr")
    iso = {}
    if not robust:
        iso = isotropic_dimensions(theory, family, tol)
        rep.extra["isotropic_thresholds"] = {str(k): v for k, v in iso.items()}
        if not iso:
            raise PreconditionError("no ladder dimension has (I - Phi_d)/(d - 1) free",
                                    "isotropic_set_empty")

    if input_error:
        if not core.is_pure(rho, 1e-9):
            raise PreconditionError("input-error constructions need a pure input", "input_not_pure")
        test = core.projector(core.pure_vector(rho))
        resource = resource_measure(rho, F, "dmin", tol=tol).value
        threshold = 2.0 ** -resource + 2 * math.sqrt(eps)
        rep.rule = "max_ge"
    else:
        dh = resource_measure(rho, F, "dH", eps, tol)
        resource = threshold = dh.value
        test = _test_operator(dh.optimizer["P"])
        rep.rule = "max_le"
    if test_override is not None:
        test = core.herm(np.asarray(test_override, dtype=complex))
    rep.resource, rep.threshold = resource, threshold

    robustness_cache: dict = {}

    def robustness(d):
        if d not in robustness_cache:
            robustness_cache[d] = free_robustness(family.state(d), theory.free_set(d), tol)
        return robustness_cache[d]

    if robust:
        ladder = family.ladder

        def measure(d):
            lr = robustness(d).optimizer["LR"]
            return 2.0 ** -lr if input_error else lr
    else:
        ladder = tuple(d for d in family.ladder if d in iso and math.isfinite(iso[d]))

        def measure(d):
            overlap = 1 - iso[d] + iso[d] / d
            return overlap if input_error else -log2(overlap)
    d0, values = _scan(ladder, measure, threshold, rep.rule, tol.ladder_slack)
    rep.ladder_values = values
    if d0 is None:
        return _finish(rep, None, None), None
    _, up = family.neighbors(d0)
    head = -log2(threshold) if input_error else resource
    if up is not None and up in values:
        up_measure = -log2(values[up]) if input_error else values[up]
        value = _ratio(head, up_measure, up) - math.log2(up / d0)
        rep.extra["d0_up"] = up
    else:
        value = math.log2(d0)
        rep.extra["note"] = "no upper ladder neighbour; only the log d0 form applies"
    _finish(rep, d0, value)

    phi = family.state(d0)
    if robust:
        reject = robustness(d0).optimizer["delta"]
    else:
        rep.extra["p_tilde"] = iso[d0]
        reject = (np.eye(d0) - phi) / (d0 - 1)
    E = two_outcome_channel(test, phi, reject)
    spec_in = spec_out = None
    if variant == "pseudo_comm_depol":
        trace_p = float(np.trace(test).real)
        rep.extra["trace_P"] = trace_p
        if test_override is None and abs(trace_p - n / d0) > 1e-6:
            raise PreconditionError(f"pseudo-commuting map needs Tr P = {n / d0:g}, got {trace_p:.6g}",
                                    "trace_condition")
        spec_in, spec_out = DepolarizingPseudo(n, depolarizing_p), DepolarizingPseudo(d0, depolarizing_p)
    cert = certify(E, F, theory.free_set(d0), source=rho, target=phi, eps=eps,
                   construction=variant, segment=(test, phi, reject), spec_in=spec_in, spec_out=spec_out,
                   input_error=input_error, tol=tol)
    return rep, cert


# ---------------------------------------------------------------------------
# certificates


def _overlap_range(test: np.ndarray, F: FreeStateSet, tol) -> tuple[float, float]:
    if isinstance(F, GibbsSingleton):
        v = float(np.trace(test @ F.gibbs_state()).real)
        return v, v
    if isinstance(F, SeparablePPT2x2):
        vals = []
        for sense in (1.0, -1.0):
            m = Model(tol)
            x = free_cone(m, F)
            m.add_eq(x.trace(), 1.0)
            m.maximize(sense * inner(test, x).real)
            vals.append(sense * m.solve().objective)
        return vals[1], vals[0]
    vals = [float(np.trace(test @ v).real) for v in F.extreme_points()]
    return min(vals), max(vals)


def freeness_evidence(E: ChannelChoi, F_in: FreeStateSet, F_out: FreeStateSet,
                      segment: tuple | None = None, tol: Tolerances = TOL) -> dict:
    """Residuals of E applied to the generators of the input free set.

    ``segment`` is ``(test, accept, reject)`` for two-outcome maps.  Their
    image of the free set is the segment between the outputs at the extreme
    overlaps, so checking both endpoints is complete even for the separable
    set, whose generators are not finite.
    """
    if isinstance(F_in, SeparablePPT2x2):
        points, method = F_in.probe_states(), "probes"
    elif isinstance(F_in, GibbsSingleton):
        points, method = [F_in.gibbs_state()], "gibbs"
    else:
        points, method = F_in.extreme_points(), "vertices"
    residuals = [membership_residual(E.apply(v), F_out) for v in points]
    out = {"method": method, "residuals": residuals}
    worst = max(residuals) if residuals else 0.0
    complete = not isinstance(F_in, SeparablePPT2x2)
    if segment is not None:
        test, accept, reject = segment
        lo, hi = _overlap_range(test, F_in, tol)
        ends = [membership_residual(t * accept + (1 - t) * reject, F_out) for t in (lo, hi)]
        out["overlap_range"] = [lo, hi]
        out["endpoint_residuals"] = ends
        worst = max(worst, *ends)
        complete = True
    out["max"] = worst
    out["complete"] = complete
    return out


def certify(E: ChannelChoi, F_in: FreeStateSet, F_out: FreeStateSet, source: np.ndarray,
            target: np.ndarray, eps: float, construction: str, segment: tuple | None = None,
            spec_in: RdMapSpec | None = None, spec_out: RdMapSpec | None = None,
            input_error: bool = False, tol: Tolerances = TOL, raise_on_failure: bool = True
            ) -> ConversionCertificate:
    """Verify CPTP, freeness (and commutation when maps are given) and the
    output fidelity of a constructed channel."""
    res = core.validate_channel(E, tol)
    free = freeness_evidence(E, F_in, F_out, segment, tol)
    comm = None
    if spec_in is not None and spec_out is not None:
        s = E.superop()
        comm = core.max_abs(spec_out.superop() @ s - s @ spec_in.superop())
    fid = core.fidelity(E.apply(source), target)
    failures = []
    if res.min_eig < -tol.psd_tol:
        failures.append(f"choi min eigenvalue {res.min_eig:.3g}")
    if res.tp_residual > tol.tp_tol:
        failures.append(f"trace preservation residual {res.tp_residual:.3g}")
    if free["max"] > tol.membership_tol:
        failures.append(f"freeness residual {free['max']:.3g}")
    if comm is not None and comm > tol.commutation_tol:
        failures.append(f"commutation residual {comm:.3g}")
    need = 1.0 if input_error else 1 - eps
    if fid < need - tol.fidelity_slack:
        failures.append(f"output fidelity {fid:.12g} below {need:.12g}")
    cert = ConversionCertificate(E, construction, res.min_eig, res.tp_residual, free, comm, fid,
                                 float(eps), not failures, failures)
    if failures and raise_on_failure:
        raise CertificateError(f"{construction} certificate failed: " + "; ".join(failures), cert)
    return cert


# ---------------------------------------------------------------------------
# exact oracle


def _free_generators(F: FreeStateSet) -> tuple[list[np.ndarray], bool]:
    """Input states whose images must be free, and whether that is exact."""
    if isinstance(F, SeparablePPT2x2):
        return F.probe_states(), False
    if isinstance(F, GibbsSingleton):
        return [F.gibbs_state()], True
    return F.extreme_points(), True


def exact_conversion_feasible(rho_in, rho_target, eps: float, theory, op_class: str = "ng",
                              spec=None, tol: Tolerances = TOL) -> OracleResult:
    """Decide whether a free channel maps ``rho_in`` into the fidelity ball of
    ``rho_target``.

    One conic program maximises the root fidelity over Choi matrices that are
    CPTP, send every generator of the input free set into the output free set
    and, for ``op_class="comm"``, commute with the resource destroying map.
    """
    theory = _as_theory(theory)
    rho_in = _state(rho_in, tol)
    rho_target = _state(rho_target, tol)
    d_in, d_out = rho_in.shape[0], rho_target.shape[0]
    F_in, F_out = theory.free_set(d_in), theory.free_set(d_out)
    gens, exact = _free_generators(F_in)
    m = Model(tol)
    J = m.psd(d_in * d_out)
    m.add_eq(J.ptrace((d_in, d_out), [0]), np.eye(d_in))
    for v in gens:
        m.add_eq(choi_apply(J, v, d_in, d_out), free_cone(m, F_out))
    if op_class == "comm":
        rd = _rd_at(theory, spec)
        lam_in, lam_out = rd(d_in), rd(d_out)
        if isinstance(lam_in, DepolarizingPseudo) or not (lam_in.is_channel and lam_out.is_channel):
            raise PreconditionError("the oracle needs a linear resource destroying channel",
                                    "needs_rd_channel")
        s_in, s_out = lam_in.superop(), lam_out.superop()
        from .conic import herm_basis
        basis = herm_basis(d_in)
        for k in range(basis.shape[2]):
            h = basis[:, :, k]
            lhs = choi_apply(J, h, d_in, d_out).reshape(d_out * d_out)._lift(lambda a: a @ s_out.T)
            rhs = choi_apply(J, core.apply_superop(s_in, h), d_in, d_out).reshape(d_out * d_out)
            m.add_eq(lhs - rhs, np.zeros(d_out * d_out))
    elif op_class != "ng":
        raise PreconditionError(f"unknown operation class {op_class!r}", "bad_op_class")
    out = choi_apply(J, rho_in, d_in, d_out)
    if core.is_pure(rho_target, 1e-12):
        m.maximize(inner(rho_target, out).real)
        root = False
    else:
        block = m.psd(2 * d_out)
        m.add_eq(block[:d_out, :d_out], out)
        m.add_eq(block[d_out:, d_out:], rho_target)
        m.maximize(block[:d_out, d_out:].trace().real)
        root = True
    res = m.solve(require_optimal=False)
    if res.status != "optimal":
        return OracleResult(False, float("nan"), 1 - eps, None, not exact, op_class, res.status)
    val = res.objective ** 2 if root else res.objective
    val = min(max(val, 0.0), 1.0)
    threshold = 1 - eps
    feasible = val >= threshold - tol.feas_tol
    witness = ChannelChoi(d_in, d_out, core.herm(res.value(J))) if feasible else None
    return OracleResult(feasible, val, threshold, witness, not exact, op_class)


def one_shot_rate_exact(rho, theory, eps: float = 0.0, task: str = "formation", op_class: str = "ng",
                        family: ReferenceFamily | None = None, spec=None,
                        tol: Tolerances = TOL) -> BoundReport:
    """Exact one-shot rate over the ladder from the feasibility oracle."""
    theory, family = _context(theory, family)
    rho = _state(rho, tol)
    rep = _base(task, "exact", op_class, eps, theory, family)
    feasible = {}
    if task == "formation":
        order = list(family.ladder)
        for d in order:
            r = exact_conversion_feasible(family.state(d), rho, eps, theory, op_class, spec, tol)
            feasible[d] = r.feasible
            if r.feasible:
                rep.extra["oracle"] = {str(k): v for k, v in feasible.items()}
                rep.extra["one_sided"] = r.one_sided
                return _finish(rep, d, math.log2(d))
    elif task == "distillation":
        for d in reversed(family.ladder):
            r = exact_conversion_feasible(rho, family.state(d), eps, theory, op_class, spec, tol)
            feasible[d] = r.feasible
            if r.feasible:
                rep.extra["oracle"] = {str(k): v for k, v in feasible.items()}
                rep.extra["one_sided"] = r.one_sided
                return _finish(rep, d, math.log2(d))
    else:
        raise PreconditionError(f"unknown task {task!r}", "bad_task")
    rep.extra["oracle"] = {str(k): v for k, v in feasible.items()}
    return _finish(rep, None, None, "no_feasible_dimension")


def _formation_upper_variant(theory: Theory, family: ReferenceFamily, F: FreeStateSet) -> str | None:
    try:
        _require_ct(theory, family)
        return "ct_map"
    except PreconditionError:
        pass
    if not _is_affine(F) and _is_ffr(F):
        return "ffr_map"
    return None


def sandwich_check(rho, theory, eps: float = 0.0, task: str = "formation",
                   family: ReferenceFamily | None = None, slack: float = 1e-6,
                   tol: Tolerances = TOL) -> SandwichReport:
    """Check lower <= exact <= upper for one instance.

    All three entries are log d in bits.  A formation cost with no qualifying
    dimension is +inf; a distillation yield with none is 0.
    """
    theory, family = _context(theory, family)
    rho = _state(rho, tol)
    F = theory.free_set(rho.shape[0])
    reports: dict = {}
    exact = one_shot_rate_exact(rho, theory, eps, task, "ng", family, tol=tol)
    reports["exact"] = exact
    if task == "formation":
        low = formation_lower_bound(rho, theory, eps, "dmax", family, tol=tol)
        reports["lower"] = low
        lower = low.log_d0 if low.d0 is not None else INF
        exact_v = exact.log_d0 if exact.d0 is not None else INF
        variant = _formation_upper_variant(theory, family, F)
        upper = INF
        if variant is not None:
            up, cert = formation_achievable(rho, theory, eps, variant, family, tol=tol)
            reports["upper"], reports["certificate"] = up, cert
            if up.d0 is not None:
                upper = up.log_d0
    elif task == "distillation":
        up = distillation_upper_bound(rho, theory, eps, "ng", family, tol=tol)
        reports["upper"] = up
        upper = up.log_d0 if up.d0 is not None else 0.0
        exact_v = exact.log_d0 if exact.d0 is not None else 0.0
        lower = 0.0
        for variant in ("robustness_map", "isotropic_map"):
            try:
                lo, cert = distillation_achievable(rho, theory, eps, variant, family, tol=tol)
            except PreconditionError as exc:
                reports[f"lower:{variant}"] = {"skipped": exc.reason}
                continue
            reports[f"lower:{variant}"] = lo
            if lo.d0 is not None:
                lower = max(lower, lo.log_d0)
    else:
        raise PreconditionError(f"unknown task {task!r}", "bad_task")
    problems = []
    if not lower <= exact_v + slack:
        problems.append(f"lower {lower} exceeds exact {exact_v}")
    if not exact_v <= upper + slack:
        problems.append(f"exact {exact_v} exceeds upper {upper}")
    diag = "ordered" if not problems else "; ".join(problems)
    return SandwichReport(task, lower, exact_v, upper, not problems, diag, reports)
