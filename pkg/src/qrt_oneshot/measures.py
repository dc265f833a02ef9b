"""Divergences, resource monotones and their smoothed variants.

Every value is in bits.  Measures over a free set are returned as
:class:`MeasureReport` objects carrying the optimizer that attains them, so
later stages never re-solve.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
import numpy as np
from scipy.optimize import minimize

from . import core
from .config import TOL, Tolerances
from .conic import Expr, Model, SolverFailure, combine, inner
from .errors import PreconditionError
from .theories import (DiagonalSimplex, FreeStateSet, GibbsSingleton, RdMapSpec,
                       SeparablePPT2x2, VertexPolytope, membership)

INF = math.inf


@dataclass
class MeasureReport:
    value: float
    method: str
    status: str = "optimal"
    optimizer: dict = field(default_factory=dict)
    kind: str = ""
    estimated: bool = False

    def to_json(self) -> dict:
        from .io import jsonable
        return {"value": jsonable(self.value), "bits": True, "kind": self.kind,
                "method": self.method, "status": self.status, "estimated": self.estimated,
                "optimizer": jsonable(self.optimizer)}


def log2(x: float) -> float:
    if x <= 0:
        return -INF
    return math.log2(x)


def _state(rho, dim=None, tol: Tolerances = TOL) -> np.ndarray:
    return core.density_matrix(rho, dim, tol=tol)


# ---------------------------------------------------------------------------
# divergences between two states


def d_max(rho, sigma, tol: Tolerances = TOL) -> MeasureReport:
    rho = _state(rho, tol=tol)
    sigma = _state(sigma, rho.shape[0], tol=tol)
    w, v = core.support_basis(sigma, tol.rank_tol)
    outside = float(np.trace(rho).real - np.trace(v.conj().T @ rho @ v).real)
    if outside > tol.support_tol:
        return MeasureReport(INF, "analytic", kind="dmax", optimizer={"support_violation": outside})
    inv = 1 / np.sqrt(w)
    m = (inv[:, None] * (v.conj().T @ rho @ v)) * inv[None, :]
    lam = float(np.linalg.eigvalsh(core.herm(m))[-1])
    return MeasureReport(log2(lam), "analytic", kind="dmax", optimizer={"lambda": lam})


def d_min(rho, sigma, tol: Tolerances = TOL) -> MeasureReport:
    rho = _state(rho, tol=tol)
    sigma = _state(sigma, rho.shape[0], tol=tol)
    proj = core.support_projector(rho, tol.rank_tol)
    overlap = float(np.trace(proj @ sigma).real)
    if overlap <= tol.support_tol:
        raise PreconditionError("D_min is undefined when Tr(P_rho sigma) vanishes", "dmin_undefined")
    return MeasureReport(-log2(overlap), "analytic", kind="dmin",
                         optimizer={"P": proj, "overlap": overlap})


def rel_entropy(rho, sigma, tol: Tolerances = TOL) -> float:
    """Umegaki relative entropy in bits."""
    rho = _state(rho, tol=tol)
    sigma = _state(sigma, rho.shape[0], tol=tol)
    w, v = core.support_basis(sigma, tol.rank_tol)
    if float(np.trace(rho).real - np.trace(v.conj().T @ rho @ v).real) > tol.support_tol:
        return INF
    p = np.clip(np.linalg.eigvalsh(rho), 0, None)
    entropy_term = float(np.sum(p[p > 0] * np.log2(p[p > 0])))
    log_sigma = (v * np.log2(w)) @ v.conj().T
    cross = float(np.trace(rho @ log_sigma).real)
    return entropy_term - cross


def d_hypothesis(rho, sigma, eps: float, tol: Tolerances = TOL, method: str = "auto") -> MeasureReport:
    """Hypothesis-testing relative entropy ``-log min Tr(P sigma)`` over
    ``0 <= P <= I`` with ``Tr(P rho) >= 1 - eps``."""
    _check_eps(eps)
    rho = _state(rho, tol=tol)
    sigma = _state(sigma, rho.shape[0], tol=tol)
    if eps == 0 and method == "auto":
        proj = core.support_projector(rho, tol.rank_tol)
        val = float(np.trace(proj @ sigma).real)
        return MeasureReport(-log2(val) if val > tol.support_tol else INF, "analytic", kind="dH",
                             optimizer={"P": proj, "test_value": val})
    n = rho.shape[0]
    m = Model(tol)
    if eps == 0:
        # facial reduction: Tr(P rho) = 1 with P <= I pins P to the identity
        # on the support of rho, leaving a free block on its kernel only; the
        # unreduced program has no interior point and loses digits
        w, v = core.eigh_herm(rho)
        kernel = v[:, w <= tol.rank_tol]
        if not kernel.shape[1]:
            return MeasureReport(0.0, "analytic", kind="dH",
                                 optimizer={"P": np.eye(n, dtype=complex), "test_value": 1.0})
        support = v[:, w > tol.rank_tol]
        P = m.constant(support @ support.conj().T)
        q = m.psd(kernel.shape[1])
        m.add_psd(np.eye(kernel.shape[1]) - q)
        P = P + kernel @ q @ kernel.conj().T
    else:
        P = m.psd(n)
        m.add_psd(np.eye(n) - P)
        m.add_ge(inner(rho, P).real, 1 - eps)
    m.minimize(inner(sigma, P).real)
    res = m.solve()
    val = max(res.objective, 0.0)
    Pv = core.herm(res.value(P))
    return MeasureReport(-log2(val) if val > 1e-14 else INF, "sdp", kind="dH",
                         optimizer={"P": Pv, "test_value": val})


def _check_eps(eps: float):
    if not (0.0 <= eps < 1.0):
        raise PreconditionError(f"smoothing radius must lie in [0, 1), got {eps}", "bad_epsilon")


# ---------------------------------------------------------------------------
# conic building blocks


def free_cone(model: Model, F: FreeStateSet | np.ndarray) -> Expr:
    """An expression ranging over the cone generated by a free set (or by a
    single state when an array is given)."""
    if isinstance(F, np.ndarray):
        return model.nonneg() * F
    if isinstance(F, GibbsSingleton):
        return model.nonneg() * F.gibbs_state()
    if isinstance(F, SeparablePPT2x2):
        x = model.psd(4)
        model.add_psd(x.ptranspose(F.dims, 1))
        return x
    if isinstance(F, (VertexPolytope, DiagonalSimplex)):
        pts = np.asarray(F.extreme_points())
        w = model.nonneg(len(pts))
        x = combine(w, pts)
        x._weights = w
        return x
    raise PreconditionError(f"unsupported free set {F!r}", "unsupported_free_set")


BALL_MARGIN = 5e-8


def smoothing_ball(model: Model, rho: np.ndarray, eps: float, margin: float = BALL_MARGIN,
                   compressed: bool = False) -> Expr:
    """Expression for a state in the fidelity ball around ``rho``.

    The ball is shrunk by ``margin`` in fidelity so that solver slack rarely
    leaves the returned optimizer outside the true ball. ``compressed``
    pins the fidelity block to the support of ``rho`` instead of to ``rho``
    itself; it is a fallback encoding for when the default one stalls.
    """
    n = rho.shape[0]
    if eps == 0:
        return model.constant(rho)
    eps = max(eps - margin, 0.0)
    if core.is_pure(rho, 1e-12):
        psi = core.pure_vector(rho)
        rp = model.psd(n)
        model.add_eq(rp.trace(), 1.0)
        model.add_ge(inner(core.projector(psi), rp).real, 1 - eps)
        return rp
    if compressed:
        w, v = core.support_basis(rho)
        block = model.psd(n + w.size)
        rp = block[:n, :n]
        model.add_eq(block[n:, n:], np.diag(w))
        model.add_eq(rp.trace(), 1.0)
        model.add_ge((v.conj().T @ block[:n, n:]).trace().real, math.sqrt(1 - eps))
        return rp
    block = model.psd(2 * n)
    rp = block[:n, :n]
    model.add_eq(block[n:, n:], rho)
    model.add_eq(rp.trace(), 1.0)
    model.add_ge(block[:n, n:].trace().real, math.sqrt(1 - eps))
    return rp


def clean_state(x: np.ndarray) -> np.ndarray:
    """Project a numerically perturbed matrix onto the density matrices."""
    w, v = core.eigh_herm(x)
    w = np.clip(w, 0.0, None)
    out = (v * w) @ v.conj().T
    return core.herm(out / np.trace(out).real)


# ---------------------------------------------------------------------------
# free-set measures


def _pts(F: FreeStateSet) -> list[np.ndarray]:
    return F.extreme_points()


def resource_measure(rho, F: FreeStateSet, kind: str, eps: float = 0.0,
                     tol: Tolerances = TOL, closest_state: bool = False) -> MeasureReport:
    """Minimum of D_max, D_min or D_H^eps over the free set."""
    rho = _state(rho, F.dim, tol)
    if kind == "dmax":
        return _dmax_free(rho, F, tol)
    if kind == "dmin":
        return _dmin_free(rho, F, tol)
    if kind in ("dH", "dh"):
        return _dh_free(rho, F, eps, tol, closest_state)
    raise PreconditionError(f"unknown measure kind {kind!r}", "bad_kind")


def _dmax_free(rho, F, tol) -> MeasureReport:
    if isinstance(F, GibbsSingleton):
        rep = d_max(rho, F.gibbs_state(), tol)
        rep.optimizer["sigma"] = F.gibbs_state()
        return rep
    return smooth_measure(rho, F, 0.0, "dmax", tol=tol)


def _dmin_free(rho, F, tol) -> MeasureReport:
    proj = core.support_projector(rho, tol.rank_tol)
    if isinstance(F, SeparablePPT2x2) and core.is_pure(proj, 1e-9):
        # best product overlap of a pure state is its largest Schmidt weight
        u, s, vh = np.linalg.svd(core.pure_vector(proj).reshape(2, 2))
        best, method = float(s[0] ** 2), "analytic"
        sigma = core.projector(np.kron(u[:, 0], vh[0]))
    elif isinstance(F, SeparablePPT2x2):
        m = Model(tol)
        x = free_cone(m, F)
        m.add_eq(x.trace(), 1.0)
        m.maximize(inner(proj, x).real)
        res = m.solve()
        best, sigma, method = res.objective, clean_state(res.value(x)), "sdp"
    else:
        pts = _pts(F)
        vals = [float(np.trace(proj @ v).real) for v in pts]
        k = int(np.argmax(vals))
        best, sigma, method = vals[k], pts[k], "analytic"
    if best <= tol.support_tol:
        return MeasureReport(INF, method, kind="dmin", optimizer={"sigma": sigma, "P": proj})
    return MeasureReport(-log2(best), method, kind="dmin", optimizer={"sigma": sigma, "P": proj})


def _dh_free(rho, F, eps, tol, closest_state) -> MeasureReport:
    _check_eps(eps)
    if isinstance(F, GibbsSingleton):
        rep = d_hypothesis(rho, F.gibbs_state(), eps, tol)
        rep.optimizer["sigma"] = F.gibbs_state()
        return rep
    n = F.dim
    if eps == 0:
        rep = _dmin_free(rho, F, tol)
        rep.kind = "dH"
        t = 2.0 ** -rep.value if rep.value < INF else 0.0
        rep.optimizer["test_value"] = t
        return rep
    m = Model(tol)
    P = m.psd(n)
    m.add_psd(np.eye(n) - P)
    m.add_ge(inner(rho, P).real, 1 - eps)
    t = m.free()
    if isinstance(F, SeparablePPT2x2):
        B = m.psd(4)
        m.add_psd(t * np.eye(4) - P - B.ptranspose(F.dims, 1))
    else:
        for v in _pts(F):
            m.add_le(inner(v, P).real, t)
    m.minimize(t)
    res = m.solve()
    val = max(res.objective, 0.0)
    opt = {"P": core.herm(res.value(P)), "test_value": val}
    if closest_state:
        opt["sigma"] = _dh_closest_state(rho, F, eps, tol)
    return MeasureReport(-log2(val) if val > 1e-14 else INF, "sdp", kind="dH", optimizer=opt)


def _dh_closest_state(rho, F, eps, tol) -> np.ndarray:
    """Free state attaining the hypothesis-testing minimum, from the dual program
    ``max mu (1 - eps) - Tr Y`` with ``sigma + Y - mu rho >= 0``."""
    n = F.dim
    m = Model(tol)
    x = free_cone(m, F)
    m.add_eq(x.trace(), 1.0)
    mu = m.nonneg()
    Y = m.psd(n)
    m.add_psd(x + Y - mu * rho)
    m.maximize(mu * (1 - eps) - Y.trace())
    return clean_state(m.solve().value(x))


def free_robustness(rho, F: FreeStateSet, tol: Tolerances = TOL) -> MeasureReport:
    """Free robustness R with LR = log(1 + R) in the optimizer payload."""
    rho = _state(rho, F.dim, tol)
    inside = membership(rho, F, tol)
    if inside.inside:
        return MeasureReport(0.0, "analytic", kind="robustness",
                             optimizer={"R": 0.0, "LR": 0.0, "delta": rho, "sigma": rho})
    if isinstance(F, (DiagonalSimplex, GibbsSingleton)):
        # affine free set: only free states lie in its span
        return MeasureReport(INF, "analytic", kind="robustness",
                             optimizer={"R": INF, "LR": INF, "reason": "affine free set"})
    m = Model(tol)
    a = free_cone(m, F)
    b = free_cone(m, F)
    m.add_eq(b - a, rho)
    m.minimize(a.trace())
    res = m.solve(require_optimal=False)
    if res.status == "infeasible":
        return MeasureReport(INF, "lp", kind="robustness",
                             optimizer={"R": INF, "LR": INF, "reason": "state outside span of free set"})
    if res.status != "optimal":
        raise SolverFailure(f"robustness program status {res.status}", res.report)
    r = max(res.objective, 0.0)
    av = res.value(a)
    bv = res.value(b)
    opt = {"R": r, "LR": log2(1 + r), "delta": clean_state(av) if r > 0 else rho,
           "sigma": clean_state(bv)}
    method = "sdp" if isinstance(F, SeparablePPT2x2) else "lp"
    return MeasureReport(r, method, kind="robustness", optimizer=opt)


def generalized_robustness_witness(rho, F: FreeStateSet, tol: Tolerances = TOL) -> MeasureReport:
    """``1 + R_G = max Tr(rho W)`` over ``W >= 0`` with ``Tr(W sigma) <= 1`` on F."""
    rho = _state(rho, F.dim, tol)
    n = F.dim
    m = Model(tol)
    W = m.psd(n)
    if isinstance(F, SeparablePPT2x2):
        y = m.free()
        B = m.psd(4)
        m.add_psd(y * np.eye(4) - W - B.ptranspose(F.dims, 1))
        m.add_le(y, 1.0)
    else:
        for v in _pts(F):
            m.add_le(inner(v, W).real, 1.0)
    m.maximize(inner(rho, W).real)
    res = m.solve()
    val = res.objective
    return MeasureReport(val - 1, "sdp", kind="generalized_robustness",
                         optimizer={"W": core.herm(res.value(W)), "LR_G": log2(val)})


def free_fidelity(rho, F: FreeStateSet, tol: Tolerances = TOL) -> MeasureReport:
    """Maximum fidelity with a free state."""
    rho = _state(rho, F.dim, tol)
    if isinstance(F, GibbsSingleton):
        tau = F.gibbs_state()
        return MeasureReport(core.fidelity(rho, tau), "analytic", kind="free_fidelity",
                             optimizer={"sigma": tau})
    pure = core.is_pure(rho, 1e-12)
    if pure and not isinstance(F, SeparablePPT2x2):
        psi = core.pure_vector(rho)
        pts = _pts(F)
        vals = [float(np.vdot(psi, v @ psi).real) for v in pts]
        k = int(np.argmax(vals))
        return MeasureReport(min(vals[k], 1.0), "analytic", kind="free_fidelity",
                             optimizer={"sigma": pts[k], "overlaps": vals})
    n = F.dim
    m = Model(tol)
    x = free_cone(m, F)
    m.add_eq(x.trace(), 1.0)
    if pure:
        m.maximize(inner(rho, x).real)
        res = m.solve()
        val = res.objective
    else:
        w, v = core.support_basis(rho)
        r = w.size
        block = m.psd(n + r)
        m.add_eq(block[:n, :n], x)
        m.add_eq(block[n:, n:], np.diag(w))
        m.maximize((v.conj().T @ block[:n, n:]).trace().real)
        res = m.solve()
        val = res.objective ** 2
    return MeasureReport(min(max(val, 0.0), 1.0), "sdp", kind="free_fidelity",
                         optimizer={"sigma": clean_state(res.value(x))})


# ---------------------------------------------------------------------------
# smoothed measures


def smooth_measure(rho, F: FreeStateSet | np.ndarray, eps: float, kind: str,
                   tol: Tolerances = TOL, seed: int = 0, starts: int = 16) -> MeasureReport:
    """Smoothed D_max or LR (exact conic programs) or the smoothed D_min
    lower estimate (seeded multi-start search).

    ``F`` may be a free set or a fixed state ``sigma``.
    """
    _check_eps(eps)
    dim = F.shape[0] if isinstance(F, np.ndarray) else F.dim
    rho = _state(rho, dim, tol)
    if kind == "dmax":
        return _smooth_dmax(rho, F, eps, tol)
    if kind in ("lr", "LR"):
        if isinstance(F, np.ndarray):
            raise PreconditionError("log-robustness needs a free set", "bad_kind")
        return _smooth_lr(rho, F, eps, tol)
    if kind in ("dmin", "dmin-heuristic"):
        return smooth_dmin_heuristic(rho, F, eps, tol, seed, starts)
    raise PreconditionError(f"unknown smoothed measure {kind!r}", "bad_kind")


def _reference_state(F) -> np.ndarray:
    """A full-rank-ish state inside the free set, used to scale programs."""
    if isinstance(F, np.ndarray):
        return F
    if isinstance(F, GibbsSingleton):
        return F.gibbs_state()
    if isinstance(F, SeparablePPT2x2):
        return np.eye(4, dtype=complex) / 4
    return np.mean(np.asarray(_pts(F)), axis=0)


def _objective_scale(rho, F, tol) -> float:
    # the optimum of the cone programs is of order 2**D_max(rho||reference);
    # rescaling the cone variable by it keeps the solver well conditioned
    lam = d_max(rho, _reference_state(F), tol).optimizer.get("lambda", INF)
    return lam if math.isfinite(lam) and 1.0 <= lam < 1e8 else 1.0


def _repair_weight(candidate: np.ndarray, rho: np.ndarray, eps: float) -> float:
    """Smallest tried weight ``t`` such that ``(1 - t) candidate + t rho``
    lies in the fidelity ball.

    Root fidelity is concave, so weight ``t`` lifts it to at least
    ``(1 - t) * sqrt(F) + t``.
    """
    need = 1 - eps
    if eps == 0 or core.fidelity(candidate, rho) >= need:
        return 0.0
    root = core.fidelity(candidate, rho, root=True)
    t = min(max((math.sqrt(need) - root) / max(1 - root, 1e-300), 1e-12), 1.0)
    while t < 1.0:
        if core.fidelity(clean_state((1 - t) * candidate + t * rho), rho) >= need:
            return t
        t = min(1.0, 2 * t)
    return 1.0


# (compressed ball, objective scaling) pairs tried in order
_ENCODINGS = ((False, True), (True, True), (False, False), (True, False))


def _solve_encodings(build, rho, F, tol):
    """Solve a smoothed program under successive equivalent encodings.

    Returns the first optimal (or infeasible) result, otherwise the stalled
    attempt with the smallest duality gap.
    """
    scale = _objective_scale(rho, F, tol)
    best = None
    for compressed, scaled in _ENCODINGS:
        factor = scale if scaled else 1.0
        res, parts = build(compressed, factor)
        if res.status in ("optimal", "infeasible"):
            return res, parts, factor
        if res.report.x is not None and (best is None or res.report.gap < best[0].report.gap):
            best = (res, parts, factor)
    return best if best is not None else (res, parts, factor)


def _smooth_dmax(rho, F, eps, tol) -> MeasureReport:
    if isinstance(F, GibbsSingleton):
        F = F.gibbs_state()
    if isinstance(F, np.ndarray) and eps == 0:
        rep = d_max(rho, F, tol)
        rep.optimizer.update({"sigma": F, "rho_eps": rho})
        return rep

    def build(compressed, scale):
        m = Model(tol)
        rp = smoothing_ball(m, rho, eps, compressed=compressed)
        x = free_cone(m, F)
        m.add_psd(x * scale - rp)
        m.minimize(x.trace())
        return m.solve(require_optimal=False), (rp, x)

    res, (rp, x), scale = _solve_encodings(build, rho, F, tol)
    if res.status == "infeasible":
        return MeasureReport(INF, "sdp", kind="dmax", optimizer={"reason": "support"})
    if res.report.x is None:
        raise SolverFailure(f"smoothed D_max status {res.status}", res.report)
    # a stalled solve still yields a feasible point once repaired below, so
    # the reported value is then a certified upper bound flagged by status
    lam = scale * float(np.trace(res.value(x)).real)
    sigma = F if isinstance(F, np.ndarray) else clean_state(res.value(x))
    rho_eps = clean_state(res.value(rp)) if eps > 0 else rho
    t = _repair_weight(rho_eps, rho, eps)
    if t > 0:
        # blend with the unsmoothed optimizer: rho_eps <= lam sigma and
        # rho <= lam0 sigma0 give the blended state a blended bound
        base = _smooth_dmax(rho, F, 0.0, tol).optimizer
        if math.isfinite(base.get("lambda", INF)):
            mix = (1 - t) * lam * sigma + t * base["lambda"] * base["sigma"]
            lam = float(np.trace(mix).real)
            sigma = clean_state(mix / lam)
            rho_eps = clean_state((1 - t) * rho_eps + t * rho)
    # recompute lambda for the cleaned pair so that rho_eps <= lambda sigma
    # holds exactly for downstream certificates
    exact = d_max(rho_eps, sigma, tol).optimizer.get("lambda", INF)
    if math.isfinite(exact):
        lam = exact
    opt = {"lambda": lam, "sigma": sigma, "rho_eps": rho_eps}
    if res.status != "optimal":
        opt.update({"upper_bound": True, "solver_gap": res.report.gap})
    return MeasureReport(log2(lam), "sdp", res.status, opt, kind="dmax")


def _smooth_lr(rho, F, eps, tol) -> MeasureReport:
    if eps == 0:
        rep = free_robustness(rho, F, tol)
        out = MeasureReport(rep.optimizer.get("LR", INF), rep.method, rep.status, dict(rep.optimizer), "lr")
        out.optimizer["rho_eps"] = rho
        return out
    if isinstance(F, (DiagonalSimplex, GibbsSingleton)):
        # the ball meets the free set only if some free state is eps-close
        ff = free_fidelity(rho, F, tol)
        if ff.value >= 1 - eps:
            sigma = ff.optimizer["sigma"]
            return MeasureReport(0.0, "analytic", kind="lr",
                                 optimizer={"R": 0.0, "LR": 0.0, "rho_eps": sigma, "delta": sigma,
                                            "sigma": sigma})
        return MeasureReport(INF, "analytic", kind="lr", optimizer={"R": INF, "reason": "affine free set"})

    def build(compressed, scale):
        m = Model(tol)
        rp = smoothing_ball(m, rho, eps, compressed=compressed)
        a = free_cone(m, F)
        b = free_cone(m, F)
        m.add_eq(b * scale - a * scale, rp)
        m.minimize(a.trace())
        return m.solve(require_optimal=False), (rp, a, b)

    res, (rp, a, b), scale = _solve_encodings(build, rho, F, tol)
    if res.status == "infeasible":
        return MeasureReport(INF, "sdp", kind="lr", optimizer={"R": INF})
    if res.status != "optimal":
        raise SolverFailure(f"smoothed LR status {res.status}", res.report)
    r = max(scale * res.objective, 0.0)
    rho_eps = clean_state(res.value(rp))
    delta = clean_state(res.value(a)) if r > 1e-12 else rho_eps
    sigma = clean_state(res.value(b))
    t = _repair_weight(rho_eps, rho, eps)
    if t > 0:
        # robustness is convex: blend the decomposition with that of rho
        base = free_robustness(rho, F, tol)
        r0 = base.value
        if math.isfinite(r0):
            neg = (1 - t) * r * delta + t * r0 * base.optimizer["delta"]
            pos = (1 - t) * (1 + r) * sigma + t * (1 + r0) * base.optimizer["sigma"]
            r = (1 - t) * r + t * r0
            rho_eps = clean_state((1 - t) * rho_eps + t * rho)
            delta = clean_state(neg / r) if r > 1e-12 else rho_eps
            sigma = clean_state(pos / (1 + r))
    return MeasureReport(log2(1 + r), "sdp", kind="lr",
                         optimizer={"R": r, "LR": log2(1 + r), "rho_eps": rho_eps, "delta": delta,
                                    "sigma": sigma})


def smooth_dmin_heuristic(rho, F, eps, tol: Tolerances = TOL, seed: int = 0,
                          starts: int = 16) -> MeasureReport:
    """Lower estimate of the ball maximum of D_min over pure or truncated
    candidates; always flagged as estimated."""
    rho = np.asarray(rho, dtype=complex)
    n = rho.shape[0]

    def value(cand: np.ndarray) -> float:
        if isinstance(F, np.ndarray):
            try:
                return d_min(cand, F, tol).value
            except PreconditionError:
                return INF
        return _dmin_free(cand, F, tol).value

    best_val, best = value(rho), rho
    if eps == 0:
        return MeasureReport(best_val, "analytic", kind="dmin", optimizer={"rho_eps": rho})
    rng = np.random.default_rng(seed)
    w, v = core.eigh_herm(rho)
    order = np.argsort(w)[::-1]
    # spectral truncations keep fidelity equal to the retained weight
    for k in range(1, n + 1):
        keep = order[:k]
        weight = float(np.sum(w[keep]))
        if weight >= 1 - eps and k < n:
            cand = clean_state((v[:, keep] * w[keep]) @ v[:, keep].conj().T)
            val = value(cand)
            if val > best_val:
                best_val, best = val, cand
    # pure candidates at the boundary of the ball
    psi0 = v[:, order[0]]

    def pure_from(params: np.ndarray) -> np.ndarray:
        z = params[:n] + 1j * params[n:]
        return z / np.linalg.norm(z)

    def fid(psi: np.ndarray) -> float:
        return float(np.vdot(psi, rho @ psi).real)

    def objective(params):
        psi = pure_from(params)
        if fid(psi) < 1 - eps:
            return 10.0 + (1 - eps - fid(psi))
        val = value(core.projector(psi))
        return -val if math.isfinite(val) else -50.0

    for s in range(starts):
        if s == 0:
            start = psi0
        else:
            noise = rng.standard_normal(n) + 1j * rng.standard_normal(n)
            start = psi0 + math.sqrt(eps) * noise / np.linalg.norm(noise)
            start /= np.linalg.norm(start)
        if fid(start) < 1 - eps:
            # pull the start back inside the ball
            start = math.sqrt(1 - eps) * psi0 + math.sqrt(eps) * _orth(start, psi0)
        x0 = np.concatenate([start.real, start.imag])
        res = minimize(objective, x0, method="Nelder-Mead",
                       options={"xatol": 1e-10, "fatol": 1e-12, "maxiter": 400 * n})
        psi = pure_from(res.x)
        if fid(psi) >= 1 - eps:
            val = value(core.projector(psi))
            if val > best_val:
                best_val, best = val, core.projector(psi)
    return MeasureReport(best_val, "grid-heuristic", kind="dmin", estimated=True,
                         optimizer={"rho_eps": best, "starts": starts, "seed": seed})


def _orth(x: np.ndarray, ref: np.ndarray) -> np.ndarray:
    y = x - np.vdot(ref, x) * ref
    nrm = np.linalg.norm(y)
    if nrm < 1e-12:
        y = np.roll(ref, 1) - np.vdot(ref, np.roll(ref, 1)) * ref
        nrm = np.linalg.norm(y)
    return y / nrm


# ---------------------------------------------------------------------------
# measures built from resource destroying maps


def lambda_measure(rho, spec: RdMapSpec, kind: str, eps: float = 0.0,
                   F: FreeStateSet | None = None, tol: Tolerances = TOL) -> MeasureReport:
    """Divergence between rho and its image under a resource destroying map.

    Pseudo maps give the barred measure, which is zero (fidelity one) on free
    states and needs the free set.
    """
    _check_eps(eps)
    rho = _state(rho, spec.dim, tol)
    if spec.is_pseudo:
        if F is None:
            raise PreconditionError("barred measures need the free set", "needs_free_set")
        if membership(rho, F, tol).inside:
            value = 1.0 if kind == "f" else 0.0
            return MeasureReport(value, "analytic", kind=f"{kind}_lambda_bar", optimizer={"free": True})
    image = clean_state(spec.apply(rho))
    tag = f"{kind}_lambda_bar" if spec.is_pseudo else f"{kind}_lambda"
    if kind == "f":
        rep = MeasureReport(core.fidelity(rho, image), "analytic")
    elif kind == "dmax":
        rep = d_max(rho, image, tol) if eps == 0 else _smooth_dmax_lambda(rho, spec, eps, tol)
    elif kind == "dmin":
        if eps != 0:
            raise PreconditionError("smoothed D_min of a map is not supported", "unsupported")
        rep = d_min(rho, image, tol)
    elif kind in ("dH", "dh"):
        rep = d_hypothesis(rho, image, eps, tol)
    else:
        raise PreconditionError(f"unknown lambda measure {kind!r}", "bad_kind")
    rep.kind = tag
    rep.optimizer.setdefault("image", image)
    return rep


def _smooth_dmax_lambda(rho, spec: RdMapSpec, eps, tol, iters: int = 40) -> MeasureReport:
    """min over the ball of D_max(rho' || lambda(rho')) for a linear map, by
    bisection on the multiplier."""
    n = rho.shape[0]
    s = spec.superop()

    def best_fidelity(mu: float):
        m = Model(tol)
        if core.is_pure(rho, 1e-12):
            rp = m.psd(n)
            m.add_eq(rp.trace(), 1.0)
            image = rp.reshape(n * n)._lift(lambda a: a @ s.T).reshape(n, n)
            m.add_psd(mu * image - rp)
            m.maximize(inner(rho, rp).real)
            res = m.solve(require_optimal=False)
            if res.status != "optimal":
                return -1.0, None
            return res.objective, res.value(rp)
        w, v = core.support_basis(rho)
        r = w.size
        block = m.psd(n + r)
        rp = block[:n, :n]
        m.add_eq(block[n:, n:], np.diag(w))
        m.add_eq(rp.trace(), 1.0)
        image = rp.reshape(n * n)._lift(lambda a: a @ s.T).reshape(n, n)
        m.add_psd(mu * image - rp)
        m.maximize((v.conj().T @ block[:n, n:]).trace().real)
        res = m.solve(require_optimal=False)
        if res.status != "optimal":
            return -1.0, None
        return res.objective ** 2, res.value(rp)

    hi_val = d_max(rho, clean_state(spec.apply(rho)), tol).value
    if not math.isfinite(hi_val):
        hi_val = math.log2(n) + 8
    lo, hi = 0.0, hi_val
    best = (rho, hi_val)
    target = 1 - eps
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        f, cand = best_fidelity(2.0 ** mid)
        if f >= target - 1e-10:
            hi = mid
            best = (clean_state(cand), mid)
        else:
            lo = mid
        if hi - lo < 1e-8:
            break
    return MeasureReport(hi, "sdp-bisection", optimizer={"rho_eps": best[0]})


# ---------------------------------------------------------------------------
# modification coefficients


@dataclass
class ModCoefficient:
    kind: str
    d: int
    value: float
    measure: float

    def to_json(self) -> dict:
        from .io import jsonable
        return jsonable({"kind": self.kind, "d": self.d, "value": self.value, "measure": self.measure})


COEFFICIENT_KINDS = ("f", "min", "max", "LR", "f_lambda", "min_lambda", "max_lambda")


def coefficient_measure(phi, F: FreeStateSet | None, kind: str, spec: RdMapSpec | None = None,
                        tol: Tolerances = TOL) -> float:
    """The measure underlying a modification coefficient, in bits."""
    if kind in ("f", "min", "max", "LR") and F is None:
        raise PreconditionError(f"coefficient {kind} needs a free set", "needs_free_set")
    if kind == "f":
        return -log2(free_fidelity(phi, F, tol).value)
    if kind == "min":
        return resource_measure(phi, F, "dmin", tol=tol).value
    if kind == "max":
        return resource_measure(phi, F, "dmax", tol=tol).value
    if kind == "LR":
        return free_robustness(phi, F, tol).optimizer.get("LR", INF)
    if spec is None:
        raise PreconditionError(f"coefficient {kind} needs a resource destroying map", "needs_rd_map")
    base = {"f_lambda": "f", "min_lambda": "dmin", "max_lambda": "dmax"}[kind]
    val = lambda_measure(phi, spec, base, F=F, tol=tol).value
    return -log2(val) if base == "f" else val


def modification_coefficient(phi, d: int, F: FreeStateSet | None = None, kind: str = "f",
                             spec: RdMapSpec | None = None, tol: Tolerances = TOL) -> ModCoefficient:
    if d < 2:
        raise PreconditionError("modification coefficients need d >= 2", "bad_dimension")
    if kind not in COEFFICIENT_KINDS:
        raise PreconditionError(f"unknown coefficient kind {kind!r}", "bad_kind")
    phi = _state(phi, d, tol)
    val = coefficient_measure(phi, F, kind, spec, tol)
    return ModCoefficient(kind, d, val / math.log2(d), val)
