"""Golden states: pure states of least free fidelity, their collapsed
modification coefficients, and root-state checks."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize, nnls

from . import core
from .config import TOL, Tolerances
from .conic import SolverFailure
from .errors import PreconditionError
from .measures import INF, coefficient_measure, free_robustness, smooth_measure
from .theories import (DiagonalSimplex, FreeStateSet, GibbsSingleton, RdMapSpec, SeparablePPT2x2,
                       VertexPolytope, bell_state, ct_spread, gibbs_weights)

COLLAPSE_KINDS = ("f", "min", "max")
LAMBDA_KINDS = ("f_lambda", "min_lambda", "max_lambda")


@dataclass
class GoldenReport:
    state: np.ndarray
    dim: int
    g: float
    coefficients: dict
    collapse_residual: float
    collapsed: bool
    method: str
    starts: int = 0
    converged: bool = True
    stationarity: float = 0.0
    orbit_size: int | None = None
    m_lr: float | None = None
    maximal: bool | None = None
    notes: list = field(default_factory=list)

    def to_json(self) -> dict:
        from .io import jsonable, vector_to_json
        out = {"state": vector_to_json(self.state), "dim": self.dim, "g": self.g,
               "coefficients": self.coefficients, "collapse_residual": self.collapse_residual,
               "collapsed": self.collapsed, "method": self.method, "starts": self.starts,
               "converged": self.converged, "stationarity": self.stationarity,
               "orbit_size": self.orbit_size, "m_LR": self.m_lr, "maximal": self.maximal,
               "notes": self.notes}
        if self.dim == 2:
            out["bloch"] = core.bloch_vector(core.projector(self.state))
        return jsonable(out)


# ---------------------------------------------------------------------------
# collapse


def verify_collapse(phi, F: FreeStateSet, spec: RdMapSpec | None = None, tol: float = 1e-6,
                    golden_value: float | None = None, with_lr: bool = False,
                    tolerances: Tolerances = TOL) -> GoldenReport:
    """Compute the modification coefficients of a pure state and test whether
    they coincide.

    The robustness coefficient is reported separately and never enters the
    collapse residual.  When ``golden_value`` is given, ``maximal`` records
    whether the collapsed value equals it.
    """
    rho = core.density_matrix(phi, F.dim, tol=tolerances)
    if not core.is_pure(rho, 1e-9):
        raise PreconditionError("collapse is defined for pure states", "state_not_pure")
    d = F.dim
    notes = []
    kinds = list(COLLAPSE_KINDS)
    if spec is not None:
        if spec.is_exact and not spec.is_pseudo:
            kinds += LAMBDA_KINDS
        else:
            notes.append("resource destroying map is not exact; lambda coefficients skipped")
    coeffs = {}
    for kind in kinds:
        coeffs[f"m_{kind}"] = coefficient_measure(rho, F, kind, spec, tolerances) / math.log2(d)
    vals = list(coeffs.values())
    residual = max(vals) - min(vals) if all(math.isfinite(v) for v in vals) else INF
    m_lr = None
    if with_lr:
        lr = free_robustness(rho, F, tolerances).optimizer.get("LR", INF)
        m_lr = lr / math.log2(d)
    g = coeffs["m_f"]
    maximal = None if golden_value is None else abs(g - golden_value) <= tol
    return GoldenReport(core.pure_vector(rho), d, g, coeffs, residual, residual <= tol, "evaluated",
                        m_lr=m_lr, maximal=maximal, notes=notes)


# ---------------------------------------------------------------------------
# search


def _real_blocks(mats) -> np.ndarray:
    """Real symmetric forms with x^T M x = <psi|V|psi> for x = [Re psi, Im psi]."""
    out = []
    for v in mats:
        a, b = v.real, v.imag
        out.append(np.block([[a, -b], [b, a]]))
    return np.asarray(out)


def _to_ket(x: np.ndarray) -> np.ndarray:
    n = x.size // 2
    psi = x[:n] + 1j * x[n:]
    return psi / np.linalg.norm(psi)


def _fibonacci_sphere(count: int) -> np.ndarray:
    i = np.arange(count) + 0.5
    z = 1 - 2 * i / count
    r = np.sqrt(1 - z * z)
    phi = math.pi * (1 + 5 ** 0.5) * i
    return np.stack([r * np.cos(phi), r * np.sin(phi), z], axis=1)


def _canonical_key(psi: np.ndarray) -> tuple:
    if psi.size == 2:
        return tuple(np.round(core.bloch_vector(core.projector(psi)), 6))
    p = core.fix_phase(psi)
    return tuple(np.round(np.concatenate([p.real, p.imag]), 6))


def stationarity_residual(psi: np.ndarray, mats: np.ndarray, active_tol: float = 1e-7) -> float:
    """Distance from zero of the convex hull of the active Riemannian gradients."""
    x = np.concatenate([psi.real, psi.imag])
    vals = np.einsum("i,kij,j->k", x, mats, x)
    active = np.flatnonzero(vals >= vals.max() - active_tol)
    grads = []
    for k in active:
        g = 2 * mats[k] @ x
        grads.append(g - (g @ x) * x)
    G = np.array(grads).T
    weight = 1e3
    A = np.vstack([G, weight * np.ones((1, G.shape[1]))])
    b = np.concatenate([np.zeros(G.shape[0]), [weight]])
    w, _ = nnls(A, b)
    return float(np.linalg.norm(G @ w))


def _minimax(mats: np.ndarray, x0: np.ndarray) -> tuple[np.ndarray, bool]:
    n2 = x0.size

    def vals(x):
        return np.einsum("i,kij,j->k", x, mats, x)

    def cons_ineq(z):
        return z[-1] - vals(z[:-1])

    def jac_ineq(z):
        x = z[:-1]
        grads = -2 * np.einsum("kij,j->ki", mats, x)
        return np.hstack([grads, np.ones((mats.shape[0], 1))])

    cons = [{"type": "ineq", "fun": cons_ineq, "jac": jac_ineq},
            {"type": "eq", "fun": lambda z: np.array([z[:-1] @ z[:-1] - 1.0]),
             "jac": lambda z: np.concatenate([2 * z[:-1], [0.0]])[None, :]}]
    z0 = np.concatenate([x0, [vals(x0).max()]])
    res = minimize(lambda z: z[-1], z0, jac=lambda z: np.eye(n2 + 1)[-1], method="SLSQP",
                   constraints=cons, options={"maxiter": 500, "ftol": 1e-15})
    x = res.x[:-1]
    return x / np.linalg.norm(x), bool(res.success)


def find_golden_state(F: FreeStateSet, seed: int = 0, starts: int = 64,
                      spec: RdMapSpec | None = None, tolerances: Tolerances = TOL) -> GoldenReport:
    """Pure state minimising the free fidelity.

    Polytopes are searched by seeded multi-start minimax over the unit sphere
    (qubits additionally seed from a Bloch-sphere sweep).  Gibbs singletons
    and the two-qubit separable set are resolved analytically.
    """
    if isinstance(F, GibbsSingleton):
        return golden_thermo(F.energies, F.temperature, tolerances)
    if isinstance(F, SeparablePPT2x2):
        rep = verify_collapse(bell_state(), F, tolerances=tolerances)
        rep.method = "analytic"
        rep.notes.append("maximally entangled state; not searched")
        return rep
    if not isinstance(F, (VertexPolytope, DiagonalSimplex)):
        raise PreconditionError(f"unsupported free set {F!r}", "unsupported_free_set")
    d = F.dim
    mats = _real_blocks(F.extreme_points())
    rng = np.random.default_rng(seed)
    inits = []
    if d == 2:
        grid = _fibonacci_sphere(400)
        scores = [max(np.vdot(k, v @ k).real for v in F.extreme_points())
                  for k in (core.pure_vector(core.bloch_state(r)) for r in grid)]
        for i in np.argsort(scores)[:8]:
            k = core.pure_vector(core.bloch_state(grid[i]))
            inits.append(np.concatenate([k.real, k.imag]))
    while len(inits) < starts:
        z = rng.standard_normal(2 * d)
        inits.append(z / np.linalg.norm(z))
    candidates = []
    successes = 0
    for x0 in inits:
        x, ok = _minimax(mats, x0)
        successes += ok
        psi = _to_ket(x)
        if isinstance(F, DiagonalSimplex):
            # moduli in the dephasing basis carry the whole objective
            u = F.unitary
            psi = u @ np.abs(u.conj().T @ psi).astype(complex)
        candidates.append(psi)

    def objective(psi):
        x = np.concatenate([psi.real, psi.imag])
        return float(np.einsum("i,kij,j->k", x, mats, x).max())

    values = np.array([objective(p) for p in candidates])
    best = values.min()
    near = [candidates[i] for i in np.flatnonzero(values <= best + 1e-7)]
    clusters: list[list[np.ndarray]] = []
    for psi in near:
        for cl in clusters:
            if abs(np.vdot(cl[0], psi)) ** 2 > 1 - 1e-6:
                cl.append(psi)
                break
        else:
            clusters.append([psi])
    chosen = max(clusters, key=lambda cl: _canonical_key(min(cl, key=objective)))
    psi = core.fix_phase(min(chosen, key=objective))
    x, _ = _minimax(mats, np.concatenate([psi.real, psi.imag]))
    refined = core.fix_phase(_to_ket(x))
    if objective(refined) <= objective(psi):
        psi = refined
    station = stationarity_residual(psi, mats)
    rep = verify_collapse(psi, F, spec, tolerances=tolerances)
    rep.method = "multistart-minimax"
    rep.starts = len(inits)
    rep.stationarity = station
    rep.converged = station <= 1e-5
    rep.orbit_size = len(clusters)
    if not rep.converged:
        rep.notes.append(f"stationarity residual {station:.3g}; best candidate returned")
    if isinstance(F, DiagonalSimplex):
        rep.notes.append("representative chosen modulo phases in the dephasing basis")
    rep.notes.append(f"{successes} of {len(inits)} local solves reported success")
    return rep


def golden_thermo(energies, temperature: float, tolerances: Tolerances = TOL) -> GoldenReport:
    """Golden state of a Gibbs singleton: the highest-energy eigenvector
    (lowest index among ties)."""
    e = np.asarray(energies, dtype=float)
    if not np.all(np.isfinite(e)) or not temperature > 0:
        raise PreconditionError("finite energies and positive temperature required", "bad_parameters")
    d = e.size
    if d < 2:
        raise PreconditionError("golden states need d >= 2", "bad_dimension")
    tau = gibbs_weights(e, temperature)
    top = int(np.flatnonzero(e == e.max())[0])
    psi = core.ket(top, d)
    F = GibbsSingleton(tuple(e), temperature)
    rep = verify_collapse(psi, F, tolerances=tolerances)
    rep.method = "analytic"
    rep.g = -math.log2(tau[top]) / math.log2(d)
    rep.coefficients["formula"] = rep.g
    if np.count_nonzero(e == e.max()) > 1:
        rep.notes.append("degenerate maximum energy; lowest index chosen")
    return rep


# ---------------------------------------------------------------------------
# root states


@dataclass
class RootReport:
    root: bool
    targets: list
    constructive: str | None
    notes: list = field(default_factory=list)

    def to_json(self) -> dict:
        from .io import jsonable
        return jsonable({"root": self.root, "targets": self.targets,
                         "constructive": self.constructive, "notes": self.notes})


def check_root_state(phi, theory, targets, eps: float = 0.0, op_class: str = "ng", spec=None,
                     constructive: bool = True, tolerances: Tolerances = TOL) -> RootReport:
    """Check that every target is reachable from ``phi`` by a free operation.

    The oracle decides each target.  When the overlap of ``phi`` with free
    states is constant (or the theory has finite robustness and the max and
    robustness coefficients of ``phi`` agree) the matching explicit map is
    also built and verified.
    """
    from . import tasks

    theory = tasks._as_theory(theory)
    rho = core.density_matrix(phi, tol=tolerances)
    d = rho.shape[0]
    F = theory.free_set(d)
    mode = None
    notes = []
    if constructive:
        if ct_spread(F, rho) <= 1e-10:
            mode = "ct_map"
        elif tasks._is_ffr(F) and not tasks._is_affine(F):
            m_max = coefficient_measure(rho, F, "max", tol=tolerances)
            lr = free_robustness(rho, F, tolerances).optimizer.get("LR", INF)
            if abs(m_max - lr) <= 1e-6:
                mode = "ffr_map"
        if mode is None:
            notes.append("no constructive map applies; oracle verdicts only")
    c = None
    if mode is not None:
        from .measures import free_fidelity
        c = free_fidelity(rho, F, tolerances).value
    rows = []
    for target in targets:
        target = core.density_matrix(target, d, tol=tolerances)
        verdict = tasks.exact_conversion_feasible(rho, target, eps, theory, op_class, spec, tolerances)
        row = {"feasible": verdict.feasible, "fidelity": verdict.fidelity,
               "one_sided": verdict.one_sided}
        if mode is not None:
            row["construction"] = _root_map(rho, target, F, eps, mode, c, tolerances)
        rows.append(row)
    return RootReport(all(r["feasible"] for r in rows), rows, mode, notes)


def _root_map(phi, target, F, eps, mode, c, tolerances) -> dict:
    from . import tasks

    kind = "dmax" if mode == "ct_map" else "lr"
    try:
        rep = smooth_measure(target, F, eps, kind, tol=tolerances)
    except SolverFailure:
        # the unsmoothed optimizer is always inside the ball
        rep = smooth_measure(target, F, 0.0, kind, tol=tolerances)
    if rep.value > -math.log2(c) + tolerances.ladder_slack:
        return {"applied": False, "reason": "target resource exceeds reference"}
    rho_eps = rep.optimizer.get("rho_eps", target)
    if mode == "ct_map":
        delta = rep.optimizer["sigma"]
        reject = (delta - c * rho_eps) / (1 - c)
    else:
        reject = rep.optimizer["delta"]
    E = tasks.two_outcome_channel(phi, rho_eps, reject)
    cert = tasks.certify(E, F, F, phi, target, eps, f"root:{mode}", segment=(phi, rho_eps, reject),
                         tol=tolerances, raise_on_failure=False)
    return {"applied": True, "valid": cert.valid, "failures": cert.failures}
