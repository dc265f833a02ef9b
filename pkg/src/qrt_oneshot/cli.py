"""Command line front end.

Exit codes: 0 success, 1 unreadable input, 2 precondition rejected,
3 solver failure, 4 certificate failure or sandwich violation.
"""
from __future__ import annotations

import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import click
import numpy as np

from . import core, golden, io, measures, tasks, theories
from .config import TOL, Tolerances, load_profile
from .conic import SolverFailure
from .errors import CertificateError, PreconditionError

EXIT_OK, EXIT_INPUT, EXIT_PRECONDITION, EXIT_SOLVER, EXIT_CERTIFICATE = 0, 1, 2, 3, 4

MEASURE_KINDS = ("dmax", "dmin", "dh", "robustness", "free-fidelity", "smooth-dmax", "smooth-lr",
                 "smooth-dmin", "lambda-f", "lambda-dmax", "lambda-dmin", "lambda-dh", "modcoef")

# CSV column naming the quantity each measure kind reports
MEASURE_COLUMNS = {
    "dmax": "Dmax_bits", "dmin": "Dmin_bits", "dh": "DH_eps_bits", "robustness": "R",
    "free-fidelity": "free_fidelity", "smooth-dmax": "Dmax_eps_bits", "smooth-lr": "LR_eps_bits",
    "smooth-dmin": "Dmin_eps_bits_estimate", "lambda-f": "f_lambda", "lambda-dmax": "Dmax_lambda_bits",
    "lambda-dmin": "Dmin_lambda_bits", "lambda-dh": "DH_lambda_eps_bits", "modcoef": "m",
}


class InputError(Exception):
    """An input file or source string could not be read."""


# fields each command echoes back, beyond the ones shared by all commands
ECHO_FIELDS = {
    "measure": ("state", "sigma", "kind", "coefficient"),
    "golden": ("starts",),
    "bounds": ("state", "task", "variant", "construction", "sandwich"),
    "convert": ("state", "target", "construction", "op_class"),
    "batch": ("manifest",),
}


@dataclass
class RunConfig:
    command: str
    theory: str | None = None
    state: str | None = None
    sigma: str | None = None
    target: str | None = None
    epsilon: float = 0.0
    ladder: str | None = None
    variant: str | None = None
    construction: str | None = None
    kind: str | None = None
    coefficient: str = "f"
    task: str = "formation"
    op_class: str = "ng"
    sandwich: bool = False
    seed: int | None = None
    starts: int = 64
    tolerances: str | None = None
    fmt: str = "json"
    output: str | None = None
    manifest: str | None = None
    jobs: int = 1

    def validate(self):
        if not (math.isfinite(self.epsilon) and 0.0 <= self.epsilon < 1.0):
            raise PreconditionError(f"epsilon must lie in [0, 1), got {self.epsilon}", "bad_epsilon")
        if self.fmt not in ("json", "csv"):
            raise PreconditionError(f"unknown output format {self.fmt!r}", "bad_format")
        if self.starts < 1 or self.jobs < 1:
            raise PreconditionError("starts and jobs must be positive", "bad_parameters")
        if self.kind is not None and self.command == "measure" and self.kind not in MEASURE_KINDS:
            raise PreconditionError(f"unknown measure kind {self.kind!r}", "bad_kind")

    def echo(self) -> dict:
        keep = ECHO_FIELDS.get(self.command, ()) + ("command", "theory", "ladder", "seed", "epsilon")
        return {k: v for k, v in asdict(self).items() if k in keep and v is not None}


@dataclass
class Outcome:
    code: int
    payload: dict
    table: tuple[list, list] | None = None
    messages: list = field(default_factory=list)

    def render(self, fmt: str) -> str:
        if fmt == "csv" and self.table is not None:
            return io.rows_to_csv(*self.table)
        return io.dumps(self.payload) + "\n"


# ---------------------------------------------------------------------------
# input loading


def _load_theory(source: str | None, ladder: str | None):
    if source is None:
        raise InputError("--theory is required")
    try:
        theory = io.load_theory(source)
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise InputError(f"cannot read theory {source!r}: {exc}") from exc
    if ladder is not None:
        if theory.family is None:
            raise PreconditionError("the theory has no reference family to restrict", "no_family")
        theory = theory.with_family(theory.family.restrict(_ladder(ladder)))
    return theory


def _ladder(text: str):
    return text if text in ("all", "pow2", "squares", "powers") else [int(x) for x in text.split(",")]


def _load_state(path: str | None, what: str = "--state") -> np.ndarray:
    if path is None:
        raise InputError(f"{what} is required")
    try:
        obj = io.read_json(path)
    except (OSError, ValueError) as exc:
        raise InputError(f"cannot read {what} {path!r}: {exc}") from exc
    try:
        return io.state_from_json(obj)
    except (core.StateError, core.DimensionError) as exc:
        raise PreconditionError(f"{what} is not a density matrix: {exc}", "bad_state") from exc
    except (ValueError, KeyError, TypeError, IndexError) as exc:
        raise InputError(f"cannot parse {what} {path!r}: {exc}") from exc


def _need_seed(cfg: RunConfig, what: str):
    if cfg.seed is None:
        raise PreconditionError(f"{what} is heuristic and needs --seed", "seed_required")


# ---------------------------------------------------------------------------
# commands


def _measure(cfg: RunConfig, tol: Tolerances) -> Outcome:
    if cfg.kind is None:
        raise PreconditionError("--kind is required", "bad_kind")
    rho = _load_state(cfg.state)
    sigma = _load_state(cfg.sigma, "--sigma") if cfg.sigma is not None else None
    kind, eps = cfg.kind, cfg.epsilon
    if sigma is not None:
        rep = _measure_pair(kind, rho, sigma, eps, cfg, tol)
    else:
        theory = _load_theory(cfg.theory, cfg.ladder)
        n = rho.shape[0]
        F = theory.free_set(n)
        rep = _measure_free(kind, rho, theory, F, n, eps, cfg, tol)
    column = MEASURE_COLUMNS[kind] if kind != "modcoef" else f"m_{cfg.coefficient}"
    payload = {"config": cfg.echo(), "report": rep}
    # a stalled solver leaves a certified bound behind; report it, but as a failure
    code = EXIT_OK if rep.status == "optimal" else EXIT_SOLVER
    messages = [] if code == EXIT_OK else [f"solver status {rep.status}; value is a bound, not the optimum"]
    return Outcome(code, payload, (["epsilon", column], [[eps, rep.value]]), messages)


def _measure_pair(kind, rho, sigma, eps, cfg, tol):
    if kind == "dmax":
        return measures.d_max(rho, sigma, tol)
    if kind == "dmin":
        return measures.d_min(rho, sigma, tol)
    if kind == "dh":
        return measures.d_hypothesis(rho, sigma, eps, tol)
    if kind == "smooth-dmax":
        return measures.smooth_measure(rho, sigma, eps, "dmax", tol=tol)
    if kind == "smooth-dmin":
        _need_seed(cfg, "smoothed D_min")
        return measures.smooth_measure(rho, sigma, eps, "dmin", tol=tol, seed=cfg.seed)
    raise PreconditionError(f"measure kind {kind!r} needs --theory rather than --sigma", "bad_kind")


def _measure_free(kind, rho, theory, F, n, eps, cfg, tol):
    if kind in ("dmax", "dmin"):
        return measures.resource_measure(rho, F, kind, tol=tol)
    if kind == "dh":
        return measures.resource_measure(rho, F, "dH", eps, tol)
    if kind == "robustness":
        return measures.free_robustness(rho, F, tol)
    if kind == "free-fidelity":
        return measures.free_fidelity(rho, F, tol)
    if kind in ("smooth-dmax", "smooth-lr"):
        return measures.smooth_measure(rho, F, eps, kind.split("-")[1], tol=tol)
    if kind == "smooth-dmin":
        _need_seed(cfg, "smoothed D_min")
        return measures.smooth_measure(rho, F, eps, "dmin", tol=tol, seed=cfg.seed)
    spec = theory.rd_map(n)
    if kind.startswith("lambda-"):
        if spec is None:
            raise PreconditionError("the theory has no resource destroying map", "needs_rd_map")
        base = {"f": "f", "dmax": "dmax", "dmin": "dmin", "dh": "dH"}[kind.split("-")[1]]
        return measures.lambda_measure(rho, spec, base, eps, F=F, tol=tol)
    coef = measures.modification_coefficient(rho, n, F, cfg.coefficient, spec, tol)
    return measures.MeasureReport(coef.value, "coefficient", kind=f"m_{coef.kind}",
                                  optimizer={"measure_bits": coef.measure, "d": coef.d})


def _golden(cfg: RunConfig, tol: Tolerances) -> Outcome:
    theory = _load_theory(cfg.theory, cfg.ladder)
    F = theory.free_set()
    if isinstance(F, (theories.VertexPolytope, theories.DiagonalSimplex)):
        _need_seed(cfg, "golden search")
    seed = 0 if cfg.seed is None else cfg.seed
    rep = golden.find_golden_state(F, seed, cfg.starts, theory.rd_map(), tol)
    header = ["dim", "g_bits_per_log_d", "m_f", "m_min", "m_max", "collapse_residual", "collapsed"]
    row = [rep.dim, rep.g] + [rep.coefficients.get(k) for k in ("m_f", "m_min", "m_max")]
    row += [rep.collapse_residual, rep.collapsed]
    return Outcome(EXIT_OK, {"config": cfg.echo(), "golden": rep}, (header, [row]))


def _classify(cfg: RunConfig, tol: Tolerances) -> Outcome:
    theory = _load_theory(cfg.theory, cfg.ladder)
    cls = theories.classify_theory(theory, seed=0 if cfg.seed is None else cfg.seed)
    header = ["convex", "affine", "ffr", "ch", "ct"]
    return Outcome(EXIT_OK, {"config": cfg.echo(), "classification": cls},
                   (header, [[cls.convex, cls.affine, cls.ffr, cls.ch, cls.ct]]))


BOUND_HEADER = ["task", "direction", "variant", "epsilon", "d0", "log_d0_bits", "bound_bits",
                "estimated", "reason"]


def _bound_row(rep: tasks.BoundReport) -> list:
    return [rep.task, rep.direction, rep.variant, rep.epsilon, rep.d0, rep.log_d0, rep.value,
            rep.estimated, rep.reason]


def _bounds(cfg: RunConfig, tol: Tolerances) -> Outcome:
    theory = _load_theory(cfg.theory, cfg.ladder)
    rho = _load_state(cfg.state)
    eps = cfg.epsilon
    result: dict = {}
    reports = []
    if cfg.task == "formation":
        lower = tasks.formation_lower_bound(rho, theory, eps, cfg.variant or "dmax", tol=tol)
        construction = cfg.construction or tasks._formation_upper_variant(
            theory, theory.family, theory.free_set(rho.shape[0]))
        result["lower"] = lower
        reports.append(lower)
        if construction is not None:
            rep, cert = tasks.formation_achievable(rho, theory, eps, construction, tol=tol)
            result["achievable"] = {"report": rep, "certificate": cert}
            reports.append(rep)
    elif cfg.task in ("distillation", "distillation-input-error"):
        input_error = cfg.task == "distillation-input-error"
        default_upper = "input_error_dh" if input_error else "ng"
        upper = tasks.distillation_upper_bound(rho, theory, eps, cfg.variant or default_upper,
                                               tol=tol, seed=0 if cfg.seed is None else cfg.seed)
        result["upper"] = upper
        reports.append(upper)
        names = [cfg.construction] if cfg.construction else (
            ["input_error_robustness", "input_error_isotropic"] if input_error
            else ["robustness_map", "isotropic_map"])
        skipped = {}
        for name in names:
            try:
                rep, cert = tasks.distillation_achievable(rho, theory, eps, name, tol=tol)
            except PreconditionError as exc:
                if cfg.construction:
                    raise
                skipped[name] = exc.reason
                continue
            result.setdefault("achievable", []).append({"report": rep, "certificate": cert})
            reports.append(rep)
        if skipped:
            result["skipped"] = skipped
    else:
        raise PreconditionError(f"unknown task {cfg.task!r}", "bad_task")
    code = EXIT_OK
    if cfg.sandwich:
        if cfg.task == "distillation-input-error":
            raise PreconditionError("the sandwich check covers formation and distillation", "bad_task")
        sw = tasks.sandwich_check(rho, theory, eps, cfg.task, tol=tol)
        result["sandwich"] = {"lower": sw.lower, "exact": sw.exact, "upper": sw.upper, "ok": sw.ok,
                              "diagnostic": sw.diagnostic, "exact_report": sw.reports["exact"]}
        if not sw.ok:
            code = EXIT_CERTIFICATE
    rows = [_bound_row(r) for r in reports]
    header = list(BOUND_HEADER)
    if cfg.sandwich:
        header += ["sandwich_lower_bits", "sandwich_exact_bits", "sandwich_upper_bits", "sandwich_ok"]
        s = result["sandwich"]
        rows = [r + [s["lower"], s["exact"], s["upper"], s["ok"]] for r in rows]
    return Outcome(code, {"config": cfg.echo(), **result}, (header, rows))


CERT_HEADER = ["construction", "valid", "min_choi_eig", "tp_residual", "freeness_residual",
               "commutation_residual", "fidelity", "epsilon"]


def _convert(cfg: RunConfig, tol: Tolerances) -> Outcome:
    theory = _load_theory(cfg.theory, cfg.ladder)
    rho = _load_state(cfg.state)
    eps = cfg.epsilon
    if cfg.target is not None:
        target = _load_state(cfg.target, "--target")
        res = tasks.exact_conversion_feasible(rho, target, eps, theory, cfg.op_class, tol=tol)
        header = ["feasible", "fidelity", "threshold", "one_sided", "op_class"]
        return Outcome(EXIT_OK, {"config": cfg.echo(), "oracle": res},
                       (header, [[res.feasible, res.fidelity, res.threshold, res.one_sided, res.op_class]]))
    if cfg.construction is None:
        raise PreconditionError("--construction or --target is required", "bad_variant")
    if cfg.construction in tasks.FORMATION_MAPS:
        rep, cert = tasks.formation_achievable(rho, theory, eps, cfg.construction, tol=tol)
    elif cfg.construction in tasks.DISTILLATION_MAPS:
        rep, cert = tasks.distillation_achievable(rho, theory, eps, cfg.construction, tol=tol)
    else:
        raise PreconditionError(f"unknown construction {cfg.construction!r}", "bad_variant")
    payload = {"config": cfg.echo(), "report": rep, "certificate": cert}
    if cert is None:
        return Outcome(EXIT_OK, payload, (CERT_HEADER, []))
    row = [cert.construction, cert.valid, cert.min_choi_eig, cert.tp_residual,
           cert.freeness.get("max"), cert.commutation, cert.fidelity, cert.epsilon]
    return Outcome(EXIT_OK, payload, (CERT_HEADER, [row]))


# ---------------------------------------------------------------------------
# dispatch


HANDLERS = {"measure": _measure, "golden": _golden, "classify": _classify, "bounds": _bounds,
            "convert": _convert}


def _tolerances(spec: str | None) -> Tolerances:
    if spec is None:
        return TOL
    try:
        return load_profile(spec)
    except (OSError, ValueError) as exc:
        raise InputError(f"cannot load tolerances {spec!r}: {exc}") from exc


def _failure(code: int, cfg: RunConfig, kind: str, message: str, **extra) -> Outcome:
    payload = {"config": cfg.echo(), "error": {"kind": kind, "message": message, **extra}}
    return Outcome(code, payload, (["error", "message"], [[kind, message]]), [message])


def execute(cfg: RunConfig) -> Outcome:
    """Run one configuration and map failures onto exit codes."""
    try:
        tol = _tolerances(cfg.tolerances)
        cfg.validate()
        if cfg.command == "batch":
            return _batch(cfg)
        return HANDLERS[cfg.command](cfg, tol)
    except InputError as exc:
        return _failure(EXIT_INPUT, cfg, "input", str(exc))
    except PreconditionError as exc:
        return _failure(EXIT_PRECONDITION, cfg, "precondition", str(exc), reason=exc.reason)
    except SolverFailure as exc:
        return _failure(EXIT_SOLVER, cfg, "solver", str(exc))
    except CertificateError as exc:
        extra = {"certificate": exc.certificate} if exc.certificate is not None else {}
        return _failure(EXIT_CERTIFICATE, cfg, "certificate", str(exc), **extra)


def emit(outcome: Outcome, cfg: RunConfig) -> str:
    text = outcome.render(cfg.fmt)
    if cfg.output is not None:
        Path(cfg.output).write_text(text, encoding="utf-8")
    return text


def _run_entry(entry: dict) -> dict:
    cfg = RunConfig(**entry)
    outcome = execute(cfg)
    emit(outcome, cfg)
    return {"command": cfg.command, "exit_code": outcome.code, "output": cfg.output,
            "result": None if cfg.output else json.loads(outcome.render("json"))}


def _batch(cfg: RunConfig) -> Outcome:
    if cfg.manifest is None:
        raise InputError("--manifest is required")
    try:
        manifest = io.read_json(cfg.manifest)
    except (OSError, ValueError) as exc:
        raise InputError(f"cannot read manifest {cfg.manifest!r}: {exc}") from exc
    runs = manifest.get("runs") if isinstance(manifest, dict) else manifest
    if not isinstance(runs, list):
        raise InputError("manifest must be a list of runs or an object with a 'runs' list")
    base = Path(cfg.manifest).parent
    entries = []
    allowed = set(RunConfig.__dataclass_fields__) - {"manifest", "jobs"}
    for i, run in enumerate(runs):
        if not isinstance(run, dict) or run.get("command") not in HANDLERS:
            raise InputError(f"run {i} needs a 'command' among {sorted(HANDLERS)}")
        unknown = set(run) - allowed - {"format"}
        if unknown:
            raise InputError(f"run {i} has unknown fields {sorted(unknown)}")
        entry = {k: v for k, v in run.items() if k != "format"}
        entry["fmt"] = run.get("format", "json")
        for key in ("state", "sigma", "target", "output"):
            if entry.get(key) is not None:
                entry[key] = str(base / entry[key])
        if entry.get("theory") and not str(entry["theory"]).startswith("builtin:"):
            entry["theory"] = str(base / entry["theory"])
        entry.setdefault("tolerances", cfg.tolerances)
        entries.append(entry)
    if cfg.jobs > 1 and len(entries) > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            results = list(pool.map(_run_entry, entries))
    else:
        results = [_run_entry(e) for e in entries]
    worst = max((r["exit_code"] for r in results), default=EXIT_OK)
    rows = [[i, r["command"], r["exit_code"], r["output"]] for i, r in enumerate(results)]
    return Outcome(worst, {"config": cfg.echo(), "runs": results},
                   (["index", "command", "exit_code", "output"], rows))


# ---------------------------------------------------------------------------
# click wiring


def _common(fn):
    options = [
        click.option("--theory", help="builtin:<name>[:params] or a theory JSON file."),
        click.option("--ladder", help="Dimension ladder: comma list, all, pow2 or squares."),
        click.option("--epsilon", type=float, default=0.0, show_default=True),
        click.option("--seed", type=int, default=None, help="Seed for heuristic searches."),
        click.option("--tolerances", default=None, help="Profile name or JSON override file."),
        click.option("--format", "fmt", type=click.Choice(["json", "csv"]), default="json",
                      show_default=True),
        click.option("--output", type=click.Path(dir_okay=False), default=None),
    ]
    for opt in reversed(options):
        fn = opt(fn)
    return fn


def _finish(command: str, **params):
    cfg = RunConfig(command=command, **params)
    outcome = execute(cfg)
    text = emit(outcome, cfg)
    if cfg.output is None:
        click.echo(text, nl=False)
    for msg in outcome.messages:
        click.echo(msg, err=True)
    sys.exit(outcome.code)


@click.group()
def main():
    """One-shot resource theory toolkit."""


@main.command()
@_common
@click.option("--state", help="State JSON file.")
@click.option("--sigma", help="Second state for two-state divergences.")
@click.option("--kind", type=click.Choice(MEASURE_KINDS), required=True)
@click.option("--coefficient", default="f", show_default=True,
              help="Coefficient kind for --kind modcoef.")
def measure(**params):
    """Evaluate a divergence or resource measure."""
    _finish("measure", **params)


@main.command("golden")
@_common
@click.option("--starts", type=int, default=64, show_default=True)
def golden_cmd(**params):
    """Search for the golden state of the theory's base dimension."""
    _finish("golden", **params)


@main.command()
@_common
def classify(**params):
    """Report convexity, affinity, finite robustness and constant trace."""
    _finish("classify", **params)


@main.command()
@_common
@click.option("--state", help="State JSON file.")
@click.option("--task", type=click.Choice(["formation", "distillation", "distillation-input-error"]),
              default="formation", show_default=True)
@click.option("--variant", default=None, help="Bound variant (formation lower or distillation upper).")
@click.option("--construction", default=None, help="Achievability construction to use.")
@click.option("--sandwich", is_flag=True, help="Also run the exact oracle and check the ordering.")
def bounds(**params):
    """Ladder bounds and achievability constructions."""
    _finish("bounds", **params)


@main.command()
@_common
@click.option("--state", help="Input state JSON file.")
@click.option("--target", default=None, help="Target state: run the exact feasibility oracle.")
@click.option("--construction", default=None, help="Build and certify this channel.")
@click.option("--op-class", type=click.Choice(["ng", "comm"]), default="ng", show_default=True)
def convert(**params):
    """Certify a conversion channel or decide exact feasibility."""
    _finish("convert", **params)


@main.command()
@click.option("--manifest", required=True, help="JSON list of runs.")
@click.option("--jobs", type=int, default=1, show_default=True)
@click.option("--tolerances", default=None)
@click.option("--format", "fmt", type=click.Choice(["json", "csv"]), default="json", show_default=True)
@click.option("--output", type=click.Path(dir_okay=False), default=None)
def batch(**params):
    """Run every configuration listed in a manifest."""
    _finish("batch", **params)


if __name__ == "__main__":
    main()
