"""Small dense LP/SDP layer.

A :class:`ConicProgram` is ``min c.x`` subject to ``A x = b`` over variables
laid out as ``[free | nonneg | Hermitian PSD blocks]``.  A Hermitian block of
size n is stored as n*n real parameters: the diagonal, then the real parts of
the strict upper triangle, then the imaginary parts (row-major ``i < j``).

Semidefinite programs go to the Clarabel interior point solver through the
real embedding ``[[Re X, -Im X], [Im X, Re X]]``; linear programs go to HiGHS.
:class:`Model` is a thin modeling front-end producing conic programs from
affine matrix expressions.
"""
from __future__ import annotations

import functools
import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import clarabel
import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog

from .config import TOL, Tolerances


class ProgramError(ValueError):
    """Malformed conic program."""


class SolverFailure(RuntimeError):
    """The backend could not certify an optimum."""

    def __init__(self, message: str, report: "SolveReport | None" = None):
        super().__init__(message)
        self.report = report


# ---------------------------------------------------------------------------
# Hermitian block parametrization


@functools.lru_cache(maxsize=None)
def herm_basis(n: int) -> np.ndarray:
    """Array of shape (n, n, n*n) mapping block parameters to the matrix."""
    basis = np.zeros((n, n, n * n), dtype=complex)
    for k in range(n):
        basis[k, k, k] = 1.0
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    off = len(pairs)
    for idx, (i, j) in enumerate(pairs):
        basis[i, j, n + idx] = 1.0
        basis[j, i, n + idx] = 1.0
        basis[i, j, n + off + idx] = 1j
        basis[j, i, n + off + idx] = -1j
    basis.setflags(write=False)
    return basis


def herm_params(x: np.ndarray) -> np.ndarray:
    """Inverse of :func:`herm_basis` for a Hermitian matrix."""
    x = np.asarray(x, dtype=complex)
    n = x.shape[0]
    iu = np.triu_indices(n, 1)
    return np.concatenate([x.diagonal().real, x[iu].real, x[iu].imag])


def herm_from_params(p: np.ndarray, n: int) -> np.ndarray:
    return herm_basis(n) @ np.asarray(p, dtype=float)


@functools.lru_cache(maxsize=None)
def _embed_svec(n: int) -> sp.csc_matrix:
    """Sparse map from block parameters to the scaled upper-triangle vector of
    the 2n real embedding, in Clarabel's column-major ordering."""
    m = 2 * n
    rows = [(r, c) for c in range(m) for r in range(c + 1)]
    index = {rc: k for k, rc in enumerate(rows)}
    basis = herm_basis(n)
    data, ri, ci = [], [], []
    for p in range(n * n):
        x = basis[:, :, p]
        emb = np.block([[x.real, -x.imag], [x.imag, x.real]])
        for (r, c), k in index.items():
            v = emb[r, c]
            if v != 0:
                data.append(v if r == c else v * math.sqrt(2))
                ri.append(k)
                ci.append(p)
    return sp.csc_matrix((data, (ri, ci)), shape=(len(rows), n * n))


# ---------------------------------------------------------------------------
# programs and reports


@dataclass
class ConicProgram:
    c: np.ndarray
    A: np.ndarray
    b: np.ndarray
    n_free: int = 0
    n_nonneg: int = 0
    blocks: Sequence[int] = ()

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float).reshape(-1)
        self.b = np.asarray(self.b, dtype=float).reshape(-1)
        self.A = np.asarray(self.A, dtype=float).reshape(len(self.b), -1) if len(self.b) else \
            np.zeros((0, self.c.size))
        self.blocks = tuple(int(n) for n in self.blocks)
        if any(n < 1 for n in self.blocks):
            raise ProgramError("block dimensions must be positive")
        if self.n_free < 0 or self.n_nonneg < 0:
            raise ProgramError("variable counts must be non-negative")
        if self.c.size != self.nvar:
            raise ProgramError(f"objective has {self.c.size} entries, expected {self.nvar}")
        if self.A.shape[1] != self.nvar:
            raise ProgramError(f"constraint rows have width {self.A.shape[1]}, expected {self.nvar}")
        if self.nvar == 0:
            raise ProgramError("program has no variables")

    @property
    def nvar(self) -> int:
        return self.n_free + self.n_nonneg + sum(n * n for n in self.blocks)

    def block_slices(self) -> list[slice]:
        start = self.n_free + self.n_nonneg
        out = []
        for n in self.blocks:
            out.append(slice(start, start + n * n))
            start += n * n
        return out

    def block_values(self, x: np.ndarray) -> list[np.ndarray]:
        return [herm_from_params(x[s], n) for s, n in zip(self.block_slices(), self.blocks)]


@dataclass
class SolveReport:
    status: str
    objective: float
    x: np.ndarray | None
    eq_residual: float
    min_block_eig: float
    gap: float = math.nan
    iterations: int = 0
    backend: str = ""
    detail: str = ""
    certificate: np.ndarray | None = field(default=None, repr=False)

    @property
    def optimal(self) -> bool:
        return self.status == "optimal"


def _residuals(p: ConicProgram, x: np.ndarray) -> tuple[float, float]:
    eq = float(np.max(np.abs(p.A @ x - p.b))) if p.A.shape[0] else 0.0
    eigs = []
    if p.n_nonneg:
        eigs.append(float(np.min(x[p.n_free:p.n_free + p.n_nonneg])))
    for blk in p.block_values(x):
        eigs.append(float(np.linalg.eigvalsh(blk)[0]))
    return eq, min(eigs) if eigs else math.inf


def _accept(p: ConicProgram, x: np.ndarray, tol: Tolerances, factor: float = 1.0) -> bool:
    eq, m = _residuals(p, x)
    scale = max(1.0, float(np.max(np.abs(p.b)))) if p.b.size else 1.0
    return eq <= factor * tol.eq_tol * scale and m >= -tol.psd_tol


# square-root fidelity blocks routinely converge with equality residuals
# just above eq_tol; a converged status earns one decade of leeway
CONVERGED_LEEWAY = 10.0


def solve_lp(p: ConicProgram, tol: Tolerances = TOL) -> SolveReport:
    """Solve a program without PSD blocks with HiGHS.

    An infeasible program carries a Farkas vector ``y`` with ``b.y = 1`` and
    ``A^T y <= 0`` on nonneg columns, ``= 0`` on free columns.
    """
    if p.blocks:
        raise ProgramError("solve_lp does not accept PSD blocks")
    bounds = [(None, None)] * p.n_free + [(0, None)] * p.n_nonneg
    res = linprog(p.c, A_eq=p.A if p.A.shape[0] else None, b_eq=p.b if p.A.shape[0] else None,
                  bounds=bounds, method="highs",
                  options={"primal_feasibility_tolerance": 1e-10,
                           "dual_feasibility_tolerance": 1e-10})
    if res.status == 0:
        x = np.asarray(res.x, dtype=float)
        eq, m = _residuals(p, x)
        gap = math.nan
        if getattr(res, "eqlin", None) is not None and p.A.shape[0]:
            gap = abs(float(res.fun) - float(p.b @ res.eqlin.marginals))
        return SolveReport("optimal", float(res.fun), x, eq, m, gap, int(res.nit), "highs")
    if res.status == 2:
        return SolveReport("infeasible", math.inf, None, math.nan, math.nan, backend="highs",
                           detail=res.message, certificate=_farkas(p))
    if res.status == 3:
        return SolveReport("unbounded", -math.inf, None, math.nan, math.nan, backend="highs",
                           detail=res.message)
    return SolveReport("max_iter", math.nan, None, math.nan, math.nan, backend="highs",
                       detail=res.message)


def _farkas(p: ConicProgram) -> np.ndarray | None:
    m = p.A.shape[0]
    if m == 0:
        return None
    a_free = p.A[:, :p.n_free]
    a_nn = p.A[:, p.n_free:]
    res = linprog(-p.b, A_ub=np.vstack([a_nn.T, p.b[None, :]]),
                  b_ub=np.concatenate([np.zeros(a_nn.shape[1]), [1.0]]),
                  A_eq=a_free.T if p.n_free else None, b_eq=np.zeros(p.n_free) if p.n_free else None,
                  bounds=[(None, None)] * m, method="highs")
    if res.status != 0 or -res.fun < 0.5:
        return None
    return np.asarray(res.x)


def _settings(tol: Tolerances) -> "clarabel.DefaultSettings":
    s = clarabel.DefaultSettings()
    s.verbose = False
    s.tol_gap_abs = tol.solver_gap
    s.tol_gap_rel = tol.solver_gap
    s.tol_feas = tol.solver_feas
    s.tol_ktratio = 1e-7
    s.max_iter = tol.solver_max_iter
    return s


_INFEASIBLE = {"PrimalInfeasible", "AlmostPrimalInfeasible"}
_UNBOUNDED = {"DualInfeasible", "AlmostDualInfeasible"}


def _polish(p: ConicProgram, x: np.ndarray, reach: float = 1e-6) -> np.ndarray:
    """Clip slightly negative nonneg entries and block eigenvalues to zero.

    Interior point iterates stop a few 1e-9 outside the cone; the equality
    residual is re-measured afterwards so the report stays honest.
    """
    x = x.copy()
    nn = slice(p.n_free, p.n_free + p.n_nonneg)
    x[nn] = np.where((x[nn] < 0) & (x[nn] > -reach), 0.0, x[nn])
    for sl, n in zip(p.block_slices(), p.blocks):
        w, v = np.linalg.eigh(herm_from_params(x[sl], n))
        if w[0] < 0 and w[0] > -reach:
            w = np.clip(w, 0.0, None)
            x[sl] = herm_params((v * w) @ v.conj().T)
    return x


def solve_sdp(p: ConicProgram, tol: Tolerances = TOL) -> SolveReport:
    """Solve a conic program with Clarabel."""
    nv = p.nvar
    m = p.A.shape[0]
    mats = [sp.csc_matrix(p.A)]
    rhs = [p.b]
    cones = []
    if m:
        cones.append(clarabel.ZeroConeT(m))
    if p.n_nonneg:
        sel = sp.hstack([sp.csc_matrix((p.n_nonneg, p.n_free)), -sp.identity(p.n_nonneg),
                         sp.csc_matrix((p.n_nonneg, nv - p.n_free - p.n_nonneg))])
        mats.append(sel)
        rhs.append(np.zeros(p.n_nonneg))
        cones.append(clarabel.NonnegativeConeT(p.n_nonneg))
    for sl, n in zip(p.block_slices(), p.blocks):
        e = _embed_svec(n)
        rows = sp.hstack([sp.csc_matrix((e.shape[0], sl.start)), -e,
                          sp.csc_matrix((e.shape[0], nv - sl.stop))])
        mats.append(rows)
        rhs.append(np.zeros(e.shape[0]))
        cones.append(clarabel.PSDTriangleConeT(2 * n))
    A = sp.csc_matrix(sp.vstack(mats))
    b = np.concatenate(rhs)
    P = sp.csc_matrix((nv, nv))
    sol = clarabel.DefaultSolver(P, p.c, A, b, cones, _settings(tol)).solve()
    name = str(sol.status).split(".")[-1]
    x = np.asarray(sol.x, dtype=float)
    gap = abs(sol.obj_val - sol.obj_val_dual)
    if name in _INFEASIBLE:
        return SolveReport("infeasible", math.inf, None, math.nan, math.nan, gap, sol.iterations,
                           "clarabel", name, certificate=np.asarray(sol.z)[:m])
    if name in _UNBOUNDED:
        return SolveReport("unbounded", -math.inf, None, math.nan, math.nan, gap, sol.iterations,
                           "clarabel", name)
    if name in ("Solved", "AlmostSolved", "InsufficientProgress"):
        x = _polish(p, x)
    eq, me = _residuals(p, x)
    # the duality gap is judged relative to the objective magnitude
    gap_ok = gap <= tol.opt_tol * max(1.0, abs(sol.obj_val))
    if name in ("Solved", "AlmostSolved", "InsufficientProgress") and gap_ok and _accept(p, x, tol):
        return SolveReport("optimal", float(p.c @ x), x, eq, me, gap, sol.iterations, "clarabel", name)
    if name in ("Solved", "AlmostSolved") and gap_ok and _accept(p, x, tol, CONVERGED_LEEWAY):
        return SolveReport("optimal", float(p.c @ x), x, eq, me, gap, sol.iterations, "clarabel",
                           name + "+leeway")
    return SolveReport("max_iter", float(p.c @ x), x, eq, me, gap, sol.iterations, "clarabel", name)


def solve(p: ConicProgram, tol: Tolerances = TOL) -> SolveReport:
    return solve_sdp(p, tol) if p.blocks else solve_lp(p, tol)


# ---------------------------------------------------------------------------
# modeling layer


class Expr:
    """Affine expression ``coef @ x + const`` in the real model variables."""

    __array_ufunc__ = None

    def __init__(self, model: "Model", coef: np.ndarray, const: np.ndarray):
        self.model = model
        self.coef = np.asarray(coef, dtype=complex)
        self.const = np.asarray(const, dtype=complex)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.const.shape

    @property
    def ndim(self) -> int:
        return self.const.ndim

    def padded(self, nv: int | None = None) -> np.ndarray:
        nv = self.model.nvar if nv is None else nv
        have = self.coef.shape[-1]
        if have == nv:
            return self.coef
        pad = np.zeros(self.coef.shape[:-1] + (nv - have,), dtype=complex)
        return np.concatenate([self.coef, pad], axis=-1)

    def _lift(self, fn: Callable[[np.ndarray], np.ndarray]) -> "Expr":
        """Apply a batch-aware linear map to every coefficient slice."""
        stacked = np.concatenate([self.const[None], np.moveaxis(self.coef, -1, 0)])
        out = np.asarray(fn(stacked))
        return Expr(self.model, np.moveaxis(out[1:], 0, -1), out[0])

    def _coerce(self, other) -> "Expr":
        if isinstance(other, Expr):
            return other
        return self.model.constant(other)

    def __add__(self, other):
        other = self._coerce(other)
        nv = max(self.coef.shape[-1], other.coef.shape[-1])
        return Expr(self.model, self.padded(nv) + other.padded(nv), self.const + other.const)

    __radd__ = __add__

    def __neg__(self):
        return Expr(self.model, -self.coef, -self.const)

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, Expr):
            raise TypeError("product of two expressions is not affine")
        arr = np.asarray(other)
        extra = max(0, arr.ndim - self.ndim)

        def scale(a):
            return a.reshape(a.shape[:1] + (1,) * extra + a.shape[1:]) * arr
        return self._lift(scale)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return self * (1.0 / other)

    def __matmul__(self, other):
        if isinstance(other, Expr):
            raise TypeError("product of two expressions is not affine")
        m = np.asarray(other)
        return self._lift(lambda a: a @ m)

    def __rmatmul__(self, other):
        m = np.asarray(other)
        return self._lift(lambda a: m @ a)

    def __getitem__(self, idx):
        if not isinstance(idx, tuple):
            idx = (idx,)
        return self._lift(lambda a: a[(slice(None),) + idx])

    @property
    def T(self) -> "Expr":
        return self._lift(lambda a: np.swapaxes(a, -1, -2))

    @property
    def H(self) -> "Expr":
        return self._lift(lambda a: np.conj(np.swapaxes(a, -1, -2)))

    def conj(self) -> "Expr":
        return self._lift(np.conj)

    @property
    def real(self) -> "Expr":
        # all model variables are real
        return Expr(self.model, self.coef.real, self.const.real)

    @property
    def imag(self) -> "Expr":
        return Expr(self.model, self.coef.imag, self.const.imag)

    def trace(self) -> "Expr":
        return self._lift(lambda a: np.trace(a, axis1=-2, axis2=-1))

    def sum(self, axis=None) -> "Expr":
        if axis is None:
            return self._lift(lambda a: a.reshape(a.shape[0], -1).sum(axis=1))
        ax = axis + 1 if axis >= 0 else axis
        return self._lift(lambda a: a.sum(axis=ax))

    def reshape(self, *shape) -> "Expr":
        if len(shape) == 1 and isinstance(shape[0], tuple):
            shape = shape[0]
        return self._lift(lambda a: a.reshape((a.shape[0],) + tuple(shape)))

    def transpose(self, axes: Sequence[int]) -> "Expr":
        return self._lift(lambda a: a.transpose((0,) + tuple(i + 1 for i in axes)))

    def ptrace(self, dims: Sequence[int], keep: Sequence[int]) -> "Expr":
        return self._lift(lambda a: batch_partial_trace(a, dims, keep))

    def ptranspose(self, dims: Sequence[int], sys: int = 1) -> "Expr":
        return self._lift(lambda a: batch_partial_transpose(a, dims, sys))

    def value(self, x: np.ndarray) -> np.ndarray:
        return self.padded(x.size) @ x + self.const


def batch_partial_trace(a: np.ndarray, dims: Sequence[int], keep: Sequence[int]) -> np.ndarray:
    dims = list(dims)
    n = len(dims)
    batch = a.shape[:-2]
    t = a.reshape(batch + tuple(dims + dims))
    letters = "abcdefghijklmnopqrstuvwxyz"
    row = list(letters[:n])
    col = list(letters[n:2 * n])
    keep = sorted(keep)
    for i in range(n):
        if i not in keep:
            col[i] = row[i]
    out = "".join(row[i] for i in keep) + "".join(col[i] for i in keep)
    res = np.einsum("..." + "".join(row) + "".join(col) + "->..." + out, t)
    dk = int(np.prod([dims[i] for i in keep])) if keep else 1
    return res.reshape(batch + (dk, dk))


def batch_partial_transpose(a: np.ndarray, dims: Sequence[int], sys: int = 1) -> np.ndarray:
    dims = list(dims)
    n = len(dims)
    batch = a.shape[:-2]
    d = int(np.prod(dims))
    t = a.reshape(batch + tuple(dims + dims))
    k = len(batch)
    axes = list(range(t.ndim))
    axes[k + sys], axes[k + n + sys] = axes[k + n + sys], axes[k + sys]
    return t.transpose(axes).reshape(batch + (d, d))


def inner(c: np.ndarray, x: Expr) -> Expr:
    """``Tr(c^dagger x)`` for a constant matrix ``c``."""
    c = np.conj(np.asarray(c))
    return x._lift(lambda a: np.einsum("ij,...ij->...", c, a))


def combine(weights: Expr, mats: Sequence[np.ndarray] | np.ndarray) -> Expr:
    """``sum_k weights[k] * mats[k]`` for a vector expression of weights."""
    stack = np.asarray(mats)
    return weights._lift(lambda a: np.tensordot(a, stack, axes=([-1], [0])))


def choi_apply(choi: Expr | np.ndarray, rho, d_in: int, d_out: int):
    """Apply a map in Choi form; either argument may be an expression."""
    if isinstance(choi, Expr):
        r = np.asarray(rho)
        return choi._lift(lambda a: np.einsum(
            "ij,...iajb->...ab", r, a.reshape(a.shape[:-2] + (d_in, d_out, d_in, d_out))))
    j4 = np.asarray(choi).reshape(d_in, d_out, d_in, d_out)
    return rho._lift(lambda a: np.einsum("...ij,iajb->...ab", a, j4))


class Model:
    """Incrementally built conic program over real parameters."""

    def __init__(self, tol: Tolerances = TOL):
        self.tol = tol
        self.nvar = 0
        self._kind: list[int] = []
        self._blocks: list[tuple[int, int]] = []
        self._rows: list[tuple[np.ndarray, float]] = []
        self._objective: Expr | None = None
        self._sense = 1.0
        self._trivially_infeasible = False

    # variables
    def _alloc(self, count: int, kind: int) -> np.ndarray:
        start = self.nvar
        self.nvar += count
        self._kind.extend([kind] * count)
        return np.arange(start, start + count)

    def _unit(self, idx: np.ndarray, shape) -> Expr:
        coef = np.zeros(tuple(shape) + (self.nvar,), dtype=complex)
        flat = coef.reshape(-1, self.nvar)
        flat[np.arange(idx.size), idx] = 1.0
        return Expr(self, coef, np.zeros(shape, dtype=complex))

    def constant(self, value) -> Expr:
        v = np.asarray(value, dtype=complex)
        return Expr(self, np.zeros(v.shape + (0,), dtype=complex), v)

    def free(self, shape=()) -> Expr:
        shape = (shape,) if isinstance(shape, int) else tuple(shape)
        return self._unit(self._alloc(int(np.prod(shape, dtype=int)), 0), shape)

    def nonneg(self, shape=()) -> Expr:
        shape = (shape,) if isinstance(shape, int) else tuple(shape)
        return self._unit(self._alloc(int(np.prod(shape, dtype=int)), 1), shape)

    def _herm(self, n: int, kind: int) -> Expr:
        idx = self._alloc(n * n, kind)
        coef = np.zeros((n, n, self.nvar), dtype=complex)
        coef[:, :, idx] = herm_basis(n)
        return Expr(self, coef, np.zeros((n, n), dtype=complex))

    def hermitian(self, n: int) -> Expr:
        return self._herm(n, 0)

    def psd(self, n: int) -> Expr:
        self._blocks.append((self.nvar, n))
        expr = self._herm(n, 2 + len(self._blocks) - 1)
        expr._block = len(self._blocks) - 1
        return expr

    # constraints
    def _add_real_rows(self, coef: np.ndarray, const: np.ndarray):
        coef = coef.reshape(-1, coef.shape[-1]).real
        const = const.reshape(-1).real
        scale = np.max(np.abs(coef), axis=1) if coef.shape[1] else np.zeros(len(const))
        for row, c, s in zip(coef, const, scale):
            if s <= 1e-14:
                if abs(c) > self.tol.eq_tol:
                    self._trivially_infeasible = True
                continue
            self._rows.append((row, -c))

    def add_eq(self, lhs, rhs=0.0):
        e = lhs - rhs if isinstance(lhs, Expr) else self._coerce(lhs) - rhs
        coef = e.padded()
        const = e.const
        if e.ndim == 2 and e.shape[0] == e.shape[1] and _is_hermitian_expr(coef, const):
            n = e.shape[0]
            iu = np.triu_indices(n, 1)
            diag = np.arange(n)
            self._add_real_rows(coef[diag, diag].real, const[diag, diag].real)
            self._add_real_rows(coef[iu].real, const[iu].real)
            self._add_real_rows(coef[iu].imag, const[iu].imag)
            return
        self._add_real_rows(coef.real, const.real)
        self._add_real_rows(coef.imag, const.imag)

    def _coerce(self, v) -> Expr:
        return v if isinstance(v, Expr) else self.constant(v)

    def add_psd(self, expr) -> Expr:
        """Constrain a Hermitian expression to be PSD; returns the block."""
        if isinstance(expr, Expr) and getattr(expr, "_block", None) is not None:
            return expr
        expr = self._coerce(expr)
        n = expr.shape[0]
        block = self.psd(n)
        self.add_eq(block, expr)
        return block

    def add_ge(self, lhs, rhs=0.0):
        e = self._coerce(lhs) - rhs
        slack = self.nonneg(e.shape)
        self.add_eq(e.real, slack)

    def add_le(self, lhs, rhs=0.0):
        self.add_ge(self._coerce(rhs) - lhs, 0.0)

    def minimize(self, expr):
        self._objective, self._sense = self._coerce(expr).real, 1.0

    def maximize(self, expr):
        self._objective, self._sense = self._coerce(expr).real, -1.0

    # compile and solve
    def compile(self) -> tuple[ConicProgram, np.ndarray]:
        kinds = np.asarray(self._kind, dtype=int)
        free = np.flatnonzero(kinds == 0)
        nonneg = np.flatnonzero(kinds == 1)
        block_cols = [np.arange(s, s + n * n) for s, n in self._blocks]
        perm = np.concatenate([free, nonneg] + block_cols).astype(int)
        obj = self._objective if self._objective is not None else self.constant(0.0)
        c = self._sense * obj.padded().real.reshape(-1)
        if self._rows:
            A = np.zeros((len(self._rows), self.nvar))
            for k, (row, _) in enumerate(self._rows):
                A[k, :row.size] = row
            b = np.array([v for _, v in self._rows])
        else:
            A, b = np.zeros((0, self.nvar)), np.zeros(0)
        prog = ConicProgram(c[perm], A[:, perm], b, len(free), len(nonneg),
                            [n for _, n in self._blocks])
        return prog, perm

    def solve(self, require_optimal: bool = True) -> "ModelResult":
        if self._trivially_infeasible:
            rep = SolveReport("infeasible", math.inf, None, math.nan, math.nan, detail="constant row")
            return ModelResult(self, rep, None, require_optimal)
        prog, perm = self.compile()
        rep = solve(prog, self.tol)
        x = None
        if rep.x is not None:
            x = np.empty(self.nvar)
            x[perm] = rep.x
        const = self._objective.const.real if self._objective is not None else 0.0
        if rep.status == "optimal":
            rep.objective = self._sense * rep.objective + float(const)
        return ModelResult(self, rep, x, require_optimal)


def _is_hermitian_expr(coef: np.ndarray, const: np.ndarray) -> bool:
    ct = np.conj(np.swapaxes(coef, 0, 1))
    scale = max(1.0, float(np.max(np.abs(coef))) if coef.size else 1.0)
    return (np.max(np.abs(coef - ct), initial=0.0) <= 1e-12 * scale and
            np.max(np.abs(const - const.conj().T), initial=0.0) <= 1e-12 * max(1.0, np.max(np.abs(const), initial=0.0)))


@dataclass
class ModelResult:
    model: Model
    report: SolveReport
    x: np.ndarray | None
    require_optimal: bool = True

    def __post_init__(self):
        if self.require_optimal and self.report.status != "optimal":
            raise SolverFailure(f"solver status {self.report.status} ({self.report.detail})", self.report)

    @property
    def status(self) -> str:
        return self.report.status

    @property
    def objective(self) -> float:
        return self.report.objective

    def value(self, expr: Expr) -> np.ndarray:
        if self.x is None:
            raise SolverFailure("no primal solution available", self.report)
        v = expr.value(self.x)
        return v


# ---------------------------------------------------------------------------
# brute-force oracle


@dataclass
class GridResult:
    value: float
    argmax: np.ndarray
    gap: float
    points: int


def _simplex_grid(k: int, steps: int) -> np.ndarray:
    pts = []
    for bars in itertools.combinations(range(steps + k - 1), k - 1):
        prev = -1
        comp = []
        for b in bars:
            comp.append(b - prev - 1)
            prev = b
        comp.append(steps + k - 2 - prev)
        pts.append(comp)
    return np.asarray(pts, dtype=float) / steps


def grid_oracle(objective: Callable[[np.ndarray], float], free_set, resolution: float,
                lipschitz: float = 1.0, max_points: int = 2_000_000) -> GridResult:
    """Brute-force maximum of ``objective`` over a free set.

    The gap bounds the distance to the true optimum for an objective that is
    ``lipschitz``-continuous in trace norm.
    """
    kind = free_set.kind
    if kind == "gibbs":
        tau = free_set.gibbs_state()
        return GridResult(float(objective(tau)), tau, 0.0, 1)
    if kind == "vertex_polytope" and free_set.dim == 2 and len(free_set.vertices) == 6:
        steps = int(round(1.0 / resolution))
        axis = np.linspace(-1.0, 1.0, 2 * steps + 1)
        best, arg, count = -math.inf, None, 0
        pauli = np.array([[[0, 1], [1, 0]], [[0, -1j], [1j, 0]], [[1, 0], [0, -1]]])
        for x in axis:
            for y in axis:
                zmax = 1.0 - abs(x) - abs(y)
                if zmax < -1e-12:
                    continue
                for z in axis[np.abs(axis) <= zmax + 1e-12]:
                    rho = 0.5 * (np.eye(2) + x * pauli[0] + y * pauli[1] + z * pauli[2])
                    v = float(objective(rho))
                    count += 1
                    if v > best:
                        best, arg = v, rho
        return GridResult(best, arg, lipschitz * math.sqrt(3) * resolution, count)
    if kind in ("vertex_polytope", "diagonal"):
        verts = np.asarray(free_set.extreme_points())
        k = len(verts)
        steps = max(1, int(round(1.0 / resolution)))
        if math.comb(steps + k - 1, k - 1) > max_points:
            raise ValueError("grid too fine for this free set; raise the resolution")
        weights = _simplex_grid(k, steps)
        best, arg = -math.inf, None
        for w in weights:
            rho = np.tensordot(w, verts, axes=1)
            v = float(objective(rho))
            if v > best:
                best, arg = v, rho
        return GridResult(best, arg, lipschitz * (k - 1) / steps, len(weights))
    raise ValueError(f"grid oracle does not support free set kind {kind!r}")
