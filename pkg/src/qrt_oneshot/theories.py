"""Free-state sets, resource destroying maps, reference families and the
built-in resource theories."""
from __future__ import annotations

import functools
import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import core
from .config import TOL, Tolerances
from .conic import ConicProgram, Model, herm_from_params, herm_params, inner, solve_lp
from .core import ChannelChoi, DimensionError, StateError
from .errors import PreconditionError

# ---------------------------------------------------------------------------
# free-state sets


class FreeStateSet:
    kind = ""

    def extreme_points(self) -> list[np.ndarray]:
        raise NotImplementedError

    def contains_maximally_mixed(self) -> bool:
        return membership(np.eye(self.dim) / self.dim, self).inside

    def to_json(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True, eq=False)
class VertexPolytope(FreeStateSet):
    vertices: tuple
    kind = "vertex_polytope"

    def __post_init__(self):
        if not self.vertices:
            raise StateError("free set needs at least one vertex")
        verts = tuple(core.density_matrix(v) for v in self.vertices)
        dims = {v.shape[0] for v in verts}
        if len(dims) != 1:
            raise DimensionError("vertices have different dimensions")
        object.__setattr__(self, "vertices", verts)

    @property
    def dim(self) -> int:
        return self.vertices[0].shape[0]

    def extreme_points(self) -> list[np.ndarray]:
        return list(self.vertices)

    @functools.cached_property
    def vertex_params(self) -> np.ndarray:
        """Real parameter vectors of the vertices as columns."""
        return np.stack([herm_params(v) for v in self.vertices], axis=1)

    def to_json(self) -> dict:
        from .io import matrix_to_json
        return {"kind": self.kind, "dim": self.dim,
                "vertices": [matrix_to_json(v) for v in self.vertices]}


@dataclass(frozen=True, eq=False)
class DiagonalSimplex(FreeStateSet):
    dim: int
    basis: np.ndarray | None = None
    kind = "diagonal"

    def __post_init__(self):
        if self.dim < 1:
            raise DimensionError("dimension must be positive")
        if self.basis is not None:
            u = np.asarray(self.basis, dtype=complex)
            if u.shape != (self.dim, self.dim) or core.max_abs(u.conj().T @ u - np.eye(self.dim)) > 1e-10:
                raise StateError("basis must be a unitary matrix")
            object.__setattr__(self, "basis", u)

    @property
    def unitary(self) -> np.ndarray:
        return np.eye(self.dim, dtype=complex) if self.basis is None else self.basis

    def extreme_points(self) -> list[np.ndarray]:
        u = self.unitary
        return [core.projector(u[:, i]) for i in range(self.dim)]

    def dephase(self, x: np.ndarray) -> np.ndarray:
        u = self.unitary
        y = u.conj().T @ x @ u
        return u @ np.diag(np.diag(y)) @ u.conj().T

    def to_json(self) -> dict:
        out = {"kind": self.kind, "dim": self.dim}
        if self.basis is not None:
            from .io import matrix_to_json
            out["basis"] = matrix_to_json(self.basis)
        return out


def gibbs_weights(energies: Sequence[float], temperature: float) -> np.ndarray:
    e = np.asarray(energies, dtype=float)
    w = np.exp(-(e - e.min()) / temperature)
    return w / w.sum()


@dataclass(frozen=True, eq=False)
class GibbsSingleton(FreeStateSet):
    energies: tuple
    temperature: float
    kind = "gibbs"

    def __post_init__(self):
        e = tuple(float(x) for x in self.energies)
        if not e or not all(math.isfinite(x) for x in e):
            raise StateError("energies must be finite")
        if not (self.temperature > 0 and math.isfinite(self.temperature)):
            raise StateError("temperature must be positive")
        object.__setattr__(self, "energies", e)

    @property
    def dim(self) -> int:
        return len(self.energies)

    def weights(self) -> np.ndarray:
        return gibbs_weights(self.energies, self.temperature)

    def gibbs_state(self) -> np.ndarray:
        return np.diag(self.weights()).astype(complex)

    def extreme_points(self) -> list[np.ndarray]:
        return [self.gibbs_state()]

    def to_json(self) -> dict:
        return {"kind": self.kind, "dim": self.dim, "energies": list(self.energies),
                "temperature": self.temperature}


@dataclass(frozen=True, eq=False)
class SeparablePPT2x2(FreeStateSet):
    kind = "ppt_2x2"
    dim = 4
    dims = (2, 2)

    def extreme_points(self) -> list[np.ndarray]:
        raise PreconditionError("the separable set has no finite vertex list", "no_vertices")

    def probe_states(self) -> list[np.ndarray]:
        """Products of single-qubit Pauli eigenstates (36 states)."""
        singles = [core.projector(v) for v in _pauli_eigenvectors()]
        return [np.kron(a, b) for a in singles for b in singles]

    def to_json(self) -> dict:
        return {"kind": self.kind, "dim": 4}


def _pauli_eigenvectors() -> list[np.ndarray]:
    s = 1 / math.sqrt(2)
    return [np.array([1, 0]), np.array([0, 1]), np.array([s, s]), np.array([s, -s]),
            np.array([s, 1j * s]), np.array([s, -1j * s])]


# ---------------------------------------------------------------------------
# membership


@dataclass
class Membership:
    inside: bool
    residual: float
    certificate: dict = field(default_factory=dict)


def dual_matrix(y: np.ndarray, n: int) -> np.ndarray:
    """Hermitian W with ``Tr(W M) = y . herm_params(M)``."""
    y = np.asarray(y, dtype=float)
    scale = np.concatenate([np.ones(n), np.full(n * n - n, 0.5)])
    return herm_from_params(y * scale, n)


def polytope_distance(rho: np.ndarray, F: VertexPolytope) -> tuple[float, np.ndarray]:
    """Min over convex weights w of max-abs of the parameters of sum_i w_i v_i - rho."""
    V = F.vertex_params
    n_p, k = V.shape
    # columns: s (free residual) | w, t, u, v (nonneg) with -t <= s <= t
    ncol = n_p + k + 1 + 2 * n_p
    r = np.arange(n_p)
    w_cols = n_p + np.arange(k)
    t_col = n_p + k
    u_cols = t_col + 1 + r
    v_cols = u_cols + n_p
    A = np.zeros((3 * n_p, ncol))
    b = np.zeros(3 * n_p)
    A[np.ix_(r, w_cols)] = V
    A[r, r] = 1.0
    b[:n_p] = herm_params(rho)
    A[n_p + r, r] = 1.0
    A[n_p + r, t_col] = -1.0
    A[n_p + r, u_cols] = 1.0
    A[2 * n_p + r, r] = 1.0
    A[2 * n_p + r, t_col] = 1.0
    A[2 * n_p + r, v_cols] = -1.0
    c = np.zeros(ncol)
    c[t_col] = 1.0
    rep = solve_lp(ConicProgram(c, A, b, n_p, ncol - n_p))
    if rep.status != "optimal":
        raise RuntimeError(f"membership LP failed: {rep.status}")
    return max(0.0, rep.objective), rep.x[w_cols]


def separating_witness(rho: np.ndarray, F: VertexPolytope) -> np.ndarray | None:
    """Hermitian X with Tr(X v) <= 1 on vertices and Tr(X rho) = 2, if one exists."""
    V = F.vertex_params
    prog = ConicProgram(np.zeros(V.shape[1]), V, herm_params(rho), 0, V.shape[1])
    rep = solve_lp(prog)
    if rep.status != "infeasible" or rep.certificate is None:
        return None
    w = dual_matrix(rep.certificate, F.dim)
    return np.eye(F.dim) + w


def membership(rho, F: FreeStateSet, tol: Tolerances = TOL) -> Membership:
    rho = core.density_matrix(rho, F.dim, tol=tol)
    if isinstance(F, VertexPolytope):
        dist, w = polytope_distance(rho, F)
        inside = dist <= tol.membership_tol
        cert = {"weights": w} if inside else {"witness": separating_witness(rho, F)}
        return Membership(inside, dist, cert)
    if isinstance(F, DiagonalSimplex):
        u = F.unitary
        y = u.conj().T @ rho @ u
        off = core.max_abs(y - np.diag(np.diag(y)))
        return Membership(off <= tol.membership_tol, off, {"weights": np.diag(y).real})
    if isinstance(F, GibbsSingleton):
        dist = core.max_abs(rho - F.gibbs_state())
        return Membership(dist <= tol.membership_tol, dist, {"gibbs": F.gibbs_state()})
    if isinstance(F, SeparablePPT2x2):
        m = core.min_eig(core.partial_transpose(rho, F.dims, 1))
        return Membership(m >= -tol.psd_tol, max(0.0, -m), {"min_pt_eig": m})
    raise PreconditionError(f"unsupported free set {F!r}", "unsupported_free_set")


def membership_residual(x: np.ndarray, F: FreeStateSet) -> float:
    """Distance-like residual of a (possibly slightly invalid) state from F."""
    x = core.herm(np.asarray(x, dtype=complex))
    if isinstance(F, VertexPolytope):
        return polytope_distance(x, F)[0]
    if isinstance(F, DiagonalSimplex):
        u = F.unitary
        y = u.conj().T @ x @ u
        return max(core.max_abs(y - np.diag(np.diag(y))), max(0.0, -float(np.min(np.diag(y).real))))
    if isinstance(F, GibbsSingleton):
        return core.max_abs(x - F.gibbs_state())
    if isinstance(F, SeparablePPT2x2):
        return max(0.0, -core.min_eig(core.partial_transpose(x, F.dims, 1)), -core.min_eig(x))
    raise PreconditionError(f"unsupported free set {F!r}", "unsupported_free_set")


# ---------------------------------------------------------------------------
# resource destroying maps


class RdMapSpec:
    is_channel = True
    is_exact = False
    is_pseudo = False
    name = ""

    def superop(self) -> np.ndarray:
        raise NotImplementedError

    def apply(self, rho: np.ndarray) -> np.ndarray:
        return core.apply_superop(self.superop(), np.asarray(rho, dtype=complex))

    def choi(self) -> ChannelChoi:
        return ChannelChoi.from_superop(self.superop(), self.dim, self.dim)

    def to_json(self) -> dict:
        return {"kind": self.name, "dim": self.dim}


@dataclass(frozen=True, eq=False)
class CompleteDephasing(RdMapSpec):
    dim: int
    basis: np.ndarray | None = None
    name = "complete_dephasing"
    is_exact = True

    def superop(self) -> np.ndarray:
        return _superop_cache(self)

    def apply(self, rho):
        return DiagonalSimplex(self.dim, self.basis).dephase(np.asarray(rho, dtype=complex))


@dataclass(frozen=True, eq=False)
class ConstantState(RdMapSpec):
    sigma: np.ndarray
    name = "constant_state"
    is_exact = True

    @property
    def dim(self) -> int:
        return np.asarray(self.sigma).shape[0]

    def superop(self) -> np.ndarray:
        return ChannelChoi.replacement(self.dim, np.asarray(self.sigma, dtype=complex)).superop()

    def apply(self, rho):
        return np.trace(rho) * np.asarray(self.sigma, dtype=complex)

    def to_json(self) -> dict:
        from .io import matrix_to_json
        return {"kind": self.name, "sigma": matrix_to_json(self.sigma)}


@dataclass(frozen=True, eq=False)
class FiniteGroupTwirl(RdMapSpec):
    unitaries: tuple
    name = "group_twirl"
    is_exact = True

    @property
    def dim(self) -> int:
        return np.asarray(self.unitaries[0]).shape[0]

    def superop(self) -> np.ndarray:
        us = [np.asarray(u, dtype=complex) for u in self.unitaries]
        return sum(np.kron(u, u.conj()) for u in us) / len(us)

    def to_json(self) -> dict:
        from .io import matrix_to_json
        return {"kind": self.name, "unitaries": [matrix_to_json(u) for u in self.unitaries]}


@dataclass(frozen=True, eq=False)
class DepolarizingPseudo(RdMapSpec):
    """``N_p(w) = (1-p) w + p Tr(w) I/d``; it lands in F without fixing it."""

    dim: int
    p: float
    name = "depolarizing"
    is_pseudo = True

    @property
    def is_channel(self) -> bool:
        return 0.0 <= self.p <= 1.0 + 1e-12

    def superop(self) -> np.ndarray:
        return ChannelChoi.depolarizing(self.dim, self.p).superop()

    def to_json(self) -> dict:
        return {"kind": self.name, "dim": self.dim, "p": self.p}


@dataclass(frozen=True, eq=False)
class LinearCustom(RdMapSpec):
    matrix: np.ndarray
    declared_channel: bool = True
    exact: bool = False
    name = "linear_custom"

    @property
    def dim(self) -> int:
        return int(round(math.sqrt(np.asarray(self.matrix).shape[0])))

    @property
    def is_channel(self) -> bool:
        return self.declared_channel

    @property
    def is_exact(self) -> bool:
        return self.exact

    def superop(self) -> np.ndarray:
        return np.asarray(self.matrix, dtype=complex)

    def to_json(self) -> dict:
        from .io import matrix_to_json
        return {"kind": self.name, "superoperator": matrix_to_json(self.matrix),
                "is_channel": self.declared_channel, "is_exact": self.exact}


_SUPEROP: dict = {}


def _superop_cache(spec: CompleteDephasing) -> np.ndarray:
    key = (spec.dim, None if spec.basis is None else np.asarray(spec.basis).tobytes())
    if key not in _SUPEROP:
        _SUPEROP[key] = ChannelChoi.dephasing(spec.dim, spec.basis).superop()
    return _SUPEROP[key]


def apply_rd_map(spec: RdMapSpec, rho) -> np.ndarray:
    rho = core.density_matrix(rho, spec.dim)
    out = core.herm(spec.apply(rho))
    if isinstance(spec, LinearCustom):
        core.density_matrix(out)
    return out


def check_rd_map(spec: RdMapSpec, F: FreeStateSet, samples: int = 8, seed: int = 0,
                 tol: float = 1e-8) -> float:
    """Largest fixed-point violation on sampled free states (0 for pseudo maps
    when the images land in F)."""
    rng = np.random.default_rng(seed)
    pts = _free_samples(F, samples, rng)
    worst = 0.0
    for s in pts:
        out = spec.apply(s)
        if spec.is_pseudo:
            worst = max(worst, membership_residual(out, F))
        else:
            worst = max(worst, core.max_abs(out - s))
    return worst


def _free_samples(F: FreeStateSet, count: int, rng: np.random.Generator) -> list[np.ndarray]:
    if isinstance(F, SeparablePPT2x2):
        out = []
        for _ in range(count):
            a, b = core.random_density(2, rng), core.random_density(2, rng)
            out.append(np.kron(a, b))
        return out
    pts = F.extreme_points()
    out = list(pts)
    for _ in range(count):
        w = rng.dirichlet(np.ones(len(pts)))
        out.append(np.tensordot(w, np.asarray(pts), axes=1))
    return out


def random_free_state(F: FreeStateSet, rng: np.random.Generator) -> np.ndarray:
    return _free_samples(F, 1, rng)[-1]


# ---------------------------------------------------------------------------
# reference families


LadderSpec = str | Sequence[int]


def parse_ladder(spec: LadderSpec, cap: int = 8, base: int = 2) -> tuple[int, ...]:
    if isinstance(spec, str):
        if spec == "all":
            return tuple(range(2, cap + 1))
        if spec == "pow2":
            return tuple(2 ** k for k in range(1, 64) if 2 ** k <= cap)
        if spec == "squares":
            return tuple(k * k for k in range(2, cap + 1) if k * k <= cap)
        if spec == "powers":
            return tuple(base ** k for k in range(1, 64) if base ** k <= cap)
        parts = [int(p) for p in spec.replace(";", ",").split(",") if p.strip()]
    else:
        parts = [int(p) for p in spec]
    ladder = tuple(parts)
    if not ladder or any(b <= a for a, b in zip(ladder, ladder[1:])) or ladder[0] < 1:
        raise ValueError(f"ladder must be a strictly increasing list of dimensions: {spec!r}")
    return ladder


@dataclass(frozen=True, eq=False)
class ReferenceFamily:
    """Reference states indexed by the dimension ladder."""

    ladder: tuple
    constructor: Callable[[int], np.ndarray]
    tag: str = "explicit"

    def __post_init__(self):
        object.__setattr__(self, "ladder", parse_ladder(self.ladder))

    def _check(self, d: int):
        if d not in self.ladder:
            raise PreconditionError(f"dimension {d} is not on the ladder {self.ladder}", "not_on_ladder")

    def ket(self, d: int) -> np.ndarray | None:
        """State vector for pure families, otherwise None."""
        self._check(d)
        s = np.asarray(self.constructor(d), dtype=complex)
        if s.ndim == 1:
            return s
        if core.is_pure(s, 1e-12):
            return core.pure_vector(s)
        return None

    def state(self, d: int) -> np.ndarray:
        self._check(d)
        s = np.asarray(self.constructor(d), dtype=complex)
        out = core.projector(s) if s.ndim == 1 else s
        if out.shape != (d, d):
            raise DimensionError(f"reference state for d={d} has shape {out.shape}")
        return out

    def is_pure(self) -> bool:
        return all(self.ket(d) is not None for d in self.ladder)

    def neighbors(self, d: int) -> tuple[int | None, int | None]:
        self._check(d)
        i = self.ladder.index(d)
        down = self.ladder[i - 1] if i > 0 else None
        up = self.ladder[i + 1] if i + 1 < len(self.ladder) else None
        return down, up

    def restrict(self, ladder: LadderSpec) -> "ReferenceFamily":
        return ReferenceFamily(parse_ladder(ladder), self.constructor, self.tag)


def reference_state(family: ReferenceFamily, d: int) -> np.ndarray:
    return family.state(d)


def neighbors(family: ReferenceFamily, d: int) -> tuple[int | None, int | None]:
    return family.neighbors(d)


def tensor_power_family(seed: np.ndarray, ladder: LadderSpec) -> ReferenceFamily:
    seed = np.asarray(seed, dtype=complex)
    base = seed.shape[0]

    def build(d: int) -> np.ndarray:
        k = round(math.log(d, base))
        if base ** k != d:
            raise PreconditionError(f"{d} is not a power of {base}", "not_on_ladder")
        return core.kron_all([seed] * k)
    return ReferenceFamily(parse_ladder(ladder, base=base), build, "tensor_power")


def explicit_family(states: dict[int, np.ndarray]) -> ReferenceFamily:
    table = {int(d): np.asarray(s, dtype=complex) for d, s in states.items()}
    return ReferenceFamily(tuple(sorted(table)), lambda d: table[d], "explicit")


# ---------------------------------------------------------------------------
# named states


def uniform_superposition(d: int) -> np.ndarray:
    return np.full(d, 1 / math.sqrt(d), dtype=complex)


def bloch_ket(r: Sequence[float]) -> np.ndarray:
    x, y, z = np.asarray(r, dtype=float) / np.linalg.norm(r)
    theta = math.acos(max(-1.0, min(1.0, z)))
    phi = math.atan2(y, x)
    return np.array([math.cos(theta / 2), np.exp(1j * phi) * math.sin(theta / 2)])


def magic_golden_qubit() -> np.ndarray:
    return bloch_ket([1, 1, 1])


def t_state() -> np.ndarray:
    return np.array([1, np.exp(1j * math.pi / 4)]) / math.sqrt(2)


def bell_state() -> np.ndarray:
    return core.maximally_entangled(2)


# ---------------------------------------------------------------------------
# stabilizer states


@functools.lru_cache(maxsize=None)
def stabilizer_states(n_qubits: int) -> tuple:
    """Pure stabilizer states as projectors, enumerated from stabilizer groups."""
    if n_qubits not in (1, 2):
        raise PreconditionError("stabilizer enumeration supports one or two qubits", "unsupported")
    labels = ["".join(p) for p in itertools.product("IXYZ", repeat=n_qubits)]
    labels = [p for p in labels if set(p) != {"I"}]
    ops = {p: core.kron_all([core.PAULI[c] for c in p]) for p in labels}
    d = 2 ** n_qubits
    found: dict[bytes, np.ndarray] = {}
    for gens in itertools.combinations(labels, n_qubits):
        mats = [ops[g] for g in gens]
        if any(core.max_abs(a @ b - b @ a) > 1e-12 for a, b in itertools.combinations(mats, 2)):
            continue
        for signs in itertools.product([1, -1], repeat=n_qubits):
            proj = np.eye(d, dtype=complex)
            for s, m in zip(signs, mats):
                proj = proj @ (np.eye(d) + s * m) / 2
            if abs(np.trace(proj).real - 1) > 1e-9:
                continue
            key = np.round(proj, 9).tobytes()
            found.setdefault(key, proj)
    states = tuple(core.herm(p) for p in found.values())
    expected = {1: 6, 2: 60}[n_qubits]
    assert len(states) == expected, f"found {len(states)} stabilizer states"
    return states


# ---------------------------------------------------------------------------
# theories


@dataclass(eq=False)
class Theory:
    """A resource theory defined on every dimension its free sets support."""

    name: str
    base_dim: int
    free_set_at: Callable[[int], FreeStateSet]
    family: ReferenceFamily | None = None
    rd_map_at: Callable[[int], RdMapSpec] | None = None
    ch: bool = True
    params: dict = field(default_factory=dict)
    _cache: dict = field(default_factory=dict, repr=False)

    def free_set(self, d: int | None = None) -> FreeStateSet:
        d = self.base_dim if d is None else int(d)
        if ("F", d) not in self._cache:
            self._cache[("F", d)] = self.free_set_at(d)
        return self._cache[("F", d)]

    def rd_map(self, d: int | None = None) -> RdMapSpec | None:
        if self.rd_map_at is None:
            return None
        d = self.base_dim if d is None else int(d)
        if ("L", d) not in self._cache:
            self._cache[("L", d)] = self.rd_map_at(d)
        return self._cache[("L", d)]

    def components(self):
        return self.free_set(), self.rd_map(), self.family

    def with_family(self, family: ReferenceFamily) -> "Theory":
        return Theory(self.name, self.base_dim, self.free_set_at, family, self.rd_map_at,
                      self.ch, dict(self.params))

    def ident(self) -> str:
        return self.name


def _fixed_dim(dim: int, make: Callable[[], object]):
    made = {}

    def at(d: int):
        if d != dim:
            raise PreconditionError(f"theory is only defined on dimension {dim}, not {d}",
                                    "unsupported_dimension")
        if "v" not in made:
            made["v"] = make()
        return made["v"]
    return at


def coherence_theory(d: int = 2, ladder: LadderSpec = "all", cap: int = 8) -> Theory:
    fam = ReferenceFamily(parse_ladder(ladder, cap=cap), uniform_superposition, "golden")
    return Theory(f"coherence:{d}", d, lambda k: DiagonalSimplex(k), fam,
                  lambda k: CompleteDephasing(k), True, {"d": d})


def magic_theory(n_qubits: int = 1, ladder: LadderSpec = (2, 4)) -> Theory:
    def free(d: int) -> FreeStateSet:
        n = {2: 1, 4: 2}.get(d)
        if n is None:
            raise PreconditionError(f"magic theory supports d in (2, 4), not {d}", "unsupported_dimension")
        return VertexPolytope(stabilizer_states(n))
    fam = tensor_power_family(magic_golden_qubit(), ladder)
    return Theory(f"magic{n_qubits}", 2 ** n_qubits, free, fam, None, True, {"n": n_qubits})


def thermo_energies(energies: Sequence[float], d: int) -> np.ndarray:
    """Energies of the tensor-power Hamiltonian on dimension d = base**k."""
    e = np.asarray(energies, dtype=float)
    base = e.size
    k = round(math.log(d, base)) if base > 1 else 1
    if base ** k != d:
        raise PreconditionError(f"{d} is not a power of {base}", "unsupported_dimension")
    total = np.zeros(1)
    for _ in range(k):
        total = (total[:, None] + e[None, :]).reshape(-1)
    return total


def thermo_golden_index(energies: Sequence[float]) -> int:
    e = np.asarray(energies, dtype=float)
    # lowest index among maximal energies
    return int(np.flatnonzero(e == e.max())[0])


def thermo_theory(energies: Sequence[float], temperature: float, ladder: LadderSpec | None = None,
                  cap: int = 9) -> Theory:
    energies = tuple(float(x) for x in energies)
    base = len(energies)
    lad = parse_ladder(ladder if ladder is not None else "powers", cap=max(cap, base), base=base)

    def free(d: int) -> GibbsSingleton:
        return GibbsSingleton(tuple(thermo_energies(energies, d)), temperature)

    def golden(d: int) -> np.ndarray:
        return core.ket(thermo_golden_index(thermo_energies(energies, d)), d)

    def rd(d: int) -> ConstantState:
        return ConstantState(free(d).gibbs_state())

    fam = ReferenceFamily(lad, golden, "golden")
    ch = base == 1
    return Theory(f"thermo:{','.join(repr(x) for x in energies)}:{temperature!r}", base, free, fam,
                  rd, ch, {"energies": list(energies), "temperature": temperature})


def superposition_golden_qubit(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    ra = core.bloch_vector(core.projector(a))
    rb = core.bloch_vector(core.projector(b))
    return bloch_ket(-(ra + rb))


def superposition_theory(a=None, b=None, copies: int = 1, ladder: LadderSpec = "pow2",
                         cap: int = 8) -> Theory:
    a = np.array([1, 0], dtype=complex) if a is None else core.normalize(a)
    b = np.array([1, 1], dtype=complex) / math.sqrt(2) if b is None else core.normalize(b)
    if abs(abs(np.vdot(a, b)) - 1) < 1e-9:
        raise PreconditionError("superposition theory needs two distinct states", "bad_parameters")

    def free(d: int) -> VertexPolytope:
        k = round(math.log2(d))
        if 2 ** k != d:
            raise PreconditionError(f"{d} is not a power of 2", "unsupported_dimension")
        return VertexPolytope((core.projector(core.kron_all([a] * k)), core.projector(core.kron_all([b] * k))))

    fam = tensor_power_family(superposition_golden_qubit(a, b), parse_ladder(ladder, cap=cap))
    return Theory(f"superposition:{copies}", 2 ** copies, free, fam, None, True,
                  {"a": a.tolist(), "b": b.tolist(), "copies": copies})


def entanglement_theory() -> Theory:
    fam = explicit_family({4: bell_state()})
    return Theory("entanglement_2x2", 4, _fixed_dim(4, SeparablePPT2x2), fam, None, True, {})


def polytope_theory(vertices: Sequence[np.ndarray], family: ReferenceFamily | None = None,
                    rd_map: RdMapSpec | None = None, name: str = "vertex_polytope",
                    ch: bool | None = None) -> Theory:
    F = VertexPolytope(tuple(vertices))
    if ch is None:
        ch = all(core.is_pure(v) for v in F.vertices)
    th = Theory(name, F.dim, _fixed_dim(F.dim, lambda: F), family,
                None if rd_map is None else _fixed_dim(F.dim, lambda: rd_map), ch, {})
    if rd_map is not None:
        validate_rd_choice(th, rd_map)
    return th


def validate_rd_choice(theory: Theory, spec: RdMapSpec):
    """Linear resource destroying channels cannot exist for FFR theories."""
    if isinstance(spec, LinearCustom) and spec.is_channel and not spec.is_pseudo:
        cls = classify_theory(theory)
        if cls.ffr:
            raise PreconditionError("a theory with finite free robustness admits no linear "
                                    "resource destroying channel", "ffr_linear_rd")


BUILTIN_NAMES = ("coherence", "magic_qubit", "thermo", "superposition", "entanglement_2x2")


def builtin_theory(name: str, **params) -> Theory:
    """Look up a built-in theory by name."""
    if name == "coherence":
        return coherence_theory(int(params.get("d", 2)), params.get("ladder", "all"))
    if name in ("magic_qubit", "magic"):
        n = int(params.get("n", 1))
        if n not in (1, 2):
            raise PreconditionError("magic_qubit supports n in (1, 2)", "bad_parameters")
        return magic_theory(n, params.get("ladder", (2, 4)))
    if name == "thermo":
        if "energies" not in params or "temperature" not in params:
            raise PreconditionError("thermo needs energies and temperature", "bad_parameters")
        return thermo_theory(params["energies"], float(params["temperature"]), params.get("ladder"))
    if name == "superposition":
        return superposition_theory(params.get("a"), params.get("b"), int(params.get("copies", 1)),
                                    params.get("ladder", "pow2"))
    if name in ("entanglement_2x2", "entanglement"):
        return entanglement_theory()
    raise PreconditionError(f"unknown built-in theory {name!r}", "unknown_theory")


# ---------------------------------------------------------------------------
# classification


@dataclass
class TheoryClassification:
    convex: bool
    affine: bool
    ffr: bool
    ch: bool
    ct: bool | None
    evidence: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        from .io import jsonable
        return jsonable({"convex": self.convex, "affine": self.affine, "ffr": self.ffr,
                         "ch": self.ch, "ct": self.ct, "evidence": self.evidence})


def span_rank(F: VertexPolytope, tol: float = 1e-9) -> int:
    return int(np.linalg.matrix_rank(F.vertex_params, tol=tol))


def _affine_directions(F: VertexPolytope) -> np.ndarray:
    diffs = F.vertex_params[:, 1:] - F.vertex_params[:, :1]
    if diffs.shape[1] == 0:
        return np.zeros((F.vertex_params.shape[0], 0))
    u, s, _ = np.linalg.svd(diffs, full_matrices=False)
    return u[:, s > 1e-9 * max(1.0, s[0])]


def _affine_support_gap(F: VertexPolytope, directions: int, seed: int) -> float:
    """Largest difference between the support functions of F and of
    aff(F) intersected with the state space, over random directions in the
    affine hull."""
    n = F.dim
    basis = _affine_directions(F)
    if basis.shape[1] == 0:
        return 0.0
    rng = np.random.default_rng(seed)
    full = basis.shape[1] == n * n - 1
    v0 = F.vertices[0]
    worst = 0.0
    for _ in range(directions):
        coeffs = rng.standard_normal(basis.shape[1])
        h = dual_matrix(basis @ coeffs, n)
        poly = max(float(np.trace(h @ v).real) for v in F.vertices)
        if full:
            hull = float(np.linalg.eigvalsh(h)[-1])
        else:
            m = Model()
            x = m.psd(n)
            t = m.free(basis.shape[1])
            # x = v0 + sum_k t_k B_k with B_k the direction matrices
            dirs = np.stack([herm_from_params(basis[:, k], n) for k in range(basis.shape[1])])
            m.add_eq(x, v0 + _combine_const(t, dirs))
            m.maximize(inner(h, x).real)
            hull = m.solve().objective
        worst = max(worst, hull - poly)
    return worst


def _combine_const(weights, mats):
    from .conic import combine
    return combine(weights, mats)


def _ppt_overlap_range(phi: np.ndarray) -> tuple[float, float]:
    vals = []
    for sense in (1.0, -1.0):
        m = Model()
        x = m.psd(4)
        m.add_psd(x.ptranspose((2, 2), 1))
        m.add_eq(x.trace(), 1.0)
        m.maximize(sense * inner(phi, x).real)
        vals.append(sense * m.solve().objective)
    return vals[1], vals[0]


def ct_spread(F: FreeStateSet, phi: np.ndarray) -> float:
    """max - min of Tr(phi sigma) over the free set."""
    if isinstance(F, SeparablePPT2x2):
        lo, hi = _ppt_overlap_range(phi)
        return hi - lo
    vals = [float(np.trace(phi @ v).real) for v in F.extreme_points()]
    return max(vals) - min(vals)


def classify_theory(theory: Theory | FreeStateSet, family: ReferenceFamily | None = None,
                    directions: int = 8, seed: int = 0) -> TheoryClassification:
    if isinstance(theory, FreeStateSet):
        F = theory

        def free_at(k: int) -> FreeStateSet:
            if k != F.dim:
                raise PreconditionError(f"free set has dimension {F.dim}, family needs {k}",
                                        "unsupported_dimension")
            return F
        ch = isinstance(F, (VertexPolytope, DiagonalSimplex, SeparablePPT2x2)) and (
            not isinstance(F, VertexPolytope) or all(core.is_pure(v) for v in F.vertices))
    else:
        F = theory.free_set()
        free_at = theory.free_set
        ch = theory.ch
        family = family if family is not None else theory.family
    d = F.dim
    evidence: dict = {}
    if isinstance(F, DiagonalSimplex):
        affine, ffr = True, d == 1
        evidence["span_rank"] = d
    elif isinstance(F, GibbsSingleton):
        affine, ffr = True, d == 1
        evidence["span_rank"] = 1
    elif isinstance(F, SeparablePPT2x2):
        affine, ffr = False, True
        evidence["span_rank"] = 16
    else:
        rank = span_rank(F)
        ffr = rank == d * d
        gap = _affine_support_gap(F, directions, seed)
        affine = gap <= 1e-7
        evidence["span_rank"] = rank
        evidence["affine_support_gap"] = gap
    ct = None
    if family is not None:
        spreads = {}
        for k in family.ladder:
            spreads[k] = ct_spread(free_at(k), family.state(k))
        evidence["ct_spread"] = spreads
        ct = all(v <= 1e-10 for v in spreads.values())
    return TheoryClassification(True, affine, ffr, ch, ct, evidence)
