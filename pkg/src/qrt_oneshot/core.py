"""Dense Hermitian linear algebra, state validation and channels in Choi form.

Conventions: logarithms are base 2, and the Choi matrix of a map E acting on
a ``d_in``-dimensional input is ``J = sum_ij |i><j| (x) E(|i><j|)`` with the
input factor first, so ``E(rho) = Tr_in[J (rho^T (x) I)]``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import math

import numpy as np

from .config import TOL, Tolerances


class StateError(ValueError):
    """Raised when an operator fails a state or channel validity check."""


class DimensionError(ValueError):
    """Raised on incompatible dimensions."""


# ---------------------------------------------------------------------------
# basic helpers


def dagger(a: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(a, -1, -2))


def herm(a: np.ndarray) -> np.ndarray:
    """Hermitian part of a square matrix."""
    a = np.asarray(a, dtype=complex)
    return 0.5 * (a + dagger(a))


def ket(index: int, dim: int) -> np.ndarray:
    v = np.zeros(dim, dtype=complex)
    v[index] = 1.0
    return v


def projector(psi: np.ndarray) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex).reshape(-1)
    return np.outer(psi, psi.conj())


def kron_all(mats: Sequence[np.ndarray]) -> np.ndarray:
    out = np.ones((1, 1), dtype=complex) if np.ndim(mats[0]) == 2 else np.ones(1, dtype=complex)
    for m in mats:
        out = np.kron(out, m)
    return out


def eigh_herm(a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    w, v = np.linalg.eigh(herm(a))
    return w, v


def psd_sqrt(a: np.ndarray) -> np.ndarray:
    w, v = eigh_herm(a)
    w = np.sqrt(np.clip(w, 0.0, None))
    return (v * w) @ dagger(v)


def min_eig(a: np.ndarray) -> float:
    return float(np.linalg.eigvalsh(herm(a))[0])


def max_abs(a) -> float:
    a = np.asarray(a)
    return float(np.max(np.abs(a))) if a.size else 0.0


# ---------------------------------------------------------------------------
# validation


def as_matrix(a, dim: int | None = None) -> np.ndarray:
    a = np.asarray(a, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {a.shape}")
    if dim is not None and a.shape[0] != dim:
        raise DimensionError(f"expected dimension {dim}, got {a.shape[0]}")
    if not np.all(np.isfinite(a)):
        raise StateError("matrix has non-finite entries")
    return a


def check_hermitian(a, tol: Tolerances = TOL) -> np.ndarray:
    a = as_matrix(a)
    if max_abs(a - dagger(a)) > tol.herm_tol:
        raise StateError("operator is not Hermitian")
    return herm(a)


def density_matrix(a, dim: int | None = None, tol: Tolerances = TOL) -> np.ndarray:
    """Validate a density matrix and return its Hermitian part.

    A one-dimensional input is read as a state vector and turned into its
    projector.
    """
    arr = np.asarray(a, dtype=complex)
    if arr.ndim == 1:
        arr = projector(pure_state(arr, tol=tol))
    rho = as_matrix(arr, dim)
    if max_abs(rho - dagger(rho)) > max(tol.herm_tol, 1e-12 * max(1.0, max_abs(rho))):
        raise StateError("density matrix is not Hermitian")
    rho = herm(rho)
    if abs(np.trace(rho).real - 1.0) > tol.trace_tol:
        raise StateError(f"trace {np.trace(rho).real!r} differs from 1")
    if min_eig(rho) < -tol.psd_tol:
        raise StateError(f"density matrix has negative eigenvalue {min_eig(rho):.3e}")
    return rho


def pure_state(psi, dim: int | None = None, tol: Tolerances = TOL) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex).reshape(-1)
    if dim is not None and psi.size != dim:
        raise DimensionError(f"expected dimension {dim}, got {psi.size}")
    if not np.all(np.isfinite(psi)):
        raise StateError("state vector has non-finite entries")
    if abs(np.linalg.norm(psi) - 1.0) > 1e-10:
        raise StateError("state vector is not normalized")
    return psi


def normalize(psi) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex).reshape(-1)
    return psi / np.linalg.norm(psi)


def is_pure(rho: np.ndarray, tol: float = 1e-9) -> bool:
    w = np.linalg.eigvalsh(herm(rho))
    return bool(w[-1] > 1.0 - tol)


def pure_vector(rho: np.ndarray) -> np.ndarray:
    """Dominant eigenvector with a fixed global phase."""
    w, v = eigh_herm(rho)
    return fix_phase(v[:, -1])


def fix_phase(psi: np.ndarray) -> np.ndarray:
    """Rotate the global phase so the largest-magnitude entry is real positive."""
    psi = np.asarray(psi, dtype=complex)
    k = int(np.argmax(np.round(np.abs(psi), 12)))
    if abs(psi[k]) == 0:
        return psi
    return psi * (abs(psi[k]) / psi[k])


# ---------------------------------------------------------------------------
# fidelity and supports


def fidelity(rho, sigma, root: bool = False, tol: Tolerances = TOL) -> float:
    """Uhlmann fidelity ``(Tr sqrt(sqrt(sigma) rho sqrt(sigma)))**2``.

    With ``root=True`` the square root of the fidelity is returned.
    """
    rho = density_matrix(rho, tol=tol)
    sigma = density_matrix(sigma, rho.shape[0], tol=tol)
    for a, b in ((rho, sigma), (sigma, rho)):
        if is_pure(a, 1e-12):
            # exact overlap form avoids the square-root round trip
            psi = pure_vector(a)
            f = min(max(float(np.vdot(psi, b @ psi).real), 0.0), 1.0)
            return math.sqrt(f) if root else f
    s = psd_sqrt(sigma)
    w = np.linalg.eigvalsh(herm(s @ rho @ s))
    rf = float(np.sum(np.sqrt(np.clip(w, 0.0, None))))
    rf = min(rf, 1.0)
    return rf if root else rf * rf


def support_projector(rho, rank_tol: float | None = None) -> np.ndarray:
    rank_tol = TOL.rank_tol if rank_tol is None else rank_tol
    w, v = eigh_herm(rho)
    keep = v[:, w > rank_tol]
    return keep @ dagger(keep)


def support_basis(rho, rank_tol: float | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues above ``rank_tol`` and the matching eigenvectors."""
    rank_tol = TOL.rank_tol if rank_tol is None else rank_tol
    w, v = eigh_herm(rho)
    mask = w > rank_tol
    return w[mask], v[:, mask]


# ---------------------------------------------------------------------------
# partial operations


def partial_trace(x: np.ndarray, dims: Sequence[int], keep: Sequence[int]) -> np.ndarray:
    """Trace out every subsystem not listed in ``keep``."""
    dims = list(dims)
    n = len(dims)
    x = np.asarray(x).reshape(dims + dims)
    keep = sorted(keep)
    traced = [i for i in range(n) if i not in keep]
    letters = "abcdefghijklmnopqrstuvwxyz"
    row = [letters[i] for i in range(n)]
    col = [letters[n + i] for i in range(n)]
    for i in traced:
        col[i] = row[i]
    out = "".join(row[i] for i in keep) + "".join(col[i] for i in keep)
    res = np.einsum("".join(row) + "".join(col) + "->" + out, x)
    dk = int(np.prod([dims[i] for i in keep])) if keep else 1
    return res.reshape(dk, dk)


def partial_transpose(x: np.ndarray, dims: Sequence[int], sys: int = 1) -> np.ndarray:
    dims = list(dims)
    n = len(dims)
    d = int(np.prod(dims))
    t = np.asarray(x).reshape(dims + dims)
    axes = list(range(2 * n))
    axes[sys], axes[n + sys] = axes[n + sys], axes[sys]
    return t.transpose(axes).reshape(d, d)


def partial_transpose_min_eig(rho, dims: Sequence[int] = (2, 2)) -> float:
    rho = density_matrix(rho, int(np.prod(dims)))
    return min_eig(partial_transpose(rho, dims, 1))


# ---------------------------------------------------------------------------
# channels


@dataclass(frozen=True, eq=False)
class ChannelChoi:
    """A linear map in Choi form (input factor first)."""

    d_in: int
    d_out: int
    J: np.ndarray

    def __post_init__(self):
        J = np.asarray(self.J, dtype=complex)
        n = self.d_in * self.d_out
        if J.shape != (n, n):
            raise DimensionError(f"Choi matrix must be {n}x{n}, got {J.shape}")
        object.__setattr__(self, "J", J)

    def apply(self, rho: np.ndarray) -> np.ndarray:
        rho = np.asarray(rho, dtype=complex)
        if rho.shape != (self.d_in, self.d_in):
            raise DimensionError(f"input must be {self.d_in}x{self.d_in}")
        j4 = self.J.reshape(self.d_in, self.d_out, self.d_in, self.d_out)
        return np.einsum("ij,iajb->ab", rho, j4)

    def superop(self) -> np.ndarray:
        """Matrix S with ``vec(E(X)) = S vec(X)`` for row-major ``vec``."""
        j4 = self.J.reshape(self.d_in, self.d_out, self.d_in, self.d_out)
        return j4.transpose(1, 3, 0, 2).reshape(self.d_out ** 2, self.d_in ** 2)

    @classmethod
    def from_superop(cls, s: np.ndarray, d_in: int, d_out: int) -> "ChannelChoi":
        s4 = np.asarray(s, dtype=complex).reshape(d_out, d_out, d_in, d_in)
        return cls(d_in, d_out, s4.transpose(2, 0, 3, 1).reshape(d_in * d_out, d_in * d_out))

    @classmethod
    def from_kraus(cls, kraus: Sequence[np.ndarray]) -> "ChannelChoi":
        d_out, d_in = np.asarray(kraus[0]).shape
        J = np.zeros((d_in * d_out, d_in * d_out), dtype=complex)
        for k in kraus:
            # vec of K^T stacks the columns of K, which is the Choi vector
            v = np.asarray(k, dtype=complex).T.reshape(-1)
            J += np.outer(v, v.conj())
        return cls(d_in, d_out, J)

    @classmethod
    def identity(cls, d: int) -> "ChannelChoi":
        return cls.from_kraus([np.eye(d)])

    @classmethod
    def unitary(cls, u: np.ndarray) -> "ChannelChoi":
        return cls.from_kraus([np.asarray(u, dtype=complex)])

    @classmethod
    def measure_prepare(cls, pairs: Sequence[tuple[np.ndarray, np.ndarray]]) -> "ChannelChoi":
        """Map ``w -> sum_k Tr(A_k w) X_k`` given pairs ``(A_k, X_k)``."""
        a0, x0 = pairs[0]
        d_in, d_out = np.shape(a0)[0], np.shape(x0)[0]
        J = sum(np.kron(np.asarray(a, dtype=complex).T, np.asarray(x, dtype=complex))
                for a, x in pairs)
        return cls(d_in, d_out, J)

    @classmethod
    def replacement(cls, d_in: int, sigma: np.ndarray) -> "ChannelChoi":
        return cls.measure_prepare([(np.eye(d_in), sigma)])

    @classmethod
    def depolarizing(cls, d: int, p: float) -> "ChannelChoi":
        """``N_p(w) = (1-p) w + p Tr(w) I/d``; pseudo-mixtures allowed for p > 1."""
        s = (1 - p) * np.eye(d * d) + p * np.outer(np.eye(d).reshape(-1), np.eye(d).reshape(-1)) / d
        return cls.from_superop(s, d, d)

    @classmethod
    def dephasing(cls, d: int, basis: np.ndarray | None = None) -> "ChannelChoi":
        basis = np.eye(d) if basis is None else np.asarray(basis, dtype=complex)
        return cls.from_kraus([projector(basis[:, i]) for i in range(d)])

    def compose(self, first: "ChannelChoi") -> "ChannelChoi":
        """Return ``self o first``."""
        if first.d_out != self.d_in:
            raise DimensionError("composition dimension mismatch")
        return ChannelChoi.from_superop(self.superop() @ first.superop(), first.d_in, self.d_out)

    def mix(self, other: "ChannelChoi", t: float) -> "ChannelChoi":
        return ChannelChoi(self.d_in, self.d_out, (1 - t) * self.J + t * other.J)


def apply_channel(E: ChannelChoi, rho) -> np.ndarray:
    rho = density_matrix(rho, E.d_in)
    return herm(E.apply(rho))


@dataclass(frozen=True)
class ChannelResidual:
    min_eig: float
    tp_residual: float
    ok: bool


def validate_channel(E: ChannelChoi, tol: Tolerances = TOL) -> ChannelResidual:
    J = E.J
    hermiticity = max_abs(J - dagger(J))
    m = min_eig(J)
    tp = float(np.linalg.norm(partial_trace(J, [E.d_in, E.d_out], [0]) - np.eye(E.d_in)))
    ok = m >= -tol.psd_tol and tp <= tol.tp_tol and hermiticity <= max(tol.herm_tol, 1e-9)
    return ChannelResidual(m, tp, bool(ok))


def superop_of_map(fn, d_in: int, d_out: int | None = None) -> np.ndarray:
    """Superoperator of a linear map given as a Python callable."""
    d_out = d_in if d_out is None else d_out
    s = np.zeros((d_out * d_out, d_in * d_in), dtype=complex)
    for i in range(d_in):
        for j in range(d_in):
            e = np.zeros((d_in, d_in), dtype=complex)
            e[i, j] = 1.0
            s[:, i * d_in + j] = np.asarray(fn(e)).reshape(-1)
    return s


def apply_superop(s: np.ndarray, x: np.ndarray) -> np.ndarray:
    d_in = x.shape[0]
    d_out = int(round(np.sqrt(s.shape[0])))
    return (s @ np.asarray(x, dtype=complex).reshape(-1)).reshape(d_out, d_out)


# ---------------------------------------------------------------------------
# random objects (seeded generators only)


def random_unitary(d: int, rng: np.random.Generator) -> np.ndarray:
    z = (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    ph = np.diag(r) / np.abs(np.diag(r))
    return q * ph


def random_pure(d: int, rng: np.random.Generator) -> np.ndarray:
    v = rng.standard_normal(d) + 1j * rng.standard_normal(d)
    return fix_phase(v / np.linalg.norm(v))


def random_density(d: int, rng: np.random.Generator, rank: int | None = None) -> np.ndarray:
    """Random state drawn from the induced (Ginibre) measure."""
    rank = d if rank is None else rank
    g = rng.standard_normal((d, rank)) + 1j * rng.standard_normal((d, rank))
    rho = g @ dagger(g)
    return herm(rho / np.trace(rho).real)


def random_channel(d_in: int, d_out: int, rng: np.random.Generator, kraus: int | None = None) -> ChannelChoi:
    """Random CPTP map from a Haar-random isometry."""
    k = d_in * d_out if kraus is None else kraus
    z = rng.standard_normal((k * d_out, d_in)) + 1j * rng.standard_normal((k * d_out, d_in))
    q, _ = np.linalg.qr(z)
    ops = [q[i * d_out:(i + 1) * d_out, :] for i in range(k)]
    return ChannelChoi.from_kraus(ops)


# ---------------------------------------------------------------------------
# named states


def maximally_entangled(d: int) -> np.ndarray:
    """``sum_j |jj>/sqrt(d)`` on ``d (x) d``."""
    return np.eye(d, dtype=complex).reshape(-1) / np.sqrt(d)


def bloch_state(r: Sequence[float]) -> np.ndarray:
    x, y, z = r
    return 0.5 * np.array([[1 + z, x - 1j * y], [x + 1j * y, 1 - z]], dtype=complex)


def bloch_vector(rho: np.ndarray) -> np.ndarray:
    rho = np.asarray(rho, dtype=complex)
    return np.array([2 * rho[0, 1].real, 2 * rho[1, 0].imag, (rho[0, 0] - rho[1, 1]).real])


PAULI = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}
