import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from qrt_oneshot import core
from qrt_oneshot.config import TOL

seeds = st.integers(0, 2**32 - 1)
dims = st.integers(2, 4)


def _rng(seed):
    return np.random.default_rng(seed)


# ---------------------------------------------------------------------------
# oracle values


def test_fidelity_of_orthogonal_and_identical_states():
    zero, one = core.projector(core.ket(0, 2)), core.projector(core.ket(1, 2))
    assert core.fidelity(zero, one) == pytest.approx(0.0, abs=1e-12)
    assert core.fidelity(zero, zero) == pytest.approx(1.0, abs=1e-12)


def test_fidelity_matches_qubit_closed_form():
    # independent oracle: for qubits F = Tr(rho sigma) + 2 sqrt(det rho det sigma)
    rng = _rng(11)
    for _ in range(20):
        a, b = core.random_density(2, rng), core.random_density(2, rng)
        oracle = np.trace(a @ b).real + 2 * math.sqrt(max(np.linalg.det(a).real, 0)
                                                      * max(np.linalg.det(b).real, 0))
        assert core.fidelity(a, b) == pytest.approx(oracle, abs=1e-10)


def test_pure_state_fidelity_is_overlap():
    rng = _rng(3)
    psi = core.random_pure(3, rng)
    sigma = core.random_density(3, rng)
    assert core.fidelity(core.projector(psi), sigma) == pytest.approx(
        float(np.vdot(psi, sigma @ psi).real), abs=1e-12)


def test_partial_trace_of_product():
    rng = _rng(5)
    a, b = core.random_density(2, rng), core.random_density(3, rng)
    ab = np.kron(a, b)
    assert np.allclose(core.partial_trace(ab, (2, 3), (0,)), a)
    assert np.allclose(core.partial_trace(ab, (2, 3), (1,)), b)


def test_bell_state_has_negative_partial_transpose():
    bell = core.projector(core.maximally_entangled(2))
    assert core.partial_transpose_min_eig(bell) == pytest.approx(-0.5, abs=1e-12)


def test_bloch_round_trip():
    r = np.array([0.3, -0.2, 0.5])
    assert np.allclose(core.bloch_vector(core.bloch_state(r)), r)


def test_density_matrix_rejects_invalid_input():
    with pytest.raises(core.StateError):
        core.density_matrix(np.diag([1.5, -0.5]))
    with pytest.raises(core.DimensionError):
        core.density_matrix(np.eye(2) / 2, dim=3)


def test_depolarizing_and_dephasing_channels():
    rho = core.random_density(3, _rng(8))
    dep = core.ChannelChoi.depolarizing(3, 0.25)
    assert np.allclose(dep.apply(rho), 0.75 * rho + 0.25 * np.eye(3) / 3)
    deph = core.ChannelChoi.dephasing(3)
    assert np.allclose(deph.apply(rho), np.diag(np.diag(rho)))


def test_superop_round_trip():
    E = core.random_channel(2, 3, _rng(2))
    again = core.ChannelChoi.from_superop(E.superop(), 2, 3)
    assert np.allclose(again.J, E.J)


# ---------------------------------------------------------------------------
# properties


@given(seeds, st.integers(2, 16))
def test_eigendecomposition_reconstructs(seed, n):
    rng = _rng(seed)
    g = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    a = g + g.conj().T
    w, v = core.eigh_herm(a)
    assert core.max_abs(a - (v * w) @ v.conj().T) <= 1e-8


@given(seeds, dims)
def test_fidelity_data_processing(seed, n):
    rng = _rng(seed)
    rho, sigma = core.random_density(n, rng), core.random_density(n, rng)
    E = core.random_channel(n, int(rng.integers(2, 4)), rng)
    assert core.fidelity(E.apply(rho), E.apply(sigma)) >= core.fidelity(rho, sigma) - 1e-8


@given(seeds, dims)
def test_channel_composition(seed, n):
    rng = _rng(seed)
    first = core.random_channel(n, 3, rng)
    second = core.random_channel(3, 2, rng)
    rho = core.random_density(n, rng)
    both = second.compose(first)
    assert core.max_abs(second.apply(first.apply(rho)) - both.apply(rho)) <= 1e-9


@given(seeds, dims, st.integers(2, 4))
def test_root_fidelity_jointly_concave(seed, n, k):
    rng = _rng(seed)
    p = rng.dirichlet(np.ones(k))
    rhos = [core.random_density(n, rng) for _ in range(k)]
    sigmas = [core.random_density(n, rng) for _ in range(k)]
    mixed = core.fidelity(sum(pi * r for pi, r in zip(p, rhos)),
                          sum(pi * s for pi, s in zip(p, sigmas)), root=True)
    assert mixed >= sum(pi * core.fidelity(r, s, root=True)
                        for pi, r, s in zip(p, rhos, sigmas)) - 1e-8


@given(seeds, dims)
def test_random_channels_are_cptp(seed, n):
    E = core.random_channel(n, n, _rng(seed))
    res = core.validate_channel(E)
    assert res.min_eig >= -TOL.psd_tol
    assert res.tp_residual <= TOL.tp_tol


@given(seeds, dims)
def test_fidelity_symmetric_and_bounded(seed, n):
    rng = _rng(seed)
    a, b = core.random_density(n, rng), core.random_density(n, rng)
    f = core.fidelity(a, b)
    assert 0.0 <= f <= 1.0
    assert f == pytest.approx(core.fidelity(b, a), abs=1e-9)
