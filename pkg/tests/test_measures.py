import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import linprog

from qrt_oneshot import core, measures
from qrt_oneshot import theories as th
from qrt_oneshot.conic import grid_oracle
from qrt_oneshot.errors import PreconditionError

seeds = st.integers(0, 2**32 - 1)
MAGIC = th.magic_theory(1).free_set(2)
OCTAHEDRON = np.array([[1, 0, 0], [-1, 0, 0], [0, 1, 0], [0, -1, 0], [0, 0, 1], [0, 0, -1]], float)


def _pair(seed, d=None):
    rng = np.random.default_rng(seed)
    d = d or int(rng.integers(2, 5))
    return core.random_density(d, rng), core.random_density(d, rng)


def _octahedron_robustness(r):
    """Independent LP: rho = P - N with P, N in the cone over the octahedron,
    minimising Tr N."""
    k = len(OCTAHEDRON)
    A = np.vstack([np.hstack([OCTAHEDRON.T, -OCTAHEDRON.T]), np.hstack([np.ones(k), -np.ones(k)])])
    b = np.concatenate([r, [1.0]])
    res = linprog(np.concatenate([np.zeros(k), np.ones(k)]), A_eq=A, b_eq=b, bounds=(0, None),
                  method="highs")
    return res.fun


# ---------------------------------------------------------------------------
# oracle values


def test_dmax_and_dmin_on_commuting_states():
    p, q = np.array([0.5, 0.3, 0.2]), np.array([0.2, 0.3, 0.5])
    rho, sigma = np.diag(p).astype(complex), np.diag(q).astype(complex)
    assert measures.d_max(rho, sigma).value == pytest.approx(math.log2(2.5), abs=1e-12)
    assert measures.d_min(rho, sigma).value == pytest.approx(0.0, abs=1e-12)
    assert measures.rel_entropy(rho, sigma) == pytest.approx(float(np.sum(p * np.log2(p / q))),
                                                             abs=1e-12)


def test_support_violation_gives_infinity():
    rho = np.eye(2) / 2
    sigma = np.diag([1.0, 0.0]).astype(complex)
    rep = measures.d_max(rho, sigma)
    assert math.isinf(rep.value) and rep.optimizer["support_violation"] > 0


def test_dmin_undefined_on_orthogonal_support():
    with pytest.raises(PreconditionError):
        measures.d_min(np.diag([1.0, 0.0]), np.diag([0.0, 1.0]))


def test_t_state_robustness_matches_facet_lp():
    t = core.projector(th.t_state())
    oracle = _octahedron_robustness(core.bloch_vector(t))
    assert oracle == pytest.approx((math.sqrt(2) - 1) / 2, abs=1e-9)
    assert measures.free_robustness(t, MAGIC).value == pytest.approx(oracle, abs=1e-7)


def test_magic_golden_dmax():
    t = core.projector(th.t_state())
    assert measures.resource_measure(t, MAGIC, "dmax").value == pytest.approx(
        math.log2(4 - 2 * math.sqrt(2)), abs=1e-6)


def test_coherence_of_maximally_coherent_state():
    d = 3
    F = th.coherence_theory(d).free_set(d)
    plus = core.projector(th.uniform_superposition(d))
    assert measures.resource_measure(plus, F, "dmax").value == pytest.approx(math.log2(d), abs=1e-6)
    assert measures.resource_measure(plus, F, "dmin").value == pytest.approx(math.log2(d), abs=1e-6)
    assert measures.free_fidelity(plus, F).value == pytest.approx(1 / d, abs=1e-9)


def test_bell_state_separable_fidelity():
    F = th.entanglement_theory().free_set(4)
    bell = core.projector(th.bell_state())
    assert measures.free_fidelity(bell, F).value == pytest.approx(0.5, abs=1e-6)
    assert measures.resource_measure(bell, F, "dmin").value == pytest.approx(1.0, abs=1e-6)


def test_bad_epsilon_rejected():
    rho, sigma = _pair(0, 2)
    with pytest.raises(PreconditionError):
        measures.d_hypothesis(rho, sigma, 1.0)
    with pytest.raises(PreconditionError):
        measures.smooth_measure(rho, sigma, -0.1, "dmax")


def test_heuristic_smoothed_dmin_is_flagged():
    rho, sigma = _pair(5, 2)
    rep = measures.smooth_measure(rho, sigma, 0.05, "dmin", seed=1, starts=4)
    assert rep.estimated and rep.method == "grid-heuristic"
    assert rep.value >= measures.d_min(rho, sigma).value - 1e-12


def test_measure_report_json_encodes_infinity():
    rep = measures.d_max(np.eye(2) / 2, np.diag([1.0, 0.0]))
    out = rep.to_json()
    assert out["value"] == "inf" and out["bits"] is True


# ---------------------------------------------------------------------------
# properties


@given(seeds)
def test_divergence_ordering(seed):
    rho, sigma = _pair(seed)
    dmin = measures.d_min(rho, sigma).value
    rel = measures.rel_entropy(rho, sigma)
    assert dmin <= rel + 1e-9 <= measures.d_max(rho, sigma).value + 2e-9


@given(seeds)
def test_hypothesis_testing_at_zero_is_dmin(seed):
    rho, sigma = _pair(seed)
    # a rank-deficient rho makes the test non-trivial
    w, v = core.eigh_herm(rho)
    w[0] = 0.0
    rho = (v * w) @ v.conj().T / w.sum()
    sdp = measures.d_hypothesis(rho, sigma, 0.0, method="sdp").value
    assert abs(sdp - measures.d_min(rho, sigma).value) <= 1e-6


@settings(max_examples=10, deadline=None)
@given(seeds)
def test_smoothing_is_monotone(seed):
    rho, sigma = _pair(seed, 3)
    radii = (0.0, 0.01, 0.05, 0.1)
    dh = [measures.d_hypothesis(rho, sigma, e).value for e in radii]
    dmax = [measures.smooth_measure(rho, sigma, e, "dmax").value for e in radii]
    assert all(a <= b + 1e-9 for a, b in zip(dh, dh[1:]))
    assert all(b <= a + 1e-9 for a, b in zip(dmax, dmax[1:]))


@settings(max_examples=10, deadline=None)
@given(seeds)
def test_smoothed_optimizer_is_in_ball(seed):
    rho, sigma = _pair(seed, 3)
    eps = 0.05
    rep = measures.smooth_measure(rho, sigma, eps, "dmax")
    rho_eps = rep.optimizer["rho_eps"]
    assert core.fidelity(rho_eps, rho) >= 1 - eps - 1e-12
    lam = rep.optimizer["lambda"]
    assert core.min_eig(lam * sigma - rho_eps) >= -1e-9


@settings(max_examples=10, deadline=None)
@given(seeds)
def test_dmax_equals_generalized_robustness(seed):
    rng = np.random.default_rng(seed)
    for F in (MAGIC, th.coherence_theory(3).free_set(3)):
        rho = core.random_density(F.dim, rng)
        via_dmax = measures.resource_measure(rho, F, "dmax").value
        via_witness = measures.generalized_robustness_witness(rho, F).optimizer["LR_G"]
        assert via_dmax == pytest.approx(via_witness, abs=1e-6)


@settings(max_examples=10, deadline=None)
@given(seeds)
def test_measures_do_not_increase_under_dephasing_covariant_maps(seed):
    rng = np.random.default_rng(seed)
    d = 3
    F = th.coherence_theory(d).free_set(d)
    rho = core.random_density(d, rng)
    # a diagonal unitary followed by a permutation is an incoherent unitary
    u = np.eye(d)[rng.permutation(d)] @ np.diag(np.exp(1j * rng.random(d)))
    E = core.ChannelChoi.unitary(u).mix(core.ChannelChoi.dephasing(d), float(rng.random()))
    out = E.apply(rho)
    for kind in ("dmax", "dmin"):
        assert (measures.resource_measure(out, F, kind).value
                <= measures.resource_measure(rho, F, kind).value + 1e-7)


@given(seeds)
def test_pure_free_fidelity_is_vertex_maximum(seed):
    psi = core.random_pure(2, np.random.default_rng(seed))
    rho = core.projector(psi)
    rep = measures.free_fidelity(rho, MAGIC)
    assert rep.method == "analytic"
    best = max(float(np.vdot(psi, v @ psi).real) for v in MAGIC.extreme_points())
    assert rep.value == pytest.approx(best, abs=1e-14)


def test_pure_free_fidelity_agrees_with_grid():
    psi = core.random_pure(2, np.random.default_rng(21))
    rho = core.projector(psi)
    grid = grid_oracle(lambda s: core.fidelity(rho, s), MAGIC, 0.05)
    assert abs(measures.free_fidelity(rho, MAGIC).value - grid.value) <= grid.gap
