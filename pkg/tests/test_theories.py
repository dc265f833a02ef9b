import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from qrt_oneshot import core, measures
from qrt_oneshot import theories as th
from qrt_oneshot.conic import grid_oracle
from qrt_oneshot.errors import PreconditionError

seeds = st.integers(0, 2**32 - 1)


def _entropy(rho):
    w = np.clip(np.linalg.eigvalsh(rho), 0, None)
    w = w[w > 1e-15]
    return float(-np.sum(w * np.log2(w)))


@pytest.mark.parametrize("d", [2, 3])
def test_dephasing_is_the_closest_free_state(d):
    theory = th.coherence_theory(d)
    F, spec = theory.free_set(d), theory.rd_map(d)
    rng = np.random.default_rng(d)
    for _ in range(3):
        rho = core.random_density(d, rng)
        value = measures.rel_entropy(rho, th.apply_rd_map(spec, rho))
        # closed form for the dephased state: S(diag rho) - S(rho)
        assert value == pytest.approx(_entropy(np.diag(np.diag(rho))) - _entropy(rho), abs=1e-9)
        grid = grid_oracle(lambda s: -measures.rel_entropy(rho, s), F, 0.02 if d == 2 else 0.05)
        assert value <= -grid.value + 1e-6
        assert -grid.value - value <= 0.05


def test_gibbs_constant_map_is_exact():
    theory = th.thermo_theory([0.0, 1.0, 2.5], 1.3)
    spec = theory.rd_map(3)
    tau = theory.free_set(3).gibbs_state()
    rho = core.random_density(3, np.random.default_rng(0))
    assert core.max_abs(th.apply_rd_map(spec, rho) - tau) <= 1e-12


@given(seeds, st.integers(2, 4))
def test_rd_maps_are_idempotent(seed, d):
    rng = np.random.default_rng(seed)
    rho = core.random_density(d, rng)
    for spec in (th.coherence_theory(d).rd_map(d),
                 th.thermo_theory(list(rng.random(d)), 0.7).rd_map(d)):
        once = th.apply_rd_map(spec, rho)
        assert core.max_abs(th.apply_rd_map(spec, once) - once) <= 1e-9


def test_coherence_is_affine_with_infinite_robustness():
    theory = th.coherence_theory(3)
    assert th.classify_theory(theory).affine
    plus = core.projector(th.uniform_superposition(3))
    assert math.isinf(measures.free_robustness(plus, theory.free_set(3)).value)


def test_magic_membership_matches_octahedron():
    F = th.magic_theory(1).free_set(2)
    rng = np.random.default_rng(12)
    for _ in range(1000):
        r = rng.standard_normal(3)
        r *= rng.random() ** (1 / 3) / np.linalg.norm(r)
        inside = np.abs(r).sum() <= 1
        if abs(np.abs(r).sum() - 1) < 1e-6:
            continue
        assert th.membership(core.bloch_state(r), F).inside == inside


def test_stabilizer_enumeration_counts():
    assert len(th.stabilizer_states(1)) == 6
    assert len(th.stabilizer_states(2)) == 60


def test_stabilizer_states_are_distinct_pure_projectors():
    states = th.stabilizer_states(2)
    for s in states:
        assert core.is_pure(s, 1e-12)
    overlaps = [abs(np.trace(a @ b).real) for i, a in enumerate(states) for b in states[i + 1:]]
    assert max(overlaps) < 1 - 1e-9


def test_linear_rd_channel_rejected_for_ffr_theory():
    theory = th.magic_theory(1)
    identity = np.eye(4, dtype=complex)
    with pytest.raises(PreconditionError) as exc:
        th.validate_rd_choice(theory, th.LinearCustom(identity))
    assert exc.value.reason == "ffr_linear_rd"


def test_superposition_theory_has_constant_golden_overlap():
    theory = th.superposition_theory()
    F = theory.free_set(2)
    phi = core.projector(theory.family.ket(2))
    assert th.ct_spread(F, phi) <= 1e-10


def test_builtin_lookup():
    assert th.builtin_theory("coherence", d=3).free_set(3).dim == 3
    assert th.builtin_theory("entanglement_2x2").free_set(4).dim == 4
    with pytest.raises(PreconditionError):
        th.builtin_theory("no_such_theory")
    with pytest.raises(PreconditionError):
        th.builtin_theory("thermo", energies=[0, 1])


@pytest.mark.parametrize("spec,expected", [
    ("all", (2, 3, 4, 5, 6, 7, 8)),
    ("pow2", (2, 4, 8)),
    ("2,3,5", (2, 3, 5)),
    ((2, 4), (2, 4)),
])
def test_parse_ladder(spec, expected):
    assert th.parse_ladder(spec) == expected


def test_parse_ladder_rejects_unsorted():
    with pytest.raises(ValueError):
        th.parse_ladder("4,2")


def test_classification_flags():
    magic = th.classify_theory(th.magic_theory(1))
    assert magic.ffr and not magic.affine
    assert th.span_rank(th.magic_theory(1).free_set(2)) == 4
    coherence = th.classify_theory(th.coherence_theory(3))
    assert coherence.affine and not coherence.ffr and coherence.ct


@given(seeds)
def test_random_free_states_are_members(seed):
    rng = np.random.default_rng(seed)
    for F in (th.coherence_theory(3).free_set(3), th.magic_theory(1).free_set(2),
              th.entanglement_theory().free_set(4)):
        assert th.membership(th.random_free_state(F, rng), F).inside
