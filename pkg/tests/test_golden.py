import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qrt_oneshot import core, golden
from qrt_oneshot import theories as th
from qrt_oneshot.measures import coefficient_measure

seeds = st.integers(0, 2**32 - 1)
COHERENCE3 = th.coherence_theory(3).free_set(3)
MAGIC = th.magic_theory(1).free_set(2)


def test_magic_golden_state_and_value():
    rep = golden.find_golden_state(MAGIC, seed=3)
    assert np.allclose(core.bloch_vector(core.projector(rep.state)), np.ones(3) / math.sqrt(3),
                       atol=1e-5)
    assert rep.g == pytest.approx(math.log2(3 - math.sqrt(3)), abs=1e-5)


@pytest.mark.parametrize("d", [2, 3, 4])
def test_coherence_golden_state_collapses(d):
    rep = golden.find_golden_state(th.coherence_theory(d).free_set(d), seed=0)
    assert rep.collapsed
    for key in ("m_f", "m_min", "m_max"):
        assert rep.coefficients[key] == pytest.approx(1.0, abs=1e-6)


@pytest.mark.parametrize("F", [COHERENCE3, MAGIC], ids=["coherence3", "magic"])
def test_golden_value_is_seed_invariant(F):
    values = [golden.find_golden_state(F, seed=s, starts=16).g for s in range(5)]
    assert max(values) - min(values) <= 1e-8


def test_golden_search_is_deterministic():
    first = golden.find_golden_state(MAGIC, seed=9, starts=8)
    second = golden.find_golden_state(MAGIC, seed=9, starts=8)
    assert first.g == second.g
    assert np.array_equal(first.state, second.state)


def test_thermo_two_level_value():
    # energies (0, 1) at T = 1: tau_1 = e^-1 / (1 + e^-1), g = -log2(tau_1) in log 2 units
    rep = golden.golden_thermo([0.0, 1.0], 1.0)
    tau1 = math.exp(-1) / (1 + math.exp(-1))
    assert rep.g == pytest.approx(-math.log2(tau1), abs=1e-12)
    assert rep.g == pytest.approx(1.894636, abs=1e-6)
    assert np.allclose(rep.state, [0, 1])


def test_thermo_high_temperature_is_purity():
    assert golden.golden_thermo([0.0, 1.0, 3.0], 1e6).g == pytest.approx(1.0, abs=1e-4)


def test_thermo_degenerate_top_energy_uses_lowest_index():
    rep = golden.golden_thermo([0.0, 2.0, 2.0], 1.0)
    assert np.allclose(rep.state, [0, 1, 0])
    assert rep.notes


@given(seeds)
def test_thermo_formula_matches_partition_function(seed):
    rng = np.random.default_rng(seed)
    d = int(rng.integers(2, 5))
    energies = rng.random(d) * 3
    temperature = float(rng.uniform(0.2, 5))
    z = np.sum(np.exp(-energies / temperature))
    top = int(np.argmax(energies))
    expected = -math.log2(math.exp(-energies[top] / temperature) / z) / math.log2(d)
    assert golden.golden_thermo(energies, temperature).g == pytest.approx(expected, abs=1e-8)


@settings(max_examples=10, deadline=None)
@given(seeds)
def test_golden_state_maximises_resource(seed):
    rng = np.random.default_rng(seed)
    for F, golden_ket in ((COHERENCE3, th.uniform_superposition(3)),
                          (MAGIC, th.magic_golden_qubit())):
        phi = core.projector(golden_ket)
        psi = core.projector(core.random_pure(F.dim, rng))
        for kind in ("max", "min"):
            assert coefficient_measure(psi, F, kind) <= coefficient_measure(phi, F, kind) + 1e-6


def test_verify_collapse_separates_non_golden_state():
    psi = core.projector(core.normalize(np.array([1.0, 0.3, 0.1])))
    rep = golden.verify_collapse(psi, COHERENCE3)
    assert not rep.collapsed


def test_root_state_check():
    theory = th.coherence_theory(2)
    rng = np.random.default_rng(0)
    targets = [core.random_density(2, rng) for _ in range(3)]
    plus = th.uniform_superposition(2)
    rep = golden.check_root_state(plus, theory, targets, eps=1e-6)
    assert rep.root and rep.constructive == "ct_map"
    assert all(row["construction"]["valid"] for row in rep.targets)
    free = golden.check_root_state(core.ket(0, 2), theory, targets, eps=1e-6, constructive=False)
    assert not free.root
