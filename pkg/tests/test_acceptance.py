"""The twelve acceptance criteria, each at its stated tolerance.

A summary line per criterion is printed at the end of the pytest run.
"""
import math
import time

import numpy as np
import pytest

from qrt_oneshot import core, golden, measures, tasks, theories as th
from qrt_oneshot.errors import CertificateError, PreconditionError

criterion = pytest.mark.criterion


def _rng(seed):
    return np.random.default_rng(seed)


# ---------------------------------------------------------------------------
# 1


@criterion(1, "coherence golden coefficients collapse to 1 for d = 2..6")
def test_coherence_collapse():
    start = time.perf_counter()
    for d in range(2, 7):
        rep = golden.find_golden_state(th.DiagonalSimplex(d), seed=d, spec=th.CompleteDephasing(d))
        for key in ("m_f", "m_min", "m_max", "m_f_lambda", "m_min_lambda", "m_max_lambda"):
            assert abs(rep.coefficients[key] - 1) <= 1e-6, (d, key, rep.coefficients[key])
    assert time.perf_counter() - start < 30


# ---------------------------------------------------------------------------
# 2


@criterion(2, "magic qubit golden state, D_max(T) and robustness R(T)")
def test_magic_golden_values():
    F = th.magic_theory(1).free_set(2)
    rep = golden.find_golden_state(F, seed=7)
    bloch = core.bloch_vector(core.projector(rep.state))
    assert np.allclose(bloch, np.ones(3) / math.sqrt(3), atol=1e-5)
    assert abs(rep.g - math.log2(3 - math.sqrt(3))) <= 1e-5
    t = core.projector(th.t_state())
    dmax = measures.resource_measure(t, F, "dmax").value
    assert abs(dmax - math.log2(4 - 2 * math.sqrt(2))) <= 1e-5
    robustness = measures.free_robustness(t, F).value
    assert abs(robustness - (math.sqrt(2) - 1)) <= 1e-6, robustness


# ---------------------------------------------------------------------------
# 3


@criterion(3, "thermodynamic golden formula and high-temperature purity limit")
def test_thermo_golden_formula():
    rng = _rng(3)
    for _ in range(10):
        d = int(rng.choice([2, 3, 4]))
        energies = np.sort(rng.uniform(0, 3, size=d))
        temperature = float(rng.uniform(0.2, 3.0))
        boltzmann = np.exp(-energies / temperature)
        tau = boltzmann / boltzmann.sum()
        expected = -math.log2(tau[int(np.argmax(energies))]) / math.log2(d)
        rep = golden.golden_thermo(energies, temperature)
        assert abs(rep.g - expected) <= 1e-8
    assert abs(golden.golden_thermo([0.0, 1.0], 1e6).g - 1.0) <= 1e-4


# ---------------------------------------------------------------------------
# 4


def _random_pair(rng):
    d = int(rng.integers(2, 7))
    sigma = core.random_density(d, rng)
    rank = int(rng.integers(1, d + 1))
    rho = core.random_density(d, rng, rank=rank)
    return rho, sigma


@criterion(4, "divergence ordering, D_H^0 = D_min, monotone smoothing")
def test_divergence_ordering_and_smoothing():
    rng = _rng(4)
    radii = (0.0, 0.01, 0.05, 0.1)
    for _ in range(200):
        rho, sigma = _random_pair(rng)
        dmin = measures.d_min(rho, sigma).value
        rel = measures.rel_entropy(rho, sigma)
        dmax = measures.d_max(rho, sigma).value
        assert dmin <= rel + 1e-9 and rel <= dmax + 1e-9
        assert abs(measures.d_hypothesis(rho, sigma, 0.0, method="sdp").value - dmin) <= 1e-6
        dh = [measures.d_hypothesis(rho, sigma, e).value for e in radii]
        smooth = [measures.smooth_measure(rho, sigma, e, "dmax").value for e in radii]
        assert all(a <= b + 1e-9 for a, b in zip(dh, dh[1:])), dh
        assert all(b <= a + 1e-9 for a, b in zip(smooth, smooth[1:])), smooth


# ---------------------------------------------------------------------------
# 5


def _incoherent_channel(d, rng):
    """Random incoherent operation: each Kraus operator is a weighted permutation."""
    kraus = []
    for _ in range(int(rng.integers(1, 4))):
        k = np.zeros((d, d), dtype=complex)
        targets = rng.permutation(d)
        for j in range(d):
            k[targets[j], j] = rng.standard_normal() + 1j * rng.standard_normal()
        kraus.append(k)
    s = sum(k.conj().T @ k for k in kraus)
    norm = np.diag(1 / np.sqrt(np.diag(s).real))
    return core.ChannelChoi.from_kraus([k @ norm for k in kraus])


_H = np.array([[1, 1], [1, -1]]) / math.sqrt(2)
_S = np.diag([1, 1j])


def _clifford(rng):
    u = np.eye(2, dtype=complex)
    for _ in range(int(rng.integers(1, 8))):
        u = (_H if rng.random() < 0.5 else _S) @ u
    return u


def _stabilizer_channel(rng):
    """Random mixture of Clifford unitaries, Pauli dephasing and depolarizing noise."""
    parts = [core.ChannelChoi.unitary(_clifford(rng)) for _ in range(int(rng.integers(1, 4)))]
    parts.append(core.ChannelChoi.dephasing(2, _clifford(rng)))
    parts.append(core.ChannelChoi.depolarizing(2, float(rng.random())))
    w = rng.dirichlet(np.ones(len(parts)))
    J = sum(wi * p.J for wi, p in zip(w, parts))
    return core.ChannelChoi(2, 2, J).compose(core.ChannelChoi.unitary(_clifford(rng)))


def _verified_free(E, F):
    for v in F.extreme_points():
        assert th.membership_residual(core.apply_channel(E, v), F) <= 1e-7
    res = core.validate_channel(E)
    assert res.ok, res


@criterion(5, "data processing for D_max, D_min, D_H^0.01 under free channels")
def test_monotonicity_under_free_channels():
    rng = _rng(5)
    for i in range(200):
        if i % 2 == 0:
            d = int(rng.choice([2, 3]))
            F = th.DiagonalSimplex(d)
            E = _incoherent_channel(d, rng)
        else:
            d = 2
            F = th.magic_theory(1).free_set(2)
            E = _stabilizer_channel(rng)
        _verified_free(E, F)
        rho = core.random_density(d, rng, rank=int(rng.integers(1, d + 1)))
        out = core.apply_channel(E, rho)
        for kind, eps in (("dmax", 0.0), ("dmin", 0.0), ("dH", 0.01)):
            before = measures.resource_measure(rho, F, kind, eps).value
            after = measures.resource_measure(out, F, kind, eps).value
            assert after <= before + 1e-7, (i, kind, before, after)


# ---------------------------------------------------------------------------
# 6


def _check_certificate(cert, eps):
    assert cert is not None and cert.valid, cert and cert.failures
    assert cert.min_choi_eig >= -1e-9
    assert cert.tp_residual <= 1e-9
    if cert.commutation is not None:
        assert cert.commutation <= 1e-8
    assert cert.freeness["max"] <= 1e-7
    assert cert.fidelity >= 1 - eps - 1e-8


def _local_bell(rng):
    u = np.kron(core.random_unitary(2, rng), core.random_unitary(2, rng))
    return core.projector(u @ th.bell_state())


@criterion(6, "100 seeded constructions pass CPTP, freeness and fidelity checks")
def test_channel_certificates():
    rng = _rng(6)
    built = 0
    coherence = {d: th.coherence_theory(d) for d in (2, 3)}
    magic = th.magic_theory(1)
    entanglement = th.entanglement_theory()
    for i in range(25):
        d = 2 + i % 2
        eps = (0.0, 0.01)[(i // 2) % 2]
        rho = core.random_density(d, rng, rank=int(rng.integers(1, d + 1)))
        _, cert = tasks.formation_achievable(rho, coherence[d], eps, "ct_map")
        _check_certificate(cert, eps)
        built += 1
    for i in range(25):
        d = int(rng.choice([2, 3]))
        energies = np.sort(rng.uniform(0, 2, size=d))
        theory = th.thermo_theory(energies, float(rng.uniform(0.3, 2.0)))
        rho = core.random_density(d, rng)
        eps = (0.0, 0.01)[i % 2]
        _, cert = tasks.formation_achievable(rho, theory, eps, "ct_map")
        _check_certificate(cert, eps)
        built += 1
    while built < 75:
        rho = core.random_density(2, rng, rank=int(rng.integers(1, 3)))
        eps = (0.0, 0.01)[built % 2]
        rep, cert = tasks.formation_achievable(rho, magic, eps, "ffr_map")
        if cert is None:
            continue
        _check_certificate(cert, eps)
        built += 1
    for i in range(25):
        variant = ("isotropic_map", "pseudo_comm_depol", "input_error_isotropic")[i % 3]
        rep, cert = tasks.distillation_achievable(_local_bell(rng), entanglement, 0.0, variant,
                                                  depolarizing_p=float(rng.uniform(0.1, 0.9)))
        _check_certificate(cert, 0.0)
        built += 1
    assert built == 100


# ---------------------------------------------------------------------------
# 7


@criterion(7, "sandwich lower <= exact <= upper on coherence and thermo instances")
def test_sandwich():
    rng = _rng(7)
    start = time.perf_counter()
    problems = []
    instances = []
    for i in range(50):
        d = 2 + i % 2
        eps = (0.0, 0.01)[(i // 2) % 2]
        rho = core.random_density(d, rng, rank=int(rng.integers(1, d + 1)))
        instances.append((rho, th.coherence_theory(d), eps))
    for i in range(10):
        d = 2 + i % 2
        energies = np.sort(rng.uniform(0, 2, size=d))
        theory = th.thermo_theory(energies, float(rng.uniform(0.3, 2.0)))
        instances.append((core.random_density(d, rng), theory, (0.0, 0.01)[i % 2]))
    for k, (rho, theory, eps) in enumerate(instances):
        for task in ("formation", "distillation"):
            sw = tasks.sandwich_check(rho, theory, eps, task, slack=1e-6)
            if not sw.ok:
                problems.append((k, task, sw.triple, sw.diagnostic))
    assert not problems, problems
    assert time.perf_counter() - start < 300


# ---------------------------------------------------------------------------
# 8


@criterion(8, "isotropic distillation on the Bell state; rejection for coherence")
def test_isotropic_distillation():
    ent = th.entanglement_theory()
    bell = core.projector(th.bell_state())
    rep, cert = tasks.distillation_achievable(bell, ent, 0.0, "isotropic_map")
    assert abs(rep.extra["p_tilde"] - 2 / 3) <= 1e-6
    assert rep.d0 == 4
    assert cert.valid and cert.freeness["complete"]
    assert cert.freeness["max"] <= 1e-7
    for probe in th.SeparablePPT2x2().probe_states():
        assert core.partial_transpose_min_eig(core.apply_channel(cert.channel, probe)) >= -1e-9
    assert core.max_abs(core.apply_channel(cert.channel, bell) - bell) <= 1e-8
    plus = core.projector(np.array([1, 1]) / math.sqrt(2))
    with pytest.raises(PreconditionError) as info:
        tasks.distillation_achievable(plus, th.coherence_theory(2), 0.0, "isotropic_map")
    assert info.value.reason == "isotropic_set_empty"


# ---------------------------------------------------------------------------
# 9


@criterion(9, "maximally coherent states are root states; free states are not")
def test_root_states():
    for d in (2, 3):
        theory = th.coherence_theory(d)
        rng = _rng(90 + d)
        phi = core.projector(th.uniform_superposition(d))
        targets = [core.random_density(d, rng, rank=int(rng.integers(1, d + 1))) for _ in range(20)]
        rep = golden.check_root_state(phi, theory, targets, eps=1e-6)
        assert rep.root, [t["fidelity"] for t in rep.targets]
        free = core.projector(core.ket(0, d))
        assert not golden.check_root_state(free, theory, targets[:1], eps=1e-6,
                                           constructive=False).root


# ---------------------------------------------------------------------------
# 10


@criterion(10, "classification of coherence, magic and superposition theories")
def test_classification():
    coh = th.classify_theory(th.coherence_theory(3))
    assert coh.affine and not coh.ffr and coh.ct
    magic = th.classify_theory(th.magic_theory(1))
    assert magic.ffr and magic.evidence["span_rank"] == 4
    sup = th.classify_theory(th.superposition_theory())
    assert max(sup.evidence["ct_spread"].values()) <= 1e-10


# ---------------------------------------------------------------------------
# 11


@criterion(11, "max-relative and relative entropy induce different orderings")
def test_max_relative_entropy_ordering_example():
    d = 3
    sigma_hat = core.maximally_entangled(d)
    lam1 = np.array([0.5296, 0.0228, 0.4476])
    lam2 = np.array([0.0368, 0.1570, 0.8062])
    bar1 = np.kron(np.eye(d) / d, np.diag(lam1))
    bar2 = np.kron(np.eye(d) / d, np.diag(lam2))
    dmax1, dmax2 = measures.d_max(sigma_hat, bar1).value, measures.d_max(sigma_hat, bar2).value
    rel1, rel2 = measures.rel_entropy(sigma_hat, bar1), measures.rel_entropy(sigma_hat, bar2)
    assert dmax1 > dmax2
    assert rel1 < rel2
    # closed forms: log Tr sigma^-1 and log d - Tr log sigma / d
    assert abs(dmax1 - math.log2(np.sum(1 / lam1))) <= 1e-9
    assert abs(rel2 - (math.log2(d) - np.sum(np.log2(lam2)) / d)) <= 1e-9


# ---------------------------------------------------------------------------
# 12


@criterion(12, "pseudo-commuting distillation map commutes with depolarizing iff Tr P = 1")
def test_pseudo_commuting_condition():
    ent = th.entanglement_theory()
    rng = _rng(12)
    for _ in range(20):
        rho = _local_bell(rng)
        p = float(rng.uniform(0.05, 0.95))
        rep, cert = tasks.distillation_achievable(rho, ent, 0.0, "pseudo_comm_depol", depolarizing_p=p)
        assert abs(rep.extra["trace_P"] - 1) <= 1e-6
        assert cert.commutation <= 1e-8
        assert tasks.depolarizing_commutation_residual(cert.channel, p) <= 1e-8
        psi = core.pure_vector(rho)
        orth = core.normalize(rng.standard_normal(4) + 1j * rng.standard_normal(4))
        orth = core.normalize(orth - np.vdot(psi, orth) * psi)
        perturbed = core.projector(psi) + 0.3 * core.projector(orth)
        with pytest.raises(CertificateError) as info:
            tasks.distillation_achievable(rho, ent, 0.0, "pseudo_comm_depol", depolarizing_p=p,
                                          test_override=perturbed)
        assert info.value.certificate.commutation > 1e-8
