import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from qrt_oneshot import core, io, measures
from qrt_oneshot import theories as th
from qrt_oneshot.errors import PreconditionError

seeds = st.integers(0, 2**32 - 1)


def _through_text(obj):
    return json.loads(json.dumps(obj))


@given(seeds, st.integers(1, 6))
def test_matrix_round_trip_is_bit_identical(seed, d):
    rng = np.random.default_rng(seed)
    m = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    back = io.matrix_from_json(_through_text(io.matrix_to_json(m)))
    assert back.tobytes() == m.astype(complex).tobytes()


def test_rectangular_matrix_round_trip():
    m = np.arange(6, dtype=complex).reshape(2, 3) * (1 + 0.5j)
    assert np.array_equal(io.matrix_from_json(io.matrix_to_json(m)), m)


@given(seeds)
def test_state_round_trip_is_bit_identical(seed):
    rho = core.random_density(3, np.random.default_rng(seed))
    back = io.state_from_json(_through_text(io.state_to_json(rho)))
    assert back.tobytes() == rho.tobytes()


def test_state_shorthands():
    plus = io.state_from_json({"ket": [[1 / math.sqrt(2), 0], [1 / math.sqrt(2), 0]]})
    assert np.allclose(plus, np.full((2, 2), 0.5))
    assert np.allclose(io.state_from_json({"bloch": [0, 0, 1]}), np.diag([1, 0]))
    with pytest.raises(ValueError):
        io.state_from_json({"vector": [1, 0]})


def test_entry_count_is_checked():
    with pytest.raises(ValueError):
        io.matrix_from_json({"dim": 2, "entries": [[1, 0]]})


def test_special_floats_survive_encoding():
    payload = {"a": math.inf, "b": [-math.inf, 1.5], "c": np.float64(2.0)}
    text = json.dumps(io.jsonable(payload), allow_nan=False)
    restored = io.restore_numbers(json.loads(text))
    assert restored == {"a": math.inf, "b": [-math.inf, 1.5], "c": 2.0}
    assert math.isnan(io.restore_numbers(io.jsonable(math.nan)))


def test_report_serialization_is_stable():
    rho = core.random_density(2, np.random.default_rng(3))
    rep = measures.resource_measure(rho, th.magic_theory(1).free_set(2), "dmax")
    first = io.dumps(rep)
    assert first == io.dumps(rep)
    assert io.dumps(json.loads(first)) == first


def test_unserializable_objects_are_rejected():
    with pytest.raises(TypeError):
        io.jsonable(object())


def test_theory_from_json_vertex_polytope():
    vertices = [io.state_to_json(s) for s in th.stabilizer_states(1)]
    theory = io.theory_from_json({"kind": "vertex_polytope", "vertices": vertices, "name": "octa"})
    F = theory.free_set(2)
    t = core.projector(th.t_state())
    assert measures.free_robustness(t, F).value == pytest.approx((math.sqrt(2) - 1) / 2, abs=1e-7)


def test_theory_from_json_builtin_kinds():
    assert io.theory_from_json({"kind": "diagonal", "dim": 3}).free_set(3).dim == 3
    thermo = io.theory_from_json({"kind": "gibbs", "energies": [0, 1], "temperature": 1.0})
    assert thermo.free_set(2).dim == 2
    assert io.theory_from_json({"kind": "ppt_2x2"}).free_set(4).dim == 4
    with pytest.raises(PreconditionError):
        io.theory_from_json({"kind": "unknown"})


@pytest.mark.parametrize("name,dim", [("builtin:coherence:3", 3), ("magic1", 2), ("magic2", 4),
                                      ("builtin:thermo:0,1,2:0.5", 3), ("entanglement", 4)])
def test_parse_builtin(name, dim):
    theory = io.parse_builtin(name)
    assert theory.free_set(dim).dim == dim


def test_parse_builtin_errors():
    with pytest.raises(PreconditionError) as exc:
        io.parse_builtin("builtin:nothing")
    assert exc.value.reason == "unknown_theory"
    with pytest.raises(PreconditionError):
        io.parse_builtin("builtin:thermo:0,1")


def test_rows_to_csv_cells():
    text = io.rows_to_csv(["a", "b", "c", "d"], [[0.1, math.inf, True, None]])
    assert text == "a,b,c,d\n0.1,inf,true,\n"
