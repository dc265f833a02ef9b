"""JSON and CSV formats for matrices, states, theories and reports.

Matrices are ``{"dim": d, "entries": [[re, im], ...]}`` in row-major order,
with an optional ``"kind"`` tag.  Non-finite floats are written as the
strings ``"inf"``, ``"-inf"`` and ``"nan"``.
"""
from __future__ import annotations

import csv
import dataclasses
import io as _io
import json
import math
from pathlib import Path
from typing import Any, Iterable

import numpy as np

from . import core
from .errors import PreconditionError

_SPECIAL = {"inf": math.inf, "-inf": -math.inf, "nan": math.nan}


def _float(x: float):
    x = float(x)
    if math.isfinite(x):
        return x
    if math.isnan(x):
        return "nan"
    return "inf" if x > 0 else "-inf"


def _number(x) -> float:
    if isinstance(x, str):
        if x in _SPECIAL:
            return _SPECIAL[x]
        raise ValueError(f"not a number: {x!r}")
    return float(x)


def matrix_to_json(m, kind: str | None = None) -> dict:
    m = np.asarray(m, dtype=complex)
    if m.ndim != 2:
        raise ValueError("matrix_to_json expects a 2-D array")
    out: dict[str, Any] = {}
    if m.shape[0] == m.shape[1]:
        out["dim"] = int(m.shape[0])
    else:
        out["shape"] = [int(m.shape[0]), int(m.shape[1])]
    out["entries"] = [[float(z.real), float(z.imag)] for z in m.reshape(-1)]
    if kind is not None:
        out["kind"] = kind
    return out


def matrix_from_json(obj: dict) -> np.ndarray:
    if "shape" in obj:
        rows, cols = (int(s) for s in obj["shape"])
    else:
        rows = cols = int(obj["dim"])
    entries = obj["entries"]
    if len(entries) != rows * cols:
        raise ValueError(f"expected {rows * cols} entries, got {len(entries)}")
    flat = np.array([complex(_number(e[0]), _number(e[1])) if isinstance(e, (list, tuple))
                     else complex(_number(e), 0.0) for e in entries], dtype=complex)
    return flat.reshape(rows, cols)


def vector_to_json(v) -> list:
    return [[float(z.real), float(z.imag)] for z in np.asarray(v, dtype=complex).reshape(-1)]


def vector_from_json(items) -> np.ndarray:
    return np.array([complex(_number(e[0]), _number(e[1])) if isinstance(e, (list, tuple))
                     else complex(_number(e), 0.0) for e in items], dtype=complex)


def jsonable(obj):
    """Convert reports, arrays and numbers to plain JSON values."""
    if obj is None or isinstance(obj, (bool, str)):
        return obj
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return _float(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        return [_float(obj.real), _float(obj.imag)]
    if isinstance(obj, np.ndarray):
        if obj.ndim == 2:
            return matrix_to_json(obj)
        return [jsonable(x) for x in obj.tolist()]
    if hasattr(obj, "to_json"):
        return obj.to_json()
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {f.name: jsonable(getattr(obj, f.name)) for f in dataclasses.fields(obj)
                if not f.name.startswith("_")}
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(x) for x in obj]
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def restore_numbers(obj):
    """Inverse of the special-float encoding inside plain JSON values."""
    if isinstance(obj, str) and obj in _SPECIAL:
        return _SPECIAL[obj]
    if isinstance(obj, dict):
        return {k: restore_numbers(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [restore_numbers(x) for x in obj]
    return obj


def dumps(obj) -> str:
    return json.dumps(jsonable(obj), indent=2, sort_keys=True, allow_nan=False)


def read_json(path: str | Path) -> Any:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def write_json(obj, path: str | Path | None) -> str:
    text = dumps(obj) + "\n"
    if path is not None:
        Path(path).write_text(text, encoding="utf-8")
    return text


# ---------------------------------------------------------------------------
# states


def state_from_json(obj) -> np.ndarray:
    """Density matrix from a matrix object, ``{"ket": [...]}`` or
    ``{"bloch": [x, y, z]}``."""
    if isinstance(obj, dict) and "ket" in obj:
        return core.density_matrix(vector_from_json(obj["ket"]))
    if isinstance(obj, dict) and "bloch" in obj:
        return core.bloch_state([_number(x) for x in obj["bloch"]])
    if isinstance(obj, dict) and "entries" in obj:
        return core.density_matrix(matrix_from_json(obj))
    raise ValueError("state JSON needs 'entries', 'ket' or 'bloch'")


def state_to_json(rho) -> dict:
    return matrix_to_json(rho, kind="state")


def load_state(path: str | Path) -> np.ndarray:
    return state_from_json(read_json(path))


# ---------------------------------------------------------------------------
# theories


def _rd_map_from_json(obj: dict | None, dim: int):
    from . import theories as th
    if obj is None:
        return None
    kind = obj.get("kind")
    if kind == "complete_dephasing":
        basis = matrix_from_json(obj["basis"]) if "basis" in obj else None
        return th.CompleteDephasing(dim, basis)
    if kind == "constant_state":
        return th.ConstantState(matrix_from_json(obj["sigma"]))
    if kind == "group_twirl":
        return th.FiniteGroupTwirl(tuple(matrix_from_json(u) for u in obj["unitaries"]))
    if kind == "depolarizing_pseudo":
        return th.DepolarizingPseudo(dim, float(obj["p"]))
    if kind == "linear_custom":
        return th.LinearCustom(matrix_from_json(obj["superoperator"]),
                               bool(obj.get("declared_channel", True)), bool(obj.get("exact", False)))
    raise PreconditionError(f"unknown rd_map kind {kind!r}", "bad_theory_json")


def _family_from_json(obj: dict | None, default):
    from . import theories as th
    if obj is None:
        return default
    ladder = obj.get("ladder")
    ctor = obj.get("constructor", "golden")
    if isinstance(ctor, dict) and "tensor_power" in ctor:
        seed = state_from_json(ctor["tensor_power"])
        ket = core.pure_vector(seed)
        return th.tensor_power_family(ket, ladder if ladder is not None else "pow2")
    if isinstance(ctor, dict) and "states" in ctor:
        fam = th.explicit_family({int(d): state_from_json(s) for d, s in ctor["states"].items()})
        return fam.restrict(ladder) if ladder is not None else fam
    if ctor == "golden" and default is not None:
        return default.restrict(ladder) if ladder is not None else default
    raise PreconditionError(f"unsupported reference family constructor {ctor!r}", "bad_theory_json")


def theory_from_json(obj: dict):
    from . import theories as th
    kind = obj.get("kind")
    if kind == "vertex_polytope":
        vertices = [state_from_json(v) for v in obj["vertices"]]
        dim = vertices[0].shape[0]
        family = _family_from_json(obj.get("reference_family"), None)
        return th.polytope_theory(vertices, family, _rd_map_from_json(obj.get("rd_map"), dim),
                                  obj.get("name", "vertex_polytope"))
    if kind == "diagonal":
        base = th.coherence_theory(int(obj["dim"]))
        family = _family_from_json(obj.get("reference_family"), base.family)
        return base.with_family(family)
    if kind == "gibbs":
        base = th.thermo_theory([_number(e) for e in obj["energies"]], _number(obj["temperature"]))
        family = _family_from_json(obj.get("reference_family"), base.family)
        return base.with_family(family)
    if kind == "ppt_2x2":
        base = th.entanglement_theory()
        return base.with_family(_family_from_json(obj.get("reference_family"), base.family))
    raise PreconditionError(f"unknown theory kind {kind!r}", "bad_theory_json")


def parse_builtin(name: str):
    """Resolve ``builtin:<name>[:params]`` strings used on the command line.

    ``coherence:3``, ``magic1``, ``magic2``, ``thermo:0,1:1.0``,
    ``superposition`` and ``entanglement`` are recognised.
    """
    from . import theories as th
    body = name[len("builtin:"):] if name.startswith("builtin:") else name
    parts = body.split(":")
    head = parts[0]
    if head == "coherence":
        return th.builtin_theory("coherence", d=int(parts[1]) if len(parts) > 1 else 2)
    if head in ("magic1", "magic2"):
        return th.builtin_theory("magic_qubit", n=int(head[-1]))
    if head in ("magic", "magic_qubit"):
        return th.builtin_theory("magic_qubit", n=int(parts[1]) if len(parts) > 1 else 1)
    if head == "thermo":
        if len(parts) != 3:
            raise PreconditionError("thermo needs builtin:thermo:<energies>:<temperature>", "bad_parameters")
        energies = [float(e) for e in parts[1].split(",")]
        return th.builtin_theory("thermo", energies=energies, temperature=float(parts[2]))
    if head == "superposition":
        return th.builtin_theory("superposition")
    if head in ("entanglement", "entanglement_2x2"):
        return th.builtin_theory("entanglement_2x2")
    raise PreconditionError(f"unknown built-in theory {name!r}", "unknown_theory")


def load_theory(source: str):
    if source.startswith("builtin:"):
        return parse_builtin(source)
    return theory_from_json(read_json(source))


# ---------------------------------------------------------------------------
# csv


def rows_to_csv(header: Iterable[str], rows: Iterable[Iterable]) -> str:
    buf = _io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(list(header))
    for row in rows:
        writer.writerow([_cell(x) for x in row])
    return buf.getvalue()


def _cell(x):
    if isinstance(x, (float, np.floating)):
        return _float(x) if not math.isfinite(x) else repr(float(x))
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if x is None:
        return ""
    return x
