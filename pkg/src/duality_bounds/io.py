"""JSON serialization of problems, constraint sets, configs and reports.

Complex arrays are stored as ``{"re": ..., "im": ...}`` nested lists. Floats
are written with Python's shortest round-trip ``repr``, so every value reloads
bit-exactly.
"""
from __future__ import annotations

import dataclasses
import enum
import json
from pathlib import Path

import numpy as np

from .constraints import Constraint, ConstraintKind, ConstraintSet
from .dual import SolverConfig
from .quadratic import QuadraticForm
from .scattering import Design, DesignPartition, ScatteringProblem

FORMAT_VERSION = 1


def encode_array(x):
    x = np.asarray(x)
    if np.iscomplexobj(x):
        return {"re": x.real.tolist(), "im": x.imag.tolist()}
    return x.tolist()


def decode_array(obj, dtype=complex) -> np.ndarray:
    if isinstance(obj, dict) and "re" in obj:
        re = np.asarray(obj["re"], dtype=float)
        out = np.empty(re.shape, dtype=complex)
        # assigning parts (rather than re + 1j*im) keeps signed zeros
        out.real = re
        out.imag = np.asarray(obj["im"], dtype=float)
        return out
    return np.asarray(obj, dtype=dtype)


def to_jsonable(obj):
    """Recursively convert library objects to plain JSON types."""
    if isinstance(obj, QuadraticForm):
        return form_to_dict(obj)
    if isinstance(obj, ConstraintSet):
        return constraints_to_dict(obj)
    if isinstance(obj, Design):
        return list(obj.rho)
    if isinstance(obj, enum.Enum):
        return obj.value
    if isinstance(obj, np.ndarray):
        if np.iscomplexobj(obj):
            return encode_array(obj)
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    if isinstance(obj, complex):
        return {"re": obj.real, "im": obj.imag}
    if hasattr(obj, "to_dict"):
        return to_jsonable(obj.to_dict())
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {f.name: to_jsonable(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    return obj


def dumps(obj) -> str:
    return json.dumps(to_jsonable(obj), indent=1, sort_keys=True) + "\n"


def write_json(path, obj) -> None:
    Path(path).write_text(dumps(obj))


def read_json(path):
    return json.loads(Path(path).read_text())


# -- quadratic forms and constraints


def form_to_dict(f: QuadraticForm) -> dict:
    return {"s": encode_array(f.s), "A": encode_array(f.A), "v": f.v}


def form_from_dict(d) -> QuadraticForm:
    return QuadraticForm(decode_array(d["s"]), decode_array(d["A"]), float(d.get("v", 0.0)))


def constraints_to_dict(cs: ConstraintSet) -> dict:
    return {
        "kind": "constraint_set",
        "version": FORMAT_VERSION,
        "compact_index": cs.compact_index,
        "constraints": [
            {"label": c.label, "kind": c.kind.value, **form_to_dict(c.form)} for c in cs
        ],
    }


def constraints_from_dict(d) -> ConstraintSet:
    cons = tuple(
        Constraint(form_from_dict(c), ConstraintKind(c.get("kind", "Equality")), c.get("label", ""))
        for c in d["constraints"]
    )
    return ConstraintSet(cons, int(d.get("compact_index", 0)))


# -- problems


def problem_to_dict(p: ScatteringProblem) -> dict:
    return {
        "kind": "scattering_problem",
        "version": FORMAT_VERSION,
        "G": encode_array(p.G),
        "V": encode_array(p.V),
        "blocks": [list(b) for b in p.partition.blocks],
        "s": encode_array(p.s),
        "eps_passivity": p.eps_passivity,
        "seed": p.seed,
    }


def problem_from_dict(d) -> ScatteringProblem:
    if d.get("kind") != "scattering_problem":
        raise ValueError("not a scattering problem file")
    return ScatteringProblem(
        decode_array(d["G"]),
        decode_array(d["V"]),
        DesignPartition(tuple(tuple(b) for b in d["blocks"])),
        decode_array(d["s"]),
        float(d["eps_passivity"]),
        d.get("seed"),
    )


def save_problem(path, p: ScatteringProblem) -> None:
    write_json(path, problem_to_dict(p))


def load_problem(path) -> ScatteringProblem:
    return problem_from_dict(read_json(path))


def solver_config_from_dict(d) -> SolverConfig:
    fields = {f.name for f in dataclasses.fields(SolverConfig)}
    unknown = set(d) - fields
    if unknown:
        raise ValueError(f"unknown solver config keys {sorted(unknown)}")
    return SolverConfig(**d)
