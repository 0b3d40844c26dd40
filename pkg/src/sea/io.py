"""JSON serialisation of matrices and states.

Complex matrices are row-major arrays of ``[re, im]`` pairs; classical
(diagonal) states and observables are flat arrays of reals. Floats go through
``json`` which writes the shortest repr, so a round trip is exact.
"""

from __future__ import annotations

import json
from importlib import resources
from pathlib import Path

import numpy as np

from .state import CLASSICAL, QUANTUM, StateError, StateMatrix


def matrix_to_json(a: np.ndarray) -> list:
    a = np.asarray(a)
    if a.ndim == 1:
        return [float(x) for x in np.real(a)]
    return [[[float(z.real), float(z.imag)] for z in row] for row in a.astype(complex)]


def matrix_from_json(obj) -> np.ndarray:
    """Parse either a flat real array or a square array of reals / ``[re, im]`` pairs."""
    if not isinstance(obj, list) or not obj:
        raise StateError("matrix must be a non-empty JSON array")
    if all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in obj):
        return np.array(obj, dtype=float)
    n = len(obj)
    out = np.empty((n, n), dtype=complex)
    for i, row in enumerate(obj):
        if not isinstance(row, list) or len(row) != n:
            raise StateError(f"row {i} must be an array of length {n}")
        for j, z in enumerate(row):
            if isinstance(z, (int, float)) and not isinstance(z, bool):
                out[i, j] = float(z)
            elif isinstance(z, list) and len(z) == 2:
                out[i, j] = complex(float(z[0]), float(z[1]))
            else:
                raise StateError(f"entry [{i}][{j}] must be a number or [re, im]")
    return out


def vector_from_json(obj) -> np.ndarray:
    """State vector: reals or ``[re, im]`` pairs."""
    out = []
    for z in obj:
        out.append(complex(float(z[0]), float(z[1])) if isinstance(z, list) else complex(float(z)))
    return np.array(out)


def state_to_json(rho: StateMatrix) -> dict:
    return {"backend": rho.backend, "entries": matrix_to_json(rho.entries)}


def state_from_json(obj: dict) -> StateMatrix:
    backend = obj.get("backend")
    a = matrix_from_json(obj["entries"])
    if backend == CLASSICAL and a.ndim != 1:
        raise StateError("classical states are flat arrays of probabilities")
    if backend == QUANTUM and a.ndim != 2:
        raise StateError("quantum states are square matrices")
    return StateMatrix.from_array(a, backend)


def save_state(rho: StateMatrix, path: str | Path) -> None:
    Path(path).write_text(json.dumps(state_to_json(rho)))


def load_state(path: str | Path) -> StateMatrix:
    return state_from_json(json.loads(Path(path).read_text()))


def load_schema(name: str) -> dict:
    """Bundled JSON schema (``matrix`` or ``scenario``)."""
    text = resources.files("sea").joinpath("schemas", f"{name}.schema.json").read_text()
    return json.loads(text)
