"""Scenario configs: loading, validation and construction of library objects.

A scenario is a JSON document validated against the bundled
``scenario.schema.json`` (unknown keys rejected). Everything random is drawn
from one ``numpy`` generator seeded by the caller, in a fixed order, so a
scenario plus a seed determines every output byte.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import jsonschema
import numpy as np

from .composite import CompositeSystem, tensor_product
from .diagnostics import Tolerances
from .dynamics import IntegratorOptions
from .fixtures import commuting_observable, random_hamiltonian, random_state
from .io import load_schema, matrix_from_json, vector_from_json
from .maxent import ConstraintTarget, maxent_state, partial_canonical_state
from .state import (
    CLASSICAL,
    QUANTUM,
    GeneratorSet,
    PhysicalConstants,
    StateError,
    StateMatrix,
    diag_state,
    maximally_mixed,
    pure_state,
)

PAULI = (
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, -1j], [1j, 0]], dtype=complex),
    np.array([[1, 0], [0, -1]], dtype=complex),
)


class ConfigError(ValueError):
    """Malformed or inconsistent scenario; maps to exit status 2."""


def _validator():
    schema = load_schema("scenario")
    return jsonschema.Draft202012Validator(schema)


def _path(error) -> str:
    return "/" + "/".join(str(p) for p in error.absolute_path)


# errors that usually just mean "this oneOf branch was not the one intended"
_BRANCH_VALIDATORS = {"const", "enum", "required", "additionalProperties", "oneOf"}


def _specificity(error):
    return (len(error.absolute_path), error.validator not in _BRANCH_VALIDATORS)


def _deepest(error):
    """Most specific error inside nested ``oneOf`` branches."""
    subs = [_deepest(sub) for sub in error.context or ()]
    if not subs:
        return error
    best = max(subs, key=_specificity)
    return best if _specificity(best) >= _specificity(error) else error


def parse_config_text(text: str, source: str = "<config>") -> dict:
    """Parse and schema-check a config document.

    Syntax errors are reported with line and column; schema violations with
    the JSON path of the offending field.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{source}:{exc.lineno}:{exc.colno}: invalid JSON: {exc.msg}") from exc
    errors = sorted(_validator().iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        leaf = _deepest(jsonschema.exceptions.best_match(errors))
        raise ConfigError(f"{source}: field {_path(leaf)}: {leaf.message}")
    return doc


def load_config(path: str | Path) -> dict:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from exc
    return parse_config_text(text, str(path))


@dataclass
class ScenarioConfig:
    name: str = "scenario"
    backend: str = QUANTUM
    generators: dict | None = None
    initial_state: dict | None = None
    maxent: dict | None = None
    composite: dict | None = None
    constants: PhysicalConstants = field(default_factory=PhysicalConstants)
    integrator: IntegratorOptions = field(default_factory=IntegratorOptions)
    probe: dict | None = None
    tolerances: Tolerances = field(default_factory=Tolerances)
    finite_difference: bool = True
    outputs: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, doc: dict) -> "ScenarioConfig":
        integ = dict(doc.get("integrator", {}))
        if "checkpoints" in integ:
            integ["checkpoints"] = tuple(integ["checkpoints"])
        verify = dict(doc.get("verify", {}))
        fd = verify.pop("finite_difference", True)
        try:
            return cls(
                name=doc.get("name", "scenario"),
                backend=doc.get("backend", QUANTUM),
                generators=doc.get("generators"),
                initial_state=doc.get("initial_state"),
                maxent=doc.get("maxent"),
                composite=doc.get("composite"),
                constants=PhysicalConstants(**doc.get("constants", {})),
                integrator=IntegratorOptions(**integ),
                probe=doc.get("probe"),
                tolerances=Tolerances(**verify),
                finite_difference=fd,
                outputs=dict(doc.get("outputs", {})),
            )
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc

    @property
    def trajectory_csv(self) -> str:
        return self.outputs.get("trajectory_csv", "trajectory.csv")

    @property
    def report_json(self) -> str:
        return self.outputs.get("report_json", "report.json")

    def options_dict(self) -> dict:
        out = asdict(self.integrator)
        out["checkpoints"] = list(out["checkpoints"])
        return {k: (None if isinstance(v, float) and math.isinf(v) else v) for k, v in out.items()}


def scenarios_from_doc(doc: dict) -> list:
    docs = doc["scenarios"] if "scenarios" in doc else [doc]
    out = [ScenarioConfig.from_dict(d) for d in docs]
    names = [c.name for c in out]
    if len(set(names)) != len(names):
        # sweeps write one directory per scenario; make names unique
        for i, c in enumerate(out):
            c.name = f"{i:03d}_{c.name}"
    return out


# ---------------------------------------------------------------------------
# builders
# ---------------------------------------------------------------------------

def _require(value, what: str):
    if value is None:
        raise ConfigError(f"scenario needs a '{what}' section for this command")
    return value


def _classical_from(a: np.ndarray, what: str) -> np.ndarray:
    if a.ndim == 1:
        return np.real(a).astype(float)
    off = a - np.diag(np.diag(a))
    if np.max(np.abs(off)) > 0 or np.max(np.abs(np.imag(a))) > 0:
        raise ConfigError(f"{what}: classical backend needs a real diagonal")
    return np.real(np.diag(a)).astype(float)


def build_operator(spec, backend: str, rng: np.random.Generator, what: str = "operator") -> np.ndarray:
    if isinstance(spec, list):
        a = matrix_from_json(spec)
        if backend == CLASSICAL:
            return _classical_from(a, what)
        return np.diag(a).astype(complex) if a.ndim == 1 else a
    if "random" in spec:
        return random_hamiltonian(int(spec["random"]), rng, backend)
    preset = spec["preset"]
    if preset == "two_level":
        vals = np.array([0.0, float(spec.get("gap", 1.0))])
    elif preset == "ladder":
        vals = float(spec.get("spacing", 1.0)) * np.arange(int(spec["d"]), dtype=float)
    else:
        fx, fy, fz = spec.get("field", [0.0, 0.0, 1.0])
        if backend == CLASSICAL:
            if fx or fy:
                raise ConfigError(f"{what}: pauli preset with x/y field is not diagonal")
            return np.array([fz, -fz], dtype=float)
        return fx * PAULI[0] + fy * PAULI[1] + fz * PAULI[2]
    return vals if backend == CLASSICAL else np.diag(vals).astype(complex)


def build_generators(cfg: ScenarioConfig, rng: np.random.Generator) -> GeneratorSet:
    spec = _require(cfg.generators, "generators")
    h = build_operator(spec["hamiltonian"], cfg.backend, rng, "generators/hamiltonian")
    conserved = []
    for i, c in enumerate(spec.get("conserved", [])):
        if isinstance(c, dict):
            conserved.append(commuting_observable(h, rng, int(c["random_commuting"])))
        else:
            conserved.append(build_operator(c, cfg.backend, rng, f"generators/conserved/{i}"))
    try:
        return GeneratorSet.from_arrays(h, conserved, cfg.backend)
    except StateError as exc:
        raise ConfigError(f"generators: {exc}") from exc


def target_from(spec: dict) -> ConstraintTarget:
    return ConstraintTarget(float(spec["mean_H"]), tuple(float(x) for x in spec.get("mean_N", [])))


def solve_target(spec: dict, gens: GeneratorSet):
    """Canonical or partial-canonical state for a ``target`` section."""
    target = target_from(spec)
    if len(target.values) != len(gens.generators):
        raise ConfigError(f"target has {len(target.values)} mean values, "
                          f"generator set has {len(gens.generators)}")
    if "projector" in spec:
        b = matrix_from_json(spec["projector"])
        if gens.backend == QUANTUM and b.ndim == 1:
            b = np.diag(b)
        return partial_canonical_state(b, gens, target)
    return maxent_state(gens, target)


def build_state(spec: dict, gens: GeneratorSet, rng: np.random.Generator,
                what: str = "initial_state") -> StateMatrix:
    backend, d = gens.backend, gens.dim
    (kind, value), = spec.items()
    if kind == "diag":
        if len(value) != d:
            raise ConfigError(f"{what}/diag: expected {d} entries, got {len(value)}")
        return diag_state(value, backend)
    if kind == "pure":
        if backend == CLASSICAL:
            raise ConfigError(f"{what}/pure: use 'eigenstate' or 'diag' for classical states")
        v = vector_from_json(value)
        if len(v) != d:
            raise ConfigError(f"{what}/pure: expected {d} amplitudes, got {len(v)}")
        return pure_state(v)
    if kind == "eigenstate":
        if value >= d:
            raise ConfigError(f"{what}/eigenstate: index {value} out of range for dimension {d}")
        h = gens.hamiltonian
        if backend == CLASSICAL:
            p = np.zeros(d)
            p[np.argsort(h, kind="stable")[value]] = 1.0
            return diag_state(p, CLASSICAL)
        return pure_state(np.linalg.eigh(h)[1][:, value])
    if kind == "maxent":
        return solve_target(value, gens)[0]
    if kind == "matrix":
        a = matrix_from_json(value)
        if backend == CLASSICAL:
            a = _classical_from(a, f"{what}/matrix")
        elif a.ndim == 1:
            a = np.diag(a).astype(complex)
        if a.shape[0] != d:
            raise ConfigError(f"{what}/matrix: dimension {a.shape[0]} does not match {d}")
        return StateMatrix.from_array(a, backend)
    if kind == "maximally_mixed":
        return maximally_mixed(d, backend)
    if kind == "random":
        rank = value.get("rank")
        if rank is not None and rank > d:
            raise ConfigError(f"{what}/random: rank {rank} exceeds dimension {d}")
        return random_state(d, rng, backend, rank)
    raise ConfigError(f"{what}/{kind}: only valid for composite scenarios")


def build_composite(cfg: ScenarioConfig, rng: np.random.Generator):
    """``(CompositeSystem, initial state)``; quantum backend only."""
    spec = _require(cfg.composite, "composite")
    if cfg.backend != QUANTUM:
        raise ConfigError("composite scenarios need the quantum backend")
    h_a = build_operator(spec["H_A"], QUANTUM, rng, "composite/H_A")
    h_b = build_operator(spec["H_B"], QUANTUM, rng, "composite/H_B")
    da, db = h_a.shape[0], h_b.shape[0]
    v = spec.get("V_AB")
    if isinstance(v, dict):
        v = float(v["random"]) * random_hamiltonian(da * db, rng)
    elif v is not None:
        v = matrix_from_json(v)
        if v.ndim == 1:
            v = np.diag(v).astype(complex)
    try:
        sys = CompositeSystem.from_parts(h_a, h_b, v, spec.get("tau_A", cfg.constants.tau),
                                         spec.get("tau_B", cfg.constants.tau), cfg.constants)
    except (StateError, ValueError) as exc:
        raise ConfigError(f"composite: {exc}") from exc
    init = _require(cfg.initial_state, "initial_state")
    if "product" in init:
        a_spec, b_spec = init["product"]
        rho_a = build_state(a_spec, GeneratorSet.from_arrays(h_a), rng, "initial_state/product/0")
        rho_b = build_state(b_spec, GeneratorSet.from_arrays(h_b), rng, "initial_state/product/1")
        rho0 = tensor_product(rho_a, rho_b)
    else:
        rho0 = build_state(init, GeneratorSet.from_arrays(sys.H), rng)
    return sys, rho0
