"""Scenario files: one YAML document per scenario, parsed into typed specs.

Matrix literals are nested arrays whose entries are either plain numbers
(real) or [re, im] pairs (complex). Probabilities and weights accept "p/q"
strings for exact rationals. Fock-space operators may be declared through
small named builders instead of literal matrices.
"""

from dataclasses import dataclass, replace
from fractions import Fraction
from pathlib import Path

import numpy as np
import yaml

from . import macrostates
from .errors import StructuralError
from .hilbert import DensityOperator, EffectOperator
from .operational import Instrument, LindbladModel, Operation, Povm
from .setmodel import FiniteModel
from .statmodel import (
    ConditionalProbability,
    Experiment,
    experiment_from_atoms,
    table_from_weights,
)

KINDS = ("finite-model", "experiment", "quantum-povm", "instrument",
         "lindblad", "macrostate", "pipeline")


@dataclass
class Scenario:
    kind: str
    id: str
    seed: int
    tolerances: dict
    body: dict
    path: str


def load_scenario(path) -> Scenario:
    path = Path(path)
    try:
        with open(path) as fh:
            doc = yaml.safe_load(fh)
    except yaml.YAMLError as exc:
        raise StructuralError(f"cannot parse {path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise StructuralError(f"{path}: scenario must be a mapping")
    kind = doc.pop("kind", None)
    if kind not in KINDS:
        raise StructuralError(f"{path}: unknown kind {kind!r} (expected one of {KINDS})")
    scenario_id = doc.pop("id", path.stem)
    seed = doc.pop("seed", 0)
    if not isinstance(seed, int):
        raise StructuralError(f"{path}: seed must be an integer")
    tolerances = doc.pop("tolerances", {}) or {}
    if not isinstance(tolerances, dict):
        raise StructuralError(f"{path}: tolerances must be a mapping")
    return Scenario(kind, str(scenario_id), seed, tolerances, doc, str(path))


# ---------------------------------------------------------------------------
# Value and matrix literals
# ---------------------------------------------------------------------------

def parse_value(node):
    """Probability/weight literal: number, or "p/q" for an exact rational."""
    if isinstance(node, bool):
        raise StructuralError(f"expected a number, got {node!r}")
    if isinstance(node, int):
        return Fraction(node)
    if isinstance(node, float):
        return node
    if isinstance(node, str):
        try:
            return Fraction(node)
        except ValueError:
            raise StructuralError(f"cannot parse {node!r} as a rational") from None
    raise StructuralError(f"cannot parse {node!r} as a probability or weight")


def _parse_entry(node):
    if isinstance(node, (int, float)) and not isinstance(node, bool):
        return complex(node)
    if (isinstance(node, list) and len(node) == 2
            and all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in node)):
        return complex(node[0], node[1])
    raise StructuralError(f"matrix entry {node!r} is neither a number nor [re, im]")


def parse_matrix(node) -> np.ndarray:
    if not isinstance(node, list) or not node or not all(isinstance(r, list) for r in node):
        raise StructuralError("matrix literal must be a list of rows")
    rows = [[_parse_entry(x) for x in row] for row in node]
    widths = {len(r) for r in rows}
    if len(widths) != 1:
        raise StructuralError("matrix rows have different lengths")
    return np.array(rows, dtype=complex)


def parse_vector(node) -> np.ndarray:
    if not isinstance(node, list) or not node:
        raise StructuralError("vector literal must be a nonempty list")
    return np.array([_parse_entry(x) for x in node], dtype=complex)


def parse_state(node) -> DensityOperator:
    if not isinstance(node, dict):
        raise StructuralError("state must be {pure: vector} or {matrix: matrix}")
    if "pure" in node:
        v = parse_vector(node["pure"])
        norm = np.linalg.norm(v)
        if norm == 0:
            raise StructuralError("pure state vector is zero")
        v = v / norm
        return DensityOperator(np.outer(v, v.conj()))
    if "matrix" in node:
        return DensityOperator(parse_matrix(node["matrix"]))
    raise StructuralError("state must declare either 'pure' or 'matrix'")


def parse_povm(node) -> Povm:
    if not isinstance(node, dict) or not node:
        raise StructuralError("povm must map outcome labels to effect matrices")
    outcomes = tuple(node)
    effects = tuple(EffectOperator(parse_matrix(m)) for m in node.values())
    return Povm(outcomes, effects)


# ---------------------------------------------------------------------------
# Per-kind specs
# ---------------------------------------------------------------------------

@dataclass
class FiniteModelSpec:
    model: FiniteModel
    table: ConditionalProbability = None
    rings: tuple = ()


def build_finite_model(body) -> FiniteModelSpec:
    elements = body.get("elements")
    family = body.get("family")
    if not isinstance(elements, list) or not isinstance(family, dict):
        raise StructuralError("finite-model needs 'elements' (list) and 'family' (mapping)")
    model = FiniteModel(elements, {str(k): v for k, v in family.items()})
    table = None
    weights = body.get("atom_weights")
    if weights is not None:
        parsed = {str(k): parse_value(v) for k, v in weights.items()}
        if any(v <= 0 for v in parsed.values()):
            raise StructuralError("atom weights must be positive")
        table = table_from_weights(model, parsed)
    entries = body.get("table")
    if entries is not None:
        base = {key: table.value(*key) for key in table.pairs()} if table else {}
        for item in entries:
            if not (isinstance(item, list) and len(item) == 3):
                raise StructuralError(f"table entry {item!r} is not [a, b, value]")
            a, b, v = item
            if v is None:
                base.pop((str(a), str(b)), None)
            else:
                base[(str(a), str(b))] = parse_value(v)
        table = ConditionalProbability(model, base)
    rings = body.get("rings", ())
    if rings is True:
        rings = model.labels
    elif rings:
        rings = tuple(str(r) for r in rings)
    return FiniteModelSpec(model, table, tuple(rings))


@dataclass
class ExperimentSpec:
    experiment: Experiment
    decompositions: tuple = ()


def _resolve_combined_label(exp: Experiment, node):
    if not isinstance(node, dict):
        raise StructuralError("combined-set reference must be a mapping")
    mask = exp.preparations.element_mask()
    if "preparation" in node:
        mask &= exp.preparations.mask(str(node["preparation"]))
    if "registration" in node:
        label = str(node["registration"])
        fam = exp.registrations if label in exp.registrations else exp.methods
        mask &= fam.mask(label)
    label = exp.combined.label_of(mask)
    if label is None:
        raise StructuralError(f"no combined-family member matches {node!r}")
    return label


def build_experiment(body) -> ExperimentSpec:
    atoms = body.get("atoms")
    if not isinstance(atoms, dict) or not atoms:
        raise StructuralError("experiment needs an 'atoms' weight mapping")
    weights = {str(k): parse_value(v) for k, v in atoms.items()}
    if any(v <= 0 for v in weights.values()):
        raise StructuralError("atom weights must be positive")

    def family(key, required=True):
        fam = body.get(key)
        if fam is None:
            if required:
                raise StructuralError(f"experiment needs '{key}'")
            return {}
        if not isinstance(fam, dict):
            raise StructuralError(f"'{key}' must be a mapping of label -> atom list")
        return {str(k): list(v) for k, v in fam.items()}

    registrations = body.get("registrations")
    exp = experiment_from_atoms(
        weights,
        family("preparations"),
        family("methods"),
        family("outcomes", required=False),
        registrations=[str(r) for r in registrations] if registrations else None,
    )

    overrides = body.get("overrides") or {}
    for key, attr, model in (("lambda_q", "lambda_q", exp.preparations),
                             ("lambda_r0", "lambda_r0", exp.methods)):
        for item in overrides.get(key, ()):
            if not (isinstance(item, list) and len(item) == 3):
                raise StructuralError(f"{key} override {item!r} is not [a, b, value]")
            a, b, v = str(item[0]), str(item[1]), item[2]
            cp = getattr(exp, attr)
            cp = cp.without(a, b) if v is None else cp.with_value(a, b, parse_value(v))
            exp = replace(exp, **{attr: cp})
    for item in overrides.get("lambda_s", ()):
        if not isinstance(item, dict) or "row" not in item or "col" not in item:
            raise StructuralError("lambda_s override needs 'row', 'col' and 'value'")
        row = _resolve_combined_label(exp, item["row"])
        col = _resolve_combined_label(exp, item["col"])
        v = item.get("value")
        cp = (exp.lambda_s.without(row, col) if v is None
              else exp.lambda_s.with_value(row, col, parse_value(v)))
        exp = replace(exp, lambda_s=cp)

    decompositions = []
    for item in body.get("decompositions", ()):
        if not isinstance(item, dict) or "whole" not in item or "parts" not in item:
            raise StructuralError("decomposition needs 'whole' and 'parts'")
        decompositions.append((str(item["whole"]), tuple(str(p) for p in item["parts"])))
    return ExperimentSpec(exp, tuple(decompositions))


@dataclass
class PovmSpec:
    state: DensityOperator
    povm: Povm
    gleason_trials: int = 0


def build_quantum_povm(body) -> PovmSpec:
    if "state" not in body or "povm" not in body:
        raise StructuralError("quantum-povm needs 'state' and 'povm'")
    spec = PovmSpec(parse_state(body["state"]), parse_povm(body["povm"]))
    gleason = body.get("gleason")
    if gleason:
        spec.gleason_trials = int(gleason.get("trials", 100))
    return spec


@dataclass
class InstrumentSpec:
    instrument: Instrument
    duality_trials: int = 25


def build_instrument(body) -> InstrumentSpec:
    ops = body.get("operations")
    if not isinstance(ops, dict) or not ops:
        raise StructuralError("instrument needs 'operations': outcome -> Kraus list")
    outcomes, operations = [], []
    for label, kraus_list in ops.items():
        if not isinstance(kraus_list, list) or not kraus_list:
            raise StructuralError(f"outcome {label!r} needs a nonempty Kraus list")
        outcomes.append(str(label))
        operations.append(Operation(tuple(parse_matrix(k) for k in kraus_list)))
    return InstrumentSpec(Instrument(tuple(outcomes), tuple(operations)),
                          int(body.get("duality_trials", 25)))


@dataclass
class LindbladSpec:
    model: LindbladModel
    initial: DensityOperator
    time: float
    dt: float


def build_lindblad(body) -> LindbladSpec:
    for key in ("hamiltonian", "initial", "time", "dt"):
        if key not in body:
            raise StructuralError(f"lindblad needs '{key}'")
    jumps = []
    for item in body.get("jumps", ()):
        if not isinstance(item, dict) or "matrix" not in item or "rate" not in item:
            raise StructuralError("jump needs 'matrix' and 'rate'")
        jumps.append((parse_matrix(item["matrix"]), float(item["rate"])))
    model = LindbladModel(parse_matrix(body["hamiltonian"]), tuple(jumps))
    return LindbladSpec(model, parse_state(body["initial"]),
                        float(body["time"]), float(body["dt"]))


@dataclass
class MacrostateSpec:
    space: macrostates.FockSpace
    ops: macrostates.ModeOperators
    observable_names: tuple
    observables: tuple
    zeta: tuple
    equilibrium: dict = None          # beta, mu, hamiltonian matrix
    evolution: dict = None            # hamiltonian matrix, times tuple
    boltzmann: float = 1.0


def build_fock_operator(node, ops: macrostates.ModeOperators) -> np.ndarray:
    if isinstance(node, list):
        return parse_matrix(node)
    if not isinstance(node, dict) or "builder" not in node:
        raise StructuralError(f"operator {node!r} is neither a matrix nor a builder")
    kind = node["builder"]
    if kind == "total_number":
        return ops.total_number
    if kind == "mode_number":
        return ops.number[int(node["mode"])]
    if kind == "harmonic":
        omega = node.get("omega", 1.0)
        if isinstance(omega, list):
            if len(omega) != ops.space.modes:
                raise StructuralError("harmonic needs one omega per mode")
            return sum(float(w) * n for w, n in zip(omega, ops.number))
        return float(omega) * ops.total_number
    if kind == "hopping":
        i, j = (int(m) for m in node["modes"])
        g = float(node.get("amplitude", 1.0))
        return g * (ops.creation[i] @ ops.annihilation[j]
                    + ops.creation[j] @ ops.annihilation[i])
    if kind == "sum":
        return sum(build_fock_operator(t, ops) for t in node["terms"])
    raise StructuralError(f"unknown operator builder {kind!r}")


def build_macrostate(body) -> MacrostateSpec:
    modes = int(body.get("modes", 1))
    nmax = body.get("nmax")
    if nmax is None:
        raise StructuralError("macrostate needs 'nmax'")
    space, ops = macrostates.fock_build(modes, int(nmax))
    boltzmann = float(body.get("boltzmann", 1.0))

    equilibrium = None
    if "beta" in body:
        if "hamiltonian" not in body:
            raise StructuralError("equilibrium macrostate needs 'hamiltonian'")
        h = build_fock_operator(body["hamiltonian"], ops)
        beta = float(body["beta"])
        mu = float(body.get("mu", 0.0))
        equilibrium = {"beta": beta, "mu": mu, "hamiltonian": h}
        names = ("hamiltonian", "total_number")
        observables = (h, ops.total_number)
        zeta = (beta, -beta * mu)
    else:
        decls = body.get("observables")
        zeta_node = body.get("zeta")
        if not decls or zeta_node is None:
            raise StructuralError(
                "macrostate needs either 'beta' or 'observables' plus 'zeta'")
        names, observables = [], []
        for item in decls:
            if not isinstance(item, dict) or "name" not in item or "op" not in item:
                raise StructuralError("each observable needs 'name' and 'op'")
            names.append(str(item["name"]))
            observables.append(build_fock_operator(item["op"], ops))
        names, observables = tuple(names), tuple(observables)
        zeta = tuple(float(z) for z in zeta_node)
        if len(zeta) != len(observables):
            raise StructuralError("zeta length must match the observables")

    evolution = None
    if "evolution" in body:
        ev = body["evolution"]
        if not isinstance(ev, dict) or "hamiltonian" not in ev or "times" not in ev:
            raise StructuralError("evolution needs 'hamiltonian' and 'times'")
        times = ev["times"]
        if isinstance(times, dict):
            stop, step = float(times["stop"]), float(times["step"])
            count = int(round(stop / step))
            times = [i * step for i in range(count + 1)]
        evolution = {"hamiltonian": build_fock_operator(ev["hamiltonian"], ops),
                     "times": tuple(float(t) for t in times)}

    return MacrostateSpec(space, ops, tuple(names), tuple(observables), zeta,
                          equilibrium, evolution, boltzmann)


@dataclass
class PipelineSpec:
    preparations: dict                # atomic label -> DensityOperator
    unions: dict                      # coarse label -> child labels
    povm: Povm
    methods: dict                     # method label -> assignment probability
    runs_per_preparation: int
    decomposition_checks: bool = True


def build_pipeline(body) -> PipelineSpec:
    preps = body.get("preparations")
    if not isinstance(preps, dict) or not preps:
        raise StructuralError("pipeline needs 'preparations'")
    states = {str(k): parse_state(v) for k, v in preps.items()}
    unions = {str(k): tuple(str(c) for c in v)
              for k, v in (body.get("union_preparations") or {}).items()}
    for label, children in unions.items():
        unknown = [c for c in children if c not in states]
        if unknown:
            raise StructuralError(f"union {label!r} references unknown {unknown}")
    povm = parse_povm(body.get("povm") or {})
    methods = {str(k): float(v) for k, v in (body.get("methods") or {"m": 1.0}).items()}
    if abs(sum(methods.values()) - 1.0) > 1e-12 or any(p < 0 for p in methods.values()):
        raise StructuralError("method assignment probabilities must sum to 1")
    runs = int(body.get("runs_per_preparation", 0))
    if runs < 0:
        raise StructuralError("runs_per_preparation must be nonnegative")
    return PipelineSpec(states, unions, povm, methods, runs)


BUILDERS = {
    "finite-model": build_finite_model,
    "experiment": build_experiment,
    "quantum-povm": build_quantum_povm,
    "instrument": build_instrument,
    "lindblad": build_lindblad,
    "macrostate": build_macrostate,
    "pipeline": build_pipeline,
}


def build(scenario: Scenario):
    try:
        return BUILDERS[scenario.kind](scenario.body)
    except KeyError as exc:
        raise StructuralError(f"no builder for kind {scenario.kind!r}") from exc
