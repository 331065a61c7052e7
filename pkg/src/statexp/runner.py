"""Execute scenarios: dispatch each kind to its checks and collect a report."""

import csv
import math
import time

import numpy as np

from . import macrostates, operational, scenario as scn, setmodel, statmodel
from .config import DEFAULT, Tolerances
from .errors import StructuralError
from .hilbert import EffectOperator
from .report import CheckRecord, Report

GIBBS_MATCH_ATOL = 1e-10


def run_scenario(scenario: scn.Scenario, tolerances: Tolerances = DEFAULT,
                 seed: int = None) -> Report:
    """Run the checks owned by the scenario's kind; see the CLI for exit codes."""
    seed = scenario.seed if seed is None else seed
    tol = tolerances.with_overrides(scenario.tolerances)
    report = Report(scenario.id, scenario.kind, seed,
                    tolerances=_tolerance_dict(tol))
    started = time.perf_counter()
    spec = scn.build(scenario)
    runner = _RUNNERS[scenario.kind]
    runner(spec, report, tol, seed)
    report.wall_time_s = time.perf_counter() - started
    return report


def _tolerance_dict(tol: Tolerances) -> dict:
    return {name: getattr(tol, name) for name in tol.__dataclass_fields__}


def _run_finite_model(spec: scn.FiniteModelSpec, report, tol, seed):
    report.extend_axioms(setmodel.check_selection_axioms(spec.model))
    if spec.table is not None:
        report.extend_axioms(
            statmodel.check_statistical_axioms(spec.table, tol.eps_ax, tol.z))
    for label in spec.rings:
        closure = setmodel.boolean_ring(spec.model, label)
        report.extend_axioms(closure.reports, prefix=f"{label}:")


def _run_experiment(spec: scn.ExperimentSpec, report, tol, seed):
    exp = spec.experiment
    axioms = statmodel.check_experiment_axioms(exp, tol.eps_ax, tol.z)
    report.extend_axioms(axioms)
    if any(not r.passed for r in axioms):
        return
    table = statmodel.trigger_table(exp)
    report.add(CheckRecord("trigger-table", True, data={
        "preparations": len(table.preparations),
        "effect_processes": len(table.processes)}))
    quotient = statmodel.quotient(table, tol.eps_eq, tol.z)
    incompatible = [pair for e in quotient.ensembles for pair in e.incompatible_pairs]
    report.add(CheckRecord(
        "quotient", True, residual=quotient.max_spread,
        note=("incompatible members merged: "
              + ", ".join("/".join(p) for p in incompatible) if incompatible else ""),
        data={"ensembles": len(quotient.ensembles),
              "effects": len(quotient.effect_classes)}))
    report.extend_axioms(statmodel.mu_properties_check(quotient, tol.eps_eq, tol.z))
    for whole, parts in spec.decompositions:
        dec = statmodel.decomposition_weights(exp.lambda_q, whole, parts,
                                              tol.eps_ax, tol.z)
        record = CheckRecord.from_axiom(dec.report, prefix=f"{whole}:")
        record.data = {"weights": [str(w) for w in dec.weights]}
        report.add(record)
        transfer = statmodel.mixture_transfer_check(exp, whole, parts,
                                                    tol.eps_ax, tol.z, table)
        report.add(CheckRecord.from_axiom(transfer, prefix=f"{whole}:"))


def _run_quantum_povm(spec: scn.PovmSpec, report, tol, seed):
    povm, state = spec.povm, spec.state
    total = sum(e.matrix for e in povm.effects)
    residual = float(np.abs(total - np.eye(povm.dim)).max())
    report.add(CheckRecord("povm-normalization", residual <= tol.atol_povm, residual))
    probs = operational.povm_distribution(state, povm)
    report.add(CheckRecord("distribution-sum",
                           abs(probs.sum() - 1.0) <= tol.atol_povm,
                           float(abs(probs.sum() - 1.0))))
    report.add(CheckRecord("distribution", True, data={
        label: float(p) for label, p in zip(povm.outcomes, probs)}))
    if spec.gleason_trials:
        check = operational.gleason_additivity_check(state, spec.gleason_trials, seed)
        report.add(CheckRecord("gleason-additivity",
                               check.max_residual <= tol.eps_ax,
                               check.max_residual, note=check.note))


def _run_instrument(spec: scn.InstrumentSpec, report, tol, seed):
    inst = spec.instrument
    total = sum(op.total_effect() for op in inst.operations)
    residual = float(np.abs(total - np.eye(inst.dim)).max())
    report.add(CheckRecord("instrument-normalization",
                           residual <= tol.atol_instrument, residual))
    povm = operational.induced_povm(inst)
    residual = float(np.abs(sum(e.matrix for e in povm.effects)
                            - np.eye(inst.dim)).max())
    report.add(CheckRecord("induced-povm", residual <= tol.atol_povm, residual))
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(spec.duality_trials):
        w = operational.random_density(inst.dim, rng)
        for outcome, effect in zip(povm.outcomes, povm.effects):
            p, _state = operational.instrument_select(w, inst, (outcome,))
            worst = max(worst, abs(p - operational.born(w, effect)))
    report.add(CheckRecord("duality", worst <= tol.atol_instrument, worst,
                           data={"trials": spec.duality_trials}))
    w = operational.random_density(inst.dim, rng)
    p_full, _ = operational.instrument_select(w, inst, inst.outcomes)
    worst = abs(p_full - 1.0)
    for i in range(len(inst.outcomes)):
        for j in range(i + 1, len(inst.outcomes)):
            pair = (inst.outcomes[i], inst.outcomes[j])
            p_pair, _ = operational.instrument_select(w, inst, pair)
            p_i, _ = operational.instrument_select(w, inst, pair[:1])
            p_j, _ = operational.instrument_select(w, inst, pair[1:])
            worst = max(worst, abs(p_pair - p_i - p_j))
    report.add(CheckRecord("additivity", worst <= tol.atol_instrument, worst))


def _run_lindblad_check(spec: scn.LindbladSpec, report, tol, seed):
    report.add(CheckRecord("model-valid", True, data={
        "dim": spec.model.dim,
        "jumps": len(spec.model.jumps),
        "steps": int(round(spec.time / spec.dt))}))


def evolve_lindblad(spec: scn.LindbladSpec, report, tol):
    trajectory = operational.lindblad_evolve(
        spec.model, spec.initial, spec.time, spec.dt,
        trace_tol=tol.trace_drift, positivity_tol=tol.trajectory_min_eig)
    report.add(CheckRecord("integration", True,
                           data={"steps": len(trajectory.times) - 1}))
    report.add(CheckRecord("trace-drift",
                           trajectory.max_trace_drift <= tol.trace_drift,
                           trajectory.max_trace_drift))
    low = trajectory.min_eigenvalue
    report.add(CheckRecord("min-eigenvalue", low >= -tol.trajectory_min_eig,
                           abs(min(low, 0.0))))
    return trajectory


def write_trajectory_csv(trajectory, path):
    dim = trajectory.states[0].dim
    header = ["time"]
    for i in range(dim):
        for j in range(dim):
            header += [f"re_{i}{j}", f"im_{i}{j}"]
    header += ["trace", "min_eigenvalue"]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for k, t in enumerate(trajectory.times):
            m = trajectory.states[k].matrix
            row = [repr(float(t))]
            for i in range(dim):
                for j in range(dim):
                    row += [repr(float(m[i, j].real)), repr(float(m[i, j].imag))]
            row += [repr(float(trajectory.traces[k])),
                    repr(float(trajectory.min_eigenvalues[k]))]
            writer.writerow(row)


def _build_macrostate(spec: scn.MacrostateSpec):
    if spec.equilibrium is not None:
        eq = spec.equilibrium
        gibbs = macrostates.grand_canonical(
            eq["hamiltonian"], spec.ops.total_number, eq["beta"], eq["mu"])
        ref = macrostates.reference_state(spec.observables, spec.zeta)
        return ref, gibbs
    return macrostates.reference_state(spec.observables, spec.zeta), None


def _run_macrostate(spec: scn.MacrostateSpec, report, tol, seed):
    ref, gibbs = _build_macrostate(spec)
    state = ref.state
    report.add(CheckRecord("state-valid", True, data={"dim": state.dim}))
    s = macrostates.entropy(state, spec.boltzmann)
    bound = spec.boltzmann * math.log(state.dim)
    report.add(CheckRecord("entropy", -tol.eps_ax <= s <= bound + tol.eps_ax,
                           data={"value": s, "max": bound}))
    tail = macrostates.top_occupancy_population(state, spec.ops.total_number)
    report.add(CheckRecord("truncation-tail", tail < tol.truncation_tail, tail))
    if gibbs is not None:
        residual = float(np.abs(gibbs.state.matrix - state.matrix).max())
        report.add(CheckRecord("gibbs-vs-reference",
                               residual <= GIBBS_MATCH_ATOL, residual))
        note = "" if gibbs.commutator_norm <= tol.tau_h else "H and N do not commute"
        report.add(CheckRecord("commutator", True, gibbs.commutator_norm, note=note))
        mean_n = float((state.matrix @ spec.ops.total_number).trace().real)
        report.add(CheckRecord("occupation", True, data={"mean_number": mean_n}))


def evolve_macrostate(spec: scn.MacrostateSpec, report, tol):
    if spec.evolution is None:
        raise StructuralError("macrostate scenario has no 'evolution' block")
    ref, _gibbs = _build_macrostate(spec)
    trajectory = macrostates.liouville_evolve(
        ref, spec.evolution["hamiltonian"], spec.evolution["times"])
    entropies = [macrostates.entropy(w, spec.boltzmann) for w in trajectory.states]
    drift = max(abs(s - entropies[0]) for s in entropies)
    report.add(CheckRecord("entropy-conservation", drift <= tol.eps_ax, drift))
    report.add(CheckRecord(
        "refit", True, residual=float(np.nanmax(trajectory.refit_residuals)),
        note="growing residual means the state left the reference family",
        data={"converged": int(sum(trajectory.refit_converged)),
              "times": len(trajectory.times)}))
    return trajectory


def write_macrostate_csv(spec: scn.MacrostateSpec, trajectory, path):
    header = ["time", "refit_residual"] + [f"<{n}>" for n in spec.observable_names]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for k, t in enumerate(trajectory.times):
            row = [repr(float(t)), repr(float(trajectory.refit_residuals[k]))]
            row += [repr(float(v)) for v in trajectory.expectations[k]]
            writer.writerow(row)


def _run_pipeline(spec: scn.PipelineSpec, report, tol, seed):
    """Sample runs from the quantum predictions, then check the axioms on them.

    Each run draws an apparatus (method) and an outcome jointly from one
    compound distribution, so a single seeded stream per preparation fixes
    the whole experiment.
    """
    method_labels = tuple(spec.methods)
    compound_outcomes, compound_effects = [], []
    for m in method_labels:
        for label, effect in zip(spec.povm.outcomes, spec.povm.effects):
            compound_outcomes.append(f"{m}:{label}")
            compound_effects.append(EffectOperator(spec.methods[m] * effect.matrix))
    compound = operational.Povm(tuple(compound_outcomes), tuple(compound_effects))

    runs = []
    theory = {}
    for idx, (prep, state) in enumerate(spec.preparations.items()):
        outcomes = operational.sample_runs(state, compound,
                                           spec.runs_per_preparation, seed + idx)
        runs.extend((prep, o) for o in outcomes)
        for m in method_labels:
            for label, effect in zip(spec.povm.outcomes, spec.povm.effects):
                theory[(prep, f"{m}:{label}")] = (
                    spec.methods[m] * operational.born(state, effect))

    schema = statmodel.RunSchema(
        preparations=tuple(spec.preparations),
        methods={m: tuple(f"{m}:{o}" for o in spec.povm.outcomes)
                 for m in method_labels},
        unions=spec.unions or None,
    )
    exp, tally = statmodel.frequencies_from_runs(runs, schema)
    report.add(CheckRecord("sampling", True, data={
        "total_runs": tally.total,
        "per_preparation": {k: v for k, v in sorted(tally.per_preparation.items())},
        "undefined": list(tally.undefined)}))

    if tally.total == 0:
        report.add(CheckRecord("vacuous", True, note="no runs; all checks vacuous"))
        return

    report.extend_axioms(statmodel.check_experiment_axioms(exp, tol.eps_ax, tol.z))

    worst_z = 0.0
    z_data = {}
    n = spec.runs_per_preparation
    for (prep, outcome), p in sorted(theory.items()):
        freq = tally.per_cell.get((prep, outcome), 0) / n
        if p in (0.0, 1.0):
            z_val = 0.0 if freq == p else float("inf")
        else:
            z_val = (freq - p) / math.sqrt(p * (1.0 - p) / n)
        z_data[f"{prep}|{outcome}"] = z_val
        worst_z = max(worst_z, abs(z_val))
    report.add(CheckRecord("born-agreement", worst_z <= tol.z, worst_z,
                           data={"z_scores": z_data}))

    if spec.decomposition_checks and spec.unions:
        table = statmodel.trigger_table(exp)
        for whole, children in spec.unions.items():
            parts = [c for c in children if c in exp.preparations]
            if whole not in exp.preparations or len(parts) != len(children):
                continue
            transfer = statmodel.mixture_transfer_check(
                exp, whole, parts, tol.eps_ax, tol.z, table)
            report.add(CheckRecord.from_axiom(transfer, prefix=f"{whole}:"))


_RUNNERS = {
    "finite-model": _run_finite_model,
    "experiment": _run_experiment,
    "quantum-povm": _run_quantum_povm,
    "instrument": _run_instrument,
    "lindblad": _run_lindblad_check,
    "macrostate": _run_macrostate,
    "pipeline": _run_pipeline,
}
