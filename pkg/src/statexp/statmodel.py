"""Conditional-probability tables on finite models and the experiment axioms.

Probabilities are exact rationals when a table is built analytically (from
positive atom weights) and floats when empirical. Checks compare within
max(eps_ax, z * stderr) where the standard error is attached to empirical
entries; on exact tables the comparisons are exact because the differences
are Fractions.

Registration procedures deliberately carry no probability table of their own:
the Experiment type has slots only for the statistics of preparations,
registration methods and the combined family.
"""

import math
from collections import Counter
from dataclasses import dataclass
from fractions import Fraction

from .errors import IncompleteModelError, StructuralError
from .setmodel import (
    MAX_FAMILY,
    AxiomReport,
    FiniteModel,
    check_selection_axioms,
)

STATISTICAL_AXIOMS = ("S2.1", "S2.2", "S2.3", "S2.derived", "S2.additivity")
EXPERIMENT_AXIOMS = ("A1", "A2", "A3", "A4.1", "A4.2", "A4.3", "A5", "A6.1", "A6.2")


def _is_probability(value) -> bool:
    return 0 <= value <= 1


class ConditionalProbability:
    """Partial function lambda(a, b) on nested nonempty pairs of one family.

    The admissible domain is T = {(a, b) : b subset of a, a nonempty}; keys
    outside T are rejected at construction. trials, when given, holds the
    number of underlying runs per entry and yields binomial standard errors.
    """

    def __init__(self, model: FiniteModel, table, trials=None):
        self.model = model
        clean = {}
        for (a, b), value in dict(table).items():
            ma, mb = model.mask(a), model.mask(b)
            if ma == 0:
                raise StructuralError(f"({a!r}, {b!r}): conditioning subset is empty")
            if mb & ~ma:
                raise StructuralError(f"({a!r}, {b!r}): {b!r} is not contained in {a!r}")
            if not _is_probability(value):
                raise StructuralError(f"({a!r}, {b!r}): value {value!r} outside [0, 1]")
            clean[(a, b)] = value
        self._table = clean
        self._trials = dict(trials) if trials else {}

    def has(self, a, b) -> bool:
        return (a, b) in self._table

    def value(self, a, b):
        try:
            return self._table[(a, b)]
        except KeyError:
            raise IncompleteModelError(f"no probability entry for ({a!r}, {b!r})") from None

    def get(self, a, b, default=None):
        return self._table.get((a, b), default)

    def trials(self, a, b):
        return self._trials.get((a, b))

    def stderr(self, a, b) -> float:
        n = self._trials.get((a, b))
        if not n:
            return 0.0
        p = float(self._table[(a, b)])
        return math.sqrt(p * (1.0 - p) / n)

    def pairs(self):
        return self._table.keys()

    def domain(self):
        """All admissible pairs of the underlying family (the full T)."""
        items = list(self.model.items())
        for a, ma in items:
            if ma == 0:
                continue
            for b, mb in items:
                if mb & ~ma == 0:
                    yield (a, b)

    def is_total(self) -> bool:
        return all(self.has(a, b) for a, b in self.domain())

    def with_value(self, a, b, value) -> "ConditionalProbability":
        table = dict(self._table)
        table[(a, b)] = value
        return ConditionalProbability(self.model, table, self._trials)

    def without(self, a, b) -> "ConditionalProbability":
        table = dict(self._table)
        table.pop((a, b), None)
        return ConditionalProbability(self.model, table, self._trials)


def _subset_weight(element_weights, elements, mask):
    total = 0
    for i, e in enumerate(elements):
        if mask >> i & 1:
            total += element_weights[e]
    return total


def table_from_weights(model: FiniteModel, element_weights, attach_trials=False):
    """Total table lambda(a, b) = w(b)/w(a) from per-element weights.

    Integer or Fraction weights give exact rational entries; such a table
    satisfies every statistical axiom by construction. With attach_trials the
    denominator weight is recorded as the trial count (weights must then be
    integral counts).
    """
    for e in model.elements:
        if e not in element_weights:
            raise StructuralError(f"no weight for element {e!r}")
        if element_weights[e] < 0:
            raise StructuralError(f"negative weight for element {e!r}")
    weight_of = {
        label: _subset_weight(element_weights, model.elements, mask)
        for label, mask in model.items()
    }
    exact = all(isinstance(element_weights[e], (int, Fraction)) for e in model.elements)
    table = {}
    trials = {}
    items = list(model.items())
    for a, ma in items:
        wa = weight_of[a]
        if ma == 0 or wa == 0:
            continue
        for b, mb in items:
            if mb & ~ma == 0:
                wb = weight_of[b]
                table[(a, b)] = Fraction(wb, wa) if exact else float(wb) / float(wa)
                if attach_trials:
                    trials[(a, b)] = int(wa)
    return ConditionalProbability(model, table, trials if attach_trials else None)


def _tol(eps, z, *stderrs):
    squared = sum(s * s for s in stderrs if s)
    return max(eps, z * math.sqrt(squared)) if squared else eps


class _TableView:
    """Index-based view of a table for the exhaustive enumerations."""

    def __init__(self, cp: ConditionalProbability):
        model = cp.model
        self.labels = model.labels
        self.masks = [model.mask(lab) for lab in self.labels]
        index = {lab: i for i, lab in enumerate(self.labels)}
        self.mask_index = {m: i for i, m in enumerate(self.masks)}
        self.values = {}
        self.errs = {}
        for (a, b), v in cp._table.items():
            key = (index[a], index[b])
            self.values[key] = v
            se = cp.stderr(a, b)
            if se:
                self.errs[key] = se
        self.subsets = [
            [j for j, mj in enumerate(self.masks) if mj & ~mi == 0]
            for mi in self.masks
        ]

    def value(self, i, j):
        try:
            return self.values[(i, j)]
        except KeyError:
            raise IncompleteModelError(
                f"no probability entry for ({self.labels[i]!r}, {self.labels[j]!r})"
            ) from None

    def err(self, i, j):
        return self.errs.get((i, j), 0.0)


def check_statistical_axioms(cp: ConditionalProbability, eps=1e-9, z=5.0,
                             axioms=STATISTICAL_AXIOMS) -> list[AxiomReport]:
    """Check S2.1-S2.3 plus the derived unit/zero and finite-additivity facts."""
    view = _TableView(cp)
    labels, masks = view.labels, view.masks
    n = len(labels)
    reports = []

    if "S2.1" in axioms:
        witnesses, worst = [], 0.0
        for i in range(n):
            for j in range(i + 1, n):
                if masks[i] & masks[j]:
                    continue
                union = masks[i] | masks[j]
                k = view.mask_index.get(union)
                if k is None or union == 0:
                    continue
                diff = abs(view.value(k, i) + view.value(k, j) - 1)
                worst = max(worst, float(diff))
                if diff > _tol(eps, z, view.err(k, i), view.err(k, j)):
                    witnesses.append(tuple(sorted((labels[i], labels[j]))))
        witnesses.sort()
        reports.append(AxiomReport("S2.1", not witnesses, tuple(witnesses), worst))

    if "S2.2" in axioms:
        witnesses, worst = [], 0.0
        for i in range(n):
            if masks[i] == 0:
                continue
            for j in view.subsets[i]:
                if masks[j] == 0:
                    continue
                v_ij = view.value(i, j)
                e_ij = view.err(i, j)
                for k in view.subsets[j]:
                    v_jk = view.value(j, k)
                    diff = abs(view.value(i, k) - v_ij * v_jk)
                    worst = max(worst, float(diff))
                    tol = _tol(eps, z, view.err(i, k),
                               float(v_jk) * e_ij, float(v_ij) * view.err(j, k))
                    if diff > tol:
                        witnesses.append((labels[i], labels[j], labels[k]))
        witnesses.sort()
        reports.append(AxiomReport("S2.2", not witnesses, tuple(witnesses), worst))

    if "S2.3" in axioms:
        witnesses = []
        for i in range(n):
            if masks[i] == 0:
                continue
            for j in view.subsets[i]:
                if masks[j] != 0 and view.value(i, j) == 0:
                    witnesses.append((labels[i], labels[j]))
        witnesses.sort()
        reports.append(AxiomReport("S2.3", not witnesses, tuple(witnesses)))

    if "S2.derived" in axioms:
        witnesses, worst = [], 0.0
        empty = view.mask_index.get(0)
        for i in range(n):
            if masks[i] == 0:
                continue
            diff = abs(view.value(i, i) - 1)
            worst = max(worst, float(diff))
            if diff > _tol(eps, z, view.err(i, i)):
                witnesses.append((labels[i], labels[i]))
            if empty is not None:
                diff = abs(view.value(i, empty))
                worst = max(worst, float(diff))
                if diff > _tol(eps, z, view.err(i, empty)):
                    witnesses.append((labels[i], labels[empty]))
        witnesses.sort()
        reports.append(AxiomReport("S2.derived", not witnesses, tuple(witnesses), worst))

    if "S2.additivity" in axioms:
        witnesses, worst = [], 0.0
        for i in range(n):
            if masks[i] == 0:
                continue
            subs = view.subsets[i]
            for x in range(len(subs)):
                j = subs[x]
                if masks[j] == 0:
                    continue
                for y in range(x + 1, len(subs)):
                    k = subs[y]
                    if masks[k] == 0 or masks[j] & masks[k]:
                        continue
                    u = view.mask_index.get(masks[j] | masks[k])
                    if u is None:
                        continue
                    diff = abs(view.value(i, u) - view.value(i, j) - view.value(i, k))
                    worst = max(worst, float(diff))
                    tol = _tol(eps, z, view.err(i, u), view.err(i, j), view.err(i, k))
                    if diff > tol:
                        witnesses.append(
                            (labels[i],) + tuple(sorted((labels[j], labels[k])))
                        )
        witnesses.sort()
        reports.append(
            AxiomReport("S2.additivity", not witnesses, tuple(witnesses), worst)
        )

    return reports


@dataclass(frozen=True)
class RingMeasure:
    """Additive measure mu(b) = lambda(a, b) on the ring below a."""

    base: str
    measure: dict
    report: AxiomReport


def measure_on_ring(cp: ConditionalProbability, a: str, eps=1e-9, z=5.0) -> RingMeasure:
    """Measure on S(a) plus verification of lambda(a1, a2) = mu(a2)/mu(a1)."""
    model = cp.model
    amask = model.mask(a)
    below = [(lab, m) for lab, m in model.items() if m & ~amask == 0]
    measure = {lab: cp.value(a, lab) for lab, _ in below}
    witnesses, worst = [], 0.0
    note = ""
    for l1, m1 in below:
        if m1 == 0:
            continue
        for l2, m2 in below:
            if m2 & ~m1:
                continue
            mu1, mu2 = measure[l1], measure[l2]
            if mu1 == 0:
                witnesses.append((l1,))
                note = "zero measure on a nonempty subset contradicts S2.3"
                continue
            diff = abs(cp.value(l1, l2) - mu2 / mu1)
            worst = max(worst, float(diff))
            if diff > _tol(eps, z, cp.stderr(l1, l2), cp.stderr(a, l1), cp.stderr(a, l2)):
                witnesses.append((l1, l2))
    witnesses = tuple(sorted(set(witnesses)))
    return RingMeasure(a, measure, AxiomReport("ring-measure", not witnesses, witnesses, worst, note))


@dataclass(frozen=True)
class Decomposition:
    """Weights of a disjoint decomposition, with the sum-to-one report."""

    whole: str
    parts: tuple
    weights: tuple
    report: AxiomReport


def decomposition_weights(cp: ConditionalProbability, a: str, parts, eps=1e-9, z=5.0) -> Decomposition:
    """Mixture weights lambda(a, b_i) of a disjoint partition of a."""
    model = cp.model
    amask = model.mask(a)
    parts = tuple(parts)
    seen = 0
    for p in parts:
        pm = model.mask(p)
        if pm & ~amask:
            raise StructuralError(f"part {p!r} is not contained in {a!r}")
        if pm & seen:
            raise StructuralError(f"part {p!r} overlaps an earlier part")
        seen |= pm
    if seen != amask:
        raise StructuralError(f"parts do not cover {a!r}")
    weights = tuple(cp.value(a, p) for p in parts)
    diff = abs(sum(weights) - 1)
    tol = _tol(eps, z, *(cp.stderr(a, p) for p in parts))
    report = AxiomReport("decomposition", diff <= tol,
                         () if diff <= tol else ((a,) + parts,), float(diff))
    return Decomposition(a, parts, weights, report)


# ---------------------------------------------------------------------------
# Experiments: preparations, registrations, methods, and the combined family
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Experiment:
    preparations: FiniteModel      # Q
    registrations: FiniteModel     # R
    methods: FiniteModel           # R0
    combined: FiniteModel          # family generated by all a intersect b
    lambda_q: ConditionalProbability
    lambda_r0: ConditionalProbability
    lambda_s: ConditionalProbability

    def __post_init__(self):
        ground = self.preparations.elements
        for fam in (self.registrations, self.methods, self.combined):
            if fam.elements != ground:
                raise StructuralError("experiment families live on different ground sets")
        if self.lambda_q.model is not self.preparations:
            raise StructuralError("lambda_q is not a table on the preparations")
        if self.lambda_r0.model is not self.methods:
            raise StructuralError("lambda_r0 is not a table on the methods")
        if self.lambda_s.model is not self.combined:
            raise StructuralError("lambda_s is not a table on the combined family")

    @property
    def ground(self):
        return self.preparations.elements


def _set_label(elements, mask, taken):
    members = [e for i, e in enumerate(elements) if mask >> i & 1]
    if len(members) <= 4:
        label = "{" + ",".join(sorted(members)) + "}"
        if label not in taken:
            return label
    i = 0
    while f"s{i}" in taken:
        i += 1
    return f"s{i}"


def generate_combined(elements, preparations: FiniteModel, registration_models,
                      cap=MAX_FAMILY) -> FiniteModel:
    """Closure of {a intersect b} under intersections and nested differences.

    The empty set enters only through the generators themselves; the closure
    steps never synthesize it. Aborts past the family cap.
    """
    generators = set()
    prep_masks = [m for _, m in preparations.items()]
    reg_masks = []
    for model in registration_models:
        reg_masks.extend(m for _, m in model.items())
    for q in prep_masks:
        for r in reg_masks:
            generators.add(q & r)
    current = set(generators)
    frontier = sorted(current)
    while frontier:
        snapshot = sorted(current)
        new = set()
        for x in frontier:
            for y in snapshot:
                inter = x & y
                if inter and inter not in current:
                    new.add(inter)
                if x != y:
                    if x & ~y == 0:
                        d = y & ~x
                        if d and d not in current:
                            new.add(d)
                    elif y & ~x == 0:
                        d = x & ~y
                        if d and d not in current:
                            new.add(d)
        if len(current) + len(new) > cap:
            raise StructuralError(f"combined family exceeds cap of {cap} subsets")
        current |= new
        frontier = sorted(new)
    ordered = sorted(current, key=lambda m: (bin(m).count("1"), m))
    masks = {}
    for m in ordered:
        masks[_set_label(elements, m, masks)] = m
    return FiniteModel.from_masks(elements, masks)


def experiment_from_atoms(atoms, preparations, methods, outcomes,
                          registrations=None, attach_trials=False) -> Experiment:
    """Experiment over weighted atoms; every lambda table follows from the weights.

    atoms maps atom label -> positive weight (int/Fraction for exact tables).
    preparations/methods/outcomes map label -> atom list. The registration
    family defaults to methods plus outcomes (an outcome whose extension
    equals a method's collapses into the method); an explicit label list
    restricts it, which permits structurally mutated models.
    """
    elements = tuple(atoms)
    index = {e: i for i, e in enumerate(elements)}
    prep_model = FiniteModel(elements, preparations)
    method_model = FiniteModel(elements, methods)
    reg_family = {}
    seen_masks = {}
    for label, members in list(methods.items()) + list(outcomes.items()):
        mask = 0
        for m in members:
            if m not in index:
                raise StructuralError(f"{label!r} references unknown atom {m!r}")
            mask |= 1 << index[m]
        if mask in seen_masks:
            continue
        seen_masks[mask] = label
        reg_family[label] = mask
    if registrations is not None:
        missing = [lab for lab in registrations if lab not in reg_family]
        if missing:
            raise StructuralError(f"unknown registration labels: {missing}")
        reg_family = {lab: reg_family[lab] for lab in registrations}
    reg_model = FiniteModel.from_masks(elements, reg_family)
    combined = generate_combined(elements, prep_model, (reg_model, method_model))
    return Experiment(
        preparations=prep_model,
        registrations=reg_model,
        methods=method_model,
        combined=combined,
        lambda_q=table_from_weights(prep_model, atoms, attach_trials),
        lambda_r0=table_from_weights(method_model, atoms, attach_trials),
        lambda_s=table_from_weights(combined, atoms, attach_trials),
    )


def _aggregate(axiom, sub_reports):
    witnesses = []
    worst = 0.0
    failing = []
    for sub in sub_reports:
        worst = max(worst, sub.residual)
        if not sub.passed:
            failing.append(sub.axiom)
            witnesses.extend((sub.axiom,) + w for w in sub.witnesses)
    note = f"failing: {', '.join(failing)}" if failing else ""
    return AxiomReport(axiom, not failing, tuple(witnesses), worst, note)


def check_experiment_axioms(exp: Experiment, eps=1e-9, z=5.0) -> list[AxiomReport]:
    """Verify A1-A6; set-theoretic parts exactly, numeric parts within tolerance.

    Empty methods are skipped wherever a method conditions a probability,
    matching the nonempty-apparatus convention of effect processes.
    """
    reports = [
        _aggregate("A1", check_selection_axioms(exp.preparations)
                   + check_statistical_axioms(exp.lambda_q, eps, z)),
        _aggregate("A2", check_selection_axioms(exp.registrations)),
        _aggregate("A3", check_selection_axioms(exp.methods)
                   + check_statistical_axioms(exp.lambda_r0, eps, z)),
    ]

    reg, methods, prep, combined = (
        exp.registrations, exp.methods, exp.preparations, exp.combined)

    witnesses = tuple(sorted(
        (lab,) for lab, mask in methods.items() if not reg.has_extension(mask)))
    reports.append(AxiomReport("A4.1", not witnesses, witnesses))

    method_masks = [(lab, m) for lab, m in methods.items() if m != 0]
    witnesses = []
    for b, bm in reg.items():
        if methods.has_extension(bm):
            continue
        for b0, b0m in method_masks:
            if b0m & ~bm == 0:
                witnesses.append((b, b0))
    reports.append(AxiomReport("A4.2", not witnesses, tuple(sorted(witnesses))))

    witnesses = []
    for b, bm in reg.items():
        if not any(bm & ~b0m == 0 for _, b0m in methods.items()):
            witnesses.append((b,))
    reports.append(AxiomReport("A4.3", not witnesses, tuple(sorted(witnesses))))

    reports.append(_aggregate("A5", check_selection_axioms(exp.combined)
                              + check_statistical_axioms(exp.lambda_s, eps, z)))

    lam_q, lam_r0, lam_s = exp.lambda_q, exp.lambda_r0, exp.lambda_s
    witnesses, worst = [], 0.0
    for a, am in prep.items():
        if am == 0:
            continue
        for a2, a2m in prep.items():
            if a2m & ~am:
                continue
            for b0, b0m in method_masks:
                x = am & b0m
                if x == 0:
                    continue
                xl, yl = combined.label_of(x), combined.label_of(a2m & b0m)
                if xl is None or yl is None:
                    raise IncompleteModelError(
                        f"combined family lacks {a!r}/{a2!r} cut down to {b0!r}")
                diff = abs(lam_s.value(xl, yl) - lam_q.value(a, a2))
                worst = max(worst, float(diff))
                if diff > _tol(eps, z, lam_s.stderr(xl, yl), lam_q.stderr(a, a2)):
                    witnesses.append((a, a2, b0))
    reports.append(AxiomReport("A6.1", not witnesses, tuple(sorted(witnesses)), worst))

    witnesses, worst = [], 0.0
    for a, am in prep.items():
        if am == 0:
            continue
        for b0, b0m in method_masks:
            x = am & b0m
            if x == 0:
                continue
            for b02, b02m in method_masks:
                if b02m & ~b0m:
                    continue
                xl, yl = combined.label_of(x), combined.label_of(am & b02m)
                if xl is None or yl is None:
                    raise IncompleteModelError(
                        f"combined family lacks {a!r} cut down to {b0!r}/{b02!r}")
                diff = abs(lam_s.value(xl, yl) - lam_r0.value(b0, b02))
                worst = max(worst, float(diff))
                if diff > _tol(eps, z, lam_s.stderr(xl, yl), lam_r0.stderr(b0, b02)):
                    witnesses.append((a, b0, b02))
    reports.append(AxiomReport("A6.2", not witnesses, tuple(sorted(witnesses)), worst))

    return reports


# ---------------------------------------------------------------------------
# Trigger table, quotient, and the properties of the quotient function
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class TriggerTable:
    """mu(a, g) over preparations x effect processes g = (method, response)."""

    preparations: tuple
    processes: tuple
    values: tuple            # row-major, one tuple per preparation
    stderrs: tuple = None    # same shape, or None for exact tables
    prep_extensions: tuple = None

    def row(self, i):
        return self.values[i]

    def column(self, j):
        return tuple(row[j] for row in self.values)


def effect_processes(exp: Experiment) -> tuple:
    """All pairs (b0, b) with b0 a nonempty method and b a registration under it."""
    pairs = []
    for b0, b0m in exp.methods.items():
        if b0m == 0:
            continue
        for b, bm in exp.registrations.items():
            if bm & ~b0m == 0:
                pairs.append((b0, b))
    return tuple(pairs)


def trigger_table(exp: Experiment) -> TriggerTable:
    """mu(a, (b0, b)) = lambda_S(a cut b0, a cut b) for the whole grid."""
    processes = effect_processes(exp)
    combined, lam_s = exp.combined, exp.lambda_s
    rows, err_rows, extents = [], [], []
    any_err = False
    for a, am in exp.preparations.items():
        row, errs = [], []
        for b0, b in processes:
            x = am & exp.methods.mask(b0)
            if x == 0:
                raise IncompleteModelError(
                    f"preparation {a!r} never reaches apparatus {b0!r}")
            y = am & exp.registrations.mask(b)
            xl, yl = combined.label_of(x), combined.label_of(y)
            if xl is None or yl is None:
                raise IncompleteModelError(
                    f"combined family lacks the cut of {a!r} by ({b0!r}, {b!r})")
            row.append(lam_s.value(xl, yl))
            se = lam_s.stderr(xl, yl)
            errs.append(se)
            any_err = any_err or se > 0
        rows.append(tuple(row))
        err_rows.append(tuple(errs))
        extents.append(exp.preparations.extension(a))
    return TriggerTable(
        preparations=exp.preparations.labels,
        processes=processes,
        values=tuple(rows),
        stderrs=tuple(err_rows) if any_err else None,
        prep_extensions=tuple(extents),
    )


@dataclass(frozen=True)
class Ensemble:
    index: int
    members: tuple
    row: tuple
    incompatible_pairs: tuple = ()


@dataclass(frozen=True)
class EffectClass:
    index: int
    members: tuple
    column: tuple


@dataclass(frozen=True, eq=False)
class QuotientResult:
    ensembles: tuple
    effect_classes: tuple
    matrix: tuple            # len(ensembles) x len(effect_classes)
    matrix_stderrs: tuple    # same shape or None
    max_spread: float        # largest intra-class deviation seen


def _merge(vectors, stderr_vectors, eps_eq, z):
    n = len(vectors)
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    def close(i, j):
        vi, vj = vectors[i], vectors[j]
        for k in range(len(vi)):
            tol = eps_eq
            if stderr_vectors is not None:
                tol = _tol(eps_eq, z, stderr_vectors[i][k], stderr_vectors[j][k])
            if abs(vi[k] - vj[k]) > tol:
                return False
        return True

    for i in range(n):
        for j in range(i + 1, n):
            if find(i) != find(j) and close(i, j):
                parent[find(j)] = find(i)
    groups = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(i)
    ordered = sorted(groups.values(), key=lambda g: g[0])
    spread = 0.0
    for group in ordered:
        for a in group:
            for b in group:
                if a < b:
                    for x, y in zip(vectors[a], vectors[b]):
                        spread = max(spread, float(abs(x - y)))
    return ordered, spread


def quotient(table: TriggerTable, eps_eq=1e-9, z=5.0) -> QuotientResult:
    """Partition preparations and effect processes by equality of mu rows/columns.

    Equality is transitive closure of per-entry closeness within
    max(eps_eq, z * combined stderr); on exact tables this is exact equality.
    """
    rows = table.values
    cols = [table.column(j) for j in range(len(table.processes))]
    row_errs = table.stderrs
    col_errs = None
    if row_errs is not None:
        col_errs = [tuple(row_errs[i][j] for i in range(len(rows)))
                    for j in range(len(cols))]
    row_groups, row_spread = _merge(rows, row_errs, eps_eq, z)
    col_groups, col_spread = _merge(cols, col_errs, eps_eq, z)

    extents = table.prep_extensions
    ensembles = []
    for idx, group in enumerate(row_groups):
        members = tuple(table.preparations[i] for i in group)
        incompatible = ()
        if extents is not None:
            incompatible = tuple(
                (table.preparations[a], table.preparations[b])
                for x, a in enumerate(group) for b in group[x + 1:]
                if not (extents[a] & extents[b])
            )
        rep = group[0]
        row = tuple(rows[rep][g[0]] for g in col_groups)
        ensembles.append(Ensemble(idx, members, row, incompatible))

    effect_classes = tuple(
        EffectClass(idx, tuple(table.processes[j] for j in group),
                    tuple(cols[group[0]][rg[0]] for rg in row_groups))
        for idx, group in enumerate(col_groups)
    )
    matrix = tuple(e.row for e in ensembles)
    matrix_errs = None
    if row_errs is not None:
        matrix_errs = tuple(
            tuple(row_errs[rg[0]][cg[0]] for cg in col_groups) for rg in row_groups
        )
    return QuotientResult(tuple(ensembles), effect_classes, matrix, matrix_errs,
                          max(row_spread, col_spread))


def mu_properties_check(result: QuotientResult, eps_eq=1e-9, z=5.0) -> list[AxiomReport]:
    """Re-assert the five properties of the quotient probability function.

    All-zero and all-one columns are reported present or absent; absence is
    informational, not a failure, since those effects exist only when some
    effect process realizes them.
    """
    matrix = result.matrix
    errs = result.matrix_stderrs
    reports = []

    worst = 0.0
    for row in matrix:
        for v in row:
            worst = max(worst, float(max(0 - v, v - 1, 0)))
    reports.append(AxiomReport("mu.range", worst == 0.0, (), worst))

    def separated(vectors, vec_errs, names, axiom):
        witnesses = []
        for i in range(len(vectors)):
            for j in range(i + 1, len(vectors)):
                distinct = False
                for k in range(len(vectors[i])):
                    tol = eps_eq if vec_errs is None else _tol(
                        eps_eq, z, vec_errs[i][k], vec_errs[j][k])
                    if abs(vectors[i][k] - vectors[j][k]) > tol:
                        distinct = True
                        break
                if not distinct:
                    witnesses.append((names[i], names[j]))
        return AxiomReport(axiom, not witnesses, tuple(witnesses))

    row_names = [f"K{e.index}" for e in result.ensembles]
    col_names = [f"L{c.index}" for c in result.effect_classes]
    cols = [tuple(row[j] for row in matrix) for j in range(len(col_names))]
    col_errs = None
    if errs is not None:
        col_errs = [tuple(errs[i][j] for i in range(len(matrix)))
                    for j in range(len(col_names))]
    reports.append(separated(matrix, errs, row_names, "mu.rows-separated"))
    reports.append(separated(cols, col_errs, col_names, "mu.cols-separated"))

    zero_hits = [c.index for j, c in enumerate(result.effect_classes)
                 if all(abs(v) <= eps_eq for v in cols[j])]
    unit_hits = [c.index for j, c in enumerate(result.effect_classes)
                 if all(abs(v - 1) <= eps_eq for v in cols[j])]
    reports.append(AxiomReport(
        "mu.zero-effect", len(zero_hits) <= 1,
        tuple((f"L{i}",) for i in zero_hits) if len(zero_hits) > 1 else (),
        note=(f"realized by L{zero_hits[0]}" if len(zero_hits) == 1 else
              "not realized" if not zero_hits else "multiple all-zero classes")))
    reports.append(AxiomReport(
        "mu.unit-effect", len(unit_hits) <= 1,
        tuple((f"L{i}",) for i in unit_hits) if len(unit_hits) > 1 else (),
        note=(f"realized by L{unit_hits[0]}" if len(unit_hits) == 1 else
              "not realized" if not unit_hits else "multiple all-one classes")))
    return reports


def mixture_transfer_check(exp: Experiment, whole: str, parts, eps=1e-9, z=5.0,
                           table: TriggerTable = None) -> AxiomReport:
    """Row of the whole equals the lambda_Q-weighted sum of the part rows."""
    if table is None:
        table = trigger_table(exp)
    parts = tuple(parts)
    amask = exp.preparations.mask(whole)
    seen = 0
    for p in parts:
        pm = exp.preparations.mask(p)
        if pm & ~amask or pm & seen:
            raise StructuralError(f"parts are not a disjoint decomposition of {whole!r}")
        seen |= pm
    if seen != amask:
        raise StructuralError(f"parts do not cover {whole!r}")
    pos = {lab: i for i, lab in enumerate(table.preparations)}
    weights = [exp.lambda_q.value(whole, p) for p in parts]
    w_errs = [exp.lambda_q.stderr(whole, p) for p in parts]
    target = table.values[pos[whole]]
    part_rows = [table.values[pos[p]] for p in parts]
    witnesses, worst = [], 0.0
    for j, g in enumerate(table.processes):
        combo = sum(w * r[j] for w, r in zip(weights, part_rows))
        diff = abs(target[j] - combo)
        worst = max(worst, float(diff))
        terms = []
        if table.stderrs is not None:
            terms.append(table.stderrs[pos[whole]][j])
            terms.extend(float(w) * table.stderrs[pos[p]][j]
                         for w, p in zip(weights, parts))
        terms.extend(float(part_rows[i][j]) * w_errs[i] for i in range(len(parts)))
        if diff > _tol(eps, z, *terms):
            witnesses.append(g)
    return AxiomReport("mixture-transfer", not witnesses, tuple(witnesses), worst)


# ---------------------------------------------------------------------------
# Empirical experiments from run records
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RunSchema:
    """Declared structure for a run list.

    preparations lists the atomic labels runs may carry; unions declares
    coarser preparations as unions of atomic ones. methods maps each
    registration method to its outcome labels (an outcome belongs to exactly
    one method); method_unions declares coarser methods.
    """

    preparations: tuple
    methods: dict
    unions: dict = None
    method_unions: dict = None

    def outcome_method(self):
        mapping = {}
        for method, outs in self.methods.items():
            for o in outs:
                if o in mapping:
                    raise StructuralError(f"outcome {o!r} declared under two methods")
                mapping[o] = method
        return mapping


@dataclass(frozen=True)
class RunTally:
    total: int
    per_preparation: dict
    per_cell: dict
    undefined: tuple


def frequencies_from_runs(runs, schema: RunSchema):
    """Empirical experiment from (preparation, outcome) run records.

    Runs collapse into count cells per (preparation, outcome) pair; the cells
    are the ground set and the integer counts the atom weights, so all
    empirical tables are exact count ratios with binomial standard errors
    attached. Preparations or outcomes with zero runs disappear from the
    family and are recorded as undefined.
    """
    outcome_method = schema.outcome_method()
    counts = Counter()
    per_prep = Counter({p: 0 for p in schema.preparations})
    for prep, outcome in runs:
        if prep not in per_prep:
            raise StructuralError(f"run references undeclared preparation {prep!r}")
        if outcome not in outcome_method:
            raise StructuralError(f"run references undeclared outcome {outcome!r}")
        counts[(prep, outcome)] += 1
        per_prep[prep] += 1

    atoms = {}
    for (prep, outcome), n in sorted(counts.items()):
        atoms[f"{prep}|{outcome}"] = n
    elements = tuple(atoms)
    undefined = []

    def cells(pred):
        return [c for c in elements if pred(*c.split("|", 1))]

    preparations = {}
    for p in schema.preparations:
        members = cells(lambda prep, _o, p=p: prep == p)
        if members:
            preparations[p] = members
        else:
            undefined.append(p)
    for label, children in (schema.unions or {}).items():
        members = sorted({c for ch in children for c in preparations.get(ch, ())})
        if members and not any(set(members) == set(v) for v in preparations.values()):
            preparations[label] = members
        else:
            undefined.append(label)

    methods = {}
    for m, outs in schema.methods.items():
        members = cells(lambda _p, o, outs=tuple(outs): o in outs)
        if members:
            methods[m] = members
        else:
            undefined.append(m)
    for label, children in (schema.method_unions or {}).items():
        members = sorted({c for ch in children for c in methods.get(ch, ())})
        if members and not any(set(members) == set(v) for v in methods.values()):
            methods[label] = members
        else:
            undefined.append(label)

    outcomes = {}
    for o in outcome_method:
        members = cells(lambda _p, out, o=o: out == o)
        if members:
            outcomes[o] = members
        else:
            undefined.append(o)

    exp = experiment_from_atoms(atoms, preparations, methods, outcomes,
                                attach_trials=True)
    tally = RunTally(
        total=sum(counts.values()),
        per_preparation=dict(per_prep),
        per_cell=dict(counts),
        undefined=tuple(undefined),
    )
    return exp, tally
