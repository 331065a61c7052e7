"""Finite families of labeled subsets and the closure axioms they must satisfy.

A model is a finite ground set M together with a family of labeled subsets.
Subsets are extensional: two labels may not denote the same set, and all
comparisons go by extension. Internally each subset is a bitmask over the
element order, so intersections, relative complements and inclusion tests are
single integer operations.

The two closure axioms checked here:
  S1.1  a, b in family, a proper subset of b  =>  b \\ a in family
  S1.2  a, b in family, a cap b nonempty      =>  a cap b in family
Checks never require the empty set to be present (it is allowed but never
synthesized), so S1.1 skips a = b and S1.2 skips disjoint pairs.
"""

from dataclasses import dataclass

from .errors import StructuralError, UnknownLabelError

MAX_ELEMENTS = 1 << 16
MAX_FAMILY = 1 << 20

SELECTION_AXIOMS = ("S1.1", "S1.2")


@dataclass(frozen=True)
class AxiomReport:
    """Outcome of a single axiom check.

    witnesses holds label tuples that reproducibly violate the axiom; it is
    empty exactly when the check passed. residual is the largest numeric
    deviation seen (0.0 for purely set-theoretic axioms).
    """

    axiom: str
    passed: bool
    witnesses: tuple = ()
    residual: float = 0.0
    note: str = ""


class FiniteModel:
    """Immutable ground set plus labeled subset family."""

    def __init__(self, elements, family):
        elements = tuple(elements)
        if len(elements) > MAX_ELEMENTS:
            raise StructuralError(f"ground set exceeds cap of {MAX_ELEMENTS} elements")
        if len(set(elements)) != len(elements):
            raise StructuralError("duplicate element labels in ground set")
        index = {e: i for i, e in enumerate(elements)}
        items = family.items() if hasattr(family, "items") else family
        masks: dict[str, int] = {}
        by_mask: dict[int, str] = {}
        for label, members in items:
            if not isinstance(label, str):
                raise StructuralError(f"subset label {label!r} is not a string")
            if label in masks:
                raise StructuralError(f"duplicate subset label {label!r}")
            mask = 0
            for m in members:
                if m not in index:
                    raise StructuralError(
                        f"subset {label!r} contains {m!r}, which is outside the ground set"
                    )
                mask |= 1 << index[m]
            if mask in by_mask:
                raise StructuralError(
                    f"subsets {by_mask[mask]!r} and {label!r} have the same extension"
                )
            masks[label] = mask
            by_mask[mask] = label
        if len(masks) > MAX_FAMILY:
            raise StructuralError(f"family exceeds cap of {MAX_FAMILY} subsets")
        self.elements = elements
        self.labels = tuple(masks)
        self._index = index
        self._masks = masks
        self._by_mask = by_mask

    @classmethod
    def from_masks(cls, elements, masks):
        """Build directly from a label -> bitmask mapping (trusted path)."""
        model = cls.__new__(cls)
        elements = tuple(elements)
        by_mask = {}
        for label, mask in masks.items():
            if mask in by_mask:
                raise StructuralError(
                    f"subsets {by_mask[mask]!r} and {label!r} have the same extension"
                )
            by_mask[mask] = label
        model.elements = elements
        model.labels = tuple(masks)
        model._index = {e: i for i, e in enumerate(elements)}
        model._masks = dict(masks)
        model._by_mask = by_mask
        return model

    def __contains__(self, label):
        return label in self._masks

    def __len__(self):
        return len(self._masks)

    def mask(self, label) -> int:
        try:
            return self._masks[label]
        except KeyError:
            raise UnknownLabelError(f"no subset labeled {label!r}") from None

    def has_extension(self, mask) -> bool:
        return mask in self._by_mask

    def label_of(self, mask):
        return self._by_mask.get(mask)

    def members(self, label) -> tuple:
        mask = self.mask(label)
        return tuple(e for i, e in enumerate(self.elements) if mask >> i & 1)

    def extension(self, label) -> frozenset:
        return frozenset(self.members(label))

    def items(self):
        return self._masks.items()

    def element_mask(self) -> int:
        return (1 << len(self.elements)) - 1


def is_finer(model: FiniteModel, a: str, b: str) -> bool:
    """True iff subset a is contained in subset b (a is the finer selection)."""
    ma, mb = model.mask(a), model.mask(b)
    return ma & ~mb == 0


def check_selection_axioms(model: FiniteModel, axioms=SELECTION_AXIOMS) -> list[AxiomReport]:
    """Check the closure axioms; each axiom is checked independently.

    The empty set is never required: S1.1 skips a = b and S1.2 skips pairs
    whose intersection is empty.
    """
    items = list(model.items())
    reports = []
    if "S1.1" in axioms:
        witnesses = []
        for la, ma in items:
            for lb, mb in items:
                if ma != mb and ma & ~mb == 0 and not model.has_extension(mb & ~ma):
                    witnesses.append((la, lb))
        witnesses.sort()
        reports.append(AxiomReport("S1.1", not witnesses, tuple(witnesses)))
    if "S1.2" in axioms:
        witnesses = []
        for i, (la, ma) in enumerate(items):
            for lb, mb in items[i + 1:]:
                inter = ma & mb
                if inter and not model.has_extension(inter):
                    witnesses.append(tuple(sorted((la, lb))))
        witnesses.sort()
        reports.append(AxiomReport("S1.2", not witnesses, tuple(witnesses)))
    return reports


@dataclass(frozen=True)
class RingClosure:
    """Sub-family below a fixed subset plus its ring-closure reports."""

    ring: FiniteModel
    reports: tuple


def boolean_ring(model: FiniteModel, a: str) -> RingClosure:
    """Return S(a) = { b in family : b subset of a } with closure verification.

    The three reports cover closure of S(a) under intersection, relative
    complement of arbitrary pairs, and union; for any model passing S1.1/S1.2
    all three close (empty results are exempt, as everywhere).
    """
    amask = model.mask(a)
    sub = {lab: m for lab, m in model.items() if m & ~amask == 0}
    ring = FiniteModel.from_masks(model.elements, sub)
    items = list(sub.items())

    def closed_under(op):
        witnesses = []
        for la, ma in items:
            for lb, mb in items:
                result = op(ma, mb)
                if result and not ring.has_extension(result):
                    witnesses.append((la, lb))
        return tuple(sorted(set(witnesses)))

    wit_cap = closed_under(lambda x, y: x & y)
    wit_diff = closed_under(lambda x, y: x & ~y)
    wit_cup = closed_under(lambda x, y: x | y)
    reports = (
        AxiomReport("ring.intersection", not wit_cap, wit_cap),
        AxiomReport("ring.difference", not wit_diff, wit_diff),
        AxiomReport("ring.union", not wit_cup, wit_cup),
    )
    return RingClosure(ring, reports)


def are_coexistent(model: FiniteModel, a: str, b: str):
    """Smallest family member containing both a and b, or None.

    Smallest by cardinality, ties broken by label order.
    """
    target = model.mask(a) | model.mask(b)
    best = None
    for label, mask in model.items():
        if target & ~mask == 0:
            key = (bin(mask).count("1"), label)
            if best is None or key < best[0]:
                best = (key, label)
    return None if best is None else best[1]
