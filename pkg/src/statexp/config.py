"""Central tolerance defaults, overridable per scenario or per call."""

from dataclasses import dataclass, fields, replace

from .errors import StructuralError


@dataclass(frozen=True)
class Tolerances:
    eps_ax: float = 1e-9            # analytic axiom equalities
    eps_eq: float = 1e-9            # equivalence-class equality of probability rows/columns
    z: float = 5.0                  # sigma multiplier for empirical tables
    tau_h: float = 1e-10            # hermiticity defect
    tau_p: float = 1e-10            # negative-eigenvalue slack (clipped below this)
    tau_t: float = 1e-10            # trace-normalization slack
    atol_povm: float = 1e-10        # sum of effects vs identity
    atol_instrument: float = 1e-10  # total Kraus normalization
    atol_cp: float = 1e-9           # Choi minimum eigenvalue
    trace_drift: float = 1e-9       # trajectory trace tolerance
    trajectory_min_eig: float = 1e-7
    truncation_tail: float = 1e-8   # top-occupancy population of Gibbs-form states

    def with_overrides(self, overrides) -> "Tolerances":
        known = {f.name for f in fields(self)}
        bad = set(overrides) - known
        if bad:
            raise StructuralError(f"unknown tolerance keys: {sorted(bad)}")
        return replace(self, **{k: float(v) for k, v in overrides.items()})


DEFAULT = Tolerances()
