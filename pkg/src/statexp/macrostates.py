"""Truncated bosonic Fock spaces, Gibbs-form reference states and entropy.

Space is discretized to modes, so integrals of field densities become finite
sums sum_j zeta_j A_j; the trace-class condition of the untruncated theory is
replaced by an explicit top-occupancy population report. The basis is ordered
by little-endian occupancy tuples (mode 0 varies fastest).
"""

import math
from dataclasses import dataclass

import numpy as np

from .config import DEFAULT
from .errors import StructuralError, ValidationError
from .hilbert import (
    DIM_CAP,
    DensityOperator,
    EffectOperator,
    as_complex_matrix,
    hermiticity_defect,
    spectral,
)


@dataclass(frozen=True)
class FockSpace:
    modes: int
    nmax: int
    dim: int

    def occupancy(self, index: int) -> tuple:
        base = self.nmax + 1
        return tuple((index // base ** m) % base for m in range(self.modes))

    def index(self, occupancy) -> int:
        occupancy = tuple(occupancy)
        if len(occupancy) != self.modes:
            raise StructuralError("occupancy tuple has the wrong number of modes")
        if any(n < 0 or n > self.nmax for n in occupancy):
            raise StructuralError("occupancy outside the truncation")
        base = self.nmax + 1
        return sum(n * base ** m for m, n in enumerate(occupancy))


@dataclass(frozen=True, eq=False)
class ModeOperators:
    """Ladder and number matrices per mode on the truncated space."""

    space: FockSpace
    annihilation: tuple
    creation: tuple
    number: tuple

    @property
    def total_number(self) -> np.ndarray:
        return sum(self.number)


def fock_build(modes: int, nmax: int, dim_cap=DIM_CAP):
    """Truncated Fock space plus its ladder operators.

    Single-mode matrix elements are the standard sqrt(n + 1); the commutator
    [a, a_dag] equals the identity except on the top occupancy level, where
    the truncation leaves -nmax on the diagonal. N = a_dag a holds exactly.
    """
    if modes < 1 or nmax < 1:
        raise StructuralError("need at least one mode and nmax >= 1")
    base = nmax + 1
    dim = base ** modes
    if dim > dim_cap:
        raise StructuralError(f"Fock dimension {dim} exceeds cap {dim_cap}")
    single = np.zeros((base, base), dtype=complex)
    for n in range(1, base):
        single[n - 1, n] = math.sqrt(n)
    lowering, raising, number = [], [], []
    for m in range(modes):
        left = np.eye(base ** (modes - 1 - m))
        right = np.eye(base ** m)
        a = np.kron(left, np.kron(single, right))
        lowering.append(a)
        raising.append(a.conj().T)
        number.append(a.conj().T @ a)
    space = FockSpace(modes, nmax, dim)
    return space, ModeOperators(space, tuple(lowering), tuple(raising), tuple(number))


def top_occupancy_population(w: DensityOperator, number_operator) -> float:
    """Population of the highest eigenspace of a number-like operator.

    Serves as the truncation-health surrogate for the trace-class condition:
    a trustworthy truncated Gibbs state leaves this population tiny.
    """
    dec = spectral(number_operator)
    top = dec.eigenvalues[0]
    cols = dec.vectors[:, np.abs(dec.eigenvalues - top) <= 1e-6 * max(1.0, abs(top))]
    return float(np.real(np.einsum("ij,ik,kj->", cols.conj(), w.matrix, cols)))


def _gibbs_from_exponent(exponent) -> DensityOperator:
    dec = spectral(exponent)
    shifted = np.exp(-(dec.eigenvalues - dec.eigenvalues.min()))
    w = (dec.vectors * shifted) @ dec.vectors.conj().T
    return DensityOperator(w / w.trace().real)


@dataclass(frozen=True, eq=False)
class GibbsState:
    """Equilibrium state with its construction diagnostics."""

    state: DensityOperator
    commutator_norm: float        # max-abs entry of [H, N]
    top_level_population: float


def grand_canonical(hamiltonian, number, beta: float, mu: float) -> GibbsState:
    """W = exp(-beta (H - mu N)) / Tr(...) via spectral calculus.

    The exponent spectrum is shifted before exponentiating, so large beta is
    safe. The formula is applied regardless of whether H and N commute; the
    commutator norm is reported so non-commuting inputs are visible.
    """
    if beta <= 0:
        raise StructuralError("beta must be positive")
    h = as_complex_matrix(hamiltonian)
    n = as_complex_matrix(number)
    if h.shape != n.shape:
        raise StructuralError("H and N dimensions differ")
    for name, m in (("H", h), ("N", n)):
        if hermiticity_defect(m) > DEFAULT.tau_h:
            raise ValidationError(f"{name} is not Hermitian")
    commutator = float(np.abs(h @ n - n @ h).max())
    state = _gibbs_from_exponent(beta * (h - mu * n))
    return GibbsState(state, commutator, top_occupancy_population(state, n))


@dataclass(frozen=True, eq=False)
class ReferenceMacrostate:
    """Gibbs-form state exp(-sum_j zeta_j A_j) / Tr for classical fields zeta."""

    observables: tuple
    zeta: tuple
    state: DensityOperator

    def exponent(self) -> np.ndarray:
        return sum(z * a for z, a in zip(self.zeta, self.observables))


def reference_state(observables, zeta) -> ReferenceMacrostate:
    """Build the reference macrostate for paired observables and fields.

    Specializing to observables (H, N) with zeta (beta, -beta*mu) reproduces
    the grand-canonical state; all-zero fields give the maximally mixed state.
    """
    observables = tuple(as_complex_matrix(a) for a in observables)
    zeta = tuple(float(z) for z in zeta)
    if len(observables) != len(zeta) or not observables:
        raise StructuralError("need one field coefficient per observable")
    dims = {a.shape[0] for a in observables}
    if len(dims) != 1:
        raise StructuralError("observables have mixed dimensions")
    for a in observables:
        if hermiticity_defect(a) > DEFAULT.tau_h:
            raise ValidationError("observables must be Hermitian")
    exponent = sum(z * a for z, a in zip(zeta, observables))
    return ReferenceMacrostate(observables, zeta, _gibbs_from_exponent(exponent))


def entropy(w: DensityOperator, k: float = 1.0) -> float:
    """-k Tr(W log W) with the 0 log 0 = 0 convention; in [0, k log dim]."""
    eigs = np.clip(np.linalg.eigvalsh(w.matrix), 0.0, 1.0)
    support = eigs[eigs > 0]
    return float(-k * np.sum(support * np.log(support)))


class MultiTypeState:
    """Tuple of positive blocks, one per microsystem type, with total trace one."""

    def __init__(self, components, atol_positive=DEFAULT.tau_p, atol_trace=DEFAULT.tau_t):
        mats = []
        total = 0.0
        for block in components:
            m = as_complex_matrix(block)
            if hermiticity_defect(m) > DEFAULT.tau_h:
                raise ValidationError("component block is not Hermitian")
            m = 0.5 * (m + m.conj().T)
            eigs = np.linalg.eigvalsh(m)
            if eigs.min() < -atol_positive:
                raise ValidationError(
                    f"component has negative eigenvalue {eigs.min():.3e}")
            if eigs.min() < 0:
                values, vectors = np.linalg.eigh(m)
                m = (vectors * np.clip(values, 0.0, None)) @ vectors.conj().T
            mats.append(m)
            total += float(m.trace().real)
        if abs(total - 1.0) > atol_trace:
            raise ValidationError(f"component traces sum to {total!r}, expected 1")
        self.components = tuple(m / total for m in mats)

    @property
    def dims(self) -> tuple:
        return tuple(m.shape[0] for m in self.components)

    def type_weights(self) -> tuple:
        return tuple(float(m.trace().real) for m in self.components)


def multitype_mu(state: MultiTypeState, effects) -> float:
    """Trigger probability sum_i Tr(W_i F_i) across types."""
    effects = tuple(effects)
    if len(effects) != len(state.components):
        raise StructuralError("need one effect per type")
    total = 0.0
    for block, effect in zip(state.components, effects):
        if effect.dim != block.shape[0]:
            raise StructuralError("effect dimension mismatch")
        total += float((block @ effect.matrix).trace().real)
    return min(max(total, 0.0), 1.0)


def registration_effect(dims, index: int) -> tuple:
    """Effect tuple (0, ..., 1_i, ..., 0) registering the i-th type."""
    return tuple(
        EffectOperator(np.eye(d) if i == index else np.zeros((d, d)))
        for i, d in enumerate(dims)
    )


def additive_observable(single_particle, ops: ModeOperators) -> np.ndarray:
    """Second-quantized lift sum_mn A_mn a_m^dag a_n of a one-particle operator.

    On states with one particle per listed mode the expectation is the sum of
    the diagonal single-particle matrix elements.
    """
    a = as_complex_matrix(single_particle)
    if hermiticity_defect(a) > DEFAULT.tau_h:
        raise ValidationError("single-particle operator must be Hermitian")
    if a.shape[0] != ops.space.modes:
        raise StructuralError(
            f"operator acts on {a.shape[0]} modes, space has {ops.space.modes}")
    lift = np.zeros((ops.space.dim, ops.space.dim), dtype=complex)
    for m in range(ops.space.modes):
        for n in range(ops.space.modes):
            if a[m, n] != 0:
                lift += a[m, n] * (ops.creation[m] @ ops.annihilation[n])
    return lift


# ---------------------------------------------------------------------------
# Liouville-von Neumann evolution of reference states
# ---------------------------------------------------------------------------

def _moments(observables, matrix) -> np.ndarray:
    return np.array([float((matrix @ a).trace().real) for a in observables])


def refit_fields(observables, zeta0, targets):
    """Fields whose Gibbs-form state matches the target expectations.

    Moment matching by least squares; returns (zeta, state matrix, converged).
    """
    from scipy.optimize import least_squares

    observables = tuple(observables)
    targets = np.asarray(targets, dtype=float)

    def gibbs(z):
        exponent = sum(zj * a for zj, a in zip(z, observables))
        values, vectors = np.linalg.eigh(0.5 * (exponent + exponent.conj().T))
        shifted = np.exp(-(values - values.min()))
        w = (vectors * shifted) @ vectors.conj().T
        return w / w.trace().real

    def residual(z):
        return _moments(observables, gibbs(z)) - targets

    result = least_squares(residual, np.asarray(zeta0, dtype=float), xtol=1e-12,
                           ftol=1e-12, gtol=1e-12, max_nfev=400)
    matched = gibbs(result.x)
    converged = bool(result.success) and float(
        np.abs(residual(result.x)).max()) < 1e-6
    return tuple(result.x), matched, converged


@dataclass(frozen=True, eq=False)
class LiouvilleTrajectory:
    times: tuple
    states: tuple
    expectations: np.ndarray        # len(times) x len(observables)
    refit_residuals: np.ndarray     # Frobenius distance to the refitted macrostate
    refit_converged: tuple


def liouville_evolve(ref: ReferenceMacrostate, hamiltonian, times,
                     refit: bool = True) -> LiouvilleTrajectory:
    """Unitary evolution of a reference state with expectation tracking.

    The refit residual at each time is the Frobenius distance between the
    evolved state and the Gibbs-form state matching its relevant
    expectations: growth of this residual is exactly the evolved state
    leaving the reference family.
    """
    h = as_complex_matrix(hamiltonian)
    dec = spectral(h)
    times = tuple(float(t) for t in times)
    states, rows, residuals, converged = [], [], [], []
    zeta_guess = ref.zeta
    for t in times:
        u = (dec.vectors * np.exp(-1j * dec.eigenvalues * t)) @ dec.vectors.conj().T
        wt = DensityOperator(u @ ref.state.matrix @ u.conj().T)
        states.append(wt)
        moments = _moments(ref.observables, wt.matrix)
        rows.append(moments)
        if refit:
            zeta_guess, matched, ok = refit_fields(ref.observables, zeta_guess, moments)
            residuals.append(float(np.linalg.norm(matched - wt.matrix)))
            converged.append(ok)
        else:
            residuals.append(float("nan"))
            converged.append(False)
    return LiouvilleTrajectory(times, tuple(states), np.array(rows),
                               np.array(residuals), tuple(converged))
