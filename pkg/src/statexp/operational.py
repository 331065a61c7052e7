"""Born rule, generalized observables, instruments, channels and dynamics.

Finite outcome sets stand in for the Borel sigma-algebra, so sigma-additivity
reduces to finite additivity. Operations are kept in Kraus form, which makes
complete positivity automatic and turns the Choi test into a consistency
check. All randomness flows through explicitly seeded PCG64 generators.
"""

import math
from dataclasses import dataclass

import numpy as np

from .config import DEFAULT
from .errors import (
    IntegrationError,
    StructuralError,
    UnknownLabelError,
    ValidationError,
)
from .hilbert import (
    DensityOperator,
    EffectOperator,
    as_complex_matrix,
    hermiticity_defect,
    spectral,
)


@dataclass(frozen=True, eq=False)
class Povm:
    """Finite-outcome positive operator-valued measure; effects sum to identity."""

    outcomes: tuple
    effects: tuple

    def __post_init__(self):
        if len(self.outcomes) != len(self.effects) or not self.outcomes:
            raise StructuralError("need one effect per outcome")
        if len(set(self.outcomes)) != len(self.outcomes):
            raise StructuralError("duplicate outcome labels")
        dims = {e.dim for e in self.effects}
        if len(dims) != 1:
            raise StructuralError("effects have mixed dimensions")
        total = sum(e.matrix for e in self.effects)
        residual = np.abs(total - np.eye(self.dim)).max()
        if residual > DEFAULT.atol_povm:
            raise ValidationError(
                f"effects sum to identity only within {residual:.3e}")

    @property
    def dim(self) -> int:
        return self.effects[0].dim

    def effect(self, outcome) -> EffectOperator:
        try:
            return self.effects[self.outcomes.index(outcome)]
        except ValueError:
            raise UnknownLabelError(f"no outcome {outcome!r}") from None


@dataclass(frozen=True, eq=False)
class Operation:
    """Trace-non-increasing completely positive map in Kraus form."""

    kraus: tuple

    def __post_init__(self):
        if not self.kraus:
            raise StructuralError("operation needs at least one Kraus operator")
        mats = tuple(as_complex_matrix(k) for k in self.kraus)
        object.__setattr__(self, "kraus", mats)
        dims = {k.shape[0] for k in mats}
        if len(dims) != 1:
            raise StructuralError("Kraus operators have mixed dimensions")
        top = np.linalg.eigvalsh(self.total_effect()).max()
        if top > 1.0 + DEFAULT.atol_instrument:
            raise ValidationError(f"operation is not contracting (max eig {top:.6f})")

    @property
    def dim(self) -> int:
        return self.kraus[0].shape[0]

    def total_effect(self) -> np.ndarray:
        return sum(k.conj().T @ k for k in self.kraus)

    def __call__(self, matrix) -> np.ndarray:
        return sum(k @ matrix @ k.conj().T for k in self.kraus)


@dataclass(frozen=True, eq=False)
class Instrument:
    """Outcome-indexed family of operations with trace-preserving total."""

    outcomes: tuple
    operations: tuple

    def __post_init__(self):
        if len(self.outcomes) != len(self.operations) or not self.outcomes:
            raise StructuralError("need one operation per outcome")
        if len(set(self.outcomes)) != len(self.outcomes):
            raise StructuralError("duplicate outcome labels")
        dims = {op.dim for op in self.operations}
        if len(dims) != 1:
            raise StructuralError("operations have mixed dimensions")
        total = sum(op.total_effect() for op in self.operations)
        residual = np.abs(total - np.eye(self.dim)).max()
        if residual > DEFAULT.atol_instrument:
            raise ValidationError(
                f"instrument total is trace-preserving only within {residual:.3e}")

    @property
    def dim(self) -> int:
        return self.operations[0].dim

    def operation(self, outcome) -> Operation:
        try:
            return self.operations[self.outcomes.index(outcome)]
        except ValueError:
            raise UnknownLabelError(f"no outcome {outcome!r}") from None


@dataclass(frozen=True, eq=False)
class LindbladModel:
    """Hamiltonian plus jump operators with nonnegative rates (hbar = 1)."""

    hamiltonian: np.ndarray
    jumps: tuple   # pairs (operator, rate)

    def __post_init__(self):
        h = as_complex_matrix(self.hamiltonian)
        if hermiticity_defect(h) > DEFAULT.tau_h:
            raise ValidationError("Hamiltonian is not Hermitian")
        object.__setattr__(self, "hamiltonian", h)
        jumps = []
        for op, rate in self.jumps:
            rate = float(rate)
            if rate < 0:
                raise StructuralError(f"negative jump rate {rate!r}")
            op = as_complex_matrix(op)
            if op.shape != h.shape:
                raise StructuralError("jump operator dimension mismatch")
            jumps.append((op, rate))
        object.__setattr__(self, "jumps", tuple(jumps))

    @property
    def dim(self) -> int:
        return self.hamiltonian.shape[0]


def _check_dims(w: DensityOperator, dim: int):
    if w.dim != dim:
        raise StructuralError(f"dimension mismatch: state {w.dim}, operator {dim}")


def born(w: DensityOperator, f: EffectOperator) -> float:
    """Trigger probability Tr(W F), clipped into [0, 1]."""
    _check_dims(w, f.dim)
    p = float((w.matrix @ f.matrix).trace().real)
    if p < -1e-12 or p > 1.0 + 1e-12:
        raise ValidationError(f"trace probability {p!r} outside [0, 1]")
    return min(max(p, 0.0), 1.0)


def povm_distribution(w: DensityOperator, povm: Povm) -> np.ndarray:
    """Outcome distribution of a measurement; sums to one by normalization."""
    probs = np.array([born(w, f) for f in povm.effects])
    if abs(probs.sum() - 1.0) > DEFAULT.atol_povm:
        raise ValidationError(f"distribution sums to {probs.sum()!r}")
    return probs


def sample_runs(w: DensityOperator, povm: Povm, n: int, seed: int) -> list:
    """n i.i.d. outcome labels; deterministic for a fixed seed (PCG64)."""
    if n < 0:
        raise StructuralError("negative sample count")
    probs = povm_distribution(w, povm)
    edges = np.cumsum(probs)
    edges[-1] = 1.0
    rng = np.random.default_rng(seed)
    draws = rng.random(n)
    idx = np.searchsorted(edges, draws, side="right")
    return [povm.outcomes[i] for i in idx]


def haar_unitary(dim: int, rng) -> np.ndarray:
    """Haar-distributed unitary via QR of a complex Ginibre matrix."""
    z = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    q, r = np.linalg.qr(z)
    phases = np.diag(r).copy()
    phases /= np.abs(phases)
    return q * phases


def random_density(dim: int, rng) -> DensityOperator:
    """Full-rank random state (normalized Wishart)."""
    g = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    w = g @ g.conj().T
    return DensityOperator(w / w.trace().real)


def random_kraus_channel(dim: int, n_ops: int, rng) -> Operation:
    """Random trace-preserving channel from a Haar isometry."""
    z = rng.normal(size=(dim * n_ops, dim)) + 1j * rng.normal(size=(dim * n_ops, dim))
    q, r = np.linalg.qr(z)
    phases = np.diag(r).copy()
    phases /= np.abs(phases)
    iso = q * phases
    kraus = [iso[i * dim:(i + 1) * dim, :] for i in range(n_ops)]
    return Operation(tuple(kraus))


def random_resolution(dim: int, rng) -> list:
    """Random orthogonal resolution of identity into 2..dim projectors."""
    u = haar_unitary(dim, rng)
    parts = int(rng.integers(2, dim + 1))
    cuts = sorted(rng.choice(np.arange(1, dim), size=parts - 1, replace=False))
    blocks = np.split(np.arange(dim), cuts)
    return [u[:, b] @ u[:, b].conj().T for b in blocks]


@dataclass(frozen=True)
class GleasonCheck:
    max_residual: float
    trials: int
    note: str = ""


def gleason_additivity_check(w: DensityOperator, trials: int, seed: int) -> GleasonCheck:
    """Additivity of E -> Tr(W E) over random orthogonal resolutions.

    Returns the largest deviation of the total from one and of pairwise
    orthogonal sums from the sum of parts. Dimension two is computed but
    flagged, since the representation theorem needs dim >= 3.
    """
    rng = np.random.default_rng(seed)
    note = "" if w.dim >= 3 else "dimension < 3: additivity holds but is not characteristic"
    worst = 0.0
    for _ in range(trials):
        projectors = random_resolution(w.dim, rng)
        mus = [float((w.matrix @ e).trace().real) for e in projectors]
        worst = max(worst, abs(sum(mus) - 1.0))
        for i in range(len(projectors)):
            for j in range(i + 1, len(projectors)):
                joint = float((w.matrix @ (projectors[i] + projectors[j])).trace().real)
                worst = max(worst, abs(joint - mus[i] - mus[j]))
    return GleasonCheck(worst, trials, note)


def _traceless_hermitian_basis(dim: int) -> list:
    basis = []
    for i in range(dim):
        for j in range(i + 1, dim):
            m = np.zeros((dim, dim), dtype=complex)
            m[i, j] = m[j, i] = 1 / math.sqrt(2)
            basis.append(m)
            m = np.zeros((dim, dim), dtype=complex)
            m[i, j] = -1j / math.sqrt(2)
            m[j, i] = 1j / math.sqrt(2)
            basis.append(m)
    for k in range(1, dim):
        m = np.zeros((dim, dim), dtype=complex)
        for i in range(k):
            m[i, i] = 1
        m[k, k] = -k
        basis.append(m / math.sqrt(k * (k + 1)))
    return basis


@dataclass(frozen=True, eq=False)
class FrameFit:
    state: DensityOperator
    residual: float
    underdetermined: bool


def frame_fit(samples) -> FrameFit:
    """Least-squares state behind observed values mu(E) on given effects.

    The fit is Hermitian with unit trace, then projected onto the positive
    cone (eigenvalue clipping plus trace renormalization). residual is the
    largest |Tr(rho_hat E) - value| after projection. Fewer than dim^2
    informative samples flag the fit as underdetermined.
    """
    samples = [(as_complex_matrix(e), float(v)) for e, v in samples]
    if not samples:
        raise StructuralError("no samples")
    dim = samples[0][0].shape[0]
    basis = _traceless_hermitian_basis(dim)
    design = np.array([[float((e @ b).trace().real) for b in basis]
                       for e, _ in samples])
    rhs = np.array([v - float(e.trace().real) / dim for e, v in samples])
    coeffs, _, rank, _ = np.linalg.lstsq(design, rhs, rcond=None)
    underdetermined = len(samples) < dim * dim or rank < len(basis)
    raw = np.eye(dim, dtype=complex) / dim
    for c, b in zip(coeffs, basis):
        raw = raw + c * b
    values, vectors = np.linalg.eigh(raw)
    clipped = np.clip(values, 0.0, None)
    if clipped.sum() <= 0:
        clipped = np.ones(dim)
    projected = (vectors * (clipped / clipped.sum())) @ vectors.conj().T
    state = DensityOperator(projected)
    residual = max(abs(float((state.matrix @ e).trace().real) - v)
                   for e, v in samples)
    return FrameFit(state, residual, underdetermined)


def apply_operation(w: DensityOperator, op: Operation):
    """(probability, conditional state) of a single operation.

    The conditional state is None when the probability is below 1e-12.
    """
    _check_dims(w, op.dim)
    sigma = op(w.matrix)
    p = float(sigma.trace().real)
    p = min(max(p, 0.0), 1.0)
    if p <= 1e-12:
        return p, None
    return p, DensityOperator(sigma / p)


def instrument_select(w: DensityOperator, instrument: Instrument, outcomes):
    """Statistical subcollection for a subset of outcomes.

    Summing member operations keeps finite additivity exact; the full outcome
    set has probability one.
    """
    outcomes = tuple(outcomes)
    if not outcomes:
        raise StructuralError("empty outcome subset")
    kraus = []
    for o in outcomes:
        kraus.extend(instrument.operation(o).kraus)
    return apply_operation(w, Operation(tuple(kraus)))


def induced_povm(instrument: Instrument) -> Povm:
    """POVM obtained from an instrument by the adjoint on the identity."""
    effects = tuple(EffectOperator(op.total_effect()) for op in instrument.operations)
    return Povm(instrument.outcomes, effects)


def measurement_tree(w: DensityOperator, instrument: Instrument, depth: int,
                     prune: float = 1e-12) -> list:
    """Probability tree of repeated application of one instrument.

    Returns (outcome path, probability) leaves; branches below the prune
    threshold are kept as leaves so the total probability stays one.
    """
    if depth < 0:
        raise StructuralError("negative depth")
    leaves = []

    def descend(state, path, weight, levels):
        if levels == 0:
            leaves.append((path, weight))
            return
        for outcome, op in zip(instrument.outcomes, instrument.operations):
            p, conditional = apply_operation(state, op)
            branch = weight * p
            if conditional is None or branch <= prune:
                if branch > 0.0:
                    leaves.append((path + (outcome,), branch))
                continue
            descend(conditional, path + (outcome,), branch, levels - 1)

    descend(w, (), 1.0, depth)
    return leaves


# ---------------------------------------------------------------------------
# Channels: Choi matrices and complete positivity
# ---------------------------------------------------------------------------

def _unvec(vector, dim):
    return vector.reshape(dim, dim, order="F")


def transpose_superop(dim: int) -> np.ndarray:
    """Matrix transposition as a superoperator (column-stacking convention)."""
    s = np.zeros((dim * dim, dim * dim), dtype=complex)
    for i in range(dim):
        for j in range(dim):
            s[j + dim * i, i + dim * j] = 1.0
    return s


def choi_matrix(channel, dim: int = None) -> np.ndarray:
    """Choi matrix C = (id x Phi) |Omega><Omega| with |Omega> = sum |ii> / sqrt(d).

    channel is an Operation or a d^2 x d^2 superoperator acting on
    column-stacked matrices. With this normalization the identity channel
    gives the maximally entangled projector.
    """
    if isinstance(channel, Operation):
        dim = channel.dim
        apply = channel
    else:
        s = as_complex_matrix(channel)
        dim = int(round(math.sqrt(s.shape[0]))) if dim is None else dim
        if dim * dim != s.shape[0]:
            raise StructuralError("superoperator is not a square-dimension matrix")

        def apply(m):
            return _unvec(s @ m.flatten(order="F"), dim)

    choi = np.zeros((dim * dim, dim * dim), dtype=complex)
    for i in range(dim):
        for j in range(dim):
            unit = np.zeros((dim, dim), dtype=complex)
            unit[i, j] = 1.0
            block = apply(unit)
            choi[i * dim:(i + 1) * dim, j * dim:(j + 1) * dim] = block
    return choi / dim


def choi_min_eigenvalue(channel) -> float:
    return float(np.linalg.eigvalsh(choi_matrix(channel)).min())


def is_completely_positive(channel, atol=DEFAULT.atol_cp) -> bool:
    """True iff the Choi matrix is positive semidefinite within atol."""
    return choi_min_eigenvalue(channel) >= -atol


# ---------------------------------------------------------------------------
# Dynamics
# ---------------------------------------------------------------------------

def unitary_evolve(w: DensityOperator, hamiltonian, t: float) -> DensityOperator:
    """Conjugation by exp(-iHt); the spectrum of the state is untouched."""
    dec = spectral(hamiltonian)
    _check_dims(w, dec.dim)
    u = (dec.vectors * np.exp(-1j * dec.eigenvalues * t)) @ dec.vectors.conj().T
    return DensityOperator(u @ w.matrix @ u.conj().T)


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Fixed-step trajectory with raw per-step health numbers.

    states are re-validated (and re-normalized); traces and min_eigenvalues
    record the raw integrator output before normalization.
    """

    times: np.ndarray
    states: tuple
    traces: np.ndarray
    min_eigenvalues: np.ndarray

    @property
    def max_trace_drift(self) -> float:
        return float(np.abs(self.traces - 1.0).max())

    @property
    def min_eigenvalue(self) -> float:
        return float(self.min_eigenvalues.min())


def lindblad_evolve(model: LindbladModel, w: DensityOperator, duration: float,
                    dt: float, trace_tol=DEFAULT.trace_drift,
                    positivity_tol=DEFAULT.trajectory_min_eig) -> Trajectory:
    """Integrate the Markovian master equation with fixed-step RK4.

    dW/dt = -i[H, W] + sum_k gamma_k (L W L^dag - {L^dag L, W}/2). Every step
    is validated: hermiticity within 1e-10, trace within trace_tol, minimum
    eigenvalue above -positivity_tol; a violation aborts with advice to
    shrink dt.
    """
    if dt <= 0:
        raise StructuralError("dt must be positive")
    if duration < 0:
        raise StructuralError("duration must be nonnegative")
    _check_dims(w, model.dim)
    h = model.hamiltonian
    terms = [(op, op.conj().T, rate, rate * (op.conj().T @ op))
             for op, rate in model.jumps]

    def rhs(rho):
        out = -1j * (h @ rho - rho @ h)
        for op, op_dag, rate, damp in terms:
            out = out + rate * (op @ rho @ op_dag) - 0.5 * (damp @ rho + rho @ damp)
        return out

    steps = int(round(duration / dt))
    times = np.arange(steps + 1) * dt
    rho = w.matrix.astype(complex)
    states = [w]
    traces = [float(rho.trace().real)]
    min_eigs = [float(np.linalg.eigvalsh(rho).min())]
    for step in range(steps):
        k1 = rhs(rho)
        k2 = rhs(rho + 0.5 * dt * k1)
        k3 = rhs(rho + 0.5 * dt * k2)
        k4 = rhs(rho + dt * k3)
        rho = rho + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        tr = float(rho.trace().real)
        low = float(np.linalg.eigvalsh(0.5 * (rho + rho.conj().T)).min())
        defect = hermiticity_defect(rho)
        if abs(tr - 1.0) > trace_tol or low < -positivity_tol or defect > 1e-10:
            raise IntegrationError(
                f"state left the validated set at step {step + 1} "
                f"(trace drift {abs(tr - 1.0):.3e}, min eig {low:.3e}, "
                f"hermiticity {defect:.3e}); use a smaller dt")
        traces.append(tr)
        min_eigs.append(low)
        states.append(DensityOperator(rho, atol_positive=positivity_tol,
                                      atol_trace=max(trace_tol, DEFAULT.tau_t)))
    return Trajectory(times, tuple(states), np.array(traces), np.array(min_eigs))
