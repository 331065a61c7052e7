"""Dense finite-dimensional complex linear algebra with validated operators.

States and effects are validated at construction: hermiticity within tau_h,
spectrum within tau_p of the admissible interval, trace within tau_t of one.
Tiny spectral violations are clipped and the trace renormalized exactly;
anything larger is rejected. Matrices that already satisfy the constraints
are stored untouched, so analytically exact inputs stay exact.
"""

import itertools
import math

import numpy as np

from .config import DEFAULT
from .errors import DomainError, StructuralError, ValidationError

DIM_CAP = 4096


def as_complex_matrix(data) -> np.ndarray:
    """Coerce to a square complex128 array with finite entries."""
    m = np.asarray(data, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise StructuralError(f"expected a square matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m.view(float))):
        raise StructuralError("matrix contains NaN or Inf entries")
    return m


def hermiticity_defect(m) -> float:
    """Largest entrywise deviation of m from its own adjoint."""
    m = np.asarray(m)
    return float(np.abs(m - m.conj().T).max()) if m.size else 0.0


def is_hermitian(m, atol=DEFAULT.tau_h) -> bool:
    return hermiticity_defect(m) <= atol


class SpectralDecomposition:
    """Eigensystem of a Hermitian matrix with a deterministic output contract.

    Eigenvalues are real and sorted descending; eigenvector columns are
    orthonormal with the first significant component made real positive, so
    fixed input gives fixed output.
    """

    __slots__ = ("eigenvalues", "vectors")

    def __init__(self, eigenvalues, vectors):
        self.eigenvalues = eigenvalues
        self.vectors = vectors

    @property
    def dim(self) -> int:
        return self.eigenvalues.shape[0]

    def apply(self, fn) -> np.ndarray:
        """Assemble V f(lambda) V^dagger for a scalar function fn."""
        values = np.asarray(fn(self.eigenvalues), dtype=complex)
        if not np.all(np.isfinite(values.view(float))):
            raise DomainError("function returned a non-finite value on the spectrum")
        return (self.vectors * values) @ self.vectors.conj().T

    def reconstruct(self) -> np.ndarray:
        return (self.vectors * self.eigenvalues) @ self.vectors.conj().T


def spectral(m, atol=DEFAULT.tau_h) -> SpectralDecomposition:
    """Spectral decomposition of a Hermitian matrix.

    Raises ValidationError if m fails the hermiticity tolerance or if the
    reconstruction/orthonormality residuals exceed 1e-10 (scaled by dim).
    """
    m = as_complex_matrix(m)
    defect = hermiticity_defect(m)
    if defect > atol:
        raise ValidationError(f"matrix is not Hermitian (defect {defect:.3e} > {atol:.1e})")
    h = 0.5 * (m + m.conj().T)
    values, vectors = np.linalg.eigh(h)
    order = np.argsort(values)[::-1]
    values = values[order]
    vectors = vectors[:, order]
    dim = h.shape[0]
    for k in range(dim):
        col = vectors[:, k]
        idx = np.argmax(np.abs(col) > 1e-12)
        pivot = col[idx]
        if abs(pivot) > 0:
            vectors[:, k] = col * (pivot.conjugate() / abs(pivot))
    dec = SpectralDecomposition(values, vectors)
    if np.abs(dec.reconstruct() - h).max() > 1e-10 * max(dim, 1):
        raise ValidationError("spectral reconstruction residual too large")
    gram = vectors.conj().T @ vectors
    if np.abs(gram - np.eye(dim)).max() > 1e-10:
        raise ValidationError("eigenvectors lost orthonormality")
    return dec


def _clip_reconstruct(matrix, lo, hi):
    values, vectors = np.linalg.eigh(matrix)
    clipped = np.clip(values, lo, hi)
    return (vectors * clipped) @ vectors.conj().T


class DensityOperator:
    """Positive, unit-trace operator; the mathematical image of an ensemble."""

    __slots__ = ("matrix",)

    def __init__(self, matrix, atol_hermitian=DEFAULT.tau_h,
                 atol_positive=DEFAULT.tau_p, atol_trace=DEFAULT.tau_t):
        m = as_complex_matrix(matrix)
        defect = hermiticity_defect(m)
        if defect > atol_hermitian:
            raise ValidationError(
                f"density operator not Hermitian (defect {defect:.3e} > {atol_hermitian:.1e})"
            )
        h = 0.5 * (m + m.conj().T)
        eigs = np.linalg.eigvalsh(h)
        if eigs.min() < -atol_positive:
            raise ValidationError(
                f"density operator has negative eigenvalue {eigs.min():.3e}"
            )
        tr = float(h.trace().real)
        if abs(tr - 1.0) > atol_trace:
            raise ValidationError(f"trace is {tr!r}, expected 1 within {atol_trace:.1e}")
        if eigs.min() < 0.0:
            h = _clip_reconstruct(h, 0.0, None)
        h = h / float(h.trace().real)
        h.flags.writeable = False
        self.matrix = h

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def purity(self) -> float:
        return float((self.matrix @ self.matrix).trace().real)

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.matrix)[::-1]

    def __repr__(self):
        return f"DensityOperator(dim={self.dim}, purity={self.purity():.6f})"


def is_pure(w: DensityOperator, atol=1e-9) -> bool:
    """Extreme-point test: purity within atol of one (rank one)."""
    return w.purity() >= 1.0 - atol


def convex_mix(pairs, atol_weights=DEFAULT.tau_t) -> DensityOperator:
    """Weighted mixture of density operators; weights must sum to one."""
    pairs = list(pairs)
    if not pairs:
        raise StructuralError("empty mixture")
    total = 0.0
    acc = None
    for weight, state in pairs:
        weight = float(weight)
        if weight < 0.0:
            raise StructuralError(f"negative mixture weight {weight!r}")
        total += weight
        term = weight * state.matrix
        acc = term if acc is None else acc + term
    if abs(total - 1.0) > atol_weights:
        raise StructuralError(f"mixture weights sum to {total!r}, expected 1")
    return DensityOperator(acc)


class EffectOperator:
    """Hermitian operator with spectrum in [0, 1]; a yes-no response."""

    __slots__ = ("matrix",)

    def __init__(self, matrix, atol_hermitian=DEFAULT.tau_h, atol_spectrum=DEFAULT.tau_p):
        m = as_complex_matrix(matrix)
        defect = hermiticity_defect(m)
        if defect > atol_hermitian:
            raise ValidationError(
                f"effect not Hermitian (defect {defect:.3e} > {atol_hermitian:.1e})"
            )
        h = 0.5 * (m + m.conj().T)
        eigs = np.linalg.eigvalsh(h)
        if eigs.min() < -atol_spectrum or eigs.max() > 1.0 + atol_spectrum:
            raise ValidationError(
                f"effect spectrum [{eigs.min():.3e}, {eigs.max():.3e}] outside [0, 1]"
            )
        if eigs.min() < 0.0 or eigs.max() > 1.0:
            h = _clip_reconstruct(h, 0.0, 1.0)
        h.flags.writeable = False
        self.matrix = h

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def __repr__(self):
        return f"EffectOperator(dim={self.dim})"


def func_of_hermitian(m, fn, atol=DEFAULT.tau_h) -> np.ndarray:
    """Apply a scalar function to a Hermitian matrix by spectral calculus.

    fn receives the eigenvalue array (or, as a fallback, one eigenvalue at a
    time) and must return finite values; otherwise DomainError is raised.
    For kernels like x*log(x) the caller restricts to the support first.
    """
    dec = spectral(m, atol=atol)
    try:
        values = np.asarray(fn(dec.eigenvalues), dtype=complex)
        if values.shape != dec.eigenvalues.shape:
            raise TypeError
    except DomainError:
        raise
    except Exception:
        values = np.asarray([fn(x) for x in dec.eigenvalues], dtype=complex)
    if not np.all(np.isfinite(values.view(float))):
        raise DomainError("function undefined on part of the spectrum")
    return (dec.vectors * values) @ dec.vectors.conj().T


def tensor(a, b, dim_cap=DIM_CAP) -> np.ndarray:
    """Kronecker product with a configurable total-dimension cap."""
    a = as_complex_matrix(a)
    b = as_complex_matrix(b)
    if a.shape[0] * b.shape[0] > dim_cap:
        raise StructuralError(
            f"tensor dimension {a.shape[0] * b.shape[0]} exceeds cap {dim_cap}"
        )
    return np.kron(a, b)


def _permutation_sign(perm) -> int:
    sign = 1
    seen = [False] * len(perm)
    for start in range(len(perm)):
        if seen[start]:
            continue
        length = 0
        j = start
        while not seen[j]:
            seen[j] = True
            j = perm[j]
            length += 1
        if length % 2 == 0:
            sign = -sign
    return sign


def sym_projector(dim: int, factors: int, parity: str, dim_cap=DIM_CAP) -> np.ndarray:
    """Orthogonal projector onto the (anti)symmetric part of a tensor power.

    dim is the single-factor dimension, factors the tensor power k. parity is
    "symmetric" or "antisymmetric". The result satisfies P = P^2 = P^dagger.
    """
    if parity not in ("symmetric", "antisymmetric"):
        raise StructuralError(f"unknown parity {parity!r}")
    total = dim ** factors
    if total > dim_cap:
        raise StructuralError(f"tensor power dimension {total} exceeds cap {dim_cap}")
    # digits[i, pos] is the pos-th tensor-factor index of basis vector i
    digits = np.empty((total, factors), dtype=np.int64)
    idx = np.arange(total)
    for pos in range(factors):
        digits[:, factors - 1 - pos] = (idx // dim ** pos) % dim
    proj = np.zeros((total, total), dtype=complex)
    for perm in itertools.permutations(range(factors)):
        sign = 1 if parity == "symmetric" else _permutation_sign(perm)
        permuted = digits[:, list(perm)]
        target = np.zeros(total, dtype=np.int64)
        for pos in range(factors):
            target = target * dim + permuted[:, pos]
        proj[target, idx] += sign
    proj /= math.factorial(factors)
    if hermiticity_defect(proj) > 1e-10 or np.abs(proj @ proj - proj).max() > 1e-10:
        raise ValidationError("projector construction lost idempotence")
    return proj
