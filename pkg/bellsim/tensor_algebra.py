"""
Exact small-dimension complex linear algebra on C^2 and C^2 (x) C^2.

Matrices are numpy complex128 arrays of shape (2, 2) or (4, 4), returned
read-only; every operation returns a fresh array. States are complex128
vectors of unit norm.

Index convention for C^2 (x) C^2: the basis vector |i_A> (x) |i_B> sits at
position 2 * i_A + i_B, which is exactly numpy.kron's ordering.
"""

from typing import Iterable, Optional

import numpy as np

from bellsim.core import TOLERANCE, InputError, check_finite


SUPPORTED_DIMS = (2, 4)


def _freeze(values: np.ndarray) -> np.ndarray:
    values.setflags(write=False)
    return values


def as_matrix(values) -> np.ndarray:
    """
    Validate and copy `values` into a read-only SquareComplexMatrix.

    Raises:
        InputError: If the array is not square of dimension 2 or 4, or has non-finite entries
    """
    matrix = np.array(values, dtype=np.complex128, copy=True)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise InputError(f"Expected a square matrix, got shape {matrix.shape}")
    if matrix.shape[0] not in SUPPORTED_DIMS:
        raise InputError(f"Matrix dimension must be one of {SUPPORTED_DIMS}, got {matrix.shape[0]}")
    if not np.all(np.isfinite(matrix)):
        raise InputError("Matrix entries must be finite")
    return _freeze(matrix)


def as_state(values) -> np.ndarray:
    """
    Validate and copy `values` into a read-only StateVector.

    Raises:
        InputError: If the vector has an unsupported dimension, non-finite amplitudes
                    or a norm different from 1 beyond TOLERANCE
    """
    state = np.array(values, dtype=np.complex128, copy=True)
    if state.ndim != 1 or state.shape[0] not in SUPPORTED_DIMS:
        raise InputError(f"State must be a vector of dimension {SUPPORTED_DIMS}, got shape {state.shape}")
    if not np.all(np.isfinite(state)):
        raise InputError("State amplitudes must be finite")
    norm = np.linalg.norm(state)
    if abs(norm - 1.0) > TOLERANCE:
        raise InputError(f"State must have unit norm, got {norm!r}")
    return _freeze(state)


def _require_dim(matrix: np.ndarray, dim: int, name: str) -> np.ndarray:
    matrix = as_matrix(matrix)
    if matrix.shape[0] != dim:
        raise InputError(f"{name} needs a dimension-{dim} matrix, got dimension {matrix.shape[0]}")
    return matrix


def _require_conforming(a: np.ndarray, b: np.ndarray, op: str):
    a, b = as_matrix(a), as_matrix(b)
    if a.shape != b.shape:
        raise InputError(f"{op}: dimension mismatch {a.shape[0]} vs {b.shape[0]}")
    return a, b


def identity(dim: int) -> np.ndarray:
    if dim not in SUPPORTED_DIMS:
        raise InputError(f"Matrix dimension must be one of {SUPPORTED_DIMS}, got {dim}")
    return _freeze(np.eye(dim, dtype=np.complex128))


def diag(values: Iterable[complex]) -> np.ndarray:
    return as_matrix(np.diag(np.asarray(list(values), dtype=np.complex128)))


def rotation(gamma: float) -> np.ndarray:
    """Rotation R_gamma = [[cos, -sin], [sin, cos]] of C^2 over angle gamma."""
    gamma = check_finite(gamma, "rotation angle")
    c, s = np.cos(gamma), np.sin(gamma)
    return as_matrix([[c, -s], [s, c]])


def pauli3_projector(p: int) -> np.ndarray:
    """Spectral projector of sigma_3 for eigenvalue p: +1 -> diag(1,0), -1 -> diag(0,1)."""
    if p == 1:
        return diag([1, 0])
    if p == -1:
        return diag([0, 1])
    raise InputError(f"Outcome must be +1 or -1, got {p!r}")


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    a, b = _require_conforming(a, b, "matmul")
    return _freeze(a @ b)


def adjoint(m: np.ndarray) -> np.ndarray:
    """Conjugate transpose."""
    return _freeze(as_matrix(m).conj().T.copy())


def add(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    a, b = _require_conforming(a, b, "add")
    return _freeze(a + b)


def scale(m: np.ndarray, factor: complex) -> np.ndarray:
    factor = complex(factor)
    if not (np.isfinite(factor.real) and np.isfinite(factor.imag)):
        raise InputError(f"Scale factor must be finite, got {factor!r}")
    return _freeze(as_matrix(m) * factor)


def trace(m: np.ndarray) -> complex:
    return complex(np.trace(as_matrix(m)))


def commutator(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    a, b = _require_conforming(a, b, "commutator")
    return _freeze(a @ b - b @ a)


def tensor_product(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Kronecker product of two dimension-2 matrices under the 2*i_A + i_B convention."""
    a = _require_dim(a, 2, "tensor_product")
    b = _require_dim(b, 2, "tensor_product")
    return _freeze(np.kron(a, b))


def _traced_basis(basis: Optional[np.ndarray]) -> np.ndarray:
    if basis is None:
        return identity(2)
    u = _require_dim(basis, 2, "partial trace basis")
    if not is_unitary(u):
        raise InputError("Partial trace basis must be orthonormal (columns of a unitary matrix)")
    return u


def partial_trace_B(m: np.ndarray, basis: Optional[np.ndarray] = None) -> np.ndarray:
    """
    Trace out the second factor: sum_j (I_A (x) <f_j|) M (I_A (x) |f_j>).

    Args:
        m: Dimension-4 matrix
        basis: Optional orthonormal basis (f_j as columns) of the traced factor;
               the standard basis when omitted

    Returns:
        Dimension-2 matrix on the first factor
    """
    m = _require_dim(m, 4, "partial_trace_B")
    u = _traced_basis(basis)
    lift = np.kron(np.eye(2), u)
    rotated = lift.conj().T @ m @ lift
    return _freeze(np.einsum("ijkj->ik", rotated.reshape(2, 2, 2, 2)))


def partial_trace_A(m: np.ndarray, basis: Optional[np.ndarray] = None) -> np.ndarray:
    """Trace out the first factor; mirror of partial_trace_B."""
    m = _require_dim(m, 4, "partial_trace_A")
    u = _traced_basis(basis)
    lift = np.kron(u, np.eye(2))
    rotated = lift.conj().T @ m @ lift
    return _freeze(np.einsum("ijil->jl", rotated.reshape(2, 2, 2, 2)))


# -----------------------------
# Tolerance-based predicates
# -----------------------------

def max_abs_deviation(a: np.ndarray, b: np.ndarray) -> float:
    a, b = _require_conforming(a, b, "max_abs_deviation")
    return float(np.max(np.abs(a - b)))


def matrices_close(a: np.ndarray, b: np.ndarray, tol: float = TOLERANCE) -> bool:
    return max_abs_deviation(a, b) <= tol


def is_hermitian(m: np.ndarray, tol: float = TOLERANCE) -> bool:
    return matrices_close(m, adjoint(m), tol)


def is_idempotent(m: np.ndarray, tol: float = TOLERANCE) -> bool:
    return matrices_close(matmul(m, m), m, tol)


def is_unitary(m: np.ndarray, tol: float = TOLERANCE) -> bool:
    m = as_matrix(m)
    return matrices_close(adjoint(m) @ m, identity(m.shape[0]), tol)
