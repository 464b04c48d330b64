"""Dense float64 linear-algebra kernel.

A ``Matrix`` is a 2-D, C-contiguous ``numpy.ndarray`` of float64.  All
operations are pure functions of their inputs, keep every entry finite or
raise, and are deterministic: the same inputs yield bit-identical outputs on
one thread.  The fast paths delegate to numpy/BLAS; correctness tests compare
them against plain-loop oracles that never touch these functions.
"""

from __future__ import annotations

import numpy as np

from .errors import DimensionError, NonFiniteError

Matrix = np.ndarray


def as_matrix(values, name: str = "matrix") -> Matrix:
    """Coerce to a finite, 2-D, C-contiguous float64 array."""
    arr = np.ascontiguousarray(values, dtype=np.float64)
    if arr.ndim != 2:
        raise DimensionError(f"{name} must be 2-D, got shape {arr.shape}")
    require_finite(arr, name)
    return arr


def require_finite(arr: np.ndarray, name: str = "array") -> None:
    if not np.all(np.isfinite(arr)):
        raise NonFiniteError(f"{name} contains NaN or Inf")


def matmul(a: Matrix, b: Matrix) -> Matrix:
    """Standard matrix product C[i,j] = sum_k a[i,k] * b[k,j]."""
    if a.ndim != 2 or b.ndim != 2:
        raise DimensionError(f"matmul needs 2-D operands, got {a.shape} and {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise DimensionError(f"matmul shape mismatch: {a.shape} x {b.shape}")
    out = a @ b
    require_finite(out, "matmul result")
    return out


def logsumexp_rows(z: Matrix) -> np.ndarray:
    """Row-wise log(sum(exp(z))) via max subtraction; shape (rows,)."""
    m = z.max(axis=1, keepdims=True)
    return (m + np.log(np.exp(z - m).sum(axis=1, keepdims=True))).ravel()


def softmax_rows(z: Matrix) -> Matrix:
    """Row-wise softmax, stabilized by subtracting each row's max."""
    if z.ndim != 2:
        raise DimensionError(f"softmax_rows needs a 2-D input, got {z.shape}")
    require_finite(z, "softmax input")
    shifted = z - z.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def relu_forward(z: Matrix) -> tuple[Matrix, Matrix]:
    """Elementwise max(0, z); returns (output, 0/1 activation mask)."""
    mask = (z > 0.0).astype(np.float64)
    return z * mask, mask


def relu_backward(grad: Matrix, mask: Matrix) -> Matrix:
    """Route gradients through the activation mask recorded by the forward."""
    if grad.shape != mask.shape:
        raise DimensionError(f"relu_backward shape mismatch: {grad.shape} vs {mask.shape}")
    return grad * mask
