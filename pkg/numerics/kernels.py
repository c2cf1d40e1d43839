"""
Dense numerical kernels: matrix product, row softmax, layer normalization and
scaled-dot-product attention over row-major numpy arrays.

All kernels are pure: they never mutate their inputs and give bitwise identical
results for identical inputs and precision.
"""

import numpy as np

from utils.errors import DimensionError, NumericalError

PRECISIONS = {
    'f64': np.float64,
    'f32': np.float32,
}

# A Tensor2D is a C-contiguous 2-D numpy array of one of PRECISIONS
Tensor2D = np.ndarray


def precision_of(x: np.ndarray) -> str:
    """Return the precision id ('f32' or 'f64') of an array"""
    for name, dtype in PRECISIONS.items():
        if x.dtype == dtype:
            return name
    raise DimensionError(f"Unsupported precision {x.dtype}; expected one of {list(PRECISIONS)}")


def tensor2d(data, precision: str = 'f64') -> Tensor2D:
    """Build a row-major 2-D tensor in the requested precision"""
    if precision not in PRECISIONS:
        raise DimensionError(f"Unknown precision '{precision}'")
    array = np.ascontiguousarray(np.asarray(data, dtype=PRECISIONS[precision]))
    if array.ndim == 1:
        array = array.reshape(1, -1)
    if array.ndim != 2:
        raise DimensionError(f"Tensor2D needs 2 dimensions, got shape {array.shape}")
    return array


def check_finite(x: np.ndarray, name: str = 'tensor'):
    """Raise NumericalError if x holds NaN or infinity"""
    if not np.all(np.isfinite(x)):
        raise NumericalError(f"{name} contains non-finite values")


def matmul(a: Tensor2D, b: Tensor2D) -> Tensor2D:
    """Standard matrix product a @ b (leading batch dimensions are allowed)"""
    if a.ndim < 2 or b.ndim < 2:
        raise DimensionError(f"matmul needs at least 2-D inputs, got {a.shape} and {b.shape}")
    if a.shape[-1] != b.shape[-2]:
        raise DimensionError(f"matmul shape mismatch: {a.shape} x {b.shape}")
    if a.dtype != b.dtype:
        raise DimensionError(f"matmul precision mismatch: {a.dtype} vs {b.dtype}")
    return np.matmul(a, b)


def softmax_rows(x: Tensor2D) -> Tensor2D:
    """Softmax along the last axis with per-row max subtraction"""
    check_finite(x, 'softmax input')
    shifted = x - np.max(x, axis=-1, keepdims=True)
    exp = np.exp(shifted)
    return exp / np.sum(exp, axis=-1, keepdims=True)


def layer_norm(x: np.ndarray, gamma: np.ndarray = None, beta: np.ndarray = None,
               eps: float = 1e-5) -> np.ndarray:
    """Normalize the last axis to zero mean / unit variance, then scale and shift"""
    check_finite(x, 'layer_norm input')
    mean = np.mean(x, axis=-1, keepdims=True)
    var = np.mean((x - mean) ** 2, axis=-1, keepdims=True)
    out = (x - mean) / np.sqrt(var + eps)
    if gamma is not None:
        out = out * gamma
    if beta is not None:
        out = out + beta
    return out


def attention(q: Tensor2D, k: Tensor2D, v: Tensor2D) -> Tensor2D:
    """O = softmax(Q K^T / sqrt(d)) V"""
    if q.ndim != 2 or k.ndim != 2 or v.ndim != 2:
        raise DimensionError("attention expects 2-D q, k and v")
    if q.shape[1] != k.shape[1]:
        raise DimensionError(f"query width {q.shape[1]} != key width {k.shape[1]}")
    if k.shape[0] != v.shape[0]:
        raise DimensionError(f"{k.shape[0]} keys but {v.shape[0]} values")
    if k.shape[0] == 0:
        raise DimensionError("attention over an empty key set")
    scale = 1.0 / np.sqrt(q.shape[1])
    weights = softmax_rows(matmul(q, k.T) * scale)
    return matmul(weights, v)


def multi_head_attention(q: np.ndarray, k: np.ndarray, v: np.ndarray, heads: int) -> np.ndarray:
    """Split width into heads, attend per head, concatenate head outputs"""
    if q.shape[1] % heads or k.shape[1] != q.shape[1] or v.shape[1] % heads:
        raise DimensionError(f"widths {q.shape[1]}/{k.shape[1]}/{v.shape[1]} not divisible into {heads} heads")
    dq = q.shape[1] // heads
    dv = v.shape[1] // heads
    outputs = [
        attention(q[:, h * dq:(h + 1) * dq], k[:, h * dq:(h + 1) * dq], v[:, h * dv:(h + 1) * dv])
        for h in range(heads)
    ]
    return np.concatenate(outputs, axis=1)
