"""
Forward and backward kernels for the toy DiT blocks.

Every forward returns its output and the cache its backward needs; every
backward returns the input gradient and the parameter gradients.
"""

import numpy as np

from numerics.kernels import matmul, softmax_rows

LN_EPS = 1e-5
GELU_C = np.sqrt(2.0 / np.pi)


def sinusoidal_embedding(values, dim: int, max_period: float = 10000.0) -> np.ndarray:
    """(n,) values -> (n, dim) [cos | sin] embedding"""
    values = np.asarray(values, dtype=np.float64).reshape(-1)
    half = dim // 2
    freqs = np.exp(-np.log(max_period) * np.arange(half) / half)
    args = values[:, None] * freqs[None, :]
    embedding = np.concatenate([np.cos(args), np.sin(args)], axis=1)
    if dim % 2:
        embedding = np.concatenate([embedding, np.zeros((embedding.shape[0], 1))], axis=1)
    return embedding


def positional_table(max_frames: int, dim: int) -> np.ndarray:
    return sinusoidal_embedding(np.arange(max_frames), dim)


# Linear

def linear(x, w, b=None):
    y = matmul(x, w)
    return y + b if b is not None else y


def linear_backward(dy, x, w):
    """Gradients of y = x w + b wrt x, w, b (x may carry leading batch axes)"""
    dx = matmul(dy, w.T)
    dw = matmul(x.reshape(-1, x.shape[-1]).T, dy.reshape(-1, dy.shape[-1]))
    db = dy.reshape(-1, dy.shape[-1]).sum(axis=0)
    return dx, dw, db


# Layer normalization

def layer_norm_forward(x, gamma, beta):
    mean = x.mean(axis=-1, keepdims=True)
    var = ((x - mean) ** 2).mean(axis=-1, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + LN_EPS)
    x_hat = (x - mean) * inv_std
    return x_hat * gamma + beta, (x_hat, inv_std)


def layer_norm_backward(dy, cache, gamma):
    x_hat, inv_std = cache
    dgamma = (dy * x_hat).reshape(-1, dy.shape[-1]).sum(axis=0)
    dbeta = dy.reshape(-1, dy.shape[-1]).sum(axis=0)
    dx_hat = dy * gamma
    dx = inv_std * (dx_hat
                    - dx_hat.mean(axis=-1, keepdims=True)
                    - x_hat * (dx_hat * x_hat).mean(axis=-1, keepdims=True))
    return dx, dgamma, dbeta


# GELU (tanh approximation)

def gelu(x):
    return 0.5 * x * (1.0 + np.tanh(GELU_C * (x + 0.044715 * x ** 3)))


def gelu_backward(dy, x):
    inner = GELU_C * (x + 0.044715 * x ** 3)
    t = np.tanh(inner)
    grad = 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t ** 2) * GELU_C * (1.0 + 3 * 0.044715 * x ** 2)
    return dy * grad


# Multi-head attention for one batch element

def split_heads(x, heads):
    n, d = x.shape
    return x.reshape(n, heads, d // heads).transpose(1, 0, 2)


def merge_heads(x):
    h, n, dh = x.shape
    return x.transpose(1, 0, 2).reshape(n, h * dh)


def mha_forward(q, k, v, heads):
    """q (Nq, D), k/v (Nk, D) -> o (Nq, D) and the attention probabilities (H, Nq, Nk)"""
    qh, kh, vh = split_heads(q, heads), split_heads(k, heads), split_heads(v, heads)
    scale = 1.0 / np.sqrt(qh.shape[-1])
    probs = softmax_rows(matmul(qh, kh.transpose(0, 2, 1)) * scale)
    return merge_heads(matmul(probs, vh)), probs


def mha_backward(do, q, k, v, probs, heads):
    qh, kh, vh = split_heads(q, heads), split_heads(k, heads), split_heads(v, heads)
    doh = split_heads(do, heads)
    scale = 1.0 / np.sqrt(qh.shape[-1])
    dvh = matmul(probs.transpose(0, 2, 1), doh)
    dprobs = matmul(doh, vh.transpose(0, 2, 1))
    dscores = probs * (dprobs - (dprobs * probs).sum(axis=-1, keepdims=True))
    dqh = matmul(dscores, kh) * scale
    dkh = matmul(dscores.transpose(0, 2, 1), qh) * scale
    return merge_heads(dqh), merge_heads(dkh), merge_heads(dvh)
