"""Forward and backward passes for the layer set used by the experiment engine.

All arrays are float64, NHWC layout for images. Convolutions use same (zero)
padding with stride 1; max pooling uses stride equal to the pool size and
truncates trailing rows/columns when a spatial dimension is odd.
"""

import numpy as np

from .errors import ShapeError


def _as_f64(x):
    return np.asarray(x, dtype=np.float64)


def _im2col(x, k):
    """Extract k x k zero-padded patches: [N,H,W,C] -> [N, H*W, k*k*C]."""
    n, h, w, c = x.shape
    p = k // 2
    xp = np.pad(x, ((0, 0), (p, p), (p, p), (0, 0)))
    col = np.empty((n, h, w, k, k, c))
    for ky in range(k):
        for kx in range(k):
            col[:, :, :, ky, kx, :] = xp[:, ky : ky + h, kx : kx + w, :]
    return col.reshape(n, h * w, k * k * c)


def _conv2d_forward_col(x, weights, bias):
    """Same-padding, stride-1 2D convolution; also returns the patch matrix
    for reuse by the backward pass.

    x: [N,H,W,Cin], weights: [K,K,Cin,Cout], bias: [Cout] -> [N,H,W,Cout]
    """
    x = _as_f64(x)
    weights = _as_f64(weights)
    bias = _as_f64(bias)
    if x.ndim != 4:
        raise ShapeError(f"conv input must be 4-d [N,H,W,C], got {x.ndim}-d")
    if weights.ndim != 4 or weights.shape[0] != weights.shape[1]:
        raise ShapeError(f"conv weights must be [K,K,Cin,Cout], got {weights.shape}")
    k = weights.shape[0]
    if k % 2 != 1:
        raise ShapeError(f"kernel size must be odd, got {k}")
    if weights.shape[2] != x.shape[3]:
        raise ShapeError(
            f"input channels {x.shape[3]} do not match weight Cin {weights.shape[2]}"
        )
    cout = weights.shape[3]
    if bias.shape != (cout,):
        raise ShapeError(f"bias shape {bias.shape} does not match Cout {cout}")
    n, h, w, _ = x.shape
    col = _im2col(x, k)
    out = col @ weights.reshape(-1, cout) + bias
    return out.reshape(n, h, w, cout), col


def conv2d_forward(x, weights, bias):
    """Same-padding, stride-1 2D convolution (see _conv2d_forward_col)."""
    out, _ = _conv2d_forward_col(x, weights, bias)
    return out


def conv2d_backward(grad_out, x, weights, col=None):
    """Gradients of conv2d_forward w.r.t. input, weights and bias.

    col, if given, is the forward pass's _im2col(x, k) and avoids recomputing it.
    """
    grad_out = _as_f64(grad_out)
    x = _as_f64(x)
    weights = _as_f64(weights)
    k, _, cin, cout = weights.shape
    if grad_out.shape != x.shape[:3] + (cout,):
        raise ShapeError(
            f"grad_out shape {grad_out.shape} does not match forward output "
            f"{x.shape[:3] + (cout,)}"
        )
    n, h, w, _ = x.shape
    go = grad_out.reshape(n * h * w, cout)
    if col is None:
        col = _im2col(x, k)
    grad_w = (col.reshape(n * h * w, -1).T @ go).reshape(k, k, cin, cout)
    grad_b = go.sum(axis=0)
    # grad wrt input is the correlation of grad_out with the 180-degree
    # rotated kernel, channels swapped
    w_rot = weights[::-1, ::-1].transpose(0, 1, 3, 2)
    col_go = _im2col(grad_out, k)
    grad_x = (col_go @ w_rot.reshape(-1, cin)).reshape(n, h, w, cin)
    return grad_x, grad_w, grad_b


def maxpool2d_forward(x, pool):
    """Max pooling with window == stride == pool; odd trailing rows/cols truncated.

    Returns (output, argmax_cache) where the cache routes gradients back to the
    first (row-major) maximum in each window.
    """
    x = _as_f64(x)
    if x.ndim != 4:
        raise ShapeError(f"pool input must be 4-d [N,H,W,C], got {x.ndim}-d")
    n, h, w, c = x.shape
    ho, wo = h // pool, w // pool
    xt = x[:, : ho * pool, : wo * pool, :]
    win = xt.reshape(n, ho, pool, wo, pool, c).transpose(0, 1, 3, 5, 2, 4)
    flat = win.reshape(n, ho, wo, c, pool * pool)
    arg = flat.argmax(axis=-1)  # argmax returns the first maximum
    out = np.take_along_axis(flat, arg[..., None], axis=-1)[..., 0]
    return out, (arg, x.shape, pool)


def maxpool2d_backward(grad_out, cache):
    arg, in_shape, pool = cache
    n, h, w, c = in_shape
    ho, wo = h // pool, w // pool
    if grad_out.shape != (n, ho, wo, c):
        raise ShapeError(
            f"grad_out shape {grad_out.shape} does not match pooled shape {(n, ho, wo, c)}"
        )
    flat = np.zeros((n, ho, wo, c, pool * pool))
    np.put_along_axis(flat, arg[..., None], grad_out[..., None], axis=-1)
    gx = np.zeros(in_shape)
    gx[:, : ho * pool, : wo * pool, :] = (
        flat.reshape(n, ho, wo, c, pool, pool)
        .transpose(0, 1, 4, 2, 5, 3)
        .reshape(n, ho * pool, wo * pool, c)
    )
    return gx


def dense_forward(x, weights, bias):
    """Affine map x @ weights + bias. x: [N,D], weights: [D,U], bias: [U]."""
    x = _as_f64(x)
    weights = _as_f64(weights)
    bias = _as_f64(bias)
    if x.ndim != 2:
        raise ShapeError(f"dense input must be 2-d [N,D], got {x.ndim}-d")
    if x.shape[1] != weights.shape[0]:
        raise ShapeError(
            f"input features {x.shape[1]} do not match weight rows {weights.shape[0]}"
        )
    if bias.shape != (weights.shape[1],):
        raise ShapeError(f"bias shape {bias.shape} does not match units {weights.shape[1]}")
    return x @ weights + bias


def dense_backward(grad_out, x, weights):
    if grad_out.shape != (x.shape[0], weights.shape[1]):
        raise ShapeError(
            f"grad_out shape {grad_out.shape} does not match {(x.shape[0], weights.shape[1])}"
        )
    grad_x = grad_out @ weights.T
    grad_w = x.T @ grad_out
    grad_b = grad_out.sum(axis=0)
    return grad_x, grad_w, grad_b


def tanh_forward(x):
    return np.tanh(x)


def tanh_backward(grad_out, activated):
    # derivative expressed through the forward output: 1 - tanh(x)^2
    return grad_out * (1.0 - activated * activated)


def softmax(x):
    """Row-wise exp-normalization with max subtraction for stability."""
    x = _as_f64(x)
    z = x - x.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def cross_entropy_loss(probs, labels):
    """Mean negative log-likelihood (natural log) and the combined
    softmax + cross-entropy gradient w.r.t. the logits: (probs - onehot) / N.
    """
    probs = _as_f64(probs)
    labels = np.asarray(labels)
    n, c = probs.shape
    if labels.shape != (n,):
        raise ShapeError(f"labels shape {labels.shape} does not match batch size {n}")
    if labels.min(initial=0) < 0 or labels.max(initial=0) >= c:
        raise ShapeError(f"label out of range [0, {c})")
    picked = probs[np.arange(n), labels]
    loss = -np.log(np.maximum(picked, 1e-300)).mean()
    grad = probs.copy()
    grad[np.arange(n), labels] -= 1.0
    grad /= n
    return loss, grad
