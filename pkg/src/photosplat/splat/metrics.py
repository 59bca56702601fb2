"""Image quality metrics and the training loss with its pixel gradient.

PSNR is 10 log10(1 / MSE) over all pixels and channels (peak 1.0); identical
images report +inf. SSIM uses an 11x11 Gaussian window (sigma 1.5) with
zero-padded convolutions, which keeps the analytic gradient the exact adjoint
of the forward pass.
"""

from __future__ import annotations

import math

import numpy as np

from ..errors import InvalidArgumentError

SSIM_C1 = 0.01**2
SSIM_C2 = 0.03**2


def psnr(rendered: np.ndarray, target: np.ndarray) -> float:
    a = np.asarray(rendered, dtype=np.float64)
    b = np.asarray(target, dtype=np.float64)
    if a.shape != b.shape:
        raise InvalidArgumentError(f"shape mismatch: {a.shape} vs {b.shape}")
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(1.0 / mse)


def format_psnr(value: float) -> str:
    return "inf" if math.isinf(value) else f"{value:.6f}"


def gaussian_kernel(window: int = 11, sigma: float = 1.5) -> np.ndarray:
    half = (window - 1) / 2.0
    x = np.arange(window) - half
    k = np.exp(-0.5 * (x / sigma) ** 2)
    return k / k.sum()


def _conv_same(img: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """Separable zero-padded 'same' convolution with a symmetric 1-D kernel."""
    kw = len(kernel)
    pad = kw // 2
    h, w = img.shape
    tmp = np.zeros_like(img)
    padded = np.zeros((h, w + 2 * pad))
    padded[:, pad : pad + w] = img
    for i, kv in enumerate(kernel):
        tmp += kv * padded[:, i : i + w]
    out = np.zeros_like(img)
    padded = np.zeros((h + 2 * pad, w))
    padded[pad : pad + h, :] = tmp
    for i, kv in enumerate(kernel):
        out += kv * padded[i : i + h, :]
    return out


def _ssim_channel(x: np.ndarray, y: np.ndarray, kernel: np.ndarray):
    """Mean SSIM of one channel plus d(mean SSIM)/dx."""
    mu_x = _conv_same(x, kernel)
    mu_y = _conv_same(y, kernel)
    var_x = _conv_same(x * x, kernel) - mu_x * mu_x
    var_y = _conv_same(y * y, kernel) - mu_y * mu_y
    cov = _conv_same(x * y, kernel) - mu_x * mu_y
    a1 = 2.0 * mu_x * mu_y + SSIM_C1
    a2 = 2.0 * cov + SSIM_C2
    b1 = mu_x * mu_x + mu_y * mu_y + SSIM_C1
    b2 = var_x + var_y + SSIM_C2
    s = (a1 * a2) / (b1 * b2)
    n = x.size

    d_mu = 2.0 * mu_y * a2 / (b1 * b2) - 2.0 * mu_x * s / b1
    d_var = -s / b2
    d_cov = 2.0 * a1 / (b1 * b2)
    grad = (
        _conv_same(d_mu - 2.0 * mu_x * d_var - mu_y * d_cov, kernel)
        + 2.0 * x * _conv_same(d_var, kernel)
        + y * _conv_same(d_cov, kernel)
    ) / n
    return float(s.mean()), grad


def ssim(x: np.ndarray, y: np.ndarray, window: int = 11, sigma: float = 1.5) -> float:
    value, _ = ssim_with_gradient(x, y, window=window, sigma=sigma)
    return value


def ssim_with_gradient(
    x: np.ndarray, y: np.ndarray, window: int = 11, sigma: float = 1.5
) -> tuple[float, np.ndarray]:
    """Mean SSIM over channels and its gradient with respect to x."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise InvalidArgumentError(f"shape mismatch: {x.shape} vs {y.shape}")
    kernel = gaussian_kernel(window, sigma)
    flat = x.ndim == 2
    if flat:
        x = x[:, :, None]
        y = y[:, :, None]
    values = []
    grad = np.zeros_like(x)
    for c in range(x.shape[2]):
        v, g = _ssim_channel(x[:, :, c], y[:, :, c], kernel)
        values.append(v)
        grad[:, :, c] = g
    grad /= x.shape[2]
    return float(np.mean(values)), grad[:, :, 0] if flat else grad


def loss_and_gradient(
    rendered: np.ndarray,
    target: np.ndarray,
    l1_weight: float = 0.8,
    ssim_weight: float = 0.2,
    window: int = 11,
    sigma: float = 1.5,
) -> tuple[float, np.ndarray]:
    """loss = l1_weight * L1 + ssim_weight * (1 - SSIM), with d(loss)/d(rendered)."""
    rendered = np.asarray(rendered, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if rendered.shape != target.shape:
        raise InvalidArgumentError(f"shape mismatch: {rendered.shape} vs {target.shape}")
    diff = rendered - target
    l1 = float(np.mean(np.abs(diff)))
    if l1 == 0.0:
        # exact global minimum; skip the SSIM gradient, whose terms otherwise
        # cancel only to rounding dust that a tiny-epsilon Adam would amplify
        return 0.0, np.zeros_like(rendered)
    g_l1 = np.sign(diff) / diff.size
    s, g_s = ssim_with_gradient(rendered, target, window=window, sigma=sigma)
    loss = l1_weight * l1 + ssim_weight * (1.0 - s)
    grad = l1_weight * g_l1 - ssim_weight * np.asarray(g_s).reshape(rendered.shape)
    return loss, grad
