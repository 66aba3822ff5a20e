"""Independent oracles used to check the implementation paths.

These stay deliberately naive: explicit loops, scalar formulas, dense
eigensolvers. They never call the code paths they verify.
"""

from __future__ import annotations

import math

import numpy as np
import torch


def brute_force_attention(queries: np.ndarray, keys_values: np.ndarray,
                          Q: np.ndarray, K: np.ndarray, V: np.ndarray,
                          out: np.ndarray, heads: int = 1) -> np.ndarray:
    """Cross-attention via explicit per-row, per-head softmax loops (fp64)."""
    n, d = queries.shape
    m = keys_values.shape[0]
    hd = d // heads
    q = queries @ Q.T
    k = keys_values @ K.T
    v = keys_values @ V.T
    fused = np.zeros((n, d), dtype=np.float64)
    for i in range(n):
        for h in range(heads):
            sl = slice(h * hd, (h + 1) * hd)
            logits = np.array([float(q[i, sl] @ k[j, sl]) / math.sqrt(hd) for j in range(m)])
            weights = np.exp(logits - logits.max())
            weights = weights / weights.sum()
            acc = np.zeros(hd, dtype=np.float64)
            for j in range(m):
                acc += weights[j] * v[j, sl]
            fused[i, sl] = acc
    return fused @ out.T


def brute_force_mha(x: np.ndarray, context: np.ndarray, module) -> np.ndarray:
    """Same loop oracle driven by a MultiHeadAttention module's weights."""
    Q = module.to_q.weight.detach().cpu().double().numpy()
    K = module.to_k.weight.detach().cpu().double().numpy()
    V = module.to_v.weight.detach().cpu().double().numpy()
    out = module.to_out.weight.detach().cpu().double().numpy()
    return brute_force_attention(x, context, Q, K, V, out, heads=module.heads)


def central_difference_grads(loss_fn, params: list[torch.Tensor], step: float = 1e-5):
    """Numeric gradient of a scalar loss w.r.t. each fp64 parameter tensor."""
    grads = []
    for p in params:
        g = torch.zeros_like(p)
        flat, gflat = p.data.view(-1), g.view(-1)
        for i in range(flat.numel()):
            orig = float(flat[i])
            flat[i] = orig + step
            f_plus = float(loss_fn())
            flat[i] = orig - step
            f_minus = float(loss_fn())
            flat[i] = orig
            gflat[i] = (f_plus - f_minus) / (2.0 * step)
        grads.append(g)
    return grads


def relative_error(a: torch.Tensor, b: torch.Tensor) -> float:
    denom = max(float(a.norm()), float(b.norm()), 1e-12)
    return float((a - b).norm()) / denom


def gradcheck_module(module: torch.nn.Module, loss_fn, tol: float = 1e-4,
                     step: float = 1e-5) -> list[tuple[str, float]]:
    """Compare autograd gradients of loss_fn() against central differences.

    The module must already be double(); returns (param name, rel err) rows.
    """
    params = [(n, p) for n, p in module.named_parameters() if p.requires_grad]
    for _, p in params:
        if p.grad is not None:
            p.grad = None
    loss = loss_fn()
    loss.backward()
    analytic = [p.grad.detach().clone() for _, p in params]
    with torch.no_grad():
        numeric = central_difference_grads(loss_fn, [p for _, p in params], step)
    rows = []
    for (name, _), ga, gn in zip(params, analytic, numeric):
        rows.append((name, relative_error(ga, gn)))
    return rows


def scalar_add_noise(x0: np.ndarray, alpha_bar: float, noise: np.ndarray) -> np.ndarray:
    """Elementwise forward-process formula, scalar loop."""
    out = np.empty_like(x0)
    flat_x, flat_n, flat_o = x0.ravel(), noise.ravel(), out.ravel()
    a = math.sqrt(alpha_bar)
    b = math.sqrt(1.0 - alpha_bar)
    for i in range(flat_x.size):
        flat_o[i] = a * flat_x[i] + b * flat_n[i]
    return out


def checkerboard(size: int = 64, cell: int = 8) -> np.ndarray:
    """Binary checkerboard sketch in [0, 1]."""
    idx = np.add.outer(np.arange(size) // cell, np.arange(size) // cell)
    return (idx % 2).astype(np.float32)
