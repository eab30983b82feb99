"""Finite-difference gradient verification for the training losses."""

import torch


def finite_difference_grads(loss_fn, params, eps: float = 1e-5):
    """Central-difference gradients of ``loss_fn()`` w.r.t. each tensor in ``params``.

    Evaluates the loss with elements perturbed one at a time, so keep the
    models tiny; meant for 64-bit toy cases only.
    """
    grads = []
    with torch.no_grad():
        for p in params:
            g = torch.zeros_like(p)
            flat = p.view(-1)
            gflat = g.view(-1)
            for i in range(flat.numel()):
                orig = flat[i].item()
                flat[i] = orig + eps
                hi = float(loss_fn())
                flat[i] = orig - eps
                lo = float(loss_fn())
                flat[i] = orig
                gflat[i] = (hi - lo) / (2.0 * eps)
            grads.append(g)
    return grads


def gradient_relative_error(loss_fn, params, eps: float = 1e-5, floor: float = 1e-6) -> float:
    """Max elementwise relative error between autograd and central differences.

    Relative error is |a - n| / max(|a| + |n|, floor); the floor keeps
    near-zero gradient pairs from registering as disagreement.
    """
    params = list(params)
    for p in params:
        if p.grad is not None:
            p.grad = None
    loss = loss_fn()
    loss.backward()
    analytic = [p.grad.detach().clone() if p.grad is not None else torch.zeros_like(p) for p in params]
    numeric = finite_difference_grads(loss_fn, params, eps=eps)
    worst = 0.0
    for a, n in zip(analytic, numeric):
        denom = torch.clamp(a.abs() + n.abs(), min=floor)
        worst = max(worst, float(((a - n).abs() / denom).max()))
    return worst
