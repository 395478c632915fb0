"""Reference mask losses with analytic gradients and a finite-difference verifier.

Both losses average over all H*W pixels of one mask pair and are computed
in double precision. The scored-mask loss is half the mean squared error:

    smask:  sum((t - p)^2) / (2 H W)        grad: (p - t) / (H W)

The thick-mask loss is mean binary cross-entropy with predictions clamped
to [BCE_EPS, 1 - BCE_EPS]; its gradient is evaluated at the clamped values:

    tmask:  -sum(t log p + (1 - t) log(1 - p)) / (H W)
            grad: (p - t) / (p (1 - p) H W)
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatchError, DomainError

BCE_EPS = 1e-7

GRADIENT_FLOOR = 1e-12  # pixels with a smaller analytic gradient are skipped


@dataclass(frozen=True)
class LossWeights:
    """Non-negative mixing weights for the composed detector loss."""

    alpha: float = 1.0
    beta: float = 1.0
    gamma: float = 1.0
    delta: float = 1.0

    def __post_init__(self):
        for name in ("alpha", "beta", "gamma", "delta"):
            if getattr(self, name) < 0:
                raise DomainError(f"loss weight {name} must be non-negative")


def _paired(target, pred):
    t = np.asarray(target, dtype=np.float64)
    p = np.asarray(pred, dtype=np.float64)
    if t.ndim != 2 or p.ndim != 2 or t.shape != p.shape:
        raise DimensionMismatchError(
            f"target shape {t.shape} and prediction shape {p.shape} must be equal 2-D"
        )
    return t, p


def smask_loss(target, pred) -> tuple[float, np.ndarray]:
    """Scored-mask loss and its per-pixel gradient with respect to pred."""
    t, p = _paired(target, pred)
    hw = t.size
    loss = float(np.sum((t - p) ** 2) / (2.0 * hw))
    grad = (p - t) / hw
    return loss, grad


def tmask_loss(target, pred) -> tuple[float, np.ndarray]:
    """Thick-mask cross-entropy loss and gradient; target must be binary."""
    t, p = _paired(target, pred)
    if not np.all((t == 0.0) | (t == 1.0)):
        raise DomainError("thick-mask loss needs a binary target")
    hw = t.size
    pc = np.clip(p, BCE_EPS, 1.0 - BCE_EPS)
    loss = float(-np.sum(t * np.log(pc) + (1.0 - t) * np.log1p(-pc)) / hw)
    grad = (pc - t) / (pc * (1.0 - pc) * hw)
    return loss, grad


def total_loss(
    l_rpn: float,
    l_rcn: float,
    l_mask: float,
    l_imask: float = 0.0,
    weights: LossWeights | None = None,
    plus_variant: bool = False,
) -> float:
    """Weighted sum of the component losses.

    The instance-mask term l_imask participates only in the plus variant.
    All components must be non-negative.
    """
    weights = weights or LossWeights()
    for name, value in (
        ("l_rpn", l_rpn),
        ("l_rcn", l_rcn),
        ("l_mask", l_mask),
        ("l_imask", l_imask),
    ):
        if value < 0:
            raise DomainError(f"component loss {name} must be non-negative")
    total = weights.alpha * l_rpn + weights.beta * l_rcn + weights.gamma * l_mask
    if plus_variant:
        total += weights.delta * l_imask
    return float(total)


_LOSS_FNS = {"smask": smask_loss, "tmask": tmask_loss}


def finite_diff_check(loss_kind: str, target, pred, step: float = 1e-5) -> float:
    """Max relative error between central differences and the analytic gradient.

    Each pixel of pred is perturbed by +-step and the loss re-evaluated.
    Pixels whose analytic gradient magnitude is at most GRADIENT_FLOOR are
    excluded; returns 0.0 when no pixel remains. For the tmask loss keep
    pred inside [2 * step, 1 - 2 * step] so perturbed points stay clear of
    the clamp region.
    """
    if loss_kind not in _LOSS_FNS:
        raise DomainError(f"loss_kind must be one of {sorted(_LOSS_FNS)}, got {loss_kind!r}")
    if step <= 0:
        raise DomainError(f"step must be positive, got {step!r}")
    loss_fn = _LOSS_FNS[loss_kind]
    t, p = _paired(target, pred)
    _, grad = loss_fn(t, p)
    fd = np.zeros_like(grad)
    for idx in np.ndindex(p.shape):
        bumped = p.copy()
        bumped[idx] = p[idx] + step
        hi = loss_fn(t, bumped)[0]
        bumped[idx] = p[idx] - step
        lo = loss_fn(t, bumped)[0]
        fd[idx] = (hi - lo) / (2.0 * step)
    keep = np.abs(grad) > GRADIENT_FLOOR
    if not np.any(keep):
        return 0.0
    rel = np.abs(fd - grad)[keep] / np.abs(grad)[keep]
    return float(rel.max())
