"""Classification losses on labeled samples and element centers, with
analytic gradients with respect to the flat 7N parameter vector."""

from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np

from . import _field_kernels as _k
from .core import DEFAULT_ALPHA, _sigmoid
from .errors import InvalidInputError


@dataclass(frozen=True)
class LossWeights:
    w_u: float = 1.0
    w_s: float = 0.1
    w_a: float = 10.0 / 3.0
    w_b: float = 0.01
    alpha: float = DEFAULT_ALPHA
    beta: float = 10.0

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if not (isinstance(v, (int, float)) and v >= 0):
                raise InvalidInputError(f"loss weight {f.name} must be a non-negative number, got {v!r}")
        if not (self.alpha > 0 and self.beta > 0):
            raise InvalidInputError("alpha and beta must be positive")


@dataclass(frozen=True)
class LossReport:
    total: float
    l_u: float
    l_s: float
    l_c: float
    grad: np.ndarray

    @property
    def per_term(self):
        return (self.l_u, self.l_s, self.l_c)


def _args(template):
    return template.constants, template.centers, template.radii


def loss_uniform(template, samples, weights=LossWeights()):
    """Mean of beta*G^2 over inside samples and (1-G)^2 over outside samples.

    Returns ``(value, grad)`` where grad has length 7N.
    """
    m = len(samples)
    if m == 0:
        raise InvalidInputError("loss needs at least one sample")
    total, grad = _k.classification(
        np.ascontiguousarray(samples.points), samples.labels, *_args(template),
        float(weights.alpha), float(weights.beta), float(template.isolevel),
    )
    return float(total / m), grad.reshape(-1) / m


# same functional form; only the sample locations differ
loss_near_surface = loss_uniform


def loss_centers(template, bbox, weights=LossWeights()):
    """Mean over elements of w_a*G(p_i)^2 for centers inside ``bbox`` and
    w_b * squared excursion beyond the box faces otherwise."""
    lo, hi = (np.asarray(b, dtype=float) for b in bbox)
    if np.any(hi < lo):
        raise InvalidInputError("bbox upper corner below lower corner")
    p = np.ascontiguousarray(template.centers)
    n = len(p)
    below = np.maximum(lo - p, 0.0)
    above = np.maximum(p - hi, 0.0)
    excursion = np.maximum(below, above)
    inside = ~np.any((p < lo) | (p > hi), axis=1)

    f, dfdx = _k.position_grad(p, *_args(template))
    g = _sigmoid(weights.alpha * (f - template.isolevel))
    per = np.where(inside, weights.w_a * g * g, weights.w_b * np.sum(excursion ** 2, axis=1))

    grad = np.zeros((n, 7))
    # inside-box elements: d/dTheta of G(p_i, Theta)^2, through every element
    # and through the query point p_i itself
    df = np.where(inside, weights.w_a * 2.0 * g * weights.alpha * g * (1.0 - g), 0.0) / n
    grad += _k.weighted_param_grad(p, df, *_args(template))
    grad[:, 1:4] += df[:, None] * dfdx
    # outside-box elements: direct pull back toward the box
    sign = np.where(above > below, 1.0, -1.0)
    grad[:, 1:4] += np.where(inside[:, None], 0.0, weights.w_b * 2.0 * excursion * sign / n)
    return float(np.sum(per) / n), grad.reshape(-1)


def loss_total(template, uniform, near_surface, bbox, weights=LossWeights()):
    l_u, g_u = loss_uniform(template, uniform, weights)
    l_s, g_s = loss_near_surface(template, near_surface, weights)
    l_c, g_c = loss_centers(template, bbox, weights)
    total = weights.w_u * l_u + weights.w_s * l_s + l_c
    grad = weights.w_u * g_u + weights.w_s * g_s + g_c
    return LossReport(total, l_u, l_s, l_c, grad)
