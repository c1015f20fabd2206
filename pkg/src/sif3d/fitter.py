"""Direct per-shape template fitting with Adam on the classification losses."""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .core import DEFAULT_ISOLEVEL, Template, classify_hard
from .errors import InvalidInputError, NumericalError
from .losses import LossWeights, loss_total

log = logging.getLogger(__name__)

INIT_RADIUS = 0.05
INIT_CONSTANT = -1.0
INIT_SHRINK = 0.1


@dataclass(frozen=True)
class FitConfig:
    elements: int = 100
    steps: int = 3000
    learning_rate: float = 1e-2
    final_learning_rate: float = 1e-4
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    uniform_batch: int = 3000
    near_surface_batch: int = 3000
    seed: int = 0
    isolevel: float = DEFAULT_ISOLEVEL
    weights: LossWeights = field(default_factory=LossWeights)
    log_every: int = 100

    def __post_init__(self):
        if self.elements < 1:
            raise InvalidInputError("elements must be >= 1")
        if self.steps < 0:
            raise InvalidInputError("steps must be >= 0")
        if not self.learning_rate > 0 or not self.final_learning_rate > 0:
            raise InvalidInputError("learning rates must be positive")
        if self.uniform_batch < 1 or self.near_surface_batch < 1:
            raise InvalidInputError("batch sizes must be positive")
        if self.log_every < 1:
            raise InvalidInputError("log_every must be positive")

    def with_(self, **kw):
        return replace(self, **kw)


class Adam:
    """Bias-corrected Adam over a single flat parameter array."""

    def __init__(self, shape, lr=1e-2, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.m = np.zeros(shape)
        self.v = np.zeros(shape)
        self.t = 0

    def step(self, params, grad, lr=None):
        lr = self.lr if lr is None else lr
        self.t += 1
        self.m *= self.beta1
        self.m += (1.0 - self.beta1) * grad
        self.v *= self.beta2
        self.v += (1.0 - self.beta2) * grad * grad
        m_hat = self.m / (1.0 - self.beta1 ** self.t)
        v_hat = self.v / (1.0 - self.beta2 ** self.t)
        return params - lr * m_hat / (np.sqrt(v_hat) + self.eps)


def cosine_lr(step, total, start, end):
    if total <= 1:
        return start
    return end + 0.5 * (start - end) * (1.0 + math.cos(math.pi * step / (total - 1)))


@dataclass
class TraceRow:
    step: int
    total: float
    l_u: float
    l_s: float
    l_c: float
    accuracy: float


@dataclass
class FitTrace:
    rows: list = field(default_factory=list)

    def append(self, row):
        if self.rows and row.step <= self.rows[-1].step:
            raise ValueError("trace steps must increase")
        self.rows.append(row)

    def __len__(self):
        return len(self.rows)

    def __iter__(self):
        return iter(self.rows)

    @property
    def final(self):
        return self.rows[-1] if self.rows else None

    def totals(self):
        return np.array([r.total for r in self.rows])

    def write_csv(self, path):
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["step", "total", "l_u", "l_s", "l_c", "accuracy"])
            for r in self.rows:
                w.writerow([r.step, repr(r.total), repr(r.l_u), repr(r.l_s), repr(r.l_c), repr(r.accuracy)])

    @classmethod
    def read_csv(cls, path):
        trace = cls()
        with Path(path).open() as fh:
            for rec in csv.DictReader(fh):
                trace.append(TraceRow(int(rec["step"]), float(rec["total"]), float(rec["l_u"]),
                                      float(rec["l_s"]), float(rec["l_c"]), float(rec["accuracy"])))
        return trace


def classification_accuracy(template, samples):
    """Fraction of samples whose hard inside/outside label matches."""
    if len(samples) == 0:
        raise InvalidInputError("accuracy needs at least one sample")
    pred = classify_hard(template, samples.points)
    return float(np.mean(pred == samples.labels))


def init_template(config, bbox, seed=None):
    """Random centers in the bbox shrunk by 10%, radii 0.05, constants -1."""
    lo, hi = (np.asarray(b, dtype=float) for b in bbox)
    span = hi - lo
    if np.any(span <= 0):
        raise InvalidInputError("bbox must have positive extent on every axis")
    rng = np.random.default_rng(config.seed if seed is None else seed)
    margin = 0.5 * INIT_SHRINK * span
    centers = lo + margin + rng.random((config.elements, 3)) * (span - 2 * margin)
    return Template(
        np.full(config.elements, INIT_CONSTANT),
        centers,
        np.full((config.elements, 3), INIT_RADIUS),
        config.isolevel,
    )


def _check_finite(report, step):
    for name, v in (("L_U", report.l_u), ("L_S", report.l_s), ("L_C", report.l_c)):
        if not math.isfinite(v):
            raise NumericalError(f"non-finite {name} ({v}) at step {step}")
    if not np.all(np.isfinite(report.grad)):
        raise NumericalError(f"non-finite gradient at step {step}")


def fit(uniform, near_surface, bbox, config=FitConfig(), init=None, eval_samples=None):
    """Optimize a template against prepared samples.

    Each step draws a fresh mini-batch (without replacement) from both
    sample pools. Returns ``(template, trace)``; the trace logs every
    ``log_every`` steps and the last step, with accuracy measured on
    ``eval_samples`` (the full uniform pool by default).
    """
    if len(uniform) == 0 or len(near_surface) == 0:
        raise InvalidInputError("both sample pools must be nonempty")
    template = init if init is not None else init_template(config, bbox)
    if init is not None and init.n_elements != config.elements:
        config = config.with_(elements=init.n_elements)
    eval_samples = uniform if eval_samples is None else eval_samples
    trace = FitTrace()
    if config.steps == 0:
        return template, trace

    rng = np.random.default_rng(config.seed)
    iso = template.isolevel
    u = template.to_unconstrained()
    opt = Adam(u.shape, config.learning_rate, config.adam_beta1, config.adam_beta2, config.adam_eps)
    nu = min(config.uniform_batch, len(uniform))
    ns = min(config.near_surface_batch, len(near_surface))
    w = config.weights

    for step in range(config.steps):
        bu = uniform.take(rng.choice(len(uniform), nu, replace=False))
        bs = near_surface.take(rng.choice(len(near_surface), ns, replace=False))
        report = loss_total(template, bu, bs, bbox, w)
        _check_finite(report, step)
        if step % config.log_every == 0:
            trace.append(TraceRow(step, report.total, report.l_u, report.l_s, report.l_c,
                                  classification_accuracy(template, eval_samples)))
            log.info("step %d loss %.6g acc %.4f", step, report.total, trace.final.accuracy)
        grad_u = report.grad.reshape(-1, 7) * template.unconstrained_jacobian()
        u = opt.step(u, grad_u, cosine_lr(step, config.steps, config.learning_rate, config.final_learning_rate))
        if not np.all(np.isfinite(u)):
            raise NumericalError(f"parameters became non-finite after step {step}")
        template = Template.from_unconstrained(u, iso)
        assert np.all(template.constants < 0) and np.all(template.radii > 0)

    final = loss_total(template, bu, bs, bbox, w)
    _check_finite(final, config.steps)
    trace.append(TraceRow(config.steps, final.total, final.l_u, final.l_s, final.l_c,
                          classification_accuracy(template, eval_samples)))
    return template, trace
